//! Per-sample Recall@k from dense embeddings.
//!
//! Similarity is the dot product of unit-norm rows. The gallery is ordered
//! by descending similarity with ties broken by ascending row index, and a
//! sample's rank is the best rank reached by any of its ground-truth rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curation::{CuratedRecord, CuratedSample, Label};
use crate::embedding::EmbeddingMatrix;
use crate::error::RetrievalError;
use crate::outcome::EvalOutcome;
use crate::predictor::sample_frequency;

/// Dot product accumulated in f64, in row order.
pub fn similarity(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// Rank of the best ground-truth row for one query against the full gallery.
pub fn rank_of_best_gt(query: &[f32], gallery: &EmbeddingMatrix, gt_rows: &[usize]) -> Result<usize, RetrievalError> {
    rank_within(query, gallery, gt_rows, None)
}

/// As [`rank_of_best_gt`], ranking only gallery rows where `allowed` is true.
/// Ground-truth rows always take part.
pub fn rank_within(
    query: &[f32],
    gallery: &EmbeddingMatrix,
    gt_rows: &[usize],
    allowed: Option<&[bool]>,
) -> Result<usize, RetrievalError> {
    if query.len() != gallery.dim() {
        return Err(RetrievalError::DimensionMismatch {
            queries: query.len(),
            gallery: gallery.dim(),
        });
    }
    if gt_rows.is_empty() {
        return Err(RetrievalError::EmptyGroundTruth { test_id: String::new() });
    }
    if let Some(&row) = gt_rows.iter().find(|&&r| r >= gallery.rows()) {
        return Err(RetrievalError::RowOutOfRange {
            what: "ground-truth",
            row,
            rows: gallery.rows(),
        });
    }
    let sims: Vec<f64> = (0..gallery.rows()).map(|r| similarity(query, gallery.row(r))).collect();
    // Best ground truth: highest similarity, lowest row on ties.
    let best = gt_rows
        .iter()
        .copied()
        .reduce(|a, b| {
            if sims[b] > sims[a] || (sims[b] == sims[a] && b < a) {
                b
            } else {
                a
            }
        })
        .expect("non-empty");
    let s = sims[best];
    let ahead = sims
        .iter()
        .enumerate()
        .filter(|&(j, &sj)| {
            allowed.is_none_or(|mask| mask[j]) && (sj > s || (sj == s && j < best))
        })
        .count();
    Ok(ahead + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GalleryScope {
    /// Rank against every gallery row.
    #[default]
    Full,
    /// Rank only against ground-truth rows of scored samples.
    Curated,
}

/// What [`evaluate`] needs to know about one curated sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoringItem {
    pub test_id: String,
    pub label: Label,
    pub payload_row: usize,
    pub gt_rows: Vec<usize>,
    pub f_cap: u64,
    pub f_per_concept: Vec<u64>,
}

impl From<&CuratedRecord> for ScoringItem {
    fn from(r: &CuratedRecord) -> Self {
        Self {
            test_id: r.entry.test_id.clone(),
            label: r.label,
            payload_row: r.entry.payload_row,
            gt_rows: r.entry.gt_rows.clone(),
            f_cap: r.f_cap,
            f_per_concept: r.f_per_concept.clone(),
        }
    }
}

impl From<&CuratedSample> for ScoringItem {
    fn from(s: &CuratedSample) -> Self {
        Self {
            test_id: s.sample.test_id.clone(),
            label: s.classification.label,
            payload_row: s.sample.payload_ref,
            gt_rows: s.sample.gt_refs.clone(),
            f_cap: s.classification.f_cap,
            f_per_concept: s.classification.f_per_concept.clone(),
        }
    }
}

/// Scores every non-excluded item. Unnormalized matrices are normalized
/// first; output order follows input order.
pub fn evaluate(
    items: &[ScoringItem],
    queries: &EmbeddingMatrix,
    gallery: &EmbeddingMatrix,
    scope: GalleryScope,
) -> Result<Vec<EvalOutcome>, RetrievalError> {
    if queries.dim() != gallery.dim() {
        return Err(RetrievalError::DimensionMismatch {
            queries: queries.dim(),
            gallery: gallery.dim(),
        });
    }
    let queries = if queries.is_normalized() {
        queries.clone()
    } else {
        queries.normalize_rows()?
    };
    let gallery = if gallery.is_normalized() {
        gallery.clone()
    } else {
        gallery.normalize_rows()?
    };
    let scored: Vec<&ScoringItem> = items.iter().filter(|i| i.label != Label::Excluded).collect();
    for item in &scored {
        if item.gt_rows.is_empty() {
            return Err(RetrievalError::EmptyGroundTruth {
                test_id: item.test_id.clone(),
            });
        }
        if item.payload_row >= queries.rows() {
            return Err(RetrievalError::RowOutOfRange {
                what: "payload",
                row: item.payload_row,
                rows: queries.rows(),
            });
        }
    }
    let mask = match scope {
        GalleryScope::Full => None,
        GalleryScope::Curated => {
            let mut mask = vec![false; gallery.rows()];
            for item in &scored {
                for &r in &item.gt_rows {
                    if let Some(slot) = mask.get_mut(r) {
                        *slot = true;
                    }
                }
            }
            Some(mask)
        }
    };
    scored
        .par_iter()
        .map(|item| {
            let rank = rank_within(queries.row(item.payload_row), &gallery, &item.gt_rows, mask.as_deref())?;
            let f_avg = sample_frequency(&item.f_per_concept)?;
            Ok(EvalOutcome::from_rank(
                item.test_id.clone(),
                item.label,
                rank,
                f_avg,
                item.f_cap,
            ))
        })
        .collect()
}
