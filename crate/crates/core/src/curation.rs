//! Partitioning of retrieval test sets into known-combination,
//! novel-combination and excluded samples relative to a pretraining index.
//!
//! A sample needs at least two concepts to be scored. It is *novel* when
//! every concept was seen during pretraining but never all together
//! (co-occurrence frequency zero), and *known* when they did co-occur.
//! Samples with fewer than two concepts, or any unseen concept, are
//! excluded.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CurationError, IndexError};
use crate::index::ConceptIndex;
use crate::ingest::ConceptExtractor;
use crate::vocab::ConceptSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    /// Text query against an image gallery.
    #[serde(rename = "t2i")]
    CaptionQuery,
    /// Image query against a caption gallery.
    #[serde(rename = "i2t")]
    ImageQuery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Known,
    Novel,
    Excluded,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Known, Label::Novel, Label::Excluded];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Known => "known",
            Label::Novel => "novel",
            Label::Excluded => "excluded",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "known" => Ok(Label::Known),
            "novel" => Ok(Label::Novel),
            "excluded" => Ok(Label::Excluded),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// One line of the test-set manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub test_id: String,
    pub modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
    pub payload_row: usize,
    pub gt_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSample {
    pub test_id: String,
    pub modality: Modality,
    pub concepts: ConceptSet,
    pub payload_ref: usize,
    pub gt_refs: Vec<usize>,
}

impl TestSample {
    /// Caption queries take their concepts from the caption text alone;
    /// image queries from the image's tags.
    pub fn from_manifest(entry: &ManifestEntry, extractor: &ConceptExtractor) -> Result<Self, String> {
        if entry.gt_rows.is_empty() {
            return Err(format!("test sample {:?} has no ground-truth rows", entry.test_id));
        }
        let concepts = match entry.modality {
            Modality::CaptionQuery => {
                let caption = entry
                    .caption
                    .as_deref()
                    .ok_or_else(|| format!("t2i sample {:?} has no caption", entry.test_id))?;
                extractor.text_concepts(caption)
            }
            Modality::ImageQuery => {
                let tags = entry
                    .tags
                    .as_deref()
                    .ok_or_else(|| format!("i2t sample {:?} has no tags", entry.test_id))?;
                extractor.tag_concepts(tags)
            }
        };
        let mut gt_refs = entry.gt_rows.clone();
        gt_refs.sort_unstable();
        gt_refs.dedup();
        Ok(Self {
            test_id: entry.test_id.clone(),
            modality: entry.modality,
            concepts,
            payload_ref: entry.payload_row,
            gt_refs,
        })
    }
}

/// Reads a manifest, resolving concepts for each entry. Any malformed line
/// is an error naming its line number.
pub fn read_manifest<R: BufRead>(
    source: R,
    extractor: &ConceptExtractor,
) -> Result<Vec<(ManifestEntry, TestSample)>, CurationError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CurationError::Manifest {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| CurationError::Manifest {
            line: line_no,
            reason: e.to_string(),
        })?;
        if !seen.insert(entry.test_id.clone()) {
            return Err(CurationError::DuplicateTestId {
                test_id: entry.test_id,
                line: line_no,
            });
        }
        let sample = TestSample::from_manifest(&entry, extractor).map_err(|reason| CurationError::Manifest {
            line: line_no,
            reason,
        })?;
        out.push((entry, sample));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub label: Label,
    pub f_cap: u64,
    pub f_per_concept: Vec<u64>,
}

/// Labels one sample against the pretraining index.
pub fn classify_sample(x: &TestSample, index: &ConceptIndex) -> Result<Classification, IndexError> {
    let ids = x.concepts.as_slice();
    let f_per_concept = ids.iter().map(|&c| index.frequency(c)).collect::<Result<Vec<_>, _>>()?;
    let f_cap = if ids.is_empty() {
        0
    } else {
        index.cooccurrence_frequency(ids)?
    };
    let label = if ids.len() < 2 || f_per_concept.contains(&0) {
        Label::Excluded
    } else if f_cap == 0 {
        Label::Novel
    } else {
        Label::Known
    };
    Ok(Classification {
        label,
        f_cap,
        f_per_concept,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CuratedSample {
    pub sample: TestSample,
    pub classification: Classification,
}

impl CuratedSample {
    pub fn label(&self) -> Label {
        self.classification.label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationSummary {
    pub total: usize,
    pub known: usize,
    pub novel: usize,
    pub excluded: usize,
    pub percent_known: f64,
    pub percent_novel: f64,
    pub percent_excluded: f64,
}

impl CurationSummary {
    pub fn from_labels(labels: impl IntoIterator<Item = Label>) -> Self {
        let (mut known, mut novel, mut excluded) = (0, 0, 0);
        for label in labels {
            match label {
                Label::Known => known += 1,
                Label::Novel => novel += 1,
                Label::Excluded => excluded += 1,
            }
        }
        let total = known + novel + excluded;
        let pct = |n: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
        Self {
            total,
            known,
            novel,
            excluded,
            percent_known: pct(known),
            percent_novel: pct(novel),
            percent_excluded: pct(excluded),
        }
    }

    pub fn count(&self, label: Label) -> usize {
        match label {
            Label::Known => self.known,
            Label::Novel => self.novel,
            Label::Excluded => self.excluded,
        }
    }

    pub fn percent(&self, label: Label) -> f64 {
        match label {
            Label::Known => self.percent_known,
            Label::Novel => self.percent_novel,
            Label::Excluded => self.percent_excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuratedTestSet {
    pub samples: Vec<CuratedSample>,
    pub summary: CurationSummary,
}

impl CuratedTestSet {
    pub fn with_label(&self, label: Label) -> impl Iterator<Item = &CuratedSample> {
        self.samples.iter().filter(move |s| s.label() == label)
    }
}

/// Labels every sample; output order equals input order.
pub fn curate(samples: &[TestSample], index: &ConceptIndex) -> Result<CuratedTestSet, IndexError> {
    let classified = samples
        .par_iter()
        .map(|s| classify_sample(s, index))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = CurationSummary::from_labels(classified.iter().map(|c| c.label));
    let samples = samples
        .iter()
        .cloned()
        .zip(classified)
        .map(|(sample, classification)| CuratedSample {
            sample,
            classification,
        })
        .collect();
    Ok(CuratedTestSet { samples, summary })
}

/// One line of the curated JSON-lines output: the manifest entry plus its
/// classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuratedRecord {
    #[serde(flatten)]
    pub entry: ManifestEntry,
    pub label: Label,
    pub f_cap: u64,
    pub f_per_concept: Vec<u64>,
}

pub fn write_curated<W: Write>(
    mut out: W,
    entries: &[ManifestEntry],
    curated: &CuratedTestSet,
) -> std::io::Result<()> {
    for (entry, sample) in entries.iter().zip(&curated.samples) {
        let record = CuratedRecord {
            entry: entry.clone(),
            label: sample.classification.label,
            f_cap: sample.classification.f_cap,
            f_per_concept: sample.classification.f_per_concept.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_curated<R: BufRead>(source: R) -> Result<Vec<CuratedRecord>, CurationError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| CurationError::Manifest {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CuratedRecord = serde_json::from_str(&line).map_err(|e| CurationError::Manifest {
            line: i + 1,
            reason: format!("not a curated record ({e}); run `curate` first"),
        })?;
        if record.entry.gt_rows.is_empty() {
            return Err(CurationError::NoGroundTruth {
                test_id: record.entry.test_id,
            });
        }
        out.push(record);
    }
    Ok(out)
}
