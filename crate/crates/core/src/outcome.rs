//! Per-sample evaluation outcomes and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::curation::Label;
use crate::error::PredictorError;

pub const OUTCOMES_HEADER: [&str; 8] = ["test_id", "label", "rank", "y1", "y5", "y10", "f_avg", "f_cap"];

/// Result of scoring one test sample.
///
/// `rank` is the 1-based rank of the best ground-truth item, or `None` for
/// outcomes drawn directly from a success model. When a rank is present the
/// indicators satisfy `y_k = (rank <= k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub test_id: String,
    pub label: Label,
    pub rank: Option<usize>,
    pub y1: bool,
    pub y5: bool,
    pub y10: bool,
    pub f_avg: f64,
    pub f_cap: u64,
}

impl EvalOutcome {
    pub fn from_rank(test_id: String, label: Label, rank: usize, f_avg: f64, f_cap: u64) -> Self {
        Self {
            test_id,
            label,
            rank: Some(rank),
            y1: rank <= 1,
            y5: rank <= 5,
            y10: rank <= 10,
            f_avg,
            f_cap,
        }
    }

    /// A rank-free outcome with the same success at every cutoff.
    pub fn from_success(test_id: String, label: Label, y: bool, f_avg: f64, f_cap: u64) -> Self {
        Self {
            test_id,
            label,
            rank: None,
            y1: y,
            y5: y,
            y10: y,
            f_avg,
            f_cap,
        }
    }

    /// Success at cutoff `k`, if determinable.
    pub fn hit(&self, k: usize) -> Option<bool> {
        match (self.rank, k) {
            (Some(rank), _) => Some(rank <= k),
            (None, 1) => Some(self.y1),
            (None, 5) => Some(self.y5),
            (None, 10) => Some(self.y10),
            (None, _) => None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    test_id: String,
    label: String,
    rank: Option<usize>,
    y1: u8,
    y5: u8,
    y10: u8,
    f_avg: f64,
    f_cap: u64,
}

pub fn write_outcomes<W: Write>(out: W, outcomes: &[EvalOutcome]) -> Result<(), PredictorError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(OUTCOMES_HEADER)?;
    for o in outcomes {
        w.serialize(Row {
            test_id: o.test_id.clone(),
            label: o.label.to_string(),
            rank: o.rank,
            y1: o.y1.into(),
            y5: o.y5.into(),
            y10: o.y10.into(),
            f_avg: o.f_avg,
            f_cap: o.f_cap,
        })?;
    }
    w.flush().map_err(|source| PredictorError::Io {
        path: "<outcomes>".into(),
        source,
    })
}

pub fn read_outcomes<R: Read>(input: R) -> Result<Vec<EvalOutcome>, PredictorError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != OUTCOMES_HEADER {
        return Err(PredictorError::CsvRow {
            row: 0,
            reason: format!("expected header {}", OUTCOMES_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<Row>().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let bad = |reason: String| PredictorError::CsvRow { row: row_no, reason };
        let label = row.label.parse().map_err(bad)?;
        let flag = |v: u8, name: &str| match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(PredictorError::CsvRow {
                row: row_no,
                reason: format!("{name} must be 0 or 1"),
            }),
        };
        let outcome = EvalOutcome {
            test_id: row.test_id,
            label,
            rank: row.rank,
            y1: flag(row.y1, "y1")?,
            y5: flag(row.y5, "y5")?,
            y10: flag(row.y10, "y10")?,
            f_avg: row.f_avg,
            f_cap: row.f_cap,
        };
        if !(outcome.f_avg > 0.0 && outcome.f_avg.is_finite()) {
            return Err(bad(format!("f_avg {} must be positive", outcome.f_avg)));
        }
        if (outcome.y1 && !outcome.y5) || (outcome.y5 && !outcome.y10) {
            return Err(bad("indicators must be nondecreasing in k".into()));
        }
        if let Some(rank) = outcome.rank {
            if rank == 0 || EvalOutcome::from_rank(String::new(), label, rank, 1.0, 0).y_vec() != outcome.y_vec() {
                return Err(bad(format!("indicators disagree with rank {rank}")));
            }
        }
        out.push(outcome);
    }
    Ok(out)
}

impl EvalOutcome {
    fn y_vec(&self) -> [bool; 3] {
        [self.y1, self.y5, self.y10]
    }
}

/// Aggregate Recall@k for one label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallSummary {
    pub label: Label,
    pub k: usize,
    pub n: usize,
    pub recall: f64,
}

/// Mean success per (label, k) over outcomes whose success at `k` is known.
pub fn recall_at_k(outcomes: &[EvalOutcome], ks: &[usize]) -> Vec<RecallSummary> {
    let mut out = Vec::new();
    for label in [Label::Known, Label::Novel] {
        for &k in ks {
            let hits: Vec<bool> = outcomes
                .iter()
                .filter(|o| o.label == label)
                .filter_map(|o| o.hit(k))
                .collect();
            if hits.is_empty() {
                continue;
            }
            out.push(RecallSummary {
                label,
                k,
                n: hits.len(),
                recall: hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64,
            });
        }
    }
    out
}
