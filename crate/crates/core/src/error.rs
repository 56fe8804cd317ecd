use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("exception table line {line}: {reason}")]
    InvalidException { line: usize, reason: String },
    #[error("vocabulary line {line}: entry {entry:?} {reason}")]
    InvalidVocabulary {
        line: usize,
        entry: String,
        reason: String,
    },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("vocabulary entry {entry:?} is not a lemma (lemmatizes to {lemma:?})")]
    NotALemma { entry: String, lemma: String },
    #[error("duplicate sample id {id:?} at line {line}")]
    DuplicateSampleId { id: String, line: usize },
    #[error("reading line {line}: {source}")]
    Read { line: usize, source: io::Error },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("concept id {id} out of range for vocabulary of size {vocab_size}")]
    ConceptOutOfRange { id: u32, vocab_size: usize },
    #[error("co-occurrence query needs at least one concept")]
    EmptyQuery,
    #[error("bad magic at offset {offset}")]
    BadMagic { offset: usize },
    #[error("unsupported version {version} at offset {offset}")]
    UnsupportedVersion { version: u16, offset: usize },
    #[error("unsupported flags {flags:#06x} at offset {offset}")]
    UnsupportedFlags { flags: u16, offset: usize },
    #[error("truncated file: needed {needed} more bytes for {what} at offset {offset}")]
    Truncated {
        offset: usize,
        needed: usize,
        what: &'static str,
    },
    #[error("corrupt index at offset {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
    #[error("{n} samples exceed the in-memory ordinal range")]
    TooManySamples { n: u64 },
    #[error("posting for concept {concept} is not strictly ascending or exceeds n_samples")]
    InvalidPosting { concept: u32 },
    #[error("cannot merge indexes over vocabularies of size {left} and {right}")]
    VocabMismatch { left: usize, right: usize },
    #[error("sample id {id:?} appears in more than one shard")]
    DuplicateAcrossShards { id: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("test sample {test_id:?} has no ground-truth rows")]
    NoGroundTruth { test_id: String },
    #[error("duplicate test id {test_id:?} at manifest line {line}")]
    DuplicateTestId { test_id: String, line: usize },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("row {row} has zero L2 norm")]
    ZeroNormRow { row: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("expected {expected} values for {rows}x{dim} matrix, got {actual}")]
    Shape {
        rows: usize,
        dim: usize,
        expected: usize,
        actual: usize,
    },
    #[error("matrix is not row-normalized")]
    NotNormalized,
    #[error("dimension mismatch: queries have {queries}, gallery has {gallery}")]
    DimensionMismatch { queries: usize, gallery: usize },
    #[error("sample {test_id:?} has no ground-truth rows")]
    EmptyGroundTruth { test_id: String },
    #[error("{what} row {row} out of range for matrix with {rows} rows")]
    RowOutOfRange {
        what: &'static str,
        row: usize,
        rows: usize,
    },
    #[error("bad magic at offset {offset}")]
    BadMagic { offset: usize },
    #[error("unsupported version {version} at offset {offset}")]
    UnsupportedVersion { version: u16, offset: usize },
    #[error("unsupported dtype {dtype} at offset {offset}")]
    UnsupportedDtype { dtype: u16, offset: usize },
    #[error("nonzero reserved field at offset {offset}")]
    Reserved { offset: usize },
    #[error("truncated file: needed {needed} more bytes for {what} at offset {offset}")]
    Truncated {
        offset: usize,
        needed: usize,
        what: &'static str,
    },
    #[error("{extra} trailing bytes after matrix data at offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("frequency list is empty")]
    EmptyFrequencies,
    #[error("frequency at position {index} is {value}, must be positive")]
    NonPositiveFrequency { index: usize, value: f64 },
    #[error("need at least {min} values, got {n}")]
    TooFewValues { n: usize, min: usize },
    #[error("degenerate labels: all outcomes are {value}")]
    DegenerateLabels { value: u8 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("outcomes CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("outcomes CSV row {row}: {reason}")]
    CsvRow { row: usize, reason: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error("concept {concept} has zero pretraining frequency")]
    ZeroFrequency { concept: u32 },
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing report inputs: {}", .0.join(", "))]
    MissingInputs(Vec<String>),
    #[error("no outcomes to report")]
    NoOutcomes,
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Predictor(#[from] PredictorError),
}
