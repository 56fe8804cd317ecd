//! Curation of compositional-generalization retrieval test sets from
//! concept-annotated corpora, per-sample Recall@k evaluation, and
//! frequency-based prediction of retrieval success.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`ingest`] resolves each pretraining sample's concepts (a noun must
//!    appear in the lemmatized caption *and* the image tags) and builds a
//!    [`ConceptIndex`].
//! 2. [`curation`] labels each test sample as a known combination, a novel
//!    combination of individually seen concepts, or excluded.
//! 3. [`retrieval`] ranks galleries by embedding similarity and records
//!    per-sample Recall@k.
//! 4. [`predictor`] aggregates concept frequencies by geometric mean and
//!    fits a bootstrapped logistic model of success on log frequency.
//! 5. [`report`] writes CSVs and SVG panels.
//!
//! [`simulation`] provides a closed-world corpus and success model for
//! checking the whole chain end to end.
//!
//! The accompanying guide lives in `book/`; its code listings are compiled
//! and run as doctests of this crate.

pub mod curation;
pub mod embedding;
pub mod error;
pub mod index;
pub mod ingest;
pub mod lemma;
pub mod outcome;
pub mod predictor;
pub mod report;
pub mod retrieval;
pub mod simulation;
pub mod vocab;

pub use curation::{curate, classify_sample, CuratedTestSet, Label, Modality, TestSample};
pub use embedding::EmbeddingMatrix;
pub use index::{ConceptIndex, IndexBuilder};
pub use ingest::{ingest_corpus, ConceptExtractor, IngestStats, SampleRecord};
pub use lemma::Lemmatizer;
pub use outcome::EvalOutcome;
pub use predictor::{fit_logistic, iqr_filter, sample_frequency, LogisticFit};
pub use vocab::{ConceptId, ConceptSet, ConceptVocabulary};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/concepts.md")]
    mod concepts {}
    #[doc = include_str!("../../../book/src/cooccurrence.md")]
    mod cooccurrence {}
    #[doc = include_str!("../../../book/src/curation.md")]
    mod curation {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/prediction.md")]
    mod prediction {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
