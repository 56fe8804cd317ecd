//! Streaming ingestion of concept-annotated corpora.
//!
//! A concept is present in a sample only when its lemma occurs both among
//! the lemmatized caption tokens and among the lemmatized image tags.

use std::collections::HashSet;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::index::{ConceptIndex, IndexBuilder};
use crate::lemma::{tokenize, Lemmatizer};
use crate::vocab::{ConceptSet, ConceptVocabulary};

/// One line of the corpus JSON-lines file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub id: String,
    pub caption: String,
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    pub sample_id: String,
    pub caption: String,
    pub image_tags: Vec<String>,
    pub concepts: ConceptSet,
}

/// Resolves captions and tags to vocabulary concepts.
#[derive(Debug, Clone)]
pub struct ConceptExtractor {
    vocab: ConceptVocabulary,
    lemmatizer: Lemmatizer,
}

impl ConceptExtractor {
    /// Fails if some vocabulary entry is not a fixed point of the
    /// lemmatizer, since such an entry could never match.
    pub fn new(vocab: ConceptVocabulary, lemmatizer: Lemmatizer) -> Result<Self, IngestError> {
        for entry in vocab.entries() {
            let lemma = lemmatizer.lemmatize(entry);
            if &lemma != entry {
                return Err(IngestError::NotALemma {
                    entry: entry.clone(),
                    lemma,
                });
            }
        }
        Ok(Self { vocab, lemmatizer })
    }

    pub fn vocab(&self) -> &ConceptVocabulary {
        &self.vocab
    }

    pub fn lemmatizer(&self) -> &Lemmatizer {
        &self.lemmatizer
    }

    fn lemma_set<'a>(&self, texts: impl IntoIterator<Item = &'a str>) -> HashSet<String> {
        texts
            .into_iter()
            .flat_map(tokenize)
            .map(|t| self.lemmatizer.lemmatize(&t))
            .collect()
    }

    /// Concepts mentioned in `text` alone, with no image evidence.
    pub fn text_concepts(&self, text: &str) -> ConceptSet {
        self.lemma_set([text])
            .iter()
            .filter_map(|l| self.vocab.id_of(l))
            .collect()
    }

    /// Concepts named by a tag list alone.
    pub fn tag_concepts<S: AsRef<str>>(&self, tags: &[S]) -> ConceptSet {
        self.lemma_set(tags.iter().map(AsRef::as_ref))
            .iter()
            .filter_map(|l| self.vocab.id_of(l))
            .collect()
    }

    /// Vocabulary concepts present in both the caption and the tags.
    pub fn extract<S: AsRef<str>>(&self, caption: &str, tags: &[S]) -> ConceptSet {
        let caption_lemmas = self.lemma_set([caption]);
        if caption_lemmas.is_empty() {
            return ConceptSet::new();
        }
        let tag_lemmas = self.lemma_set(tags.iter().map(AsRef::as_ref));
        caption_lemmas
            .intersection(&tag_lemmas)
            .filter_map(|l| self.vocab.id_of(l))
            .collect()
    }

    pub fn resolve(&self, record: CorpusRecord) -> SampleRecord {
        let concepts = self.extract(&record.caption, &record.tags);
        SampleRecord {
            sample_id: record.id,
            caption: record.caption,
            image_tags: record.tags,
            concepts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub records: u64,
    pub parse_errors: u64,
    pub frequencies: Vec<u64>,
}

/// Reads a JSON-lines corpus and builds its concept index.
///
/// Malformed lines are logged with their line number, counted and skipped.
/// Blank lines are ignored. A repeated sample id is a hard error.
pub fn ingest_corpus<R: BufRead>(
    source: R,
    extractor: &ConceptExtractor,
) -> Result<(ConceptIndex, IngestStats), IngestError> {
    let mut shard = Shard::new(extractor.vocab.len());
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|source| IngestError::Read { line: i + 1, source })?;
        shard.push(&line, i + 1, extractor)?;
    }
    Ok(shard.finish())
}

/// Ingests an in-memory corpus split into `shards` contiguous chunks
/// processed in parallel. The result equals [`ingest_corpus`] on the same
/// lines.
pub fn ingest_lines_parallel(
    lines: &[&str],
    extractor: &ConceptExtractor,
    shards: usize,
) -> Result<(ConceptIndex, IngestStats), IngestError> {
    let chunk = lines.len().div_ceil(shards.max(1)).max(1);
    let parts = lines
        .par_chunks(chunk)
        .enumerate()
        .map(|(k, part)| {
            let mut shard = Shard::new(extractor.vocab.len());
            for (j, line) in part.iter().enumerate() {
                shard.push(line, k * chunk + j + 1, extractor)?;
            }
            Ok(shard)
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    let mut merged = Shard::new(extractor.vocab.len());
    for part in parts {
        merged = merged.merge(part)?;
    }
    Ok(merged.finish())
}

/// Ingests already-resolved records, e.g. from the simulator.
pub fn ingest_records<I>(records: I, vocab_size: usize) -> Result<(ConceptIndex, IngestStats), IngestError>
where
    I: IntoIterator<Item = SampleRecord>,
{
    let mut builder = IndexBuilder::new(vocab_size);
    for (i, rec) in records.into_iter().enumerate() {
        if builder.add(&rec.sample_id, rec.concepts.as_slice())?.is_none() {
            return Err(IngestError::DuplicateSampleId {
                id: rec.sample_id,
                line: i + 1,
            });
        }
    }
    let index = builder.finish();
    let stats = IngestStats {
        records: index.n_samples() as u64,
        parse_errors: 0,
        frequencies: index.frequencies(),
    };
    Ok((index, stats))
}

struct Shard {
    builder: IndexBuilder,
    parse_errors: u64,
}

impl Shard {
    fn new(vocab_size: usize) -> Self {
        Self {
            builder: IndexBuilder::new(vocab_size),
            parse_errors: 0,
        }
    }

    fn push(&mut self, line: &str, line_no: usize, extractor: &ConceptExtractor) -> Result<(), IngestError> {
        if line.trim().is_empty() {
            return Ok(());
        }
        let record: CorpusRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("corpus line {line_no}: skipping malformed record: {e}");
                self.parse_errors += 1;
                return Ok(());
            }
        };
        let sample = extractor.resolve(record);
        if self.builder.add(&sample.sample_id, sample.concepts.as_slice())?.is_none() {
            return Err(IngestError::DuplicateSampleId {
                id: sample.sample_id,
                line: line_no,
            });
        }
        Ok(())
    }

    fn merge(self, other: Shard) -> Result<Shard, IngestError> {
        Ok(Shard {
            builder: self.builder.merge(other.builder)?,
            parse_errors: self.parse_errors + other.parse_errors,
        })
    }

    fn finish(self) -> (ConceptIndex, IngestStats) {
        let index = self.builder.finish();
        let stats = IngestStats {
            records: index.n_samples() as u64,
            parse_errors: self.parse_errors,
            frequencies: index.frequencies(),
        };
        (index, stats)
    }
}
