//! The concept universe: a fixed list of single-token noun lemmas with
//! dense integer ids.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::IngestError;

/// Dense id of a vocabulary lemma.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(pub u32);

impl ConceptId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A sorted, duplicate-free set of concept ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptSet(Vec<ConceptId>);

impl ConceptSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn as_slice(&self) -> &[ConceptId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = ConceptId> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &ConceptSet) -> bool {
        self.iter().all(|c| other.contains(c))
    }
}

impl FromIterator<ConceptId> for ConceptSet {
    fn from_iter<I: IntoIterator<Item = ConceptId>>(iter: I) -> Self {
        let mut ids: Vec<ConceptId> = iter.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        Self(ids)
    }
}

impl<'a> IntoIterator for &'a ConceptSet {
    type Item = ConceptId;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, ConceptId>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptVocabulary {
    entries: Vec<String>,
    id_of: HashMap<String, ConceptId>,
}

impl ConceptVocabulary {
    pub fn new<I, S>(lemmas: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut entries = Vec::new();
        let mut id_of = HashMap::new();
        for (i, lemma) in lemmas.into_iter().enumerate() {
            let lemma: String = lemma.into();
            let line = i + 1;
            let bad = |reason: &str| IngestError::InvalidVocabulary {
                line,
                entry: lemma.clone(),
                reason: reason.to_string(),
            };
            if lemma.is_empty() {
                return Err(bad("is empty"));
            }
            if lemma.to_lowercase() != lemma {
                return Err(bad("is not lowercase"));
            }
            if lemma.chars().any(|c| c.is_whitespace() || c.is_ascii_punctuation()) {
                return Err(bad("is not a single token"));
            }
            if id_of.contains_key(&lemma) {
                return Err(bad("is duplicated"));
            }
            let id = ConceptId(u32::try_from(entries.len()).map_err(|_| bad("exceeds id range"))?);
            id_of.insert(lemma.clone(), id);
            entries.push(lemma);
        }
        if entries.is_empty() {
            return Err(IngestError::EmptyVocabulary);
        }
        Ok(Self { entries, id_of })
    }

    /// Parses the one-lemma-per-line text format. Blank lines and `#`
    /// comment lines are skipped; line numbers in errors refer to the file.
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut lemmas = Vec::new();
        let mut lines = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            lemmas.push(trimmed.to_string());
            lines.push(i + 1);
        }
        Self::new(lemmas).map_err(|e| match e {
            IngestError::InvalidVocabulary {
                line,
                entry,
                reason,
            } => IngestError::InvalidVocabulary {
                line: lines[line - 1],
                entry,
                reason,
            },
            other => other,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for lemma in &self.entries {
            out.push_str(lemma);
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id_of(&self, lemma: &str) -> Option<ConceptId> {
        self.id_of.get(lemma).copied()
    }

    pub fn lemma(&self, id: ConceptId) -> Option<&str> {
        self.entries.get(id.index()).map(String::as_str)
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// Resolves a list of lemmas, panicking on unknown ones. Meant for tests
    /// and fixtures.
    pub fn ids(&self, lemmas: &[&str]) -> ConceptSet {
        lemmas
            .iter()
            .map(|l| self.id_of(l).unwrap_or_else(|| panic!("{l:?} not in vocabulary")))
            .collect()
    }
}
