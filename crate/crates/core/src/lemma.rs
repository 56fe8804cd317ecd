//! Rule-based English noun lemmatization and caption tokenization.
//!
//! Tokens are reduced to a singular base form by a short list of plural
//! suffix rules, backed by an exception table for irregular nouns and for
//! words the rules would mangle. Every lemma that appears in the exception
//! table is also treated as a known base form and returned unchanged.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::IngestError;

/// Exception table shipped with the crate.
pub const DEFAULT_EXCEPTIONS: &str = include_str!("../data/noun_exceptions.tsv");

/// Splits text on Unicode whitespace, deletes ASCII punctuation and lowercases.
///
/// Tokens that become empty after punctuation removal are dropped.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().filter_map(|raw| {
        let cleaned: String = raw
            .chars()
            .filter(|c| !c.is_ascii_punctuation())
            .collect::<String>()
            .to_lowercase();
        (!cleaned.is_empty()).then_some(cleaned)
    })
}

#[derive(Debug, Clone)]
pub struct Lemmatizer {
    exceptions: HashMap<String, String>,
    lemmas: HashSet<String>,
}

impl Default for Lemmatizer {
    fn default() -> Self {
        Self::from_table(DEFAULT_EXCEPTIONS).expect("shipped exception table is valid")
    }
}

impl Lemmatizer {
    /// A lemmatizer with suffix rules only.
    pub fn rules_only() -> Self {
        Self {
            exceptions: HashMap::new(),
            lemmas: HashSet::new(),
        }
    }

    /// Parses a two-column tab-separated exception table (surface form, lemma).
    /// Blank lines and lines starting with `#` are ignored.
    pub fn from_table(text: &str) -> Result<Self, IngestError> {
        let mut exceptions = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut cols = trimmed.split('\t');
            let (surface, lemma) = match (cols.next(), cols.next(), cols.next()) {
                (Some(s), Some(l), None) => (s.trim(), l.trim()),
                _ => {
                    return Err(IngestError::InvalidException {
                        line: line_no,
                        reason: "expected exactly two tab-separated columns".into(),
                    })
                }
            };
            for word in [surface, lemma] {
                if word.is_empty() || word.chars().any(char::is_whitespace) {
                    return Err(IngestError::InvalidException {
                        line: line_no,
                        reason: format!("{word:?} is not a single token"),
                    });
                }
                if word.to_lowercase() != word {
                    return Err(IngestError::InvalidException {
                        line: line_no,
                        reason: format!("{word:?} is not lowercase"),
                    });
                }
            }
            if let Some(prev) = exceptions.insert(surface.to_string(), lemma.to_string()) {
                if prev != lemma {
                    return Err(IngestError::InvalidException {
                        line: line_no,
                        reason: format!("{surface:?} maps to both {prev:?} and {lemma:?}"),
                    });
                }
            }
        }
        // A lemma may not itself be rewritten to something else.
        for (surface, lemma) in &exceptions {
            if let Some(next) = exceptions.get(lemma) {
                if next != lemma {
                    return Err(IngestError::InvalidException {
                        line: 0,
                        reason: format!("chained entry {surface:?} -> {lemma:?} -> {next:?}"),
                    });
                }
            }
        }
        let lemmas = exceptions.values().cloned().collect();
        Ok(Self { exceptions, lemmas })
    }

    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_table(&text)
    }

    pub fn exception_count(&self) -> usize {
        self.exceptions.len()
    }

    /// Returns the lowercase singular form of a single token.
    ///
    /// The result is a fixed point: `lemmatize(lemmatize(t)) == lemmatize(t)`.
    pub fn lemmatize(&self, token: &str) -> String {
        let mut current = token.to_lowercase();
        loop {
            if self.lemmas.contains(&current) {
                return current;
            }
            if let Some(lemma) = self.exceptions.get(&current) {
                return lemma.clone();
            }
            match strip_plural(&current) {
                Some(shorter) => current = shorter,
                None => return current,
            }
        }
    }
}

/// One application of the first matching plural rule, or `None`.
fn strip_plural(word: &str) -> Option<String> {
    let n = word.len();
    if n > 4 && word.ends_with("ies") {
        return Some(format!("{}y", &word[..n - 3]));
    }
    if ["sses", "xes", "ches", "shes", "zzes"]
        .iter()
        .any(|suffix| word.ends_with(suffix))
    {
        return Some(word[..n - 2].to_string());
    }
    if n >= 4
        && word.ends_with('s')
        && !["ss", "us", "is"].iter().any(|suffix| word.ends_with(suffix))
    {
        return Some(word[..n - 1].to_string());
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn regular_and_irregular_plurals() {
        let lem = Lemmatizer::default();
        assert_eq!(lem.lemmatize("dogs"), "dog");
        assert_eq!(lem.lemmatize("children"), "child");
        assert_eq!(lem.lemmatize("bus"), "bus");
        assert_eq!(lem.lemmatize("buses"), "bus");
        assert_eq!(lem.lemmatize("puppies"), "puppy");
        assert_eq!(lem.lemmatize("boxes"), "box");
        assert_eq!(lem.lemmatize("benches"), "bench");
        assert_eq!(lem.lemmatize("dishes"), "dish");
        assert_eq!(lem.lemmatize("classes"), "class");
        assert_eq!(lem.lemmatize("glass"), "glass");
        assert_eq!(lem.lemmatize("tennis"), "tennis");
        assert_eq!(lem.lemmatize("Knives"), "knife");
        assert_eq!(lem.lemmatize("jeans"), "jeans");
        assert_eq!(lem.lemmatize("lens"), "lens");
        assert_eq!(lem.lemmatize("gas"), "gas");
    }

    #[test]
    fn unknown_words_pass_through_lowercased() {
        let lem = Lemmatizer::default();
        assert_eq!(lem.lemmatize("Frisbee"), "frisbee");
        assert_eq!(lem.lemmatize("42"), "42");
    }

    #[test]
    fn plural_of_irregular_surface_reaches_lemma() {
        let lem = Lemmatizer::default();
        assert_eq!(lem.lemmatize("childrens"), "child");
    }

    #[test]
    fn tokenizer_strips_punctuation() {
        let toks: Vec<_> = tokenize("Two  dogs, chasing\ta FRISBEE!  ... dog's").collect();
        assert_eq!(toks, ["two", "dogs", "chasing", "a", "frisbee", "dogs"]);
    }

    #[test]
    fn table_rejects_chains_and_bad_rows() {
        assert!(Lemmatizer::from_table("a\tb\nb\tc\n").is_err());
        assert!(Lemmatizer::from_table("onlyone\n").is_err());
        assert!(Lemmatizer::from_table("Upper\tx\n").is_err());
        assert!(Lemmatizer::from_table("# comment\n\nmice\tmouse\n").is_ok());
    }

    proptest! {
        #[test]
        fn idempotent(word in "[a-zA-Z]{1,12}") {
            let lem = Lemmatizer::default();
            let once = lem.lemmatize(&word);
            prop_assert_eq!(lem.lemmatize(&once), once.clone());
            prop_assert_eq!(once.to_lowercase(), once);
        }

        #[test]
        fn idempotent_rules_only(word in "[a-z]{1,12}(s|es|ies)?") {
            let lem = Lemmatizer::rules_only();
            let once = lem.lemmatize(&word);
            prop_assert_eq!(lem.lemmatize(&once), once);
        }
    }
}
