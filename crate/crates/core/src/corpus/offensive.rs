use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use super::tokenize::terms;
use super::CorpusError;

/// A list of offensive terms, one lowercase term per line on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffensiveDictionary {
    pub source_name: String,
    terms: HashSet<String>,
}

impl OffensiveDictionary {
    pub fn new<I: IntoIterator<Item = String>>(
        source_name: impl Into<String>,
        terms: I,
    ) -> Result<Self, CorpusError> {
        let source_name = source_name.into();
        let mut set = HashSet::new();
        for term in terms {
            if term.is_empty()
                || term.to_lowercase() != term
                || term.chars().any(char::is_whitespace)
            {
                return Err(CorpusError::Dictionary(format!(
                    "{source_name}: invalid term '{term}'"
                )));
            }
            if !set.insert(term.clone()) {
                return Err(CorpusError::Dictionary(format!(
                    "{source_name}: duplicate term '{term}'"
                )));
            }
        }
        Ok(Self {
            source_name,
            terms: set,
        })
    }

    pub fn parse(
        source_name: impl Into<String>,
        reader: impl BufRead,
    ) -> Result<Self, CorpusError> {
        let source_name = source_name.into();
        let terms = super::read_term_list(reader)
            .map_err(|e| CorpusError::Dictionary(format!("{source_name}: {e}")))?;
        Self::new(source_name, terms)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Self::parse(name, super::open(path)?)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Number of token occurrences found in the union of the dictionaries.
/// Matching is case-insensitive and whole-token; repeats count repeatedly.
pub fn count_offensive_terms(text: &str, dicts: &[OffensiveDictionary]) -> u32 {
    if dicts.is_empty() {
        return 0;
    }
    terms(text)
        .iter()
        .filter(|t| dicts.iter().any(|d| d.contains(t)))
        .count() as u32
}
