//! Deterministic lexicon sentiment analyzer.
//!
//! Polarity is the mean of the polarities of all lexicon terms found in the
//! text, where a negation term among the three preceding terms flips the sign
//! of the matched polarity. Subjectivity is the plain mean of the matched
//! subjectivities. Texts with no lexicon match score 0.0 on both.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use super::tokenize::terms;
use super::CorpusError;

const NEGATION_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexiconEntry {
    pub polarity: f64,
    pub subjectivity: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SentimentLexicon {
    entries: HashMap<String, LexiconEntry>,
    negations: HashSet<String>,
}

impl SentimentLexicon {
    pub fn new<I, N>(entries: I, negations: N) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (String, LexiconEntry)>,
        N: IntoIterator<Item = String>,
    {
        let mut map = HashMap::new();
        for (term, entry) in entries {
            validate_term(&term)?;
            if !(-1.0..=1.0).contains(&entry.polarity) {
                return Err(CorpusError::Lexicon(format!(
                    "polarity {} of '{term}' outside [-1, 1]",
                    entry.polarity
                )));
            }
            if !(0.0..=1.0).contains(&entry.subjectivity) {
                return Err(CorpusError::Lexicon(format!(
                    "subjectivity {} of '{term}' outside [0, 1]",
                    entry.subjectivity
                )));
            }
            if map.insert(term.clone(), entry).is_some() {
                return Err(CorpusError::Lexicon(format!("duplicate term '{term}'")));
            }
        }
        let mut neg = HashSet::new();
        for term in negations {
            validate_term(&term)?;
            neg.insert(term);
        }
        Ok(Self {
            entries: map,
            negations: neg,
        })
    }

    /// Parses `term<TAB>polarity<TAB>subjectivity` lines and a negation list
    /// with one term per line. Blank lines and `#` comments are skipped.
    pub fn parse(lexicon: impl BufRead, negations: impl BufRead) -> Result<Self, CorpusError> {
        let mut entries = Vec::new();
        for (idx, line) in lexicon.lines().enumerate() {
            let line = line.map_err(|e| CorpusError::Lexicon(e.to_string()))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [term, pol, subj] = fields[..] else {
                return Err(CorpusError::Lexicon(format!(
                    "line {}: expected 3 tab-separated fields",
                    idx + 1
                )));
            };
            let num = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| {
                    CorpusError::Lexicon(format!("line {}: '{s}' is not a number", idx + 1))
                })
            };
            entries.push((
                term.trim().to_string(),
                LexiconEntry {
                    polarity: num(pol)?,
                    subjectivity: num(subj)?,
                },
            ));
        }
        let negs = super::read_term_list(negations).map_err(CorpusError::Lexicon)?;
        Self::new(entries, negs)
    }

    pub fn load(lexicon: &Path, negations: &Path) -> Result<Self, CorpusError> {
        Self::parse(super::open(lexicon)?, super::open(negations)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<LexiconEntry> {
        self.entries.get(term).copied()
    }

    pub fn is_negation(&self, term: &str) -> bool {
        self.negations.contains(term)
    }

    pub fn polarity(&self, text: &str) -> f64 {
        let terms = terms(text);
        let matched: Vec<f64> = terms
            .iter()
            .enumerate()
            .filter_map(|(i, term)| {
                let entry = self.entries.get(term)?;
                let window = &terms[i.saturating_sub(NEGATION_WINDOW)..i];
                let negated = window.iter().any(|t| self.negations.contains(t));
                Some(if negated {
                    -entry.polarity
                } else {
                    entry.polarity
                })
            })
            .collect();
        mean(&matched).clamp(-1.0, 1.0)
    }

    pub fn subjectivity(&self, text: &str) -> f64 {
        let matched: Vec<f64> = terms(text)
            .iter()
            .filter_map(|t| self.entries.get(t).map(|e| e.subjectivity))
            .collect();
        mean(&matched).clamp(0.0, 1.0)
    }
}

fn validate_term(term: &str) -> Result<(), CorpusError> {
    if term.is_empty() || term.chars().any(char::is_whitespace) {
        return Err(CorpusError::Lexicon(format!("invalid term '{term}'")));
    }
    if term.to_lowercase() != term {
        return Err(CorpusError::Lexicon(format!(
            "term '{term}' is not lowercase"
        )));
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
