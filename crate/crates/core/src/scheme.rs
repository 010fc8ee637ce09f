//! Versioned label schemes.
//!
//! A two-stage scheme asks for a top-level category first and, when that is
//! `Inappropriate`, one or more sub-labels. A flat scheme has top labels only.
//! The shipped schemes are `L` (two-stage, five inappropriate sub-labels),
//! and the reduced flat schemes `L'` and `L''`.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const SHIPPED_SCHEMES: &str = include_str!("../data/schemes.json");

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(String);

impl Label {
    pub fn new(name: impl Into<String>) -> Self {
        Label(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn normal() -> Self {
        Label::new(NORMAL)
    }

    pub fn spam() -> Self {
        Label::new(SPAM)
    }

    pub fn inappropriate() -> Self {
        Label::new(INAPPROPRIATE)
    }

    /// Normal and Spam are the two labels that are not inappropriate speech.
    pub fn is_benign(&self) -> bool {
        self.0 == NORMAL || self.0 == SPAM
    }
}

pub const NORMAL: &str = "Normal";
pub const SPAM: &str = "Spam";
pub const INAPPROPRIATE: &str = "Inappropriate";

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for Label {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::new(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error("scheme {version}: {reason}")]
    Invalid { version: String, reason: String },
    #[error("unknown label scheme '{0}'")]
    Unknown(String),
}

/// Ways a label selection can violate a scheme.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeViolation {
    #[error("label '{0}' is not a top-level label of this scheme")]
    UnknownLabel(String),
    #[error("sub-label '{0}' is not part of this scheme")]
    UnknownSubLabel(String),
    #[error("Inappropriate requires at least one sub-label")]
    MissingSubLabels,
    #[error("sub-labels are only allowed with Inappropriate")]
    UnexpectedSubLabels,
    #[error("sub-label '{0}' selected twice")]
    DuplicateSubLabel(String),
    #[error("this scheme allows a single sub-label")]
    MultiSelectNotAllowed,
    #[error("this scheme has no 'other' option")]
    OtherNotAllowed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScheme {
    pub version: String,
    pub top_labels: Vec<Label>,
    pub sub_labels: Vec<Label>,
    pub allow_other: bool,
    pub allow_multi_select: bool,
    pub definitions: BTreeMap<Label, String>,
}

impl LabelScheme {
    pub fn is_two_stage(&self) -> bool {
        !self.sub_labels.is_empty()
    }

    /// Labels that receive votes: sub-labels plus the non-Inappropriate top
    /// labels for a two-stage scheme, the top labels for a flat one.
    pub fn vote_labels(&self) -> Vec<Label> {
        if self.is_two_stage() {
            self.sub_labels
                .iter()
                .chain(
                    self.top_labels
                        .iter()
                        .filter(|l| l.as_str() != INAPPROPRIATE),
                )
                .cloned()
                .collect()
        } else {
            self.top_labels.clone()
        }
    }

    pub fn inappropriate_labels(&self) -> Vec<Label> {
        self.vote_labels()
            .into_iter()
            .filter(|l| !l.is_benign())
            .collect()
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        let invalid = |reason: String| SchemeError::Invalid {
            version: self.version.clone(),
            reason,
        };
        if self.top_labels.is_empty() {
            return Err(invalid("no top labels".into()));
        }
        let mut seen = BTreeSet::new();
        for label in self.top_labels.iter().chain(&self.sub_labels) {
            if !seen.insert(label) {
                return Err(invalid(format!("label '{label}' appears twice")));
            }
            if !self.definitions.contains_key(label) {
                return Err(invalid(format!("label '{label}' has no definition")));
            }
        }
        let has_inappropriate = self.top_labels.iter().any(|l| l.as_str() == INAPPROPRIATE);
        if self.is_two_stage() != has_inappropriate {
            return Err(invalid(
                "a two-stage scheme needs an Inappropriate top label, a flat scheme must not have one".into(),
            ));
        }
        if !self.is_two_stage() && self.allow_multi_select {
            return Err(invalid("multi-select requires sub-labels".into()));
        }
        Ok(())
    }

    pub fn validate_selection(
        &self,
        top_label: &str,
        sub_labels: &[Label],
        other_text: Option<&str>,
    ) -> Result<(), SchemeViolation> {
        if !self.top_labels.iter().any(|l| l.as_str() == top_label) {
            return Err(SchemeViolation::UnknownLabel(top_label.to_string()));
        }
        if other_text.is_some() && !self.allow_other {
            return Err(SchemeViolation::OtherNotAllowed);
        }
        let inappropriate = self.is_two_stage() && top_label == INAPPROPRIATE;
        if !inappropriate {
            return if sub_labels.is_empty() {
                Ok(())
            } else {
                Err(SchemeViolation::UnexpectedSubLabels)
            };
        }
        if sub_labels.is_empty() {
            return Err(SchemeViolation::MissingSubLabels);
        }
        if sub_labels.len() > 1 && !self.allow_multi_select {
            return Err(SchemeViolation::MultiSelectNotAllowed);
        }
        let mut seen = BTreeSet::new();
        for sub in sub_labels {
            if !self.sub_labels.contains(sub) {
                return Err(SchemeViolation::UnknownSubLabel(sub.to_string()));
            }
            if !seen.insert(sub) {
                return Err(SchemeViolation::DuplicateSubLabel(sub.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct SchemeFile {
    definitions: BTreeMap<Label, String>,
    schemes: Vec<SchemeEntry>,
}

#[derive(Deserialize)]
struct SchemeEntry {
    version: String,
    top_labels: Vec<Label>,
    sub_labels: Vec<Label>,
    allow_other: bool,
    allow_multi_select: bool,
}

#[derive(Debug, Clone)]
pub struct SchemeRegistry {
    schemes: HashMap<String, LabelScheme>,
}

impl SchemeRegistry {
    pub fn from_json(source: &str) -> Result<Self, SchemeError> {
        let file: SchemeFile = serde_json::from_str(source).map_err(|e| SchemeError::Invalid {
            version: "<registry>".into(),
            reason: e.to_string(),
        })?;
        let mut schemes = HashMap::new();
        for entry in file.schemes {
            let definitions = entry
                .top_labels
                .iter()
                .chain(&entry.sub_labels)
                .filter_map(|l| file.definitions.get(l).map(|d| (l.clone(), d.clone())))
                .collect();
            let scheme = LabelScheme {
                version: entry.version,
                top_labels: entry.top_labels,
                sub_labels: entry.sub_labels,
                allow_other: entry.allow_other,
                allow_multi_select: entry.allow_multi_select,
                definitions,
            };
            scheme.validate()?;
            schemes.insert(scheme.version.clone(), scheme);
        }
        Ok(Self { schemes })
    }

    pub fn shipped() -> &'static SchemeRegistry {
        static REGISTRY: OnceLock<SchemeRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| {
            SchemeRegistry::from_json(SHIPPED_SCHEMES).expect("shipped schemes are valid")
        })
    }

    pub fn get(&self, version: &str) -> Result<&LabelScheme, SchemeError> {
        self.schemes
            .get(version)
            .ok_or_else(|| SchemeError::Unknown(version.to_string()))
    }

    pub fn versions(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.schemes.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }
}
