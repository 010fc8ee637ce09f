//! Rounds, batches, judgments and worker profiles.

mod round;
mod worker;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

pub use round::{
    Assignment, AssignmentId, AssignmentState, ExpiryOutcome, GoldConfig, GoldStats, Judgment,
    JudgmentInput, JudgmentRecord, Payment, Round, RoundConfig, RoundProgress, RoundState,
    SubmitPlan, SubmitReport, DEFAULT_RESERVATION_TTL_SECS,
};
pub use worker::{
    AgeBracket, Demographics, DemographicsError, DemographicsForm, EducationLevel, Gender,
    IncomeBracket, Nationality, WorkerProfile,
};

use crate::scheme::{SchemeRegistry, SchemeViolation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("invalid round config: {0}")]
    InvalidConfig(String),
    #[error("round {0} already exists")]
    DuplicateRound(String),
    #[error("unknown dataset {0}")]
    UnknownDataset(String),
    #[error("unknown label scheme {0}")]
    UnknownScheme(String),
    #[error("unknown round {0}")]
    UnknownRound(String),
    #[error("unknown post {0}")]
    UnknownPost(String),
    #[error("round {0} is closed")]
    RoundClosed(String),
    #[error("worker {0} has not acknowledged the label definitions")]
    NotAcknowledged(String),
    #[error("worker {0} is excluded from this round by quality control")]
    WorkerExcluded(String),
    #[error("worker already holds open assignment {0}")]
    OpenAssignmentExists(AssignmentId),
    #[error("unknown assignment {0}")]
    UnknownAssignment(AssignmentId),
    #[error("assignment {0} belongs to another worker")]
    NotYourAssignment(AssignmentId),
    #[error("reservation {0} has expired")]
    Expired(AssignmentId),
    #[error("assignment {0} was already submitted")]
    DuplicateSubmission(AssignmentId),
    #[error("submission does not match the assignment: {0}")]
    CoverageMismatch(String),
    #[error("invalid judgment for post {post_id}: {violation}")]
    InvalidJudgment {
        post_id: String,
        violation: SchemeViolation,
    },
    #[error("{0} posts are still below the minimum number of judgments")]
    PendingPosts(usize),
}

/// All rounds of a campaign together with the datasets they draw from.
#[derive(Debug, Default)]
pub struct RoundBook {
    datasets: HashMap<String, Vec<String>>,
    rounds: BTreeMap<String, Round>,
}

impl RoundBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_dataset(&mut self, name: impl Into<String>, post_ids: Vec<String>) {
        self.datasets.insert(name.into(), post_ids);
    }

    pub fn has_dataset(&self, name: &str) -> bool {
        self.datasets.contains_key(name)
    }

    pub fn create_round(
        &mut self,
        config: RoundConfig,
        schemes: &SchemeRegistry,
    ) -> Result<&mut Round, AnnotationError> {
        config.validate()?;
        if self.rounds.contains_key(&config.round_id) {
            return Err(AnnotationError::DuplicateRound(config.round_id));
        }
        let posts = self
            .datasets
            .get(&config.dataset)
            .ok_or_else(|| AnnotationError::UnknownDataset(config.dataset.clone()))?
            .clone();
        let scheme = schemes
            .get(&config.scheme)
            .map_err(|_| AnnotationError::UnknownScheme(config.scheme.clone()))?
            .clone();
        let id = config.round_id.clone();
        let round = Round::new(config, scheme, posts)?;
        Ok(self.rounds.entry(id).or_insert(round))
    }

    pub fn insert(&mut self, round: Round) {
        self.rounds.insert(round.id().to_string(), round);
    }

    pub fn get(&self, round_id: &str) -> Result<&Round, AnnotationError> {
        self.rounds
            .get(round_id)
            .ok_or_else(|| AnnotationError::UnknownRound(round_id.to_string()))
    }

    pub fn get_mut(&mut self, round_id: &str) -> Result<&mut Round, AnnotationError> {
        self.rounds
            .get_mut(round_id)
            .ok_or_else(|| AnnotationError::UnknownRound(round_id.to_string()))
    }

    pub fn rounds(&self) -> impl Iterator<Item = &Round> {
        self.rounds.values()
    }
}
