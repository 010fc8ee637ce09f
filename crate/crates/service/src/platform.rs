//! Campaign state shared by the HTTP API and the offline commands: the
//! in-memory rounds, workers and sessions, kept in step with the store.
//!
//! Every mutation validates against the in-memory state first, then commits
//! to SQLite, and only then applies to memory, so a failed write leaves both
//! untouched.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use crowdlabel_core::annotation::{
    AnnotationError, AssignmentId, DemographicsForm, JudgmentInput, Payment, Round, RoundBook,
    RoundConfig, RoundProgress, RoundState, SubmitReport, WorkerProfile,
};
use crowdlabel_core::corpus::CleanPost;
use crowdlabel_core::sampling::SampleOrigin;
use crowdlabel_core::scheme::{LabelScheme, SchemeRegistry};
use crowdlabel_core::stats::{
    build_report, AnalysisReport, DemographicsSummary, ReductionThresholds, ReportInput,
};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::error::ServiceError;
use crate::export::{self, ExportVariant};
use crate::store::{Session, Store, DB_FILE};

pub const DEFAULT_SESSION_TTL_SECS: i64 = 12 * 60 * 60;

fn default_session_ttl() -> i64 {
    DEFAULT_SESSION_TTL_SECS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    #[serde(default = "default_session_ttl")]
    pub session_ttl_secs: i64,
    /// When set, analysis, export and close require `Authorization: Bearer <admin_token>`.
    #[serde(default)]
    pub admin_token: Option<String>,
    #[serde(default)]
    pub thresholds: ReductionThresholds,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            session_ttl_secs: DEFAULT_SESSION_TTL_SECS,
            admin_token: None,
            thresholds: ReductionThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub worker_id: String,
    pub token: String,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPost {
    pub post_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchPayload {
    pub round_id: String,
    pub assignment_id: AssignmentId,
    pub expires_at: DateTime<Utc>,
    pub scheme: LabelScheme,
    pub posts: Vec<BatchPost>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundView {
    pub round_id: String,
    pub dataset: String,
    pub min_judgments: u32,
    pub max_judgments: u32,
    pub batch_size: usize,
    pub reservation_ttl_secs: i64,
    pub payment_per_batch: Option<Payment>,
    pub scheme: LabelScheme,
    pub progress: RoundProgress,
}

/// Everything needed to compute an analysis report without holding the
/// platform.
pub struct AnalysisJob {
    pub round_id: String,
    pub key: usize,
    scheme: LabelScheme,
    post_ids: Vec<String>,
    judgments: Vec<crowdlabel_core::annotation::Judgment>,
    origins: HashMap<String, SampleOrigin>,
    demographics: DemographicsSummary,
    thresholds: ReductionThresholds,
}

impl AnalysisJob {
    pub fn run(self) -> AnalysisReport {
        let mut report = build_report(ReportInput {
            round_id: &self.round_id,
            scheme: &self.scheme,
            post_ids: &self.post_ids,
            judgments: self.judgments.iter().collect(),
            origins: &self.origins,
            thresholds: self.thresholds,
        });
        report.demographics = Some(self.demographics);
        report
    }
}

pub enum Analysis {
    Cached(Arc<AnalysisReport>),
    Pending(Box<AnalysisJob>),
}

pub struct Platform {
    store: Store,
    book: RoundBook,
    schemes: &'static SchemeRegistry,
    workers: HashMap<String, WorkerProfile>,
    sessions: HashMap<String, Session>,
    next_worker: u64,
    reports: HashMap<String, (usize, Arc<AnalysisReport>)>,
    clock: Arc<dyn Clock>,
    settings: Settings,
}

impl Platform {
    pub fn open_dir(
        data_dir: &Path,
        clock: Arc<dyn Clock>,
        settings: Settings,
    ) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(data_dir)
            .map_err(|e| ServiceError::Io(data_dir.display().to_string(), e))?;
        Self::load(Store::open(&data_dir.join(DB_FILE))?, clock, settings)
    }

    pub fn load(
        store: Store,
        clock: Arc<dyn Clock>,
        settings: Settings,
    ) -> Result<Self, ServiceError> {
        let schemes = SchemeRegistry::shipped();
        let mut book = RoundBook::new();
        for stored in store.rounds()? {
            let scheme = schemes
                .get(&stored.config.scheme)
                .map_err(|e| ServiceError::Corrupt(e.to_string()))?
                .clone();
            let posts = store
                .dataset(&stored.config.dataset)?
                .into_iter()
                .map(|(id, _)| id)
                .collect();
            let round = Round::restore(
                stored.config,
                scheme,
                posts,
                stored.assignments,
                stored.judgments,
                stored.closed,
            )?;
            book.insert(round);
        }
        let mut workers = HashMap::new();
        let mut next_worker = 1;
        for (seq, w) in store.workers()? {
            next_worker = next_worker.max(seq + 1);
            workers.insert(w.worker_id.clone(), w);
        }
        let sessions = store
            .sessions()?
            .into_iter()
            .map(|s| (s.token.clone(), s))
            .collect();
        Ok(Platform {
            store,
            book,
            schemes,
            workers,
            sessions,
            next_worker,
            reports: HashMap::new(),
            clock,
            settings,
        })
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn schemes(&self) -> &SchemeRegistry {
        self.schemes
    }

    pub fn round(&self, round_id: &str) -> Result<&Round, ServiceError> {
        self.book.get(round_id).map_err(not_found)
    }

    pub fn rounds(&self) -> impl Iterator<Item = &Round> {
        self.book.rounds()
    }

    pub fn worker(&self, worker_id: &str) -> Option<&WorkerProfile> {
        self.workers.get(worker_id)
    }

    pub fn import_posts(&mut self, posts: &[CleanPost]) -> Result<(), ServiceError> {
        self.store.upsert_posts(posts)
    }

    /// Persists a named dataset; refuses to overwrite an existing one.
    pub fn add_dataset(
        &mut self,
        name: &str,
        description: &serde_json::Value,
        posts: &[(String, SampleOrigin)],
    ) -> Result<(), ServiceError> {
        let now = self.now();
        self.store.insert_dataset(name, description, posts, now)
    }

    pub fn register(&mut self, form: &DemographicsForm) -> Result<Registration, ServiceError> {
        let demographics = form.validate()?;
        let seq = self.next_worker;
        let profile = WorkerProfile {
            worker_id: format!("w{seq:06}"),
            demographics,
            definitions_acknowledged: false,
        };
        let now = self.now();
        let session = Session {
            token: uuid::Uuid::new_v4().simple().to_string(),
            worker_id: profile.worker_id.clone(),
            issued_at: now,
            expires_at: now + Duration::seconds(self.settings.session_ttl_secs),
        };
        self.store.insert_worker(seq, &profile, &session)?;
        self.next_worker += 1;
        let reg = Registration {
            worker_id: profile.worker_id.clone(),
            token: session.token.clone(),
            expires_at: session.expires_at,
        };
        self.workers.insert(profile.worker_id.clone(), profile);
        self.sessions.insert(session.token.clone(), session);
        Ok(reg)
    }

    /// The worker owning a live session token.
    pub fn authenticate(&self, token: Option<&str>) -> Result<&WorkerProfile, ServiceError> {
        let session = token
            .and_then(|t| self.sessions.get(t))
            .ok_or(ServiceError::Unauthorized)?;
        if session.expires_at <= self.now() {
            return Err(ServiceError::Unauthorized);
        }
        self.workers
            .get(&session.worker_id)
            .ok_or(ServiceError::Unauthorized)
    }

    pub fn is_admin(&self, token: Option<&str>) -> bool {
        match &self.settings.admin_token {
            None => true,
            Some(admin) => token == Some(admin.as_str()),
        }
    }

    pub fn acknowledge(
        &mut self,
        worker_id: &str,
        token: Option<&str>,
    ) -> Result<(), ServiceError> {
        let worker = self.authenticate(token)?;
        if worker.worker_id != worker_id {
            return Err(ServiceError::Forbidden(
                "session belongs to another worker".into(),
            ));
        }
        if worker.definitions_acknowledged {
            return Ok(());
        }
        self.store.acknowledge(worker_id)?;
        if let Some(w) = self.workers.get_mut(worker_id) {
            w.definitions_acknowledged = true;
        }
        Ok(())
    }

    /// Releases reservations whose time is up and persists the result.
    fn expire(&mut self, round_id: &str) -> Result<(), ServiceError> {
        let now = self.now();
        let round = self.book.get_mut(round_id).map_err(not_found)?;
        let outcome = round.expire_due(now);
        if !outcome.expired.is_empty() {
            self.store
                .expire_assignments(round_id, &outcome.expired, outcome.closed, now)?;
        }
        Ok(())
    }

    pub fn next_batch(
        &mut self,
        round_id: &str,
        token: Option<&str>,
    ) -> Result<Option<BatchPayload>, ServiceError> {
        let worker = self.authenticate(token)?.clone();
        self.expire(round_id)?;
        let now = self.now();
        let round = self.book.get(round_id).map_err(not_found)?;
        let Some(assignment) = round.plan_batch(&worker, now)? else {
            return Ok(None);
        };
        let replaced = round.open_assignment_of(&worker.worker_id).map(|a| a.id);
        let scheme = round.scheme().clone();
        let texts = self.store.post_texts(&assignment.post_ids)?;
        self.store.insert_assignment(&assignment, replaced)?;
        let payload = BatchPayload {
            round_id: round_id.to_string(),
            assignment_id: assignment.id,
            expires_at: assignment.expires_at,
            scheme,
            posts: assignment
                .post_ids
                .iter()
                .map(|p| BatchPost {
                    post_id: p.clone(),
                    text: texts.get(p).cloned().unwrap_or_default(),
                })
                .collect(),
        };
        self.book
            .get_mut(round_id)
            .map_err(not_found)?
            .apply_batch(assignment);
        Ok(Some(payload))
    }

    pub fn submit(
        &mut self,
        round_id: &str,
        token: Option<&str>,
        assignment_id: AssignmentId,
        inputs: Vec<JudgmentInput>,
    ) -> Result<SubmitReport, ServiceError> {
        let worker_id = self.authenticate(token)?.worker_id.clone();
        self.expire(round_id)?;
        let now = self.now();
        let round = self.book.get(round_id).map_err(not_found)?;
        let plan = round.plan_submit(&worker_id, assignment_id, inputs, now)?;
        self.store.record_submission(round_id, &plan, now)?;
        Ok(self
            .book
            .get_mut(round_id)
            .map_err(not_found)?
            .apply_submit(plan))
    }

    pub fn view(&mut self, round_id: &str) -> Result<RoundView, ServiceError> {
        self.expire(round_id)?;
        let round = self.round(round_id)?;
        let c = round.config();
        Ok(RoundView {
            round_id: c.round_id.clone(),
            dataset: c.dataset.clone(),
            min_judgments: c.min_judgments,
            max_judgments: c.max_judgments,
            batch_size: c.batch_size,
            reservation_ttl_secs: c.reservation_ttl_secs,
            payment_per_batch: c.payment_per_batch.clone(),
            scheme: round.scheme().clone(),
            progress: round.progress(),
        })
    }

    pub fn create_round(&mut self, config: RoundConfig) -> Result<&Round, ServiceError> {
        config.validate()?;
        if self.book.get(&config.round_id).is_ok() {
            return Err(AnnotationError::DuplicateRound(config.round_id).into());
        }
        if !self.store.has_dataset(&config.dataset)? {
            return Err(AnnotationError::UnknownDataset(config.dataset).into());
        }
        let scheme = self
            .schemes
            .get(&config.scheme)
            .map_err(|_| AnnotationError::UnknownScheme(config.scheme.clone()))?
            .clone();
        let posts = self
            .store
            .dataset(&config.dataset)?
            .into_iter()
            .map(|(id, _)| id)
            .collect();
        let round = Round::new(config, scheme, posts)?;
        self.store.insert_round(round.config(), self.now())?;
        let id = round.id().to_string();
        self.book.insert(round);
        self.round(&id)
    }

    pub fn close_round(&mut self, round_id: &str) -> Result<RoundProgress, ServiceError> {
        let now = self.now();
        let mut trial = self.round(round_id)?.clone();
        if trial.state() == RoundState::Closed {
            return Ok(trial.progress());
        }
        let expired = trial.close(now)?;
        self.store.set_round_closed(round_id, &expired, now)?;
        let progress = trial.progress();
        *self.book.get_mut(round_id).map_err(not_found)? = trial;
        Ok(progress)
    }

    pub fn origins(&self, dataset: &str) -> Result<HashMap<String, SampleOrigin>, ServiceError> {
        Ok(self.store.dataset(dataset)?.into_iter().collect())
    }

    /// Returns a cached report for the round's current ledger, or a job to
    /// compute one; pass the result of the job to [`Platform::cache_report`].
    pub fn analysis(&mut self, round_id: &str) -> Result<Analysis, ServiceError> {
        let round = self.round(round_id)?;
        let key = round.ledger().len();
        if let Some((k, report)) = self.reports.get(round_id) {
            if *k == key {
                return Ok(Analysis::Cached(report.clone()));
            }
        }
        if let Some(json) = self.store.cached_report(round_id, key)? {
            let report: AnalysisReport =
                serde_json::from_str(&json).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
            let report = Arc::new(report);
            self.reports
                .insert(round_id.to_string(), (key, report.clone()));
            return Ok(Analysis::Cached(report));
        }
        let judgments: Vec<_> = round.accepted_judgments().cloned().collect();
        let mut annotators: Vec<&str> = judgments.iter().map(|j| j.worker_id.as_str()).collect();
        annotators.sort_unstable();
        annotators.dedup();
        let demographics = DemographicsSummary::from_profiles(
            annotators
                .iter()
                .filter_map(|w| self.workers.get(*w))
                .map(|w| &w.demographics),
        );
        Ok(Analysis::Pending(Box::new(AnalysisJob {
            round_id: round_id.to_string(),
            key,
            scheme: round.scheme().clone(),
            post_ids: round.posts().to_vec(),
            origins: self.origins(&round.config().dataset)?,
            judgments,
            demographics,
            thresholds: self.settings.thresholds,
        })))
    }

    pub fn cache_report(
        &mut self,
        key: usize,
        report: AnalysisReport,
    ) -> Result<Arc<AnalysisReport>, ServiceError> {
        let json =
            serde_json::to_string(&report).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
        self.store
            .save_report(&report.round_id, key, &json, self.now())?;
        let report = Arc::new(report);
        self.reports
            .insert(report.round_id.clone(), (key, report.clone()));
        Ok(report)
    }

    /// Computes (or fetches) the analysis report in one call.
    pub fn analyze(&mut self, round_id: &str) -> Result<Arc<AnalysisReport>, ServiceError> {
        match self.analysis(round_id)? {
            Analysis::Cached(r) => Ok(r),
            Analysis::Pending(job) => {
                let key = job.key;
                let report = job.run();
                self.cache_report(key, report)
            }
        }
    }

    /// CSV export of a closed round.
    pub fn export(&self, round_id: &str, variant: ExportVariant) -> Result<Vec<u8>, ServiceError> {
        let round = self.round(round_id)?;
        if round.state() != RoundState::Closed {
            return Err(ServiceError::Conflict(format!(
                "round {round_id} is still open"
            )));
        }
        match variant {
            ExportVariant::Majority => {
                let texts = self.store.post_texts(round.posts())?;
                let origins = self.origins(&round.config().dataset)?;
                export::majority_csv(round, &texts, &origins)
            }
            ExportVariant::Judgments => export::judgments_csv(&self.store.judgments(round_id)?),
        }
    }
}

fn not_found(e: AnnotationError) -> ServiceError {
    ServiceError::NotFound(e.to_string())
}
