use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::worker::WorkerProfile;
use super::AnnotationError;
use crate::scheme::{Label, LabelScheme, INAPPROPRIATE};

pub const DEFAULT_RESERVATION_TTL_SECS: i64 = 15 * 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssignmentId(pub u64);

impl std::fmt::Display for AssignmentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Informational payment record; nothing is disbursed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Payment {
    pub amount_cents: u32,
    pub currency: String,
}

/// Optional quality control: workers whose accuracy on the gold posts falls
/// below `min_accuracy` after `min_answers` gold answers are excluded from the
/// round and their judgments quarantined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldConfig {
    pub labels: BTreeMap<String, Label>,
    #[serde(default = "GoldConfig::default_min_answers")]
    pub min_answers: u32,
    #[serde(default = "GoldConfig::default_min_accuracy")]
    pub min_accuracy: f64,
}

impl GoldConfig {
    fn default_min_answers() -> u32 {
        3
    }

    fn default_min_accuracy() -> f64 {
        0.7
    }
}

fn default_ttl() -> i64 {
    DEFAULT_RESERVATION_TTL_SECS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundConfig {
    pub round_id: String,
    pub dataset: String,
    pub scheme: String,
    pub min_judgments: u32,
    pub max_judgments: u32,
    pub batch_size: usize,
    #[serde(default)]
    pub payment_per_batch: Option<Payment>,
    #[serde(default = "default_ttl")]
    pub reservation_ttl_secs: i64,
    #[serde(default)]
    pub gold: Option<GoldConfig>,
}

impl RoundConfig {
    pub fn validate(&self) -> Result<(), AnnotationError> {
        let bad = |m: String| {
            Err(AnnotationError::InvalidConfig(format!(
                "{}: {m}",
                self.round_id
            )))
        };
        if self.round_id.trim().is_empty() {
            return bad("empty round id".into());
        }
        if self.min_judgments == 0 {
            return bad("min_judgments must be at least 1".into());
        }
        if self.min_judgments > self.max_judgments {
            return bad(format!(
                "min_judgments {} exceeds max_judgments {}",
                self.min_judgments, self.max_judgments
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.reservation_ttl_secs <= 0 {
            return bad("reservation_ttl_secs must be positive".into());
        }
        if let Some(gold) = &self.gold {
            if !(0.0..=1.0).contains(&gold.min_accuracy) {
                return bad("gold.min_accuracy outside [0, 1]".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundState {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentState {
    Reserved,
    Completed,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: AssignmentId,
    pub round_id: String,
    pub worker_id: String,
    pub post_ids: Vec<String>,
    pub expires_at: DateTime<Utc>,
    pub state: AssignmentState,
}

/// One label selection as submitted by a worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentInput {
    pub post_id: String,
    pub top_label: Label,
    #[serde(default)]
    pub sub_labels: Vec<Label>,
    #[serde(default)]
    pub other_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub round_id: String,
    pub assignment_id: AssignmentId,
    pub worker_id: String,
    pub post_id: String,
    pub top_label: Label,
    pub sub_labels: Vec<Label>,
    pub other_text: Option<String>,
    pub submitted_at: DateTime<Utc>,
}

impl Judgment {
    /// Labels this judgment votes for: the selected sub-labels under
    /// Inappropriate, otherwise the top label itself.
    pub fn votes(&self) -> Vec<&Label> {
        if self.top_label.as_str() == INAPPROPRIATE {
            self.sub_labels.iter().collect()
        } else {
            vec![&self.top_label]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub judgment: Judgment,
    pub quarantined: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldStats {
    pub answered: u32,
    pub correct: u32,
}

impl GoldStats {
    pub fn accuracy(&self) -> f64 {
        if self.answered == 0 {
            1.0
        } else {
            self.correct as f64 / self.answered as f64
        }
    }
}

/// A validated, not yet applied submission.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmitPlan {
    pub assignment_id: AssignmentId,
    pub worker_id: String,
    pub judgments: Vec<Judgment>,
    pub gold_after: Option<GoldStats>,
    /// Set when this submission drops the worker below the gold threshold.
    pub exclude_worker: bool,
    /// Indices into the round's judgment ledger that become quarantined.
    pub quarantine: Vec<usize>,
    pub closes_round: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitReport {
    pub assignment_id: AssignmentId,
    pub accepted: usize,
    pub worker_excluded: bool,
    pub quarantined: usize,
    pub round_state: RoundState,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpiryOutcome {
    pub expired: Vec<AssignmentId>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundProgress {
    pub round_id: String,
    pub state: RoundState,
    pub total_posts: usize,
    pub posts_done: usize,
    pub posts_pending: usize,
    pub live_reservations: usize,
    pub accepted_judgments: usize,
    pub quarantined_judgments: usize,
    /// Number of posts holding each judgment count.
    pub judgment_histogram: BTreeMap<u32, usize>,
}

/// In-memory state of one annotation round.
///
/// Every post keeps a load of `judged + live reservations`; posts with load
/// below `max_judgments` wait in a priority queue ordered by load, then by
/// dataset position. All transitions take the current time explicitly.
#[derive(Debug, Clone)]
pub struct Round {
    config: RoundConfig,
    scheme: LabelScheme,
    state: RoundState,
    posts: Vec<String>,
    index: HashMap<String, usize>,
    judged: Vec<u32>,
    reserved: Vec<u32>,
    queue: BTreeSet<(u32, usize)>,
    pending_min: usize,
    live_total: usize,
    judged_by: HashMap<String, HashSet<usize>>,
    assignments: BTreeMap<AssignmentId, Assignment>,
    open_by_worker: HashMap<String, AssignmentId>,
    next_assignment: u64,
    ledger: Vec<JudgmentRecord>,
    gold: HashMap<String, GoldStats>,
    excluded: HashSet<String>,
}

impl Round {
    pub fn new(
        config: RoundConfig,
        scheme: LabelScheme,
        posts: Vec<String>,
    ) -> Result<Self, AnnotationError> {
        config.validate()?;
        if config.scheme != scheme.version {
            return Err(AnnotationError::InvalidConfig(format!(
                "round {} expects scheme {} but got {}",
                config.round_id, config.scheme, scheme.version
            )));
        }
        let mut index = HashMap::with_capacity(posts.len());
        for (i, id) in posts.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(AnnotationError::InvalidConfig(format!(
                    "post {id} appears twice in the dataset"
                )));
            }
        }
        if let Some(gold) = &config.gold {
            let vote_labels = scheme.vote_labels();
            for (post, label) in &gold.labels {
                if !index.contains_key(post) {
                    return Err(AnnotationError::UnknownPost(post.clone()));
                }
                if !vote_labels.contains(label) {
                    return Err(AnnotationError::InvalidConfig(format!(
                        "gold label '{label}' for {post} is not a vote label of scheme {}",
                        scheme.version
                    )));
                }
            }
        }
        let n = posts.len();
        let max = config.max_judgments;
        Ok(Self {
            queue: if max > 0 {
                (0..n).map(|i| (0, i)).collect()
            } else {
                BTreeSet::new()
            },
            pending_min: n,
            live_total: 0,
            judged: vec![0; n],
            reserved: vec![0; n],
            config,
            scheme,
            state: RoundState::Open,
            posts,
            index,
            judged_by: HashMap::new(),
            assignments: BTreeMap::new(),
            open_by_worker: HashMap::new(),
            next_assignment: 1,
            ledger: Vec::new(),
            gold: HashMap::new(),
            excluded: HashSet::new(),
        })
    }

    /// Rebuilds a round from persisted assignments and judgments, the latter
    /// in submission order. Gold accounting and quarantine are replayed per
    /// assignment exactly as they were applied live.
    pub fn restore(
        config: RoundConfig,
        scheme: LabelScheme,
        posts: Vec<String>,
        assignments: Vec<Assignment>,
        judgments: Vec<Judgment>,
        closed: bool,
    ) -> Result<Self, AnnotationError> {
        let mut round = Round::new(config, scheme, posts)?;
        let mut by_assignment: BTreeMap<AssignmentId, Vec<Judgment>> = BTreeMap::new();
        let mut order = Vec::new();
        for j in judgments {
            if !round.index.contains_key(&j.post_id) {
                return Err(AnnotationError::UnknownPost(j.post_id));
            }
            if !by_assignment.contains_key(&j.assignment_id) {
                order.push(j.assignment_id);
            }
            by_assignment.entry(j.assignment_id).or_default().push(j);
        }
        for a in &assignments {
            round.next_assignment = round.next_assignment.max(a.id.0 + 1);
        }
        let mut states: BTreeMap<AssignmentId, Assignment> =
            assignments.into_iter().map(|a| (a.id, a)).collect();

        for id in order {
            let judgments = by_assignment.remove(&id).unwrap_or_default();
            let Some(worker_id) = judgments.first().map(|j| j.worker_id.clone()) else {
                continue;
            };
            let mut assignment = states.remove(&id).unwrap_or_else(|| Assignment {
                id,
                round_id: round.config.round_id.clone(),
                worker_id: worker_id.clone(),
                post_ids: judgments.iter().map(|j| j.post_id.clone()).collect(),
                expires_at: judgments[0].submitted_at,
                state: AssignmentState::Completed,
            });
            assignment.state = AssignmentState::Completed;
            let plan = round.gold_plan(&worker_id, judgments);
            round.assignments.insert(id, assignment);
            round.commit(plan);
        }
        for (_, a) in states {
            if a.state == AssignmentState::Reserved {
                round.reserve(a);
            } else {
                round.assignments.insert(a.id, a);
            }
        }
        if closed {
            round.state = RoundState::Closed;
        }
        Ok(round)
    }

    pub fn config(&self) -> &RoundConfig {
        &self.config
    }

    pub fn id(&self) -> &str {
        &self.config.round_id
    }

    pub fn scheme(&self) -> &LabelScheme {
        &self.scheme
    }

    pub fn state(&self) -> RoundState {
        self.state
    }

    pub fn posts(&self) -> &[String] {
        &self.posts
    }

    pub fn judgment_count(&self, post_id: &str) -> Option<u32> {
        self.index.get(post_id).map(|&i| self.judged[i])
    }

    pub fn assignment(&self, id: AssignmentId) -> Option<&Assignment> {
        self.assignments.get(&id)
    }

    pub fn assignments(&self) -> impl Iterator<Item = &Assignment> {
        self.assignments.values()
    }

    pub fn open_assignment_of(&self, worker_id: &str) -> Option<&Assignment> {
        self.open_by_worker
            .get(worker_id)
            .and_then(|id| self.assignments.get(id))
    }

    pub fn ledger(&self) -> &[JudgmentRecord] {
        &self.ledger
    }

    /// Judgments that count for analysis (quarantined ones excluded).
    pub fn accepted_judgments(&self) -> impl Iterator<Item = &Judgment> {
        self.ledger
            .iter()
            .filter(|r| !r.quarantined)
            .map(|r| &r.judgment)
    }

    pub fn is_excluded(&self, worker_id: &str) -> bool {
        self.excluded.contains(worker_id)
    }

    pub fn gold_stats(&self, worker_id: &str) -> Option<GoldStats> {
        self.gold.get(worker_id).copied()
    }

    fn load(&self, i: usize) -> u32 {
        self.judged[i] + self.reserved[i]
    }

    fn adjust(&mut self, i: usize, judged: i64, reserved: i64) {
        let max = self.config.max_judgments;
        let before = self.load(i);
        if before < max {
            self.queue.remove(&(before, i));
        }
        let was_pending = self.judged[i] < self.config.min_judgments;
        self.judged[i] = (self.judged[i] as i64 + judged) as u32;
        self.reserved[i] = (self.reserved[i] as i64 + reserved) as u32;
        self.live_total = (self.live_total as i64 + reserved) as usize;
        let pending = self.judged[i] < self.config.min_judgments;
        match (was_pending, pending) {
            (true, false) => self.pending_min -= 1,
            (false, true) => self.pending_min += 1,
            _ => {}
        }
        let after = self.load(i);
        if after < max {
            self.queue.insert((after, i));
        }
    }

    fn reserve(&mut self, assignment: Assignment) {
        for post in &assignment.post_ids {
            if let Some(&i) = self.index.get(post) {
                self.adjust(i, 0, 1);
            }
        }
        self.open_by_worker
            .insert(assignment.worker_id.clone(), assignment.id);
        self.assignments.insert(assignment.id, assignment);
    }

    fn release(&mut self, id: AssignmentId, state: AssignmentState) {
        let Some(a) = self.assignments.get_mut(&id) else {
            return;
        };
        if a.state != AssignmentState::Reserved {
            return;
        }
        a.state = state;
        let (worker, posts) = (a.worker_id.clone(), a.post_ids.clone());
        if self.open_by_worker.get(&worker) == Some(&id) {
            self.open_by_worker.remove(&worker);
        }
        for post in posts {
            if let Some(&i) = self.index.get(&post) {
                self.adjust(i, 0, -1);
            }
        }
    }

    /// Expires reservations whose TTL has passed. Closes the round when that
    /// leaves every post at its minimum with nothing outstanding.
    pub fn expire_due(&mut self, now: DateTime<Utc>) -> ExpiryOutcome {
        let due: Vec<AssignmentId> = self
            .open_by_worker
            .values()
            .filter(|id| self.assignments[id].expires_at <= now)
            .copied()
            .collect();
        let mut due = due;
        due.sort();
        for &id in &due {
            self.release(id, AssignmentState::Expired);
        }
        let closed = !due.is_empty()
            && self.state == RoundState::Open
            && self.pending_min == 0
            && self.live_total == 0;
        if closed {
            self.state = RoundState::Closed;
        }
        ExpiryOutcome {
            expired: due,
            closed,
        }
    }

    /// Chooses the posts for a worker's next batch without reserving them.
    /// Call [`Round::expire_due`] first so stale reservations do not hold
    /// posts back.
    pub fn plan_batch(
        &self,
        worker: &WorkerProfile,
        now: DateTime<Utc>,
    ) -> Result<Option<Assignment>, AnnotationError> {
        if self.state == RoundState::Closed {
            return Err(AnnotationError::RoundClosed(self.id().to_string()));
        }
        if !worker.definitions_acknowledged {
            return Err(AnnotationError::NotAcknowledged(worker.worker_id.clone()));
        }
        if self.excluded.contains(&worker.worker_id) {
            return Err(AnnotationError::WorkerExcluded(worker.worker_id.clone()));
        }
        if let Some(open) = self.open_assignment_of(&worker.worker_id) {
            if open.expires_at > now {
                return Err(AnnotationError::OpenAssignmentExists(open.id));
            }
        }
        let seen = self.judged_by.get(&worker.worker_id);
        let picked: Vec<String> = self
            .queue
            .iter()
            .filter(|(_, i)| seen.is_none_or(|s| !s.contains(i)))
            .take(self.config.batch_size)
            .map(|&(_, i)| self.posts[i].clone())
            .collect();
        if picked.is_empty() {
            return Ok(None);
        }
        Ok(Some(Assignment {
            id: AssignmentId(self.next_assignment),
            round_id: self.id().to_string(),
            worker_id: worker.worker_id.clone(),
            post_ids: picked,
            expires_at: now + Duration::seconds(self.config.reservation_ttl_secs),
            state: AssignmentState::Reserved,
        }))
    }

    pub fn apply_batch(&mut self, assignment: Assignment) {
        self.next_assignment = self.next_assignment.max(assignment.id.0 + 1);
        if let Some(old) = self.open_by_worker.get(&assignment.worker_id).copied() {
            self.release(old, AssignmentState::Expired);
        }
        self.reserve(assignment);
    }

    pub fn next_batch(
        &mut self,
        worker: &WorkerProfile,
        now: DateTime<Utc>,
    ) -> Result<Option<Assignment>, AnnotationError> {
        self.expire_due(now);
        let plan = self.plan_batch(worker, now)?;
        if let Some(a) = &plan {
            self.apply_batch(a.clone());
        }
        Ok(plan)
    }

    fn gold_correct(&self, judgment: &Judgment, truth: &Label) -> bool {
        judgment.votes().contains(&truth)
    }

    /// Gold accounting for a batch of judgments from one worker.
    fn gold_plan(&self, worker_id: &str, judgments: Vec<Judgment>) -> SubmitPlan {
        let mut plan = SubmitPlan {
            assignment_id: judgments
                .first()
                .map(|j| j.assignment_id)
                .unwrap_or(AssignmentId(0)),
            worker_id: worker_id.to_string(),
            gold_after: None,
            exclude_worker: false,
            quarantine: Vec::new(),
            closes_round: false,
            judgments,
        };
        let Some(gold) = &self.config.gold else {
            return plan;
        };
        if self.excluded.contains(worker_id) {
            plan.quarantine = (0..plan.judgments.len())
                .map(|k| self.ledger.len() + k)
                .collect();
            return plan;
        }
        let mut stats = self.gold.get(worker_id).copied().unwrap_or_default();
        for j in &plan.judgments {
            if let Some(truth) = gold.labels.get(&j.post_id) {
                stats.answered += 1;
                if self.gold_correct(j, truth) {
                    stats.correct += 1;
                }
            }
        }
        plan.gold_after = Some(stats);
        if stats.answered >= gold.min_answers && stats.accuracy() < gold.min_accuracy {
            plan.exclude_worker = true;
            plan.quarantine = self
                .ledger
                .iter()
                .enumerate()
                .filter(|(_, r)| !r.quarantined && r.judgment.worker_id == worker_id)
                .map(|(k, _)| k)
                .chain((0..plan.judgments.len()).map(|k| self.ledger.len() + k))
                .collect();
        }
        plan
    }

    /// Validates a submission against the assignment and the scheme without
    /// changing any state.
    pub fn plan_submit(
        &self,
        worker_id: &str,
        assignment_id: AssignmentId,
        inputs: Vec<JudgmentInput>,
        now: DateTime<Utc>,
    ) -> Result<SubmitPlan, AnnotationError> {
        let assignment = self
            .assignments
            .get(&assignment_id)
            .ok_or(AnnotationError::UnknownAssignment(assignment_id))?;
        if assignment.worker_id != worker_id {
            return Err(AnnotationError::NotYourAssignment(assignment_id));
        }
        match assignment.state {
            AssignmentState::Completed => {
                return Err(AnnotationError::DuplicateSubmission(assignment_id))
            }
            AssignmentState::Expired => return Err(AnnotationError::Expired(assignment_id)),
            AssignmentState::Reserved if assignment.expires_at <= now => {
                return Err(AnnotationError::Expired(assignment_id))
            }
            AssignmentState::Reserved => {}
        }
        if self.state == RoundState::Closed {
            return Err(AnnotationError::RoundClosed(self.id().to_string()));
        }

        let expected: HashSet<&str> = assignment.post_ids.iter().map(String::as_str).collect();
        let mut covered = HashSet::new();
        for input in &inputs {
            if !expected.contains(input.post_id.as_str()) {
                return Err(AnnotationError::CoverageMismatch(format!(
                    "post {} is not part of assignment {assignment_id}",
                    input.post_id
                )));
            }
            if !covered.insert(input.post_id.as_str()) {
                return Err(AnnotationError::CoverageMismatch(format!(
                    "post {} judged twice",
                    input.post_id
                )));
            }
        }
        if covered.len() != expected.len() {
            return Err(AnnotationError::CoverageMismatch(format!(
                "{} of {} assigned posts judged",
                covered.len(),
                expected.len()
            )));
        }

        let mut judgments = Vec::with_capacity(inputs.len());
        for input in inputs {
            let other = input
                .other_text
                .map(|t| t.trim().to_string())
                .filter(|t| !t.is_empty());
            self.scheme
                .validate_selection(
                    input.top_label.as_str(),
                    &input.sub_labels,
                    other.as_deref(),
                )
                .map_err(|violation| AnnotationError::InvalidJudgment {
                    post_id: input.post_id.clone(),
                    violation,
                })?;
            judgments.push(Judgment {
                round_id: self.id().to_string(),
                assignment_id,
                worker_id: worker_id.to_string(),
                post_id: input.post_id,
                top_label: input.top_label,
                sub_labels: input.sub_labels,
                other_text: other,
                submitted_at: now,
            });
        }

        let mut plan = self.gold_plan(worker_id, judgments);
        plan.assignment_id = assignment_id;
        plan.closes_round = self.closes_after(&plan, assignment);
        Ok(plan)
    }

    fn closes_after(&self, plan: &SubmitPlan, assignment: &Assignment) -> bool {
        let mut delta: HashMap<usize, i64> = HashMap::new();
        let new_start = self.ledger.len();
        let quarantined: HashSet<usize> = plan.quarantine.iter().copied().collect();
        for (k, j) in plan.judgments.iter().enumerate() {
            if !quarantined.contains(&(new_start + k)) {
                *delta.entry(self.index[&j.post_id]).or_default() += 1;
            }
        }
        for &k in &plan.quarantine {
            if k < new_start {
                *delta
                    .entry(self.index[&self.ledger[k].judgment.post_id])
                    .or_default() -= 1;
            }
        }
        let mut pending = self.pending_min as i64;
        let min = self.config.min_judgments as i64;
        for (&i, &d) in &delta {
            let before = self.judged[i] as i64;
            match (before < min, before + d < min) {
                (true, false) => pending -= 1,
                (false, true) => pending += 1,
                _ => {}
            }
        }
        let live_after = self.live_total - assignment.post_ids.len();
        pending == 0 && live_after == 0
    }

    /// Applies a plan produced by [`Round::plan_submit`] on this same state.
    pub fn apply_submit(&mut self, plan: SubmitPlan) -> SubmitReport {
        let id = plan.assignment_id;
        self.release(id, AssignmentState::Completed);
        let accepted = plan.judgments.len();
        let quarantined = plan.quarantine.len();
        let excluded = plan.exclude_worker;
        let closes = plan.closes_round;
        self.commit(plan);
        if closes {
            self.state = RoundState::Closed;
        }
        SubmitReport {
            assignment_id: id,
            accepted,
            worker_excluded: excluded,
            quarantined,
            round_state: self.state,
        }
    }

    fn commit(&mut self, plan: SubmitPlan) {
        let worker = plan.worker_id;
        for j in plan.judgments {
            let i = self.index[&j.post_id];
            self.judged_by.entry(worker.clone()).or_default().insert(i);
            self.adjust(i, 1, 0);
            self.ledger.push(JudgmentRecord {
                judgment: j,
                quarantined: false,
            });
        }
        if let Some(stats) = plan.gold_after {
            self.gold.insert(worker.clone(), stats);
        }
        for k in plan.quarantine {
            if !self.ledger[k].quarantined {
                self.ledger[k].quarantined = true;
                let i = self.index[&self.ledger[k].judgment.post_id];
                self.adjust(i, -1, 0);
            }
        }
        if plan.exclude_worker {
            self.excluded.insert(worker);
        }
    }

    pub fn submit_judgments(
        &mut self,
        worker_id: &str,
        assignment_id: AssignmentId,
        inputs: Vec<JudgmentInput>,
        now: DateTime<Utc>,
    ) -> Result<SubmitReport, AnnotationError> {
        let plan = self.plan_submit(worker_id, assignment_id, inputs, now)?;
        Ok(self.apply_submit(plan))
    }

    /// Closes the round once every post has its minimum number of judgments.
    /// Outstanding reservations are expired. Returns the expired ids.
    pub fn close(&mut self, now: DateTime<Utc>) -> Result<Vec<AssignmentId>, AnnotationError> {
        let mut expired = self.expire_due(now).expired;
        if self.state == RoundState::Closed {
            return Ok(expired);
        }
        if self.pending_min > 0 {
            return Err(AnnotationError::PendingPosts(self.pending_min));
        }
        let live: Vec<AssignmentId> = self.open_by_worker.values().copied().collect();
        for id in live {
            self.release(id, AssignmentState::Expired);
            expired.push(id);
        }
        self.state = RoundState::Closed;
        Ok(expired)
    }

    pub fn progress(&self) -> RoundProgress {
        let mut hist = BTreeMap::new();
        for &c in &self.judged {
            *hist.entry(c).or_insert(0) += 1;
        }
        let quarantined = self.ledger.iter().filter(|r| r.quarantined).count();
        RoundProgress {
            round_id: self.id().to_string(),
            state: self.state,
            total_posts: self.posts.len(),
            posts_done: self.posts.len() - self.pending_min,
            posts_pending: self.pending_min,
            live_reservations: self.live_total,
            accepted_judgments: self.ledger.len() - quarantined,
            quarantined_judgments: quarantined,
            judgment_histogram: hist,
        }
    }
}
