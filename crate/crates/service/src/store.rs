//! SQLite persistence. Every public method is one transaction.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use chrono::{DateTime, SecondsFormat, Utc};
use crowdlabel_core::annotation::{
    Assignment, AssignmentId, AssignmentState, Demographics, Judgment, RoundConfig, SubmitPlan,
    WorkerProfile,
};
use crowdlabel_core::corpus::CleanPost;
use crowdlabel_core::sampling::SampleOrigin;
use crowdlabel_core::scheme::Label;
use rusqlite::{params, Connection, OptionalExtension, Transaction};

use crate::error::ServiceError;

pub const DB_FILE: &str = "crowdlabel.db";

const SCHEMA: &str = r#"
CREATE TABLE IF NOT EXISTS meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS posts (
    id TEXT PRIMARY KEY,
    text TEXT NOT NULL,
    rejection_reason TEXT,
    data TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS datasets (
    name TEXT PRIMARY KEY,
    description TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS dataset_posts (
    dataset TEXT NOT NULL REFERENCES datasets(name),
    position INTEGER NOT NULL,
    post_id TEXT NOT NULL REFERENCES posts(id),
    origin TEXT NOT NULL,
    PRIMARY KEY (dataset, position),
    UNIQUE (dataset, post_id)
);
CREATE TABLE IF NOT EXISTS rounds (
    id TEXT PRIMARY KEY,
    dataset TEXT NOT NULL REFERENCES datasets(name),
    scheme TEXT NOT NULL,
    config TEXT NOT NULL,
    state TEXT NOT NULL,
    created_at TEXT NOT NULL,
    closed_at TEXT
);
CREATE TABLE IF NOT EXISTS workers (
    id TEXT PRIMARY KEY,
    seq INTEGER NOT NULL UNIQUE,
    gender TEXT NOT NULL,
    age_bracket TEXT NOT NULL,
    income_bracket TEXT NOT NULL,
    education_level TEXT NOT NULL,
    nationality TEXT NOT NULL,
    definitions_acknowledged INTEGER NOT NULL,
    registered_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
    token TEXT PRIMARY KEY,
    worker_id TEXT NOT NULL REFERENCES workers(id),
    issued_at TEXT NOT NULL,
    expires_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS assignments (
    round_id TEXT NOT NULL REFERENCES rounds(id),
    id INTEGER NOT NULL,
    worker_id TEXT NOT NULL REFERENCES workers(id),
    expires_at TEXT NOT NULL,
    state TEXT NOT NULL,
    PRIMARY KEY (round_id, id)
);
CREATE TABLE IF NOT EXISTS assignment_posts (
    round_id TEXT NOT NULL,
    assignment_id INTEGER NOT NULL,
    position INTEGER NOT NULL,
    post_id TEXT NOT NULL REFERENCES posts(id),
    PRIMARY KEY (round_id, assignment_id, position),
    FOREIGN KEY (round_id, assignment_id) REFERENCES assignments(round_id, id)
);
CREATE TABLE IF NOT EXISTS judgments (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    round_id TEXT NOT NULL REFERENCES rounds(id),
    assignment_id INTEGER NOT NULL,
    worker_id TEXT NOT NULL REFERENCES workers(id),
    post_id TEXT NOT NULL REFERENCES posts(id),
    top_label TEXT NOT NULL,
    other_text TEXT,
    submitted_at TEXT NOT NULL,
    quarantined INTEGER NOT NULL DEFAULT 0,
    UNIQUE (worker_id, post_id, round_id),
    FOREIGN KEY (round_id, assignment_id) REFERENCES assignments(round_id, id)
);
CREATE TABLE IF NOT EXISTS judgment_labels (
    judgment_id INTEGER NOT NULL REFERENCES judgments(id),
    position INTEGER NOT NULL,
    label TEXT NOT NULL,
    PRIMARY KEY (judgment_id, position)
);
CREATE TABLE IF NOT EXISTS analysis_reports (
    round_id TEXT NOT NULL REFERENCES rounds(id),
    judgment_count INTEGER NOT NULL,
    report TEXT NOT NULL,
    created_at TEXT NOT NULL,
    PRIMARY KEY (round_id, judgment_count)
);
"#;

fn ts(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Nanos, true)
}

fn parse_ts(s: &str) -> Result<DateTime<Utc>, ServiceError> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| ServiceError::Corrupt(format!("timestamp '{s}': {e}")))
}

fn state_str(s: AssignmentState) -> &'static str {
    match s {
        AssignmentState::Reserved => "reserved",
        AssignmentState::Completed => "completed",
        AssignmentState::Expired => "expired",
    }
}

fn parse_state(s: &str) -> Result<AssignmentState, ServiceError> {
    match s {
        "reserved" => Ok(AssignmentState::Reserved),
        "completed" => Ok(AssignmentState::Completed),
        "expired" => Ok(AssignmentState::Expired),
        other => Err(ServiceError::Corrupt(format!("assignment state '{other}'"))),
    }
}

fn corrupt<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> ServiceError + '_ {
    move |e| ServiceError::Corrupt(format!("{what}: {e}"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub token: String,
    pub worker_id: String,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

/// A round as persisted: enough to rebuild it with `Round::restore`.
#[derive(Debug, Clone)]
pub struct StoredRound {
    pub config: RoundConfig,
    pub closed: bool,
    pub assignments: Vec<Assignment>,
    /// In submission order.
    pub judgments: Vec<Judgment>,
}

/// One row of the raw judgments export.
#[derive(Debug, Clone)]
pub struct JudgmentRow {
    pub judgment: Judgment,
    pub quarantined: bool,
}

pub struct Store {
    conn: Connection,
}

impl Store {
    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        let conn = Connection::open(path)?;
        conn.busy_timeout(Duration::from_secs(10))?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self, ServiceError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, ServiceError> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.pragma_update(None, "synchronous", "NORMAL")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Store { conn })
    }

    pub fn set_meta(&mut self, key: &str, value: &str) -> Result<(), ServiceError> {
        self.conn.execute(
            "INSERT INTO meta (key, value) VALUES (?1, ?2) ON CONFLICT(key) DO UPDATE SET value = excluded.value",
            params![key, value],
        )?;
        Ok(())
    }

    pub fn meta(&self, key: &str) -> Result<Option<String>, ServiceError> {
        Ok(self
            .conn
            .query_row("SELECT value FROM meta WHERE key = ?1", [key], |r| r.get(0))
            .optional()?)
    }

    /// Inserts or replaces posts by id.
    pub fn upsert_posts(&mut self, posts: &[CleanPost]) -> Result<(), ServiceError> {
        let tx = self.conn.transaction()?;
        {
            let mut stmt = tx.prepare(
                "INSERT INTO posts (id, text, rejection_reason, data) VALUES (?1, ?2, ?3, ?4)
                 ON CONFLICT(id) DO UPDATE SET text = excluded.text,
                   rejection_reason = excluded.rejection_reason, data = excluded.data",
            )?;
            for p in posts {
                let data = serde_json::to_string(p).map_err(corrupt("post"))?;
                stmt.execute(params![
                    p.id(),
                    p.post.text,
                    p.rejection_reason.map(|r| r.as_str()),
                    data
                ])?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    pub fn post_count(&self) -> Result<usize, ServiceError> {
        Ok(self
            .conn
            .query_row("SELECT COUNT(*) FROM posts", [], |r| r.get::<_, i64>(0))?
            as usize)
    }

    /// Posts that passed the filter, ordered by id.
    pub fn accepted_posts(&self) -> Result<Vec<CleanPost>, ServiceError> {
        let mut stmt = self
            .conn
            .prepare("SELECT data FROM posts WHERE rejection_reason IS NULL ORDER BY id")?;
        let rows = stmt.query_map([], |r| r.get::<_, String>(0))?;
        let mut out = Vec::new();
        for row in rows {
            out.push(serde_json::from_str(&row?).map_err(corrupt("post"))?);
        }
        Ok(out)
    }

    pub fn post_texts(&self, ids: &[String]) -> Result<HashMap<String, String>, ServiceError> {
        let mut stmt = self
            .conn
            .prepare_cached("SELECT text FROM posts WHERE id = ?1")?;
        let mut out = HashMap::with_capacity(ids.len());
        for id in ids {
            let text: String = stmt.query_row([id], |r| r.get(0))?;
            out.insert(id.clone(), text);
        }
        Ok(out)
    }

    pub fn has_dataset(&self, name: &str) -> Result<bool, ServiceError> {
        Ok(self
            .conn
            .query_row("SELECT 1 FROM datasets WHERE name = ?1", [name], |_| Ok(()))
            .optional()?
            .is_some())
    }

    pub fn insert_dataset(
        &mut self,
        name: &str,
        description: &serde_json::Value,
        posts: &[(String, SampleOrigin)],
        now: DateTime<Utc>,
    ) -> Result<(), ServiceError> {
        if self.has_dataset(name)? {
            return Err(ServiceError::Conflict(format!(
                "dataset {name} already exists"
            )));
        }
        let tx = self.conn.transaction()?;
        tx.execute(
            "INSERT INTO datasets (name, description, created_at) VALUES (?1, ?2, ?3)",
            params![name, description.to_string(), ts(now)],
        )?;
        {
            let mut stmt =
                tx.prepare("INSERT INTO dataset_posts (dataset, position, post_id, origin) VALUES (?1, ?2, ?3, ?4)")?;
            for (i, (post, origin)) in posts.iter().enumerate() {
                stmt.execute(params![name, i as i64, post, origin.code()])?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    /// Post ids and origins in dataset order.
    pub fn dataset(&self, name: &str) -> Result<Vec<(String, SampleOrigin)>, ServiceError> {
        if !self.has_dataset(name)? {
            return Err(ServiceError::NotFound(format!("unknown dataset {name}")));
        }
        let mut stmt = self.conn.prepare(
            "SELECT post_id, origin FROM dataset_posts WHERE dataset = ?1 ORDER BY position",
        )?;
        let rows = stmt.query_map([name], |r| {
            Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (id, code) = row?;
            let origin = SampleOrigin::from_code(&code)
                .ok_or_else(|| ServiceError::Corrupt(format!("origin '{code}'")))?;
            out.push((id, origin));
        }
        Ok(out)
    }

    pub fn dataset_names(&self) -> Result<Vec<String>, ServiceError> {
        let mut stmt = self
            .conn
            .prepare("SELECT name FROM datasets ORDER BY name")?;
        let rows = stmt.query_map([], |r| r.get(0))?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    pub fn insert_worker(
        &mut self,
        seq: u64,
        profile: &WorkerProfile,
        session: &Session,
    ) -> Result<(), ServiceError> {
        let tx = self.conn.transaction()?;
        let d = &profile.demographics;
        tx.execute(
            "INSERT INTO workers (id, seq, gender, age_bracket, income_bracket, education_level, nationality,
               definitions_acknowledged, registered_at) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)",
            params![
                profile.worker_id,
                seq as i64,
                d.gender.as_str(),
                d.age_bracket.as_str(),
                d.income_bracket.as_str(),
                d.education_level.as_str(),
                d.nationality.as_str(),
                profile.definitions_acknowledged,
                ts(session.issued_at),
            ],
        )?;
        insert_session(&tx, session)?;
        tx.commit()?;
        Ok(())
    }

    pub fn acknowledge(&mut self, worker_id: &str) -> Result<(), ServiceError> {
        self.conn.execute(
            "UPDATE workers SET definitions_acknowledged = 1 WHERE id = ?1",
            [worker_id],
        )?;
        Ok(())
    }

    /// Workers with their registration sequence number, in order.
    pub fn workers(&self) -> Result<Vec<(u64, WorkerProfile)>, ServiceError> {
        let mut stmt = self.conn.prepare(
            "SELECT seq, id, gender, age_bracket, income_bracket, education_level, nationality, definitions_acknowledged
             FROM workers ORDER BY seq",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, i64>(0)?,
                r.get::<_, String>(1)?,
                [
                    r.get::<_, String>(2)?,
                    r.get(3)?,
                    r.get(4)?,
                    r.get(5)?,
                    r.get(6)?,
                ],
                r.get::<_, bool>(7)?,
            ))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (seq, id, [gender, age, income, education, nationality], ack) = row?;
            let json = serde_json::json!({
                "gender": gender, "age_bracket": age, "income_bracket": income,
                "education_level": education, "nationality": nationality,
            });
            let demographics: Demographics =
                serde_json::from_value(json).map_err(corrupt("worker"))?;
            out.push((
                seq as u64,
                WorkerProfile {
                    worker_id: id,
                    demographics,
                    definitions_acknowledged: ack,
                },
            ));
        }
        Ok(out)
    }

    pub fn sessions(&self) -> Result<Vec<Session>, ServiceError> {
        let mut stmt = self
            .conn
            .prepare("SELECT token, worker_id, issued_at, expires_at FROM sessions")?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
            ))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (token, worker_id, issued, expires) = row?;
            out.push(Session {
                token,
                worker_id,
                issued_at: parse_ts(&issued)?,
                expires_at: parse_ts(&expires)?,
            });
        }
        Ok(out)
    }

    pub fn insert_round(
        &mut self,
        config: &RoundConfig,
        now: DateTime<Utc>,
    ) -> Result<(), ServiceError> {
        let json = serde_json::to_string(config).map_err(corrupt("round config"))?;
        self.conn.execute(
            "INSERT INTO rounds (id, dataset, scheme, config, state, created_at) VALUES (?1, ?2, ?3, ?4, 'open', ?5)",
            params![config.round_id, config.dataset, config.scheme, json, ts(now)],
        )?;
        Ok(())
    }

    pub fn set_round_closed(
        &mut self,
        round_id: &str,
        expired: &[AssignmentId],
        now: DateTime<Utc>,
    ) -> Result<(), ServiceError> {
        let tx = self.conn.transaction()?;
        mark_assignments(&tx, round_id, expired, AssignmentState::Expired)?;
        close_round(&tx, round_id, now)?;
        tx.commit()?;
        Ok(())
    }

    pub fn expire_assignments(
        &mut self,
        round_id: &str,
        expired: &[AssignmentId],
        closed: bool,
        now: DateTime<Utc>,
    ) -> Result<(), ServiceError> {
        let tx = self.conn.transaction()?;
        mark_assignments(&tx, round_id, expired, AssignmentState::Expired)?;
        if closed {
            close_round(&tx, round_id, now)?;
        }
        tx.commit()?;
        Ok(())
    }

    /// Stores a new reservation; a worker's previous, expired reservation in
    /// the same round is marked expired in the same transaction.
    pub fn insert_assignment(
        &mut self,
        a: &Assignment,
        replaced: Option<AssignmentId>,
    ) -> Result<(), ServiceError> {
        let tx = self.conn.transaction()?;
        if let Some(old) = replaced {
            mark_assignments(&tx, &a.round_id, &[old], AssignmentState::Expired)?;
        }
        tx.execute(
            "INSERT INTO assignments (round_id, id, worker_id, expires_at, state) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![a.round_id, a.id.0 as i64, a.worker_id, ts(a.expires_at), state_str(a.state)],
        )?;
        {
            let mut stmt = tx.prepare(
                "INSERT INTO assignment_posts (round_id, assignment_id, position, post_id) VALUES (?1, ?2, ?3, ?4)",
            )?;
            for (i, p) in a.post_ids.iter().enumerate() {
                stmt.execute(params![a.round_id, a.id.0 as i64, i as i64, p])?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    pub fn record_submission(
        &mut self,
        round_id: &str,
        plan: &SubmitPlan,
        now: DateTime<Utc>,
    ) -> Result<(), ServiceError> {
        let tx = self.conn.transaction()?;
        mark_assignments(
            &tx,
            round_id,
            &[plan.assignment_id],
            AssignmentState::Completed,
        )?;
        {
            let mut insert = tx.prepare(
                "INSERT INTO judgments (round_id, assignment_id, worker_id, post_id, top_label, other_text, submitted_at)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
            )?;
            let mut label = tx.prepare(
                "INSERT INTO judgment_labels (judgment_id, position, label) VALUES (?1, ?2, ?3)",
            )?;
            for j in &plan.judgments {
                insert.execute(params![
                    round_id,
                    j.assignment_id.0 as i64,
                    j.worker_id,
                    j.post_id,
                    j.top_label.as_str(),
                    j.other_text,
                    ts(j.submitted_at),
                ])?;
                let id = tx.last_insert_rowid();
                for (k, sub) in j.sub_labels.iter().enumerate() {
                    label.execute(params![id, k as i64, sub.as_str()])?;
                }
            }
        }
        if !plan.quarantine.is_empty() {
            // quarantine always covers every judgment of the worker in this round
            tx.execute(
                "UPDATE judgments SET quarantined = 1 WHERE round_id = ?1 AND worker_id = ?2",
                params![round_id, plan.worker_id],
            )?;
        }
        if plan.closes_round {
            close_round(&tx, round_id, now)?;
        }
        tx.commit()?;
        Ok(())
    }

    pub fn rounds(&self) -> Result<Vec<StoredRound>, ServiceError> {
        let mut stmt = self
            .conn
            .prepare("SELECT id, config, state FROM rounds ORDER BY id")?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
            ))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (id, config, state) = row?;
            let config: RoundConfig =
                serde_json::from_str(&config).map_err(corrupt("round config"))?;
            out.push(StoredRound {
                config,
                closed: state == "closed",
                assignments: self.assignments(&id)?,
                judgments: self
                    .judgments(&id)?
                    .into_iter()
                    .map(|r| r.judgment)
                    .collect(),
            });
        }
        Ok(out)
    }

    fn assignments(&self, round_id: &str) -> Result<Vec<Assignment>, ServiceError> {
        let mut posts: HashMap<i64, Vec<String>> = HashMap::new();
        {
            let mut stmt = self.conn.prepare(
                "SELECT assignment_id, post_id FROM assignment_posts WHERE round_id = ?1 ORDER BY assignment_id, position",
            )?;
            let rows = stmt.query_map([round_id], |r| {
                Ok((r.get::<_, i64>(0)?, r.get::<_, String>(1)?))
            })?;
            for row in rows {
                let (id, post) = row?;
                posts.entry(id).or_default().push(post);
            }
        }
        let mut stmt = self
            .conn
            .prepare("SELECT id, worker_id, expires_at, state FROM assignments WHERE round_id = ?1 ORDER BY id")?;
        let rows = stmt.query_map([round_id], |r| {
            Ok((
                r.get::<_, i64>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
            ))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (id, worker_id, expires, state) = row?;
            out.push(Assignment {
                id: AssignmentId(id as u64),
                round_id: round_id.to_string(),
                worker_id,
                post_ids: posts.remove(&id).unwrap_or_default(),
                expires_at: parse_ts(&expires)?,
                state: parse_state(&state)?,
            });
        }
        Ok(out)
    }

    /// All judgments of a round in submission order.
    pub fn judgments(&self, round_id: &str) -> Result<Vec<JudgmentRow>, ServiceError> {
        let mut labels: HashMap<i64, Vec<Label>> = HashMap::new();
        {
            let mut stmt = self.conn.prepare(
                "SELECT l.judgment_id, l.label FROM judgment_labels l JOIN judgments j ON j.id = l.judgment_id
                 WHERE j.round_id = ?1 ORDER BY l.judgment_id, l.position",
            )?;
            let rows = stmt.query_map([round_id], |r| {
                Ok((r.get::<_, i64>(0)?, r.get::<_, String>(1)?))
            })?;
            for row in rows {
                let (id, label) = row?;
                labels.entry(id).or_default().push(Label::new(label));
            }
        }
        let mut stmt = self.conn.prepare(
            "SELECT id, assignment_id, worker_id, post_id, top_label, other_text, submitted_at, quarantined
             FROM judgments WHERE round_id = ?1 ORDER BY id",
        )?;
        let rows = stmt.query_map([round_id], |r| {
            Ok((
                r.get::<_, i64>(0)?,
                r.get::<_, i64>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, String>(4)?,
                r.get::<_, Option<String>>(5)?,
                r.get::<_, String>(6)?,
                r.get::<_, bool>(7)?,
            ))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (id, assignment, worker_id, post_id, top, other, submitted, quarantined) = row?;
            out.push(JudgmentRow {
                judgment: Judgment {
                    round_id: round_id.to_string(),
                    assignment_id: AssignmentId(assignment as u64),
                    worker_id,
                    post_id,
                    top_label: Label::new(top),
                    sub_labels: labels.remove(&id).unwrap_or_default(),
                    other_text: other,
                    submitted_at: parse_ts(&submitted)?,
                },
                quarantined,
            });
        }
        Ok(out)
    }

    pub fn cached_report(
        &self,
        round_id: &str,
        judgment_count: usize,
    ) -> Result<Option<String>, ServiceError> {
        Ok(self
            .conn
            .query_row(
                "SELECT report FROM analysis_reports WHERE round_id = ?1 AND judgment_count = ?2",
                params![round_id, judgment_count as i64],
                |r| r.get(0),
            )
            .optional()?)
    }

    pub fn save_report(
        &mut self,
        round_id: &str,
        judgment_count: usize,
        report: &str,
        now: DateTime<Utc>,
    ) -> Result<(), ServiceError> {
        self.conn.execute(
            "INSERT OR REPLACE INTO analysis_reports (round_id, judgment_count, report, created_at) VALUES (?1, ?2, ?3, ?4)",
            params![round_id, judgment_count as i64, report, ts(now)],
        )?;
        Ok(())
    }
}

fn insert_session(tx: &Transaction<'_>, s: &Session) -> Result<(), ServiceError> {
    tx.execute(
        "INSERT INTO sessions (token, worker_id, issued_at, expires_at) VALUES (?1, ?2, ?3, ?4)",
        params![s.token, s.worker_id, ts(s.issued_at), ts(s.expires_at)],
    )?;
    Ok(())
}

fn mark_assignments(
    tx: &Transaction<'_>,
    round_id: &str,
    ids: &[AssignmentId],
    state: AssignmentState,
) -> Result<(), ServiceError> {
    let mut stmt =
        tx.prepare_cached("UPDATE assignments SET state = ?1 WHERE round_id = ?2 AND id = ?3")?;
    for id in ids {
        stmt.execute(params![state_str(state), round_id, id.0 as i64])?;
    }
    Ok(())
}

fn close_round(
    tx: &Transaction<'_>,
    round_id: &str,
    now: DateTime<Utc>,
) -> Result<(), ServiceError> {
    tx.execute(
        "UPDATE rounds SET state = 'closed', closed_at = ?2 WHERE id = ?1 AND state = 'open'",
        params![round_id, ts(now)],
    )?;
    Ok(())
}
