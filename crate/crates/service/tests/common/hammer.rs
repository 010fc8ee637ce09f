//! Many workers racing through batch/submit over HTTP.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;
use std::time::Duration;

use crowdlabel_core::annotation::RoundState;
use crowdlabel_service::{Settings, SystemClock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::StatusCode;
use serde_json::{json, Value};
use tempfile::TempDir;

use super::{config, platform, Server};

const LABELS: [&str; 4] = ["Abusive", "Hateful", "Normal", "Spam"];

#[derive(Debug)]
pub struct HammerOutcome {
    pub posts: usize,
    pub per_post: BTreeMap<String, usize>,
    pub duplicate_pairs: usize,
    pub stored_rows: usize,
    pub submitted: usize,
    pub ledger: usize,
    pub closed: bool,
}

impl HammerOutcome {
    pub fn ok(&self, judgments: usize) -> bool {
        self.closed
            && self.duplicate_pairs == 0
            && self.per_post.len() == self.posts
            && self.per_post.values().all(|&c| c == judgments)
            && self.stored_rows == self.submitted
            && self.ledger == self.submitted
    }
}

async fn worker(s: Arc<Server>, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let token = s.ready_worker().await;
    let mut submitted = 0;
    loop {
        let (status, batch) = s.batch("r1", &token).await;
        match status {
            StatusCode::OK => {
                tokio::time::sleep(Duration::from_micros(rng.random_range(0..1500))).await;
                let judgments: Vec<Value> = batch["posts"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|p| json!({"post_id": p["post_id"], "top_label": LABELS[rng.random_range(0..4)]}))
                    .collect();
                let n = judgments.len();
                let body = json!({"assignment_id": batch["assignment_id"], "judgments": judgments});
                let (st, report) = s.submit("r1", &token, &body).await;
                assert_eq!(st, StatusCode::OK, "{report}");
                submitted += n;
            }
            StatusCode::NO_CONTENT => {
                let v: Value = s
                    .http
                    .get(s.url("/api/rounds/r1"))
                    .send()
                    .await
                    .unwrap()
                    .json()
                    .await
                    .unwrap();
                if v["progress"]["state"] == "closed" {
                    return submitted;
                }
                tokio::time::sleep(Duration::from_millis(2)).await;
            }
            StatusCode::CONFLICT if batch["code"] == "round_closed" => return submitted,
            other => panic!("unexpected {other}: {batch}"),
        }
    }
}

/// Runs `workers` concurrent clients against a fresh `posts`-post round
/// with `judgments` judgments per post and batches of 10.
pub async fn hammer(seed: u64, workers: usize, posts: usize, judgments: u32) -> HammerOutcome {
    let dir = TempDir::new().unwrap();
    let p = platform(
        dir.path(),
        Arc::new(SystemClock),
        Settings::default(),
        posts,
        config("r1", "L''", judgments, judgments, 10),
    );
    let s = Arc::new(Server::start(p).await);
    let tasks: Vec<_> = (0..workers as u64)
        .map(|w| tokio::spawn(worker(s.clone(), seed.wrapping_mul(1_000).wrapping_add(w))))
        .collect();
    let mut submitted = 0;
    for t in tasks {
        submitted += t.await.unwrap();
    }

    let p = s.state.lock().unwrap();
    let rows = p.store().judgments("r1").unwrap();
    let mut per_post = BTreeMap::new();
    let mut pairs = HashSet::new();
    let mut duplicate_pairs = 0;
    for r in &rows {
        *per_post.entry(r.judgment.post_id.clone()).or_insert(0) += 1;
        if !pairs.insert((r.judgment.worker_id.clone(), r.judgment.post_id.clone())) {
            duplicate_pairs += 1;
        }
    }
    let round = p.round("r1").unwrap();
    HammerOutcome {
        posts,
        per_post,
        duplicate_pairs,
        stored_rows: rows.len(),
        submitted,
        ledger: round.ledger().len(),
        closed: round.state() == RoundState::Closed,
    }
}
