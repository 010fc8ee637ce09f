#![allow(dead_code)]

pub mod hammer;

use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use crowdlabel_core::annotation::RoundConfig;
use crowdlabel_core::corpus::{CleanPost, PostMetadata, RawPost};
use crowdlabel_core::sampling::SampleOrigin;
use crowdlabel_service::{shared, Clock, Platform, Settings, SharedPlatform};
use reqwest::StatusCode;
use serde_json::{json, Value};

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2017, 3, 1, 9, 0, 0).unwrap()
}

pub fn post(id: &str, text: &str) -> CleanPost {
    CleanPost {
        post: RawPost {
            id: id.into(),
            text: text.into(),
            lang: "en".into(),
            created_at: t0(),
            author_created_at: t0(),
            retweet_flag: false,
            retweet_added_text: None,
        },
        metadata: PostMetadata {
            url_count: 0,
            hashtag_count: 0,
            mention_count: 0,
            emoji_count: 0,
            numeral_count: 0,
            is_retweet: false,
            has_mention: false,
            polarity: 0.0,
            subjectivity: 0.0,
            offensive_term_count: 0,
            account_age_days: 0,
        },
        rejection_reason: None,
    }
}

pub fn post_id(i: usize) -> String {
    format!("p{i:04}")
}

pub fn config(round_id: &str, scheme: &str, min: u32, max: u32, batch: usize) -> RoundConfig {
    RoundConfig {
        round_id: round_id.into(),
        dataset: "d1".into(),
        scheme: scheme.into(),
        min_judgments: min,
        max_judgments: max,
        batch_size: batch,
        payment_per_batch: None,
        reservation_ttl_secs: 900,
        gold: None,
    }
}

/// Opens a platform in `dir` holding `n` posts in dataset `d1` and the given round.
pub fn platform(
    dir: &Path,
    clock: Arc<dyn Clock>,
    settings: Settings,
    n: usize,
    round: RoundConfig,
) -> Platform {
    let mut p = Platform::open_dir(dir, clock, settings).unwrap();
    let posts: Vec<CleanPost> = (0..n)
        .map(|i| post(&post_id(i), &format!("text of post {i}")))
        .collect();
    p.import_posts(&posts).unwrap();
    let members: Vec<(String, SampleOrigin)> = (0..n)
        .map(|i| {
            let origin = if i % 3 == 0 {
                SampleOrigin::BoostedSample
            } else {
                SampleOrigin::RandomSample
            };
            (post_id(i), origin)
        })
        .collect();
    p.add_dataset("d1", &json!({"size": n}), &members).unwrap();
    p.create_round(round).unwrap();
    p
}

pub fn form() -> Value {
    json!({
        "gender": "female",
        "age_bracket": "25-31",
        "income_bracket": "20k-30k",
        "education_level": "master",
        "nationality": "GR",
    })
}

pub struct Server {
    pub base: String,
    pub state: SharedPlatform,
    pub http: reqwest::Client,
}

impl Server {
    pub async fn start(platform: Platform) -> Server {
        let state = shared(platform);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let s = state.clone();
        tokio::spawn(async move {
            crowdlabel_service::serve(listener, s, std::future::pending()).await
        });
        Server {
            base,
            state,
            http: reqwest::Client::new(),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn register(&self) -> (String, String) {
        let r = self
            .http
            .post(self.url("/api/workers"))
            .json(&form())
            .send()
            .await
            .unwrap();
        assert_eq!(r.status(), StatusCode::CREATED);
        let v: Value = r.json().await.unwrap();
        (
            v["worker_id"].as_str().unwrap().into(),
            v["token"].as_str().unwrap().into(),
        )
    }

    /// Registers and acknowledges definitions; returns the token.
    pub async fn ready_worker(&self) -> String {
        let (id, token) = self.register().await;
        let r = self
            .http
            .post(self.url(&format!("/api/workers/{id}/ack-definitions")))
            .bearer_auth(&token)
            .send()
            .await
            .unwrap();
        assert_eq!(r.status(), StatusCode::NO_CONTENT);
        token
    }

    pub async fn batch(&self, round: &str, token: &str) -> (StatusCode, Value) {
        let r = self
            .http
            .get(self.url(&format!("/api/rounds/{round}/batch")))
            .bearer_auth(token)
            .send()
            .await
            .unwrap();
        let status = r.status();
        let body = if status == StatusCode::NO_CONTENT {
            Value::Null
        } else {
            r.json().await.unwrap()
        };
        (status, body)
    }

    pub async fn submit(&self, round: &str, token: &str, body: &Value) -> (StatusCode, Value) {
        let r = self
            .http
            .post(self.url(&format!("/api/rounds/{round}/judgments")))
            .bearer_auth(token)
            .json(body)
            .send()
            .await
            .unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }
}

/// A submission labelling every post of `batch` with `label`.
pub fn label_all(batch: &Value, label: &str) -> Value {
    let judgments: Vec<Value> = batch["posts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| json!({"post_id": p["post_id"], "top_label": label}))
        .collect();
    json!({"assignment_id": batch["assignment_id"], "judgments": judgments})
}
