mod common;

use std::sync::Arc;

use chrono::Duration;
use common::{config, label_all, platform, t0, Server};
use crowdlabel_service::{ManualClock, Settings, SystemClock};
use reqwest::StatusCode;
use serde_json::{json, Value};
use tempfile::TempDir;

async fn server(n: usize, round: crowdlabel_core::annotation::RoundConfig) -> (TempDir, Server) {
    let dir = TempDir::new().unwrap();
    let p = platform(
        dir.path(),
        Arc::new(SystemClock),
        Settings::default(),
        n,
        round,
    );
    (dir, Server::start(p).await)
}

async fn manual_server(
    n: usize,
    round: crowdlabel_core::annotation::RoundConfig,
) -> (TempDir, Arc<ManualClock>, Server) {
    let dir = TempDir::new().unwrap();
    let clock = Arc::new(ManualClock::new(t0()));
    let p = platform(dir.path(), clock.clone(), Settings::default(), n, round);
    (dir, clock, Server::start(p).await)
}

#[tokio::test]
async fn registration_validates_demographics() {
    let (_dir, s) = server(10, config("r1", "L", 1, 1, 10)).await;
    let r = s
        .http
        .post(s.url("/api/workers"))
        .json(&common::form())
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    let v: Value = r.json().await.unwrap();
    assert_eq!(v["worker_id"], "w000001");
    assert_eq!(v["token"].as_str().unwrap().len(), 32);
    assert!(v["expires_at"].is_string());

    let mut missing = common::form();
    missing.as_object_mut().unwrap().remove("nationality");
    let r = s
        .http
        .post(s.url("/api/workers"))
        .json(&missing)
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
    let v: Value = r.json().await.unwrap();
    assert_eq!(v["field"], "nationality");

    let mut other = common::form();
    other["gender"] = json!("other");
    let r = s
        .http
        .post(s.url("/api/workers"))
        .json(&other)
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);

    let mut bad = common::form();
    bad["age_bracket"] = json!("17");
    let r = s
        .http
        .post(s.url("/api/workers"))
        .json(&bad)
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json::<Value>().await.unwrap()["field"], "age_bracket");

    let r = s
        .http
        .post(s.url("/api/workers"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn acknowledgment_is_idempotent_and_gates_batches() {
    let (_dir, s) = server(20, config("r1", "L", 1, 1, 10)).await;
    let (id, token) = s.register().await;
    let (status, _) = s.batch("r1", &token).await;
    assert_eq!(status, StatusCode::FORBIDDEN);

    let ack = |tok: Option<&str>, worker: &str| {
        let mut req = s
            .http
            .post(s.url(&format!("/api/workers/{worker}/ack-definitions")));
        if let Some(t) = tok {
            req = req.bearer_auth(t);
        }
        req.send()
    };
    assert_eq!(
        ack(Some(&token), &id).await.unwrap().status(),
        StatusCode::NO_CONTENT
    );
    assert_eq!(
        ack(Some(&token), &id).await.unwrap().status(),
        StatusCode::NO_CONTENT
    );
    assert_eq!(
        ack(Some("bogus"), &id).await.unwrap().status(),
        StatusCode::UNAUTHORIZED
    );
    assert_eq!(
        ack(None, &id).await.unwrap().status(),
        StatusCode::UNAUTHORIZED
    );
    let (other, _) = s.register().await;
    assert_eq!(
        ack(Some(&token), &other).await.unwrap().status(),
        StatusCode::FORBIDDEN
    );

    let (status, body) = s.batch("r1", &token).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["posts"].as_array().unwrap().len(), 10);
}

#[tokio::test]
async fn batch_endpoint_contract() {
    let (_dir, s) = server(25, config("r1", "L", 2, 2, 10)).await;
    let token = s.ready_worker().await;

    let (status, body) = s.batch("r1", &token).await;
    assert_eq!(status, StatusCode::OK);
    let posts = body["posts"].as_array().unwrap();
    assert_eq!(posts.len(), 10);
    assert!(posts
        .iter()
        .all(|p| p["text"].as_str().unwrap().starts_with("text of post")));
    assert_eq!(body["scheme"]["version"], "L");
    assert_eq!(body["scheme"]["sub_labels"].as_array().unwrap().len(), 5);
    assert!(body["scheme"]["definitions"]["Cyberbullying"].is_string());
    assert!(body["expires_at"].is_string());

    let (status, body2) = s.batch("r1", &token).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body2["code"], "open_assignment");

    assert_eq!(s.batch("r1", "bogus").await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(s.batch("nope", &token).await.0, StatusCode::NOT_FOUND);

    // drain the round: 25 posts, batches of 10, then nothing left for this worker
    let mut sizes = vec![];
    let mut current = body;
    loop {
        sizes.push(current["posts"].as_array().unwrap().len());
        let (st, _) = s.submit("r1", &token, &label_all(&current, "Normal")).await;
        assert_eq!(st, StatusCode::OK);
        let (st, next) = s.batch("r1", &token).await;
        if st == StatusCode::NO_CONTENT {
            break;
        }
        assert_eq!(st, StatusCode::OK);
        current = next;
    }
    assert_eq!(sizes, vec![10, 10, 5]);
}

#[tokio::test]
async fn submission_status_codes() {
    let (_dir, clock, s) = manual_server(30, config("r1", "L", 1, 3, 10)).await;
    let token = s.ready_worker().await;
    let (_, batch) = s.batch("r1", &token).await;
    let posts: Vec<Value> = batch["posts"].as_array().unwrap().clone();

    // unknown sub-label under L
    let mut bad = label_all(&batch, "Normal");
    bad["judgments"][0] = json!({"post_id": posts[0]["post_id"], "top_label": "Inappropriate", "sub_labels": ["Rude"]});
    let (st, body) = s.submit("r1", &token, &bad).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalid_judgment");

    // incomplete coverage
    let mut partial = label_all(&batch, "Normal");
    partial["judgments"].as_array_mut().unwrap().pop();
    assert_eq!(
        s.submit("r1", &token, &partial).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );

    // valid, multi-select sub-labels and an "other" suggestion
    let mut good = label_all(&batch, "Normal");
    good["judgments"][0] = json!({
        "post_id": posts[0]["post_id"],
        "top_label": "Inappropriate",
        "sub_labels": ["Abusive", "Offensive"],
        "other_text": "trolling",
    });
    let (st, report) = s.submit("r1", &token, &good).await;
    assert_eq!(st, StatusCode::OK, "{report}");
    assert_eq!(report["accepted"], 10);

    let (st, body) = s.submit("r1", &token, &good).await;
    assert_eq!(st, StatusCode::CONFLICT, "{body}");

    // another worker cannot submit someone else's assignment
    let other = s.ready_worker().await;
    assert_eq!(s.submit("r1", &other, &good).await.0, StatusCode::FORBIDDEN);

    // a reservation past its TTL is gone
    let (_, late) = s.batch("r1", &token).await;
    clock.advance(Duration::seconds(901));
    let (st, body) = s.submit("r1", &token, &label_all(&late, "Spam")).await;
    assert_eq!(st, StatusCode::GONE, "{body}");

    // the expired posts are offered again
    let (st, again) = s.batch("r1", &token).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(again["posts"], late["posts"]);

    let unknown = json!({"assignment_id": 9999, "judgments": []});
    assert_eq!(
        s.submit("r1", &token, &unknown).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        s.submit("r1", &token, &json!({"judgments": []})).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
}

#[tokio::test]
async fn sessions_expire_after_ttl() {
    let (_dir, clock, s) = manual_server(10, config("r1", "L", 1, 1, 10)).await;
    let token = s.ready_worker().await;
    clock.advance(Duration::hours(12) - Duration::seconds(1));
    assert_eq!(s.batch("r1", &token).await.0, StatusCode::OK);
    clock.advance(Duration::seconds(1));
    assert_eq!(s.batch("r1", &token).await.0, StatusCode::UNAUTHORIZED);
    let r = s
        .http
        .post(s.url("/api/workers"))
        .json(&common::form())
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
}

#[tokio::test]
async fn schemes_and_rounds_are_readable() {
    let (_dir, s) = server(12, config("r1", "L''", 1, 1, 10)).await;
    let v: Value = s
        .http
        .get(s.url("/api/schemes/L"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(v["top_labels"], json!(["Normal", "Spam", "Inappropriate"]));
    assert_eq!(v["allow_multi_select"], true);
    let v: Value = s
        .http
        .get(s.url("/api/schemes/L''"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(v["sub_labels"], json!([]));
    assert_eq!(
        s.http
            .get(s.url("/api/schemes/X"))
            .send()
            .await
            .unwrap()
            .status(),
        StatusCode::NOT_FOUND
    );

    let v: Value = s
        .http
        .get(s.url("/api/rounds/r1"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(v["dataset"], "d1");
    assert_eq!(v["batch_size"], 10);
    assert_eq!(v["scheme"]["version"], "L''");
    assert_eq!(v["progress"]["state"], "open");
    let v: Value = s
        .http
        .get(s.url("/api/rounds"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(
        s.http
            .get(s.url("/api/rounds/zz"))
            .send()
            .await
            .unwrap()
            .status(),
        StatusCode::NOT_FOUND
    );
}

/// Four posts, four workers, scheme L'': p0000 unanimous Normal, p0001 split
/// 2-2, p0002 3-1, p0003 unanimous Spam.
async fn four_post_round(s: &Server) {
    let votes = [
        ["Normal", "Abusive", "Abusive", "Spam"],
        ["Normal", "Abusive", "Abusive", "Spam"],
        ["Normal", "Hateful", "Abusive", "Spam"],
        ["Normal", "Hateful", "Hateful", "Spam"],
    ];
    for worker in votes {
        let token = s.ready_worker().await;
        let (st, batch) = s.batch("r1", &token).await;
        assert_eq!(st, StatusCode::OK);
        let judgments: Vec<Value> = batch["posts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| {
                let i: usize = p["post_id"].as_str().unwrap()[1..].parse().unwrap();
                json!({"post_id": p["post_id"], "top_label": worker[i]})
            })
            .collect();
        let body = json!({"assignment_id": batch["assignment_id"], "judgments": judgments});
        assert_eq!(s.submit("r1", &token, &body).await.0, StatusCode::OK);
    }
}

#[tokio::test]
async fn export_and_analysis_of_closed_round() {
    let (_dir, s) = server(4, config("r1", "L''", 4, 4, 4)).await;
    let export_url = s.url("/api/rounds/r1/export?format=csv");
    assert_eq!(
        s.http.get(&export_url).send().await.unwrap().status(),
        StatusCode::CONFLICT
    );
    assert_eq!(
        s.http
            .get(s.url("/api/rounds/nope/export"))
            .send()
            .await
            .unwrap()
            .status(),
        StatusCode::NOT_FOUND
    );

    four_post_round(&s).await;
    let v: Value = s
        .http
        .get(s.url("/api/rounds/r1"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(v["progress"]["state"], "closed");

    let r = s.http.get(&export_url).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert!(r.headers()["content-type"]
        .to_str()
        .unwrap()
        .starts_with("text/csv"));
    let text = r.text().await.unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "post_id,text,majority_label,agreement_fraction,tier,sample_origin"
    );
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[1], "p0000,text of post 0,Normal,1.0,Overwhelming,BS");
    assert_eq!(lines[2], "p0001,text of post 1,,0.5,,RS");
    assert_eq!(lines[3], "p0002,text of post 2,Abusive,0.75,Strong,RS");
    assert_eq!(lines[4], "p0003,text of post 3,Spam,1.0,Overwhelming,BS");

    let raw = s
        .http
        .get(s.url("/api/rounds/r1/export?format=csv&variant=judgments"))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert_eq!(raw.lines().count(), 17);
    assert!(raw.starts_with(
        "round_id,post_id,worker_id,top_label,sub_labels,other_text,submitted_at,quarantined"
    ));
    assert_eq!(
        s.http
            .get(s.url("/api/rounds/r1/export?format=xlsx"))
            .send()
            .await
            .unwrap()
            .status(),
        StatusCode::UNPROCESSABLE_ENTITY
    );

    let report: Value = s
        .http
        .get(s.url("/api/rounds/r1/analysis"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(report["pairs"].as_array().unwrap().len(), 6);
    assert_eq!(report["posts"], 4);
    assert_eq!(report["judgments"], 16);
    assert_eq!(report["tiers"]["no_majority"], 1);
    assert_eq!(report["demographics"]["workers"], 4);
}

#[tokio::test]
async fn analysis_is_cached_by_judgment_count() {
    let (_dir, s) = server(4, config("r1", "L''", 4, 4, 4)).await;
    let url = s.url("/api/rounds/r1/analysis");
    let empty: Value = s.http.get(&url).send().await.unwrap().json().await.unwrap();
    assert_eq!(empty["judgments"], 0);
    four_post_round(&s).await;
    let full: Value = s.http.get(&url).send().await.unwrap().json().await.unwrap();
    assert_eq!(full["judgments"], 16);
    let again: Value = s.http.get(&url).send().await.unwrap().json().await.unwrap();
    assert_eq!(full, again);
    let stored = s
        .state
        .lock()
        .unwrap()
        .store()
        .cached_report("r1", 16)
        .unwrap();
    assert!(stored.is_some());
}

#[tokio::test]
async fn admin_token_guards_operator_endpoints() {
    let dir = TempDir::new().unwrap();
    let settings = Settings {
        admin_token: Some("sesame".into()),
        ..Settings::default()
    };
    let p = platform(
        dir.path(),
        Arc::new(SystemClock),
        settings,
        4,
        config("r1", "L''", 4, 4, 4),
    );
    let s = Server::start(p).await;
    let analysis = s.url("/api/rounds/r1/analysis");
    assert_eq!(
        s.http.get(&analysis).send().await.unwrap().status(),
        StatusCode::UNAUTHORIZED
    );
    assert_eq!(
        s.http
            .get(&analysis)
            .bearer_auth("sesame")
            .send()
            .await
            .unwrap()
            .status(),
        StatusCode::OK
    );
    let close = s.url("/api/rounds/r1/close");
    assert_eq!(
        s.http.post(&close).send().await.unwrap().status(),
        StatusCode::UNAUTHORIZED
    );
    let r = s
        .http
        .post(&close)
        .bearer_auth("sesame")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::CONFLICT);
    assert_eq!(r.json::<Value>().await.unwrap()["code"], "pending_posts");

    four_post_round(&s).await;
    let export = s.url("/api/rounds/r1/export");
    assert_eq!(
        s.http.get(&export).send().await.unwrap().status(),
        StatusCode::UNAUTHORIZED
    );
    assert_eq!(
        s.http
            .get(&export)
            .bearer_auth("sesame")
            .send()
            .await
            .unwrap()
            .status(),
        StatusCode::OK
    );
}

#[tokio::test]
async fn manual_close_once_minimum_is_met() {
    let (_dir, s) = server(4, config("r1", "L''", 1, 3, 4)).await;
    let token = s.ready_worker().await;
    let (_, batch) = s.batch("r1", &token).await;
    // the round reaches its minimum with the first batch and closes itself
    s.submit("r1", &token, &label_all(&batch, "Normal")).await;
    let v: Value = s
        .http
        .post(s.url("/api/rounds/r1/close"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(v["state"], "closed");
    let other = s.ready_worker().await;
    let (st, body) = s.batch("r1", &other).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(body["code"], "round_closed");
}
