//! Synthetic annotators driving a round through the public HTTP API.
//!
//! Each simulated worker answers with a label drawn from the confusion row
//! of the post's true label. Workers act one request at a time in a fixed
//! order, so a run is a pure function of the model, the seed and the state
//! of the round it starts from.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use crowdlabel_core::scheme::{Label, LabelScheme, INAPPROPRIATE};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::UsageError;

const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    /// CSV with `post_id,label` columns.
    pub csv: Option<PathBuf>,
    /// Label distribution used for posts without a CSV entry.
    pub prior: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub workers: usize,
    /// Probability that a worker takes a batch when its turn comes.
    #[serde(default = "one")]
    pub judgment_rate: f64,
    /// Shorthand for a uniform confusion: the true label with probability
    /// `1 - error_rate`, every other vote label equally otherwise.
    pub error_rate: Option<f64>,
    /// Explicit rows: true label -> label -> probability.
    pub confusion: Option<BTreeMap<String, BTreeMap<String, f64>>>,
    pub truth: Option<TruthConfig>,
}

fn one() -> f64 {
    1.0
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read model {}: {e}", path.display())))?;
        let mut m: ModelFile = toml::from_str(&text)
            .map_err(|e| UsageError(format!("invalid model {}: {e}", path.display())))?;
        if let Some(csv) = m.truth.as_mut().and_then(|t| t.csv.as_mut()) {
            if csv.is_relative() {
                *csv = path.parent().unwrap_or(Path::new(".")).join(&*csv);
            }
        }
        Ok(m)
    }
}

/// A validated annotator model bound to a scheme.
#[derive(Debug, Clone)]
pub struct AnnotatorModel {
    pub workers: usize,
    pub judgment_rate: f64,
    labels: Vec<Label>,
    rows: HashMap<Label, WeightedIndex<f64>>,
    truth: HashMap<String, Label>,
    prior: WeightedIndex<f64>,
}

fn weights(
    labels: &[Label],
    row: &BTreeMap<String, f64>,
    what: &str,
) -> Result<WeightedIndex<f64>> {
    for (label, p) in row {
        ensure!(
            labels.iter().any(|l| l.as_str() == label),
            "{what}: '{label}' is not a vote label"
        );
        ensure!(
            p.is_finite() && *p >= 0.0,
            "{what}: probability {p} for '{label}' is invalid"
        );
    }
    let w: Vec<f64> = labels
        .iter()
        .map(|l| row.get(l.as_str()).copied().unwrap_or(0.0))
        .collect();
    let sum: f64 = w.iter().sum();
    ensure!(
        (sum - 1.0).abs() <= ROW_TOLERANCE,
        "{what}: probabilities sum to {sum}, not 1"
    );
    WeightedIndex::new(w).map_err(|e| anyhow!("{what}: {e}"))
}

impl AnnotatorModel {
    pub fn new(file: &ModelFile, scheme: &LabelScheme) -> Result<Self> {
        let labels = scheme.vote_labels();
        ensure!(file.workers > 0, "model needs at least one worker");
        ensure!(
            file.judgment_rate > 0.0 && file.judgment_rate <= 1.0,
            "judgment_rate must lie in (0, 1]"
        );
        let rows_spec: BTreeMap<String, BTreeMap<String, f64>> =
            match (&file.confusion, file.error_rate) {
                (Some(_), Some(_)) => bail!("give either error_rate or confusion, not both"),
                (None, None) => bail!("model needs error_rate or confusion"),
                (Some(c), None) => c.clone(),
                (None, Some(e)) => {
                    ensure!((0.0..=1.0).contains(&e), "error_rate must lie in [0, 1]");
                    ensure!(
                        labels.len() > 1 || e == 0.0,
                        "error_rate needs at least two labels"
                    );
                    let spread = if labels.len() > 1 {
                        e / (labels.len() - 1) as f64
                    } else {
                        0.0
                    };
                    labels
                        .iter()
                        .map(|t| {
                            let row = labels
                                .iter()
                                .map(|l| (l.to_string(), if l == t { 1.0 - e } else { spread }))
                                .collect();
                            (t.to_string(), row)
                        })
                        .collect()
                }
            };
        let mut rows = HashMap::new();
        for (t, row) in &rows_spec {
            ensure!(
                labels.iter().any(|l| l.as_str() == t),
                "confusion row '{t}' is not a vote label"
            );
            rows.insert(
                Label::from(t.as_str()),
                weights(&labels, row, &format!("confusion row {t}"))?,
            );
        }

        let truth_cfg = file.truth.clone().unwrap_or(TruthConfig {
            csv: None,
            prior: None,
        });
        let mut truth = HashMap::new();
        if let Some(path) = &truth_cfg.csv {
            let mut r = csv::Reader::from_path(path)
                .with_context(|| format!("cannot read truth {}", path.display()))?;
            for rec in r.deserialize::<(String, String)>() {
                let (post, label) =
                    rec.with_context(|| format!("bad row in {}", path.display()))?;
                truth.insert(post, Label::from(label.as_str()));
            }
        }
        let prior_spec = truth_cfg.prior.unwrap_or_else(|| {
            let p = 1.0 / labels.len() as f64;
            labels.iter().map(|l| (l.to_string(), p)).collect()
        });
        let prior = weights(&labels, &prior_spec, "truth prior")?;
        let possible = prior_spec
            .iter()
            .filter(|(_, p)| **p > 0.0)
            .map(|(l, _)| Label::from(l.as_str()));
        for label in truth.values().cloned().chain(possible) {
            ensure!(
                labels.contains(&label),
                "true label '{label}' is not a vote label"
            );
            ensure!(
                rows.contains_key(&label),
                "no confusion row for true label '{label}'"
            );
        }
        Ok(AnnotatorModel {
            workers: file.workers,
            judgment_rate: file.judgment_rate,
            labels,
            rows,
            truth,
            prior,
        })
    }

    fn true_label(&mut self, post_id: &str, rng: &mut ChaCha8Rng) -> Label {
        if let Some(l) = self.truth.get(post_id) {
            return l.clone();
        }
        let l = self.labels[self.prior.sample(rng)].clone();
        self.truth.insert(post_id.to_string(), l.clone());
        l
    }

    fn answer(&self, truth: &Label, rng: &mut ChaCha8Rng) -> Label {
        self.labels[self.rows[truth].sample(rng)].clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub round_id: String,
    pub seed: u64,
    pub workers: usize,
    pub batches: usize,
    pub judgments: usize,
    pub round_closed: bool,
    /// Posts whose true label the simulator drew or read, by post id.
    #[serde(skip)]
    pub truth: BTreeMap<String, String>,
}

impl SimulationReport {
    pub fn truth_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["post_id", "label"])?;
        for (post, label) in &self.truth {
            w.write_record([post, label])?;
        }
        w.into_inner().map_err(|e| anyhow!("{e}"))
    }
}

pub struct Client {
    http: reqwest::Client,
    base: String,
}

async fn json_or_error(r: reqwest::Response, what: &str) -> Result<Value> {
    let status = r.status();
    let body: Value = r.json().await.unwrap_or(Value::Null);
    if !status.is_success() {
        bail!(
            "{what} failed with {status}: {}",
            body["error"].as_str().unwrap_or("no detail")
        );
    }
    Ok(body)
}

impl Client {
    pub fn new(base: &str) -> Self {
        Client {
            http: reqwest::Client::new(),
            base: base.trim_end_matches('/').to_string(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn round(&self, round_id: &str) -> Result<Value> {
        let r = self
            .http
            .get(self.url(&format!("/api/rounds/{round_id}")))
            .send()
            .await?;
        json_or_error(r, &format!("reading round {round_id}")).await
    }

    async fn register(&self, demographics: &Value) -> Result<String> {
        let r = self
            .http
            .post(self.url("/api/workers"))
            .json(demographics)
            .send()
            .await?;
        let body = json_or_error(r, "registration").await?;
        let id = body["worker_id"]
            .as_str()
            .context("registration without worker_id")?;
        let token = body["token"]
            .as_str()
            .context("registration without token")?
            .to_string();
        let r = self
            .http
            .post(self.url(&format!("/api/workers/{id}/ack-definitions")))
            .bearer_auth(&token)
            .send()
            .await?;
        ensure!(
            r.status() == StatusCode::NO_CONTENT,
            "acknowledgment failed with {}",
            r.status()
        );
        Ok(token)
    }
}

const GENDERS: [&str; 3] = ["male", "female", "other"];
const AGES: [&str; 7] = ["18-24", "25-31", "32-38", "39-45", "46-52", "53-59", "60+"];
const INCOMES: [&str; 7] = [
    "<10k", "10k-20k", "20k-30k", "30k-50k", "50k-75k", "75k-100k", ">100k",
];
const EDUCATION: [&str; 5] = ["primary", "secondary", "bachelor", "master", "phd"];
const NATIONS: [&str; 8] = ["US", "GB", "IN", "GR", "CY", "DE", "CA", "PH"];

fn demographics(rng: &mut ChaCha8Rng) -> Value {
    let mut pick = |xs: &[&'static str]| xs[rng.random_range(0..xs.len())];
    json!({
        "gender": pick(&GENDERS),
        "age_bracket": pick(&AGES),
        "income_bracket": pick(&INCOMES),
        "education_level": pick(&EDUCATION),
        "nationality": pick(&NATIONS),
    })
}

fn judgment(post_id: &str, label: &Label, scheme: &LabelScheme) -> Value {
    if scheme.is_two_stage() && scheme.sub_labels.contains(label) {
        json!({"post_id": post_id, "top_label": INAPPROPRIATE, "sub_labels": [label]})
    } else {
        json!({"post_id": post_id, "top_label": label})
    }
}

/// Drives `round_id` on the service at `base` until it closes.
pub async fn simulate(
    base: &str,
    round_id: &str,
    model_file: &ModelFile,
    seed: u64,
) -> Result<SimulationReport> {
    let client = Client::new(base);
    let view = client.round(round_id).await?;
    let scheme: LabelScheme = serde_json::from_value(view["scheme"].clone())?;
    let mut model =
        AnnotatorModel::new(model_file, &scheme).map_err(|e| UsageError(format!("{e:#}")))?;
    let mut report = SimulationReport {
        round_id: round_id.to_string(),
        seed,
        workers: 0,
        batches: 0,
        judgments: 0,
        round_closed: view["progress"]["state"] == "closed",
        truth: BTreeMap::new(),
    };
    if report.round_closed || view["progress"]["total_posts"] == 0 {
        return Ok(report);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth_rng = ChaCha8Rng::seed_from_u64(seed);
    truth_rng.set_stream(1);
    let mut tokens = Vec::with_capacity(model.workers);
    for _ in 0..model.workers {
        tokens.push(client.register(&demographics(&mut rng)).await?);
    }
    report.workers = tokens.len();

    let mut exhausted = vec![false; tokens.len()];
    let batch_url = client.url(&format!("/api/rounds/{round_id}/batch"));
    let submit_url = client.url(&format!("/api/rounds/{round_id}/judgments"));
    'run: loop {
        for (w, token) in tokens.iter().enumerate() {
            if exhausted[w] || !rng.random_bool(model.judgment_rate) {
                continue;
            }
            let r = client
                .http
                .get(&batch_url)
                .bearer_auth(token)
                .send()
                .await?;
            match r.status() {
                StatusCode::NO_CONTENT => {
                    exhausted[w] = true;
                    continue;
                }
                StatusCode::OK => {}
                StatusCode::CONFLICT => {
                    let body: Value = r.json().await?;
                    if body["code"] == "round_closed" {
                        break 'run;
                    }
                    bail!("batch refused: {}", body["error"]);
                }
                _ => {
                    json_or_error(r, "batch request").await?;
                    unreachable!("non-success status");
                }
            }
            let batch: Value = r.json().await?;
            let posts = batch["posts"].as_array().context("batch without posts")?;
            let mut judgments = Vec::with_capacity(posts.len());
            for p in posts {
                let post_id = p["post_id"].as_str().context("post without id")?;
                let t = model.true_label(post_id, &mut truth_rng);
                let answer = model.answer(&t, &mut rng);
                report.truth.insert(post_id.to_string(), t.to_string());
                judgments.push(judgment(post_id, &answer, &scheme));
            }
            let body = json!({"assignment_id": batch["assignment_id"], "judgments": judgments});
            let r = client
                .http
                .post(&submit_url)
                .bearer_auth(token)
                .json(&body)
                .send()
                .await?;
            let result = json_or_error(r, "submission").await?;
            report.batches += 1;
            report.judgments += result["accepted"].as_u64().unwrap_or(0) as usize;
            if result["round_state"] == "closed" {
                report.round_closed = true;
                break 'run;
            }
        }
        if exhausted.iter().all(|&e| e) {
            break;
        }
    }
    if !report.round_closed {
        report.round_closed = client.round(round_id).await?["progress"]["state"] == "closed";
    }
    Ok(report)
}
