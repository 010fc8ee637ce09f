//! Offline commands working directly on the data directory.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use crowdlabel_core::annotation::{RoundProgress, RoundState};
use crowdlabel_core::corpus::{
    enrich, filter_pipeline, parse_corpus, CleanPost, OffensiveDictionary, RejectionReason,
    SentimentLexicon,
};
use crowdlabel_core::sampling::{boosted_filter, compose_dataset, DatasetSpec, SampleOrigin};
use crowdlabel_core::stats::{agreement_tier, tally_posts, AnalysisReport};
use crowdlabel_service::{DataDirLock, ExportVariant, Platform, SystemClock};
use serde::Serialize;
use serde_json::json;

use crate::config::{CampaignConfig, DatasetEntry, DerivedDataset};

/// An opened data directory, held exclusively for the lifetime of the value.
pub struct Workspace {
    pub platform: Platform,
    lock: DataDirLock,
}

impl Workspace {
    pub fn open(cfg: &CampaignConfig) -> Result<Self> {
        std::fs::create_dir_all(&cfg.data_dir)
            .with_context(|| format!("cannot create data dir {}", cfg.data_dir.display()))?;
        let lock = DataDirLock::acquire(&cfg.data_dir)?;
        let platform = Platform::open_dir(&cfg.data_dir, Arc::new(SystemClock), cfg.settings())?;
        Ok(Workspace { platform, lock })
    }

    pub fn into_parts(self) -> (Platform, DataDirLock) {
        (self.platform, self.lock)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub corpus: PathBuf,
    pub parsed: usize,
    pub skipped_lines: usize,
    pub accepted: usize,
    pub rejected: BTreeMap<String, usize>,
    pub boosted_eligible: usize,
}

pub fn ingest(cfg: &CampaignConfig) -> Result<IngestSummary> {
    let c = &cfg.corpus;
    let lexicon = SentimentLexicon::load(&c.lexicon, &c.negations)?;
    let dicts = c
        .dictionaries
        .iter()
        .map(|p| OffensiveDictionary::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let parsed = parse_corpus(&c.path)?;
    let n = parsed.posts.len();
    let outcome = filter_pipeline(enrich(parsed.posts, &lexicon, &dicts), &cfg.filter);
    let summary = IngestSummary {
        corpus: c.path.clone(),
        parsed: n,
        skipped_lines: parsed.skipped,
        accepted: outcome.accepted.len(),
        rejected: RejectionReason::ALL
            .iter()
            .map(|r| (r.as_str().to_string(), outcome.count(*r)))
            .collect(),
        boosted_eligible: boosted_filter(&outcome.accepted, &cfg.boost).len(),
    };
    let mut ws = Workspace::open(cfg)?;
    let mut all = outcome.accepted;
    all.extend(outcome.rejected);
    ws.platform.import_posts(&all)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub dataset: String,
    pub size: usize,
    pub boosted: usize,
    pub random: usize,
    pub export: PathBuf,
}

#[derive(Serialize)]
struct DatasetRow<'a> {
    position: usize,
    post_id: &'a str,
    sample_origin: &'static str,
    polarity: f64,
    offensive_term_count: u32,
    text: &'a str,
}

pub fn dataset_export_name(name: &str) -> String {
    format!("dataset-{name}.csv")
}

pub fn sample(cfg: &CampaignConfig, name: &str) -> Result<SampleSummary> {
    let entry = cfg.dataset(name)?;
    let mut ws = Workspace::open(cfg)?;
    let p = &mut ws.platform;
    if p.store().has_dataset(name)? {
        bail!("dataset {name} already exists; sampling refuses to overwrite it");
    }
    let posts = p.store().accepted_posts()?;
    if posts.is_empty() {
        bail!(
            "no accepted posts in {}; run ingest first",
            cfg.data_dir.display()
        );
    }
    let (members, description) = match entry {
        DatasetEntry::Sampled(spec) => (
            sampled_members(p, spec, &posts, cfg)?,
            json!({"kind": "sampled", "spec": spec}),
        ),
        DatasetEntry::Derived(d) => (
            derived_members(p, d)?,
            json!({"kind": "derived", "spec": {
                "from_round": d.from_round,
                "min_tier": d.min_tier,
                "inappropriate_only": d.inappropriate_only,
            }}),
        ),
    };

    let by_id: HashMap<&str, &CleanPost> = posts.iter().map(|p| (p.id(), p)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for (i, (id, origin)) in members.iter().enumerate() {
        let post = by_id[id.as_str()];
        w.serialize(DatasetRow {
            position: i,
            post_id: id,
            sample_origin: origin.code(),
            polarity: post.metadata.polarity,
            offensive_term_count: post.metadata.offensive_term_count,
            text: &post.post.text,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;

    p.add_dataset(name, &description, &members)?;
    let export = cfg.write_report(&dataset_export_name(name), &bytes)?;
    let boosted = members
        .iter()
        .filter(|(_, o)| *o == SampleOrigin::BoostedSample)
        .count();
    Ok(SampleSummary {
        dataset: name.to_string(),
        size: members.len(),
        boosted,
        random: members.len() - boosted,
        export,
    })
}

/// Sampled datasets never share posts with any dataset already stored.
fn sampled_members(
    p: &Platform,
    spec: &DatasetSpec,
    posts: &[CleanPost],
    cfg: &CampaignConfig,
) -> Result<Vec<(String, SampleOrigin)>> {
    let mut exclude = HashSet::new();
    for other in p.store().dataset_names()? {
        exclude.extend(p.store().dataset(&other)?.into_iter().map(|(id, _)| id));
    }
    let eligible: Vec<CleanPost> = boosted_filter(posts, &cfg.boost)
        .into_iter()
        .cloned()
        .collect();
    let dataset = compose_dataset(spec, &eligible, posts, &exclude)?;
    Ok(dataset
        .posts
        .into_iter()
        .map(|s| (s.post.post.id, s.origin))
        .collect())
}

fn derived_members(p: &Platform, d: &DerivedDataset) -> Result<Vec<(String, SampleOrigin)>> {
    let round = p.round(&d.from_round)?;
    if round.state() != RoundState::Closed {
        bail!(
            "round {} is still open; close it before deriving {}",
            d.from_round,
            d.name
        );
    }
    let origins = p.origins(&round.config().dataset)?;
    let mut members = Vec::new();
    for tally in tally_posts(round.posts(), round.accepted_judgments()) {
        let Ok(result) = agreement_tier(&tally) else {
            continue;
        };
        let (Some(label), Some(tier)) = (result.majority_label, result.tier) else {
            continue;
        };
        if tier < d.min_tier || (d.inappropriate_only && label.is_benign()) {
            continue;
        }
        let origin = origins[&tally.post_id];
        members.push((tally.post_id, origin));
    }
    Ok(members)
}

pub fn round_create(cfg: &CampaignConfig, round_id: &str) -> Result<RoundProgress> {
    let config = cfg.round(round_id)?.clone();
    let mut ws = Workspace::open(cfg)?;
    Ok(ws.platform.create_round(config)?.progress())
}

pub fn round_close(cfg: &CampaignConfig, round_id: &str) -> Result<RoundProgress> {
    let mut ws = Workspace::open(cfg)?;
    Ok(ws.platform.close_round(round_id)?)
}

pub fn round_status(cfg: &CampaignConfig, round_id: Option<&str>) -> Result<Vec<RoundProgress>> {
    let mut ws = Workspace::open(cfg)?;
    match round_id {
        Some(id) => Ok(vec![ws.platform.view(id)?.progress]),
        None => {
            let ids: Vec<String> = ws.platform.rounds().map(|r| r.id().to_string()).collect();
            ids.iter()
                .map(|id| Ok(ws.platform.view(id)?.progress))
                .collect()
        }
    }
}

pub fn analyze(cfg: &CampaignConfig, round_id: &str) -> Result<Arc<AnalysisReport>> {
    let mut ws = Workspace::open(cfg)?;
    Ok(ws.platform.analyze(round_id)?)
}

pub fn export(
    cfg: &CampaignConfig,
    round_id: &str,
    variant: ExportVariant,
    path: &Path,
) -> Result<usize> {
    let ws = Workspace::open(cfg)?;
    let bytes = ws.platform.export(round_id, variant)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    std::fs::write(path, &bytes).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(bytes
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        .saturating_sub(1))
}
