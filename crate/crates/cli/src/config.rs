//! Campaign configuration: one TOML file holding every tunable. Relative
//! paths resolve against the directory containing the file.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crowdlabel_core::annotation::RoundConfig;
use crowdlabel_core::corpus::FilterThresholds;
use crowdlabel_core::sampling::{BoostCriteria, DatasetSpec};
use crowdlabel_core::stats::{ReductionThresholds, Tier};
use crowdlabel_service::{Settings, DEFAULT_SESSION_TTL_SECS};
use serde::Deserialize;

use crate::UsageError;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: PathBuf,
    pub lexicon: PathBuf,
    pub negations: PathBuf,
    #[serde(default)]
    pub dictionaries: Vec<PathBuf>,
}

/// A dataset selected from a closed round's results rather than sampled.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedDataset {
    pub name: String,
    pub from_round: String,
    /// Weakest agreement tier a post may have; posts without a majority
    /// never qualify.
    pub min_tier: Tier,
    /// Keep only posts whose majority label is an inappropriate label.
    #[serde(default = "yes")]
    pub inappropriate_only: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_session_ttl")]
    pub session_ttl_secs: i64,
    /// Bearer token guarding analysis, export and close.
    #[serde(default)]
    pub admin_token: Option<String>,
}

fn default_bind() -> String {
    DEFAULT_BIND.into()
}

fn default_session_ttl() -> i64 {
    DEFAULT_SESSION_TTL_SECS
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: default_bind(),
            session_ttl_secs: default_session_ttl(),
            admin_token: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub data_dir: PathBuf,
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub filter: FilterThresholds,
    #[serde(default)]
    pub boost: BoostCriteria,
    #[serde(default)]
    pub datasets: Vec<DatasetSpec>,
    #[serde(default)]
    pub derived_datasets: Vec<DerivedDataset>,
    #[serde(default)]
    pub rounds: Vec<RoundConfig>,
    #[serde(default)]
    pub analysis: Option<ReductionThresholds>,
    #[serde(default)]
    pub service: ServiceConfig,
    #[serde(skip)]
    pub source: PathBuf,
}

pub enum DatasetEntry<'a> {
    Sampled(&'a DatasetSpec),
    Derived(&'a DerivedDataset),
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: CampaignConfig = toml::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.source = path.to_path_buf();
        config.resolve(base);
        config
            .validate()
            .map_err(|e| UsageError(format!("invalid config {}: {e:#}", path.display())))?;
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        fix(&mut self.corpus.path);
        fix(&mut self.corpus.lexicon);
        fix(&mut self.corpus.negations);
        self.corpus.dictionaries.iter_mut().for_each(fix);
    }

    fn validate(&self) -> Result<()> {
        let c = &self.corpus;
        for p in [&c.path, &c.lexicon, &c.negations]
            .into_iter()
            .chain(&c.dictionaries)
        {
            if !p.is_file() {
                bail!("referenced file {} does not exist", p.display());
            }
        }
        if self.service.session_ttl_secs <= 0 {
            bail!("service.session_ttl_secs must be positive");
        }
        let mut names = HashSet::new();
        for d in &self.datasets {
            d.validate()?;
            if !names.insert(d.name.as_str()) {
                bail!("dataset {} declared twice", d.name);
            }
        }
        let mut round_ids = HashSet::new();
        for r in &self.rounds {
            r.validate()?;
            if !round_ids.insert(r.round_id.as_str()) {
                bail!("round {} declared twice", r.round_id);
            }
        }
        for d in &self.derived_datasets {
            if !names.insert(d.name.as_str()) {
                bail!("dataset {} declared twice", d.name);
            }
            if !round_ids.contains(d.from_round.as_str()) {
                bail!(
                    "dataset {} derives from undeclared round {}",
                    d.name,
                    d.from_round
                );
            }
        }
        for r in &self.rounds {
            if !names.contains(r.dataset.as_str()) {
                bail!("round {} uses undeclared dataset {}", r.round_id, r.dataset);
            }
        }
        Ok(())
    }

    pub fn dataset(&self, name: &str) -> Result<DatasetEntry<'_>> {
        if let Some(d) = self.datasets.iter().find(|d| d.name == name) {
            return Ok(DatasetEntry::Sampled(d));
        }
        if let Some(d) = self.derived_datasets.iter().find(|d| d.name == name) {
            return Ok(DatasetEntry::Derived(d));
        }
        Err(UsageError(format!(
            "dataset {name} is not declared in {}",
            self.source.display()
        ))
        .into())
    }

    pub fn round(&self, round_id: &str) -> Result<&RoundConfig> {
        self.rounds
            .iter()
            .find(|r| r.round_id == round_id)
            .ok_or_else(|| {
                UsageError(format!(
                    "round {round_id} is not declared in {}",
                    self.source.display()
                ))
                .into()
            })
    }

    pub fn settings(&self) -> Settings {
        Settings {
            session_ttl_secs: self.service.session_ttl_secs,
            admin_token: self.service.admin_token.clone(),
            thresholds: self.analysis.unwrap_or_default(),
        }
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.data_dir.join("reports")
    }

    pub fn write_report(&self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let dir = self.reports_dir();
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
