//! `crowdlabel` operator commands: corpus ingestion, dataset sampling, round
//! lifecycle, the annotation service, simulation, analysis and export.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! data errors.

pub mod commands;
pub mod config;
pub mod simulate;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use crowdlabel_core::annotation::RoundProgress;
use crowdlabel_core::stats::AnalysisReport;
use crowdlabel_service::ExportVariant;
use tokio::net::TcpListener;

use crate::commands::Workspace;
use crate::config::CampaignConfig;
use crate::simulate::{ModelFile, SimulationReport};

/// Wrong invocation or configuration, as opposed to bad data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<UsageError>()) {
        1
    } else {
        2
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "crowdlabel",
    version,
    about = "Crowdsourced abusive-language annotation campaigns"
)]
pub struct Cli {
    /// Campaign configuration file.
    #[arg(short, long, global = true, default_value = "campaign.toml")]
    pub config: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, enrich and filter the corpus into the data directory.
    Ingest,
    /// Build a dataset declared in the configuration.
    Sample { dataset: String },
    /// Create, close or inspect rounds.
    Round {
        #[command(subcommand)]
        action: RoundAction,
    },
    /// Run the annotation service until interrupted.
    Serve {
        /// Overrides `service.bind`.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Drive a round to completion with synthetic annotators.
    Simulate {
        round_id: String,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Base URL of a running service; without it an in-process service
        /// is started on the data directory.
        #[arg(long)]
        server: Option<String>,
    },
    /// Compute the agreement and label-reduction report of a round.
    Analyze { round_id: String },
    /// Write the CSV export of a closed round.
    Export {
        round_id: String,
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Variant::Majority)]
        variant: Variant,
    },
}

#[derive(Debug, Subcommand)]
pub enum RoundAction {
    Create {
        round_id: String,
    },
    Close {
        round_id: String,
    },
    /// Progress of one round, or of every round.
    Status {
        round_id: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Majority,
    Judgments,
}

impl From<Variant> for ExportVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Majority => ExportVariant::Majority,
            Variant::Judgments => ExportVariant::Judgments,
        }
    }
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn execute(cli: Cli) -> Result<()> {
    let cfg = CampaignConfig::load(&cli.config)?;
    match cli.command {
        Command::Ingest => {
            let s = commands::ingest(&cfg)?;
            println!(
                "parsed {} posts ({} malformed lines skipped)",
                s.parsed, s.skipped_lines
            );
            println!("accepted {}", s.accepted);
            for (reason, n) in &s.rejected {
                println!("rejected {reason}: {n}");
            }
            println!("boosted-eligible {}", s.boosted_eligible);
            let path = cfg.write_report("ingest.json", &to_json(&s)?)?;
            println!("report: {}", path.display());
        }
        Command::Sample { dataset } => {
            let s = commands::sample(&cfg, &dataset)?;
            println!(
                "dataset {}: {} posts ({} BS, {} RS)",
                s.dataset, s.size, s.boosted, s.random
            );
            cfg.write_report(&format!("sample-{dataset}.json"), &to_json(&s)?)?;
            println!("export: {}", s.export.display());
        }
        Command::Round { action } => {
            let (id, progress) = match action {
                RoundAction::Create { round_id } => {
                    let p = commands::round_create(&cfg, &round_id)?;
                    (Some(round_id), vec![p])
                }
                RoundAction::Close { round_id } => {
                    let p = commands::round_close(&cfg, &round_id)?;
                    (Some(round_id), vec![p])
                }
                RoundAction::Status { round_id } => {
                    let p = commands::round_status(&cfg, round_id.as_deref())?;
                    (round_id, p)
                }
            };
            for p in &progress {
                print_progress(p);
            }
            let name = match id {
                Some(id) => format!("round-{id}.json"),
                None => "rounds.json".into(),
            };
            cfg.write_report(&name, &to_json(&progress)?)?;
        }
        Command::Serve { bind } => {
            let bind = bind.unwrap_or_else(|| cfg.service.bind.clone());
            let ws = Workspace::open(&cfg)?;
            tokio::runtime::Runtime::new()?.block_on(serve(ws, &bind))?;
        }
        Command::Simulate {
            round_id,
            model,
            seed,
            server,
        } => {
            let model = ModelFile::load(&model)?;
            let rt = tokio::runtime::Runtime::new()?;
            let report = match server {
                Some(base) => rt.block_on(simulate::simulate(&base, &round_id, &model, seed))?,
                None => {
                    let ws = Workspace::open(&cfg)?;
                    rt.block_on(simulate_in_process(ws, &round_id, &model, seed))?
                }
            };
            report_simulation(&cfg, &report)?;
        }
        Command::Analyze { round_id } => {
            let report = commands::analyze(&cfg, &round_id)?;
            let path =
                cfg.write_report(&format!("analysis-{round_id}.json"), &to_json(&*report)?)?;
            print_analysis(&report);
            println!("report: {}", path.display());
            let undefined: Vec<_> = report.pairs.iter().filter(|p| p.stats.is_none()).collect();
            for p in &undefined {
                eprintln!(
                    "warning: correlation undefined for {}/{}: {}",
                    p.label_a,
                    p.label_b,
                    p.undefined.as_deref().unwrap_or("")
                );
            }
            if !report.pairs.is_empty() && undefined.len() == report.pairs.len() {
                bail!("correlations are undefined for every label pair of round {round_id}");
            }
        }
        Command::Export {
            round_id,
            path,
            variant,
        } => {
            let rows = commands::export(&cfg, &round_id, variant.into(), &path)?;
            println!("wrote {rows} rows to {}", path.display());
        }
    }
    Ok(())
}

async fn serve(ws: Workspace, bind: &str) -> Result<()> {
    let (platform, lock) = ws.into_parts();
    let listener = TcpListener::bind(bind)
        .await
        .with_context(|| format!("cannot bind {bind}"))?;
    println!("listening on http://{}", listener.local_addr()?);
    let state = crowdlabel_service::shared(platform);
    crowdlabel_service::serve(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    drop(lock);
    Ok(())
}

/// Runs the simulator against a private service bound to a loopback port.
pub async fn simulate_in_process(
    ws: Workspace,
    round_id: &str,
    model: &ModelFile,
    seed: u64,
) -> Result<SimulationReport> {
    let (platform, lock) = ws.into_parts();
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let state = crowdlabel_service::shared(platform);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(crowdlabel_service::serve(listener, state, async {
        let _ = stopped.await;
    }));
    let report = simulate::simulate(&base, round_id, model, seed).await;
    let _ = stop.send(());
    server.await??;
    drop(lock);
    report
}

fn report_simulation(cfg: &CampaignConfig, report: &SimulationReport) -> Result<()> {
    let id = &report.round_id;
    cfg.write_report(&format!("simulate-{id}.json"), &to_json(report)?)?;
    let truth = cfg.write_report(&format!("simulate-{id}-truth.csv"), &report.truth_csv()?)?;
    println!(
        "round {id}: {} workers submitted {} batches, {} judgments",
        report.workers, report.batches, report.judgments
    );
    println!("true labels: {}", truth.display());
    if report.workers > 0 && !report.round_closed {
        bail!("simulated workers ran out of posts before round {id} closed");
    }
    println!(
        "round {id} is {}",
        if report.round_closed {
            "closed"
        } else {
            "open"
        }
    );
    Ok(())
}

fn print_progress(p: &RoundProgress) {
    println!(
        "{}: {:?}, {}/{} posts done, {} judgments ({} quarantined), {} live reservations",
        p.round_id,
        p.state,
        p.posts_done,
        p.total_posts,
        p.accepted_judgments,
        p.quarantined_judgments,
        p.live_reservations
    );
}

fn print_analysis(r: &AnalysisReport) {
    println!(
        "round {} (scheme {}): {} posts, {} judgments",
        r.round_id, r.scheme, r.posts, r.judgments
    );
    let t = &r.tiers;
    println!(
        "tiers: overwhelming {} strong {} simple {} no-majority {} unjudged {}",
        t.overwhelming, t.strong, t.simple, t.no_majority, t.unjudged
    );
    println!(
        "{:<14} {:<14} {:>7} {:>9} {:>7} {:>9} {:>7} {:>9} {:>7}",
        "label", "label", "pcc", "p", "scc", "p", "ktcc", "p", "cos"
    );
    for p in &r.pairs {
        match &p.stats {
            Some(s) => println!(
                "{:<14} {:<14} {:>7.3} {:>9.2e} {:>7.3} {:>9.2e} {:>7.3} {:>9.2e} {:>7.3}",
                p.label_a.as_str(),
                p.label_b.as_str(),
                s.pcc,
                s.p_pcc,
                s.scc,
                s.p_scc,
                s.ktcc,
                s.p_ktcc,
                s.cosine
            ),
            None => println!(
                "{:<14} {:<14} undefined",
                p.label_a.as_str(),
                p.label_b.as_str()
            ),
        }
    }
    for m in &r.recommendation.merges {
        let labels: Vec<&str> = m.labels.iter().map(|l| l.as_str()).collect();
        println!("merge {} -> {}", labels.join(", "), m.representative);
    }
    for e in &r.recommendation.eliminations {
        println!(
            "eliminate {} (usage {:.2}%)",
            e.label,
            100.0 * e.usage_share
        );
    }
    if r.recommendation.is_empty() {
        println!("no reduction recommended");
    }
}
