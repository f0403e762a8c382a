use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use cdbench::campaign::{Campaign, Overrides};
use cdbench::predictions::QueryMode;
use cdbench::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cdbench", version, about = "Bootstrap ground truth for causal discovery and calibration scoring of predicted ranges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize datasets and their truth graphs
    Generate(Common),
    /// Bootstrap every (dataset, algorithm) condition
    GroundTruth(Common),
    /// Render every prompt to prompts.jsonl
    Prompts(Common),
    /// Send prompts through the gateway (live, record or replay)
    Query(Common),
    /// Parse externally collected responses
    Ingest(IngestArgs),
    /// Score predictions and write evaluation.json and tables
    Evaluate(Common),
    /// Render plots from evaluation.json
    Report(Common),
    /// Run every phase in order
    All(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Live,
    Record,
    Replay,
}

impl From<Mode> for QueryMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Live => QueryMode::Live,
            Mode::Record => QueryMode::Record,
            Mode::Replay => QueryMode::Replay,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Campaign configuration (TOML)
    #[arg(long, short)]
    config: PathBuf,
    /// Query mode, overriding the config
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Worker threads
    #[arg(long)]
    jobs: Option<usize>,
    /// Global seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    common: Common,
    /// JSON-lines response file, overriding the config
    #[arg(long)]
    responses: Option<PathBuf>,
}

impl Common {
    fn open(&self) -> anyhow::Result<Campaign> {
        let overrides = Overrides {
            mode: self.mode.map(Into::into),
            jobs: self.jobs,
            seed: self.seed,
            out_dir: self.out.clone(),
        };
        Campaign::load(&self.config, &overrides).with_context(|| format!("loading {}", self.config.display()))
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(c) => {
            let records = c.open()?.generate()?;
            for r in records {
                println!("{}: {} nodes, {} edges, {} samples", r.id, r.n_nodes, r.n_edges, r.n_samples);
            }
        }
        Command::GroundTruth(c) => {
            let truths = c.open()?.ground_truth()?;
            let failed: usize = truths.iter().map(|g| g.manifest.failed_runs.len()).sum();
            let runs: usize = truths.iter().map(|g| g.runs).sum();
            println!("{} conditions, {runs} runs, {failed} failed runs", truths.len());
        }
        Command::Prompts(c) => {
            let campaign = c.open()?;
            let rows = campaign.prompts()?;
            println!("{} prompts written to {}", rows.len(), campaign.layout.prompts().display());
        }
        Command::Query(c) => {
            let campaign = c.open()?;
            let out = campaign.query()?;
            report_outcome(&campaign, out.records.len(), out.quarantined.len());
        }
        Command::Ingest(a) => {
            let mut campaign = a.common.open()?;
            if let Some(p) = a.responses {
                campaign.config.query.ingest = Some(std::path::absolute(&p).unwrap_or(p));
            }
            let out = campaign.ingest()?;
            report_outcome(&campaign, out.records.len(), out.quarantined.len());
        }
        Command::Evaluate(c) => {
            let campaign = c.open()?;
            let e = campaign.evaluate()?;
            summarize(&e);
            println!("wrote {}", campaign.layout.evaluation().display());
        }
        Command::Report(c) => {
            let campaign = c.open()?;
            campaign.report()?;
            println!("plots written to {}", campaign.layout.plots_dir().display());
        }
        Command::All(c) => {
            let campaign = c.open()?;
            let e = campaign.run_all()?;
            summarize(&e);
            println!("outputs in {}", campaign.layout.root.display());
        }
    }
    Ok(())
}

fn report_outcome(campaign: &Campaign, parsed: usize, quarantined: usize) {
    println!("{parsed} responses parsed into {}", campaign.layout.predictions().display());
    if quarantined > 0 {
        println!("{quarantined} quarantined, see {}", campaign.layout.quarantine().display());
    }
}

fn summarize(e: &cdbench::campaign::Evaluation) {
    if let Some(r) = &e.coverage {
        for m in &r.by_model {
            println!("{:<24} {:>3}/{:<4} {:6.1}%", m.key, m.covered, m.total, m.coverage);
        }
    }
    for b in &e.baselines {
        println!("{:<24} {:>3}/{:<4} {:6.1}%", b.key, b.covered, b.total, b.coverage);
    }
    for n in &e.notes {
        println!("note: {n}");
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if let Some(Error::Gaps { gaps }) = err.downcast_ref::<Error>() {
                for g in gaps {
                    eprintln!("  missing: {g}");
                }
            }
            ExitCode::FAILURE
        }
    }
}
