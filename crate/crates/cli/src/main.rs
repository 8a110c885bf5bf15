//! `santalo`: scenario runner for the inequality laboratory.
//!
//! Exit codes: 0 when every row passes, 1 on an assertion failure (failing rows
//! go to stderr), 2 on configuration or I/O errors.

mod config;
mod report;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context as _;
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use santalo_core::catalog::{listing, BodyCatalog};

use config::{Config, ConfigError};
use report::{Environment, Metadata, Report};

const DEFAULT_OUT: &str = "santalo-out";

#[derive(Parser)]
#[command(name = "santalo", version, about = "Verify functional Santalo-type inequalities on catalog potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print resolvable potential ids, bodies and (with --config) scenario ids.
    List {
        /// JSON body corpus: a list of {"name", "vertices"} objects.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// One `kind<TAB>id` line per entry, no headings.
        #[arg(long)]
        machine: bool,
    },
    /// Run every scenario of a TOML config and write report.json, report.csv and plot data.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to $SANTALO_OUT, then the config's `out`, then ./santalo-out.
        #[arg(long, env = "SANTALO_OUT")]
        out: Option<PathBuf>,
        /// Overrides every scenario and rule seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        workers: Option<usize>,
        /// Nothing on stdout; diagnostics and failing rows still go to stderr.
        #[arg(long)]
        machine: bool,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

enum Failure {
    Config(ConfigError),
    Other(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn list(corpus: Option<&Path>, config: Option<&Path>, machine: bool) -> Result<ExitCode, Failure> {
    let mut bodies = BodyCatalog::builtin();
    if let Some(c) = corpus {
        bodies.load_corpus(c).map_err(|e| ConfigError { path: c.display().to_string(), line: None, message: e.to_string() })?;
    }
    let scenarios: Vec<String> = match config {
        Some(p) => Config::load(p, corpus, None)?.file.scenario.iter().map(|s| s.id.clone()).collect(),
        None => Vec::new(),
    };
    let ids = listing(&bodies);
    let (body_ids, potential_ids): (Vec<&String>, Vec<&String>) = ids.iter().partition(|s| s.starts_with("body:"));
    let sections = [
        ("potential", potential_ids.into_iter().cloned().collect::<Vec<_>>()),
        ("body", body_ids.into_iter().map(|b| b.trim_start_matches("body:").to_string()).collect()),
        ("scenario", scenarios),
    ];
    for (kind, entries) in sections {
        if machine {
            for e in entries {
                println!("{kind}\t{e}");
            }
        } else if !entries.is_empty() {
            println!("{kind}s:");
            for e in entries {
                println!("  {e}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

struct RunArgs {
    config: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
    machine: bool,
    corpus: Option<PathBuf>,
}

fn run(a: RunArgs) -> Result<ExitCode, Failure> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let cfg = Config::load(&a.config, a.corpus.as_deref(), a.seed)?;
    if let Some(w) = a.workers {
        if w == 0 {
            return Err(ConfigError { path: "--workers".into(), line: None, message: "must be at least 1".into() }.into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global().context("configuring the worker pool")?;
    }
    let out_dir = a
        .out
        .or_else(|| cfg.file.out.as_ref().map(|o| cfg.path.parent().unwrap_or(Path::new(".")).join(o)))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    // Scenarios run concurrently; collection keeps config order for the single writer below.
    let outcomes: Vec<run::Outcome> = cfg.file.scenario.par_iter().map(|s| run::run_scenario(s, &cfg, a.seed)).collect();
    let rows: Vec<run::Row> = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    let artifacts: Vec<run::Artifact> = outcomes.into_iter().flat_map(|o| o.artifacts).collect();
    let pass = rows.iter().all(|r| r.pass);

    let report = Report {
        metadata: Metadata {
            environment: Environment {
                version: env!("CARGO_PKG_VERSION"),
                generator: santalo_core::quad::mc::GENERATOR,
                workers: rayon::current_num_threads(),
                seed_override: a.seed,
                config: a.config.display().to_string(),
            },
            started_unix,
            total_seconds: started.elapsed().as_secs_f64(),
        },
        pass,
        rows: &rows,
        artifacts: artifacts.iter().map(|x| x.name.as_str()).collect(),
    };
    report::write_all(&out_dir, &report, &artifacts).with_context(|| format!("writing reports to {}", out_dir.display()))?;

    if !a.machine {
        for r in &rows {
            let verdict = if r.pass { "PASS" } else { "FAIL" };
            let c = r.c.map(|c| format!(" c={c}")).unwrap_or_default();
            let note = if r.note.is_empty() { String::new() } else { format!(" ({})", r.note) };
            println!("[{verdict}] {} {}{c}: {:.9} ± {:.2e}{note}", r.scenario, r.subject, r.value, r.se);
        }
        println!("{} rows, reports in {}", rows.len(), out_dir.display());
    }
    if pass {
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!("assertion failure:\n{}", report::CSV_HEADER);
    for r in rows.iter().filter(|r| !r.pass) {
        eprintln!("{}", report::csv_line(r));
        if !r.note.is_empty() {
            eprintln!("  {}", r.note);
        }
    }
    Ok(ExitCode::from(1))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List { corpus, config, machine } => list(corpus.as_deref(), config.as_deref(), machine),
        Command::Run { config, out, seed, workers, machine, corpus } => {
            run(RunArgs { config, out, seed, workers, machine, corpus })
        }
    };
    match result {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
