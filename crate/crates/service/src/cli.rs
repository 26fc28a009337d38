use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{NaiveDate, SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use epiportrait_core::geometry::CountMode;
use epiportrait_core::ingest::{load_snapshot, FixtureFiles, FixtureOptions, LoadError, SourcePaths};
use epiportrait_core::json;
use epiportrait_core::temporal::Granularity;
use epiportrait_core::StudyWindow;
use serde_json::json;

use crate::config::BuildConfig;
use crate::engine::{Engine, Provenance, SnapshotFile};
use crate::export::{export, ExportKind, ExportRequest};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INGEST: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "epiportrait", version, about = "Community epidemic portraits: build, export and serve snapshots")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset and a matching config file.
    Fixture(FixtureArgs),
    /// Ingest the configured files into a snapshot and print a summary.
    Build(BuildArgs),
    /// Write portraits or tables from a snapshot.
    Export(ExportArgs),
    /// Serve a snapshot over HTTP. SIGHUP reloads it from disk.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub communities: usize,
    #[arg(long, default_value_t = 140)]
    pub days: usize,
    #[arg(long)]
    pub case_rows: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub corrupt_dates: usize,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured window start.
    #[arg(long)]
    pub window_start: Option<NaiveDate>,
    #[arg(long)]
    pub window_end: Option<NaiveDate>,
    /// Overrides the per-capita population unit.
    #[arg(long)]
    pub per_capita_divisor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long, value_enum)]
    pub what: ExportKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "weekly")]
    pub granularity: Granularity,
    #[arg(long, default_value = "actual")]
    pub mode: CountMode,
    /// First span index (inclusive).
    #[arg(long)]
    pub from: Option<usize>,
    /// Last span index (inclusive).
    #[arg(long)]
    pub to: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long, env = "EPIPORTRAIT_BIND", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
}

/// Runs a command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Fixture(a) => fixture(&a),
        Command::Build(a) => return build(&a),
        Command::Export(a) => export_cmd(&a),
        Command::Serve(a) => serve(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            report(&json!({ "error": "failed", "message": format!("{e:#}") }));
            EXIT_FAILURE
        }
    }
}

fn report(v: &serde_json::Value) {
    let mut err = std::io::stderr().lock();
    let _ = err.write_all(&json::to_vec_pretty(v).unwrap_or_default());
}

fn fixture(a: &FixtureArgs) -> anyhow::Result<()> {
    let mut opts = FixtureOptions::new(a.seed, a.communities, a.days);
    opts.case_rows = a.case_rows;
    opts.corrupt_dates = a.corrupt_dates;
    let files = FixtureFiles::generate(&opts)?;
    files.write_to(&a.out)?;
    let config = json!({
        "window": opts.window(),
        "sources": SourcePaths::default_names(),
    });
    let path = a.out.join("config.json");
    fs::write(&path, json::to_vec_pretty(&config)?).with_context(|| format!("writing {}", path.display()))?;
    println!("{}", path.display());
    Ok(())
}

pub fn build(a: &BuildArgs) -> i32 {
    let cfg = match load_config(a) {
        Ok(c) => c,
        Err(e) => {
            report(&json!({ "error": "config", "file": a.config, "message": format!("{e:#}") }));
            return EXIT_FAILURE;
        }
    };
    let dataset = match load_snapshot(&cfg.sources, cfg.window, &cfg.join) {
        Ok(d) => d,
        Err(e) => {
            report(&ingest_report(&e));
            return EXIT_INGEST;
        }
    };
    let provenance = Provenance {
        built_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        sources: cfg.sources.clone(),
    };
    let result = (|| {
        let engine = Engine::new(SnapshotFile::new(cfg.settings, dataset, Some(provenance)))?;
        write_file(&a.out, &engine.file().to_bytes())?;
        let mut out = std::io::stdout().lock();
        out.write_all(&json::to_vec_pretty(&engine.summary())?)?;
        anyhow::Ok(())
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            report(&json!({ "error": "failed", "message": format!("{e:#}") }));
            EXIT_FAILURE
        }
    }
}

fn load_config(a: &BuildArgs) -> anyhow::Result<BuildConfig> {
    let mut cfg = BuildConfig::load(&a.config)?;
    let start = a.window_start.unwrap_or(cfg.window.start);
    let end = a.window_end.unwrap_or(cfg.window.end);
    cfg.window = StudyWindow::new(start, end).context("window ends before it starts")?;
    if let Some(d) = a.per_capita_divisor {
        cfg.settings.per_capita_divisor = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Machine-readable description of a fatal ingest error.
pub fn ingest_report(e: &LoadError) -> serde_json::Value {
    use epiportrait_core::ingest::IngestError as E;
    let feature_index = match &e.error {
        E::BoundaryFeature { index, .. } | E::DuplicateBoundary { index, .. } => json!(index),
        E::BoundaryMissingCode { indices } => json!(indices),
        _ => serde_json::Value::Null,
    };
    json!({
        "error": "ingest",
        "file": e.file,
        "feature_index": feature_index,
        "message": e.to_string(),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    // write then rename so a serving process never reads a torn file
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

fn export_cmd(a: &ExportArgs) -> anyhow::Result<()> {
    let engine = Engine::open(&a.snapshot)?;
    let window = engine.window(a.granularity, a.from, a.to)?;
    let req = ExportRequest {
        granularity: a.granularity,
        mode: a.mode,
        window,
    };
    for path in export(&engine, a.what, &req, &a.out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn serve(a: &ServeArgs) -> anyhow::Result<()> {
    let engine = Engine::open(&a.snapshot)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(crate::server::serve(engine, a.snapshot.clone(), a.bind))
}
