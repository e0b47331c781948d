//! `contbench`: run benchmark suites, upload and compare results, detect
//! regressions and serve the HTTP API.

mod client;
mod context;
mod output;
mod suite;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use contbench::detector::{compare_runs, EventKind};
use contbench::model::{decode_results_file, encode_lines, results_to_points, RunContext};
use contbench::store::Store;
use contbench::{BenchmarkResult, RegressionEvent};
use contbench_api::{detect_stored, parse_alerts, AppState, Catalog};
use regex::Regex;

use client::Client;
use output::Format;

/// Exit status for a completed check that found a regression or an errored
/// benchmark.
const FOUND: u8 = 1;
/// Exit status for usage, I/O and protocol errors.
const FAILED: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "contbench",
    version,
    about = "Continuous benchmarking pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run a benchmark suite and write or upload its results.
    Run(RunArgs),
    /// List the benchmark instances of a suite.
    List(ListArgs),
    /// Compare two results files; exits 1 on any regression.
    Compare(CompareArgs),
    /// Run regression detection over stored data; exits 1 on any
    /// unsuppressed regression.
    Detect(DetectArgs),
    /// Serve the HTTP API over a data directory.
    Serve(ServeArgs),
    /// Query a running service.
    Query(QueryArgs),
}

fn parse_tag(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((k.to_owned(), v.to_owned())),
        _ => Err(format!("`{s}` is not key=value")),
    }
}

fn parse_repetitions(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err("must be an integer of at least 1".to_owned()),
    }
}

fn parse_min_time(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(t) if t > 0.0 && t.is_finite() => Ok(t),
        _ => Err("must be a positive number of seconds".to_owned()),
    }
}

#[derive(Debug, Args)]
struct SuiteSel {
    /// Suite executable; defaults to contbench-demo next to this binary.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Regular expression over full instance names.
    #[arg(long)]
    filter: Option<String>,
}

impl SuiteSel {
    fn path(&self) -> Result<PathBuf> {
        match &self.suite {
            Some(p) => Ok(p.clone()),
            None => suite::default_suite(),
        }
    }

    fn filter(&self) -> Result<Option<&str>> {
        if let Some(f) = &self.filter {
            Regex::new(f).with_context(|| format!("invalid --filter `{f}`"))?;
        }
        Ok(self.filter.as_deref())
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    sel: SuiteSel,
    #[arg(long, value_parser = parse_repetitions)]
    repetitions: Option<usize>,
    /// Minimum measurement time per round, in seconds.
    #[arg(long = "min-time", value_parser = parse_min_time)]
    min_time: Option<f64>,
    #[arg(long, value_enum, default_value = "console")]
    format: Format,
    /// Write the rendered results here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Service base URL to upload points to.
    #[arg(long, env = "CONTBENCH_UPLOAD_URL")]
    upload: Option<String>,
    #[arg(long, env = "CONTBENCH_TOKEN", hide_env_values = true)]
    token: Option<String>,
    /// Context tag; machine, commit, branch, compiler and build_type
    /// override the detected values. Repeatable.
    #[arg(long = "tag", value_parser = parse_tag)]
    tags: Vec<(String, String)>,
}

#[derive(Debug, Args)]
struct ListArgs {
    #[command(flatten)]
    sel: SuiteSel,
}

#[derive(Debug, Args)]
struct CompareArgs {
    old: PathBuf,
    new: PathBuf,
    /// Minimum relative change reported as a regression or improvement.
    #[arg(long, default_value_t = 0.10)]
    threshold: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Service base URL.
    #[arg(
        long,
        conflicts_with = "data_dir",
        required_unless_present = "data_dir"
    )]
    url: Option<String>,
    /// Data directory to read directly.
    #[arg(long = "data-dir")]
    data_dir: Option<PathBuf>,
    #[arg(long, env = "CONTBENCH_TOKEN", hide_env_values = true)]
    token: Option<String>,
    #[arg(long, default_value = "benchmark")]
    measurement: String,
    /// Series filter; repeatable.
    #[arg(long = "tag", value_parser = parse_tag)]
    tags: Vec<(String, String)>,
    /// Comma-separated fields.
    #[arg(long)]
    field: Option<String>,
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long = "min-rel-change")]
    min_rel_change: Option<f64>,
    #[arg(long = "noise-factor")]
    noise_factor: Option<f64>,
    /// Also print suppressed events.
    #[arg(long = "show-suppressed")]
    show_suppressed: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long = "data-dir", default_value = "contbench-data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8086")]
    listen: SocketAddr,
    /// Require this bearer token on API requests.
    #[arg(long, env = "CONTBENCH_TOKEN", hide_env_values = true)]
    token: Option<String>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    url: String,
    #[arg(long, env = "CONTBENCH_TOKEN", hide_env_values = true)]
    token: Option<String>,
    #[arg(long, default_value = "benchmark")]
    measurement: String,
    #[arg(long = "tag", value_parser = parse_tag)]
    tags: Vec<(String, String)>,
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    #[arg(long = "group-by")]
    group_by: Option<String>,
    #[arg(long)]
    aggregate: Option<String>,
    #[arg(long)]
    bucket: Option<String>,
    #[arg(long)]
    field: Option<String>,
    /// Print the raw JSON document.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Cmd::Run(a) => cmd_run(a),
        Cmd::List(a) => cmd_list(a),
        Cmd::Compare(a) => cmd_compare(a),
        Cmd::Detect(a) => cmd_detect(a),
        Cmd::Serve(a) => cmd_serve(a),
        Cmd::Query(a) => cmd_query(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(FAILED)
        }
    }
}

fn cmd_list(a: ListArgs) -> Result<ExitCode> {
    for name in suite::list(&a.sel.path()?, a.sel.filter()?)? {
        println!("{name}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let suite_path = a.sel.path()?;
    let filter = a.sel.filter()?;
    let mut ctx = context::resolve(&a.tags, RunContext::now_ns())?;

    let names = suite::list(&suite_path, filter)?;
    if names.is_empty() {
        bail!("no benchmark matches --filter `{}`", filter.unwrap_or(""));
    }
    let run = suite::run(&suite_path, filter, a.repetitions, a.min_time)?;
    context::complete(&mut ctx, &run.compiler, &run.build_type);
    ctx.validate().context("run context")?;
    let results = run.results;

    let rendered = output::render(a.format, &results, &ctx)?;
    match &a.out {
        Some(path) => {
            fs::write(path, &rendered)
                .with_context(|| format!("cannot write {}", path.display()))?;
            if a.format != Format::Console {
                print!("{}", output::render(Format::Console, &results, &ctx)?);
            }
        }
        None => print!("{rendered}"),
    }

    if let Some(url) = &a.upload {
        upload(url, a.token.clone(), &results, &ctx)?;
    }
    let errored: Vec<&str> = results
        .iter()
        .filter(|r| r.is_error())
        .map(|r| r.name.as_str())
        .collect();
    if !errored.is_empty() {
        eprintln!("errored benchmarks: {}", errored.join(", "));
        return Ok(ExitCode::from(FOUND));
    }
    Ok(ExitCode::SUCCESS)
}

fn upload(
    url: &str,
    token: Option<String>,
    results: &[BenchmarkResult],
    ctx: &RunContext,
) -> Result<()> {
    let points = results_to_points(results, ctx);
    if points.is_empty() {
        eprintln!("nothing to upload");
        return Ok(());
    }
    let reply = Client::new(url, token)
        .post_text("/api/v1/write", &encode_lines(&points))
        .context("upload failed")?;
    let accepted = reply["accepted"].as_u64().unwrap_or(0);
    let rejected = reply["rejected"].as_array().map(Vec::len).unwrap_or(0);
    if rejected > 0 || accepted != points.len() as u64 {
        bail!(
            "upload: {accepted} of {} points accepted, rejections: {}",
            points.len(),
            reply["rejected"]
        );
    }
    eprintln!("uploaded {accepted} points to {url}");
    Ok(())
}

fn read_results(path: &Path) -> Result<Vec<BenchmarkResult>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let (results, _) =
        decode_results_file(&text).with_context(|| format!("cannot decode {}", path.display()))?;
    Ok(results)
}

fn cmd_compare(a: CompareArgs) -> Result<ExitCode> {
    if !(a.threshold > 0.0 && a.threshold.is_finite()) {
        bail!("--threshold must be positive");
    }
    let old = read_results(&a.old)?;
    let new = read_results(&a.new)?;
    let report = compare_runs(&old, &new, a.threshold);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.render_console());
    }
    Ok(if report.has_regression() {
        ExitCode::from(FOUND)
    } else {
        ExitCode::SUCCESS
    })
}

fn alert_params(a: &DetectArgs) -> Vec<(String, String)> {
    let mut p = vec![("measurement".to_owned(), a.measurement.clone())];
    for (k, v) in &a.tags {
        p.push((format!("tag.{k}"), v.clone()));
    }
    let optional = [
        ("field", a.field.clone()),
        ("from", a.from.clone()),
        ("to", a.to.clone()),
        ("window", a.window.map(|w| w.to_string())),
        ("min_rel_change", a.min_rel_change.map(|x| x.to_string())),
        ("noise_factor", a.noise_factor.map(|x| x.to_string())),
    ];
    p.extend(
        optional
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_owned(), v))),
    );
    p
}

fn cmd_detect(a: DetectArgs) -> Result<ExitCode> {
    let params = alert_params(&a);
    let events: Vec<RegressionEvent> = match (&a.url, &a.data_dir) {
        (Some(url), _) => {
            let reply = Client::new(url, a.token.clone()).get("/api/v1/alerts", &params)?;
            serde_json::from_value(reply["events"].clone()).context("malformed alerts document")?
        }
        (None, Some(dir)) => {
            if !dir.join("MANIFEST").exists() {
                bail!("{} is not a data directory", dir.display());
            }
            let q = parse_alerts(&params, RunContext::now_ns()).map_err(anyhow::Error::msg)?;
            let store = Store::open(dir)?;
            let catalog = Catalog::open(dir)?;
            detect_stored(&store, &q, catalog.annotations())?
        }
        (None, None) => bail!("pass --url or --data-dir"),
    };

    let shown: Vec<&RegressionEvent> = events
        .iter()
        .filter(|e| a.show_suppressed || !e.suppressed)
        .collect();
    if !shown.is_empty() {
        print!("{}", render_events(&shown));
    }
    let failing = events
        .iter()
        .filter(|e| !e.suppressed && e.kind == EventKind::Regression)
        .count();
    eprintln!(
        "{} events, {failing} unsuppressed regressions",
        events.len()
    );
    Ok(if failing > 0 {
        ExitCode::from(FOUND)
    } else {
        ExitCode::SUCCESS
    })
}

fn render_events(events: &[&RegressionEvent]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<60} {:<10} {:>5} {:>20} {:>12} {:>12} {:>8}  Kind",
        "Series", "Field", "Index", "Timestamp", "Baseline", "Observed", "Change"
    );
    for e in events {
        let kind = match (e.kind, e.suppressed) {
            (EventKind::Regression, false) => "regression",
            (EventKind::Improvement, false) => "improvement",
            (EventKind::Regression, true) => "regression (suppressed)",
            (EventKind::Improvement, true) => "improvement (suppressed)",
        };
        let _ = writeln!(
            out,
            "{:<60} {:<10} {:>5} {:>20} {:>12.4} {:>12.4} {:>+7.2}%  {kind}",
            e.series.to_string(),
            e.field,
            e.index,
            e.timestamp_ns,
            e.baseline,
            e.observed,
            e.rel_change * 100.0
        );
    }
    out
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn cmd_serve(a: ServeArgs) -> Result<ExitCode> {
    let state = AppState::open(&a.data_dir)
        .with_context(|| format!("cannot open data directory {}", a.data_dir.display()))?
        .with_token(a.token);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("cannot start the async runtime")?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.listen)
            .await
            .with_context(|| format!("cannot listen on {}", a.listen))?;
        // A closed stderr must not take the server down.
        let _ = writeln!(
            io::stderr(),
            "listening on http://{}",
            listener.local_addr()?
        );
        contbench_api::serve(listener, state, shutdown_signal()).await?;
        let _ = writeln!(io::stderr(), "stopped");
        Ok(ExitCode::SUCCESS)
    })
}

fn cmd_query(a: QueryArgs) -> Result<ExitCode> {
    let mut params = vec![("measurement".to_owned(), a.measurement.clone())];
    for (k, v) in &a.tags {
        params.push((format!("tag.{k}"), v.clone()));
    }
    let optional = [
        ("from", a.from),
        ("to", a.to),
        ("group_by", a.group_by),
        ("aggregate", a.aggregate),
        ("bucket", a.bucket),
        ("field", a.field),
    ];
    params.extend(
        optional
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_owned(), v))),
    );
    let reply = Client::new(&a.url, a.token).get("/api/v1/query", &params)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&reply)?);
        return Ok(ExitCode::SUCCESS);
    }
    let series = reply["series"].as_array().cloned().unwrap_or_default();
    for s in &series {
        let tags = s["key"]["tags"]
            .as_object()
            .map(|t| {
                t.iter()
                    .map(|(k, v)| format!("{k}={}", v.as_str().unwrap_or_default()))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .unwrap_or_default();
        println!(
            "{} {tags} {}",
            s["key"]["measurement"].as_str().unwrap_or_default(),
            s["field"].as_str().unwrap_or_default()
        );
        for p in s["points"].as_array().into_iter().flatten() {
            println!("  {:>20} {}", p[0], p[1]);
        }
    }
    eprintln!("{} series", series.len());
    Ok(ExitCode::SUCCESS)
}
