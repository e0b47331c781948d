//! Entry point for standalone benchmark suite executables.
//!
//! A suite binary builds a [`Registry`] and hands it to [`suite_main`]. Run
//! directly it prints a console table; the orchestrator instead drives it
//! with `--list` or `--run-json`, which print schema-versioned JSON documents
//! ([`SuiteListing`], [`SuiteRun`]) on standard output. Progress goes to
//! standard error.

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use regex::Regex;

use super::report::render_console;
use super::runner::{run_all, RunnerConfig};
use super::spec::Registry;
use crate::model::{SuiteListing, SuiteRun};

#[derive(Debug, Parser)]
#[command(about = "Benchmark suite")]
pub struct SuiteArgs {
    /// Print the instance names as JSON and exit.
    #[arg(long, conflicts_with = "run_json")]
    pub list: bool,
    /// Run and print results as JSON.
    #[arg(long = "run-json")]
    pub run_json: bool,
    /// Regular expression over full instance names.
    #[arg(long)]
    pub filter: Option<String>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Minimum measurement time per round, in seconds.
    #[arg(long = "min-time")]
    pub min_time: Option<f64>,
}

pub fn suite_main(registry: Registry) -> ExitCode {
    run_suite(registry, SuiteArgs::parse())
}

pub fn run_suite(registry: Registry, args: SuiteArgs) -> ExitCode {
    let filter = match args.filter.as_deref().map(Regex::new).transpose() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("invalid --filter: {e}");
            return ExitCode::from(2);
        }
    };
    let names: Vec<String> = registry
        .instances()
        .into_iter()
        .map(|(_, i)| i.name)
        .filter(|n| filter.as_ref().is_none_or(|re| re.is_match(n)))
        .collect();

    if args.list {
        let doc = SuiteListing::new(names);
        println!("{}", doc.encode());
        return ExitCode::SUCCESS;
    }
    if names.is_empty() {
        eprintln!("no benchmark matches the filter");
        return ExitCode::from(2);
    }

    let mut config = RunnerConfig::default();
    if let Some(r) = args.repetitions {
        if r == 0 {
            eprintln!("--repetitions must be at least 1");
            return ExitCode::from(2);
        }
        config.repetitions = r;
    }
    if let Some(t) = args.min_time {
        if !(t > 0.0 && t.is_finite()) {
            eprintln!("--min-time must be positive");
            return ExitCode::from(2);
        }
        config.min_time = Some(t);
    }

    let total = names.len();
    let mut done = 0;
    let results = run_all(&registry, filter.as_ref(), &config, |r| {
        done += 1;
        eprintln!("[{done}/{total}] {}", r.name);
    });

    if args.run_json {
        let doc = SuiteRun::for_this_build(results);
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(stdout, "{}", doc.encode());
        ExitCode::SUCCESS
    } else {
        print!("{}", render_console(&results));
        if results.iter().any(|r| r.is_error()) {
            ExitCode::FAILURE
        } else {
            ExitCode::SUCCESS
        }
    }
}
