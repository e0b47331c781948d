//! Drives suite executables through their `--list` / `--run-json` protocol.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use anyhow::{bail, Context, Result};
use contbench::model::{SuiteListing, SuiteRun};

pub const DEFAULT_SUITE: &str = "contbench-demo";

/// `contbench-demo` next to the running executable.
pub fn default_suite() -> Result<PathBuf> {
    let exe = std::env::current_exe().context("cannot locate the running executable")?;
    let path = exe.with_file_name(format!("{DEFAULT_SUITE}{}", std::env::consts::EXE_SUFFIX));
    if !path.exists() {
        bail!("no --suite given and {} does not exist", path.display());
    }
    Ok(path)
}

fn invoke(suite: &Path, args: &[String]) -> Result<String> {
    let out = Command::new(suite)
        .args(args)
        .stdin(Stdio::null())
        .stderr(Stdio::inherit())
        .output()
        .with_context(|| format!("cannot start suite {}", suite.display()))?;
    if !out.status.success() {
        bail!("suite {} exited with {}", suite.display(), out.status);
    }
    String::from_utf8(out.stdout)
        .with_context(|| format!("suite {} printed non-UTF-8 output", suite.display()))
}

fn filter_args(filter: Option<&str>) -> Vec<String> {
    filter
        .map(|f| vec!["--filter".to_owned(), f.to_owned()])
        .unwrap_or_default()
}

pub fn list(suite: &Path, filter: Option<&str>) -> Result<Vec<String>> {
    let mut args = vec!["--list".to_owned()];
    args.extend(filter_args(filter));
    let text = invoke(suite, &args)?;
    Ok(SuiteListing::decode(&text)
        .with_context(|| format!("suite {} listing", suite.display()))?
        .instances)
}

pub fn run(
    suite: &Path,
    filter: Option<&str>,
    repetitions: Option<usize>,
    min_time: Option<f64>,
) -> Result<SuiteRun> {
    let mut args = vec!["--run-json".to_owned()];
    args.extend(filter_args(filter));
    if let Some(r) = repetitions {
        args.extend(["--repetitions".to_owned(), r.to_string()]);
    }
    if let Some(t) = min_time {
        args.extend(["--min-time".to_owned(), t.to_string()]);
    }
    let text = invoke(suite, &args)?;
    SuiteRun::decode(&text).with_context(|| format!("suite {} results", suite.display()))
}
