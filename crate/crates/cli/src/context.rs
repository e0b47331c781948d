//! Run context defaults: hostname and version-control metadata, overridable
//! with `--tag`.

use std::collections::BTreeMap;
use std::fs;
use std::process::Command;

use anyhow::{bail, Result};
use contbench::model::RunContext;

fn hostname() -> Option<String> {
    fs::read_to_string("/proc/sys/kernel/hostname")
        .ok()
        .or_else(|| std::env::var("HOSTNAME").ok())
        .map(|h| h.trim().to_owned())
        .filter(|h| !h.is_empty())
}

fn git(args: &[&str]) -> Option<String> {
    let out = Command::new("git").args(args).output().ok()?;
    if !out.status.success() {
        return None;
    }
    let s = String::from_utf8(out.stdout).ok()?.trim().to_owned();
    (!s.is_empty()).then_some(s)
}

/// Context tags that must be known before running: `machine`, `commit` and
/// `branch`, from `tags` or the environment. Remaining tags go to `extra`.
pub fn resolve(tags: &[(String, String)], timestamp_ns: i64) -> Result<RunContext> {
    let mut given: BTreeMap<String, String> = tags.iter().cloned().collect();
    let mut take = |key: &str| given.remove(key);
    let machine = take("machine").or_else(hostname);
    let commit = take("commit").or_else(|| git(&["rev-parse", "HEAD"]));
    let branch = take("branch").or_else(|| git(&["rev-parse", "--abbrev-ref", "HEAD"]));
    let compiler = take("compiler").unwrap_or_default();
    let build_type = take("build_type").unwrap_or_default();
    let (Some(machine), Some(commit), Some(branch)) =
        (machine.clone(), commit.clone(), branch.clone())
    else {
        let missing: Vec<String> = [("machine", machine), ("commit", commit), ("branch", branch)]
            .into_iter()
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| format!("--tag {k}=<value>"))
            .collect();
        bail!(
            "could not detect the run context; pass {}",
            missing.join(" ")
        );
    };
    Ok(RunContext {
        machine,
        commit,
        branch,
        compiler,
        build_type,
        extra: given,
        timestamp_ns,
    })
}

/// Fills compiler and build type from the suite unless given as tags.
pub fn complete(ctx: &mut RunContext, compiler: &str, build_type: &str) {
    if ctx.compiler.is_empty() {
        ctx.compiler = compiler.to_owned();
    }
    if ctx.build_type.is_empty() {
        ctx.build_type = build_type.to_owned();
    }
}
