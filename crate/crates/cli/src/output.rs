//! Result renderings for `run`.

use anyhow::Result;
use contbench::harness::render_console;
use contbench::model::{encode_results_file, RunContext};
use contbench::BenchmarkResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Console,
    Json,
    Csv,
}

pub fn render(format: Format, results: &[BenchmarkResult], ctx: &RunContext) -> Result<String> {
    Ok(match format {
        Format::Console => render_console(results),
        Format::Json => encode_results_file(results, ctx),
        Format::Csv => csv(results)?,
    })
}

fn csv(results: &[BenchmarkResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "name",
        "iterations",
        "real_time",
        "cpu_time",
        "time_unit",
        "repetitions",
        "cv",
        "unstable",
        "memory_peak_bytes",
        "label",
        "error",
    ])?;
    for r in results {
        w.write_record([
            r.name.clone(),
            r.iterations.to_string(),
            r.real_time_per_iter.to_string(),
            r.cpu_time_per_iter.to_string(),
            r.time_unit.as_str().to_owned(),
            r.repetitions_used.to_string(),
            r.stats.cv.to_string(),
            r.unstable.to_string(),
            r.memory_peak_bytes
                .map(|m| m.to_string())
                .unwrap_or_default(),
            r.label.clone(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
