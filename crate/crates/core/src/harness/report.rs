use std::fmt::Write;

use super::runner::BenchmarkResult;

/// Fixed-width console table: name, real time, CPU time, iterations, label
/// and counters.
pub fn render_console(results: &[BenchmarkResult]) -> String {
    let width = results
        .iter()
        .map(|r| r.name.len())
        .max()
        .unwrap_or(0)
        .max("Benchmark".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$} {:>16} {:>16} {:>12}  Label / Counters",
        "Benchmark", "Time", "CPU", "Iterations"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 64));
    for r in results {
        if let Some(err) = &r.error {
            let _ = writeln!(out, "{:<width$} ERROR: {err}", r.name);
            continue;
        }
        let mut extra = r.label.clone();
        for (k, v) in &r.counters {
            if !extra.is_empty() {
                extra.push(' ');
            }
            let _ = write!(extra, "{k}={v:.4}");
        }
        if let Some(m) = r.memory_peak_bytes {
            if !extra.is_empty() {
                extra.push(' ');
            }
            let _ = write!(extra, "peak_rss={:.1}MiB", m as f64 / (1u64 << 20) as f64);
        }
        if r.unstable {
            extra.push_str(" (unstable)");
        }
        let _ = writeln!(
            out,
            "{:<width$} {:>13.3} {:<2} {:>13.3} {:<2} {:>12}  {}",
            r.name,
            r.real_time_per_iter,
            r.time_unit.as_str(),
            r.cpu_time_per_iter,
            r.time_unit.as_str(),
            r.iterations,
            extra.trim_start()
        );
    }
    out
}
