use std::any::Any;
use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Barrier, Mutex};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::calibrate::{calibrate_iterations, Calibration};
use super::memory::measure_memory_peak;
use super::spec::{BenchmarkSpec, ClockMode, Fixture, Instance, Registry, TimeUnit};
use super::state::{State, WorkerReport};
use super::stats::{aggregate_stats, check_stability, median, RunStats, Stability};

pub const DEFAULT_MIN_TIME: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct RunnerConfig {
    /// Overrides every benchmark's own minimum measurement time when set.
    pub min_time: Option<f64>,
    pub repetitions: usize,
    pub cv_threshold: f64,
    pub max_reruns: usize,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        Self {
            min_time: None,
            repetitions: 3,
            cv_threshold: 0.05,
            max_reruns: 3,
        }
    }
}

/// Outcome of measuring one benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub name: String,
    pub base_name: String,
    pub variant: String,
    pub params: Vec<i64>,
    pub threads: usize,
    /// Iterations per repetition, summed over workers.
    pub iterations: u64,
    pub real_time_per_iter: f64,
    pub cpu_time_per_iter: f64,
    pub time_unit: TimeUnit,
    pub clock_mode: ClockMode,
    pub label: String,
    pub counters: BTreeMap<String, f64>,
    pub memory_peak_bytes: Option<u64>,
    pub repetitions_used: usize,
    /// Dispersion stayed above the threshold after all re-runs.
    pub unstable: bool,
    /// Per-repetition, per-iteration times on the decision clock, in
    /// `time_unit`.
    pub stats: RunStats,
    pub error: Option<String>,
}

impl BenchmarkResult {
    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }

    fn errored(spec: &BenchmarkSpec, instance: &Instance, message: String) -> Self {
        Self {
            name: instance.name.clone(),
            base_name: spec.name.clone(),
            variant: spec.variants[instance.variant].label.clone(),
            params: instance.params.clone(),
            threads: instance.thread_count,
            iterations: 0,
            real_time_per_iter: 0.0,
            cpu_time_per_iter: 0.0,
            time_unit: spec.time_unit,
            clock_mode: spec.clock_mode,
            label: String::new(),
            counters: BTreeMap::new(),
            memory_peak_bytes: None,
            repetitions_used: 0,
            unstable: false,
            stats: RunStats {
                samples: Vec::new(),
                mean: 0.0,
                median: 0.0,
                stddev: 0.0,
                cv: 0.0,
            },
            error: Some(message),
        }
    }
}

/// One timed round across all workers.
#[derive(Debug, Clone)]
pub(crate) struct Round {
    /// Earliest loop start to latest loop end.
    pub wall: Duration,
    /// Summed per-thread CPU time of the timed loops.
    pub cpu: Duration,
    /// Iterations completed, summed over workers.
    pub iterations: u64,
    pub label: Option<String>,
    pub counters: BTreeMap<String, f64>,
}

impl Round {
    fn decision_seconds(&self, clock: ClockMode) -> f64 {
        match clock {
            ClockMode::RealTime => self.wall.as_secs_f64(),
            ClockMode::CpuTime => self.cpu.as_secs_f64(),
        }
    }

    pub fn real_per_iter_seconds(&self) -> f64 {
        self.wall.as_secs_f64() / self.iterations as f64
    }

    pub fn cpu_per_iter_seconds(&self) -> f64 {
        self.cpu.as_secs_f64() / self.iterations as f64
    }
}

#[derive(Clone, Copy)]
enum Command {
    Run(u64),
    Stop,
}

struct Group {
    ready: Barrier,
    start: Barrier,
    end: Barrier,
    command: Mutex<Command>,
    reports: Mutex<Vec<Option<WorkerReport>>>,
    setup_error: Mutex<Option<String>>,
}

/// Coordinator-side handle used while the worker threads are alive.
struct Coordinator<'g> {
    group: &'g Group,
    stopped: bool,
}

impl Coordinator<'_> {
    fn round(&mut self, iterations: u64) -> Result<Round, String> {
        *self.group.command.lock().unwrap() = Command::Run(iterations);
        self.group.start.wait();
        self.group.end.wait();
        let reports: Vec<WorkerReport> = self
            .group
            .reports
            .lock()
            .unwrap()
            .iter_mut()
            .map(|r| r.take().expect("every worker reports each round"))
            .collect();
        merge_reports(reports)
    }

    fn stop(&mut self) {
        if !self.stopped {
            self.stopped = true;
            *self.group.command.lock().unwrap() = Command::Stop;
            self.group.start.wait();
        }
    }
}

fn merge_reports(reports: Vec<WorkerReport>) -> Result<Round, String> {
    if let Some(err) = reports.iter().find_map(|r| r.error.clone()) {
        return Err(err);
    }
    let mut wall_start = None;
    let mut wall_end = None;
    let mut cpu = Duration::ZERO;
    let mut iterations = 0;
    let mut label = None;
    let mut counters = BTreeMap::new();
    for r in reports {
        let t = r.timing;
        let (Some(ws), Some(we)) = (t.wall_start, t.wall_end) else {
            return Err("worker produced no timing".to_owned());
        };
        wall_start = Some(wall_start.map_or(ws, |s: std::time::Instant| s.min(ws)));
        wall_end = Some(wall_end.map_or(we, |e: std::time::Instant| e.max(we)));
        cpu += match (t.cpu_start, t.cpu_end) {
            (Some(a), Some(b)) => b.saturating_sub(a),
            _ => we - ws,
        };
        iterations += t.completed;
        if r.label.is_some() {
            label = r.label;
        }
        for (k, v) in r.counters {
            *counters.entry(k).or_insert(0.0) += v;
        }
    }
    if iterations == 0 {
        return Err("no iterations completed".to_owned());
    }
    let (Some(start), Some(end)) = (wall_start, wall_end) else {
        return Err("no workers".to_owned());
    };
    Ok(Round {
        wall: end - start,
        cpu,
        iterations,
        label,
        counters,
    })
}

fn panic_message(payload: Box<dyn Any + Send>) -> String {
    let detail = payload
        .downcast_ref::<&str>()
        .map(|s| (*s).to_owned())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "non-string panic payload".to_owned());
    format!("benchmark panicked: {detail}")
}

fn worker(group: &Group, spec: &BenchmarkSpec, variant: usize, fixture: &Fixture, index: usize) {
    let body = &spec.variants[variant].body;
    let mut setup_ok = true;
    if index == 0 {
        if let Some(setup) = &spec.setup {
            if let Err(p) = catch_unwind(AssertUnwindSafe(|| setup(fixture))) {
                setup_ok = false;
                *group.setup_error.lock().unwrap() = Some(panic_message(p));
            }
        }
    }
    group.ready.wait();
    loop {
        group.start.wait();
        let command = *group.command.lock().unwrap();
        let Command::Run(iterations) = command else {
            break;
        };
        let mut state = State::new(
            fixture.params.clone(),
            index,
            fixture.thread_count,
            iterations,
        );
        let outcome = catch_unwind(AssertUnwindSafe(|| body(&mut state)));
        let report = state.into_report(outcome.err().map(panic_message));
        group.reports.lock().unwrap()[index] = Some(report);
        group.end.wait();
    }
    if index == 0 && setup_ok {
        if let Some(teardown) = &spec.teardown {
            // A failing teardown cannot change measurements already taken.
            let _ = catch_unwind(AssertUnwindSafe(|| teardown(fixture)));
        }
    }
}

/// Measures one instance of `spec`.
///
/// A group of `thread_count` workers lives for the whole call. Worker 0 runs
/// setup before the start barrier and teardown after the last round; rounds
/// are calibrated until the decision clock reaches the minimum time, repeated
/// `config.repetitions` times and re-run while the coefficient of variation
/// stays above `config.cv_threshold`.
pub fn run_one(
    spec: &BenchmarkSpec,
    variant: usize,
    params: &[i64],
    thread_count: usize,
    config: &RunnerConfig,
) -> BenchmarkResult {
    let instance = spec
        .instances()
        .ok()
        .and_then(|all| {
            all.into_iter().find(|i| {
                i.variant == variant && i.params == params && i.thread_count == thread_count
            })
        })
        .unwrap_or_else(|| Instance {
            name: spec.name.clone(),
            variant,
            params: params.to_vec(),
            thread_count,
        });
    run_instance(spec, &instance, config)
}

pub fn run_instance(
    spec: &BenchmarkSpec,
    instance: &Instance,
    config: &RunnerConfig,
) -> BenchmarkResult {
    if instance.variant >= spec.variants.len() {
        return BenchmarkResult::errored(spec, instance, "no such variant".to_owned());
    }
    if instance.params.len() != spec.param_ranges.len() {
        return BenchmarkResult::errored(
            spec,
            instance,
            format!(
                "expected {} parameters, got {}",
                spec.param_ranges.len(),
                instance.params.len()
            ),
        );
    }
    let threads = instance.thread_count.max(1);
    let fixture = Fixture {
        name: instance.name.clone(),
        params: instance.params.clone(),
        thread_count: threads,
    };
    let group = Group {
        ready: Barrier::new(threads + 1),
        start: Barrier::new(threads + 1),
        end: Barrier::new(threads + 1),
        command: Mutex::new(Command::Stop),
        reports: Mutex::new(vec![None; threads]),
        setup_error: Mutex::new(None),
    };

    std::thread::scope(|scope| {
        for index in 0..threads {
            let group = &group;
            let fixture = &fixture;
            scope.spawn(move || worker(group, spec, instance.variant, fixture, index));
        }
        group.ready.wait();
        let mut coord = Coordinator {
            group: &group,
            stopped: false,
        };
        let outcome = match group.setup_error.lock().unwrap().take() {
            Some(err) => Err(err),
            None => measure(&mut coord, spec, config),
        };
        coord.stop();
        match outcome {
            Ok(m) => finish(spec, instance, m),
            Err(err) => BenchmarkResult::errored(spec, instance, err),
        }
    })
}

struct Measured {
    rounds: Vec<Round>,
    stats: RunStats,
    unstable: bool,
    memory: Option<u64>,
}

fn measure(
    coord: &mut Coordinator<'_>,
    spec: &BenchmarkSpec,
    config: &RunnerConfig,
) -> Result<Measured, String> {
    let min_time = config
        .min_time
        .or(spec.min_time)
        .unwrap_or(DEFAULT_MIN_TIME);
    let clock = spec.clock_mode;
    let unit = spec.time_unit;
    let sample = |r: &Round| unit.from_seconds(r.decision_seconds(clock) / r.iterations as f64);

    let mut iterations = 1;
    let first = loop {
        let round = coord.round(iterations)?;
        match calibrate_iterations(round.decision_seconds(clock), iterations, min_time) {
            Calibration::Done => break round,
            Calibration::Retry(next) => iterations = next,
        }
    };
    let mut rounds = vec![first];
    while rounds.len() < config.repetitions.max(1) {
        rounds.push(coord.round(iterations)?);
    }

    let mut reruns = 0;
    let (stats, unstable) = loop {
        let samples: Vec<f64> = rounds.iter().map(sample).collect();
        let stats = aggregate_stats(&samples).map_err(|e| e.to_string())?;
        match check_stability(&stats, config.cv_threshold, reruns, config.max_reruns) {
            Stability::Accept { unstable } => break (stats, unstable),
            Stability::Rerun => {
                rounds.push(coord.round(iterations)?);
                reruns += 1;
            }
        }
    };

    let memory = if spec.measure_memory {
        let (round, peak) = measure_memory_peak(|| coord.round(1));
        round?;
        peak
    } else {
        None
    };
    Ok(Measured {
        rounds,
        stats,
        unstable,
        memory,
    })
}

fn finish(spec: &BenchmarkSpec, instance: &Instance, m: Measured) -> BenchmarkResult {
    let unit = spec.time_unit;
    let real: Vec<f64> = m.rounds.iter().map(Round::real_per_iter_seconds).collect();
    let cpu: Vec<f64> = m.rounds.iter().map(Round::cpu_per_iter_seconds).collect();
    let last = m.rounds.last().expect("at least one round");
    BenchmarkResult {
        name: instance.name.clone(),
        base_name: spec.name.clone(),
        variant: spec.variants[instance.variant].label.clone(),
        params: instance.params.clone(),
        threads: instance.thread_count,
        iterations: last.iterations,
        real_time_per_iter: unit.from_seconds(median(&real)),
        cpu_time_per_iter: unit.from_seconds(median(&cpu)),
        time_unit: unit,
        clock_mode: spec.clock_mode,
        label: last.label.clone().unwrap_or_default(),
        counters: last.counters.clone(),
        memory_peak_bytes: m.memory,
        repetitions_used: m.rounds.len(),
        unstable: m.unstable,
        stats: m.stats,
        error: None,
    }
}

/// Runs every registered instance whose full name matches `filter`,
/// sequentially, handing each result to `on_result` as it completes.
pub fn run_all(
    registry: &Registry,
    filter: Option<&Regex>,
    config: &RunnerConfig,
    mut on_result: impl FnMut(&BenchmarkResult),
) -> Vec<BenchmarkResult> {
    let mut out = Vec::new();
    for (spec_index, instance) in registry.instances() {
        if filter.is_some_and(|re| !re.is_match(&instance.name)) {
            continue;
        }
        let spec = registry
            .get(spec_index)
            .expect("instance of a registered spec");
        let result = run_instance(spec, &instance, config);
        on_result(&result);
        out.push(result);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sink;
    use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
    use std::sync::Arc;
    use std::time::Instant;

    // Timing assertions need the (single) core to themselves.
    static SERIAL: Mutex<()> = Mutex::new(());

    fn quick() -> RunnerConfig {
        RunnerConfig {
            min_time: Some(0.01),
            repetitions: 1,
            ..RunnerConfig::default()
        }
    }

    fn spin(d: Duration) {
        let start = Instant::now();
        while start.elapsed() < d {
            std::hint::spin_loop();
        }
    }

    #[test]
    fn single_repetition_divides_wall_by_iterations() {
        let _g = SERIAL.lock().unwrap();
        let spec = BenchmarkSpec::new("BM_Spin")
            .body(|s| {
                for _ in s.iter() {
                    spin(Duration::from_micros(50));
                }
            })
            .unit(TimeUnit::Microsecond);
        let r = run_one(&spec, 0, &[], 1, &quick());
        assert!(r.error.is_none(), "{:?}", r.error);
        assert_eq!(r.repetitions_used, 1);
        assert_eq!(r.stats.samples.len(), 1);
        // CPU clock decides; a spinning body keeps CPU close to wall.
        assert!(r.real_time_per_iter >= 50.0, "{}", r.real_time_per_iter);
        assert!(r.cpu_time_per_iter <= r.real_time_per_iter * 1.05);
    }

    #[test]
    fn setup_and_teardown_bracket_all_iterations() {
        let _g = SERIAL.lock().unwrap();
        for threads in [1, 2, 4, 8] {
            let setups = Arc::new(AtomicUsize::new(0));
            let teardowns = Arc::new(AtomicUsize::new(0));
            let iterating = Arc::new(AtomicUsize::new(0));
            let early = Arc::new(AtomicBool::new(false));
            let late = Arc::new(AtomicBool::new(false));
            let spec = BenchmarkSpec::new("BM_Fixture")
                .setup({
                    let setups = setups.clone();
                    let iterating = iterating.clone();
                    let early = early.clone();
                    move |_| {
                        if iterating.load(Ordering::SeqCst) > 0 {
                            early.store(true, Ordering::SeqCst);
                        }
                        setups.fetch_add(1, Ordering::SeqCst);
                    }
                })
                .teardown({
                    let teardowns = teardowns.clone();
                    let iterating = iterating.clone();
                    let late = late.clone();
                    move |_| {
                        if iterating.load(Ordering::SeqCst) > 0 {
                            late.store(true, Ordering::SeqCst);
                        }
                        teardowns.fetch_add(1, Ordering::SeqCst);
                    }
                })
                .body({
                    let setups = setups.clone();
                    let early = early.clone();
                    move |s| {
                        iterating.fetch_add(1, Ordering::SeqCst);
                        for _ in s.iter() {
                            if setups.load(Ordering::SeqCst) != 1 {
                                early.store(true, Ordering::SeqCst);
                            }
                        }
                        iterating.fetch_sub(1, Ordering::SeqCst);
                    }
                })
                .threads(threads);
            let r = run_one(&spec, 0, &[], threads, &quick());
            assert!(r.error.is_none());
            assert_eq!(setups.load(Ordering::SeqCst), 1, "threads={threads}");
            assert_eq!(teardowns.load(Ordering::SeqCst), 1, "threads={threads}");
            assert!(!early.load(Ordering::SeqCst));
            assert!(!late.load(Ordering::SeqCst));
        }
    }

    #[test]
    fn thread_index_and_params_reach_the_body() {
        let seen = Arc::new(Mutex::new(Vec::new()));
        let spec = BenchmarkSpec::new("BM_Params")
            .body({
                let seen = seen.clone();
                move |s| {
                    seen.lock()
                        .unwrap()
                        .push((s.thread_index(), s.thread_count(), s.range(0)));
                    for _ in s.iter() {
                        sink(s.range(0));
                    }
                }
            })
            .range(8, 8, 2)
            .threads(3);
        let r = run_one(&spec, 0, &[8], 3, &quick());
        assert!(r.error.is_none());
        assert_eq!(r.name, "BM_Params/8/threads:3");
        let seen = seen.lock().unwrap();
        for t in 0..3 {
            assert!(seen.contains(&(t, 3, 8)));
        }
        assert!(seen.iter().all(|&(i, n, _)| i < n));
    }

    #[test]
    fn counters_are_summed_and_label_kept() {
        let spec = BenchmarkSpec::new("BM_Counters")
            .body(|s| {
                for _ in s.iter() {}
                s.set_counter("workers", 1.0);
                s.set_label(format!("t{}", s.thread_count()));
            })
            .threads(4);
        let r = run_one(&spec, 0, &[], 4, &quick());
        assert_eq!(r.counters["workers"], 4.0);
        assert_eq!(r.label, "t4");
        assert_eq!(r.iterations % 4, 0);
    }

    #[test]
    fn panicking_body_yields_errored_result() {
        let teardowns = Arc::new(AtomicUsize::new(0));
        let spec = BenchmarkSpec::new("BM_Panics")
            .body(|s| {
                if s.iter().next().is_some() {
                    panic!("boom");
                }
            })
            .teardown({
                let t = teardowns.clone();
                move |_| {
                    t.fetch_add(1, Ordering::SeqCst);
                }
            })
            .threads(2);
        let r = run_one(&spec, 0, &[], 2, &quick());
        assert!(r.error.as_deref().unwrap().contains("boom"));
        assert_eq!(teardowns.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn skip_with_error_is_reported() {
        let spec = BenchmarkSpec::new("BM_Skip").body(|s| {
            s.skip_with_error("resource missing");
            for _ in s.iter() {}
        });
        let r = run_one(&spec, 0, &[], 1, &quick());
        assert_eq!(r.error.as_deref(), Some("resource missing"));
    }

    #[test]
    fn failing_setup_skips_measurement() {
        let spec = BenchmarkSpec::new("BM_BadSetup")
            .setup(|_| panic!("no fixture"))
            .body(|s| for _ in s.iter() {});
        let r = run_one(&spec, 0, &[], 1, &quick());
        assert!(r.error.as_deref().unwrap().contains("no fixture"));
    }

    #[test]
    fn reruns_are_bounded() {
        let _g = SERIAL.lock().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let spec = BenchmarkSpec::new("BM_Noisy")
            .body({
                let calls = calls.clone();
                move |s| {
                    let slow = calls.fetch_add(1, Ordering::SeqCst) % 2 == 1;
                    let d = Duration::from_micros(if slow { 500 } else { 100 });
                    for _ in s.iter() {
                        spin(d);
                    }
                }
            })
            .use_real_time();
        let config = RunnerConfig {
            min_time: Some(0.005),
            repetitions: 3,
            cv_threshold: 0.05,
            max_reruns: 2,
        };
        let r = run_one(&spec, 0, &[], 1, &config);
        assert!(r.error.is_none());
        assert_eq!(r.repetitions_used, 5);
        assert_eq!(r.stats.samples.len(), 5);
        assert!(r.unstable);
    }

    #[test]
    fn filter_selects_by_full_name() {
        let mut reg = Registry::new();
        reg.register(
            BenchmarkSpec::new("BM_A")
                .body(|s| for _ in s.iter() {})
                .range(1, 4, 2),
        )
        .unwrap();
        reg.register(BenchmarkSpec::new("BM_B").body(|s| for _ in s.iter() {}))
            .unwrap();
        let re = Regex::new("BM_A/4").unwrap();
        let mut seen = Vec::new();
        let out = run_all(&reg, Some(&re), &quick(), |r| seen.push(r.name.clone()));
        assert_eq!(out.len(), 1);
        assert_eq!(seen, ["BM_A/4"]);
    }
}
