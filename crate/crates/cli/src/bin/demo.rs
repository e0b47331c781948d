//! Demonstration suite exercising every harness feature.

use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use contbench::harness::suite::suite_main;
use contbench::harness::{sink, BenchmarkSpec, Registry, State, TimeUnit};

fn busy_wait(d: Duration) {
    let start = Instant::now();
    while start.elapsed() < d {
        std::hint::spin_loop();
    }
}

fn sum_u32(state: &mut State) {
    let n = state.range(0) as u32;
    for _ in state.iter() {
        let mut acc = 0u32;
        for i in 0..n {
            acc = sink(acc.wrapping_add(i));
        }
    }
}

fn sum_f64(state: &mut State) {
    let n = state.range(0);
    for _ in state.iter() {
        let mut acc = 0.0f64;
        for i in 0..n {
            acc = sink(acc + i as f64);
        }
    }
}

fn registry() -> Registry {
    let mut reg = Registry::new();
    let specs = [
        BenchmarkSpec::new("BM_DemoSum")
            .variant("u32", sum_u32)
            .variant("f64", sum_f64)
            .range(8, 512, 8)
            .unit(TimeUnit::Nanosecond),
        BenchmarkSpec::new("BM_DemoBusyWait")
            .body(|s| {
                for _ in s.iter() {
                    busy_wait(Duration::from_millis(1));
                }
            })
            .use_real_time()
            .unit(TimeUnit::Millisecond),
        threaded(),
        BenchmarkSpec::new("BM_DemoAlloc64MiB")
            .body(|s| {
                for _ in s.iter() {
                    let mut buf = vec![0u8; 64 << 20];
                    for page in buf.chunks_mut(4096) {
                        page[0] = 1;
                    }
                    sink(buf);
                }
            })
            .measure_memory()
            .unit(TimeUnit::Millisecond),
        spiky(),
    ];
    for spec in specs {
        reg.register(spec).expect("demo benchmarks are valid");
    }
    reg
}

/// Setup raises a flag the body checks; each worker hashes its own slice.
fn threaded() -> BenchmarkSpec {
    let ready = Arc::new(AtomicBool::new(false));
    BenchmarkSpec::new("BM_DemoThreaded")
        .setup({
            let ready = ready.clone();
            move |_| ready.store(true, Ordering::SeqCst)
        })
        .teardown({
            let ready = ready.clone();
            move |_| ready.store(false, Ordering::SeqCst)
        })
        .body(move |s| {
            if !ready.load(Ordering::SeqCst) {
                s.skip_with_error("setup did not run");
                return;
            }
            let chunk = 1 << 14;
            let offset = (s.thread_index() * chunk) as u64;
            for _ in s.iter() {
                let mut acc = 0u64;
                for i in offset..offset + chunk as u64 {
                    acc = sink(acc ^ i.wrapping_mul(0x9e37_79b9));
                }
            }
            s.set_label(format!("{} threads", s.thread_count()));
            s.set_counter("items", chunk as f64);
        })
        .thread_range(1, 4)
        .use_real_time()
        .unit(TimeUnit::Microsecond)
}

/// Every other round is five times slower, which keeps the coefficient of
/// variation high and exercises re-runs.
fn spiky() -> BenchmarkSpec {
    let calls = Arc::new(AtomicUsize::new(0));
    BenchmarkSpec::new("BM_DemoSpiky")
        .body(move |s| {
            let slow = calls.fetch_add(1, Ordering::Relaxed) % 2 == 1;
            let d = Duration::from_micros(if slow { 500 } else { 100 });
            for _ in s.iter() {
                busy_wait(d);
            }
        })
        .use_real_time()
        .unit(TimeUnit::Microsecond)
}

fn main() -> ExitCode {
    suite_main(registry())
}
