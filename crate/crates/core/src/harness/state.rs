use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use super::clock::thread_cpu_time;

/// Per-worker view of a measurement round.
///
/// The body reads its parameters, then drives the timed loop with
/// [`State::iter`]; only the loop is measured. Labels and counters may be set
/// from anywhere in the body.
#[derive(Debug)]
pub struct State {
    params: Vec<i64>,
    thread_index: usize,
    thread_count: usize,
    iterations: u64,
    label: RefCell<Option<String>>,
    counters: RefCell<BTreeMap<String, f64>>,
    error: RefCell<Option<String>>,
    timing: Cell<Timing>,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Timing {
    pub entered: bool,
    pub wall_start: Option<Instant>,
    pub wall_end: Option<Instant>,
    pub cpu_start: Option<Duration>,
    pub cpu_end: Option<Duration>,
    pub completed: u64,
}

/// What a worker hands back to the coordinator after a round.
#[derive(Debug, Clone)]
pub(crate) struct WorkerReport {
    pub timing: Timing,
    pub label: Option<String>,
    pub counters: BTreeMap<String, f64>,
    pub error: Option<String>,
}

impl State {
    pub(crate) fn new(
        params: Vec<i64>,
        thread_index: usize,
        thread_count: usize,
        iterations: u64,
    ) -> Self {
        debug_assert!(thread_index < thread_count);
        Self {
            params,
            thread_index,
            thread_count,
            iterations,
            label: RefCell::new(None),
            counters: RefCell::new(BTreeMap::new()),
            error: RefCell::new(None),
            timing: Cell::new(Timing::default()),
        }
    }

    /// Value of the `index`-th configured parameter range.
    ///
    /// # Panics
    ///
    /// If the benchmark was registered with fewer ranges.
    pub fn range(&self, index: usize) -> i64 {
        self.params[index]
    }

    pub fn params(&self) -> &[i64] {
        &self.params
    }

    pub fn thread_index(&self) -> usize {
        self.thread_index
    }

    pub fn thread_count(&self) -> usize {
        self.thread_count
    }

    /// Iterations this worker runs in the current round.
    pub fn max_iterations(&self) -> u64 {
        self.iterations
    }

    pub fn set_label(&self, label: impl Into<String>) {
        *self.label.borrow_mut() = Some(label.into());
    }

    /// Sets a user counter; counters from all workers are summed.
    pub fn set_counter(&self, name: impl Into<String>, value: f64) {
        self.counters.borrow_mut().insert(name.into(), value);
    }

    pub fn add_to_counter(&self, name: &str, delta: f64) {
        *self
            .counters
            .borrow_mut()
            .entry(name.to_owned())
            .or_default() += delta;
    }

    /// Marks the run as failed; the result is reported as errored.
    pub fn skip_with_error(&self, message: impl Into<String>) {
        self.error.borrow_mut().get_or_insert(message.into());
    }

    pub fn error_occurred(&self) -> bool {
        self.error.borrow().is_some()
    }

    /// The timed loop. Timing starts when this is called and stops when the
    /// returned iterator is dropped.
    pub fn iter(&self) -> Iterations<'_> {
        let mut timing = self.timing.get();
        if timing.entered {
            self.skip_with_error("benchmark body entered the iteration loop twice");
            return Iterations {
                state: self,
                remaining: 0,
                done: 0,
                live: false,
            };
        }
        timing.entered = true;
        timing.cpu_start = thread_cpu_time();
        timing.wall_start = Some(Instant::now());
        self.timing.set(timing);
        Iterations {
            state: self,
            remaining: self.iterations,
            done: 0,
            live: true,
        }
    }

    pub(crate) fn into_report(self, panic: Option<String>) -> WorkerReport {
        let timing = self.timing.get();
        let mut error = self.error.into_inner().or(panic);
        if error.is_none() && !timing.entered {
            error = Some("benchmark body never entered the iteration loop".to_owned());
        }
        WorkerReport {
            timing,
            label: self.label.into_inner(),
            counters: self.counters.into_inner(),
            error,
        }
    }
}

/// Iterator returned by [`State::iter`].
pub struct Iterations<'a> {
    state: &'a State,
    remaining: u64,
    done: u64,
    live: bool,
}

impl Iterator for Iterations<'_> {
    type Item = ();

    #[inline(always)]
    fn next(&mut self) -> Option<()> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        self.done += 1;
        Some(())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

impl Drop for Iterations<'_> {
    fn drop(&mut self) {
        if !self.live {
            return;
        }
        let wall_end = Instant::now();
        let cpu_end = thread_cpu_time();
        let mut timing = self.state.timing.get();
        timing.wall_end = Some(wall_end);
        timing.cpu_end = cpu_end;
        // An early `break` counts only the iterations actually started.
        timing.completed = self.done;
        self.state.timing.set(timing);
    }
}
