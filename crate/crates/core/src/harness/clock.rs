use std::time::Duration;

/// CPU time consumed so far by the calling thread, if the platform exposes a
/// per-thread CPU clock.
pub fn thread_cpu_time() -> Option<Duration> {
    #[cfg(unix)]
    return cpu_clock(libc::CLOCK_THREAD_CPUTIME_ID);
    #[cfg(not(unix))]
    return None;
}

/// CPU time consumed so far by the whole process.
pub struct ProcessClock;

impl ProcessClock {
    pub fn now() -> Option<Duration> {
        #[cfg(unix)]
        return cpu_clock(libc::CLOCK_PROCESS_CPUTIME_ID);
        #[cfg(not(unix))]
        return None;
    }
}

#[cfg(unix)]
fn cpu_clock(id: libc::clockid_t) -> Option<Duration> {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(id, &mut ts) };
    if rc != 0 || ts.tv_sec < 0 || ts.tv_nsec < 0 {
        return None;
    }
    Some(Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32))
}
