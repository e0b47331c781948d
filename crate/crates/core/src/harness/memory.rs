//! Peak resident-set measurement.
//!
//! On Linux the kernel's high-water mark (`VmHWM`) is reset through
//! `/proc/self/clear_refs` before the body runs, so the reading afterwards is
//! the peak reached during the body. The figure is process-wide and includes
//! allocator caching, so it is an upper-noise estimate of the body's footprint.

/// Runs `body` and returns its output together with
/// `max(0, peak RSS during body - RSS before body)` in bytes, or `None` when
/// the platform cannot report it.
pub fn measure_memory_peak<R>(body: impl FnOnce() -> R) -> (R, Option<u64>) {
    let reset = platform::reset_peak();
    let before = platform::resident_bytes();
    let peak_before = platform::peak_bytes();
    let out = body();
    let peak_after = platform::peak_bytes();

    let delta = match (before, peak_after) {
        (Some(before), Some(after)) if reset => Some(after.saturating_sub(before)),
        // Without a reset the high-water mark only tells us something if the
        // body pushed it higher.
        (Some(before), Some(after)) if peak_before.is_some_and(|p| after > p) => {
            Some(after.saturating_sub(before))
        }
        _ => None,
    };
    (out, delta)
}

#[cfg(target_os = "linux")]
mod platform {
    use std::fs;

    fn status_kib(key: &str) -> Option<u64> {
        let status = fs::read_to_string("/proc/self/status").ok()?;
        status
            .lines()
            .find_map(|line| line.strip_prefix(key))
            .and_then(|rest| rest.trim().trim_end_matches("kB").trim().parse().ok())
    }

    /// Resident set from `/proc/self/stat`. In a multi-threaded process the
    /// kernel stores the high-water mark from the same approximate counter,
    /// while `VmRSS` is exact; mixing the two biases the delta low.
    pub fn resident_bytes() -> Option<u64> {
        let stat = fs::read_to_string("/proc/self/stat").ok()?;
        let rest = &stat[stat.rfind(')')? + 2..];
        let pages: u64 = rest.split(' ').nth(21)?.parse().ok()?;
        // SAFETY: sysconf has no preconditions.
        let page = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
        u64::try_from(page).ok().map(|p| pages * p)
    }

    pub fn peak_bytes() -> Option<u64> {
        status_kib("VmHWM:").map(|kib| kib * 1024)
    }

    pub fn reset_peak() -> bool {
        fs::write("/proc/self/clear_refs", "5").is_ok()
    }
}

#[cfg(not(target_os = "linux"))]
mod platform {
    pub fn resident_bytes() -> Option<u64> {
        None
    }

    pub fn peak_bytes() -> Option<u64> {
        None
    }

    pub fn reset_peak() -> bool {
        false
    }
}
