use super::HarnessError;

/// Expands `[low, high]` geometrically by `multiplier`, always including both
/// endpoints.
///
/// `(1, 32, 8)` yields `[1, 8, 32]`; `(2, 12, 2)` yields `[2, 4, 8, 12]`.
pub fn expand_range(low: i64, high: i64, multiplier: i64) -> Result<Vec<i64>, HarnessError> {
    if low < 1 || low > high {
        return Err(HarnessError::InvalidRange { low, high });
    }
    if multiplier < 2 {
        return Err(HarnessError::InvalidMultiplier(multiplier));
    }
    let mut out = vec![low];
    let mut current = low;
    while let Some(next) = current.checked_mul(multiplier) {
        if next >= high {
            break;
        }
        out.push(next);
        current = next;
    }
    if current != high {
        out.push(high);
    }
    Ok(out)
}

/// Thread counts for a thread range: the geometric expansion with multiplier 2.
pub fn expand_thread_range(low: usize, high: usize) -> Result<Vec<usize>, HarnessError> {
    let as_i64 = |v: usize| i64::try_from(v).unwrap_or(i64::MAX);
    Ok(expand_range(as_i64(low), as_i64(high), 2)?
        .into_iter()
        .map(|v| v as usize)
        .collect())
}

/// Number of hardware threads available to this process (at least 1).
pub fn hardware_threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
