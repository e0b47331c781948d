//! Absolute and relative time expressions: `<ns>`, `now`, `now-<N><s|m|h|d>`.

const UNITS: [(char, i64); 4] = [
    ('s', 1_000_000_000),
    ('m', 60_000_000_000),
    ('h', 3_600_000_000_000),
    ('d', 86_400_000_000_000),
];

/// Resolves `expr` against `now_ns`.
pub fn parse_time(expr: &str, now_ns: i64) -> Result<i64, String> {
    let expr = expr.trim();
    if expr == "now" {
        return Ok(now_ns);
    }
    if let Some(rest) = expr.strip_prefix("now-") {
        let span = parse_duration(rest)?;
        return now_ns
            .checked_sub(span)
            .ok_or_else(|| format!("`{expr}` is out of range"));
    }
    expr.parse::<i64>().map_err(|_| {
        format!("`{expr}` is neither a nanosecond timestamp, `now` nor `now-<N><s|m|h|d>`")
    })
}

/// `<N><s|m|h|d>` as nanoseconds; a bare integer is taken as nanoseconds.
pub fn parse_duration(expr: &str) -> Result<i64, String> {
    let bad = || format!("`{expr}` is not a duration like `90d`, `6h` or a nanosecond count");
    if let Ok(ns) = expr.parse::<i64>() {
        return if ns > 0 { Ok(ns) } else { Err(bad()) };
    }
    let unit = expr.chars().last().ok_or_else(bad)?;
    let scale = UNITS
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, s)| *s)
        .ok_or_else(bad)?;
    let count: i64 = expr[..expr.len() - 1].parse().map_err(|_| bad())?;
    if count <= 0 {
        return Err(bad());
    }
    count.checked_mul(scale).ok_or_else(bad)
}
