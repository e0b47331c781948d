//! Line-oriented wire format.
//!
//! ```text
//! measurement[,tag_key=tag_value...] field_key=field_value[,...] timestamp_ns
//! ```
//!
//! Tags and fields are written in key order. Commas, spaces, equals signs and
//! backslashes inside names and tag values are escaped with a backslash.
//! Field values use the shortest decimal form that parses back to the same
//! `f64`.

use std::collections::BTreeMap;

use thiserror::Error;

use super::MeasurementPoint;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at byte {offset}: {message}")]
pub struct LineError {
    pub offset: usize,
    pub message: String,
}

fn push_escaped(out: &mut String, s: &str) {
    for c in s.chars() {
        if matches!(c, ',' | ' ' | '=' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
}

fn format_value(v: f64) -> String {
    let plain = v.to_string();
    let sci = format!("{v:e}");
    if sci.len() < plain.len() {
        sci
    } else {
        plain
    }
}

/// Encodes one point without a trailing newline.
pub fn encode_line(point: &MeasurementPoint) -> String {
    let mut out = String::with_capacity(64);
    push_escaped(&mut out, &point.measurement);
    for (k, v) in &point.tags {
        out.push(',');
        push_escaped(&mut out, k);
        out.push('=');
        push_escaped(&mut out, v);
    }
    out.push(' ');
    for (i, (k, v)) in point.fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_escaped(&mut out, k);
        out.push('=');
        out.push_str(&format_value(*v));
    }
    out.push(' ');
    out.push_str(&point.timestamp_ns.to_string());
    out
}

/// Encodes points as LF-terminated lines.
pub fn encode_lines<'a>(points: impl IntoIterator<Item = &'a MeasurementPoint>) -> String {
    let mut out = String::new();
    for p in points {
        out.push_str(&encode_line(p));
        out.push('\n');
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, offset: usize, message: impl Into<String>) -> LineError {
        LineError {
            offset,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    /// Reads an escaped token up to (not including) an unescaped stop byte.
    fn token(&mut self, stops: &[u8], what: &str) -> Result<String, LineError> {
        let start = self.pos;
        let mut buf = Vec::new();
        while let Some(b) = self.peek() {
            if stops.contains(&b) {
                break;
            }
            if b == b'\\' {
                match self.bytes.get(self.pos + 1) {
                    Some(&e @ (b',' | b' ' | b'=' | b'\\')) => {
                        buf.push(e);
                        self.pos += 2;
                        continue;
                    }
                    _ => return Err(self.err(self.pos, "invalid escape sequence")),
                }
            }
            buf.push(b);
            self.pos += 1;
        }
        if buf.is_empty() {
            return Err(self.err(start, format!("expected {what}")));
        }
        // Only ASCII escape bytes were removed, so the input's UTF-8 validity
        // carries over.
        String::from_utf8(buf).map_err(|_| self.err(start, "invalid UTF-8"))
    }

    fn expect(&mut self, byte: u8, what: &str) -> Result<(), LineError> {
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(self.pos, format!("expected {what}")))
        }
    }
}

/// Decodes one line (an optional trailing LF is accepted).
pub fn decode_line(line: &str) -> Result<MeasurementPoint, LineError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let mut cur = Cursor {
        bytes: line.as_bytes(),
        pos: 0,
    };
    if let Some(pos) = line.find(['\n', '\r']) {
        return Err(cur.err(pos, "line break inside a line"));
    }

    let measurement = cur.token(b", ", "measurement name")?;
    let mut tags = BTreeMap::new();
    while cur.peek() == Some(b',') {
        cur.pos += 1;
        let at = cur.pos;
        let key = cur.token(b"=, ", "tag key")?;
        cur.expect(b'=', "`=` after tag key")?;
        let value = cur.token(b", ", "tag value")?;
        if tags.insert(key, value).is_some() {
            return Err(cur.err(at, "duplicate tag key"));
        }
    }
    cur.expect(b' ', "space before fields")?;

    let mut fields = BTreeMap::new();
    loop {
        let at = cur.pos;
        let key = cur.token(b"=, ", "field key")?;
        cur.expect(b'=', "`=` after field key")?;
        let value_at = cur.pos;
        let raw = cur.token(b", ", "field value")?;
        let value: f64 = raw
            .parse()
            .map_err(|_| cur.err(value_at, format!("invalid number `{raw}`")))?;
        if !value.is_finite() {
            return Err(cur.err(value_at, "field value must be finite"));
        }
        if fields.insert(key, value).is_some() {
            return Err(cur.err(at, "duplicate field key"));
        }
        if cur.peek() == Some(b',') {
            cur.pos += 1;
        } else {
            break;
        }
    }
    cur.expect(b' ', "space before timestamp")?;

    let ts_at = cur.pos;
    let rest = &line[ts_at..];
    let digits = rest.strip_prefix('-').unwrap_or(rest);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(cur.err(ts_at, "expected integer timestamp"));
    }
    let timestamp_ns: i64 = rest
        .parse()
        .map_err(|_| cur.err(ts_at, "timestamp out of range"))?;

    let point = MeasurementPoint {
        measurement,
        tags,
        fields,
        timestamp_ns,
    };
    point.validate().map_err(|e| cur.err(0, e.to_string()))?;
    Ok(point)
}
