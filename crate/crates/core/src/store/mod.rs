//! Embedded time-series store.
//!
//! Layout of a data directory:
//!
//! ```text
//! MANIFEST              JSON: schema version, live segment list, next id
//! segments/000001.lines wire-format lines, one `#commit <n>` line per batch
//! ```
//!
//! Every write batch is appended to the active segment followed by a commit
//! marker and synced before the in-memory index is updated. On open, segments
//! are replayed in manifest order and anything after the last commit marker
//! (a torn batch) is discarded.

mod index;
mod query;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{decode_line, encode_line, MeasurementPoint, SeriesKey, SCHEMA_VERSION};
use index::Index;
pub use query::{Aggregate, QuerySpec, Series};

const MANIFEST: &str = "MANIFEST";
const SEGMENTS: &str = "segments";
const COMMIT_PREFIX: &str = "#commit ";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt segment {segment} at line {line}: {reason}")]
    Corrupt {
        segment: String,
        line: usize,
        reason: String,
    },
    #[error("corrupt manifest: {0}")]
    Manifest(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreOptions {
    /// A new segment is started once the active one reaches this size.
    pub segment_max_bytes: u64,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self {
            segment_max_bytes: 64 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Manifest {
    schema_version: String,
    segments: Vec<String>,
    next_id: u64,
}

/// Outcome of [`Store::write_points`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteReport {
    pub accepted: usize,
    /// `(index in the batch, reason)` for every point that was not written.
    pub rejected: Vec<(usize, String)>,
}

#[derive(Debug)]
struct Active {
    name: String,
    file: File,
    len: u64,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    options: StoreOptions,
    manifest: Manifest,
    index: Index,
    active: Option<Active>,
    /// Committed length of the last listed segment, as found on open.
    tail_committed: Option<(String, u64)>,
    #[cfg(test)]
    fail_next_write: bool,
}

impl Store {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with(dir, StoreOptions::default())
    }

    pub fn open_with(dir: impl AsRef<Path>, options: StoreOptions) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_owned();
        let seg_dir = dir.join(SEGMENTS);
        fs::create_dir_all(&seg_dir).map_err(io_err(&seg_dir))?;

        let manifest_path = dir.join(MANIFEST);
        let manifest = match fs::read_to_string(&manifest_path) {
            Ok(text) => {
                let m: Manifest =
                    serde_json::from_str(&text).map_err(|e| StoreError::Manifest(e.to_string()))?;
                if m.schema_version != SCHEMA_VERSION {
                    return Err(StoreError::Manifest(format!(
                        "unsupported schema version `{}`",
                        m.schema_version
                    )));
                }
                m
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                let m = Manifest {
                    schema_version: SCHEMA_VERSION.to_owned(),
                    segments: Vec::new(),
                    next_id: 1,
                };
                write_manifest(&dir, &m)?;
                m
            }
            Err(e) => return Err(io_err(&manifest_path)(e)),
        };

        let mut index = Index::default();
        let mut tail_committed = None;
        for name in &manifest.segments {
            let committed = replay(&seg_dir.join(name), name, &mut index)?;
            tail_committed = Some((name.clone(), committed));
        }

        Ok(Self {
            dir,
            options,
            manifest,
            index,
            active: None,
            tail_committed,
            #[cfg(test)]
            fail_next_write: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn segment_path(&self, name: &str) -> PathBuf {
        self.dir.join(SEGMENTS).join(name)
    }

    /// Validates and durably appends `points`. Invalid points are reported
    /// and skipped; if the append itself fails nothing is written.
    pub fn write_points(&mut self, points: &[MeasurementPoint]) -> Result<WriteReport, StoreError> {
        let mut report = WriteReport::default();
        let mut valid = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            match p.validate() {
                Ok(()) => valid.push(p),
                Err(e) => report.rejected.push((i, e.to_string())),
            }
        }
        if valid.is_empty() {
            return Ok(report);
        }

        let mut buf = String::new();
        for p in &valid {
            buf.push_str(&encode_line(p));
            buf.push('\n');
        }
        buf.push_str(COMMIT_PREFIX);
        buf.push_str(&valid.len().to_string());
        buf.push('\n');

        self.append(buf.as_bytes())?;
        for p in &valid {
            self.index.apply(p);
        }
        report.accepted = valid.len();
        Ok(report)
    }

    fn append(&mut self, bytes: &[u8]) -> Result<(), StoreError> {
        self.ensure_active()?;
        #[cfg(test)]
        let inject = std::mem::take(&mut self.fail_next_write);
        let path = self.segment_path(&self.active.as_ref().expect("active segment").name);
        let active = self.active.as_mut().expect("active segment");
        let before = active.len;
        let result = active
            .file
            .write_all(bytes)
            .and_then(|()| active.file.sync_data());
        #[cfg(test)]
        let result = match result {
            Ok(()) if inject => Err(io::Error::other("injected failure")),
            other => other,
        };
        if let Err(e) = result {
            // Roll the segment back to its last committed batch.
            let _ = active.file.set_len(before);
            let _ = active.file.sync_data();
            return Err(io_err(&path)(e));
        }
        active.len += bytes.len() as u64;
        Ok(())
    }

    fn ensure_active(&mut self) -> Result<(), StoreError> {
        if let Some(a) = &self.active {
            if a.len < self.options.segment_max_bytes {
                return Ok(());
            }
            self.active = None;
        }
        if let Some((name, committed)) = self.tail_committed.take() {
            if committed < self.options.segment_max_bytes {
                let path = self.segment_path(&name);
                let file = OpenOptions::new()
                    .append(true)
                    .open(&path)
                    .map_err(io_err(&path))?;
                // Drop any torn batch left behind by a crash.
                file.set_len(committed).map_err(io_err(&path))?;
                self.active = Some(Active {
                    name,
                    file,
                    len: committed,
                });
                return Ok(());
            }
        }
        let name = format!("{:06}.lines", self.manifest.next_id);
        let path = self.segment_path(&name);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let mut next = self.manifest.clone();
        next.segments.push(name.clone());
        next.next_id += 1;
        write_manifest(&self.dir, &next)?;
        self.manifest = next;
        self.active = Some(Active { name, file, len: 0 });
        Ok(())
    }

    pub fn query(&self, spec: &QuerySpec) -> Result<Vec<Series>, StoreError> {
        query::evaluate(&self.index, spec)
    }

    /// Distinct full series keys of `measurement` matching `tag_filters`.
    pub fn list_series(
        &self,
        measurement: &str,
        tag_filters: &BTreeMap<String, String>,
    ) -> Vec<SeriesKey> {
        self.index
            .series()
            .filter(|(k, _)| k.measurement == measurement && k.matches(tag_filters))
            .map(|(k, _)| k.clone())
            .collect()
    }

    /// Field names stored for `key`.
    pub fn fields(&self, key: &SeriesKey) -> Vec<String> {
        self.index
            .get(key)
            .map(|f| f.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// Every value of one field of one exact series, in time order.
    pub fn field_values(&self, key: &SeriesKey, field: &str) -> Vec<(i64, f64)> {
        self.index
            .get(key)
            .and_then(|f| f.get(field))
            .map(|v| v.iter().map(|(&t, &x)| (t, x)).collect())
            .unwrap_or_default()
    }

    /// Number of stored (series, field, timestamp) values.
    pub fn value_count(&self) -> usize {
        self.index.value_count()
    }

    /// Rewrites all live data into a single fresh segment, dropping
    /// overwritten values. Old segments are removed only after the new
    /// manifest is in place.
    pub fn compact(&mut self) -> Result<(), StoreError> {
        if self.manifest.segments.is_empty() {
            return Ok(());
        }
        let points = self.index.to_points();
        let name = format!("{:06}.lines", self.manifest.next_id);
        let path = self.segment_path(&name);

        let written = (|| -> io::Result<u64> {
            let mut file = OpenOptions::new()
                .create_new(true)
                .write(true)
                .open(&path)?;
            let mut buf = String::new();
            for p in &points {
                buf.push_str(&encode_line(p));
                buf.push('\n');
            }
            if !points.is_empty() {
                buf.push_str(COMMIT_PREFIX);
                buf.push_str(&points.len().to_string());
                buf.push('\n');
            }
            file.write_all(buf.as_bytes())?;
            file.sync_all()?;
            Ok(buf.len() as u64)
        })();
        let len = match written {
            Ok(len) => len,
            Err(e) => {
                let _ = fs::remove_file(&path);
                return Err(io_err(&path)(e));
            }
        };

        let next = Manifest {
            schema_version: SCHEMA_VERSION.to_owned(),
            segments: vec![name.clone()],
            next_id: self.manifest.next_id + 1,
        };
        if let Err(e) = write_manifest(&self.dir, &next) {
            let _ = fs::remove_file(&path);
            return Err(e);
        }
        let old = std::mem::replace(&mut self.manifest, next);
        self.active = None;
        for seg in old.segments {
            let _ = fs::remove_file(self.segment_path(&seg));
        }
        self.tail_committed = Some((name, len));
        Ok(())
    }

    /// Bytes used by the manifest and all live segments.
    pub fn disk_usage(&self) -> Result<u64, StoreError> {
        let mut total = 0;
        let manifest = self.dir.join(MANIFEST);
        total += fs::metadata(&manifest).map_err(io_err(&manifest))?.len();
        for name in &self.manifest.segments {
            let path = self.segment_path(name);
            total += fs::metadata(&path).map_err(io_err(&path))?.len();
        }
        Ok(total)
    }

    pub fn segment_count(&self) -> usize {
        self.manifest.segments.len()
    }

    #[cfg(test)]
    fn inject_write_failure(&mut self) {
        self.fail_next_write = true;
    }
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), StoreError> {
    let tmp = dir.join("MANIFEST.tmp");
    let dst = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    (|| -> io::Result<()> {
        let mut f = File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, &dst)?;
        // Persist the rename itself.
        File::open(dir)?.sync_all()
    })()
    .map_err(io_err(&dst))
}

/// Applies every committed batch of a segment; returns the committed length.
fn replay(path: &Path, name: &str, index: &mut Index) -> Result<u64, StoreError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(0),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut pending = Vec::new();
    let mut committed = 0u64;
    let mut offset = 0u64;
    for (i, raw) in text.split_inclusive('\n').enumerate() {
        offset += raw.len() as u64;
        let Some(line) = raw.strip_suffix('\n') else {
            break; // torn final line
        };
        if let Some(count) = line.strip_prefix(COMMIT_PREFIX) {
            let count: usize = count.parse().map_err(|_| StoreError::Corrupt {
                segment: name.to_owned(),
                line: i + 1,
                reason: "bad commit marker".to_owned(),
            })?;
            if count != pending.len() {
                return Err(StoreError::Corrupt {
                    segment: name.to_owned(),
                    line: i + 1,
                    reason: format!("commit of {count} lines after {} lines", pending.len()),
                });
            }
            for p in pending.drain(..) {
                index.apply(&p);
            }
            committed = offset;
            continue;
        }
        match decode_line(line) {
            Ok(p) => pending.push(p),
            // A torn tail may end in garbage; only committed data must parse.
            Err(e) => {
                if text[offset as usize..].contains(COMMIT_PREFIX) {
                    return Err(StoreError::Corrupt {
                        segment: name.to_owned(),
                        line: i + 1,
                        reason: e.to_string(),
                    });
                }
                break;
            }
        }
    }
    Ok(committed)
}
