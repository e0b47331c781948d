//! Annotations, dashboards and snapshots kept as JSON documents next to the
//! store.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use contbench::detector::Annotation;
use contbench::model::SCHEMA_VERSION;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dashboard::Dashboard;

const ANNOTATIONS: &str = "annotations.json";
const DASHBOARDS: &str = "dashboards.json";
const SNAPSHOTS: &str = "snapshots";

#[derive(Debug, Serialize, Deserialize)]
struct Document<T> {
    schema_version: String,
    next_id: u64,
    items: T,
}

#[derive(Debug)]
pub struct Catalog {
    dir: PathBuf,
    annotations: Vec<Annotation>,
    next_annotation: u64,
    dashboards: BTreeMap<String, Dashboard>,
    next_dashboard: u64,
}

/// Writes `bytes` to `path` through a synced temporary file and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(parent) = path.parent() {
        fs::File::open(parent)?.sync_all()?;
    }
    Ok(())
}

fn load<T: DeserializeOwned + Default>(path: &Path) -> io::Result<(T, u64)> {
    match fs::read(path) {
        Ok(bytes) => {
            let doc: Document<T> = serde_json::from_slice(&bytes).map_err(|e| {
                io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}: {e}", path.display()),
                )
            })?;
            if doc.schema_version != SCHEMA_VERSION {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!(
                        "{}: unsupported schema version `{}`",
                        path.display(),
                        doc.schema_version
                    ),
                ));
            }
            Ok((doc.items, doc.next_id))
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok((T::default(), 1)),
        Err(e) => Err(e),
    }
}

fn save<T: Serialize>(path: &Path, items: &T, next_id: u64) -> io::Result<()> {
    let doc = Document {
        schema_version: SCHEMA_VERSION.to_owned(),
        next_id,
        items,
    };
    let text = serde_json::to_vec_pretty(&doc).map_err(io::Error::other)?;
    write_atomic(path, &text)
}

impl Catalog {
    pub fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir.join(SNAPSHOTS))?;
        let (annotations, next_annotation) = load(&dir.join(ANNOTATIONS))?;
        let (dashboards, next_dashboard) = load(&dir.join(DASHBOARDS))?;
        Ok(Self {
            dir: dir.to_owned(),
            annotations,
            next_annotation,
            dashboards,
            next_dashboard,
        })
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    /// Assigns an id and persists; on failure the catalog is unchanged.
    pub fn add_annotation(&mut self, mut a: Annotation) -> io::Result<Annotation> {
        a.id = format!("a{}", self.next_annotation);
        let mut next = self.annotations.clone();
        next.push(a.clone());
        save(&self.dir.join(ANNOTATIONS), &next, self.next_annotation + 1)?;
        self.annotations = next;
        self.next_annotation += 1;
        Ok(a)
    }

    /// `Ok(false)` if no annotation has this id.
    pub fn delete_annotation(&mut self, id: &str) -> io::Result<bool> {
        let Some(pos) = self.annotations.iter().position(|a| a.id == id) else {
            return Ok(false);
        };
        let mut next = self.annotations.clone();
        next.remove(pos);
        save(&self.dir.join(ANNOTATIONS), &next, self.next_annotation)?;
        self.annotations = next;
        Ok(true)
    }

    pub fn dashboards(&self) -> impl Iterator<Item = &Dashboard> {
        self.dashboards.values()
    }

    pub fn dashboard(&self, id: &str) -> Option<&Dashboard> {
        self.dashboards.get(id)
    }

    /// Inserts or replaces; an empty id is replaced by a fresh one.
    pub fn put_dashboard(&mut self, mut d: Dashboard) -> io::Result<Dashboard> {
        let mut next_id = self.next_dashboard;
        if d.id.is_empty() {
            loop {
                let candidate = format!("d{next_id}");
                next_id += 1;
                if !self.dashboards.contains_key(&candidate) {
                    d.id = candidate;
                    break;
                }
            }
        }
        let mut next = self.dashboards.clone();
        next.insert(d.id.clone(), d.clone());
        save(&self.dir.join(DASHBOARDS), &next, next_id)?;
        self.dashboards = next;
        self.next_dashboard = next_id;
        Ok(d)
    }

    pub fn delete_dashboard(&mut self, id: &str) -> io::Result<bool> {
        if !self.dashboards.contains_key(id) {
            return Ok(false);
        }
        let mut next = self.dashboards.clone();
        next.remove(id);
        save(&self.dir.join(DASHBOARDS), &next, self.next_dashboard)?;
        self.dashboards = next;
        Ok(true)
    }

    fn snapshot_path(&self, id: &str) -> Option<PathBuf> {
        let safe = !id.is_empty() && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-');
        safe.then(|| self.dir.join(SNAPSHOTS).join(format!("{id}.json")))
    }

    pub fn save_snapshot(&self, id: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self
            .snapshot_path(id)
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "bad snapshot id"))?;
        write_atomic(&path, bytes)
    }

    /// The stored document bytes, unchanged since creation.
    pub fn snapshot(&self, id: &str) -> io::Result<Option<Vec<u8>>> {
        let Some(path) = self.snapshot_path(id) else {
            return Ok(None);
        };
        match fs::read(path) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }
}
