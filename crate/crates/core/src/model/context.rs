use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Environment a run was measured in; becomes tags on every point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunContext {
    pub machine: String,
    pub commit: String,
    pub branch: String,
    pub compiler: String,
    pub build_type: String,
    /// Additional user-supplied tags.
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
    /// UNIX epoch nanoseconds.
    pub timestamp_ns: i64,
}

impl RunContext {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in self.named_tags() {
            if value.is_empty() {
                return Err(ModelError::EmptyContextTag(name));
            }
            if value.contains('\n') {
                return Err(ModelError::InvalidName {
                    what: "context tag",
                    value: value.to_owned(),
                });
            }
        }
        for (k, v) in &self.extra {
            for s in [k, v] {
                if s.is_empty() || s.contains('\n') {
                    return Err(ModelError::InvalidName {
                        what: "extra tag",
                        value: s.clone(),
                    });
                }
            }
        }
        if self.timestamp_ns <= 0 {
            return Err(ModelError::InvalidTimestamp(self.timestamp_ns));
        }
        Ok(())
    }

    fn named_tags(&self) -> [(&'static str, &str); 5] {
        [
            ("machine", &self.machine),
            ("commit", &self.commit),
            ("branch", &self.branch),
            ("compiler", &self.compiler),
            ("build_type", &self.build_type),
        ]
    }

    /// The context as a tag map; the named tags win over `extra`.
    pub fn tags(&self) -> BTreeMap<String, String> {
        let mut tags = self.extra.clone();
        for (k, v) in self.named_tags() {
            tags.insert(k.to_owned(), v.to_owned());
        }
        tags
    }

    pub fn now_ns() -> i64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| i64::try_from(d.as_nanos()).unwrap_or(i64::MAX))
            .unwrap_or(1)
    }
}
