//! Dashboards, their template variables and self-contained snapshots.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use contbench::store::{Aggregate, QuerySpec, Series, Store};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dashboard {
    #[serde(default)]
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub variables: Vec<Variable>,
    #[serde(default)]
    pub panels: Vec<Panel>,
    #[serde(default)]
    pub default_time_range: TimeRange,
}

/// A template variable whose options are the stored values of one tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub measurement: String,
    pub tag: String,
    #[serde(default)]
    pub tag_filters: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub from: String,
    pub to: String,
}

impl Default for TimeRange {
    fn default() -> Self {
        Self {
            from: "now-7d".to_owned(),
            to: "now".to_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Display {
    #[default]
    Timeseries,
    Table,
    Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub id: String,
    #[serde(default)]
    pub title: String,
    /// Optional row header; panels keep their list order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<String>,
    pub query_template: PanelQuery,
    #[serde(default)]
    pub display: Display,
}

/// A query without its time range; tag filter values may be `$variable`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelQuery {
    pub measurement: String,
    #[serde(default)]
    pub tag_filters: BTreeMap<String, String>,
    #[serde(default)]
    pub fields: Vec<String>,
    #[serde(default)]
    pub group_by: Vec<String>,
    #[serde(default)]
    pub aggregate: Aggregate,
    #[serde(default)]
    pub bucket_ns: Option<i64>,
}

fn placeholder(value: &str) -> Option<&str> {
    value.strip_prefix('$')
}

impl PanelQuery {
    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.tag_filters.values().filter_map(|v| placeholder(v))
    }

    /// The concrete query for `[start, end]` with variables substituted.
    pub fn resolve(
        &self,
        start_ns: i64,
        end_ns: i64,
        values: &BTreeMap<String, String>,
    ) -> Result<QuerySpec, String> {
        let mut tag_filters = BTreeMap::new();
        for (k, v) in &self.tag_filters {
            let v = match placeholder(v) {
                Some(name) => values
                    .get(name)
                    .cloned()
                    .ok_or_else(|| format!("unresolved variable `{name}`"))?,
                None => v.clone(),
            };
            tag_filters.insert(k.clone(), v);
        }
        Ok(QuerySpec {
            measurement: self.measurement.clone(),
            tag_filters,
            fields: self.fields.clone(),
            start_ns,
            end_ns,
            group_by: self.group_by.clone(),
            aggregate: self.aggregate,
            bucket_ns: self.bucket_ns,
        })
    }
}

impl Dashboard {
    pub fn validate(&self) -> Result<(), String> {
        if self.title.trim().is_empty() {
            return Err("dashboard title must not be empty".to_owned());
        }
        let mut names = HashSet::new();
        for v in &self.variables {
            if v.name.is_empty() || v.measurement.is_empty() || v.tag.is_empty() {
                return Err("variables need a name, a measurement and a tag".to_owned());
            }
            if !names.insert(v.name.as_str()) {
                return Err(format!("variable `{}` is declared twice", v.name));
            }
        }
        let mut ids = HashSet::new();
        for p in &self.panels {
            if !ids.insert(p.id.as_str()) {
                return Err(format!("panel id `{}` is not unique", p.id));
            }
            if p.query_template.measurement.is_empty() {
                return Err(format!("panel `{}` has no measurement", p.id));
            }
            for name in p.query_template.placeholders() {
                if !names.contains(name) {
                    return Err(format!(
                        "panel `{}` uses undeclared variable `{name}`",
                        p.id
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Sorted distinct values of the variable's tag among stored series.
pub fn variable_options(store: &Store, variable: &Variable) -> Vec<String> {
    store
        .list_series(&variable.measurement, &variable.tag_filters)
        .into_iter()
        .filter_map(|k| k.tags.get(&variable.tag).cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Picks a value for every variable: the requested one if it is an option,
/// otherwise the first option.
pub fn resolve_variables(
    store: &Store,
    dashboard: &Dashboard,
    requested: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, String>, String> {
    if let Some(unknown) = requested
        .keys()
        .find(|k| !dashboard.variables.iter().any(|v| &v.name == *k))
    {
        return Err(format!("dashboard has no variable `{unknown}`"));
    }
    let mut out = BTreeMap::new();
    for v in &dashboard.variables {
        let options = variable_options(store, v);
        let value = match requested.get(&v.name) {
            Some(value) if options.contains(value) => value.clone(),
            Some(value) => {
                return Err(format!(
                    "unresolved variable `{}`: `{value}` is not one of its {} options",
                    v.name,
                    options.len()
                ))
            }
            None => options
                .into_iter()
                .next()
                .ok_or_else(|| format!("unresolved variable `{}`: no stored values", v.name))?,
        };
        out.insert(v.name.clone(), value);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelData {
    pub panel_id: String,
    pub query: QuerySpec,
    pub series: Vec<Series>,
}

/// Everything needed to render a dashboard view without the store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema_version: String,
    pub id: String,
    pub created_ns: i64,
    pub start_ns: i64,
    pub end_ns: i64,
    pub variables: BTreeMap<String, String>,
    pub dashboard: Dashboard,
    pub panels: Vec<PanelData>,
}

/// Materializes every panel of `dashboard` over `(start_ns, end_ns]`.
pub fn materialize(
    store: &Store,
    dashboard: &Dashboard,
    start_ns: i64,
    end_ns: i64,
    requested: &BTreeMap<String, String>,
) -> Result<(BTreeMap<String, String>, Vec<PanelData>), String> {
    let variables = resolve_variables(store, dashboard, requested)?;
    let mut panels = Vec::with_capacity(dashboard.panels.len());
    for p in &dashboard.panels {
        let query = p.query_template.resolve(start_ns, end_ns, &variables)?;
        let series = store
            .query(&query)
            .map_err(|e| format!("panel `{}`: {e}", p.id))?;
        panels.push(PanelData {
            panel_id: p.id.clone(),
            query,
            series,
        });
    }
    Ok((variables, panels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(id: &str, branch: &str) -> Panel {
        Panel {
            id: id.into(),
            title: String::new(),
            row: None,
            query_template: PanelQuery {
                measurement: "benchmark".into(),
                tag_filters: [("branch".to_owned(), branch.to_owned())].into(),
                fields: vec![],
                group_by: vec![],
                aggregate: Aggregate::None,
                bucket_ns: None,
            },
            display: Display::Timeseries,
        }
    }

    fn dashboard(panels: Vec<Panel>) -> Dashboard {
        Dashboard {
            id: "d".into(),
            title: "Nightly".into(),
            variables: vec![Variable {
                name: "branch".into(),
                measurement: "benchmark".into(),
                tag: "branch".into(),
                tag_filters: BTreeMap::new(),
            }],
            panels,
            default_time_range: TimeRange::default(),
        }
    }

    #[test]
    fn placeholders_must_be_declared() {
        assert!(dashboard(vec![panel("p", "$branch")]).validate().is_ok());
        let err = dashboard(vec![panel("p", "$machine")])
            .validate()
            .unwrap_err();
        assert!(err.contains("machine"), "{err}");
    }

    #[test]
    fn panel_ids_are_unique() {
        let d = dashboard(vec![panel("p", "master"), panel("p", "dev")]);
        assert!(d.validate().unwrap_err().contains("not unique"));
    }

    #[test]
    fn resolve_substitutes_and_names_missing() {
        let q = panel("p", "$branch").query_template;
        let values = [("branch".to_owned(), "dev".to_owned())].into();
        assert_eq!(
            q.resolve(0, 1, &values).unwrap().tag_filters["branch"],
            "dev"
        );
        let err = q.resolve(0, 1, &BTreeMap::new()).unwrap_err();
        assert!(err.contains("`branch`"));
    }
}
