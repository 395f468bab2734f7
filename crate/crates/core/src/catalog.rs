//! Loading and indexing of the metric/activity catalog.
//!
//! A catalog is a "workbook directory" of CSV tables:
//!
//! ```text
//! <root>/catalog.txt                 single-line version string
//! <root>/manifest.csv                activity,file,deployment_layer,programming_model
//! <root>/application.csv             application-level SLO metrics
//! <root>/activities/<file>.csv       one metric table per workflow activity
//! <root>/resources/<resource_id>.csv one metric table per layer or programming model,
//!                                    preceded by a `#kind=...` comment line
//! ```
//!
//! Every metric table shares the columns
//! `metric_id,display_name,category,value_type,unit,range_min,range_max,enum_values,allowed_operators`.
//! Adding an activity is a matter of dropping in a table and a manifest row.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::model::{Operator, Scope};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const APPLICATION_FILE: &str = "application.csv";
pub const VERSION_FILE: &str = "catalog.txt";
pub const ACTIVITIES_DIR: &str = "activities";
pub const RESOURCES_DIR: &str = "resources";

pub const METRIC_COLUMNS: [&str; 9] = [
    "metric_id",
    "display_name",
    "category",
    "value_type",
    "unit",
    "range_min",
    "range_max",
    "enum_values",
    "allowed_operators",
];
pub const MANIFEST_COLUMNS: [&str; 4] = ["activity", "file", "deployment_layer", "programming_model"];

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog not found: {}", path.display())]
    CatalogNotFound { path: PathBuf },
    #[error("{}:{line}: {message}", file.display())]
    TableParseError {
        file: PathBuf,
        line: u64,
        message: String,
    },
    #[error("activity `{activity}` references {resource_id:?}: {reason}")]
    DanglingReference {
        activity: String,
        resource_id: String,
        reason: String,
    },
    #[error("duplicate identifier `{identifier}` in {}", file.display())]
    DuplicateIdentifier { file: PathBuf, identifier: String },
    #[error("catalog defines no activities")]
    EmptyCatalog,
    #[error("unknown activity `{0}`")]
    ActivityNotFound(String),
    #[error("reading {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Slo,
    Config,
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "slo" => Ok(Category::Slo),
            "config" => Ok(Category::Config),
            other => Err(format!("unknown category `{other}` (expected slo or config)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Numeric,
    Percentage,
    Enum,
    Boolean,
    String,
}

impl ValueType {
    pub const ALL: [ValueType; 5] = [
        ValueType::Numeric,
        ValueType::Percentage,
        ValueType::Enum,
        ValueType::Boolean,
        ValueType::String,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Numeric => "numeric",
            ValueType::Percentage => "percentage",
            ValueType::Enum => "enum",
            ValueType::Boolean => "boolean",
            ValueType::String => "string",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, ValueType::Numeric | ValueType::Percentage)
    }
}

impl FromStr for ValueType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ValueType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown value_type `{s}`"))
    }
}

/// Closed interval; either bound may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericRange {
    pub min: f64,
    pub max: f64,
}

impl NumericRange {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.min <= v && v <= self.max
    }
}

impl fmt::Display for NumericRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bound = |v: f64| {
            if v.is_finite() {
                crate::json::format_number(v)
            } else if v > 0.0 {
                "inf".to_owned()
            } else {
                "-inf".to_owned()
            }
        };
        write!(f, "[{}, {}]", bound(self.min), bound(self.max))
    }
}

// Infinite bounds become `null`.
impl Serialize for NumericRange {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let finite = |v: f64| v.is_finite().then_some(v);
        let mut s = serializer.serialize_struct("NumericRange", 2)?;
        s.serialize_field("min", &finite(self.min))?;
        s.serialize_field("max", &finite(self.max))?;
        s.end()
    }
}

/// One catalog row: a named SLO or configuration metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDefinition {
    pub metric_id: String,
    pub display_name: String,
    pub category: Category,
    pub value_type: ValueType,
    pub unit: Option<String>,
    pub numeric_range: Option<NumericRange>,
    pub enum_values: Option<Vec<String>>,
    pub allowed_operators: Vec<Operator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    DeploymentLayer,
    ProgrammingModel,
}

impl ResourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ResourceKind::DeploymentLayer => "deployment_layer",
            ResourceKind::ProgrammingModel => "programming_model",
        }
    }
}

impl FromStr for ResourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "deployment_layer" => Ok(ResourceKind::DeploymentLayer),
            "programming_model" => Ok(ResourceKind::ProgrammingModel),
            other => Err(format!("unknown resource kind `{other}`")),
        }
    }
}

/// A deployment layer or programming model and its metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceSchema {
    pub resource_id: String,
    pub kind: ResourceKind,
    pub display_name: String,
    pub metrics: Vec<MetricDefinition>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityDefinition {
    pub activity_name: String,
    pub deployment_layer: String,
    pub programming_model: Option<String>,
    pub own_metrics: Vec<MetricDefinition>,
}

/// An activity merged with the metrics of its layer and (optional) model.
/// Metric identity inside the schema is the pair (scope, metric_id).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivitySchema {
    pub activity_name: String,
    pub activity_metrics: Vec<MetricDefinition>,
    pub deployment_layer: ResourceSchema,
    pub programming_model: Option<ResourceSchema>,
}

impl ActivitySchema {
    /// Metrics visible in `scope`. The application scope is never part of
    /// an activity schema and yields an empty slice.
    pub fn metrics(&self, scope: Scope) -> &[MetricDefinition] {
        match scope {
            Scope::Activity => &self.activity_metrics,
            Scope::Layer => &self.deployment_layer.metrics,
            Scope::Model => self
                .programming_model
                .as_ref()
                .map(|m| m.metrics.as_slice())
                .unwrap_or_default(),
            Scope::Application => &[],
        }
    }

    pub fn find(&self, scope: Scope, metric_id: &str) -> Option<&MetricDefinition> {
        self.metrics(scope).iter().find(|m| m.metric_id == metric_id)
    }

    pub fn metric_count(&self) -> usize {
        [Scope::Activity, Scope::Layer, Scope::Model]
            .into_iter()
            .map(|s| self.metrics(s).len())
            .sum()
    }
}

/// Immutable, fully resolved catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    version: String,
    activities: IndexMap<String, ActivityDefinition>,
    resources: BTreeMap<String, ResourceSchema>,
    application_slos: Vec<MetricDefinition>,
}

impl Catalog {
    pub fn version(&self) -> &str {
        &self.version
    }

    /// Activity names in manifest order.
    pub fn list_activities(&self) -> Vec<&str> {
        self.activities.keys().map(String::as_str).collect()
    }

    pub fn activities(&self) -> impl Iterator<Item = &ActivityDefinition> {
        self.activities.values()
    }

    pub fn activity(&self, name: &str) -> Option<&ActivityDefinition> {
        self.activities.get(name)
    }

    pub fn resource(&self, resource_id: &str) -> Option<&ResourceSchema> {
        self.resources.get(resource_id)
    }

    pub fn resources(&self) -> impl Iterator<Item = &ResourceSchema> {
        self.resources.values()
    }

    pub fn list_application_slos(&self) -> &[MetricDefinition] {
        &self.application_slos
    }

    pub fn application_slo(&self, metric_id: &str) -> Option<&MetricDefinition> {
        self.application_slos.iter().find(|m| m.metric_id == metric_id)
    }

    pub fn resolve_activity_schema(&self, activity_name: &str) -> Result<ActivitySchema, CatalogError> {
        let def = self
            .activity(activity_name)
            .ok_or_else(|| CatalogError::ActivityNotFound(activity_name.to_owned()))?;
        // References were checked at load time.
        let layer = self.resources[&def.deployment_layer].clone();
        let model = def
            .programming_model
            .as_ref()
            .map(|id| self.resources[id].clone());
        Ok(ActivitySchema {
            activity_name: def.activity_name.clone(),
            activity_metrics: def.own_metrics.clone(),
            deployment_layer: layer,
            programming_model: model,
        })
    }
}

/// `^[a-z][a-z0-9_]*$`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Loads and validates the catalog rooted at `root`.
pub fn load_catalog(root: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(CatalogError::CatalogNotFound {
            path: root.to_path_buf(),
        });
    }

    let version_path = root.join(VERSION_FILE);
    let version = read_text(&version_path)?;
    let version = version.lines().next().unwrap_or("").trim().to_owned();
    if version.is_empty() {
        return Err(table_error(&version_path, 1, "empty version string"));
    }

    let resources = load_resources(&root.join(RESOURCES_DIR))?;
    let application_path = root.join(APPLICATION_FILE);
    let application_slos = parse_metric_table(&application_path, &read_text(&application_path)?, 0)?;

    let manifest_path = root.join(MANIFEST_FILE);
    let manifest = parse_manifest(&manifest_path, &read_text(&manifest_path)?)?;
    if manifest.is_empty() {
        return Err(CatalogError::EmptyCatalog);
    }

    let mut activities = IndexMap::with_capacity(manifest.len());
    for row in manifest {
        check_reference(
            &resources,
            &row.activity,
            &row.deployment_layer,
            ResourceKind::DeploymentLayer,
        )?;
        if let Some(model) = &row.programming_model {
            check_reference(&resources, &row.activity, model, ResourceKind::ProgrammingModel)?;
        }
        let table_path = root.join(ACTIVITIES_DIR).join(&row.file);
        let own_metrics = parse_metric_table(&table_path, &read_text(&table_path)?, 0)?;
        activities.insert(
            row.activity.clone(),
            ActivityDefinition {
                activity_name: row.activity,
                deployment_layer: row.deployment_layer,
                programming_model: row.programming_model,
                own_metrics,
            },
        );
    }

    Ok(Catalog {
        version,
        activities,
        resources,
        application_slos,
    })
}

fn check_reference(
    resources: &BTreeMap<String, ResourceSchema>,
    activity: &str,
    resource_id: &str,
    expected: ResourceKind,
) -> Result<(), CatalogError> {
    let reason = match resources.get(resource_id) {
        Some(r) if r.kind == expected => return Ok(()),
        Some(r) => format!("is a {}, expected a {}", r.kind.as_str(), expected.as_str()),
        None => format!("no {} with this id under {RESOURCES_DIR}/", expected.as_str()),
    };
    Err(CatalogError::DanglingReference {
        activity: activity.to_owned(),
        resource_id: resource_id.to_owned(),
        reason,
    })
}

fn read_text(path: &Path) -> Result<String, CatalogError> {
    match fs::read(path) {
        Ok(bytes) => String::from_utf8(bytes).map_err(|e| {
            table_error(
                path,
                0,
                format!("not valid UTF-8 (byte {})", e.utf8_error().valid_up_to()),
            )
        }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(CatalogError::CatalogNotFound {
            path: path.to_path_buf(),
        }),
        Err(source) => Err(CatalogError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}

fn table_error(file: &Path, line: u64, message: impl Into<String>) -> CatalogError {
    CatalogError::TableParseError {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn load_resources(dir: &Path) -> Result<BTreeMap<String, ResourceSchema>, CatalogError> {
    let entries = match fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(CatalogError::CatalogNotFound {
                path: dir.to_path_buf(),
            })
        }
        Err(source) => {
            return Err(CatalogError::Io {
                path: dir.to_path_buf(),
                source,
            })
        }
    };
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| CatalogError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if path.extension().is_some_and(|ext| ext == "csv") {
            paths.push(path);
        }
    }
    paths.sort();

    let mut resources = BTreeMap::new();
    for path in paths {
        let resource_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_owned();
        if !is_identifier(&resource_id) {
            return Err(table_error(
                &path,
                0,
                format!("resource file name `{resource_id}` is not a valid identifier"),
            ));
        }
        let schema = parse_resource_table(&path, &resource_id, &read_text(&path)?)?;
        resources.insert(resource_id, schema);
    }
    Ok(resources)
}

fn parse_resource_table(path: &Path, resource_id: &str, text: &str) -> Result<ResourceSchema, CatalogError> {
    let mut kind = None;
    let mut display_name = None;
    let mut body_start = 0;
    let mut comment_lines = 0u64;
    // Leading `#key=value` lines carry resource metadata.
    for line in text.split_inclusive('\n') {
        let Some(directive) = line.strip_prefix('#') else {
            break;
        };
        comment_lines += 1;
        body_start += line.len();
        let directive = directive.trim_end_matches(['\n', '\r']);
        match directive.split_once('=') {
            Some(("kind", v)) => {
                kind = Some(
                    v.parse::<ResourceKind>()
                        .map_err(|e| table_error(path, comment_lines, e))?,
                )
            }
            Some(("display_name", v)) if !v.trim().is_empty() => display_name = Some(v.trim().to_owned()),
            _ => {
                return Err(table_error(
                    path,
                    comment_lines,
                    format!("unrecognised directive `#{directive}`"),
                ))
            }
        }
    }
    let kind = kind.ok_or_else(|| {
        table_error(
            path,
            1,
            "missing `#kind=deployment_layer` or `#kind=programming_model` line",
        )
    })?;
    let metrics = parse_metric_table(path, &text[body_start..], comment_lines)?;
    Ok(ResourceSchema {
        resource_id: resource_id.to_owned(),
        kind,
        display_name: display_name.unwrap_or_else(|| humanize(resource_id)),
        metrics,
    })
}

fn humanize(id: &str) -> String {
    let spaced = id.replace('_', " ");
    let mut chars = spaced.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => spaced,
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes())
}

fn check_header(
    path: &Path,
    reader: &mut csv::Reader<&[u8]>,
    expected: &[&str],
    line_offset: u64,
) -> Result<(), CatalogError> {
    let line = line_offset + 1;
    let header = reader
        .headers()
        .map_err(|e| table_error(path, line, e.to_string()))?;
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(table_error(path, line, "missing header row"));
    }
    if header.iter().ne(expected.iter().copied()) {
        return Err(table_error(
            path,
            line,
            format!(
                "header `{}` does not match expected `{}`",
                header.iter().collect::<Vec<_>>().join(","),
                expected.join(",")
            ),
        ));
    }
    Ok(())
}

fn record_line(record: &csv::StringRecord, line_offset: u64) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0) + line_offset
}

fn csv_error(path: &Path, err: csv::Error, line_offset: u64) -> CatalogError {
    let line = err.position().map(|p| p.line()).unwrap_or(0) + line_offset;
    table_error(path, line, err.to_string())
}

/// Parses a metric table. `line_offset` counts lines preceding the header.
fn parse_metric_table(
    path: &Path,
    text: &str,
    line_offset: u64,
) -> Result<Vec<MetricDefinition>, CatalogError> {
    let mut reader = csv_reader(text);
    check_header(path, &mut reader, &METRIC_COLUMNS, line_offset)?;
    let mut metrics: Vec<MetricDefinition> = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e, line_offset))?;
        let line = record_line(&record, line_offset);
        let metric = parse_metric_row(&record).map_err(|msg| table_error(path, line, msg))?;
        if !seen.insert(metric.metric_id.clone()) {
            return Err(CatalogError::DuplicateIdentifier {
                file: path.to_path_buf(),
                identifier: metric.metric_id,
            });
        }
        metrics.push(metric);
    }
    Ok(metrics)
}

fn parse_bound(cell: &str, column: &str) -> Result<Option<f64>, String> {
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("{column} `{cell}` is not a finite number")),
    }
}

fn split_list(cell: &str) -> Vec<&str> {
    if cell.is_empty() {
        Vec::new()
    } else {
        cell.split('|').collect()
    }
}

fn parse_metric_row(record: &csv::StringRecord) -> Result<MetricDefinition, String> {
    let cell = |i: usize| record.get(i).unwrap_or("");

    let metric_id = cell(0);
    if !is_identifier(metric_id) {
        return Err(format!("metric_id `{metric_id}` must match ^[a-z][a-z0-9_]*$"));
    }
    let display_name = cell(1);
    if display_name.trim().is_empty() {
        return Err(format!("metric `{metric_id}` has an empty display_name"));
    }
    let category: Category = cell(2).parse()?;
    let value_type: ValueType = cell(3).parse()?;
    let unit = (!cell(4).is_empty()).then(|| cell(4).to_owned());

    let min = parse_bound(cell(5), "range_min")?;
    let max = parse_bound(cell(6), "range_max")?;
    let numeric_range = match value_type {
        ValueType::Numeric | ValueType::Percentage => {
            let (lo, hi) = if value_type == ValueType::Percentage {
                (min.unwrap_or(0.0), max.unwrap_or(100.0))
            } else {
                (min.unwrap_or(f64::NEG_INFINITY), max.unwrap_or(f64::INFINITY))
            };
            if lo > hi {
                return Err(format!("range_min {lo} exceeds range_max {hi}"));
            }
            if value_type == ValueType::Percentage && (lo < 0.0 || hi > 100.0) {
                return Err("percentage range must lie within [0, 100]".to_owned());
            }
            Some(NumericRange::new(lo, hi))
        }
        _ => {
            if min.is_some() || max.is_some() {
                return Err(format!(
                    "range is only allowed on numeric metrics, not {}",
                    value_type.as_str()
                ));
            }
            None
        }
    };

    let enum_cells = split_list(cell(7));
    let enum_values = if value_type == ValueType::Enum {
        if enum_cells.is_empty() {
            return Err(format!("enum metric `{metric_id}` lists no enum_values"));
        }
        let mut seen = HashSet::new();
        for v in &enum_cells {
            if v.is_empty() {
                return Err("enum_values contains an empty entry".to_owned());
            }
            if !seen.insert(*v) {
                return Err(format!("enum value `{v}` repeated"));
            }
        }
        Some(enum_cells.iter().map(|s| s.to_string()).collect())
    } else {
        if !enum_cells.is_empty() {
            return Err(format!("enum_values given for non-enum metric `{metric_id}`"));
        }
        None
    };

    let op_cells = split_list(cell(8));
    if op_cells.is_empty() {
        return Err(format!("metric `{metric_id}` allows no operators"));
    }
    let mut allowed_operators = Vec::with_capacity(op_cells.len());
    for token in op_cells {
        let op: Operator = token
            .parse()
            .map_err(|e: crate::model::UnknownToken| e.to_string())?;
        if allowed_operators.contains(&op) {
            return Err(format!("operator `{op}` repeated"));
        }
        if !value_type.is_numeric() && op.is_ordering() {
            return Err(format!(
                "operator `{op}` is not applicable to {} metric `{metric_id}`",
                value_type.as_str()
            ));
        }
        allowed_operators.push(op);
    }

    Ok(MetricDefinition {
        metric_id: metric_id.to_owned(),
        display_name: display_name.to_owned(),
        category,
        value_type,
        unit,
        numeric_range,
        enum_values,
        allowed_operators,
    })
}

struct ManifestRow {
    activity: String,
    file: String,
    deployment_layer: String,
    programming_model: Option<String>,
}

fn parse_manifest(path: &Path, text: &str) -> Result<Vec<ManifestRow>, CatalogError> {
    let mut reader = csv_reader(text);
    check_header(path, &mut reader, &MANIFEST_COLUMNS, 0)?;
    let mut rows: Vec<ManifestRow> = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e, 0))?;
        let line = record_line(&record, 0);
        let err = |msg: String| table_error(path, line, msg);

        let activity = record[0].to_owned();
        if activity.trim().is_empty() {
            return Err(err("empty activity name".to_owned()));
        }
        let file = &record[1];
        if file.is_empty() || file.contains(['/', '\\']) || file.starts_with('.') {
            return Err(err(format!("`{file}` is not a plain file name")));
        }
        let file = if file.ends_with(".csv") {
            file.to_owned()
        } else {
            format!("{file}.csv")
        };
        let deployment_layer = record[2].to_owned();
        if !is_identifier(&deployment_layer) {
            return Err(err(format!(
                "deployment_layer `{deployment_layer}` is not a valid identifier"
            )));
        }
        let programming_model = match &record[3] {
            "" => None,
            id if is_identifier(id) => Some(id.to_owned()),
            id => return Err(err(format!("programming_model `{id}` is not a valid identifier"))),
        };
        if !seen.insert(activity.clone()) {
            return Err(CatalogError::DuplicateIdentifier {
                file: path.to_path_buf(),
                identifier: activity,
            });
        }
        rows.push(ManifestRow {
            activity,
            file,
            deployment_layer,
            programming_model,
        });
    }
    Ok(rows)
}
