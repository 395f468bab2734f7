//! SLA document assembly, validation and canonical JSON (de)serialization.
//!
//! Canonical form: keys in the fixed order below, no insignificant
//! whitespace, numbers in shortest round-trip form, activities in
//! topological order and edges sorted by `(from, to)`.
//!
//! ```text
//! {"schema_version","application":{"type","agreement_start","agreement_end"},
//!  "slos":[constraint],
//!  "workflow":{"activities":[{"id","name",
//!                             "deployment_layer":{"name","constraints":[constraint]},
//!                             "programming_model":{"name","constraints":[constraint]}|null,
//!                             "constraints":[constraint]}],
//!              "edges":[{"from","to"}]}}
//! constraint = {"metric_id","priority","operator","value","unit"}
//! ```

use serde::Serialize;
use serde_json::{Map, Value as Json};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::json::{format_number, write_string};
use crate::model::{
    check_constraint, format_timestamp, parse_timestamp, sort_findings, Constraint, Finding, FindingCode,
    Operator, Priority, Scope, Severity, SlaHeader, Value,
};
use crate::workflow::{topological_indices, validate_workflow, ActivityNode, Binding, Edge, Workflow};

pub const SCHEMA_VERSION: &str = "1.0";

/// A complete SLA: header, application-level SLOs and the bound workflow.
#[derive(Debug, Clone, PartialEq)]
pub struct SlaDocument {
    pub schema_version: String,
    pub header: SlaHeader,
    pub app_slos: Vec<Constraint>,
    pub workflow: Workflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn from_findings(mut findings: Vec<Finding>) -> Self {
        sort_findings(&mut findings);
        let valid = findings.iter().all(|f| f.severity != Severity::Error);
        Self { valid, findings }
    }

    pub fn has_code(&self, code: FindingCode) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("agreement window is inverted: start {start} is not before end {end}")]
    WindowInverted { start: String, end: String },
}

/// Assembles a document. The workflow is put into canonical order.
pub fn compose(
    header: SlaHeader,
    app_slos: Vec<Constraint>,
    workflow: Workflow,
) -> Result<SlaDocument, ComposeError> {
    if !header.window_is_valid() {
        return Err(ComposeError::WindowInverted {
            start: format_timestamp(&header.agreement_start),
            end: format_timestamp(&header.agreement_end),
        });
    }
    Ok(SlaDocument {
        schema_version: SCHEMA_VERSION.to_owned(),
        header,
        app_slos,
        workflow: workflow.into_canonical_order(),
    })
}

/// Checks the header, the application SLOs against the catalog's
/// application metrics, and the workflow.
pub fn validate_document(catalog: &Catalog, doc: &SlaDocument) -> ValidationReport {
    let mut findings = Vec::new();

    if doc.schema_version != SCHEMA_VERSION {
        findings.push(Finding::error(
            FindingCode::SchemaVersionUnsupported,
            "schema_version",
            format!(
                "schema version `{}` is not supported (expected {SCHEMA_VERSION})",
                doc.schema_version
            ),
        ));
    }
    if !doc.header.window_is_valid() {
        findings.push(Finding::error(
            FindingCode::WindowInverted,
            "header",
            format!(
                "agreement_start {} is not before agreement_end {}",
                format_timestamp(&doc.header.agreement_start),
                format_timestamp(&doc.header.agreement_end)
            ),
        ));
    }
    for (k, c) in doc.app_slos.iter().enumerate() {
        let path = format!("app_slos[{k}]");
        match catalog.application_slo(&c.metric_id) {
            Some(def) => findings.extend(check_constraint(def, c, &path)),
            None => findings.push(Finding::error(
                FindingCode::UnknownMetric,
                path,
                format!("`{}` is not an application-level SLO", c.metric_id),
            )),
        }
    }
    findings.extend(validate_workflow(catalog, &doc.workflow));
    ValidationReport::from_findings(findings)
}

/// Parses `bytes` and validates the result. An unsupported schema version
/// is reported as a finding rather than an error; syntax and shape errors
/// are returned as is.
pub fn validate_bytes(catalog: &Catalog, bytes: &[u8]) -> Result<ValidationReport, ParseError> {
    match parse(bytes) {
        Ok(doc) => Ok(validate_document(catalog, &doc)),
        Err(ParseError::SchemaVersionUnsupported(v)) => {
            Ok(ValidationReport::from_findings(vec![Finding::error(
                FindingCode::SchemaVersionUnsupported,
                "schema_version",
                format!("schema version `{v}` is not supported (expected {SCHEMA_VERSION})"),
            )]))
        }
        Err(e) => Err(e),
    }
}

/// Canonical UTF-8 JSON bytes of `doc`. Does not validate.
pub fn serialize_canonical(doc: &SlaDocument) -> Vec<u8> {
    let mut out = String::with_capacity(1024);
    out.push_str("{\"schema_version\":");
    write_string(&mut out, &doc.schema_version);
    out.push_str(",\"application\":{\"type\":");
    write_string(&mut out, &doc.header.application_type);
    out.push_str(",\"agreement_start\":");
    write_string(&mut out, &format_timestamp(&doc.header.agreement_start));
    out.push_str(",\"agreement_end\":");
    write_string(&mut out, &format_timestamp(&doc.header.agreement_end));
    out.push_str("},\"slos\":");
    write_constraints(&mut out, &doc.app_slos);

    out.push_str(",\"workflow\":{\"activities\":[");
    let wf = &doc.workflow;
    for (n, i) in topological_indices(&wf.nodes, &wf.edges).into_iter().enumerate() {
        if n > 0 {
            out.push(',');
        }
        write_node(&mut out, &wf.nodes[i]);
    }
    out.push_str("],\"edges\":[");
    let mut edges: Vec<&Edge> = wf.edges.iter().collect();
    edges.sort();
    for (n, edge) in edges.into_iter().enumerate() {
        if n > 0 {
            out.push(',');
        }
        out.push_str("{\"from\":");
        write_string(&mut out, &edge.from);
        out.push_str(",\"to\":");
        write_string(&mut out, &edge.to);
        out.push('}');
    }
    out.push_str("]}}");
    out.into_bytes()
}

fn write_node(out: &mut String, node: &ActivityNode) {
    out.push_str("{\"id\":");
    write_string(out, &node.node_id);
    out.push_str(",\"name\":");
    write_string(out, &node.activity_name);
    out.push_str(",\"deployment_layer\":");
    write_binding(out, &node.layer);
    out.push_str(",\"programming_model\":");
    match &node.model {
        Some(model) => write_binding(out, model),
        None => out.push_str("null"),
    }
    out.push_str(",\"constraints\":");
    write_constraints(out, &node.activity_constraints);
    out.push('}');
}

fn write_binding(out: &mut String, binding: &Binding) {
    out.push_str("{\"name\":");
    write_string(out, &binding.name);
    out.push_str(",\"constraints\":");
    write_constraints(out, &binding.constraints);
    out.push('}');
}

fn write_constraints(out: &mut String, constraints: &[Constraint]) {
    out.push('[');
    for (n, c) in constraints.iter().enumerate() {
        if n > 0 {
            out.push(',');
        }
        out.push_str("{\"metric_id\":");
        write_string(out, &c.metric_id);
        out.push_str(",\"priority\":");
        write_string(out, c.priority.as_str());
        out.push_str(",\"operator\":");
        write_string(out, c.operator.as_str());
        out.push_str(",\"value\":");
        match &c.value {
            Value::Number(v) => out.push_str(&format_number(*v)),
            Value::Text(s) => write_string(out, s),
            Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        }
        out.push_str(",\"unit\":");
        match &c.unit {
            Some(u) => write_string(out, u),
            None => out.push_str("null"),
        }
        out.push('}');
    }
    out.push(']');
}

/// Lowercase hex SHA-256 of the canonical bytes.
pub fn document_id(doc: &SlaDocument) -> String {
    hex::encode(Sha256::digest(serialize_canonical(doc)))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    JsonSyntaxError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema version `{0}` (expected {SCHEMA_VERSION})")]
    SchemaVersionUnsupported(String),
    #[error("{path}: {message}")]
    SchemaShapeError { path: String, message: String },
}

impl ParseError {
    fn shape(path: &str, message: impl Into<String>) -> Self {
        ParseError::SchemaShapeError {
            path: path.to_owned(),
            message: message.into(),
        }
    }
}

/// Parses a document regardless of key order or whitespace. Every field of
/// the canonical shape is required and unknown fields are rejected.
pub fn parse(bytes: &[u8]) -> Result<SlaDocument, ParseError> {
    let root: Json = serde_json::from_slice(bytes).map_err(|e| ParseError::JsonSyntaxError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    document_from_json(&root)
}

/// Same as [`parse`] for an already decoded JSON value.
pub fn document_from_json(root: &Json) -> Result<SlaDocument, ParseError> {
    let obj = as_object(root, "$")?;
    match obj.get("schema_version") {
        Some(Json::String(v)) if v != SCHEMA_VERSION => {
            return Err(ParseError::SchemaVersionUnsupported(v.clone()))
        }
        _ => {}
    }
    expect_keys(obj, "$", &["schema_version", "application", "slos", "workflow"])?;
    let schema_version = as_str(&obj["schema_version"], "$.schema_version")?.to_owned();

    let app = as_object(&obj["application"], "$.application")?;
    expect_keys(
        app,
        "$.application",
        &["type", "agreement_start", "agreement_end"],
    )?;
    let header = SlaHeader {
        application_type: as_str(&app["type"], "$.application.type")?.to_owned(),
        agreement_start: timestamp(&app["agreement_start"], "$.application.agreement_start")?,
        agreement_end: timestamp(&app["agreement_end"], "$.application.agreement_end")?,
    };

    let app_slos = constraints(&obj["slos"], "$.slos", Scope::Application)?;

    let wf = as_object(&obj["workflow"], "$.workflow")?;
    expect_keys(wf, "$.workflow", &["activities", "edges"])?;
    let nodes = as_array(&wf["activities"], "$.workflow.activities")?
        .iter()
        .enumerate()
        .map(|(i, v)| node(v, &format!("$.workflow.activities[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let edges = as_array(&wf["edges"], "$.workflow.edges")?
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let path = format!("$.workflow.edges[{j}]");
            let e = as_object(v, &path)?;
            expect_keys(e, &path, &["from", "to"])?;
            Ok(Edge::new(
                as_str(&e["from"], &format!("{path}.from"))?,
                as_str(&e["to"], &format!("{path}.to"))?,
            ))
        })
        .collect::<Result<Vec<_>, ParseError>>()?;

    Ok(SlaDocument {
        schema_version,
        header,
        app_slos,
        workflow: Workflow { nodes, edges },
    })
}

fn node(v: &Json, path: &str) -> Result<ActivityNode, ParseError> {
    let obj = as_object(v, path)?;
    expect_keys(
        obj,
        path,
        &[
            "id",
            "name",
            "deployment_layer",
            "programming_model",
            "constraints",
        ],
    )?;
    let model = match &obj["programming_model"] {
        Json::Null => None,
        other => Some(binding(
            other,
            &format!("{path}.programming_model"),
            Scope::Model,
        )?),
    };
    Ok(ActivityNode {
        node_id: as_str(&obj["id"], &format!("{path}.id"))?.to_owned(),
        activity_name: as_str(&obj["name"], &format!("{path}.name"))?.to_owned(),
        layer: binding(
            &obj["deployment_layer"],
            &format!("{path}.deployment_layer"),
            Scope::Layer,
        )?,
        model,
        activity_constraints: constraints(
            &obj["constraints"],
            &format!("{path}.constraints"),
            Scope::Activity,
        )?,
    })
}

fn binding(v: &Json, path: &str, scope: Scope) -> Result<Binding, ParseError> {
    let obj = as_object(v, path)?;
    expect_keys(obj, path, &["name", "constraints"])?;
    Ok(Binding {
        name: as_str(&obj["name"], &format!("{path}.name"))?.to_owned(),
        constraints: constraints(&obj["constraints"], &format!("{path}.constraints"), scope)?,
    })
}

fn constraints(v: &Json, path: &str, scope: Scope) -> Result<Vec<Constraint>, ParseError> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(k, item)| constraint(item, &format!("{path}[{k}]"), scope))
        .collect()
}

fn constraint(v: &Json, path: &str, scope: Scope) -> Result<Constraint, ParseError> {
    let obj = as_object(v, path)?;
    expect_keys(obj, path, &["metric_id", "priority", "operator", "value", "unit"])?;
    let priority_path = format!("{path}.priority");
    let priority: Priority = as_str(&obj["priority"], &priority_path)?
        .parse()
        .map_err(|e: crate::model::UnknownToken| ParseError::shape(&priority_path, e.to_string()))?;
    let operator_path = format!("{path}.operator");
    let operator: Operator = as_str(&obj["operator"], &operator_path)?
        .parse()
        .map_err(|e: crate::model::UnknownToken| ParseError::shape(&operator_path, e.to_string()))?;
    let value = match &obj["value"] {
        Json::Number(n) => Value::Number(
            n.as_f64()
                .filter(|f| f.is_finite())
                .ok_or_else(|| ParseError::shape(&format!("{path}.value"), "number is not representable"))?,
        ),
        Json::String(s) => Value::Text(s.clone()),
        Json::Bool(b) => Value::Bool(*b),
        _ => {
            return Err(ParseError::shape(
                &format!("{path}.value"),
                "expected a number, string or boolean",
            ))
        }
    };
    let unit = match &obj["unit"] {
        Json::Null => None,
        Json::String(s) => Some(s.clone()),
        _ => {
            return Err(ParseError::shape(
                &format!("{path}.unit"),
                "expected a string or null",
            ))
        }
    };
    Ok(Constraint {
        metric_id: as_str(&obj["metric_id"], &format!("{path}.metric_id"))?.to_owned(),
        scope,
        priority,
        operator,
        value,
        unit,
    })
}

fn expect_keys(obj: &Map<String, Json>, path: &str, keys: &[&str]) -> Result<(), ParseError> {
    if let Some(missing) = keys.iter().find(|k| !obj.contains_key(**k)) {
        return Err(ParseError::shape(path, format!("missing field `{missing}`")));
    }
    if let Some(extra) = obj.keys().find(|k| !keys.contains(&k.as_str())) {
        return Err(ParseError::shape(path, format!("unexpected field `{extra}`")));
    }
    Ok(())
}

fn as_object<'a>(v: &'a Json, path: &str) -> Result<&'a Map<String, Json>, ParseError> {
    v.as_object()
        .ok_or_else(|| ParseError::shape(path, "expected an object"))
}

fn as_array<'a>(v: &'a Json, path: &str) -> Result<&'a Vec<Json>, ParseError> {
    v.as_array()
        .ok_or_else(|| ParseError::shape(path, "expected an array"))
}

fn as_str<'a>(v: &'a Json, path: &str) -> Result<&'a str, ParseError> {
    v.as_str()
        .ok_or_else(|| ParseError::shape(path, "expected a string"))
}

fn timestamp(v: &Json, path: &str) -> Result<chrono::DateTime<chrono::Utc>, ParseError> {
    let s = as_str(v, path)?;
    parse_timestamp(s).ok_or_else(|| {
        ParseError::shape(
            path,
            format!("`{s}` is not an ISO-8601 UTC timestamp ending in Z"),
        )
    })
}
