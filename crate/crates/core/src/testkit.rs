//! Fixtures, random document generators and brute-force oracles shared by
//! the test suites. Enabled with the `testkit` feature.
//!
//! The oracles here re-derive every rule from scratch and must not call into
//! the validation code they are compared against.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::catalog::{Catalog, Category, MetricDefinition, NumericRange, ValueType};
use crate::composer::{compose, serialize_canonical, SlaDocument};
use crate::model::{make_constraint, Constraint, FindingCode, Operator, Priority, Scope, SlaHeader, Value};
use crate::workflow::{build_workflow, ActivityNode, Binding, Edge};

pub const HEADER: &str =
    "metric_id,display_name,category,value_type,unit,range_min,range_max,enum_values,allowed_operators";

pub const RHMS_ACTIVITIES: [&str; 5] = [
    "Capture Event of Interest (EoI)",
    "Examine captured EoI",
    "Ingest data",
    "Real-time Analysis",
    "Store structured data",
];

/// SHA-256 of `fixtures/golden_rhms.json`, computed with `sha256sum`.
pub const GOLDEN_RHMS_SHA256: &str = "0e9a05096fd36338b8afb5bab290175f2d8b0e1d216296e905f2f8d661b68842";

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// The catalog shipped with the repository.
pub fn default_catalog_dir() -> PathBuf {
    workspace_root().join("catalog")
}

pub fn golden_path() -> PathBuf {
    workspace_root().join("fixtures/golden_rhms.json")
}

pub fn rhms_draft_path() -> PathBuf {
    workspace_root().join("fixtures/rhms_draft.json")
}

pub fn write_file(path: &Path, contents: &str) {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).unwrap();
    }
    fs::write(path, contents).unwrap();
}

pub fn copy_dir(from: &Path, to: &Path) -> io::Result<()> {
    fs::create_dir_all(to)?;
    for entry in fs::read_dir(from)? {
        let entry = entry?;
        let target = to.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            copy_dir(&entry.path(), &target)?;
        } else {
            fs::copy(entry.path(), target)?;
        }
    }
    Ok(())
}

pub fn utc(s: &str) -> DateTime<Utc> {
    crate::model::parse_timestamp(s).expect("fixture timestamp")
}

/// The remote health monitoring scenario: response time under 60 seconds,
/// the five activities chained in order, and full network connectivity
/// required while ingesting.
pub fn rhms_document(catalog: &Catalog) -> SlaDocument {
    let header = SlaHeader::new(
        "Remote Health Monitoring",
        utc("2024-01-01T00:00:00Z"),
        utc("2025-01-01T00:00:00Z"),
    );
    let response_time = catalog.application_slo("end_to_end_response_time").unwrap();
    let app_slo = make_constraint(
        response_time,
        Scope::Application,
        Priority::High,
        Operator::Lt,
        60.0,
        Some("seconds"),
    )
    .unwrap();

    let mut nodes: Vec<ActivityNode> = RHMS_ACTIVITIES
        .iter()
        .enumerate()
        .map(|(i, name)| ActivityNode::for_activity(catalog, format!("n{}", i + 1), name).unwrap())
        .collect();
    let ingest = catalog.resolve_activity_schema("Ingest data").unwrap();
    let connectivity = ingest.find(Scope::Layer, "network_connectivity").unwrap();
    nodes[2].layer.constraints.push(
        make_constraint(
            connectivity,
            Scope::Layer,
            Priority::High,
            Operator::Eq,
            100.0,
            Some("percent"),
        )
        .unwrap(),
    );
    let edges = (1..5)
        .map(|i| Edge::new(format!("n{i}"), format!("n{}", i + 1)))
        .collect();
    compose(header, vec![app_slo], build_workflow(nodes, edges).unwrap()).unwrap()
}

// ---------------------------------------------------------------------------
// Generators

const APPLICATION_TYPES: [&str; 6] = [
    "Remote Health Monitoring",
    "Smart Building",
    "Fleet \"telemetry\"",
    "Usine connectée é",
    "line\nbreak\ttab",
    "雲",
];
const UNITS: [Option<&str>; 5] = [None, Some("ms"), Some("seconds"), Some("percent"), Some("Hz")];

fn pick<'a, T, R: Rng + ?Sized>(rng: &mut R, items: &'a [T]) -> &'a T {
    items.choose(rng).expect("non-empty choice")
}

fn random_priority<R: Rng + ?Sized>(rng: &mut R) -> Priority {
    *pick(rng, &Priority::ALL)
}

fn random_header<R: Rng + ?Sized>(rng: &mut R) -> SlaHeader {
    let base = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let mut start = base + Duration::seconds(rng.gen_range(0..200_000_000));
    if rng.gen_bool(0.2) {
        start += Duration::milliseconds(rng.gen_range(1..1000));
    }
    let end = start + Duration::seconds(rng.gen_range(1..100_000_000));
    SlaHeader::new(*pick(rng, &APPLICATION_TYPES), start, end)
}

/// A number accepted by `range`; mixes integers, endpoints and arbitrary
/// fractions.
fn number_in<R: Rng + ?Sized>(rng: &mut R, range: Option<NumericRange>) -> f64 {
    let range = range.unwrap_or(NumericRange::new(f64::NEG_INFINITY, f64::INFINITY));
    let lo = if range.min.is_finite() {
        range.min
    } else {
        range.max.min(0.0) - 1e6
    };
    let hi = if range.max.is_finite() {
        range.max
    } else {
        lo.max(0.0) + 10f64.powf(rng.gen_range(-3.0..7.0))
    };
    let v = match rng.gen_range(0..5) {
        0 if range.min.is_finite() => range.min,
        1 if range.max.is_finite() => range.max,
        2 => (lo + (hi - lo) * rng.gen::<f64>()).round(),
        _ => lo + (hi - lo) * rng.gen::<f64>(),
    };
    v.clamp(lo, hi)
}

/// A constraint on `def` that passes every rule.
pub fn random_valid_constraint<R: Rng + ?Sized>(
    rng: &mut R,
    def: &MetricDefinition,
    scope: Scope,
) -> Constraint {
    let operator = *pick(rng, &def.allowed_operators);
    let value = match def.value_type {
        ValueType::Numeric | ValueType::Percentage => Value::Number(number_in(rng, def.numeric_range)),
        ValueType::Enum => Value::Text(pick(rng, def.enum_values.as_deref().unwrap()).clone()),
        ValueType::Boolean => Value::Bool(rng.gen()),
        ValueType::String => Value::Text(format!("value-{}", rng.gen_range(0..1000))),
    };
    make_constraint(
        def,
        scope,
        random_priority(rng),
        operator,
        value,
        def.unit.as_deref(),
    )
    .expect("generated constraint is valid")
}

/// A well-formed document over `catalog`; always validates cleanly.
pub fn random_document<R: Rng + ?Sized>(rng: &mut R, catalog: &Catalog) -> SlaDocument {
    let header = random_header(rng);
    let app_metrics = catalog.list_application_slos();
    let app_slos = if app_metrics.is_empty() {
        Vec::new()
    } else {
        (0..rng.gen_range(0..=3))
            .map(|_| {
                let def = pick(rng, app_metrics);
                random_valid_constraint(rng, def, Scope::Application)
            })
            .collect()
    };

    let activities = catalog.list_activities();
    let prefixes = ["n", "a", "node_", "stage-", "Z"];
    let n = rng.gen_range(1..=6);
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let name = *pick(rng, &activities);
        let mut node =
            ActivityNode::for_activity(catalog, format!("{}{i}", pick(rng, &prefixes)), name).unwrap();
        let schema = catalog.resolve_activity_schema(name).unwrap();
        for scope in [Scope::Layer, Scope::Model, Scope::Activity] {
            let metrics = schema.metrics(scope);
            if metrics.is_empty() {
                continue;
            }
            for _ in 0..rng.gen_range(0..=2) {
                let def = pick(rng, metrics);
                let c = random_valid_constraint(rng, def, scope);
                match scope {
                    Scope::Layer => node.layer.constraints.push(c),
                    Scope::Model => node.model.as_mut().unwrap().constraints.push(c),
                    _ => node.activity_constraints.push(c),
                }
            }
        }
        nodes.push(node);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(0.35) {
                edges.push(Edge::new(
                    nodes[order[a]].node_id.clone(),
                    nodes[order[b]].node_id.clone(),
                ));
            }
        }
    }
    edges.shuffle(rng);
    nodes.shuffle(rng);
    compose(header, app_slos, build_workflow(nodes, edges).unwrap()).unwrap()
}

fn all_constraints_mut(doc: &mut SlaDocument) -> Vec<&mut Constraint> {
    let mut out: Vec<&mut Constraint> = doc.app_slos.iter_mut().collect();
    for node in &mut doc.workflow.nodes {
        out.extend(node.layer.constraints.iter_mut());
        if let Some(m) = node.model.as_mut() {
            out.extend(m.constraints.iter_mut());
        }
        out.extend(node.activity_constraints.iter_mut());
    }
    out
}

/// Applies one to three random defects to `doc`. The result may or may not
/// still be valid (e.g. a changed operator can land on an allowed one).
pub fn mutate_document<R: Rng + ?Sized>(rng: &mut R, doc: &SlaDocument) -> SlaDocument {
    let mut doc = doc.clone();
    for _ in 0..rng.gen_range(1..=3) {
        match rng.gen_range(0..14) {
            0 => {
                let h = &mut doc.header;
                if rng.gen_bool(0.5) {
                    std::mem::swap(&mut h.agreement_start, &mut h.agreement_end);
                } else {
                    h.agreement_end = h.agreement_start;
                }
            }
            1 => doc.app_slos.push(Constraint {
                metric_id: "sampling_rate".into(),
                scope: Scope::Application,
                priority: Priority::Low,
                operator: Operator::Lt,
                value: Value::Number(3.0),
                unit: Some("Hz".into()),
            }),
            2 => {
                let mut cs = all_constraints_mut(&mut doc);
                if let Some(c) = cs.choose_mut(rng) {
                    c.value = match rng.gen_range(0..4) {
                        0 => Value::Number(-1e9),
                        1 => Value::Number(1e12),
                        2 => Value::Bool(true),
                        _ => Value::Text("zzz".into()),
                    };
                }
            }
            3 => {
                let op = *pick(rng, &Operator::ALL);
                if let Some(c) = all_constraints_mut(&mut doc).choose_mut(rng) {
                    c.operator = op;
                }
            }
            4 => {
                let unit = pick(rng, &UNITS).map(str::to_owned);
                if let Some(c) = all_constraints_mut(&mut doc).choose_mut(rng) {
                    c.unit = unit;
                }
            }
            5 => {
                let name = pick(rng, &["Frobnicate", "ingest data", ""]).to_string();
                if let Some(node) = doc.workflow.nodes.choose_mut(rng) {
                    node.activity_name = name;
                }
            }
            6 => {
                if doc.workflow.nodes.len() > 1 {
                    let id = doc.workflow.nodes[0].node_id.clone();
                    let k = rng.gen_range(1..doc.workflow.nodes.len());
                    doc.workflow.nodes[k].node_id = id;
                }
            }
            7 => {
                if let Some(node) = doc.workflow.nodes.choose(rng) {
                    let id = node.node_id.clone();
                    doc.workflow.edges.push(Edge::new(id, "ghost"));
                }
            }
            8 => {
                if let Some(e) = doc.workflow.edges.choose(rng).cloned() {
                    doc.workflow.edges.push(Edge::new(e.to, e.from));
                } else if let Some(node) = doc.workflow.nodes.choose(rng) {
                    let id = node.node_id.clone();
                    doc.workflow.edges.push(Edge::new(id.clone(), id));
                }
            }
            9 => {
                if rng.gen_bool(0.3) {
                    doc.workflow.nodes.clear();
                }
            }
            10 => {
                if let Some(node) = doc.workflow.nodes.choose_mut(rng) {
                    match rng.gen_range(0..3) {
                        0 => node.layer.name = pick(rng, &["edge", "cloud", "iot_device", "fog"]).to_string(),
                        1 => node.model = Some(Binding::new("stream_processing")),
                        _ => node.model = None,
                    }
                }
            }
            11 => doc.schema_version = "0.9".into(),
            12 => {
                if let Some(c) = all_constraints_mut(&mut doc).choose_mut(rng) {
                    c.metric_id =
                        pick(rng, &["sampling_rate", "throughput", "nope", "availability"]).to_string();
                }
            }
            _ => {
                if let Some(node) = doc.workflow.nodes.choose_mut(rng) {
                    node.activity_constraints.push(Constraint {
                        metric_id: "data_format".into(),
                        scope: Scope::Activity,
                        priority: Priority::Normal,
                        operator: Operator::Eq,
                        value: Value::Text(pick(rng, &["json", "xml"]).to_string()),
                        unit: None,
                    });
                }
            }
        }
    }
    doc
}

/// A metric definition satisfying every catalog invariant.
pub fn random_metric_definition<R: Rng + ?Sized>(rng: &mut R) -> MetricDefinition {
    let value_type = *pick(rng, &ValueType::ALL);
    let numeric_range = match value_type {
        ValueType::Numeric => {
            let a: f64 = rng.gen_range(-100.0..100.0);
            let b: f64 = a + rng.gen_range(0.0..200.0);
            let min = if rng.gen_bool(0.2) {
                f64::NEG_INFINITY
            } else {
                a.round()
            };
            let max = if rng.gen_bool(0.3) {
                f64::INFINITY
            } else {
                b.round().max(a.round())
            };
            Some(NumericRange::new(min, max))
        }
        ValueType::Percentage => {
            let a = rng.gen_range(0.0..=100.0f64).round();
            let b = rng.gen_range(a..=100.0f64).round();
            Some(NumericRange::new(a, b))
        }
        _ => None,
    };
    let enum_values = (value_type == ValueType::Enum).then(|| {
        let mut pool = vec!["a", "b", "c", "d"];
        pool.shuffle(rng);
        pool.truncate(rng.gen_range(1..=4));
        pool.into_iter().map(str::to_owned).collect()
    });
    let candidates: &[Operator] = if value_type.is_numeric() {
        &Operator::ALL
    } else {
        &[Operator::Eq, Operator::Neq]
    };
    let mut ops = candidates.to_vec();
    ops.shuffle(rng);
    ops.truncate(rng.gen_range(1..=ops.len()));
    MetricDefinition {
        metric_id: pick(rng, &["m", "q"]).to_string(),
        display_name: "Metric".into(),
        category: if rng.gen_bool(0.5) {
            Category::Slo
        } else {
            Category::Config
        },
        value_type,
        unit: pick(rng, &UNITS).map(str::to_owned),
        numeric_range,
        enum_values,
        allowed_operators: ops,
    }
}

/// An arbitrary (frequently invalid) constraint aimed at `def`.
pub fn random_constraint<R: Rng + ?Sized>(rng: &mut R, def: &MetricDefinition) -> Constraint {
    let value = match rng.gen_range(0..8) {
        0 | 1 => Value::Number(number_in(rng, def.numeric_range)),
        2 => Value::Number(rng.gen_range(-1000.0..1000.0f64).round()),
        3 => Value::Number(*pick(rng, &[f64::NAN, f64::INFINITY, -0.0, 100.0, 0.0, 150.0])),
        4 => Value::Text(pick(rng, &["a", "b", "c", "d", "e", ""]).to_string()),
        5 => Value::Text(format!("{}", rng.gen_range(0..5))),
        _ => Value::Bool(rng.gen()),
    };
    Constraint {
        metric_id: if rng.gen_bool(0.9) {
            def.metric_id.clone()
        } else {
            pick(rng, &["m", "q", "z"]).to_string()
        },
        scope: Scope::Layer,
        priority: random_priority(rng),
        operator: *pick(rng, &Operator::ALL),
        value,
        unit: if rng.gen_bool(0.6) {
            def.unit.clone()
        } else {
            pick(rng, &UNITS).map(str::to_owned)
        },
    }
}

/// A request body for the validation endpoints: canonical or reordered
/// documents (valid or mutated), an unsupported schema version, a shape
/// error, or broken JSON.
pub fn random_request_body<R: Rng + ?Sized>(rng: &mut R, catalog: &Catalog) -> Vec<u8> {
    let doc = random_document(rng, catalog);
    let doc = if rng.gen_bool(0.6) {
        mutate_document(rng, &doc)
    } else {
        doc
    };
    let bytes = serialize_canonical(&doc);
    let mut tree: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    match rng.gen_range(0..8) {
        0..=2 => bytes,
        3 => serde_json::to_vec_pretty(&tree).unwrap(),
        4 => {
            tree["schema_version"] = (*pick(rng, &["2.0", "0.9", ""])).into();
            serde_json::to_vec(&tree).unwrap()
        }
        5 => {
            let obj = match rng.gen_range(0..3) {
                0 => tree.as_object_mut().unwrap(),
                1 => tree["application"].as_object_mut().unwrap(),
                _ => tree["workflow"].as_object_mut().unwrap(),
            };
            if rng.gen_bool(0.5) {
                let keys: Vec<String> = obj.keys().cloned().collect();
                obj.remove(pick(rng, &keys));
            } else {
                obj.insert("extra".to_owned(), serde_json::Value::Null);
            }
            serde_json::to_vec(&tree).unwrap()
        }
        6 => {
            let mut b = bytes;
            b.truncate(rng.gen_range(0..b.len()));
            b
        }
        _ => pick(
            rng,
            &[
                &b"{"[..],
                b"",
                b"null",
                b"[]",
                b"\xff\xfe",
                b"{\"schema_version\":1}",
            ],
        )
        .to_vec(),
    }
}

// ---------------------------------------------------------------------------
// Oracles

/// Cycle detection by enumerating every simple path: a cycle exists iff
/// some simple path starting at `s` ends at a node with an edge back to `s`.
pub fn brute_force_has_cycle(nodes: &[&str], edges: &[(&str, &str)]) -> bool {
    fn extend(path: &mut Vec<usize>, adj: &[Vec<bool>]) -> bool {
        let start = path[0];
        let last = *path.last().unwrap();
        if adj[last][start] {
            return true;
        }
        for next in 0..adj.len() {
            if adj[last][next] && !path.contains(&next) {
                path.push(next);
                if extend(path, adj) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    let index = |id: &str| nodes.iter().position(|n| *n == id);
    let mut adj = vec![vec![false; nodes.len()]; nodes.len()];
    for (a, b) in edges {
        if let (Some(i), Some(j)) = (index(a), index(b)) {
            adj[i][j] = true;
        }
    }
    (0..nodes.len()).any(|s| extend(&mut vec![s], &adj))
}

/// Checks whether `witness` is a real cycle of the graph.
pub fn is_cycle(witness: &[String], edges: &[(&str, &str)]) -> bool {
    !witness.is_empty()
        && (0..witness.len()).all(|i| {
            let from = witness[i].as_str();
            let to = witness[(i + 1) % witness.len()].as_str();
            edges.iter().any(|(a, b)| *a == from && *b == to)
        })
}

/// Clause-by-clause constraint rules.
pub fn oracle_constraint_codes(def: &MetricDefinition, c: &Constraint) -> BTreeSet<FindingCode> {
    let mut codes = BTreeSet::new();
    if c.metric_id != def.metric_id {
        codes.insert(FindingCode::UnknownMetric);
        return codes;
    }
    // Clause: operator membership.
    if !def.allowed_operators.contains(&c.operator) {
        codes.insert(FindingCode::OperatorNotAllowed);
    }
    // Clause: value kind.
    let kind_ok = match def.value_type {
        ValueType::Numeric | ValueType::Percentage => matches!(c.value, Value::Number(v) if v.is_finite()),
        ValueType::Enum | ValueType::String => matches!(c.value, Value::Text(_)),
        ValueType::Boolean => matches!(c.value, Value::Bool(_)),
    };
    if !kind_ok {
        codes.insert(FindingCode::ValueTypeMismatch);
    }
    // Clause: range membership (only meaningful for a well-typed number).
    if let (true, Value::Number(v), Some(r)) = (kind_ok, &c.value, def.numeric_range) {
        if *v < r.min || *v > r.max {
            codes.insert(FindingCode::ValueOutOfRange);
        }
    }
    // Clause: enum membership.
    if let (ValueType::Enum, Value::Text(s)) = (def.value_type, &c.value) {
        if !def.enum_values.iter().flatten().any(|e| e == s) {
            codes.insert(FindingCode::EnumValueUnknown);
        }
    }
    // Clause: exact unit.
    if c.unit.as_deref() != def.unit.as_deref() {
        codes.insert(FindingCode::UnitMismatch);
    }
    codes
}

fn oracle_constraints(
    out: &mut Vec<(String, FindingCode)>,
    metrics: &[MetricDefinition],
    constraints: &[Constraint],
    base: &str,
) {
    for (k, c) in constraints.iter().enumerate() {
        let path = format!("{base}.constraints[{k}]");
        match metrics.iter().find(|m| m.metric_id == c.metric_id) {
            None => out.push((path, FindingCode::UnknownMetric)),
            Some(def) => {
                for code in oracle_constraint_codes(def, c) {
                    out.push((path.clone(), code));
                }
            }
        }
    }
}

/// Full-document rules re-derived independently; returns sorted
/// `(path, code)` pairs.
pub fn oracle_validate_document(catalog: &Catalog, doc: &SlaDocument) -> Vec<(String, FindingCode)> {
    let mut out = Vec::new();
    if doc.schema_version != "1.0" {
        out.push(("schema_version".to_owned(), FindingCode::SchemaVersionUnsupported));
    }
    if doc.header.agreement_start >= doc.header.agreement_end {
        out.push(("header".to_owned(), FindingCode::WindowInverted));
    }
    for (k, c) in doc.app_slos.iter().enumerate() {
        let path = format!("app_slos[{k}]");
        match catalog
            .list_application_slos()
            .iter()
            .find(|m| m.metric_id == c.metric_id)
        {
            None => out.push((path, FindingCode::UnknownMetric)),
            Some(def) => out.extend(
                oracle_constraint_codes(def, c)
                    .into_iter()
                    .map(|code| (path.clone(), code)),
            ),
        }
    }

    let wf = &doc.workflow;
    if wf.nodes.is_empty() {
        out.push(("workflow.activities".to_owned(), FindingCode::EmptyWorkflow));
    }
    for i in 0..wf.nodes.len() {
        if wf.nodes[..i].iter().any(|n| n.node_id == wf.nodes[i].node_id) {
            out.push((
                format!("workflow.activities[{i}].id"),
                FindingCode::DuplicateNodeId,
            ));
        }
    }
    let ids: Vec<&str> = {
        let mut seen = Vec::new();
        for n in &wf.nodes {
            if !seen.contains(&n.node_id.as_str()) {
                seen.push(n.node_id.as_str());
            }
        }
        seen
    };
    let mut live_edges = Vec::new();
    for (j, e) in wf.edges.iter().enumerate() {
        if ids.contains(&e.from.as_str()) && ids.contains(&e.to.as_str()) {
            live_edges.push((e.from.as_str(), e.to.as_str()));
        } else {
            out.push((format!("workflow.edges[{j}]"), FindingCode::DanglingEdge));
        }
    }
    if brute_force_has_cycle(&ids, &live_edges) {
        out.push(("workflow.edges".to_owned(), FindingCode::WorkflowCycle));
    }

    for (i, node) in wf.nodes.iter().enumerate() {
        let base = format!("workflow.activities[{i}]");
        let Some(def) = catalog
            .activities()
            .find(|a| a.activity_name == node.activity_name)
        else {
            out.push((format!("{base}.name"), FindingCode::UnknownActivity));
            continue;
        };
        if node.layer.name != def.deployment_layer {
            out.push((format!("{base}.layer"), FindingCode::MappingMismatch));
        }
        if node.model.as_ref().map(|m| &m.name) != def.programming_model.as_ref() {
            out.push((format!("{base}.model"), FindingCode::MappingMismatch));
        }
        let layer = catalog.resource(&def.deployment_layer).unwrap();
        oracle_constraints(
            &mut out,
            &layer.metrics,
            &node.layer.constraints,
            &format!("{base}.layer"),
        );
        if let (Some(model_id), Some(binding)) = (&def.programming_model, &node.model) {
            let model = catalog.resource(model_id).unwrap();
            oracle_constraints(
                &mut out,
                &model.metrics,
                &binding.constraints,
                &format!("{base}.model"),
            );
        }
        oracle_constraints(&mut out, &def.own_metrics, &node.activity_constraints, &base);
    }
    out.sort();
    out
}
