//! Workflow DAG construction, activity-to-resource mapping and workflow
//! validation.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use thiserror::Error;

use crate::catalog::{ActivitySchema, Catalog, CatalogError};
use crate::model::{check_constraint, sort_findings, Constraint, Finding, FindingCode, Scope};

/// A deployment layer or programming model named by an activity node,
/// together with the constraints placed on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub name: String,
    pub constraints: Vec<Constraint>,
}

impl Binding {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            constraints: Vec::new(),
        }
    }
}

/// One instance of a catalog activity inside a workflow.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityNode {
    pub node_id: String,
    pub activity_name: String,
    pub layer: Binding,
    pub model: Option<Binding>,
    pub activity_constraints: Vec<Constraint>,
}

impl ActivityNode {
    /// A node bound to the layer and model the catalog maps `activity_name`
    /// onto, with no constraints yet.
    pub fn for_activity(
        catalog: &Catalog,
        node_id: impl Into<String>,
        activity_name: &str,
    ) -> Result<Self, CatalogError> {
        let mapping = map_activity(catalog, activity_name)?;
        Ok(Self {
            node_id: node_id.into(),
            activity_name: activity_name.to_owned(),
            layer: Binding::new(mapping.deployment_layer),
            model: mapping.programming_model.map(Binding::new),
            activity_constraints: Vec::new(),
        })
    }

    pub fn layer_constraints(&self) -> &[Constraint] {
        &self.layer.constraints
    }

    pub fn model_constraints(&self) -> &[Constraint] {
        self.model
            .as_ref()
            .map(|m| m.constraints.as_slice())
            .unwrap_or_default()
    }
}

/// Data-flow dependency between two nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: String,
    pub to: String,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
        }
    }
}

/// Activity nodes plus data-flow edges.
///
/// Values built by [`build_workflow`] are acyclic with unique ids and are
/// kept in canonical order: nodes topologically sorted, edges sorted by
/// `(from, to)`. Parsed documents may hold arbitrary graphs; use
/// [`validate_workflow`] on those.
#[derive(Debug, Clone, PartialEq)]
pub struct Workflow {
    pub nodes: Vec<ActivityNode>,
    pub edges: Vec<Edge>,
}

impl Workflow {
    /// Reorders nodes and edges into canonical order without checking
    /// anything else.
    pub fn into_canonical_order(self) -> Workflow {
        let order = topological_indices(&self.nodes, &self.edges);
        let mut slots: Vec<Option<ActivityNode>> = self.nodes.into_iter().map(Some).collect();
        let nodes = order
            .into_iter()
            .map(|i| slots[i].take().expect("each index appears once"))
            .collect();
        let mut edges = self.edges;
        edges.sort();
        Workflow { nodes, edges }
    }

    pub fn node(&self, node_id: &str) -> Option<&ActivityNode> {
        self.nodes.iter().find(|n| n.node_id == node_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkflowError {
    #[error("workflow has no activities")]
    EmptyWorkflow,
    #[error("node id `{0}` is used more than once")]
    DuplicateNodeId(String),
    #[error("edge {from} -> {to} names a node that does not exist")]
    DanglingEdge { from: String, to: String },
    #[error("workflow contains a cycle: {}", format_cycle(.0))]
    WorkflowCycle(Vec<String>),
}

fn format_cycle(witness: &[String]) -> String {
    let mut parts: Vec<&str> = witness.iter().map(String::as_str).collect();
    if let Some(first) = witness.first() {
        parts.push(first);
    }
    parts.join(" -> ")
}

/// Deployment layer and optional programming model of an activity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mapping {
    pub deployment_layer: String,
    pub programming_model: Option<String>,
}

pub fn map_activity(catalog: &Catalog, activity_name: &str) -> Result<Mapping, CatalogError> {
    let def = catalog
        .activity(activity_name)
        .ok_or_else(|| CatalogError::ActivityNotFound(activity_name.to_owned()))?;
    Ok(Mapping {
        deployment_layer: def.deployment_layer.clone(),
        programming_model: def.programming_model.clone(),
    })
}

/// Structural defects of a node/edge graph.
struct GraphIssues {
    empty: bool,
    /// Indices of nodes whose id repeats an earlier node's id.
    duplicate_nodes: Vec<usize>,
    /// Indices of edges with at least one unknown endpoint.
    dangling_edges: Vec<usize>,
    cycle: Option<Vec<String>>,
}

fn analyze(nodes: &[ActivityNode], edges: &[Edge]) -> GraphIssues {
    let mut ids = BTreeSet::new();
    let mut duplicate_nodes = Vec::new();
    for (i, node) in nodes.iter().enumerate() {
        if !ids.insert(node.node_id.as_str()) {
            duplicate_nodes.push(i);
        }
    }

    let mut adjacency: BTreeMap<&str, BTreeSet<&str>> = ids.iter().map(|id| (*id, BTreeSet::new())).collect();
    let mut dangling_edges = Vec::new();
    for (j, edge) in edges.iter().enumerate() {
        if ids.contains(edge.from.as_str()) && ids.contains(edge.to.as_str()) {
            adjacency
                .get_mut(edge.from.as_str())
                .expect("known id")
                .insert(edge.to.as_str());
        } else {
            dangling_edges.push(j);
        }
    }

    GraphIssues {
        empty: nodes.is_empty(),
        duplicate_nodes,
        dangling_edges,
        cycle: find_cycle(&adjacency),
    }
}

/// Depth-first search visiting roots and successors in ascending id order.
/// Returns the first cycle met, starting at the node the back edge enters.
fn find_cycle(adjacency: &BTreeMap<&str, BTreeSet<&str>>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut marks: HashMap<&str, Mark> = adjacency.keys().map(|k| (*k, Mark::New)).collect();

    for &root in adjacency.keys() {
        if marks[root] != Mark::New {
            continue;
        }
        let mut path: Vec<&str> = vec![root];
        let mut stack = vec![adjacency[root].iter()];
        marks.insert(root, Mark::Active);
        while let Some(successors) = stack.last_mut() {
            match successors.next() {
                Some(&next) => match marks[next] {
                    Mark::New => {
                        marks.insert(next, Mark::Active);
                        path.push(next);
                        stack.push(adjacency[next].iter());
                    }
                    Mark::Active => {
                        let start = path
                            .iter()
                            .position(|n| *n == next)
                            .expect("active node is on the path");
                        return Some(path[start..].iter().map(|s| s.to_string()).collect());
                    }
                    Mark::Done => {}
                },
                None => {
                    stack.pop();
                    let finished = path.pop().expect("path tracks stack");
                    marks.insert(finished, Mark::Done);
                }
            }
        }
    }
    None
}

/// Builds a checked workflow in canonical order.
pub fn build_workflow(nodes: Vec<ActivityNode>, edges: Vec<Edge>) -> Result<Workflow, WorkflowError> {
    let issues = analyze(&nodes, &edges);
    if issues.empty {
        return Err(WorkflowError::EmptyWorkflow);
    }
    if let Some(&i) = issues.duplicate_nodes.first() {
        return Err(WorkflowError::DuplicateNodeId(nodes[i].node_id.clone()));
    }
    if let Some(&j) = issues.dangling_edges.first() {
        return Err(WorkflowError::DanglingEdge {
            from: edges[j].from.clone(),
            to: edges[j].to.clone(),
        });
    }
    if let Some(witness) = issues.cycle {
        return Err(WorkflowError::WorkflowCycle(witness));
    }
    Ok(Workflow { nodes, edges }.into_canonical_order())
}

/// Kahn's algorithm over node indices with ties broken by `(node_id, index)`.
/// Total on any input: nodes left over by a cycle follow in the same
/// tie-break order, and dangling edges are ignored.
pub(crate) fn topological_indices(nodes: &[ActivityNode], edges: &[Edge]) -> Vec<usize> {
    let mut by_id: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, node) in nodes.iter().enumerate() {
        by_id.entry(node.node_id.as_str()).or_default().push(i);
    }
    let mut successors: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    let mut in_degree = vec![0usize; nodes.len()];
    for edge in edges {
        let (Some(from), Some(to)) = (by_id.get(edge.from.as_str()), by_id.get(edge.to.as_str())) else {
            continue;
        };
        for &u in from {
            for &v in to {
                successors[u].push(v);
                in_degree[v] += 1;
            }
        }
    }

    let key = |i: usize| Reverse((nodes[i].node_id.as_str(), i));
    let mut ready: BinaryHeap<_> = (0..nodes.len()).filter(|&i| in_degree[i] == 0).map(key).collect();
    let mut order = Vec::with_capacity(nodes.len());
    let mut placed = vec![false; nodes.len()];
    while let Some(Reverse((_, u))) = ready.pop() {
        order.push(u);
        placed[u] = true;
        for &v in &successors[u] {
            in_degree[v] -= 1;
            if in_degree[v] == 0 {
                ready.push(key(v));
            }
        }
    }
    if order.len() < nodes.len() {
        let mut rest: Vec<usize> = (0..nodes.len()).filter(|&i| !placed[i]).collect();
        rest.sort_by_key(|&i| (nodes[i].node_id.as_str(), i));
        order.extend(rest);
    }
    order
}

/// Node ids such that every edge points forward; ties are broken by
/// ascending node id.
pub fn topological_order(w: &Workflow) -> Vec<String> {
    topological_indices(&w.nodes, &w.edges)
        .into_iter()
        .map(|i| w.nodes[i].node_id.clone())
        .collect()
}

/// Reports structural defects plus per-node mapping and constraint findings.
pub fn validate_workflow(catalog: &Catalog, w: &Workflow) -> Vec<Finding> {
    let mut findings = Vec::new();
    let issues = analyze(&w.nodes, &w.edges);

    if issues.empty {
        findings.push(Finding::error(
            FindingCode::EmptyWorkflow,
            "workflow.activities",
            "workflow must contain at least one activity",
        ));
    }
    for i in issues.duplicate_nodes {
        findings.push(Finding::error(
            FindingCode::DuplicateNodeId,
            format!("workflow.activities[{i}].id"),
            format!("node id `{}` is used more than once", w.nodes[i].node_id),
        ));
    }
    for j in issues.dangling_edges {
        let edge = &w.edges[j];
        findings.push(Finding::error(
            FindingCode::DanglingEdge,
            format!("workflow.edges[{j}]"),
            format!(
                "edge {} -> {} names a node that does not exist",
                edge.from, edge.to
            ),
        ));
    }
    if let Some(witness) = issues.cycle {
        findings.push(Finding::error(
            FindingCode::WorkflowCycle,
            "workflow.edges",
            format!("workflow contains a cycle: {}", format_cycle(&witness)),
        ));
    }

    for (i, node) in w.nodes.iter().enumerate() {
        let base = format!("workflow.activities[{i}]");
        let Ok(schema) = catalog.resolve_activity_schema(&node.activity_name) else {
            findings.push(Finding::error(
                FindingCode::UnknownActivity,
                format!("{base}.name"),
                format!("`{}` is not a catalog activity", node.activity_name),
            ));
            continue;
        };
        check_mapping(&schema, node, &base, &mut findings);
        check_scope(
            &schema,
            Scope::Layer,
            &node.layer.constraints,
            &format!("{base}.layer"),
            &mut findings,
        );
        if let (Some(binding), Some(_)) = (&node.model, &schema.programming_model) {
            check_scope(
                &schema,
                Scope::Model,
                &binding.constraints,
                &format!("{base}.model"),
                &mut findings,
            );
        }
        check_scope(
            &schema,
            Scope::Activity,
            &node.activity_constraints,
            &base,
            &mut findings,
        );
    }

    sort_findings(&mut findings);
    findings
}

fn check_mapping(schema: &ActivitySchema, node: &ActivityNode, base: &str, findings: &mut Vec<Finding>) {
    let expected_layer = &schema.deployment_layer.resource_id;
    if &node.layer.name != expected_layer {
        findings.push(Finding::error(
            FindingCode::MappingMismatch,
            format!("{base}.layer"),
            format!(
                "`{}` is deployed on `{expected_layer}`, not `{}`",
                node.activity_name, node.layer.name
            ),
        ));
    }
    let expected_model = schema.programming_model.as_ref().map(|m| m.resource_id.as_str());
    let given_model = node.model.as_ref().map(|m| m.name.as_str());
    if expected_model != given_model {
        let message = match (expected_model, given_model) {
            (None, Some(given)) => format!(
                "`{}` maps to no programming model but the node binds `{given}`",
                node.activity_name
            ),
            (Some(expected), None) => {
                format!("`{}` requires programming model `{expected}`", node.activity_name)
            }
            (Some(expected), Some(given)) => format!(
                "`{}` maps to programming model `{expected}`, not `{given}`",
                node.activity_name
            ),
            (None, None) => unreachable!(),
        };
        findings.push(Finding::error(
            FindingCode::MappingMismatch,
            format!("{base}.model"),
            message,
        ));
    }
}

fn check_scope(
    schema: &ActivitySchema,
    scope: Scope,
    constraints: &[Constraint],
    base: &str,
    findings: &mut Vec<Finding>,
) {
    for (k, c) in constraints.iter().enumerate() {
        let path = format!("{base}.constraints[{k}]");
        match schema.find(scope, &c.metric_id) {
            Some(def) => findings.extend(check_constraint(def, c, &path)),
            None => findings.push(Finding::error(
                FindingCode::UnknownMetric,
                path,
                format!(
                    "`{}` is not a {} metric of `{}`",
                    c.metric_id,
                    scope.as_str(),
                    schema.activity_name
                ),
            )),
        }
    }
}
