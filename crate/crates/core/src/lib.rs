//! Core library for specifying end-to-end service level agreements of
//! multi-layer IoT applications.
//!
//! The pieces fit together in this order:
//!
//! * [`catalog`] loads the workbook directory that defines activities,
//!   deployment layers, programming models and their metrics.
//! * [`model`] holds constraints, the agreement header and machine-readable
//!   findings.
//! * [`workflow`] builds the activity DAG and maps activities onto layers
//!   and programming models.
//! * [`composer`] assembles, validates and canonically (de)serializes the
//!   SLA document.
//! * [`store`] persists canonical documents in a content-addressed,
//!   file-backed collection.

pub mod catalog;
pub mod composer;
mod json;
pub mod model;
pub mod store;
pub mod workflow;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

pub use catalog::{
    load_catalog, ActivityDefinition, ActivitySchema, Catalog, CatalogError, Category, MetricDefinition,
    NumericRange, ResourceKind, ResourceSchema, ValueType,
};
pub use composer::{
    compose, document_from_json, document_id, parse, serialize_canonical, validate_bytes, validate_document,
    ComposeError, ParseError, SlaDocument, ValidationReport, SCHEMA_VERSION,
};
pub use model::{
    check_constraint, make_constraint, Constraint, ConstraintError, Finding, FindingCode, Operator, Priority,
    Scope, Severity, SlaHeader, Value,
};
pub use store::{FileStore, SlaStore, StoreError, StoredSlaSummary};
pub use workflow::{
    build_workflow, map_activity, topological_order, validate_workflow, ActivityNode, Binding, Edge, Mapping,
    Workflow, WorkflowError,
};
