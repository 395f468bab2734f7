//! Constraint and agreement vocabulary shared by every part of an SLA
//! document, plus the machine-readable findings produced by validation.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::catalog::{MetricDefinition, ValueType};

/// Relative importance of a constraint. Carried into the document verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Priority {
    High,
    Normal,
    Low,
}

impl Priority {
    pub const ALL: [Priority; 3] = [Priority::High, Priority::Normal, Priority::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            Priority::High => "high",
            Priority::Normal => "normal",
            Priority::Low => "low",
        }
    }
}

impl FromStr for Priority {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "high" => Ok(Priority::High),
            "normal" => Ok(Priority::Normal),
            "low" => Ok(Priority::Low),
            _ => Err(UnknownToken::new("priority", s)),
        }
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Comparison operator of a constraint ("required level" in the wizard).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Lt,
    Lte,
    Gt,
    Gte,
    Eq,
    Neq,
}

impl Operator {
    pub const ALL: [Operator; 6] = [
        Operator::Lt,
        Operator::Lte,
        Operator::Gt,
        Operator::Gte,
        Operator::Eq,
        Operator::Neq,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Operator::Lt => "lt",
            Operator::Lte => "lte",
            Operator::Gt => "gt",
            Operator::Gte => "gte",
            Operator::Eq => "eq",
            Operator::Neq => "neq",
        }
    }

    /// Operators that only make sense on ordered values.
    pub fn is_ordering(self) -> bool {
        !matches!(self, Operator::Eq | Operator::Neq)
    }
}

impl FromStr for Operator {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Operator::ALL
            .into_iter()
            .find(|op| op.as_str() == s)
            .ok_or_else(|| UnknownToken::new("operator", s))
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where in the document a constraint lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Application,
    Activity,
    Layer,
    Model,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Application => "application",
            Scope::Activity => "activity",
            Scope::Layer => "layer",
            Scope::Model => "model",
        }
    }
}

/// A token outside one of the closed vocabularies.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {vocabulary} `{token}`")]
pub struct UnknownToken {
    pub vocabulary: &'static str,
    pub token: String,
}

impl UnknownToken {
    fn new(vocabulary: &'static str, token: &str) -> Self {
        Self {
            vocabulary,
            token: token.to_owned(),
        }
    }
}

/// Threshold value of a constraint.
///
/// Numeric and percentage metrics take `Number`; enum and string metrics
/// take `Text`; boolean metrics take `Bool`.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Text(String),
    Bool(bool),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Number(_) => "number",
            Value::Text(_) => "string",
            Value::Bool(_) => "boolean",
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Number(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_owned())
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(n) if n.is_finite() => f.write_str(&crate::json::format_number(*n)),
            Value::Number(n) => write!(f, "{n}"),
            Value::Text(s) => write!(f, "{s:?}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// A user-specified bound on one catalog metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub metric_id: String,
    pub scope: Scope,
    pub priority: Priority,
    pub operator: Operator,
    pub value: Value,
    pub unit: Option<String>,
}

/// Agreement header: application type and agreement window (UTC).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlaHeader {
    pub application_type: String,
    pub agreement_start: DateTime<Utc>,
    pub agreement_end: DateTime<Utc>,
}

impl SlaHeader {
    pub fn new(
        application_type: impl Into<String>,
        agreement_start: DateTime<Utc>,
        agreement_end: DateTime<Utc>,
    ) -> Self {
        Self {
            application_type: application_type.into(),
            agreement_start,
            agreement_end,
        }
    }

    pub fn window_is_valid(&self) -> bool {
        self.agreement_start < self.agreement_end
    }
}

/// Parses an ISO-8601 timestamp. Only UTC with a trailing `Z` is accepted.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if !s.ends_with('Z') {
        return None;
    }
    DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|t| t.with_timezone(&Utc))
}

/// Formats a timestamp as ISO-8601 UTC with a trailing `Z`. Fractional
/// seconds are emitted only when non-zero.
pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Closed registry of finding codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FindingCode {
    OperatorNotAllowed,
    ValueOutOfRange,
    ValueTypeMismatch,
    UnitMismatch,
    EnumValueUnknown,
    UnknownMetric,
    UnknownActivity,
    DuplicateNodeId,
    DanglingEdge,
    WorkflowCycle,
    EmptyWorkflow,
    WindowInverted,
    SchemaVersionUnsupported,
    MappingMismatch,
}

impl FindingCode {
    pub const ALL: [FindingCode; 14] = [
        FindingCode::OperatorNotAllowed,
        FindingCode::ValueOutOfRange,
        FindingCode::ValueTypeMismatch,
        FindingCode::UnitMismatch,
        FindingCode::EnumValueUnknown,
        FindingCode::UnknownMetric,
        FindingCode::UnknownActivity,
        FindingCode::DuplicateNodeId,
        FindingCode::DanglingEdge,
        FindingCode::WorkflowCycle,
        FindingCode::EmptyWorkflow,
        FindingCode::WindowInverted,
        FindingCode::SchemaVersionUnsupported,
        FindingCode::MappingMismatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FindingCode::OperatorNotAllowed => "OPERATOR_NOT_ALLOWED",
            FindingCode::ValueOutOfRange => "VALUE_OUT_OF_RANGE",
            FindingCode::ValueTypeMismatch => "VALUE_TYPE_MISMATCH",
            FindingCode::UnitMismatch => "UNIT_MISMATCH",
            FindingCode::EnumValueUnknown => "ENUM_VALUE_UNKNOWN",
            FindingCode::UnknownMetric => "UNKNOWN_METRIC",
            FindingCode::UnknownActivity => "UNKNOWN_ACTIVITY",
            FindingCode::DuplicateNodeId => "DUPLICATE_NODE_ID",
            FindingCode::DanglingEdge => "DANGLING_EDGE",
            FindingCode::WorkflowCycle => "WORKFLOW_CYCLE",
            FindingCode::EmptyWorkflow => "EMPTY_WORKFLOW",
            FindingCode::WindowInverted => "WINDOW_INVERTED",
            FindingCode::SchemaVersionUnsupported => "SCHEMA_VERSION_UNSUPPORTED",
            FindingCode::MappingMismatch => "MAPPING_MISMATCH",
        }
    }

    /// Structural codes are the ones `build_workflow` refuses to construct.
    pub fn is_structural(self) -> bool {
        matches!(
            self,
            FindingCode::DuplicateNodeId
                | FindingCode::DanglingEdge
                | FindingCode::WorkflowCycle
                | FindingCode::EmptyWorkflow
        )
    }
}

impl FromStr for FindingCode {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FindingCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownToken::new("finding code", s))
    }
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

// Ordered by the textual code so reports sort the same way everywhere.
impl PartialOrd for FindingCode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FindingCode {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl Serialize for FindingCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// One violated rule, located by a document path such as
/// `workflow.activities[2].layer.constraints[0]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Finding {
    pub code: FindingCode,
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl Finding {
    pub fn error(code: FindingCode, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        }
    }

    /// Sort key used by every report: path, then code, then message.
    pub fn sort_key(&self) -> (&str, FindingCode, &str) {
        (&self.path, self.code, &self.message)
    }
}

pub(crate) fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Why [`make_constraint`] refused to build a constraint.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("operator not allowed: {0}")]
    OperatorNotAllowed(String),
    #[error("value out of range: {0}")]
    ValueOutOfRange(String),
    #[error("value type mismatch: {0}")]
    ValueTypeMismatch(String),
    #[error("unit mismatch: {0}")]
    UnitMismatch(String),
    #[error("unknown enum value: {0}")]
    EnumValueUnknown(String),
    #[error("unknown metric: {0}")]
    UnknownMetric(String),
}

impl ConstraintError {
    fn from_finding(finding: Finding) -> Self {
        let Finding { code, message, .. } = finding;
        match code {
            FindingCode::OperatorNotAllowed => ConstraintError::OperatorNotAllowed(message),
            FindingCode::ValueOutOfRange => ConstraintError::ValueOutOfRange(message),
            FindingCode::ValueTypeMismatch => ConstraintError::ValueTypeMismatch(message),
            FindingCode::UnitMismatch => ConstraintError::UnitMismatch(message),
            FindingCode::EnumValueUnknown => ConstraintError::EnumValueUnknown(message),
            _ => ConstraintError::UnknownMetric(message),
        }
    }

    pub fn code(&self) -> FindingCode {
        match self {
            ConstraintError::OperatorNotAllowed(_) => FindingCode::OperatorNotAllowed,
            ConstraintError::ValueOutOfRange(_) => FindingCode::ValueOutOfRange,
            ConstraintError::ValueTypeMismatch(_) => FindingCode::ValueTypeMismatch,
            ConstraintError::UnitMismatch(_) => FindingCode::UnitMismatch,
            ConstraintError::EnumValueUnknown(_) => FindingCode::EnumValueUnknown,
            ConstraintError::UnknownMetric(_) => FindingCode::UnknownMetric,
        }
    }
}

/// Builds a constraint on `def`, refusing any combination that
/// [`check_constraint`] would flag. When several rules are violated the
/// first one in report order is returned.
pub fn make_constraint(
    def: &MetricDefinition,
    scope: Scope,
    priority: Priority,
    operator: Operator,
    value: impl Into<Value>,
    unit: Option<&str>,
) -> Result<Constraint, ConstraintError> {
    let constraint = Constraint {
        metric_id: def.metric_id.clone(),
        scope,
        priority,
        operator,
        value: value.into(),
        unit: unit.map(str::to_owned),
    };
    match check_constraint(def, &constraint, "").into_iter().next() {
        None => Ok(constraint),
        Some(finding) => Err(ConstraintError::from_finding(finding)),
    }
}

/// Checks one constraint against its metric definition. Returns one finding
/// per violated rule, sorted by code; an empty list means the constraint is
/// valid. Priority never takes part in the decision.
pub fn check_constraint(def: &MetricDefinition, c: &Constraint, path: &str) -> Vec<Finding> {
    if c.metric_id != def.metric_id {
        return vec![Finding::error(
            FindingCode::UnknownMetric,
            path,
            format!(
                "constraint names metric `{}` but was checked against `{}`",
                c.metric_id, def.metric_id
            ),
        )];
    }

    let mut findings = Vec::new();
    let mut push = |code, message: String| findings.push(Finding::error(code, path, message));

    if !def.allowed_operators.contains(&c.operator) {
        let allowed: Vec<_> = def.allowed_operators.iter().map(|o| o.as_str()).collect();
        push(
            FindingCode::OperatorNotAllowed,
            format!(
                "operator {} is not allowed for `{}` (allowed: {})",
                c.operator,
                def.metric_id,
                allowed.join(", ")
            ),
        );
    }

    match (def.value_type, &c.value) {
        (ValueType::Numeric | ValueType::Percentage, Value::Number(n)) if n.is_finite() => {
            if let Some(range) = &def.numeric_range {
                if !range.contains(*n) {
                    push(
                        FindingCode::ValueOutOfRange,
                        format!("value {} is outside {} for `{}`", c.value, range, def.metric_id),
                    );
                }
            }
        }
        (ValueType::Enum, Value::Text(s)) => {
            let known = def.enum_values.as_deref().unwrap_or_default();
            if !known.iter().any(|v| v == s) {
                push(
                    FindingCode::EnumValueUnknown,
                    format!(
                        "`{s}` is not one of [{}] for `{}`",
                        known.join(", "),
                        def.metric_id
                    ),
                );
            }
        }
        (ValueType::String, Value::Text(_)) | (ValueType::Boolean, Value::Bool(_)) => {}
        (expected, value) => push(
            FindingCode::ValueTypeMismatch,
            format!(
                "`{}` expects a {} value, got {} {}",
                def.metric_id,
                expected.as_str(),
                value.kind(),
                value
            ),
        ),
    }

    if c.unit != def.unit {
        push(
            FindingCode::UnitMismatch,
            format!(
                "unit {} does not match `{}` unit {}",
                describe_unit(c.unit.as_deref()),
                def.metric_id,
                describe_unit(def.unit.as_deref())
            ),
        );
    }

    sort_findings(&mut findings);
    findings
}

fn describe_unit(unit: Option<&str>) -> String {
    match unit {
        Some(u) => format!("`{u}`"),
        None => "none".to_owned(),
    }
}
