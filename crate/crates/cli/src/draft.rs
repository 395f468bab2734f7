//! Drafts: SLA documents with optional sections left out.
//!
//! A draft may omit `schema_version`, `slos`, `workflow.edges`, and for each
//! activity its `deployment_layer`, `programming_model` and `constraints`.
//! Omitted bindings are filled from the catalog mapping; a binding given
//! without a `name` gets the mapped name. Constraints may omit `unit`.

use serde_json::{json, Map, Value};
use sla_core::{document_from_json, map_activity, Catalog, ParseError, SlaDocument, SCHEMA_VERSION};

pub fn parse_draft(catalog: &Catalog, bytes: &[u8]) -> Result<SlaDocument, ParseError> {
    let mut root: Value = serde_json::from_slice(bytes).map_err(|e| ParseError::JsonSyntaxError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    complete(catalog, &mut root)?;
    document_from_json(&root)
}

/// Fills in every omitted optional section of `root` in place.
pub fn complete(catalog: &Catalog, root: &mut Value) -> Result<(), ParseError> {
    let obj = object(root, "$")?;
    obj.entry("schema_version")
        .or_insert_with(|| SCHEMA_VERSION.into());
    let slos = obj.entry("slos").or_insert_with(|| json!([]));
    fill_units(slos);

    let Some(wf) = obj.get_mut("workflow") else {
        return Ok(());
    };
    let wf = object(wf, "$.workflow")?;
    wf.entry("edges").or_insert_with(|| json!([]));
    let Some(Value::Array(activities)) = wf.get_mut("activities") else {
        return Ok(());
    };
    for (i, node) in activities.iter_mut().enumerate() {
        let path = format!("$.workflow.activities[{i}]");
        let node = object(node, &path)?;
        let mapping = node
            .get("name")
            .and_then(Value::as_str)
            .and_then(|name| map_activity(catalog, name).ok());
        let layer = mapping.as_ref().map(|m| m.deployment_layer.clone());
        let model = mapping.and_then(|m| m.programming_model);

        fill_binding(node, "deployment_layer", layer.or(Some(String::new())));
        fill_binding(node, "programming_model", model);
        fill_units(node.entry("constraints").or_insert_with(|| json!([])));
    }
    Ok(())
}

fn object<'a>(v: &'a mut Value, path: &str) -> Result<&'a mut Map<String, Value>, ParseError> {
    v.as_object_mut().ok_or_else(|| ParseError::SchemaShapeError {
        path: path.to_owned(),
        message: "expected an object".to_owned(),
    })
}

fn fill_binding(node: &mut Map<String, Value>, key: &str, mapped: Option<String>) {
    match node.get_mut(key) {
        None => {
            let binding = mapped.map_or(Value::Null, |name| json!({ "name": name, "constraints": [] }));
            node.insert(key.to_owned(), binding);
        }
        Some(Value::Object(b)) => {
            if !b.contains_key("name") {
                b.insert("name".to_owned(), mapped.map_or(Value::Null, Value::String));
            }
            fill_units(b.entry("constraints").or_insert_with(|| json!([])));
        }
        Some(_) => {}
    }
}

fn fill_units(constraints: &mut Value) {
    if let Value::Array(items) = constraints {
        for c in items.iter_mut().filter_map(Value::as_object_mut) {
            c.entry("unit").or_insert(Value::Null);
        }
    }
}
