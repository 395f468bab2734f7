use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use sla_core::testkit::{default_catalog_dir, golden_path, rhms_draft_path, GOLDEN_RHMS_SHA256};
use tempfile::TempDir;

fn sla(args: &[&str], stdin: Option<&[u8]>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sla"));
    cmd.args(args)
        .env_remove("SLA_CATALOG_DIR")
        .env_remove("SLA_STORE_DIR")
        .env("RUST_LOG", "off")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let mut child = cmd.spawn().unwrap();
    let mut pipe = child.stdin.take().unwrap();
    if let Some(bytes) = stdin {
        pipe.write_all(bytes).unwrap();
    }
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn catalog_arg() -> String {
    default_catalog_dir().display().to_string()
}

fn path(p: &Path) -> String {
    p.display().to_string()
}

fn golden() -> Vec<u8> {
    std::fs::read(golden_path()).unwrap()
}

#[test]
fn validate_golden_exits_zero() {
    let out = sla(
        &["validate", &path(&golden_path()), "--catalog", &catalog_arg()],
        None,
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report, serde_json::json!({"valid": true, "findings": []}));
}

#[test]
fn validate_without_file_is_usage_error() {
    let out = sla(&["validate", "--catalog", &catalog_arg()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn validate_reports_cycles() {
    let dir = TempDir::new().unwrap();
    let mut doc: Value = serde_json::from_slice(&golden()).unwrap();
    doc["workflow"]["edges"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!({"from": "n5", "to": "n1"}));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_vec(&doc).unwrap()).unwrap();

    let out = sla(&["validate", &path(&bad), "--catalog", &catalog_arg()], None);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["valid"], false);
    assert!(report["findings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["code"] == "WORKFLOW_CYCLE"));
}

#[test]
fn validate_broken_json_is_a_validation_failure() {
    let out = sla(
        &["validate", "-", "--catalog", &catalog_arg()],
        Some(b"{\"schema_version\":"),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_input_file_is_io_error() {
    let out = sla(
        &["validate", "/nonexistent/doc.json", "--catalog", &catalog_arg()],
        None,
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_catalog_is_usage_or_io_error() {
    let out = sla(&["catalog", "list"], None);
    assert_eq!(out.status.code(), Some(2));
    let out = sla(&["catalog", "list", "--catalog", "/nonexistent/catalog"], None);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn catalog_comes_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_sla"))
        .args(["catalog", "list"])
        .env("SLA_CATALOG_DIR", default_catalog_dir())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let list: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(list.as_array().unwrap().len(), 5);
}

#[test]
fn catalog_show_and_unknown_activity() {
    let out = sla(
        &[
            "catalog",
            "show",
            "Real-time Analysis",
            "--catalog",
            &catalog_arg(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let schema: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(schema["deployment_layer"]["resource_id"], "cloud");
    assert_eq!(schema["programming_model"]["resource_id"], "stream_processing");

    let out = sla(
        &["catalog", "show", "Brew coffee", "--catalog", &catalog_arg()],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
}

#[test]
fn build_rhms_draft_matches_golden() {
    let out = sla(
        &[
            "build",
            "--from",
            &path(&rhms_draft_path()),
            "--catalog",
            &catalog_arg(),
        ],
        None,
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(out.stdout, golden());
    assert_eq!(String::from_utf8(out.stderr).unwrap().trim(), GOLDEN_RHMS_SHA256);
}

#[test]
fn build_is_deterministic_and_pipes_into_validate() {
    let draft = std::fs::read(rhms_draft_path()).unwrap();
    let first = sla(
        &["build", "--from", "-", "--catalog", &catalog_arg()],
        Some(&draft),
    );
    let second = sla(
        &["build", "--from", "-", "--catalog", &catalog_arg()],
        Some(&draft),
    );
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);

    let check = sla(
        &["validate", "-", "--catalog", &catalog_arg()],
        Some(&first.stdout),
    );
    assert_eq!(check.status.code(), Some(0));
}

#[test]
fn build_reorders_workflow_canonically() {
    let mut draft: Value = serde_json::from_slice(&std::fs::read(rhms_draft_path()).unwrap()).unwrap();
    draft["workflow"]["activities"].as_array_mut().unwrap().reverse();
    draft["workflow"]["edges"].as_array_mut().unwrap().reverse();
    let out = sla(
        &["build", "--from", "-", "--catalog", &catalog_arg()],
        Some(draft.to_string().as_bytes()),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(out.stdout, golden());
}

#[test]
fn build_without_slos_is_valid() {
    let mut draft: Value = serde_json::from_slice(&std::fs::read(rhms_draft_path()).unwrap()).unwrap();
    draft.as_object_mut().unwrap().remove("slos");
    let out = sla(
        &["build", "--from", "-", "--catalog", &catalog_arg()],
        Some(draft.to_string().as_bytes()),
    );
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["slos"], serde_json::json!([]));
}

#[test]
fn build_of_invalid_draft_puts_report_on_stderr() {
    let mut draft: Value = serde_json::from_slice(&std::fs::read(rhms_draft_path()).unwrap()).unwrap();
    draft["slos"][0]["operator"] = "gt".into();
    let out = sla(
        &["build", "--from", "-", "--catalog", &catalog_arg()],
        Some(draft.to_string().as_bytes()),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(report["findings"][0]["code"], "OPERATOR_NOT_ALLOWED");
    assert_eq!(report["findings"][0]["path"], "app_slos[0]");
}

#[test]
fn build_put_get_reproduces_bytes() {
    let store = TempDir::new().unwrap();
    let store_arg = path(store.path());
    let dir = TempDir::new().unwrap();
    let built = sla(
        &[
            "build",
            "--from",
            &path(&rhms_draft_path()),
            "--catalog",
            &catalog_arg(),
        ],
        None,
    );
    let file = dir.path().join("rhms.json");
    std::fs::write(&file, &built.stdout).unwrap();

    let put = sla(&["store", "put", &path(&file), "--store", &store_arg], None);
    assert_eq!(
        put.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&put.stderr)
    );
    let id = String::from_utf8(put.stdout).unwrap().trim().to_owned();
    assert_eq!(id, GOLDEN_RHMS_SHA256);

    let get = sla(&["store", "get", &id, "--store", &store_arg], None);
    assert_eq!(get.status.code(), Some(0));
    assert_eq!(get.stdout, built.stdout);

    let list = sla(&["store", "list", "--store", &store_arg], None);
    let list: Value = serde_json::from_slice(&list.stdout).unwrap();
    assert_eq!(list[0]["id"], id.as_str());
    assert_eq!(list[0]["size_bytes"], built.stdout.len());
}

#[test]
fn store_get_unknown_id_fails() {
    let store = TempDir::new().unwrap();
    let out = sla(
        &["store", "get", &"a".repeat(64), "--store", &path(store.path())],
        None,
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
}

#[test]
fn store_requires_a_directory() {
    let out = sla(&["store", "list"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_goes_to_stdout() {
    let out = sla(&["--help"], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("validate"));
}

#[test]
fn run_with_captures_streams() {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let code = sla_cli::run_with(
        ["sla", "catalog", "list", "--catalog", &catalog_arg()],
        &mut std::io::empty(),
        &mut stdout,
        &mut stderr,
    );
    assert_eq!(code, 0);
    let list: Value = serde_json::from_slice(&stdout).unwrap();
    assert_eq!(list[3]["name"], "Real-time Analysis");
    assert!(stderr.is_empty());
}
