//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The store criterion re-executes this binary as writer processes; see
//! [`WRITER_ENV`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use sha2::{Digest, Sha256};
use sla_core::testkit::{
    brute_force_has_cycle, copy_dir, default_catalog_dir, golden_path, is_cycle, oracle_constraint_codes,
    random_constraint, random_document, random_metric_definition, random_request_body, rhms_draft_path,
    write_file, HEADER,
};
use sla_core::{
    build_workflow, check_constraint, load_catalog, parse, serialize_canonical, validate_document,
    validate_workflow, ActivityNode, Catalog, Edge, FileStore, FindingCode, ParseError, SlaStore, Workflow,
    WorkflowError,
};
use sla_service::{app, ServiceConfig};
use tower::ServiceExt;

const WRITER_ENV: &str = "SLA_ACCEPTANCE_WRITER";
const GOLDEN_MAX_RUNTIME: Duration = Duration::from_secs(1);
const ROUND_TRIPS: usize = 1_000;
const DAG_SAMPLES: usize = 10_000;
const DAG_MAX_NODES: usize = 6;
const CONSTRAINT_SAMPLES: usize = 10_000;
const WRITERS: usize = 4;
const PUTS_PER_WRITER: usize = 100;
const SERVICE_BODIES: usize = 200;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    if let Ok(args) = std::env::var(WRITER_ENV) {
        std::process::exit(writer(&args));
    }

    let criteria: [Criterion; 8] = [
        ("rhms_golden_scenario", golden_scenario),
        ("mapping_conformance", mapping_conformance),
        ("round_trip", round_trip),
        ("dag_oracle_equivalence", dag_oracle),
        ("constraint_validator_equivalence", constraint_oracle),
        ("extendibility", extendibility),
        ("store_integrity", store_integrity),
        ("service_differential", service_differential),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn catalog() -> Catalog {
    load_catalog(default_catalog_dir()).expect("default catalog loads")
}

fn run_cli(args: &[&str], stdin: &[u8]) -> (i32, Vec<u8>, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("sla").chain(args.iter().copied());
    let code = sla_cli::run_with(argv, &mut &stdin[..], &mut out, &mut err);
    (code, out, err)
}

fn golden_scenario() -> Outcome {
    let started = Instant::now();
    let catalog_dir = default_catalog_dir().display().to_string();
    let draft = std::fs::read(rhms_draft_path()).map_err(|e| e.to_string())?;
    let (code, built, stderr) = run_cli(&["build", "--from", "-", "--catalog", &catalog_dir], &draft);
    let (vcode, report, _) = run_cli(&["validate", "-", "--catalog", &catalog_dir], &built);
    let elapsed = started.elapsed();

    ensure(code == 0, || {
        format!("build exited {code}: {}", String::from_utf8_lossy(&stderr))
    })?;
    let report: Value = serde_json::from_slice(&report).map_err(|e| e.to_string())?;
    ensure(vcode == 0 && report["findings"] == Value::Array(vec![]), || {
        format!("validation not clean: {report}")
    })?;
    let golden = std::fs::read(golden_path()).map_err(|e| e.to_string())?;
    ensure(built == golden, || {
        "built bytes differ from the golden file".into()
    })?;
    let id = String::from_utf8_lossy(&stderr).trim().to_owned();
    let digest = hex(&Sha256::digest(&golden));
    ensure(id == digest && id.len() == 64, || {
        format!("id {id} != sha256 {digest}")
    })?;
    ensure(elapsed < GOLDEN_MAX_RUNTIME, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "0 findings, {} golden bytes, id {id}, {elapsed:.2?} < 1s",
        golden.len()
    ))
}

fn mapping_conformance() -> Outcome {
    let catalog = catalog();
    let expected = [
        ("Real-time Analysis", "cloud", Some("stream_processing")),
        ("Capture Event of Interest (EoI)", "iot_device", None),
    ];
    for (activity, layer, model) in expected {
        let schema = catalog
            .resolve_activity_schema(activity)
            .map_err(|e| e.to_string())?;
        let got_model = schema.programming_model.as_ref().map(|m| m.resource_id.as_str());
        ensure(
            schema.deployment_layer.resource_id == layer && got_model == model,
            || {
                format!(
                    "{activity}: ({}, {got_model:?})",
                    schema.deployment_layer.resource_id
                )
            },
        )?;
    }
    Ok("(cloud, stream_processing) and (iot_device, none)".into())
}

fn round_trip() -> Outcome {
    let catalog = catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..ROUND_TRIPS {
        let doc = random_document(&mut rng, &catalog);
        let bytes = serialize_canonical(&doc);
        let back = parse(&bytes).map_err(|e| format!("document {i}: {e}"))?;
        ensure(back == doc, || format!("document {i}: parse(serialize(d)) != d"))?;
        ensure(serialize_canonical(&back) == bytes, || {
            format!("document {i}: serialize not idempotent")
        })?;
    }
    Ok(format!("{ROUND_TRIPS} documents, 0 failures"))
}

fn dag_oracle() -> Outcome {
    let catalog = catalog();
    let activity = catalog.list_activities()[0].to_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cyclic = 0;
    for i in 0..DAG_SAMPLES {
        let n = rng.gen_range(1..=DAG_MAX_NODES);
        let ids: Vec<String> = (0..n).map(|k| format!("v{k}")).collect();
        let density = rng.gen_range(0.0..0.6);
        let mut pairs = Vec::new();
        for a in &ids {
            for b in &ids {
                if rng.gen_bool(density) {
                    pairs.push((a.as_str(), b.as_str()));
                }
            }
        }
        let names: Vec<&str> = ids.iter().map(String::as_str).collect();
        let expected = brute_force_has_cycle(&names, &pairs);
        cyclic += usize::from(expected);

        let nodes: Vec<ActivityNode> = ids
            .iter()
            .map(|id| ActivityNode::for_activity(&catalog, id.clone(), &activity).unwrap())
            .collect();
        let edges: Vec<Edge> = pairs.iter().map(|(a, b)| Edge::new(*a, *b)).collect();
        let raw = Workflow {
            nodes: nodes.clone(),
            edges: edges.clone(),
        };
        let reported = validate_workflow(&catalog, &raw)
            .iter()
            .any(|f| f.code == FindingCode::WorkflowCycle);
        let built = build_workflow(nodes, edges);
        let detected = match &built {
            Err(WorkflowError::WorkflowCycle(witness)) => {
                ensure(is_cycle(witness, &pairs), || {
                    format!("graph {i}: bad witness {witness:?}")
                })?;
                true
            }
            Ok(_) => false,
            Err(e) => return Err(format!("graph {i}: unexpected {e}")),
        };
        ensure(detected == expected && reported == expected, || {
            format!("graph {i} {pairs:?}: oracle {expected}, build {detected}, validate {reported}")
        })?;
    }
    Ok(format!(
        "{DAG_SAMPLES} graphs on <= {DAG_MAX_NODES} nodes ({cyclic} cyclic), 0 disagreements"
    ))
}

fn constraint_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut with_findings = 0;
    for i in 0..CONSTRAINT_SAMPLES {
        let def = random_metric_definition(&mut rng);
        let c = random_constraint(&mut rng, &def);
        let got: BTreeSet<FindingCode> = check_constraint(&def, &c, "c")
            .into_iter()
            .map(|f| f.code)
            .collect();
        let expected = oracle_constraint_codes(&def, &c);
        with_findings += usize::from(!expected.is_empty());
        ensure(got == expected, || {
            format!("constraint {i} {c:?} on {def:?}: {got:?} != {expected:?}")
        })?;
    }
    Ok(format!(
        "{CONSTRAINT_SAMPLES} constraints ({with_findings} with findings), 0 disagreements"
    ))
}

fn source_fingerprint(root: &Path) -> BTreeMap<PathBuf, String> {
    fn walk(dir: &Path, out: &mut BTreeMap<PathBuf, String>) {
        let Ok(entries) = std::fs::read_dir(dir) else {
            return;
        };
        for entry in entries.flatten() {
            let path = entry.path();
            let name = entry.file_name();
            if name == "target" || name == ".git" {
                continue;
            }
            if path.is_dir() {
                walk(&path, out);
            } else if matches!(path.extension().and_then(|e| e.to_str()), Some("rs" | "toml")) {
                let bytes = std::fs::read(&path).unwrap_or_default();
                out.insert(path, hex(&Sha256::digest(&bytes)));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(&root.join("crates"), &mut out);
    if let Ok(bytes) = std::fs::read(root.join("Cargo.toml")) {
        out.insert(root.join("Cargo.toml"), hex(&Sha256::digest(&bytes)));
    }
    out
}

fn extendibility() -> Outcome {
    const NEW: &str = "Detect anomalies";
    let workspace = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let before = source_fingerprint(&workspace);

    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let catalog_dir = dir.path().join("catalog");
    copy_dir(&default_catalog_dir(), &catalog_dir).map_err(|e| e.to_string())?;
    write_file(
        &catalog_dir.join("activities/detect_anomalies.csv"),
        &format!("{HEADER}\ndetection_latency,Detection latency,slo,numeric,milliseconds,0,,,lt|lte\n"),
    );
    let manifest = catalog_dir.join("manifest.csv");
    let mut rows = std::fs::read_to_string(&manifest).map_err(|e| e.to_string())?;
    rows.push_str(&format!("{NEW},detect_anomalies,edge,stream_processing\n"));
    std::fs::write(&manifest, rows).map_err(|e| e.to_string())?;
    let catalog_arg = catalog_dir.display().to_string();

    let (code, out, err) = run_cli(&["catalog", "list", "--catalog", &catalog_arg], b"");
    ensure(code == 0, || {
        format!("catalog list exited {code}: {}", String::from_utf8_lossy(&err))
    })?;
    let listed: Value = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
    ensure(
        listed
            .as_array()
            .is_some_and(|a| a.iter().any(|e| e["name"] == NEW)),
        || "missing from `sla catalog list`".into(),
    )?;

    let store = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let config = ServiceConfig::new(&catalog_dir, store.path(), "127.0.0.1:0".parse().unwrap());
    let router = app(&config).map_err(|e| e.to_string())?;
    let served = runtime().block_on(async {
        let req = Request::get("/catalog/activities").body(Body::empty()).unwrap();
        let resp = router.oneshot(req).await.unwrap();
        resp.into_body().collect().await.unwrap().to_bytes()
    });
    let served: Value = serde_json::from_slice(&served).map_err(|e| e.to_string())?;
    ensure(
        served
            .as_array()
            .is_some_and(|a| a.iter().any(|e| e["name"] == NEW)),
        || "missing from GET /catalog/activities".into(),
    )?;

    let draft = serde_json::json!({
        "application": {"type": "Remote Health Monitoring", "agreement_start": "2024-01-01T00:00:00Z", "agreement_end": "2025-01-01T00:00:00Z"},
        "workflow": {
            "activities": [
                {"id": "a", "name": "Capture Event of Interest (EoI)"},
                {"id": "b", "name": NEW, "constraints": [
                    {"metric_id": "detection_latency", "priority": "high", "operator": "lt", "value": 250, "unit": "milliseconds"}
                ]}
            ],
            "edges": [{"from": "a", "to": "b"}]
        }
    });
    let (code, built, err) = run_cli(
        &["build", "--from", "-", "--catalog", &catalog_arg],
        draft.to_string().as_bytes(),
    );
    ensure(code == 0, || {
        format!("build exited {code}: {}", String::from_utf8_lossy(&err))
    })?;
    let extended = load_catalog(&catalog_dir).map_err(|e| e.to_string())?;
    let doc = parse(&built).map_err(|e| e.to_string())?;
    ensure(validate_document(&extended, &doc).valid, || {
        "document is not valid".into()
    })?;

    let after = source_fingerprint(&workspace);
    ensure(!before.is_empty() && before == after, || {
        "source tree changed".into()
    })?;
    let mentions = before
        .keys()
        .filter(|p| std::fs::read_to_string(p).is_ok_and(|s| s.contains("detection_latency")))
        .filter(|p| !p.ends_with("acceptance.rs"))
        .count();
    ensure(mentions == 0, || {
        format!("{mentions} source files mention the new activity")
    })?;
    Ok(format!(
        "listed by CLI and service, valid document built; {} source files unchanged",
        before.len()
    ))
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("runtime")
}

/// Child mode: `<store>|<seed>`. Puts [`PUTS_PER_WRITER`] documents.
fn writer(args: &str) -> i32 {
    let (root, seed) = args.split_once('|').expect("store|seed");
    let catalog = catalog();
    let store = FileStore::open(root)
        .expect("store opens")
        .with_lock_timeout(Duration::from_secs(30));
    let mut rng = ChaCha8Rng::seed_from_u64(seed.parse().expect("seed"));
    for _ in 0..PUTS_PER_WRITER {
        let doc = random_document(&mut rng, &catalog);
        if let Err(e) = store.put(&doc) {
            eprintln!("writer {seed}: {e}");
            return 1;
        }
    }
    0
}

fn store_integrity() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let root = dir.path().join("store");
    FileStore::open(&root).map_err(|e| e.to_string())?;
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;

    let children: Vec<_> = (0..WRITERS)
        .map(|w| {
            Command::new(&exe)
                .env(WRITER_ENV, format!("{}|{}", root.display(), 100 + w))
                .spawn()
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    for (w, child) in children.into_iter().enumerate() {
        let status = child.wait_with_output().map_err(|e| e.to_string())?.status;
        ensure(status.success(), || format!("writer {w} exited with {status}"))?;
    }

    let catalog = catalog();
    let mut expected = BTreeSet::new();
    for w in 0..WRITERS {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + w as u64);
        for _ in 0..PUTS_PER_WRITER {
            expected.insert(sla_core::document_id(&random_document(&mut rng, &catalog)));
        }
    }

    let store = FileStore::open(&root).map_err(|e| e.to_string())?;
    let index = store.list().map_err(|e| e.to_string())?;
    let rescan = store.rescan().map_err(|e| e.to_string())?;
    ensure(index == rescan, || {
        format!("index ({}) != rescan ({})", index.len(), rescan.len())
    })?;
    let ids: BTreeSet<String> = index.iter().map(|s| s.id.clone()).collect();
    ensure(ids == expected, || {
        format!("{} ids indexed, {} expected", ids.len(), expected.len())
    })?;

    let mut files = 0;
    for entry in std::fs::read_dir(root.join("slas")).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_owned();
        ensure(path.extension().is_some_and(|e| e == "json"), || {
            format!("stray file {}", path.display())
        })?;
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        ensure(hex(&Sha256::digest(&bytes)) == name, || {
            format!("{name}: digest mismatch")
        })?;
        files += 1;
    }
    ensure(files == ids.len(), || {
        format!("{files} files for {} index entries", ids.len())
    })?;
    ensure(!root.join(".lock").exists(), || "lock file left behind".into())?;
    Ok(format!(
        "{WRITERS} processes x {PUTS_PER_WRITER} puts, {files} documents, index == rescan, all digests match"
    ))
}

fn service_differential() -> Outcome {
    let catalog = catalog();
    let store = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let config = ServiceConfig::new(
        default_catalog_dir(),
        store.path(),
        "127.0.0.1:0".parse().unwrap(),
    );
    let router = app(&config).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut statuses = BTreeMap::new();

    runtime().block_on(async {
        for i in 0..SERVICE_BODIES {
            let body = random_request_body(&mut rng, &catalog);
            let req = Request::post("/sla/validate")
                .body(Body::from(body.clone()))
                .unwrap();
            let resp = router.clone().oneshot(req).await.unwrap();
            let status = resp.status();
            let bytes = resp.into_body().collect().await.unwrap().to_bytes();
            let got: Value = serde_json::from_slice(&bytes).map_err(|e| format!("body {i}: {e}"))?;
            *statuses.entry(status.as_u16()).or_insert(0) += 1;

            match parse(&body) {
                Ok(doc) => {
                    let expected = serde_json::to_value(validate_document(&catalog, &doc)).unwrap();
                    ensure(status == StatusCode::OK && got == expected, || {
                        format!("body {i}: {status} {got} != {expected}")
                    })?;
                }
                Err(ParseError::SchemaVersionUnsupported(_)) => {
                    ensure(
                        status == StatusCode::OK
                            && got["valid"] == false
                            && got["findings"][0]["code"] == FindingCode::SchemaVersionUnsupported.as_str(),
                        || format!("body {i}: {status} {got}"),
                    )?;
                }
                Err(_) => {
                    ensure(
                        status == StatusCode::BAD_REQUEST && got["code"] == "JSON_SYNTAX",
                        || format!("body {i}: {status} {got}"),
                    )?;
                }
            }
        }
        Ok::<(), String>(())
    })?;
    Ok(format!(
        "{SERVICE_BODIES} bodies, statuses {statuses:?}, 0 mismatches"
    ))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
