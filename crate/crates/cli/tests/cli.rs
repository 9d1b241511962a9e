use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn apiscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apiscope"))
        .args(args)
        .env_remove("RUST_BACKTRACE")
        .env_remove("RUST_LIB_BACKTRACE")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = apiscope(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const ITEMS_AND_ORDERS: [(&str, &str); 6] = [
    ("/api/v1/items/123", "items"),
    ("/api/v1/items/456", "items"),
    ("/api/v1/items/789", "items"),
    ("/api/v1/order/812/status", "order"),
    ("/api/v1/order/947/status", "order"),
    ("/api/v1/order/305/status", "order"),
];

fn write_fixture(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("fixture.jsonl");
    let mut text = String::new();
    for (i, (url, label)) in ITEMS_AND_ORDERS.iter().enumerate() {
        text.push_str(&format!(
            "{{\"id\":{i},\"method\":\"GET\",\"url\":\"https://shop.test{url}\",\"content_type\":\"application/json\",\"label\":\"{label}\"}}\n"
        ));
    }
    fs::write(&path, text).unwrap();
    path
}

fn templates(doc: &str) -> Vec<String> {
    let v: Value = serde_json::from_str(doc).unwrap();
    let mut t: Vec<String> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["template"].as_str().unwrap().to_string())
        .collect();
    t.sort();
    t
}

#[test]
fn discover_emits_two_templates() {
    let dir = TempDir::new().unwrap();
    let input = write_fixture(dir.path());
    let doc = ok(&["discover", "--in", path_str(&input)]);
    assert_eq!(
        templates(&doc),
        ["/api/v1/items/{*}", "/api/v1/order/{*}/status"]
    );
}

#[test]
fn force_kmeans_keeps_templates() {
    let dir = TempDir::new().unwrap();
    let input = write_fixture(dir.path());
    let plain = ok(&["discover", "--in", path_str(&input)]);
    let forced = ok(&["discover", "--in", path_str(&input), "--force-kmeans"]);
    assert_eq!(templates(&plain), templates(&forced));
}

#[test]
fn discover_writes_dumps() {
    let dir = TempDir::new().unwrap();
    let input = write_fixture(dir.path());
    let out = dir.path().join("clusters.json");
    let tpl = dir.path().join("templates.json");
    let norm = dir.path().join("normalized.jsonl");
    let dropped = dir.path().join("dropped.jsonl");
    ok(&[
        "discover",
        "--in",
        path_str(&input),
        "--out",
        path_str(&out),
        "--dump-templates",
        path_str(&tpl),
        "--dump-normalized",
        path_str(&norm),
        "--emit-dropped",
        path_str(&dropped),
    ]);
    assert_eq!(templates(&fs::read_to_string(&out).unwrap()).len(), 2);
    assert_eq!(templates(&fs::read_to_string(&tpl).unwrap()).len(), 2);
    let norm = fs::read_to_string(&norm).unwrap();
    assert_eq!(norm.lines().count(), 6);
    assert_eq!(norm.lines().next(), Some("GET\t/api/v1/items/123"));
    assert_eq!(fs::read_to_string(&dropped).unwrap(), "");
}

#[test]
fn unreadable_input_fails_with_message() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let out = apiscope(&["discover", "--in", path_str(&missing)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cannot read"), "{err}");
}

#[test]
fn malformed_input_fails() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.har");
    fs::write(&bad, "{ not json").unwrap();
    let out = apiscope(&["discover", "--in", path_str(&bad)]);
    assert!(!out.status.success());
}

#[test]
fn unknown_flag_prints_usage() {
    let out = apiscope(&["discover", "--no-such-flag"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
}

fn evaluate_json(dir: &Path, input: &Path, clusters: &str) -> Value {
    let cpath = dir.join("clusters.json");
    fs::write(&cpath, clusters).unwrap();
    let text = ok(&[
        "evaluate",
        "--in",
        path_str(input),
        "--clusters",
        path_str(&cpath),
    ]);
    serde_json::from_str(&text).unwrap()
}

#[test]
fn evaluate_perfect_fixture_is_all_100() {
    let dir = TempDir::new().unwrap();
    let input = write_fixture(dir.path());
    let doc = ok(&["discover", "--in", path_str(&input)]);
    let report = evaluate_json(dir.path(), &input, &doc);
    for key in ["pga", "rga", "fga"] {
        assert_eq!(report[key].as_f64().unwrap(), 100.0, "{key}");
    }
    assert_eq!(report["purity"].as_f64().unwrap(), 1.0);
}

#[test]
fn evaluate_split_fixture_matches_hand_count() {
    let dir = TempDir::new().unwrap();
    let input = write_fixture(dir.path());
    // items is exact; order is split into {3,4} and {5}.
    let clusters = r#"[
        {"method":"GET","template":"/api/v1/items/{*}","member_ids":[0,1,2]},
        {"method":"GET","template":"/api/v1/order/{*}/status","member_ids":[3,4]},
        {"method":"GET","template":"/api/v1/order/305/status","member_ids":[5]}
    ]"#;
    let report = evaluate_json(dir.path(), &input, clusters);
    assert_eq!(report["tp"], 1);
    assert_eq!(report["fp"], 2);
    assert_eq!(report["fn"], 1);
    let pga = report["pga"].as_f64().unwrap();
    let rga = report["rga"].as_f64().unwrap();
    let fga = report["fga"].as_f64().unwrap();
    assert!((pga - 100.0 / 3.0).abs() < 1e-9);
    assert!((rga - 50.0).abs() < 1e-9);
    assert!((fga - 40.0).abs() < 1e-9);
    assert!((report["purity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn evaluate_empty_clusters_reports_flagged_zero() {
    let dir = TempDir::new().unwrap();
    let input = write_fixture(dir.path());
    let report = evaluate_json(dir.path(), &input, "[]");
    assert_eq!(report["tp"], 0);
    assert_eq!(report["fga"].as_f64().unwrap(), 0.0);
    let undefined: Vec<&str> = report["undefined_metrics"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(undefined.contains(&"pga"), "{undefined:?}");
}

#[test]
fn evaluate_without_labels_names_requirement() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("unlabeled.jsonl");
    fs::write(
        &input,
        "{\"id\":0,\"method\":\"GET\",\"url\":\"/api/a/1\"}\n",
    )
    .unwrap();
    let cpath = dir.path().join("c.json");
    fs::write(&cpath, "[]").unwrap();
    let out = apiscope(&[
        "evaluate",
        "--in",
        path_str(&input),
        "--clusters",
        path_str(&cpath),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ground truth"), "{err}");
}

#[test]
fn evaluate_csv_row() {
    let dir = TempDir::new().unwrap();
    let input = write_fixture(dir.path());
    let doc = ok(&["discover", "--in", path_str(&input)]);
    let cpath = dir.path().join("c.json");
    fs::write(&cpath, doc).unwrap();
    let csv = dir.path().join("r.csv");
    ok(&[
        "evaluate",
        "--in",
        path_str(&input),
        "--clusters",
        path_str(&cpath),
        "--csv",
        path_str(&csv),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("dataset,noise_type,noise_ratio,seed"));
    assert!(lines[1].ends_with("100.00,100.00,100.00,1.0000"), "{}", lines[1]);
}

fn small_corpus_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("bench.toml");
    fs::write(
        &cfg,
        "[corpus]\nendpoint_count = 6\nrequests_per_endpoint = 15\nseed = 7\n",
    )
    .unwrap();
    cfg
}

#[test]
fn bench_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = small_corpus_config(dir.path());
    let args = [
        "bench",
        "--config",
        path_str(&cfg),
        "--kind",
        "lexify,interfere",
        "--ratio",
        "0.25,0.75",
        "--seeds",
        "1,2",
    ];
    let a = ok(&args);
    let b = ok(&args);
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn bench_ratio_zero_equals_clean_run() {
    let dir = TempDir::new().unwrap();
    let cfg = small_corpus_config(dir.path());
    let csv = ok(&[
        "bench",
        "--config",
        path_str(&cfg),
        "--kind",
        "lexify,interfere",
        "--ratio",
        "0",
        "--seeds",
        "1",
    ]);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    let metrics = |r: &str| r.splitn(5, ',').nth(4).unwrap().to_string();
    assert_eq!(metrics(rows[0]), metrics(rows[1]));
}

#[test]
fn config_file_is_honored_and_flags_override_it() {
    let dir = TempDir::new().unwrap();
    let input = write_fixture(dir.path());
    let cfg = dir.path().join("c.toml");
    // Mining off: every request lands in the degenerate group.
    fs::write(&cfg, "[ablations]\ndisable_template_mining = true\n").unwrap();
    let doc = ok(&["discover", "--in", path_str(&input), "--config", path_str(&cfg)]);
    let v: Value = serde_json::from_str(&doc).unwrap();
    assert!(v.as_array().unwrap().iter().all(|c| c["method"] == "*"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[refiner]\nno_such_key = 1\n").unwrap();
    let out = apiscope(&["discover", "--in", path_str(&input), "--config", path_str(&bad)]);
    assert!(!out.status.success());

    let seeded = dir.path().join("s.toml");
    fs::write(&seeded, "seed = 3\n").unwrap();
    let a = ok(&["discover", "--in", path_str(&input), "--config", path_str(&seeded)]);
    let b = ok(&["discover", "--in", path_str(&input), "--seed", "3"]);
    assert_eq!(a, b);
}

#[test]
fn all_toggles_lower_fga_on_synthetic_corpus() {
    let run = |extra: &[&str]| -> f64 {
        let mut args = vec![
            "bench", "--kind", "interfere", "--ratio", "0.5", "--seeds", "42",
        ];
        args.extend_from_slice(extra);
        let csv = ok(&args);
        let row = csv.lines().nth(1).unwrap();
        row.split(',').nth(9).unwrap().parse().unwrap()
    };
    let full = run(&[]);
    let ablated = run(&["--disable-nf", "--disable-templates", "--force-kmeans"]);
    assert!(ablated < full, "full {full}, ablated {ablated}");
}

#[test]
fn noise_then_ingest_round_trip() {
    let dir = TempDir::new().unwrap();
    let input = write_fixture(dir.path());
    let noisy = dir.path().join("noisy.jsonl");
    ok(&[
        "noise",
        "--in",
        path_str(&input),
        "--out",
        path_str(&noisy),
        "--kind",
        "interfere",
        "--ratio",
        "0.5",
        "--seed",
        "9",
    ]);
    let text = fs::read_to_string(&noisy).unwrap();
    assert_eq!(text.lines().count(), 9);
    let again = ok(&["ingest", "--in", path_str(&noisy)]);
    assert_eq!(again, text);
}

#[test]
fn ingest_har() {
    let dir = TempDir::new().unwrap();
    let har = dir.path().join("cap.har");
    fs::write(
        &har,
        r#"{"log":{"entries":[
            {"request":{"method":"GET","url":"https://h/api/v1/items/1","headers":[]},
             "response":{"status":200,"content":{"mimeType":"application/json","size":10}}}
        ]}}"#,
    )
    .unwrap();
    let out = ok(&["ingest", "--in", path_str(&har)]);
    let v: Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(v["method"], "GET");
    assert_eq!(v["url"], "https://h/api/v1/items/1");
}
