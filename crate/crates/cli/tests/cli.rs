use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jordan-spectra")).args(args).output().expect("binary runs")
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).expect("every line is JSON"))
        .collect()
}

fn find<'a>(recs: &'a [Value], kind: &str) -> &'a Value {
    recs.iter().find(|r| r["record"] == kind).unwrap_or_else(|| panic!("no {kind} record in {recs:?}"))
}

fn write(dir: &TempDir, name: &str, value: &Value) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, value.to_string()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn real_doc(rows: &[&[f64]]) -> Value {
    let data: Vec<Vec<[f64; 2]>> = rows.iter().map(|r| r.iter().map(|&x| [x, 0.0]).collect()).collect();
    json!({ "n": rows.len(), "data": data })
}

fn strip_wall_time(text: &str) -> String {
    text.lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            if let Some(obj) = v.as_object_mut() {
                obj.remove("wall_time_ms");
            }
            v.to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn header_comes_first() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "d.json", &real_doc(&[&[1.0, 0.0], &[0.0, 2.0]]));
    let out = run(&["spectrum", "--in", &a]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    assert_eq!(recs[0]["record"], "header");
    assert_eq!(recs[0]["format"], "jordan-spectra-report");
    assert_eq!(recs[0]["version"], 1);
    assert_eq!(recs[0]["command"], "spectrum");
}

#[test]
fn classify_rank_one_matrix() {
    let dir = TempDir::new().unwrap();
    // (1, 2, 3) ⊗ (1, -1, 2)
    let x = [1.0, 2.0, 3.0];
    let f = [1.0, -1.0, 2.0];
    let rows: Vec<Vec<f64>> = x.iter().map(|xi| f.iter().map(|fj| xi * fj).collect()).collect();
    let rows: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let a = write(&dir, "a.json", &real_doc(&rows));
    let out = run(&["classify-rank", "--in", &a, "--r", "1", "--s", "2", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(find(&records(&out), "verdict")["verdict"], "RankOne");
}

#[test]
fn classify_rank_two_matrix_reports_witness() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &real_doc(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 0.0]]));
    let out = run(&["classify-rank", "--in", &a, "--r", "1", "--s", "2", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let verdict = find(&records(&out), "verdict").clone();
    assert_eq!(verdict["verdict"], "NotRankOne");
    assert!(verdict["witness"].is_object());
}

#[test]
fn idempotent_fuzz_campaign_passes() {
    let out = run(&["fuzz", "--lemma", "2.8", "--n", "6", "--trials", "10000", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    let summary = find(&recs, "summary");
    assert_eq!(summary["passes"], 10000);
    assert_eq!(summary["failures"], 0);
    assert!(recs.iter().all(|r| r["record"] != "failure"));
}

#[test]
fn recover_generator_document() {
    let dir = TempDir::new().unwrap();
    let t = real_doc(&[&[2.0, 1.0, 0.0], &[0.0, 1.0, -1.0], &[1.0, 0.0, 1.0]]);
    let w = (2.0 * std::f64::consts::PI / 3.0).sin_cos();
    let map = json!({ "kind": "generator", "lambda": [w.1, w.0], "transform": t, "transposed": false });
    let path = write(&dir, "model.json", &map);
    let out = run(&["recover", "--map", &path, "--r", "0", "--s", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let model = find(&records(&out), "model").clone();
    assert_eq!(model["generator_match"], true);
    assert!(model["projective_distance"].as_f64().unwrap() <= 1e-6);
    assert_eq!(model["model"]["transposed"], false);
}

#[test]
fn recover_rejects_doubling_table() {
    let dir = TempDir::new().unwrap();
    let n = 2;
    let images: Vec<Value> = (0..n * n)
        .map(|k| {
            let mut rows = vec![vec![0.0; n]; n];
            rows[k / n][k % n] = 2.0;
            let rows: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            real_doc(&rows)
        })
        .collect();
    let path = write(&dir, "table.json", &json!({ "kind": "table", "n": n, "images": images }));
    let out = run(&["recover", "--map", &path, "--r", "0", "--s", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let verify = run(&["verify", "--map", &path, "--r", "0", "--s", "2", "--trials", "30", "--seed", "1"]);
    assert_eq!(verify.status.code(), Some(1));
    assert!(records(&verify).iter().any(|r| r["record"] == "counterexample"));
}

#[test]
fn spectrum_of_cyclic_matrix() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "c.json", &real_doc(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[2.0, 0.0, 0.0]]));
    let out = run(&["spectrum", "--in", &a]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(find(&records(&out), "spectrum")["spectrum"]["values"].as_array().unwrap().len(), 3);
}

#[test]
fn product_with_signature() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &real_doc(&[&[1.0, 0.0], &[0.0, 0.0]]));
    let b = write(&dir, "b.json", &real_doc(&[&[0.0, 1.0], &[1.0, 0.0]]));
    let out = run(&["product", "--in", &a, "--in", &b, "--signature", "2,1,2"]);
    assert_eq!(out.status.code(), Some(0));
    find(&records(&out), "product");
    let bad = run(&["product", "--in", &a, "--in", &b, "--signature", "1,1,2,2"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn malformed_documents_exit_two() {
    let dir = TempDir::new().unwrap();
    let cases = [
        json!({ "n": 3, "data": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]] }),
        json!({ "n": 2, "data": [[[1, 0], [0, 0]], [[0, 0]]] }),
        json!({ "n": 2, "data": [[[1, 0, 3], [0, 0]], [[0, 0], [1, 0]]] }),
        json!({ "data": [[[1, 0]]] }),
        json!([1, 2, 3]),
    ];
    for (i, doc) in cases.iter().enumerate() {
        let path = write(&dir, &format!("bad{i}.json"), doc);
        let out = run(&["spectrum", "--in", &path]);
        assert_eq!(out.status.code(), Some(2), "case {i}: {doc}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains("schema error"), "case {i}: {stderr}");
        assert!(out.stdout.is_empty());
    }
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(run(&["spectrum", "--in", garbage.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["spectrum", "--in", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["fuzz", "--lemma", "9.9", "--n", "3", "--trials", "2", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(run(&["fuzz", "--lemma", "2.8", "--n", "99", "--trials", "2", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &real_doc(&[&[1.0]]));
    assert_eq!(run(&["spectrum", "--in", &a, "--tol-zero", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["classify-rank", "--in", &a, "--r", "2", "--s", "1", "--seed", "1"]).status.code(), Some(2));
}

#[test]
fn parse_examples_through_spectrum() {
    let dir = TempDir::new().unwrap();
    let identity = write(&dir, "i.json", &json!({ "n": 2, "data": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]] }));
    let vals = find(&records(&run(&["spectrum", "--in", &identity])), "spectrum")["spectrum"]["values"].clone();
    assert_eq!(vals, json!([[1.0, 0.0]]));
    let rotation = write(&dir, "d.json", &json!({ "n": 2, "data": [[[0, 1], [0, 0]], [[0, 0], [0, -1]]] }));
    let vals = find(&records(&run(&["spectrum", "--in", &rotation])), "spectrum")["spectrum"]["values"].clone();
    let mut got: Vec<[f64; 2]> = serde_json::from_value(vals).unwrap();
    got.sort_by(|a, b| a[1].total_cmp(&b[1]));
    assert_eq!(got, vec![[0.0, -1.0], [0.0, 1.0]]);
}

#[test]
fn reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    for id in ["2.3", "2.9", "ck"] {
        let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("{id}-{i}.jsonl"))).collect();
        for p in &paths {
            let out = run(&["--out", p.to_str().unwrap(), "fuzz", "--lemma", id, "--n", "4", "--trials", "40", "--seed", "11"]);
            assert_eq!(out.status.code(), Some(0), "campaign {id}");
        }
        let read = |p: &Path| strip_wall_time(&std::fs::read_to_string(p).unwrap());
        assert_eq!(read(&paths[0]), read(&paths[1]), "campaign {id}");
    }
}

#[test]
fn reconstruct_recovers_hidden_matrix() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &real_doc(&[&[1.0, 2.0, 0.0], &[0.0, -1.0, 3.0], &[4.0, 0.0, 1.0]]));
    for (r, s) in [("1", "2"), ("0", "2")] {
        let out = run(&["reconstruct", "--in", &a, "--r", r, "--s", s, "--seed", "3"]);
        assert_eq!(out.status.code(), Some(0), "r={r} s={s}: {}", String::from_utf8_lossy(&out.stdout));
        find(&records(&out), "reconstruction");
    }
}
