use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/two_cluster")
        .join(name)
}

fn gpgc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpgc"))
        .args(args)
        .env_remove("GPGC_CACHE_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn inputs() -> Vec<String> {
    [
        ("--graph", "edges.txt"),
        ("--features", "features.csv"),
        ("--labels", "labels.csv"),
        ("--split", "split.json"),
    ]
    .iter()
    .flat_map(|(flag, file)| [flag.to_string(), fixture(file).display().to_string()])
    .collect()
}

fn with_inputs<'a>(cmd: &'a str, inputs: &'a [String], extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![cmd];
    args.extend(inputs.iter().map(String::as_str));
    args.extend_from_slice(extra);
    args
}

fn accuracy_line(text: &str) -> Option<f64> {
    let line = text.lines().find(|l| l.starts_with("test accuracy:"))?;
    line.split_whitespace().nth(2)?.parse().ok()
}

#[test]
fn build_kernel_writes_matrix_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("k.gpgcmat");
    let inp = inputs();
    let o = gpgc(&with_inputs(
        "build-kernel",
        &inp,
        &["-o", p(&out), "--variant", "small"],
    ));
    assert!(o.status.success(), "{}", stderr(&o));
    let k = gpgc::io::read_kernel(&out).unwrap();
    assert_eq!(k.n(), 40);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("k.gpgcmat.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(sidecar["config"]["variant"], "small");
}

#[test]
fn rebuild_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let inp = inputs();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = gpgc(&with_inputs(
            "build-kernel",
            &inp,
            &["-o", p(out), "--base", "arccosine", "--threads", "2"],
        ));
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn missing_features_names_the_path() {
    let o = gpgc(&[
        "build-kernel",
        "--graph",
        p(&fixture("edges.txt")),
        "--features",
        "/nonexistent/feat.csv",
        "-o",
        "/tmp/x",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("/nonexistent/feat.csv"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn parse_error_names_file_and_line() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("edges.txt");
    fs::write(&bad, "0 1\n1 two\n").unwrap();
    let o = gpgc(&[
        "build-kernel",
        "--graph",
        p(&bad),
        "--features",
        p(&fixture("features.csv")),
        "-o",
        p(&dir.path().join("k")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("edges.txt") && err.contains('2'), "{err}");
}

#[test]
fn predict_two_cluster_fixture() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("pred.csv");
    let inp = inputs();
    let o = gpgc(&with_inputs("predict", &inp, &["-o", p(&out)]));
    assert!(o.status.success(), "{}", stderr(&o));
    let acc = accuracy_line(&stdout(&o)).expect("accuracy printed");
    assert!(acc >= 0.95, "{acc}");
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next(), Some("node_id,predicted_class"));
    // every node outside the 8 training nodes
    assert_eq!(csv.lines().count(), 1 + 32);
}

#[test]
fn mode_x_fits_on_validation_too() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("pred.csv");
    let report = dir.path().join("report.json");
    let inp = inputs();
    let o = gpgc(&with_inputs(
        "predict",
        &inp,
        &["-o", p(&out), "--mode", "x", "--report", p(&report)],
    ));
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1 + 24);
    let val: Vec<String> = ["0", "1", "2", "3", "21", "22", "25", "26"]
        .map(String::from)
        .to_vec();
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| !val.contains(&l.split(',').next().unwrap().to_string())));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["mode"], "x");
}

#[test]
fn no_test_labels_omits_accuracy() {
    let dir = TempDir::new().unwrap();
    let labels = fs::read_to_string(fixture("labels.csv")).unwrap();
    let split: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixture("split.json")).unwrap()).unwrap();
    let keep: Vec<u64> = ["train", "val"]
        .iter()
        .flat_map(|k| {
            split[k]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_u64().unwrap())
        })
        .collect();
    let trimmed: String = labels
        .lines()
        .filter(|l| {
            l.starts_with("node_id")
                || keep.contains(&l.split(',').next().unwrap().parse().unwrap())
        })
        .map(|l| format!("{l}\n"))
        .collect();
    let lab = dir.path().join("labels.csv");
    fs::write(&lab, trimmed).unwrap();
    let out = dir.path().join("pred.csv");
    let o = gpgc(&[
        "predict",
        "--graph",
        p(&fixture("edges.txt")),
        "--features",
        p(&fixture("features.csv")),
        "--labels",
        p(&lab),
        "--split",
        p(&fixture("split.json")),
        "-o",
        p(&out),
        "--with-mean",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(accuracy_line(&stdout(&o)).is_none());
    assert!(accuracy_line(&stderr(&o)).is_none());
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("node_id,predicted_class,mean_0,mean_1")
    );
}

#[test]
fn precomputed_kernel_matches_inline_build() {
    let dir = TempDir::new().unwrap();
    let inp = inputs();
    let k = dir.path().join("k");
    assert!(gpgc(&with_inputs("build-kernel", &inp, &["-o", p(&k)]))
        .status
        .success());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(
        gpgc(&with_inputs("predict", &inp, &["-o", p(&a), "--with-mean"]))
            .status
            .success()
    );
    assert!(gpgc(&with_inputs(
        "predict",
        &inp,
        &["-o", p(&b), "--with-mean", "--kernel-file", p(&k)]
    ))
    .status
    .success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn cache_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("cache");
    let inp = inputs();
    let o = Command::new(env!("CARGO_BIN_EXE_gpgc"))
        .args(with_inputs(
            "predict",
            &inp,
            &["-o", p(&dir.path().join("p.csv"))],
        ))
        .env("GPGC_CACHE_DIR", &cache)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let entries: Vec<_> = fs::read_dir(&cache).unwrap().collect();
    assert_eq!(entries.len(), 1);
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("k");
    let body = serde_json::json!({
        "graph": fixture("edges.txt"),
        "features": fixture("features.csv"),
        "output": out,
        "kernel": {"variant": "small", "delta_w": 0.5, "base": {"kind": "inner_product"}}
    });
    fs::write(&cfg, body.to_string()).unwrap();
    let o = gpgc(&["--config", p(&cfg), "build-kernel", "--delta-w", "0.25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("k.json")).unwrap()).unwrap();
    assert_eq!(sidecar["config"]["delta_w"], 0.25);
    assert_eq!(sidecar["config"]["variant"], "small");
}

#[test]
fn grid_search_single_point_echoes_config() {
    let dir = TempDir::new().unwrap();
    let grid = dir.path().join("grid.json");
    fs::write(
        &grid,
        r#"{"variant": "big", "delta_w": [0.137], "base_kernels": [{"kind": "arccosine"}], "sigma_tau_sq": [0.1]}"#,
    )
    .unwrap();
    let inp = inputs();
    let o = gpgc(&with_inputs("grid-search", &inp, &["--grid", p(&grid)]));
    assert!(o.status.success(), "{}", stderr(&o));
    let best: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(best["delta_w"], 0.137);
    assert_eq!(best["base"]["kind"], "arccosine");
    assert_eq!(best["sigma_tau_sq"], 0.1);
}

#[test]
fn validate_mc_bundled_fixture() {
    let o = gpgc(&[
        "validate-mc",
        "--widths",
        "4096",
        "--samples",
        "400",
        "--tolerance",
        "0.08",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("discrepancy"));
}

#[test]
fn validate_mc_exit_follows_tolerance() {
    let o = gpgc(&[
        "validate-mc",
        "--widths",
        "16",
        "--samples",
        "4",
        "--tolerance",
        "1e-6",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = gpgc(&[
        "validate-mc",
        "--widths",
        "16",
        "--samples",
        "4",
        "--tolerance",
        "1e6",
    ]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn knn_graph_rejects_large_k() {
    let o = gpgc(&[
        "knn-graph",
        "--features",
        p(&fixture("features.csv")),
        "-k",
        "40",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("usage"), "{}", stderr(&o));
}

#[test]
fn knn_graph_round_trips() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("g.txt");
    let o = gpgc(&[
        "knn-graph",
        "--features",
        p(&fixture("features.csv")),
        "-k",
        "3",
        "-o",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let g = gpgc::io::read_edge_list(&out, 40).unwrap();
    assert!((0..40).all(|i| g.degree(i) >= 3));
}

#[test]
fn benchmark_single_size() {
    let o = gpgc(&["benchmark", "--sizes", "64", "--trials", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("slope: n/a"));
}

#[test]
fn seeded_runs_repeat() {
    let run = || {
        stdout(&gpgc(&[
            "validate-mc",
            "--widths",
            "32",
            "--samples",
            "20",
            "--seed",
            "9",
        ]))
    };
    let strip = |s: String| {
        s.lines()
            .map(|l| l.rsplit_once(' ').map_or(l, |x| x.0).to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(run()), strip(run()));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(gpgc(&["frobnicate"]).status.code(), Some(2));
}
