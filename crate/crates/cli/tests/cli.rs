use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{DMatrix, DVector};
use neurocorr::data::{save_csv, standard_normals};
use neurocorr::network::write_snapshot;
use neurocorr::{initialize, Activation, Init, NetworkSpec};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_neurocorr"));
    c.env_remove("NEUROCORR_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn neurocorr")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_of(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn write_matrix(dir: &Path, name: &str, m: &DMatrix<f64>, labels: Option<&[u32]>) -> PathBuf {
    let p = dir.join(name);
    save_csv(m, labels, &p).unwrap();
    p
}

fn mnist() -> (String, String) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-10k");
    (
        dir.join("images-idx3-ubyte.gz").display().to_string(),
        dir.join("labels-idx1-ubyte.gz").display().to_string(),
    )
}

#[test]
fn nc_of_identical_columns_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let m = DMatrix::from_fn(20, 2, |i, _| (i as f64).sin());
    let p = write_matrix(dir.path(), "acts.csv", &m, None);
    let o = run(&["nc", "--input", p.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("NC 1.000000\n"), "{}", stdout(&o));
    let v = json_of(&run(&["nc", "--input", p.to_str().unwrap(), "--json"]));
    assert_eq!(v["value"], 1.0);
    assert_eq!(v["pair_count"], 2);
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn wc_of_orthogonal_columns_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_matrix(dir.path(), "w.csv", &DMatrix::identity(4, 3), None);
    let v = json_of(&run(&["wc", "--input", p.to_str().unwrap(), "--abs", "--json"]));
    assert_eq!(v["value"], 0.0);
    assert_eq!(v["absolute"], true);
}

#[test]
fn wc_reads_a_snapshot_layer() {
    let dir = tempfile::tempdir().unwrap();
    let net = initialize(&NetworkSpec::new(vec![6, 5, 3], Activation::Tanh, Init::Xavier, 4).unwrap());
    let p = dir.path().join("net.cent");
    write_snapshot(&net, &p).unwrap();
    let v = json_of(&run(&["wc", "--snapshot", p.to_str().unwrap(), "--layer", "2", "--json"]));
    let expected = neurocorr::weight_correlation(&net.weights[1], false).unwrap().value;
    assert_eq!(v["value"].as_f64().unwrap(), expected);
    assert_eq!(run(&["wc", "--snapshot", p.to_str().unwrap(), "--layer", "3"]).status.code(), Some(2));
}

#[test]
fn gamma_fully_connected_is_m_over_gamma() {
    let o = run(&["gamma", "--fully-connected", "784", "30", "--gamma", "1"]);
    assert_eq!(stdout(&o), "Gamma 784\nneurons 30\n");
    let v = json_of(&run(&["gamma", "--conv1d", "8", "3", "1", "--json"]));
    assert!(v["value"].as_f64().unwrap() < 3.0);
}

#[test]
fn gamma_from_parent_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("parents.json");
    fs::write(&p, r#"{"previous_size": 4, "parent_sets": [[0, 1], [2, 3]]}"#).unwrap();
    let v = json_of(&run(&["gamma", "--parents", p.to_str().unwrap(), "--json"]));
    assert_eq!(v["value"], 2.0);
}

#[test]
fn entropy_spaces_agree_on_independent_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    let o = run(&["data", "gaussian", "--n", "2000", "--d", "3", "--seed", "5", "--output", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let v = json_of(&run(&["entropy", "--input", csv.to_str().unwrap(), "--json"]));
    let est = v["estimates"].as_array().unwrap();
    let (o, p) = (est[0]["value"].as_f64().unwrap(), est[1]["value"].as_f64().unwrap());
    assert_eq!(est[0]["space"], "original");
    assert_eq!(est[1]["space"], "projected");
    assert!(((o - p) / o).abs() < 0.10, "original {o} vs projected {p}");

    let bits = json_of(&run(&["entropy", "--input", csv.to_str().unwrap(), "--space", "original", "--bits", "--json"]));
    assert_eq!(bits["unit"], "bits");
    assert!((bits["estimates"][0]["value"].as_f64().unwrap() - o / std::f64::consts::LN_2).abs() < 1e-9);
}

#[test]
fn duplicated_column_inflates_the_original_space() {
    let dir = tempfile::tempdir().unwrap();
    let z = standard_normals(1500, 8);
    let m = DMatrix::from_fn(1500, 2, |i, _| z[i]);
    let p = write_matrix(dir.path(), "dup.csv", &m, None);
    let v = json_of(&run(&["entropy", "--input", p.to_str().unwrap(), "--json"]));
    let (o, pr) = (v["estimates"][0]["value"].as_f64().unwrap(), v["estimates"][1]["value"].as_f64().unwrap());
    assert!(o > pr, "original {o} vs projected {pr}");
}

#[test]
fn width_selection_reports_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let z = standard_normals(2 * 120, 9);
    let labels: Vec<u32> = (0..120).map(|i| (i % 2) as u32).collect();
    let m = DMatrix::from_fn(120, 2, |i, j| 0.5 * z[2 * i + j] + 3.0 * labels[i] as f64);
    let p = write_matrix(dir.path(), "blobs.csv", &m, Some(&labels));
    let path = p.to_str().unwrap();
    let v = json_of(&run(&["entropy", "--input", path, "--has-labels", "--select-width", "--beta", "0.5", "--json"]));
    let sel = &v["estimates"][1]["diagnostics"]["width_selection"];
    assert_eq!(sel["grid"].as_array().unwrap().len(), 20);
    assert_eq!(sel["beta"], 0.5);
    let text = stdout(&run(&["entropy", "--input", path, "--has-labels", "--select-width", "--space", "projected"]));
    assert!(text.contains("width selection (beta 0.5)"));
    assert_eq!(text.lines().filter(|l| l.ends_with(" *")).count(), 1);
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "x0,x1\n1,2\n3\n").unwrap();
    let o = run(&["nc", "--input", ragged.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("load_csv"));

    assert_eq!(run(&["nc", "--input", "/nonexistent/acts.csv"]).status.code(), Some(2));
    assert_eq!(run(&["nc"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));

    let constant = write_matrix(dir.path(), "c.csv", &DMatrix::from_element(10, 2, 1.0), None);
    let o = run(&["entropy", "--input", constant.to_str().unwrap(), "--space", "original"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("entropy_original"));

    let zero = write_matrix(dir.path(), "z.csv", &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), None);
    assert_eq!(run(&["wc", "--input", zero.to_str().unwrap()]).status.code(), Some(3));

    let out = dir.path().join("out");
    let o = run(&[
        "experiment", "groundtruth", "--n", "60", "--d", "2", "--variances", "1", "--seeds", "0", "--epochs", "3",
        "--lr", "1e300", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gaussian_manifest_regenerates_the_same_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(run(&["data", "gaussian", "--n", "50", "--d", "2", "--variance", "0.3", "--seed", "11", "--output", a.to_str().unwrap()])
        .status
        .success());
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(manifest["algorithm"], neurocorr::data::GAUSSIAN_ALGORITHM);
    assert_eq!(manifest["n"], 50);
    let m = dir.path().join("a.json");
    assert!(run(&["data", "regenerate", "--manifest", m.to_str().unwrap(), "--output", b.to_str().unwrap()])
        .status
        .success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn inspect_prints_snapshot_header() {
    let dir = tempfile::tempdir().unwrap();
    let mut net = initialize(&NetworkSpec::new(vec![4, 3, 2], Activation::Relu, Init::HeNormal, 2).unwrap());
    net.epoch = 7;
    net.train_accuracy = Some(0.5);
    net.biases[0] = DVector::from_element(3, 0.1);
    let p = dir.path().join("s.cent");
    write_snapshot(&net, &p).unwrap();
    let text = stdout(&run(&["inspect", p.to_str().unwrap()]));
    assert!(text.contains("epoch 7\n") && text.contains("layers 4-3-2\n") && text.contains("test_accuracy n/a"));
    let v = json_of(&run(&["inspect", p.to_str().unwrap(), "--json"]));
    assert_eq!(v["layer_sizes"], serde_json::json!([4, 3, 2]));

    let bad = dir.path().join("bad.cent");
    fs::write(&bad, b"NOPE").unwrap();
    assert_eq!(run(&["inspect", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("NEUROCORR_OUT", dir.path())
        .args(["experiment", "sweep-init", "--n-values", "5,10,20", "--m-values", "5,10,20", "--seeds", "3"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let base = dir.path().join("sweep-init");
    for f in ["report.json", "sweep.csv", "vary_n.csv", "vary_m.csv", "sweep_init.svg"] {
        assert!(base.join(f).exists(), "{f} missing");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(base.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seeds"], serde_json::json!([0, 1, 2]));
    assert_eq!(report["experiment"], "sweep-init");
    let header = fs::read_to_string(base.join("vary_n.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), "n,random,truncated-normal,xavier,he-normal");
}

#[test]
fn linear_experiment_refuses_nonlinear_activations() {
    let (images, labels) = mnist();
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "experiment", "linear", "--images", &images, "--labels", &labels, "--activation", "tanh", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn linear_experiment_writes_a_curve_per_hidden_layer() {
    let (images, labels) = mnist();
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "experiment", "linear", "--images", &images, "--labels", &labels, "--train-size", "300", "--spec",
        "I-8-8-8-O", "--epochs", "4", "--record-every", "2", "--entropy-samples", "150", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let base = dir.path().join("linear");
    let header = fs::read_to_string(base.join("entropy_curves.csv")).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        "epoch,original_L1,original_L2,original_L3,projected_L1,projected_L2,projected_L3"
    );
    assert_eq!(header.lines().count(), 1 + 3);
    assert!(base.join("entropy_layers.svg").exists());
    let report: Value = serde_json::from_str(&fs::read_to_string(base.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["checks"].as_array().unwrap().len(), 3);
    assert!(report["summary"]["estimate_error_range"]["definition"].is_string());
}
