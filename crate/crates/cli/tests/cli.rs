use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mlspl::dataio::{load_arff, LabelSpec};
use mlspl::metrics::evaluate_all;
use mlspl::MlsplModel;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mlspl"));
    cmd.env_remove("MLSPL_THREADS");
    cmd
}

fn toy() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy.arff")
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema_file: &str, instance: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(schema_file);
    let schema = read_json(&path);
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{schema_file}: {errors:#?}");
}

fn train_toy(out: &Path, extra: &[&str]) {
    let toy = toy();
    let mut cmd = bin();
    cmd.args(["train", "--labels", "4", "--max-outer", "6", "--m", "3", "--dataset"]).arg(&toy).arg("--out").arg(out).args(extra);
    run(&mut cmd);
}

#[test]
fn train_writes_checkpoint_and_manifest() {
    let dir = TempDir::new().unwrap();
    train_toy(dir.path(), &[]);
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_valid("manifest.schema.json", &manifest);
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["dataset"]["n_instances"], 120);
    assert_eq!(manifest["config"]["m"], 3);
    let sha = manifest["dataset"]["files"][0]["sha256"].as_str().unwrap();
    assert_eq!(sha.len(), 64);
    MlsplModel::load(dir.path().join("model.json")).unwrap();
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    train_toy(a.path(), &["--seed", "11"]);
    train_toy(b.path(), &["--seed", "11"]);
    let ma = fs::read(a.path().join("model.json")).unwrap();
    assert_eq!(ma, fs::read(b.path().join("model.json")).unwrap());
    let c = TempDir::new().unwrap();
    train_toy(c.path(), &["--seed", "12"]);
    assert_ne!(ma, fs::read(c.path().join("model.json")).unwrap());
}

#[test]
fn invalid_scheme_is_a_usage_error_listing_options() {
    let out = bin().args(["train", "--labels", "4", "--out", "unused", "--scheme", "quadratic", "--dataset"]).arg(toy()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["arctan", "sigmoid", "tanh", "exponential"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn library_errors_exit_nonzero_with_diagnostic() {
    let dir = TempDir::new().unwrap();
    let out = bin().args(["train", "--labels", "4", "--alpha=-1", "--dataset"]).arg(toy()).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));

    let out = bin().args(["train", "--labels", "4", "--dataset", "/nonexistent/data.arff", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn evaluate_matches_library_scoring() {
    let dir = TempDir::new().unwrap();
    train_toy(dir.path(), &[]);
    let eval_dir = dir.path().join("eval");
    let mut cmd = bin();
    cmd.args(["evaluate", "--labels", "4", "--dataset"])
        .arg(toy())
        .arg("--model")
        .arg(dir.path().join("model.json"))
        .arg("--out")
        .arg(&eval_dir);
    let out = run(&mut cmd);
    let report = read_json(&eval_dir.join("report.json"));
    assert_valid("evaluation.schema.json", &report);
    assert_valid("manifest.schema.json", &read_json(&eval_dir.join("manifest.json")));

    let model = MlsplModel::load(dir.path().join("model.json")).unwrap();
    let ds = load_arff(toy(), &LabelSpec::LastK(4)).unwrap();
    let pred = model.predict(ds.features()).unwrap();
    let expected = evaluate_all(pred.scores.view(), pred.label_sets.view(), ds.labels().view()).unwrap();
    assert_eq!(report["report"], serde_json::to_value(expected).unwrap());

    let scores = fs::read_to_string(eval_dir.join("scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 121);
    assert_eq!(scores.lines().next().unwrap(), "y1,y2,y3,y4");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Average precision"));
}

#[test]
fn perfect_model_gets_optimal_criteria() {
    // features are the label signs themselves, so every label is separable;
    // the empty label set is left out because prediction never returns it
    let dir = TempDir::new().unwrap();
    let labels: Vec<[i8; 3]> = (0..24).filter(|i| i % 8 != 0).map(|i| [i % 2, (i / 2) % 2, (i / 4) % 2].map(|b| b as i8)).collect();
    let mut fx = String::from("a,b,c\n");
    let mut fy = String::from("l1,l2,l3\n");
    for row in &labels {
        let signs: Vec<String> = row.iter().map(|&b| (2 * b - 1).to_string()).collect();
        fx.push_str(&(signs.join(",") + "\n"));
        let bits: Vec<String> = row.iter().map(|b| b.to_string()).collect();
        fy.push_str(&(bits.join(",") + "\n"));
    }
    let (xp, yp) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
    fs::write(&xp, fx).unwrap();
    fs::write(&yp, fy).unwrap();
    let mut cmd = bin();
    cmd.args(["train", "--m", "2", "--max-outer", "10", "--lambda0", "10", "--dataset"])
        .arg(&xp)
        .arg("--labels")
        .arg(&yp)
        .arg("--out")
        .arg(dir.path());
    run(&mut cmd);
    let mut cmd = bin();
    cmd.args(["evaluate", "--format", "csv", "--dataset"])
        .arg(&xp)
        .arg("--labels")
        .arg(&yp)
        .arg("--model")
        .arg(dir.path().join("model.json"))
        .arg("--out")
        .arg(dir.path().join("eval"));
    run(&mut cmd);
    let r = &read_json(&dir.path().join("eval/report.json"))["report"];
    assert_eq!(r["hamming_loss"], 0.0);
    assert_eq!(r["ranking_loss"], 0.0);
    assert_eq!(r["one_error"], 0.0);
    assert_eq!(r["average_precision"], 1.0);
    // optimal coverage is |Y| − 1 averaged over instances with a relevant label
    let with_relevant: Vec<usize> = labels.iter().map(|r| r.iter().filter(|&&b| b == 1).count()).filter(|&k| k > 0).collect();
    let optimal = with_relevant.iter().map(|&k| k as f64 - 1.0).sum::<f64>() / with_relevant.len() as f64;
    assert!((r["coverage"].as_f64().unwrap() - optimal).abs() < 1e-12);
}

fn benchmark(out: &Path, extra: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args(["benchmark", "--labels", "4", "--max-outer", "5", "--m", "3", "--dataset"]).arg(toy()).arg("--out").arg(out).args(extra);
    if let Some(t) = threads {
        cmd.env("MLSPL_THREADS", t);
    }
    run(&mut cmd)
}

#[test]
fn benchmark_single_repeat_has_zero_std() {
    let dir = TempDir::new().unwrap();
    benchmark(dir.path(), &["--repeats", "1"], None);
    let report = read_json(&dir.path().join("report.json"));
    assert_valid("benchmark.schema.json", &report);
    let agg = &report["methods"][0]["aggregate"];
    for c in ["hamming_loss", "ranking_loss", "one_error", "coverage", "average_precision"] {
        assert_eq!(agg[c]["std"], 0.0, "{c}");
    }
    let split = &report["methods"][0]["repeats"][0];
    assert_eq!(split["n_train"], 36);
    assert_eq!(split["n_test"], 84);
}

#[test]
fn benchmark_is_deterministic_across_thread_counts() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let out = benchmark(a.path(), &["--repeats", "3", "--seed", "5"], None);
    benchmark(b.path(), &["--repeats", "3", "--seed", "5"], Some("1"));
    for f in ["report.json", "report.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let manifest = read_json(&b.path().join("manifest.json"));
    assert_valid("manifest.schema.json", &manifest);
    assert_eq!(manifest["threads"], 1);
    assert_eq!(manifest["seeds"].as_array().unwrap().len(), 3);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains(" ± "), "{table}");
}

#[test]
fn benchmark_baselines_add_columns() {
    let dir = TempDir::new().unwrap();
    let out = benchmark(dir.path(), &["--repeats", "2", "--baselines"], None);
    let report = read_json(&dir.path().join("report.json"));
    assert_valid("benchmark.schema.json", &report);
    let methods: Vec<&str> = report["methods"].as_array().unwrap().iter().map(|m| m["method"].as_str().unwrap()).collect();
    assert_eq!(methods, ["mlspl", "mllocc_equivalent", "independent_binary"]);
    let header = String::from_utf8_lossy(&out.stdout).lines().next().unwrap().to_string();
    assert!(header.contains("mllocc_equivalent") && header.contains("independent_binary"));
}

#[test]
fn benchmark_grid_records_selection() {
    let dir = TempDir::new().unwrap();
    benchmark(dir.path(), &["--repeats", "1", "--grid"], None);
    let report = read_json(&dir.path().join("report.json"));
    assert_valid("benchmark.schema.json", &report);
    let grid = &report["methods"][0]["repeats"][0]["grid"];
    assert_eq!(grid["points"].as_array().unwrap().len(), 20);
    assert_valid("manifest.schema.json", &read_json(&dir.path().join("manifest.json")));
}

#[test]
fn invalid_thread_count_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .env("MLSPL_THREADS", "zero")
        .args(["benchmark", "--labels", "4", "--repeats", "1", "--dataset"])
        .arg(toy())
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MLSPL_THREADS"));
}

#[test]
fn scheme_compare_emits_long_csv() {
    let dir = TempDir::new().unwrap();
    let mut cmd = bin();
    cmd.args(["scheme-compare", "--labels", "4", "--repeats", "2", "--max-outer", "4", "--m", "2", "--dataset"])
        .arg(toy())
        .arg("--out")
        .arg(dir.path());
    run(&mut cmd);
    let csv = fs::read_to_string(dir.path().join("schemes.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "scheme,criterion,mean,std");
    assert_eq!(lines.len(), 21);
    let report = read_json(&dir.path().join("report.json"));
    assert_valid("benchmark.schema.json", &report);
    let methods = report["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 4);
    // every scheme sees the same splits
    let seeds = |m: &Value| m["repeats"].as_array().unwrap().iter().map(|r| r["seed"].clone()).collect::<Vec<_>>();
    assert!(methods.iter().all(|m| seeds(m) == seeds(&methods[0])));
    for m in methods {
        let ap = m["aggregate"]["average_precision"]["mean"].as_f64().unwrap();
        assert!(ap > 0.0 && ap <= 1.0);
    }
}

#[test]
fn verify_schemes_passes_and_corruption_fails() {
    let dir = TempDir::new().unwrap();
    let mut cmd = bin();
    cmd.args(["verify-schemes", "--out"]).arg(dir.path());
    let out = run(&mut cmd);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches(": PASS").count(), 4);
    let report = read_json(&dir.path().join("verification.json"));
    assert_valid("verification.schema.json", &report);
    assert!(report.as_array().unwrap().iter().all(|r| r["checks"].as_array().unwrap().len() == 5));

    let out = bin().args(["verify-schemes", "--corrupt"]).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "alpha = 2.0\nm = 4\nscheme = \"tanh\"\nmax_outer = 3\n").unwrap();
    let out = dir.path().join("out");
    let mut cmd = bin();
    cmd.args(["train", "--labels", "4", "--m", "2", "--dataset"]).arg(toy()).arg("--config").arg(&cfg).arg("--out").arg(&out);
    run(&mut cmd);
    let c = &read_json(&out.join("manifest.json"))["config"];
    assert_eq!(c["alpha"], 2.0);
    assert_eq!(c["m"], 2);
    assert_eq!(c["scheme"], "tanh");
    assert_eq!(c["max_outer"], 3);
    assert_eq!(c["beta"], 1.0);

    fs::write(&cfg, "alpah = 2.0\n").unwrap();
    let res =
        bin().args(["train", "--labels", "4", "--dataset"]).arg(toy()).arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("alpah"));
}
