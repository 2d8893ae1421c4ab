use std::path::Path;
use std::process::{Command, Output};

fn dglab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dglab"))
        .args(args)
        .current_dir(dir)
        .env_remove("DGLAB_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(dir: &Path, f: &str) -> String {
    std::fs::read_to_string(dir.join(f)).unwrap_or_else(|e| panic!("{f}: {e}"))
}

const ZERO_LAMBDA: &str = r#"
seed = 4
[train.training]
epochs = 6
lambda_mode = "zero"
entropy_weight = 0.0
"#;

#[test]
fn erm_equals_dann_with_zero_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("zero.toml"), ZERO_LAMBDA).unwrap();
    let a = dglab(d, &["train", "--config", "zero.toml", "--mode", "erm", "--out", "erm"]);
    let b = dglab(d, &["train", "--config", "zero.toml", "--mode", "dann", "--out", "dann"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(code(&b), 0, "{}", String::from_utf8_lossy(&b.stderr));
    for f in ["metrics.csv", "metrics.jsonl", "domain_loss.jsonl", "checkpoint.json"] {
        assert_eq!(read(&d.join("erm"), f), read(&d.join("dann"), f), "{f} differs");
    }
}

#[test]
fn replay_reproduces_train_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("short.toml"), "[train.training]\nepochs = 4\n").unwrap();
    let o = dglab(d, &["train", "--config", "short.toml", "--seed", "9", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = dglab(d, &["replay", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("4 files identical"));

    let manifest = read(&d.join("run"), "manifest.json");
    let ck = manifest.find("checkpoint.json").unwrap();
    let hash_at = ck + manifest[ck..].find("\"sha256\": \"").unwrap() + 11;
    let mut tampered = manifest.clone();
    let first = if &manifest[hash_at..hash_at + 1] == "0" { "1" } else { "0" };
    tampered.replace_range(hash_at..hash_at + 1, first);
    std::fs::write(d.join("run/manifest.json"), tampered).unwrap();
    assert_eq!(code(&dglab(d, &["replay", "run"])), 6);
}

#[test]
fn replay_of_dataset_backed_run_checks_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&dglab(d, &["gen-data", "--seed", "2", "--out", "data"])), 0);
    std::fs::write(d.join("cfg.toml"), "[data]\npath = \"data/dataset.csv\"\n[train.training]\nepochs = 2\n").unwrap();
    let o = dglab(d, &["train", "--config", "cfg.toml", "--mode", "erm", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&dglab(d, &["replay", "run"])), 0);
    let mut text = read(&d.join("data"), "dataset.csv");
    text.push_str("source,0,0,0.5,0.5\n");
    std::fs::write(d.join("data/dataset.csv"), text).unwrap();
    assert_eq!(code(&dglab(d, &["replay", "run"])), 6);
}

#[test]
fn geometry_reports_example1() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = dglab(d, &["geometry", "example1", "--out", "g"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&read(&d.join("g"), "geometry.json")).unwrap();
    assert_eq!(v[0]["pairwise"][0]["divergence"], 2.0);
    assert_eq!(v[0]["candidates"][0]["condition"]["slack"], 1.0);
}

#[test]
fn empty_fixture_list_is_a_noop() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("empty.toml"), "[geometry]\nfixtures = []\n").unwrap();
    let o = dglab(d, &["geometry", "--config", "empty.toml", "--out", "g"]);
    assert_eq!(code(&o), 0);
    assert_eq!(read(&d.join("g"), "geometry.json").trim(), "[]");
}

#[test]
fn malformed_histogram_is_an_invariant_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("bad.json"),
        r#"{"sources": [{"edges": [0, 1, 2], "mass": [0.5, 0.4]}, {"edges": [0, 1], "mass": [1.0]}]}"#,
    )
    .unwrap();
    let o = dglab(d, &["geometry", "bad.json", "--out", "g"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("0.9"));
}

#[test]
fn broken_fixture_is_a_parse_error_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("broken.json"), "{\"sources\": [\n  {\"edges\": [0, 1], \"mass\": [1.0]},\n  oops\n]}").unwrap();
    let o = dglab(d, &["geometry", "broken.json", "--out", "g"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn bad_config_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("c.toml"), "seed = 1\n[train]\nmood = \"erm\"\n").unwrap();
    assert_eq!(code(&dglab(d, &["train", "--config", "c.toml"])), 3);
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&dglab(tmp.path(), &["verify", "no-such-suite"])), 2);
}

#[test]
fn verify_prints_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = dglab(d, &["verify", "divergence-oracle", "pseudometric", "--out", "v"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("1000/1000 passed"), "{out}");
    assert!(out.contains("suite pseudometric: passed"));
}

#[test]
fn bound_example1_both_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&dglab(d, &["bound", "--out", "b"])), 0);
    let v: serde_json::Value = serde_json::from_str(&read(&d.join("b"), "bounds.json")).unwrap();
    let mix = v[0]["mixture_hull"][0]["min_divergence_to_target"].as_f64().unwrap();
    let ball = v[0]["ball_intersection"][0]["min_divergence_to_target"].as_f64().unwrap();
    assert!(ball <= mix);
    assert_eq!(v[0]["all_hold"], true);
}

#[test]
fn bound_finite_instance_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("fin.json"),
        r#"{"kind": "finite", "class": ["000", "100", "110", "111"],
            "sources": [[0.5, 0.3, 0.2], [0.2, 0.3, 0.5]],
            "labelers": ["110", "110"], "target": [0.1, 0.1, 0.8], "target_labeler": "110"}"#,
    )
    .unwrap();
    let o = dglab(d, &["bound", "fin.json", "--out", "b"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(&d.join("b"), "bounds.json")).unwrap();
    assert_eq!(v[0]["all_hold"], true);
    assert_eq!(v[0]["mixture_hull"].as_array().unwrap().len(), 4);
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = Command::new(env!("CARGO_BIN_EXE_dglab"))
        .args(["geometry", "example1"])
        .current_dir(d)
        .env("DGLAB_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(d.join("from-env/geometry.json").exists());
}

#[test]
fn small_sweep_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("s.toml"),
        "[train.training]\nepochs = 2\n[sweep]\nseeds = [0, 1]\nmodes = [\"dann\", \"dannce\"]\nsteps = [1, 2]\n",
    )
    .unwrap();
    let o = dglab(d, &["sweep", "--config", "s.toml", "--out", "sw"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&d.join("sw"), "sweep.csv");
    // 2 seeds x (dann + dannce at two step counts) x 2 epochs
    assert_eq!(csv.lines().count(), 1 + 2 * 3 * 2);
    assert_eq!(code(&dglab(d, &["replay", "sw"])), 0);
}
