use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mmwave-assoc"))
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// The single file in `dir` whose name ends with `suffix`.
fn find(dir: &Path, suffix: &str) -> PathBuf {
    let hits: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    assert_eq!(hits.len(), 1, "expected one *{suffix} in {}: {hits:?}", dir.display());
    hits.into_iter().next().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_example1_fixture_with_trace() {
    let tmp = TempDir::new().unwrap();
    let fixture = fixtures_dir().join("example1-m3.json");
    let o = run(&["solve", "--config", s(&fixture), "--out", s(tmp.path()), "--trace", "--exact"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sol = read_json(&find(tmp.path(), "-solution.json"));
    assert_eq!(sol["p_best"].as_f64().unwrap(), 0.5);
    assert_eq!(sol["assignment"], serde_json::json!([0, 1, 2]));
    assert_eq!(sol["exact"]["p_star"].as_f64().unwrap(), 0.5);
    assert!(sol["gap_certificate"].as_f64().unwrap() >= 0.0);
    assert!(sol["duality_gap_bound"].as_f64().unwrap() > 0.0);
    let hash = sol["config_hash"].as_str().unwrap().to_string();

    let trace = fs::read_to_string(find(tmp.path(), "-trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), format!("# config_hash: {hash}"));
    assert_eq!(lines.next().unwrap(), "k,g_lambda,t_k,g_best,p_best");
    assert_eq!(lines.count(), 1000);
}

#[test]
fn solve_without_trace_writes_no_trace() {
    let tmp = TempDir::new().unwrap();
    let fixture = fixtures_dir().join("example2-n2.json");
    let o = run(&["solve", "--config", s(&fixture), "--out", s(tmp.path()), "--iters", "50"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_dir(tmp.path()).unwrap().all(|e| !e.unwrap().path().to_string_lossy().ends_with(".csv")));
}

#[test]
fn malformed_instance_exits_2() {
    let tmp = TempDir::new().unwrap();
    let bad = write(tmp.path(), "bad.json", "{ \"n_aps\": 2, ");
    let o = run(&["solve", "--config", s(&bad), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not valid JSON"), "{}", stderr(&o));

    let invalid = write(
        tmp.path(),
        "invalid.json",
        r#"{"n_aps": 2, "n_clients": 1, "beta": [{"i": 0, "j": 0, "beta": 1.5}]}"#,
    );
    let o = run(&["solve", "--config", s(&invalid), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("beta[0].beta"), "{}", stderr(&o));

    let o = run(&["solve", "--config", s(&fixtures_dir().join("example1-m3.json")), "--step-scale", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

fn experiment_config(dir: &Path, extra: &str) -> PathBuf {
    write(
        dir,
        "cfg.json",
        &format!(r#"{{"n_aps": 3, "n_clients": 25, "slots": 12, "daa_iters": 100, "seed": 5{extra}}}"#),
    )
}

#[test]
fn experiment_outputs_are_hashed_and_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = experiment_config(tmp.path(), r#", "exact": "auto""#);
    let mut csvs = Vec::new();
    for (i, jobs) in ["1", "8", "1"].iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        let o = run(&["experiment", "--config", s(&cfg), "--out", s(&out), "--jobs", jobs]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("P_DAA"));
        csvs.push((
            fs::read(find(&out, "-slots.csv")).unwrap(),
            fs::read(find(&out, "-curves.csv")).unwrap(),
            fs::read(find(&out, "-aggregate.json")).unwrap(),
        ));
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0], csvs[2]);

    let out = tmp.path().join("run0");
    let agg = read_json(&find(&out, "-aggregate.json"));
    let hash = agg["config_hash"].as_str().unwrap();
    assert!(find(&out, "-slots.csv").to_string_lossy().contains(&hash[..12]));
    let slots = String::from_utf8(csvs[0].0.clone()).unwrap();
    assert_eq!(slots.lines().next().unwrap(), format!("# config_hash: {hash}"));
    let header = slots.lines().nth(1).unwrap();
    assert!(header.starts_with("slot,p_daa,d_star,p_exact,"));
    let rows = slots.lines().count() - 2;
    let a = &agg["aggregate"];
    assert_eq!(rows as u64, a["feasible_slots"].as_u64().unwrap());
    assert_eq!(12, a["feasible_slots"].as_u64().unwrap() + a["infeasible_slots"].as_u64().unwrap());
    assert_eq!(agg["config"]["n_clients"], 25);

    let manifest = read_json(&find(&out, "-manifest.json"));
    assert_eq!(manifest["config_hash"], hash);
    assert_eq!(manifest["command"], "experiment");
    assert_eq!(manifest["files"].as_array().unwrap().len(), 3);
}

#[test]
fn seed_flag_changes_hash_and_results() {
    let tmp = TempDir::new().unwrap();
    let cfg = experiment_config(tmp.path(), "");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&["experiment", "--config", s(&cfg), "--out", s(&a)]).status.success());
    assert!(run(&["experiment", "--config", s(&cfg), "--out", s(&b), "--seed", "6"]).status.success());
    let ha = read_json(&find(&a, "-aggregate.json"))["config_hash"].clone();
    let hb = read_json(&find(&b, "-aggregate.json"))["config_hash"].clone();
    assert_ne!(ha, hb);
    assert_ne!(fs::read(find(&a, "-slots.csv")).unwrap(), fs::read(find(&b, "-slots.csv")).unwrap());
}

#[test]
fn single_slot_gives_one_row() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"n_aps": 2, "n_clients": 5, "slots": 1, "daa_iters": 20}"#);
    let o = run(&["experiment", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(find(tmp.path(), "-slots.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn unknown_key_warns_and_proceeds() {
    let tmp = TempDir::new().unwrap();
    let cfg = experiment_config(tmp.path(), r#", "bandwith_hz": 1e9"#);
    let o = run(&["experiment", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert!(o.status.success());
    let err = stderr(&o);
    assert!(err.contains("unknown config key `bandwith_hz`"), "{err}");
    assert!(err.contains("bandwidth_hz"), "{err}");
}

#[test]
fn bad_configs_exit_2_naming_the_problem() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        (r#"{"slots": "many"}"#, "`slots`"),
        (r#"{"slots": 0}"#, "slots"),
        (r#"{"bandwidth_hz": -5}"#, "bandwidth"),
        (r#"{"target_snr_db": 40}"#, "target SNR"),
        ("not json", "not valid JSON"),
    ];
    for (text, needle) in cases {
        let cfg = write(tmp.path(), "bad.json", text);
        let o = run(&["experiment", "--config", s(&cfg), "--out", s(tmp.path())]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(stderr(&o).contains(needle), "{text}: {}", stderr(&o));
    }
}

#[test]
fn default_scenario_objective_direction() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"n_aps": 5, "n_clients": 100, "slots": 50, "daa_iters": 300}"#,
    );
    let o = run(&["experiment", "--config", s(&cfg), "--out", s(tmp.path()), "--jobs", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = &read_json(&find(tmp.path(), "-aggregate.json"))["aggregate"];
    assert!(a["p_daa"].as_f64().unwrap() < a["p_rssi"].as_f64().unwrap());
}

#[test]
fn sweep_writes_one_row_per_value() {
    let tmp = TempDir::new().unwrap();
    let cfg = experiment_config(tmp.path(), "");
    let o = run(&[
        "sweep", "--config", s(&cfg), "--out", s(tmp.path()), "--vary", "n_clients", "--values", "10,25",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(find(tmp.path(), "-table.csv")).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[0], "n_clients");
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);

    // The 25-client row equals a plain experiment with the same config.
    let exp = tmp.path().join("exp");
    assert!(run(&["experiment", "--config", s(&cfg), "--out", s(&exp)]).status.success());
    let agg = &read_json(&find(&exp, "-aggregate.json"))["aggregate"];
    let col = headers.iter().position(|h| h == "p_daa").unwrap();
    assert_eq!(rows[1][col].parse::<f64>().unwrap(), agg["p_daa"].as_f64().unwrap());

    let o = run(&["sweep", "--config", s(&cfg), "--out", s(tmp.path()), "--vary", "radius", "--values", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_on_fresh_checkout() {
    let tmp = TempDir::new().unwrap();
    let o = run(&[
        "verify", "--out", s(tmp.path()), "--fixtures", s(&fixtures_dir()), "--instances", "4", "--iters", "4000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}\n{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("PASS  known-optimum"));
    assert!(!out.contains("FAIL"));
    let report = read_json(&find(tmp.path(), "-report.json"));
    assert_eq!(report["failed_instances"], 0);
}

#[test]
fn verify_names_a_corrupted_fixture() {
    let tmp = TempDir::new().unwrap();
    let fx = tmp.path().join("fx");
    fs::create_dir(&fx).unwrap();
    fs::copy(fixtures_dir().join("example1-m3.json"), fx.join("good.json")).unwrap();
    write(&fx, "broken.json", r#"{"instance": {"n_aps": 1, "n_clients": 1, "beta": [{"i": 3"#);
    let o = run(&["verify", "--out", s(&tmp.path().join("out")), "--fixtures", s(&fx), "--instances", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("broken.json"), "{}", stdout(&o));

    // A fixture whose stated optimum is wrong fails its check, and the
    // instance is written out.
    fs::remove_file(fx.join("broken.json")).unwrap();
    let text = fs::read_to_string(fx.join("good.json")).unwrap().replace("\"expected_optimum\": 0.5", "\"expected_optimum\": 0.4");
    write(&fx, "good.json", &text);
    let out = tmp.path().join("out2");
    let o = run(&["verify", "--out", s(&out), "--fixtures", s(&fx), "--instances", "1", "--iters", "2000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL  known-optimum           good"), "{}", stdout(&o));
    let failed = read_json(&find(&out, "-failed-good.json"));
    assert_eq!(failed["fixture"]["expected_optimum"].as_f64().unwrap(), 0.4);
}

#[test]
fn verify_seed_changes_random_instances_only() {
    let tmp = TempDir::new().unwrap();
    let rows_for = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = run(&["verify", "--out", s(&out), "--seed", seed, "--instances", "2", "--iters", "2000"]);
        assert!(o.status.success(), "{}", stdout(&o));
        let report = read_json(&find(&out, "-report.json"));
        report["checks"].as_array().unwrap().clone()
    };
    let a = rows_for("1", "a");
    let b = rows_for("2", "b");
    let split = |rows: &[Value]| -> (Vec<Value>, Vec<Value>) {
        rows.iter()
            .cloned()
            .partition(|r| !r["subject"].as_str().unwrap().starts_with("random-"))
    };
    let (fa, ra) = split(&a);
    let (fb, rb) = split(&b);
    assert_eq!(fa, fb);
    assert_ne!(ra, rb);
}

#[test]
fn verify_refuses_stale_directory() {
    let tmp = TempDir::new().unwrap();
    let cfg = experiment_config(tmp.path(), "");
    let out = tmp.path().join("out");
    assert!(run(&["experiment", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let o = run(&["verify", "--out", s(&out), "--instances", "1", "--iters", "500"]);
    assert!(o.status.success(), "{}", stderr(&o));

    // Overwrite the slot table with one from a different config.
    let slots = find(&out, "-slots.csv");
    let text = fs::read_to_string(&slots).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let stale = format!("# config_hash: {}", "0".repeat(64));
    lines[0] = &stale;
    fs::write(&slots, lines.join("\n")).unwrap();
    let o = run(&["verify", "--out", s(&out), "--instances", "1", "--iters", "500"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("stale or mismatched"), "{err}");
    assert!(err.contains(&*slots.file_name().unwrap().to_string_lossy()), "{err}");
}
