mod config;
mod output;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mmwave_assoc::dual_solver::duality_gap_bound;
use mmwave_assoc::exact::{solve_lp_relaxation, solve_milp_exact};
use mmwave_assoc::instance::InstanceDoc;
use mmwave_assoc::sim::{run_experiment_with_jobs, sweep, Aggregate, ExactMode, SweepParam};
use mmwave_assoc::{run_daa, DaaConfig, ExperimentConfig, Instance, SimError};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{cli_defaults, parse_config, to_flat, ACCEPTED_KEYS};
use crate::output::{audit_dir, config_hash, Artifacts};
use crate::verify::{builtin_fixtures, check_instance, load_fixtures, random_fixtures, FixtureDoc};

#[derive(Parser)]
#[command(name = "mmwave-assoc", version, about = "Min-max utilization client association: solver, simulator, self-checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance file with DAA (and optionally the exact oracles).
    Solve(SolveArgs),
    /// Run a Monte Carlo experiment from a flat JSON config.
    Experiment(RunArgs),
    /// Run one experiment per value of a swept parameter.
    Sweep(SweepArgs),
    /// Run the oracle and bound checks on fixtures and random instances.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON, or a fixture file wrapping one.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 1.0)]
    step_scale: f64,
    /// Also write the per-iteration trace CSV.
    #[arg(long)]
    trace: bool,
    /// Also solve the integral problem and its LP relaxation exactly.
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Flat JSON config; defaults for every key that is absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// DAA iterations per slot (K).
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    step_scale: Option<f64>,
    /// Run the exact oracles in every slot regardless of size.
    #[arg(long)]
    exact: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// n_clients, n_aps or daa_iters.
    #[arg(long)]
    vary: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Seed for the random instances; fixtures are unaffected.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// DAA iterations per check.
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    /// Number of random instances.
    #[arg(long, default_value_t = 25)]
    instances: usize,
    /// Directory of extra fixture files (*.json).
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

/// Exit 2: the input could not be parsed or validated. Exit 1: the run
/// itself failed or a check did not pass.
enum Failure {
    Input(String),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Experiment(a) => cmd_experiment(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Verify(a) => cmd_verify(&a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn as_map(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("serialized structs are JSON objects"),
    }
}

fn to_map<T: Serialize>(v: &T) -> Map<String, Value> {
    as_map(serde_json::to_value(v).expect("plain data serializes"))
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    let text = read_input(path)?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Input(format!("{}: not valid JSON: {e}", path.display())))?;
    let doc: InstanceDoc = if value.get("instance").is_some() {
        serde_json::from_value::<FixtureDoc>(value).map(|f| f.instance)
    } else {
        serde_json::from_value(value)
    }
    .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Instance::from_doc(&doc).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn cmd_solve(a: &SolveArgs) -> CmdResult {
    let inst = load_instance(&a.config)?;
    let cfg = DaaConfig::new(a.iters, a.step_scale).with_trace(a.trace);
    cfg.validate().map_err(|e| Failure::Input(e.to_string()))?;
    let hash = config_hash(&json!({
        "command": "solve",
        "instance": inst.to_doc(),
        "iters": a.iters,
        "step_scale": a.step_scale,
        "trace": a.trace,
        "exact": a.exact,
    }));
    let rep = run_daa(&inst, &cfg).map_err(|e| Failure::Input(e.to_string()))?;

    let mut body = Map::new();
    body.insert("instance_file".into(), json!(a.config));
    body.insert("n_aps".into(), json!(inst.n_aps()));
    body.insert("n_clients".into(), json!(inst.n_clients()));
    body.insert("iterations".into(), json!(rep.iterations_run));
    body.insert("step_scale".into(), json!(a.step_scale));
    body.insert("assignment".into(), json!(rep.assignment.ap_of_client()));
    body.insert("ap_loads".into(), json!(rep.assignment.loads(&inst)));
    body.insert("p_best".into(), json!(rep.primal_value));
    body.insert("g_best".into(), json!(rep.dual_value));
    body.insert("gap_certificate".into(), json!(rep.gap_certificate));
    body.insert("duality_gap_bound".into(), json!(duality_gap_bound(&inst)));
    body.insert("best_found_at".into(), json!(rep.best_found_at));
    body.insert("final_prices".into(), json!(rep.final_prices));
    if a.exact {
        let milp = solve_milp_exact(&inst, u64::MAX).context("exact integral solve")?;
        let lp = solve_lp_relaxation(&inst).context("LP relaxation")?;
        body.insert(
            "exact".into(),
            json!({
                "p_star": milp.optimal_value,
                "assignment": milp.assignment().map(|x| x.ap_of_client()),
                "p_relax": lp.optimal_value,
                "nodes_explored": milp.nodes_explored,
            }),
        );
    }

    let mut art = Artifacts::new(&a.out, "solve", hash)?;
    let sol_path = art.write_json("solution.json", body)?;
    println!("p_best {}  g_best {}  gap certificate {}", rep.primal_value, rep.dual_value, rep.gap_certificate);
    println!("solution: {}", sol_path.display());
    if let Some(trace) = &rep.trace {
        let rows: Vec<_> = trace.iter().map(to_map).collect();
        let path = art.write_table("trace.csv", &["k", "g_lambda", "t_k", "g_best", "p_best"], &rows)?;
        println!("trace: {}", path.display());
    }
    art.finish(Some(&a.config))?;
    Ok(ExitCode::SUCCESS)
}

/// Config file, then command-line overrides, then validation.
fn resolve_config(a: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &a.config {
        Some(path) => {
            let parsed = parse_config(&read_input(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            for key in &parsed.unknown_keys {
                eprintln!(
                    "warning: ignoring unknown config key `{key}`; accepted keys: {}",
                    ACCEPTED_KEYS.join(", ")
                );
            }
            parsed.config
        }
        None => cli_defaults(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(k) = a.iters {
        cfg.daa_iters = k;
    }
    if let Some(s) = a.step_scale {
        cfg.step_scale = s;
    }
    if a.exact {
        cfg.exact = ExactMode::Forced;
    }
    cfg.validate().map_err(|e| Failure::Input(e.to_string()))?;
    cfg.cell_radius().map_err(|e| Failure::Input(e.to_string()))?;
    Ok(cfg)
}

const SLOT_COLUMNS: &[&str] = &[
    "slot",
    "p_daa",
    "d_star",
    "p_exact",
    "d_relax",
    "p_rand",
    "p_rssi",
    "jain_daa",
    "jain_rand",
    "jain_rssi",
    "jain_exact",
    "relative_gap",
    "gap_bound",
    "daa_best_found_at",
];

fn run_failure(e: SimError) -> Failure {
    match e {
        SimError::Config(_) | SimError::Channel(_) => Failure::Input(e.to_string()),
        other => Failure::Run(other.into()),
    }
}

fn print_aggregate(agg: &Aggregate) {
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
    println!("{:<28}{:>14}", "metric", "value");
    for (name, v) in [
        ("P_DAA (p_best^K)", format!("{:.6}", agg.p_daa)),
        ("D* (g_best^K)", format!("{:.6}", agg.d_star)),
        ("P_RSSI", format!("{:.6}", agg.p_rssi)),
        ("P_rand", format!("{:.6}", agg.p_rand)),
        ("P* (exact)", opt(agg.p_exact)),
        ("J_DAA", format!("{:.6}", agg.jain_daa)),
        ("J_RSSI", format!("{:.6}", agg.jain_rssi)),
        ("J_rand", format!("{:.6}", agg.jain_rand)),
        ("J* (exact)", opt(agg.jain_exact)),
        ("Ave-RDG", opt(agg.ave_rdg)),
        ("Ave-RDG (best achieved)", format!("{:.6}", agg.ave_rdg_best_achieved)),
        ("Ave-DG", opt(agg.ave_dg)),
        ("Ave-DG (best achieved)", format!("{:.6}", agg.ave_dg_best_achieved)),
        ("feasible slots", agg.feasible_slots.to_string()),
        ("infeasible slots", agg.infeasible_slots.to_string()),
    ] {
        println!("{name:<28}{v:>14}");
    }
}

fn cmd_experiment(a: &RunArgs) -> CmdResult {
    let cfg = resolve_config(a)?;
    let flat = to_flat(&cfg);
    let hash = config_hash(&json!({ "command": "experiment", "config": flat }));
    let out = run_experiment_with_jobs(&cfg, a.jobs).map_err(run_failure)?;

    let mut art = Artifacts::new(&a.out, "experiment", hash)?;
    let rows: Vec<_> = out.slots.iter().map(to_map).collect();
    let slots = art.write_table("slots.csv", SLOT_COLUMNS, &rows)?;
    let mut body = Map::new();
    body.insert("config".into(), Value::Object(flat));
    body.insert("aggregate".into(), serde_json::to_value(&out.aggregate).expect("serializable"));
    body.insert("infeasible".into(), serde_json::to_value(&out.infeasible).expect("serializable"));
    let agg = art.write_json("aggregate.json", body)?;
    if let Some(c) = &out.curves {
        let rows: Vec<_> = (0..c.p_best.len())
            .map(|i| as_map(json!({ "k": i + 1, "p_best": c.p_best[i], "g_best": c.g_best[i], "jain": c.jain[i] })))
            .collect();
        art.write_table("curves.csv", &["k", "p_best", "g_best", "jain"], &rows)?;
    }
    art.finish(a.config.as_deref())?;
    print_aggregate(&out.aggregate);
    println!("slots: {}\naggregate: {}", slots.display(), agg.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    let cfg = resolve_config(&a.run)?;
    let vary: SweepParam = a.vary.parse().map_err(|e: SimError| Failure::Input(e.to_string()))?;
    let flat = to_flat(&cfg);
    let hash = config_hash(&json!({
        "command": "sweep",
        "config": flat,
        "vary": vary.to_string(),
        "values": a.values,
    }));
    let pool = rayon_pool(a.run.jobs)?;
    let rows = pool.install(|| sweep(&cfg, vary, &a.values));

    let mut columns: Vec<String> = vec![vary.to_string()];
    let mut table = Vec::new();
    let mut failures = 0;
    for r in &rows {
        let mut m = Map::new();
        m.insert(vary.to_string(), json!(r.value));
        match &r.outcome {
            Ok(agg) => {
                let fields = to_map(agg);
                for k in fields.keys() {
                    if !columns.contains(k) {
                        columns.push(k.clone());
                    }
                }
                m.extend(fields);
            }
            Err(e) => {
                failures += 1;
                eprintln!("warning: {vary} = {}: {e}", r.value);
                m.insert("error".into(), json!(e.to_string()));
            }
        }
        table.push(m);
    }
    columns.push("error".into());
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut art = Artifacts::new(&a.run.out, "sweep", hash)?;
    let path = art.write_table("table.csv", &cols, &table)?;
    art.finish(a.run.config.as_deref())?;
    println!("{vary:>10} {:>12} {:>12} {:>12} {:>10}", "P_DAA", "P_RSSI", "Ave-RDG", "best_at");
    for r in &rows {
        match &r.outcome {
            Ok(agg) => println!(
                "{:>10} {:>12.6} {:>12.6} {:>12} {:>10.1}",
                r.value,
                agg.p_daa,
                agg.p_rssi,
                agg.ave_rdg.map_or("-".into(), |v| format!("{v:.6}")),
                agg.mean_best_found_at
            ),
            Err(_) => println!("{:>10} failed", r.value),
        }
    }
    println!("table: {}", path.display());
    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn rayon_pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Failure::Run(e.into()))
}

fn cmd_verify(a: &VerifyArgs) -> CmdResult {
    if a.iters == 0 {
        return Err(Failure::Input("--iters must be at least 1".into()));
    }
    audit_dir(&a.out)?;
    let mut fixtures = builtin_fixtures();
    if let Some(dir) = &a.fixtures {
        // A fixture that does not load is a failed check, reported by name.
        match load_fixtures(dir) {
            Ok(extra) => fixtures.extend(extra),
            Err(msg) => {
                println!("FAIL load-fixtures {msg}");
                return Ok(ExitCode::from(1));
            }
        }
    }
    fixtures.extend(random_fixtures(a.seed, a.instances));
    let docs: Vec<_> = fixtures.iter().map(|f| json!({ "name": f.name, "instance": f.instance.to_doc() })).collect();
    let hash = config_hash(&json!({
        "command": "verify",
        "iters": a.iters,
        "seed": a.seed,
        "instances": a.instances,
        "fixtures": docs,
    }));

    let checks: Vec<_> = fixtures.iter().map(|f| (f, check_instance(f, a.iters))).collect();
    let mut art = Artifacts::new(&a.out, "verify", hash)?;
    let mut all = Vec::new();
    let mut failed = 0;
    println!("{:<6}{:<24}{:<14}detail", "status", "check", "instance");
    for (f, rows) in &checks {
        let mut instance_failed = false;
        for r in rows {
            println!("{:<6}{:<24}{:<14}{}", if r.passed { "PASS" } else { "FAIL" }, r.check, r.subject, r.detail);
            instance_failed |= !r.passed;
            all.push(to_map(r));
        }
        if instance_failed {
            failed += 1;
            let mut body = Map::new();
            body.insert("name".into(), json!(f.name));
            body.insert("fixture".into(), json!(FixtureDoc { expected_optimum: f.expected_optimum, instance: f.instance.to_doc() }));
            let path = art.write_json(&format!("failed-{}.json", f.name), body)?;
            eprintln!("failing instance written to {}", path.display());
        }
    }
    let mut body = Map::new();
    body.insert("instances".into(), json!(checks.len()));
    body.insert("failed_instances".into(), json!(failed));
    body.insert("checks".into(), Value::Array(all.into_iter().map(Value::Object).collect()));
    art.write_json("report.json", body)?;
    art.finish(None)?;
    println!("{} instances, {failed} with failures", checks.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
