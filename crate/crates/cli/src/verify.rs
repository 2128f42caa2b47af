//! Self-check suite: worked-example fixtures plus seeded random instances,
//! each run through the exact oracles, the LP relaxation and DAA.

use std::fs;
use std::path::Path;

use mmwave_assoc::dual_solver::{convergence_bound, duality_gap_bound};
use mmwave_assoc::exact::{
    branch_and_bound, enumerate_exhaustive, lp_residuals, solve_lp_relaxation, solve_milp_exact,
};
use mmwave_assoc::instance::{example1_instance, example2_instance, InstanceDoc};
use mmwave_assoc::rng::seeded_rng;
use mmwave_assoc::{run_daa, DaaConfig, Instance};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Search spaces up to this size are also cross-checked by enumeration.
const CROSS_CHECK_LIMIT: f64 = 1e5;
/// Node budget for the integral oracle on any one instance.
const NODE_BUDGET: u64 = 50_000_000;
/// DAA step scale for the relaxation-equals-dual check.
const RELAXATION_STEP_SCALE: f64 = 10.0;

/// A fixture file: an instance document plus an optional known optimum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_optimum: Option<f64>,
    pub instance: InstanceDoc,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub instance: Instance,
    pub expected_optimum: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub check: &'static str,
    pub subject: String,
    pub passed: bool,
    pub detail: String,
}

pub fn builtin_fixtures() -> Vec<Fixture> {
    let fixture = |name: &str, instance: Instance, opt: f64| Fixture {
        name: name.to_string(),
        instance,
        expected_optimum: Some(opt),
    };
    vec![
        fixture("example1-m3", example1_instance(3, 0.5, &[0.3, 0.9]).unwrap(), 0.5),
        fixture(
            "example1-m8",
            example1_instance(8, 0.5, &[0.2, 0.5, 0.7, 1.0, 0.45, 0.6, 0.8]).unwrap(),
            0.5,
        ),
        fixture("example2-n2", example2_instance(2, &[0.3, 0.3], 2, 0.1).unwrap(), 0.5),
        fixture("example2-n3", example2_instance(3, &[0.0; 3], 1, 0.2).unwrap(), 0.2),
    ]
}

/// Loads every `*.json` file in `dir`, in name order. The error names the
/// first file that does not parse or validate.
pub fn load_fixtures(dir: &Path) -> Result<Vec<Fixture>, String> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| format!("reading fixture directory {}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().to_string();
            let text = fs::read_to_string(p).map_err(|e| format!("fixture {}: {e}", p.display()))?;
            let doc: FixtureDoc =
                serde_json::from_str(&text).map_err(|e| format!("fixture {}: {e}", p.display()))?;
            let instance = Instance::from_doc(&doc.instance).map_err(|e| format!("fixture {}: {e}", p.display()))?;
            Ok(Fixture {
                name,
                instance,
                expected_optimum: doc.expected_optimum,
            })
        })
        .collect()
}

/// `count` instances with 2–4 APs, 6–12 clients, random nonempty candidate
/// sets and β ~ Uniform(0, 1].
pub fn random_fixtures(seed: u64, count: usize) -> Vec<Fixture> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|k| {
            let n = rng.random_range(2..=4);
            let m = rng.random_range(6..=12);
            let rows = (0..m)
                .map(|_| {
                    let size = rng.random_range(1..=n);
                    let mut aps = sample(&mut rng, n, size).into_vec();
                    aps.sort_unstable();
                    aps.into_iter().map(|i| (i, 1.0 - rng.random::<f64>())).collect()
                })
                .collect();
            Fixture {
                name: format!("random-{k:03}"),
                instance: Instance::from_utilizations(n, rows).expect("β in (0, 1]"),
                expected_optimum: None,
            }
        })
        .collect()
}

fn row(check: &'static str, subject: &str, passed: bool, detail: String) -> CheckRow {
    CheckRow {
        check,
        subject: subject.to_string(),
        passed,
        detail,
    }
}

/// Runs every check on one instance.
pub fn check_instance(f: &Fixture, iters: usize) -> Vec<CheckRow> {
    let inst = &f.instance;
    let name = f.name.as_str();
    let mut rows = Vec::new();

    let p_star = match solve_milp_exact(inst, NODE_BUDGET) {
        Ok(r) => r.optimal_value,
        Err(e) => {
            rows.push(row("exact-oracle", name, false, e.to_string()));
            return rows;
        }
    };
    if let Some(expected) = f.expected_optimum {
        let err = (p_star - expected).abs();
        rows.push(row("known-optimum", name, err <= 1e-9, format!("p* = {p_star}, expected {expected}")));
    }

    let lp = match solve_lp_relaxation(inst) {
        Ok(r) => r,
        Err(e) => {
            rows.push(row("lp-relaxation", name, false, e.to_string()));
            return rows;
        }
    };
    let p_relax = lp.optimal_value;
    let resid = lp_residuals(inst, lp.fractional().expect("LP result is fractional"));
    let worst = resid.primal.max(resid.dual).max(resid.objective_gap);
    rows.push(row(
        "lp-certificate",
        name,
        worst <= 1e-9 && resid.complementary_slackness <= 1e-8,
        format!(
            "feasibility {worst:.1e}, complementary slackness {:.1e}",
            resid.complementary_slackness
        ),
    ));

    let bound = duality_gap_bound(inst);
    let gap = p_star - p_relax;
    rows.push(row(
        "gap-certificate",
        name,
        gap >= -1e-9 && gap <= bound,
        format!("0 <= {gap:.3e} <= {bound:.3e}"),
    ));

    let fast = run_daa(inst, &DaaConfig::new(iters, RELAXATION_STEP_SCALE)).expect("valid config");
    let err = (p_relax - fast.dual_value).abs() / p_relax.max(1.0);
    rows.push(row(
        "relaxation-equals-dual",
        name,
        err <= 1e-3,
        format!("|p_relax - g_best| = {err:.2e} after {iters} iterations"),
    ));

    let rep = run_daa(inst, &DaaConfig::new(iters, 1.0).with_trace(true)).expect("valid config");
    let trace = rep.trace.expect("trace requested");
    let weak = trace.iter().all(|t| t.g_lambda <= p_star + 1e-12);
    rows.push(row(
        "weak-duality",
        name,
        weak && rep.primal_value >= p_star - 1e-12,
        format!("max g = {:.6}, p_best = {:.6}, p* = {p_star:.6}", rep.dual_value, rep.primal_value),
    ));
    let violation = trace
        .iter()
        .find(|t| p_relax - t.g_best > convergence_bound(inst, 1.0, t.k));
    rows.push(row(
        "convergence-bound",
        name,
        violation.is_none(),
        match violation {
            Some(t) => format!("violated at k = {}", t.k),
            None => format!("holds for k = 1..{iters}"),
        },
    ));

    if inst.search_space_size() <= CROSS_CHECK_LIMIT {
        let agree = match (branch_and_bound(inst, NODE_BUDGET), enumerate_exhaustive(inst, NODE_BUDGET)) {
            (Ok(a), Ok(b)) => (a.optimal_value == b.optimal_value, format!("{} vs {}", a.optimal_value, b.optimal_value)),
            (a, b) => (false, format!("{:?} / {:?}", a.err(), b.err())),
        };
        rows.push(row("oracle-agreement", name, agree.0, agree.1));
    }
    rows
}
