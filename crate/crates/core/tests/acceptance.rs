//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{brute_force, dual_oracle, project_by_bisection, random_instance, random_instance_capped};
use mmwave_assoc::dual_solver::{convergence_bound, duality_gap_bound, project_simplex};
use mmwave_assoc::exact::{branch_and_bound, enumerate_exhaustive, lp_residuals, solve_lp_relaxation, solve_milp_exact};
use mmwave_assoc::instance::{example1_instance, example2_instance};
use mmwave_assoc::sim::{run_experiment, run_experiment_with_jobs, ExactMode};
use mmwave_assoc::{run_daa, run_daa_distributed, DaaConfig, ExperimentConfig, Instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// The 100 instances shared by criteria 2 and 3.
fn relaxation_instances() -> Vec<Instance> {
    let mut r = ChaCha8Rng::seed_from_u64(2024);
    (0..100)
        .map(|_| {
            let n = r.random_range(2..=4);
            let m = r.random_range(6..=15);
            random_instance(&mut r, n, m)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let fixtures = [
        ("example1 m=3", example1_instance(3, 0.5, &[0.3, 0.9]).unwrap()),
        (
            "example1 m=8",
            example1_instance(8, 0.5, &[0.2, 0.5, 0.7, 1.0, 0.45, 0.6, 0.8]).unwrap(),
        ),
        ("example2 n=2", example2_instance(2, &[0.3, 0.3], 2, 0.1).unwrap()),
    ];
    let mut worst: (f64, f64) = (0.0, 0.0);
    for (name, inst) in &fixtures {
        let p = solve_milp_exact(inst, u64::MAX).map_err(|e| e.to_string())?.optimal_value;
        let relax = solve_lp_relaxation(inst).map_err(|e| e.to_string())?.optimal_value;
        let g = run_daa(inst, &DaaConfig::new(10_000, 1.0)).map_err(|e| e.to_string())?.dual_value;
        ensure((p - relax).abs() <= 1e-9, || format!("{name}: |p* - p*_relax| = {:e}", (p - relax).abs()))?;
        ensure((p - g).abs() <= 1e-3, || format!("{name}: |p* - g_best| = {:e}", (p - g).abs()))?;
        worst = (worst.0.max((p - relax).abs()), worst.1.max((p - g).abs()));
    }
    Ok(format!("max |p*-p*_relax| = {:.1e}, max |p*-g_best| = {:.1e}", worst.0, worst.1))
}

/// Step scale for the relaxation check; the criterion leaves `a` open.
const RELAXATION_STEP_SCALE: f64 = 10.0;

fn criterion_2(instances: &[Instance]) -> Outcome {
    let mut worst = 0.0f64;
    let mut misses_at_default = 0;
    for (k, inst) in instances.iter().enumerate() {
        let relax = solve_lp_relaxation(inst).map_err(|e| e.to_string())?.optimal_value;
        let g = run_daa(inst, &DaaConfig::new(10_000, RELAXATION_STEP_SCALE)).map_err(|e| e.to_string())?.dual_value;
        let err = (relax - g).abs() / relax.max(1.0);
        ensure(err <= 1e-3, || format!("instance {k}: scaled |p*_relax - g_best| = {err:e}"))?;
        worst = worst.max(err);
        let g1 = run_daa(inst, &DaaConfig::new(10_000, 1.0)).map_err(|e| e.to_string())?.dual_value;
        if (relax - g1).abs() / relax.max(1.0) > 1e-3 {
            misses_at_default += 1;
        }
    }
    Ok(format!(
        "100 instances at a={RELAXATION_STEP_SCALE}, worst scaled error {worst:.2e} (a=1 would miss 1e-3 on {misses_at_default})"
    ))
}

fn criterion_3(instances: &[Instance]) -> Outcome {
    let mut worst_ratio = 0.0f64;
    for (k, inst) in instances.iter().enumerate() {
        let p = solve_milp_exact(inst, u64::MAX).map_err(|e| e.to_string())?.optimal_value;
        let relax = solve_lp_relaxation(inst).map_err(|e| e.to_string())?.optimal_value;
        let bound = duality_gap_bound(inst);
        ensure(p - relax >= -1e-9 && p - relax <= bound, || {
            format!("instance {k}: gap {} outside [0, {bound}]", p - relax)
        })?;
        worst_ratio = worst_ratio.max((p - relax) / bound);
    }
    Ok(format!("0 violations, largest gap/bound {worst_ratio:.3}"))
}

fn criterion_4() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let mut tightest = f64::INFINITY;
    for case in 0..20 {
        let n = r.random_range(2..=5);
        let m = r.random_range(4..=20);
        let inst = random_instance(&mut r, n, m);
        let d_star = solve_lp_relaxation(&inst).map_err(|e| e.to_string())?.optimal_value;
        let trace = run_daa(&inst, &DaaConfig::new(2000, 1.0).with_trace(true))
            .map_err(|e| e.to_string())?
            .trace
            .unwrap();
        for row in &trace {
            let bound = convergence_bound(&inst, 1.0, row.k);
            ensure(d_star - row.g_best <= bound, || {
                format!("instance {case}, k={}: {} > {bound}", row.k, d_star - row.g_best)
            })?;
            tightest = tightest.min(bound - (d_star - row.g_best));
        }
    }
    Ok(format!("20 instances x 2000 iterations, smallest slack {tightest:.3e}"))
}

fn criterion_5() -> Outcome {
    let cfg = ExperimentConfig {
        n_aps: 5,
        n_clients: 100,
        slots: 200,
        daa_iters: 300,
        ..Default::default()
    };
    let a = run_experiment(&cfg).map_err(|e| e.to_string())?.aggregate;
    let ratio = a.p_daa / a.p_rssi;
    ensure(ratio <= 0.92, || format!("P_DAA/P_RSSI = {ratio:.4}"))?;
    ensure(a.p_rssi < a.p_rand, || format!("P_RSSI {} >= P_rand {}", a.p_rssi, a.p_rand))?;
    Ok(format!(
        "P_DAA/P_RSSI = {ratio:.4}, P_RSSI/P_rand = {:.4} ({} feasible, {} infeasible slots)",
        a.p_rssi / a.p_rand,
        a.feasible_slots,
        a.infeasible_slots
    ))
}

fn criterion_6() -> Outcome {
    let mut gaps = Vec::new();
    for m in [10, 20, 40] {
        let cfg = ExperimentConfig {
            n_aps: 3,
            n_clients: m,
            slots: 200,
            exact: ExactMode::Forced,
            ..Default::default()
        };
        let a = run_experiment(&cfg).map_err(|e| e.to_string())?.aggregate;
        ensure(a.exact_slots == a.feasible_slots, || format!("M={m}: oracle skipped slots"))?;
        gaps.push(a.ave_rdg.ok_or("no exact slots")?);
    }
    ensure(gaps[0] >= gaps[1] && gaps[1] >= gaps[2], || format!("not nonincreasing: {gaps:?}"))?;
    ensure(gaps[2] <= 0.10, || format!("M=40 gap {}", gaps[2]))?;
    Ok(format!(
        "Ave-RDG M=10: {:.4}, M=20: {:.4}, M=40: {:.4}",
        gaps[0], gaps[1], gaps[2]
    ))
}

fn criterion_7() -> Outcome {
    let big = ExperimentConfig {
        n_aps: 5,
        n_clients: 100,
        slots: 100,
        daa_iters: 1000,
        ..Default::default()
    };
    let a = run_experiment(&big).map_err(|e| e.to_string())?.aggregate;
    ensure(a.jain_daa >= a.jain_rssi, || format!("J_DAA {} < J_RSSI {}", a.jain_daa, a.jain_rssi))?;
    let small = ExperimentConfig {
        n_clients: 20,
        exact: ExactMode::Forced,
        ..big
    };
    let s = run_experiment(&small).map_err(|e| e.to_string())?.aggregate;
    let j_star = s.jain_exact.ok_or("no exact slots at M=20")?;
    ensure(s.jain_daa >= 0.9 * j_star, || format!("J_DAA {} < 0.9 J* ({j_star})", s.jain_daa))?;
    Ok(format!(
        "M=100: J_DAA {:.4} vs J_RSSI {:.4}; M=20: J_DAA {:.4} vs J* {:.4}",
        a.jain_daa, a.jain_rssi, s.jain_daa, j_star
    ))
}

fn slot_csv(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<u8>, String> {
    let out = run_experiment_with_jobs(cfg, jobs).map_err(|e| e.to_string())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in &out.slots {
        w.serialize(s).map_err(|e| e.to_string())?;
    }
    w.into_inner().map_err(|e| e.to_string())
}

fn criterion_8() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(8);

    for k in 0..10_000 {
        let n = r.random_range(1..=16);
        let v: Vec<f64> = (0..n).map(|_| 10.0 * (2.0 * r.random::<f64>() - 1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| 10.0 * (2.0 * r.random::<f64>() - 1.0)).collect();
        let p = project_simplex(&v);
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let feasible = p.iter().all(|&x| x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
        let tau = v.iter().zip(&p).find(|(_, &x)| x > 0.0).map(|(a, b)| a - b).unwrap();
        let kkt = v
            .iter()
            .zip(&p)
            .all(|(a, &b)| if b > 0.0 { (a - b - tau).abs() <= 1e-9 } else { *a <= tau + 1e-9 });
        let oracle = dist(&p, &project_by_bisection(&v)) <= 1e-9;
        let idem = dist(&project_simplex(&p), &p) <= 1e-12;
        let nonexp = dist(&p, &project_simplex(&w)) <= dist(&v, &w) + 1e-12;
        ensure(feasible && kkt && oracle && idem && nonexp, || format!("projection vector {k}: {v:?}"))?;
    }

    let mut weak_checks = 0usize;
    for case in 0..50 {
        let n = r.random_range(2..=6);
        let m = r.random_range(5..=12);
        let inst = random_instance_capped(&mut r, n, m, 1e6);
        let cfg = DaaConfig::new(500, 1.0).with_trace(true);
        let c = run_daa(&inst, &cfg).map_err(|e| e.to_string())?;
        let d = run_daa_distributed(&inst, &cfg).map_err(|e| e.to_string())?.report;
        let (ct, dt) = (c.trace.as_ref().unwrap(), d.trace.as_ref().unwrap());
        let same = c.assignment == d.assignment
            && c.final_prices == d.final_prices
            && ct.iter().zip(dt).all(|(a, b)| {
                a.prices == b.prices && a.t_k.to_bits() == b.t_k.to_bits() && a.p_best.to_bits() == b.p_best.to_bits()
            });
        ensure(same, || format!("distributed trajectory differs on instance {case}"))?;
        let monotone = ct.windows(2).all(|w| w[1].g_best >= w[0].g_best && w[1].p_best <= w[0].p_best);
        ensure(monotone, || format!("non-monotone best trace on instance {case}"))?;
        let p_star = brute_force(&inst).0;
        for row in ct {
            weak_checks += 1;
            let g = dual_oracle(&inst, &row.prices);
            ensure(row.g_lambda <= p_star + 1e-12 && g <= p_star + 1e-12, || {
                format!("weak duality violated on instance {case} at k={}", row.k)
            })?;
        }
    }

    let cfg = ExperimentConfig {
        n_aps: 4,
        n_clients: 40,
        slots: 40,
        daa_iters: 200,
        exact: ExactMode::Auto,
        ..Default::default()
    };
    let one = slot_csv(&cfg, 1)?;
    let eight = slot_csv(&cfg, 8)?;
    ensure(one == eight, || "slot CSV differs between 1 and 8 workers".into())?;
    Ok(format!(
        "1e4 projections, 50 distributed trajectories, {weak_checks} weak-duality checks, identical CSV ({} bytes)",
        one.len()
    ))
}

fn criterion_9() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    let mut nodes = (0u64, 0u64);
    for case in 0..100 {
        let n = r.random_range(2..=5);
        let m = r.random_range(4..=14);
        let inst = random_instance_capped(&mut r, n, m, 1e5);
        let bb = branch_and_bound(&inst, u64::MAX).map_err(|e| e.to_string())?;
        let en = enumerate_exhaustive(&inst, u64::MAX).map_err(|e| e.to_string())?;
        ensure(bb.optimal_value == en.optimal_value, || {
            format!("instance {case}: B&B {} vs enumeration {}", bb.optimal_value, en.optimal_value)
        })?;
        nodes = (nodes.0 + bb.nodes_explored, nodes.1 + en.nodes_explored);
        let lp = solve_lp_relaxation(&inst).map_err(|e| e.to_string())?;
        let res = lp_residuals(&inst, lp.fractional().unwrap());
        ensure(res.complementary_slackness <= 1e-8, || {
            format!("instance {case}: complementary slackness residual {:e}", res.complementary_slackness)
        })?;
    }
    Ok(format!("100 instances agree; B&B nodes {} vs enumeration {}", nodes.0, nodes.1))
}

/// Informational: wall time per DAA iteration against Σ|N_j| + N log N.
fn iteration_cost_report() -> String {
    let mut r = ChaCha8Rng::seed_from_u64(10);
    let mut parts = Vec::new();
    for (n, m) in [(4, 100), (8, 400), (16, 1600)] {
        let inst = random_instance(&mut r, n, m);
        let work = inst.n_pairs() as f64 + n as f64 * (n as f64).log2();
        let t = Instant::now();
        run_daa(&inst, &DaaConfig::new(200, 1.0)).unwrap();
        let per_iter = t.elapsed().as_secs_f64() / 200.0;
        parts.push(format!("N={n} M={m}: {:.2} ns per unit of work", 1e9 * per_iter / work));
    }
    parts.join(", ")
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let instances = relaxation_instances();
    let criteria: Vec<Criterion> = vec![
        ("1 strong duality on worked examples", Box::new(criterion_1)),
        ("2 LP relaxation equals DAA dual value", Box::new(|| criterion_2(&instances))),
        ("3 duality-gap certificate", Box::new(|| criterion_3(&instances))),
        ("4 convergence bound", Box::new(criterion_4)),
        ("5 DAA vs RSSI vs random objective", Box::new(criterion_5)),
        ("6 relative gap trend", Box::new(criterion_6)),
        ("7 fairness", Box::new(criterion_7)),
        ("8 property suites", Box::new(criterion_8)),
        ("9 oracle self-consistency", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why} [{secs:.1}s]");
            }
        }
    }
    println!("INFO DAA iteration cost: {}", iteration_cost_report());
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
