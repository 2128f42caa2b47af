//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the solver modules of the crate under test.

#![allow(dead_code)]

use mmwave_assoc::Instance;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// β ~ Uniform(0, 1]: 1 - U[0, 1).
pub fn unit_beta(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Every client gets a random nonempty candidate subset with iid β.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Instance {
    let rows = (0..m)
        .map(|_| {
            let k = rng.random_range(1..=n);
            let mut aps = sample(rng, n, k).into_vec();
            aps.sort_unstable();
            aps.into_iter().map(|i| (i, unit_beta(rng))).collect()
        })
        .collect();
    Instance::from_utilizations(n, rows).unwrap()
}

/// Random instance whose search space Π|N_j| stays within `limit`.
pub fn random_instance_capped(rng: &mut ChaCha8Rng, n: usize, m: usize, limit: f64) -> Instance {
    loop {
        let inst = random_instance(rng, n, m);
        if inst.search_space_size() <= limit {
            return inst;
        }
    }
}

/// Dense β matrix, `None` where (i, j) is not a candidate.
pub fn dense(inst: &Instance) -> Vec<Vec<Option<f64>>> {
    (0..inst.n_clients())
        .map(|j| (0..inst.n_aps()).map(|i| inst.beta(i, j)).collect())
        .collect()
}

/// Max AP load of an association, from the dense matrix.
pub fn objective(beta: &[Vec<Option<f64>>], n_aps: usize, choice: &[usize]) -> f64 {
    let mut load = vec![0.0; n_aps];
    for (j, &i) in choice.iter().enumerate() {
        load[i] += beta[j][i].expect("candidate");
    }
    load.into_iter().fold(0.0, f64::max)
}

/// Odometer enumeration of every association; returns (p★, one argmin).
pub fn brute_force(inst: &Instance) -> (f64, Vec<usize>) {
    let beta = dense(inst);
    let n = inst.n_aps();
    let options: Vec<Vec<usize>> = beta
        .iter()
        .map(|row| (0..n).filter(|&i| row[i].is_some()).collect())
        .collect();
    let mut digit = vec![0usize; options.len()];
    let mut best = (f64::INFINITY, Vec::new());
    loop {
        let choice: Vec<usize> = digit.iter().zip(&options).map(|(&d, o)| o[d]).collect();
        let v = objective(&beta, n, &choice);
        if v < best.0 {
            best = (v, choice);
        }
        let mut pos = 0;
        loop {
            if pos == digit.len() {
                return best;
            }
            digit[pos] += 1;
            if digit[pos] < options[pos].len() {
                break;
            }
            digit[pos] = 0;
            pos += 1;
        }
    }
}

/// g(λ) = Σ_j min_{i ∈ N_j} β_ij λ_i straight from the dense matrix.
pub fn dual_oracle(inst: &Instance, prices: &[f64]) -> f64 {
    dense(inst)
        .iter()
        .map(|row| {
            row.iter()
                .zip(prices)
                .filter_map(|(b, l)| b.map(|b| b * l))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Euclidean projection onto the unit simplex by bisection on the
/// threshold τ with Σ max(v_i - τ, 0) = 1.
pub fn project_by_bisection(v: &[f64]) -> Vec<f64> {
    let mass = |tau: f64| v.iter().map(|x| (x - tau).max(0.0)).sum::<f64>();
    let hi0 = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (hi0 - 1.0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Area of the lens formed by two disks of radius r at centre distance d.
pub fn lens_area(r: f64, d: f64) -> f64 {
    if d >= 2.0 * r {
        return 0.0;
    }
    2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt()
}

/// Fraction of a two-disk union covered by both disks.
pub fn lens_fraction(r: f64, d: f64) -> f64 {
    let lens = lens_area(r, d);
    lens / (2.0 * std::f64::consts::PI * r * r - lens)
}
