//! Baseline association policies and the evaluation metrics shared by all
//! policies.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{max_load, Assignment, Instance, PairValues};
use crate::rng::seeded_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("no received power for AP {ap} and client {client}")]
    MissingPower { ap: usize, client: usize },
}

/// Each client picks uniformly at random among its (pruned) candidates.
pub fn random_policy(inst: &Instance, seed: u64) -> Assignment {
    let mut rng = seeded_rng(seed);
    let choice = (0..inst.n_clients())
        .map(|j| {
            let c = inst.candidates(j);
            c[rng.random_range(0..c.len())].ap
        })
        .collect();
    Assignment::from_valid(inst, choice)
}

/// Each client picks the candidate with the strongest received power,
/// smallest AP index on ties. Load is ignored entirely.
pub fn rssi_policy(inst: &Instance, received_powers: &PairValues) -> Result<Assignment, PolicyError> {
    let mut choice = Vec::with_capacity(inst.n_clients());
    for j in 0..inst.n_clients() {
        let mut best: Option<(usize, f64)> = None;
        for l in inst.candidates(j) {
            let p = *received_powers
                .get(&(l.ap, j))
                .ok_or(PolicyError::MissingPower { ap: l.ap, client: j })?;
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((l.ap, p));
            }
        }
        choice.push(best.expect("nonempty candidates").0);
    }
    Ok(Assignment::from_valid(inst, choice))
}

/// max_i Σ_{j: a(j) = i} β_ij.
pub fn objective_value(inst: &Instance, a: &Assignment) -> f64 {
    max_load(&a.loads(inst))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    /// Jain's index (ΣY)² / (N ΣY²), in [1/N, 1].
    pub index: f64,
    pub per_ap_load: Vec<f64>,
    /// Every AP carries zero load; `index` is reported as 1.
    pub degenerate: bool,
}

pub fn jain_index(inst: &Instance, a: &Assignment) -> FairnessReport {
    jain_from_loads(a.loads(inst))
}

/// Jain's index of an arbitrary load vector. The loads are rescaled by
/// their maximum first, which leaves the index unchanged and avoids
/// underflow for tiny utilizations.
pub fn jain_from_loads(per_ap_load: Vec<f64>) -> FairnessReport {
    let peak = max_load(&per_ap_load);
    if peak == 0.0 {
        return FairnessReport {
            index: 1.0,
            per_ap_load,
            degenerate: true,
        };
    }
    let n = per_ap_load.len() as f64;
    let sum: f64 = per_ap_load.iter().map(|y| y / peak).sum();
    let sq: f64 = per_ap_load.iter().map(|y| (y / peak) * (y / peak)).sum();
    FairnessReport {
        index: sum * sum / (n * sq),
        per_ap_load,
        degenerate: false,
    }
}
