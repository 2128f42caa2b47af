//! Monte Carlo harness: APs on a line, clients uniform over the union of the
//! cells, and per-slot placement, Rayleigh fading and uniform demands. Each slot builds
//! an instance, runs DAA and the baselines (optionally the exact oracles),
//! and the per-slot metrics are averaged over all feasible slots.
//!
//! Randomness is drawn from per-(slot, purpose) sub-streams of one master
//! seed, and slot results are merged in slot order, so output is identical
//! for any worker count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{cell_radius, db_to_linear, ChannelError, ChannelParams, LinkRealization};
use crate::dual_solver::{duality_gap_bound, DualState};
use crate::exact::{solve_lp_relaxation, solve_milp_exact, ENUMERATION_LIMIT};
use crate::instance::{build_instance, InstanceError, PairValues, Point, Topology};
use crate::policies::{jain_from_loads, jain_index, random_policy, rssi_policy};
use crate::rng::{derive_seed, stream_rng, Stream};

/// Rejection-sampling cap for client placement.
pub const MAX_PLACEMENT_ATTEMPTS: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("client placement gave up after {attempts} rejected draws")]
    Geometry { attempts: u64 },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// When to run the exact oracles in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactMode {
    #[default]
    Off,
    /// Only when Π|N_j| ≤ 10⁶.
    Auto,
    /// Always; branch-and-bound beyond the enumeration limit.
    Forced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_aps: usize,
    pub n_clients: usize,
    pub slots: usize,
    pub channel: ChannelParams,
    /// Cell-edge SNR in dB that fixes the cell radius.
    pub target_snr_db: f64,
    /// D/r: AP spacing relative to the cell radius.
    pub ap_spacing_factor: f64,
    /// Upper end of the uniform demand distribution, bits per second.
    pub demand_max: f64,
    pub daa_iters: usize,
    pub step_scale: f64,
    pub seed: u64,
    pub exact: ExactMode,
    /// Node budget for the integral oracle.
    pub exact_budget: u64,
    /// Draw a fresh client placement every slot. When false, one placement
    /// is drawn per experiment and only fading and demands vary.
    pub resample_topology: bool,
    /// Keep the averaged p_best^(k) and J^(k) curves.
    pub record_curves: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_aps: 5,
            n_clients: 100,
            slots: 1000,
            channel: ChannelParams::default(),
            target_snr_db: 10.0,
            ap_spacing_factor: 1.1,
            demand_max: 400e6,
            daa_iters: 1000,
            step_scale: 1.0,
            seed: 1,
            exact: ExactMode::Off,
            exact_budget: 50_000_000,
            resample_topology: true,
            record_curves: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.n_aps == 0 {
            return bad("n_aps must be positive");
        }
        if self.n_clients == 0 {
            return bad("n_clients must be positive");
        }
        if self.slots == 0 {
            return bad("slots must be at least 1");
        }
        if self.daa_iters == 0 {
            return bad("daa_iters must be at least 1");
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return bad("step_scale must be finite and positive");
        }
        if !(self.demand_max > 0.0 && self.demand_max.is_finite()) {
            return bad("demand_max must be finite and positive");
        }
        if !(self.ap_spacing_factor > 0.0 && self.ap_spacing_factor.is_finite()) {
            return bad("ap_spacing_factor must be finite and positive");
        }
        self.channel.validate()?;
        Ok(())
    }

    pub fn cell_radius(&self) -> Result<f64, SimError> {
        Ok(cell_radius(&self.channel, db_to_linear(self.target_snr_db))?)
    }
}

/// APs at x = i·D on the horizontal axis; clients uniform over the union of
/// the disks of radius r (rejection sampling from the bounding box).
pub fn generate_topology(cfg: &ExperimentConfig, seed: u64) -> Result<Topology, SimError> {
    cfg.validate()?;
    let r = cfg.cell_radius()?;
    let spacing = cfg.ap_spacing_factor * r;
    let aps: Vec<Point> = (0..cfg.n_aps).map(|i| Point::new(i as f64 * spacing, 0.0)).collect();
    let (x_lo, x_hi) = (-r, (cfg.n_aps - 1) as f64 * spacing + r);
    let mut rng = crate::rng::seeded_rng(seed);
    let mut clients = Vec::with_capacity(cfg.n_clients);
    let mut attempts = 0u64;
    while clients.len() < cfg.n_clients {
        attempts += 1;
        if attempts > MAX_PLACEMENT_ATTEMPTS {
            return Err(SimError::Geometry { attempts: attempts - 1 });
        }
        let p = Point::new(rng.random_range(x_lo..x_hi), rng.random_range(-r..r));
        if aps.iter().any(|a| a.distance(&p) <= r) {
            clients.push(p);
        }
    }
    Ok(Topology::from_positions(aps, clients, r)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotResult {
    pub slot: usize,
    /// p_best^(K) of DAA.
    pub p_daa: f64,
    /// g_best^(K) of DAA.
    pub d_star: f64,
    /// Integral optimum p★, when the oracle ran.
    pub p_exact: Option<f64>,
    /// LP-relaxation optimum, equal to the dual optimum; present with p_exact.
    pub d_relax: Option<f64>,
    pub p_rand: f64,
    pub p_rssi: f64,
    pub jain_daa: f64,
    pub jain_rand: f64,
    pub jain_rssi: f64,
    pub jain_exact: Option<f64>,
    /// (p★ - d★)/p★ with d★ the exact dual optimum.
    pub relative_gap: Option<f64>,
    /// (N + 1)(ϱ + max_j ϱ_j) for this slot's instance.
    pub gap_bound: f64,
    /// Iteration at which DAA first reached its final p_best.
    pub daa_best_found_at: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibleSlot {
    pub slot: usize,
    pub client: usize,
}

/// Means over feasible slots. Oracle-dependent means are over the slots
/// where the oracle ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub feasible_slots: usize,
    pub infeasible_slots: usize,
    pub exact_slots: usize,
    /// P^(K).
    pub p_daa: f64,
    /// D★ as reported by DAA (mean g_best).
    pub d_star: f64,
    pub p_rand: f64,
    pub p_rssi: f64,
    pub p_exact: Option<f64>,
    pub d_relax: Option<f64>,
    pub jain_daa: f64,
    pub jain_rand: f64,
    pub jain_rssi: f64,
    pub jain_exact: Option<f64>,
    /// Ave-RDG: mean of (p★ - d★)/p★.
    pub ave_rdg: Option<f64>,
    /// Mean of (p_best^(K) - g_best)/p_best^(K).
    pub ave_rdg_best_achieved: f64,
    /// Ave-DG: P★ - D★ over the oracle slots.
    pub ave_dg: Option<f64>,
    /// P^(K) - D★.
    pub ave_dg_best_achieved: f64,
    pub mean_gap_bound: f64,
    pub mean_best_found_at: f64,
}

/// Averaged convergence curves, index k-1 holds iteration k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub p_best: Vec<f64>,
    pub g_best: Vec<f64>,
    pub jain: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub slots: Vec<SlotResult>,
    pub infeasible: Vec<InfeasibleSlot>,
    pub aggregate: Aggregate,
    pub curves: Option<Curves>,
}

enum SlotOutcome {
    Feasible(Box<SlotResult>, Option<Curves>),
    Infeasible(InfeasibleSlot),
}

fn topology_seed(cfg: &ExperimentConfig, slot: usize) -> u64 {
    let s = if cfg.resample_topology { slot as u64 } else { 0 };
    derive_seed(cfg.seed, s, Stream::Topology)
}

fn run_slot(cfg: &ExperimentConfig, topo: &Topology, slot: usize) -> Result<SlotOutcome, SimError> {
    let ch = &cfg.channel;
    let mut fading_rng: ChaCha8Rng = stream_rng(cfg.seed, slot as u64, Stream::Fading);
    let mut demand_rng: ChaCha8Rng = stream_rng(cfg.seed, slot as u64, Stream::Demand);

    let mut rates = PairValues::new();
    let mut powers = PairValues::new();
    for (i, j) in topo.pairs() {
        let fading: f64 = loop {
            let a: f64 = Exp1.sample(&mut fading_rng);
            if a > 0.0 {
                break a;
            }
        };
        let link = LinkRealization::new(ch, topo.distance(i, j), fading)?;
        rates.insert((i, j), link.rate);
        powers.insert((i, j), link.received_power(ch));
    }
    let demands: Vec<f64> = (0..topo.n_clients())
        .map(|_| cfg.demand_max * (1.0 - demand_rng.random::<f64>()))
        .collect();

    let inst = match build_instance(topo, demands, &rates) {
        Ok(inst) => inst,
        Err(InstanceError::InfeasibleClient { client }) => {
            return Ok(SlotOutcome::Infeasible(InfeasibleSlot { slot, client }))
        }
        Err(e) => return Err(e.into()),
    };

    let mut state = DualState::new(&inst, cfg.step_scale);
    let mut curves = cfg.record_curves.then(|| Curves {
        p_best: Vec::with_capacity(cfg.daa_iters),
        g_best: Vec::with_capacity(cfg.daa_iters),
        jain: Vec::with_capacity(cfg.daa_iters),
    });
    for _ in 0..cfg.daa_iters {
        state.step(&inst);
        if let Some(c) = curves.as_mut() {
            c.p_best.push(state.best_primal());
            c.g_best.push(state.best_dual());
            c.jain.push(jain_from_loads(state.best_loads().to_vec()).index);
        }
    }

    let rand = random_policy(&inst, derive_seed(cfg.seed, slot as u64, Stream::RandomPolicy));
    let rssi = rssi_policy(&inst, &powers).expect("powers cover every candidate pair");

    let run_exact = match cfg.exact {
        ExactMode::Off => false,
        ExactMode::Auto => inst.search_space_size() <= ENUMERATION_LIMIT,
        ExactMode::Forced => true,
    };
    let (mut p_exact, mut d_relax, mut jain_exact) = (None, None, None);
    if run_exact {
        if let Ok(opt) = solve_milp_exact(&inst, cfg.exact_budget) {
            let a = opt.assignment().expect("integral result");
            p_exact = Some(opt.optimal_value);
            jain_exact = Some(jain_index(&inst, a).index);
            d_relax = solve_lp_relaxation(&inst).ok().map(|r| r.optimal_value);
        }
    }
    let relative_gap = match (p_exact, d_relax) {
        (Some(p), Some(d)) => Some((p - d) / p),
        _ => None,
    };

    Ok(SlotOutcome::Feasible(
        Box::new(SlotResult {
            slot,
            p_daa: state.best_primal(),
            d_star: state.best_dual(),
            p_exact,
            d_relax,
            p_rand: rand.objective(),
            p_rssi: rssi.objective(),
            jain_daa: jain_from_loads(state.best_loads().to_vec()).index,
            jain_rand: jain_index(&inst, &rand).index,
            jain_rssi: jain_index(&inst, &rssi).index,
            jain_exact,
            relative_gap,
            gap_bound: duality_gap_bound(&inst),
            daa_best_found_at: state.best_found_at(),
        }),
        curves,
    ))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Exact arithmetic means of the per-slot values, in slot order.
pub fn aggregate(slots: &[SlotResult], infeasible: usize) -> Aggregate {
    let m = |f: fn(&SlotResult) -> f64| mean(slots.iter().map(f)).unwrap_or(f64::NAN);
    let mo = |f: fn(&SlotResult) -> Option<f64>| mean(slots.iter().filter_map(f));
    let exact: Vec<&SlotResult> = slots.iter().filter(|s| s.p_exact.is_some() && s.d_relax.is_some()).collect();
    let p_daa = m(|s| s.p_daa);
    let d_star = m(|s| s.d_star);
    Aggregate {
        feasible_slots: slots.len(),
        infeasible_slots: infeasible,
        exact_slots: exact.len(),
        p_daa,
        d_star,
        p_rand: m(|s| s.p_rand),
        p_rssi: m(|s| s.p_rssi),
        p_exact: mo(|s| s.p_exact),
        d_relax: mo(|s| s.d_relax),
        jain_daa: m(|s| s.jain_daa),
        jain_rand: m(|s| s.jain_rand),
        jain_rssi: m(|s| s.jain_rssi),
        jain_exact: mo(|s| s.jain_exact),
        ave_rdg: mo(|s| s.relative_gap),
        ave_rdg_best_achieved: m(|s| (s.p_daa - s.d_star) / s.p_daa),
        ave_dg: mean(exact.iter().map(|s| s.p_exact.unwrap()))
            .zip(mean(exact.iter().map(|s| s.d_relax.unwrap())))
            .map(|(p, d)| p - d),
        ave_dg_best_achieved: p_daa - d_star,
        mean_gap_bound: m(|s| s.gap_bound),
        mean_best_found_at: m(|s| s.daa_best_found_at as f64),
    }
}

/// Runs every slot on the global rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, SimError> {
    cfg.validate()?;
    let fixed_topology = if cfg.resample_topology {
        None
    } else {
        Some(generate_topology(cfg, topology_seed(cfg, 0))?)
    };
    let outcomes: Vec<Result<SlotOutcome, SimError>> = (0..cfg.slots)
        .into_par_iter()
        .map(|slot| match &fixed_topology {
            Some(t) => run_slot(cfg, t, slot),
            None => run_slot(cfg, &generate_topology(cfg, topology_seed(cfg, slot))?, slot),
        })
        .collect();

    let mut slots = Vec::new();
    let mut infeasible = Vec::new();
    let mut curve_sum: Option<Curves> = None;
    for o in outcomes {
        match o? {
            SlotOutcome::Feasible(r, c) => {
                slots.push(*r);
                if let Some(c) = c {
                    match curve_sum.as_mut() {
                        None => curve_sum = Some(c),
                        Some(acc) => {
                            for (a, b) in acc.p_best.iter_mut().zip(&c.p_best) {
                                *a += b;
                            }
                            for (a, b) in acc.g_best.iter_mut().zip(&c.g_best) {
                                *a += b;
                            }
                            for (a, b) in acc.jain.iter_mut().zip(&c.jain) {
                                *a += b;
                            }
                        }
                    }
                }
            }
            SlotOutcome::Infeasible(s) => infeasible.push(s),
        }
    }
    let curves = curve_sum.map(|mut c| {
        let n = slots.len() as f64;
        for v in c.p_best.iter_mut().chain(c.g_best.iter_mut()).chain(c.jain.iter_mut()) {
            *v /= n;
        }
        c
    });
    let aggregate = aggregate(&slots, infeasible.len());
    Ok(ExperimentOutcome {
        slots,
        infeasible,
        aggregate,
        curves,
    })
}

/// Runs the experiment on a dedicated pool of `jobs` workers.
pub fn run_experiment_with_jobs(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutcome, SimError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    pool.install(|| run_experiment(cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    NClients,
    NAps,
    DaaIters,
}

impl std::str::FromStr for SweepParam {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "n_clients" => Ok(Self::NClients),
            "n_aps" => Ok(Self::NAps),
            "daa_iters" => Ok(Self::DaaIters),
            other => Err(SimError::Config(format!(
                "unknown sweep parameter `{other}` (expected n_clients, n_aps or daa_iters)"
            ))),
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::NClients => "n_clients",
            Self::NAps => "n_aps",
            Self::DaaIters => "daa_iters",
        })
    }
}

#[derive(Debug)]
pub struct SweepRow {
    pub value: usize,
    pub outcome: Result<Aggregate, SimError>,
}

/// One experiment per value, all sharing the base seed. A failing cell is
/// reported in its row and the sweep continues.
pub fn sweep(base: &ExperimentConfig, vary: SweepParam, values: &[usize]) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&value| {
            let mut cfg = base.clone();
            match vary {
                SweepParam::NClients => cfg.n_clients = value,
                SweepParam::NAps => cfg.n_aps = value,
                SweepParam::DaaIters => cfg.daa_iters = value,
            }
            SweepRow {
                value,
                outcome: run_experiment(&cfg).map(|o| o.aggregate),
            }
        })
        .collect()
}
