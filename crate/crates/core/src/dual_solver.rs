//! Lagrangian dual of the min-max association problem and the projected
//! subgradient method that solves it.
//!
//! Dualizing the per-AP load constraints with prices λ on the unit simplex
//! decouples the problem by client: each client independently picks the AP
//! minimizing β_ij λ_i, the dual function is the sum of those minima, and the
//! per-AP loads of the resulting association give (the negative of) a
//! subgradient. Every iterate is a feasible association, so the best primal
//! value seen so far is tracked alongside the best dual value.
//!
//! One iteration costs O(Σ_j |N_j| + N log N): a scan over every candidate
//! link plus a sort for the simplex projection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{max_load, Assignment, Instance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("max_iters must be at least 1")]
    ZeroIterations,
    #[error("step_scale must be finite and strictly positive, got {0}")]
    InvalidStepScale(f64),
}

/// Index into `inst.candidates(j)` of the cheapest link under `prices`, and
/// its cost. Ties go to the first (smallest-AP) candidate.
#[inline]
fn cheapest_link(inst: &Instance, prices: &[f64], j: usize) -> (usize, f64) {
    let links = inst.candidates(j);
    let mut best = 0;
    let mut best_cost = links[0].beta * prices[links[0].ap];
    for (pos, l) in links.iter().enumerate().skip(1) {
        let cost = l.beta * prices[l.ap];
        if cost < best_cost {
            best = pos;
            best_cost = cost;
        }
    }
    (best, best_cost)
}

/// Closed-form per-client subproblem: argmin over i ∈ N_j of β_ij λ_i,
/// smallest AP index on ties.
pub fn client_subproblem(inst: &Instance, prices: &[f64], j: usize) -> usize {
    let (pos, _) = cheapest_link(inst, prices, j);
    inst.candidates(j)[pos].ap
}

/// g(λ) = Σ_j min_{i ∈ N_j} β_ij λ_i, for λ on the simplex.
pub fn dual_value(inst: &Instance, prices: &[f64]) -> f64 {
    (0..inst.n_clients())
        .map(|j| cheapest_link(inst, prices, j).1)
        .sum()
}

/// u_i = -Σ_{j assigned to i} β_ij, a subgradient of -g at the prices that
/// produced `ap_of_client`.
pub fn subgradient(inst: &Instance, ap_of_client: &[usize]) -> Vec<f64> {
    inst.ap_loads(ap_of_client).into_iter().map(|y| -y).collect()
}

/// Euclidean projection onto {x : x ≥ 0, Σx = 1} by sort-and-threshold.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    debug_assert!(v.iter().all(|x| x.is_finite()));
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (r, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - 1.0) / (r + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Uniform starting prices 1/N.
pub fn uniform_prices(n_aps: usize) -> Vec<f64> {
    vec![1.0 / n_aps as f64; n_aps]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaaConfig {
    pub max_iters: usize,
    /// `a` in the step schedule α_k = a/k.
    pub step_scale: f64,
    pub record_trace: bool,
}

impl Default for DaaConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            step_scale: 1.0,
            record_trace: false,
        }
    }
}

impl DaaConfig {
    pub fn new(max_iters: usize, step_scale: f64) -> Self {
        Self {
            max_iters,
            step_scale,
            record_trace: false,
        }
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_iters == 0 {
            return Err(SolverError::ZeroIterations);
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(SolverError::InvalidStepScale(self.step_scale));
        }
        Ok(())
    }
}

/// One row of the convergence trace. `prices` are the λ^(k) at which the
/// iteration was evaluated; they are not part of the CSV form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub g_lambda: f64,
    pub t_k: f64,
    pub g_best: f64,
    pub p_best: f64,
    #[serde(skip)]
    pub prices: Vec<f64>,
}

/// What a single iteration observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub k: usize,
    pub g_lambda: f64,
    pub t_k: f64,
    pub ap_of_client: Vec<usize>,
    pub loads: Vec<f64>,
}

/// Mutable state of one projected-subgradient run.
#[derive(Debug, Clone)]
pub struct DualState {
    prices: Vec<f64>,
    iteration: usize,
    best_dual: f64,
    best_primal: f64,
    best_assignment: Option<Assignment>,
    best_loads: Vec<f64>,
    best_found_at: usize,
    step_scale: f64,
}

impl DualState {
    pub fn new(inst: &Instance, step_scale: f64) -> Self {
        Self::with_prices(uniform_prices(inst.n_aps()), step_scale)
    }

    pub fn with_prices(prices: Vec<f64>, step_scale: f64) -> Self {
        let n = prices.len();
        Self {
            prices,
            iteration: 0,
            best_dual: f64::NEG_INFINITY,
            best_primal: f64::INFINITY,
            best_assignment: None,
            best_loads: vec![0.0; n],
            best_found_at: 0,
            step_scale,
        }
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// Number of completed iterations.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn best_dual(&self) -> f64 {
        self.best_dual
    }

    pub fn best_primal(&self) -> f64 {
        self.best_primal
    }

    pub fn best_assignment(&self) -> Option<&Assignment> {
        self.best_assignment.as_ref()
    }

    /// Per-AP loads of the best assignment.
    pub fn best_loads(&self) -> &[f64] {
        &self.best_loads
    }

    /// Iteration at which the current best primal value was first reached.
    pub fn best_found_at(&self) -> usize {
        self.best_found_at
    }

    pub fn step_scale(&self) -> f64 {
        self.step_scale
    }

    /// Evaluates the subproblems at the current prices, updates the best
    /// primal/dual records and takes one projected subgradient step.
    pub fn step(&mut self, inst: &Instance) -> Iterate {
        let k = self.iteration + 1;
        let n = inst.n_aps();
        let mut loads = vec![0.0; n];
        let mut ap_of_client = Vec::with_capacity(inst.n_clients());
        let mut g = 0.0;
        for j in 0..inst.n_clients() {
            let (pos, cost) = cheapest_link(inst, &self.prices, j);
            let link = inst.candidates(j)[pos];
            loads[link.ap] += link.beta;
            ap_of_client.push(link.ap);
            g += cost;
        }
        let t_k = max_load(&loads);
        self.record(k, g, t_k, &ap_of_client, &loads);

        let alpha = self.step_scale / k as f64;
        // λ - α u with u = -loads
        let moved: Vec<f64> = self
            .prices
            .iter()
            .zip(&loads)
            .map(|(&p, &y)| p - alpha * -y)
            .collect();
        self.prices = project_simplex(&moved);
        self.iteration = k;
        Iterate {
            k,
            g_lambda: g,
            t_k,
            ap_of_client,
            loads,
        }
    }

    fn record(&mut self, k: usize, g: f64, t_k: f64, ap_of_client: &[usize], loads: &[f64]) {
        if t_k < self.best_primal {
            self.best_primal = t_k;
            self.best_assignment = Some(Assignment::from_parts(ap_of_client.to_vec(), t_k));
            self.best_loads.copy_from_slice(loads);
            self.best_found_at = k;
        }
        if g > self.best_dual {
            self.best_dual = g;
        }
    }

    fn into_report(self, trace: Option<Vec<TraceRow>>) -> SolveReport {
        let assignment = self
            .best_assignment
            .expect("at least one iteration has run");
        SolveReport {
            iterations_run: self.iteration,
            dual_value: self.best_dual,
            primal_value: self.best_primal,
            // weak duality makes this non-negative up to rounding
            gap_certificate: (self.best_primal - self.best_dual).max(0.0),
            assignment,
            best_found_at: self.best_found_at,
            final_prices: self.prices,
            trace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations_run: usize,
    /// g_best: the best dual value, a lower bound on the optimum.
    pub dual_value: f64,
    /// p_best: objective of the best association found.
    pub primal_value: f64,
    pub assignment: Assignment,
    /// p_best - g_best.
    pub gap_certificate: f64,
    pub best_found_at: usize,
    pub final_prices: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<TraceRow>>,
}

/// Centralized DAA: uniform start, `max_iters` projected subgradient steps
/// with α_k = a/k, best primal and dual values tracked throughout.
pub fn run_daa(inst: &Instance, cfg: &DaaConfig) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    let mut state = DualState::new(inst, cfg.step_scale);
    let mut trace = cfg.record_trace.then(|| Vec::with_capacity(cfg.max_iters));
    for _ in 0..cfg.max_iters {
        let prices = trace.as_ref().map(|_| state.prices().to_vec());
        let it = state.step(inst);
        if let (Some(rows), Some(prices)) = (trace.as_mut(), prices) {
            rows.push(TraceRow {
                k: it.k,
                g_lambda: it.g_lambda,
                t_k: it.t_k,
                g_best: state.best_dual(),
                p_best: state.best_primal(),
                prices,
            });
        }
    }
    Ok(state.into_report(trace))
}

/// Signalling cost of a distributed run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCounts {
    /// One price broadcast per AP per iteration.
    pub price_broadcasts: u64,
    /// One binary signal from each client to its chosen AP per iteration.
    pub client_signals: u64,
    /// AP-to-coordinator reports plus coordinator-to-AP price updates.
    pub coordination_messages: u64,
    pub coordination_rounds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributedReport {
    pub report: SolveReport,
    pub messages: MessageCounts,
}

struct ApAgent {
    /// (client, β) for every client in M_i, client ascending.
    local: Vec<(usize, f64)>,
    price: f64,
    signalled: Vec<usize>,
}

struct ClientAgent {
    /// (AP, β) for every AP in N_j, AP ascending.
    local: Vec<(usize, f64)>,
    inbox: Vec<f64>,
}

/// What an AP reports to the coordinator after a round.
struct ApReport {
    load: f64,
    dual_share: f64,
    signalled: Vec<usize>,
}

/// DAA staged as explicit protocol rounds between agents. AP 0 acts as the
/// coordinator that performs the simplex projection.
///
/// Produces exactly the same price trajectory and best association as
/// [`run_daa`]; only the dual value may differ in the last bits because it is
/// summed per AP instead of per client.
pub fn run_daa_distributed(inst: &Instance, cfg: &DaaConfig) -> Result<DistributedReport, SolverError> {
    cfg.validate()?;
    let n = inst.n_aps();
    let init = uniform_prices(n);
    let mut aps: Vec<ApAgent> = (0..n)
        .map(|i| ApAgent {
            local: inst
                .clients_of_ap(i)
                .iter()
                .map(|&j| (j, inst.beta(i, j).expect("consistent candidate sets")))
                .collect(),
            price: init[i],
            signalled: Vec::new(),
        })
        .collect();
    let mut clients: Vec<ClientAgent> = (0..inst.n_clients())
        .map(|j| ClientAgent {
            local: inst.candidates(j).iter().map(|l| (l.ap, l.beta)).collect(),
            inbox: vec![f64::NAN; inst.candidates(j).len()],
        })
        .collect();

    let mut messages = MessageCounts::default();
    // coordinator bookkeeping
    let mut state = DualState::with_prices(init, cfg.step_scale);
    let mut trace = cfg.record_trace.then(|| Vec::with_capacity(cfg.max_iters));

    for k in 1..=cfg.max_iters {
        // price broadcast
        for (i, ap) in aps.iter().enumerate() {
            for &(j, _) in &ap.local {
                let c = &mut clients[j];
                let slot = c.local.iter().position(|&(a, _)| a == i).expect("bipartite");
                c.inbox[slot] = ap.price;
            }
            messages.price_broadcasts += 1;
        }
        // local argmin and signal to the chosen AP only
        for (j, c) in clients.iter().enumerate() {
            let mut best = 0;
            let mut best_cost = c.local[0].1 * c.inbox[0];
            for (pos, &(_, beta)) in c.local.iter().enumerate().skip(1) {
                let cost = beta * c.inbox[pos];
                if cost < best_cost {
                    best = pos;
                    best_cost = cost;
                }
            }
            aps[c.local[best].0].signalled.push(j);
            messages.client_signals += 1;
        }
        // per-AP accumulation
        let reports: Vec<ApReport> = aps
            .iter_mut()
            .map(|ap| {
                let mut load = 0.0;
                let mut dual_share = 0.0;
                for &j in &ap.signalled {
                    let beta = ap.local[ap
                        .local
                        .binary_search_by_key(&j, |&(c, _)| c)
                        .expect("signal from a local client")]
                    .1;
                    load += beta;
                    dual_share += beta * ap.price;
                }
                ApReport {
                    load,
                    dual_share,
                    signalled: std::mem::take(&mut ap.signalled),
                }
            })
            .collect();
        messages.coordination_messages += (n - 1) as u64;

        // coordinator: primal/dual records, projection, price distribution
        let loads: Vec<f64> = reports.iter().map(|r| r.load).collect();
        let g: f64 = reports.iter().map(|r| r.dual_share).sum();
        let t_k = max_load(&loads);
        let mut ap_of_client = vec![0; inst.n_clients()];
        for (i, r) in reports.iter().enumerate() {
            for &j in &r.signalled {
                ap_of_client[j] = i;
            }
        }
        let prices_before = trace.as_ref().map(|_| state.prices.clone());
        state.record(k, g, t_k, &ap_of_client, &loads);
        let alpha = state.step_scale / k as f64;
        let moved: Vec<f64> = state
            .prices
            .iter()
            .zip(&loads)
            .map(|(&p, &y)| p - alpha * -y)
            .collect();
        state.prices = project_simplex(&moved);
        state.iteration = k;
        for (ap, &p) in aps.iter_mut().zip(&state.prices) {
            ap.price = p;
        }
        messages.coordination_messages += (n - 1) as u64;
        messages.coordination_rounds += 1;

        if let (Some(rows), Some(prices)) = (trace.as_mut(), prices_before) {
            rows.push(TraceRow {
                k,
                g_lambda: g,
                t_k,
                g_best: state.best_dual,
                p_best: state.best_primal,
                prices,
            });
        }
    }
    Ok(DistributedReport {
        report: state.into_report(trace),
        messages,
    })
}

/// G = sqrt(Σ_i (Σ_{j ∈ M_i} β_ij)²), a bound on every subgradient norm.
pub fn subgradient_norm_bound(inst: &Instance) -> f64 {
    let mut per_ap = vec![0.0; inst.n_aps()];
    for (i, _, b) in inst.pairs() {
        per_ap[i] += b;
    }
    per_ap.iter().map(|s| s * s).sum::<f64>().sqrt()
}

/// A-priori bound on d★ - g_best^(k) for α_l = a/l:
/// (R²/2 + a² G² π²/12) / Σ_{l ≤ k} a/l with R = √2.
pub fn convergence_bound(inst: &Instance, step_scale: f64, k: usize) -> f64 {
    assert!(k >= 1, "bound defined for k >= 1");
    let g = subgradient_norm_bound(inst);
    // Simplex diameter squared: R² = 2.
    let r_sq = 2.0;
    let basel = std::f64::consts::PI.powi(2) / 6.0;
    let numerator = r_sq / 2.0 + step_scale * step_scale * g * g * basel / 2.0;
    let step_sum: f64 = (1..=k).map(|l| step_scale / l as f64).sum();
    numerator / step_sum
}

/// Duality-gap certificate (N + 1)(ϱ + max_j ϱ_j).
pub fn duality_gap_bound(inst: &Instance) -> f64 {
    let rho = inst.max_beta();
    let rho_clients = (0..inst.n_clients())
        .map(|j| inst.min_beta_of_client(j))
        .fold(0.0, f64::max);
    (inst.n_aps() + 1) as f64 * (rho + rho_clients)
}
