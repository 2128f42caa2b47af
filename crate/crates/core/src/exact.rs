//! Ground-truth oracles: the integral optimum by exhaustive enumeration or
//! branch-and-bound, and the LP relaxation by a dense two-phase simplex.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Assignment, Instance};

/// Above this many assignments [`solve_milp_exact`] switches from plain
/// enumeration to branch-and-bound.
pub const ENUMERATION_LIMIT: f64 = 1e6;

/// Reduced-cost tolerance of the simplex method.
pub const LP_TOLERANCE: f64 = 1e-9;

const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("node budget of {budget} exhausted; best value so far {}", .incumbent.as_ref().map_or(f64::INFINITY, |a| a.objective()))]
    BudgetExhausted {
        budget: u64,
        incumbent: Option<Assignment>,
    },
    #[error("simplex failed: {0}")]
    Simplex(String),
}

/// Optimal LP-relaxation point plus the simplex multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalSolution {
    pub t: f64,
    /// For each client, `(ap, x_ij)` over its candidates.
    pub x: Vec<Vec<(usize, f64)>>,
    /// Multipliers of the per-AP load rows; they lie on the unit simplex.
    pub prices: Vec<f64>,
    /// Multipliers of the one-AP-per-client rows.
    pub client_duals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExactSolution {
    Integral(Assignment),
    Fractional(FractionalSolution),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub optimal_value: f64,
    pub solution: ExactSolution,
    pub nodes_explored: u64,
}

impl ExactResult {
    pub fn assignment(&self) -> Option<&Assignment> {
        match &self.solution {
            ExactSolution::Integral(a) => Some(a),
            ExactSolution::Fractional(_) => None,
        }
    }

    pub fn fractional(&self) -> Option<&FractionalSolution> {
        match &self.solution {
            ExactSolution::Fractional(f) => Some(f),
            ExactSolution::Integral(_) => None,
        }
    }
}

/// Exact min-max optimum: enumeration when Π|N_j| ≤ 10⁶, branch-and-bound
/// otherwise. `budget` caps the number of search nodes.
pub fn solve_milp_exact(inst: &Instance, budget: u64) -> Result<ExactResult, ExactError> {
    if inst.search_space_size() <= ENUMERATION_LIMIT {
        enumerate_exhaustive(inst, budget)
    } else {
        branch_and_bound(inst, budget)
    }
}

struct Search<'a> {
    inst: &'a Instance,
    order: Vec<usize>,
    /// Σ of ϱ_j over order[d..], for the node lower bound.
    tail_min: Vec<f64>,
    loads: Vec<f64>,
    choice: Vec<usize>,
    best_value: f64,
    best_choice: Option<Vec<usize>>,
    nodes: u64,
    budget: u64,
    prune: bool,
    exhausted: bool,
}

impl Search<'_> {
    fn dfs(&mut self, depth: usize, assigned_sum: f64, current_max: f64) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        if depth == self.order.len() {
            // re-sum from scratch so the value does not depend on search order
            let value = crate::instance::max_load(&self.inst.ap_loads(&self.choice));
            if value < self.best_value {
                self.best_value = value;
                self.best_choice = Some(self.choice.clone());
            }
            return;
        }
        if self.prune {
            let spread = (assigned_sum + self.tail_min[depth]) / self.inst.n_aps() as f64;
            if current_max.max(spread) >= self.best_value {
                return;
            }
        }
        let j = self.order[depth];
        let links = self.inst.candidates(j);
        let mut children: Vec<usize> = (0..links.len()).collect();
        if self.prune {
            // least-loaded-after-assignment first
            children.sort_by(|&a, &b| {
                let la = self.loads[links[a].ap] + links[a].beta;
                let lb = self.loads[links[b].ap] + links[b].beta;
                la.total_cmp(&lb).then(a.cmp(&b))
            });
        }
        for pos in children {
            let l = links[pos];
            let saved = self.loads[l.ap];
            self.loads[l.ap] = saved + l.beta;
            self.choice[j] = l.ap;
            let next_max = current_max.max(self.loads[l.ap]);
            self.dfs(depth + 1, assigned_sum + l.beta, next_max);
            self.loads[l.ap] = saved;
            if self.exhausted {
                return;
            }
        }
    }
}

fn run_search(inst: &Instance, budget: u64, prune: bool) -> Result<ExactResult, ExactError> {
    let m = inst.n_clients();
    let mut order: Vec<usize> = (0..m).collect();
    if prune {
        // branch on the clients that cost the most wherever they go first
        order.sort_by(|&a, &b| {
            inst.min_beta_of_client(b)
                .total_cmp(&inst.min_beta_of_client(a))
                .then(a.cmp(&b))
        });
    }
    let mut tail_min = vec![0.0; m + 1];
    for d in (0..m).rev() {
        tail_min[d] = tail_min[d + 1] + inst.min_beta_of_client(order[d]);
    }
    let mut search = Search {
        inst,
        order,
        tail_min,
        loads: vec![0.0; inst.n_aps()],
        choice: vec![0; m],
        best_value: f64::INFINITY,
        best_choice: None,
        nodes: 0,
        budget,
        prune,
        exhausted: false,
    };
    if prune {
        let greedy = greedy_assignment(inst, &search.order);
        search.best_value = greedy.objective();
        search.best_choice = Some(greedy.ap_of_client().to_vec());
    }
    search.dfs(0, 0.0, 0.0);
    let incumbent = search
        .best_choice
        .map(|c| Assignment::from_valid(inst, c));
    if search.exhausted {
        return Err(ExactError::BudgetExhausted { budget, incumbent });
    }
    let assignment = incumbent.expect("search visited at least one leaf");
    Ok(ExactResult {
        optimal_value: assignment.objective(),
        solution: ExactSolution::Integral(assignment),
        nodes_explored: search.nodes,
    })
}

/// Visits every one of the Π|N_j| assignments.
pub fn enumerate_exhaustive(inst: &Instance, budget: u64) -> Result<ExactResult, ExactError> {
    run_search(inst, budget, false)
}

/// Depth-first branch-and-bound. Clients are branched in descending ϱ_j
/// order; a node is cut when max(current max load, (assigned load +
/// Σ remaining ϱ_j)/N) reaches the incumbent. The second term is the dual
/// function at uniform prices restricted to the node.
pub fn branch_and_bound(inst: &Instance, budget: u64) -> Result<ExactResult, ExactError> {
    run_search(inst, budget, true)
}

fn greedy_assignment(inst: &Instance, order: &[usize]) -> Assignment {
    let mut loads = vec![0.0; inst.n_aps()];
    let mut choice = vec![0; inst.n_clients()];
    for &j in order {
        let l = inst
            .candidates(j)
            .iter()
            .min_by(|a, b| (loads[a.ap] + a.beta).total_cmp(&(loads[b.ap] + b.beta)))
            .expect("nonempty candidates");
        loads[l.ap] += l.beta;
        choice[j] = l.ap;
    }
    Assignment::from_valid(inst, choice)
}

/// Dense tableau for min cᵀx s.t. Ax = b, x ≥ 0, b ≥ 0, with the initial
/// basis supplied by the caller as identity columns.
struct Tableau {
    rows: usize,
    cols: usize,
    /// rows × (cols + 1); last column is the right-hand side.
    a: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.a[pr * w + pc];
        for c in 0..w {
            self.a[pr * w + c] /= p;
        }
        self.a[pr * w + pc] = 1.0;
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.a[r * w + pc];
            if f == 0.0 {
                continue;
            }
            for c in 0..w {
                self.a[r * w + c] -= f * self.a[pr * w + c];
            }
            self.a[r * w + pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Simplex multipliers y = c_Bᵀ B⁻¹, read off the columns that formed
    /// the initial identity basis.
    fn multipliers(&self, cost: &[f64], identity_cols: &[usize]) -> Vec<f64> {
        identity_cols
            .iter()
            .map(|&col| {
                (0..self.rows)
                    .map(|r| cost[self.basis[r]] * self.at(r, col))
                    .sum()
            })
            .collect()
    }

    /// Bland's rule: lowest-index improving column enters; the ratio test
    /// breaks ties on the lowest basic variable index.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<(), ExactError> {
        let max_pivots = 50_000 + 100 * self.rows * self.cols;
        for _ in 0..max_pivots {
            let y: Vec<f64> = (0..self.rows).map(|r| cost[self.basis[r]]).collect();
            let mut entering = None;
            for c in 0..self.cols {
                if !allowed[c] || self.basis.contains(&c) {
                    continue;
                }
                let reduced = cost[c] - (0..self.rows).map(|r| y[r] * self.at(r, c)).sum::<f64>();
                if reduced < -LP_TOLERANCE {
                    entering = Some(c);
                    break;
                }
            }
            let Some(pc) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let coef = self.at(r, pc);
                if coef > PIVOT_TOLERANCE {
                    let ratio = self.rhs(r) / coef;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = leave else {
                return Err(ExactError::Simplex("unbounded direction".into()));
            };
            self.pivot(pr, pc);
        }
        Err(ExactError::Simplex("pivot limit reached".into()))
    }
}

/// Column layout of the relaxation in standard form:
/// `[t, x_pairs..., s_0..s_{N-1}, art_0..art_{M-1}]`.
struct LpLayout {
    n_pairs: usize,
    n_aps: usize,
    n_clients: usize,
}

impl LpLayout {
    fn t(&self) -> usize {
        0
    }
    fn x(&self, k: usize) -> usize {
        1 + k
    }
    fn slack(&self, i: usize) -> usize {
        1 + self.n_pairs + i
    }
    fn artificial(&self, j: usize) -> usize {
        1 + self.n_pairs + self.n_aps + j
    }
    fn cols(&self) -> usize {
        1 + self.n_pairs + self.n_aps + self.n_clients
    }
}

/// LP relaxation: minimize t subject to Σ_j β_ij x_ij ≤ t per AP,
/// Σ_i x_ij = 1 per client, x ≥ 0. The upper bounds x ≤ 1 are implied by
/// the equality rows and are not added.
///
/// Rows: N load rows `Σβx - t + s_i = 0` (slack basic) then M assignment
/// rows `Σx = 1` (artificial basic). Phase 1 drives the artificials out,
/// phase 2 minimizes t with artificials barred from re-entering.
pub fn solve_lp_relaxation(inst: &Instance) -> Result<ExactResult, ExactError> {
    let n = inst.n_aps();
    let m = inst.n_clients();
    let pairs: Vec<(usize, usize, f64)> = inst.pairs().collect();
    let layout = LpLayout {
        n_pairs: pairs.len(),
        n_aps: n,
        n_clients: m,
    };
    let cols = layout.cols();
    let rows = n + m;
    let w = cols + 1;
    let mut a = vec![0.0; rows * w];
    for i in 0..n {
        a[i * w + layout.t()] = -1.0;
        a[i * w + layout.slack(i)] = 1.0;
    }
    for (k, &(i, j, beta)) in pairs.iter().enumerate() {
        a[i * w + layout.x(k)] = beta;
        a[(n + j) * w + layout.x(k)] = 1.0;
    }
    for j in 0..m {
        a[(n + j) * w + layout.artificial(j)] = 1.0;
        a[(n + j) * w + cols] = 1.0;
    }
    let basis: Vec<usize> = (0..n)
        .map(|i| layout.slack(i))
        .chain((0..m).map(|j| layout.artificial(j)))
        .collect();
    let identity_cols = basis.clone();
    let mut tab = Tableau {
        rows,
        cols,
        a,
        basis,
    };

    // phase 1
    let mut phase1_cost = vec![0.0; cols];
    for j in 0..m {
        phase1_cost[layout.artificial(j)] = 1.0;
    }
    let all = vec![true; cols];
    tab.optimize(&phase1_cost, &all)?;
    let infeasibility: f64 = (0..rows)
        .filter(|&r| tab.basis[r] >= layout.artificial(0))
        .map(|r| tab.rhs(r))
        .sum();
    if infeasibility > 1e-9 {
        return Err(ExactError::Simplex(format!(
            "phase 1 left infeasibility {infeasibility}"
        )));
    }
    // pivot zero-level artificials out of the basis where possible
    for r in 0..rows {
        if tab.basis[r] >= layout.artificial(0) {
            if let Some(c) = (0..layout.artificial(0)).find(|&c| tab.at(r, c).abs() > 1e-9 && !tab.basis.contains(&c)) {
                tab.pivot(r, c);
            }
        }
    }

    // phase 2
    let mut cost = vec![0.0; cols];
    cost[layout.t()] = 1.0;
    let mut allowed = vec![true; cols];
    for j in 0..m {
        allowed[layout.artificial(j)] = false;
    }
    tab.optimize(&cost, &allowed)?;

    let mut values = vec![0.0; cols];
    for r in 0..rows {
        values[tab.basis[r]] = tab.rhs(r);
    }
    let y = tab.multipliers(&cost, &identity_cols);
    // load-row multipliers are non-positive; their negatives are the prices
    let prices: Vec<f64> = y[..n].iter().map(|v| -v).collect();
    let client_duals = y[n..].to_vec();
    let mut x = vec![Vec::new(); m];
    for (k, &(i, j, _)) in pairs.iter().enumerate() {
        x[j].push((i, values[layout.x(k)].max(0.0)));
    }
    let t = values[layout.t()];
    Ok(ExactResult {
        optimal_value: t,
        solution: ExactSolution::Fractional(FractionalSolution {
            t,
            x,
            prices,
            client_duals,
        }),
        nodes_explored: 0,
    })
}

/// Optimality residuals of a relaxation solution, recomputed from the
/// problem data rather than the tableau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpResiduals {
    /// Largest violation of Σx = 1, x ≥ 0, load ≤ t.
    pub primal: f64,
    /// Largest violation of λ ≥ 0, Σλ = 1, β_ij λ_i ≥ μ_j.
    pub dual: f64,
    /// Largest |x_ij (β_ij λ_i - μ_j)| or |λ_i (t - load_i)|.
    pub complementary_slackness: f64,
    /// |t - Σ_j μ_j|.
    pub objective_gap: f64,
}

pub fn lp_residuals(inst: &Instance, sol: &FractionalSolution) -> LpResiduals {
    let n = inst.n_aps();
    let mut loads = vec![0.0; n];
    let mut primal: f64 = 0.0;
    let mut dual: f64 = 0.0;
    let mut cs: f64 = 0.0;
    for (j, xs) in sol.x.iter().enumerate() {
        let total: f64 = xs.iter().map(|&(_, v)| v).sum();
        primal = primal.max((total - 1.0).abs());
        for &(i, v) in xs {
            primal = primal.max(-v);
            let beta = inst.beta(i, j).expect("solution on candidate pairs");
            loads[i] += beta * v;
            let reduced = beta * sol.prices[i] - sol.client_duals[j];
            dual = dual.max(-reduced);
            cs = cs.max((v * reduced).abs());
        }
    }
    for (&load, &price) in loads.iter().zip(&sol.prices) {
        primal = primal.max(load - sol.t);
        dual = dual.max(-price);
        cs = cs.max((price * (sol.t - load)).abs());
    }
    let price_sum: f64 = sol.prices.iter().sum();
    dual = dual.max((price_sum - 1.0).abs());
    let dual_objective: f64 = sol.client_duals.iter().sum();
    LpResiduals {
        primal,
        dual,
        complementary_slackness: cs,
        objective_gap: (sol.t - dual_objective).abs(),
    }
}
