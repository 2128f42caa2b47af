//! Problem data for min-max AP utilization: candidate sets, the sparse
//! utilization matrix β, pruning of infeasible links, assignments, and
//! the hand-built strong-duality fixtures.
//!
//! Indices are zero-based throughout. Candidate lists are kept sorted by AP
//! index and client lists by client index so that every downstream iteration
//! order, and therefore every tie-break, is deterministic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Values attached to (AP, client) pairs, keyed `(ap, client)`.
pub type PairValues = BTreeMap<(usize, usize), f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("client {client} lies within range of no AP")]
    IsolatedClient { client: usize },
    #[error("client {client} has no AP left after pruning links with utilization above 1")]
    InfeasibleClient { client: usize },
    #[error("{what} index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("no link rate given for AP {ap} and candidate client {client}")]
    MissingRate { ap: usize, client: usize },
    #[error("link rate given for AP {ap} and client {client}, which are not a candidate pair")]
    UnexpectedRate { ap: usize, client: usize },
    #[error("pair (AP {ap}, client {client}) appears more than once")]
    DuplicatePair { ap: usize, client: usize },
    #[error("`{field}` = {value}: {requirement}")]
    InvalidValue {
        field: String,
        value: f64,
        requirement: &'static str,
    },
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("AP {ap} is not a candidate of client {client}")]
    NotCandidate { client: usize, ap: usize },
    #[error("instance needs at least one AP")]
    NoAps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// AP and client placement plus the disk-based candidate sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    ap_positions: Vec<Point>,
    client_positions: Vec<Point>,
    radius: f64,
    candidates_of_client: Vec<Vec<usize>>,
    clients_of_ap: Vec<Vec<usize>>,
}

impl Topology {
    /// Client j is a candidate of AP i iff their distance is at most `radius`.
    pub fn from_positions(
        ap_positions: Vec<Point>,
        client_positions: Vec<Point>,
        radius: f64,
    ) -> Result<Self, InstanceError> {
        if ap_positions.is_empty() {
            return Err(InstanceError::NoAps);
        }
        if !(radius > 0.0) {
            return Err(InstanceError::InvalidValue {
                field: "radius".into(),
                value: radius,
                requirement: "must be strictly positive",
            });
        }
        let mut candidates_of_client = Vec::with_capacity(client_positions.len());
        let mut clients_of_ap = vec![Vec::new(); ap_positions.len()];
        for (j, c) in client_positions.iter().enumerate() {
            let cands: Vec<usize> = ap_positions
                .iter()
                .enumerate()
                .filter(|(_, a)| a.distance(c) <= radius)
                .map(|(i, _)| i)
                .collect();
            if cands.is_empty() {
                return Err(InstanceError::IsolatedClient { client: j });
            }
            for &i in &cands {
                clients_of_ap[i].push(j);
            }
            candidates_of_client.push(cands);
        }
        Ok(Self {
            ap_positions,
            client_positions,
            radius,
            candidates_of_client,
            clients_of_ap,
        })
    }

    pub fn n_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn n_clients(&self) -> usize {
        self.client_positions.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn ap_positions(&self) -> &[Point] {
        &self.ap_positions
    }

    pub fn client_positions(&self) -> &[Point] {
        &self.client_positions
    }

    pub fn candidates_of_client(&self, j: usize) -> &[usize] {
        &self.candidates_of_client[j]
    }

    pub fn clients_of_ap(&self, i: usize) -> &[usize] {
        &self.clients_of_ap[i]
    }

    pub fn distance(&self, ap: usize, client: usize) -> f64 {
        self.ap_positions[ap].distance(&self.client_positions[client])
    }

    /// All candidate pairs `(ap, client)`, client-major, APs ascending.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.candidates_of_client
            .iter()
            .enumerate()
            .flat_map(|(j, c)| c.iter().map(move |&i| (i, j)))
    }
}

/// A retained candidate link of one client.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub ap: usize,
    pub beta: f64,
    pub rate: f64,
}

/// Validated, pruned problem data. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    n_aps: usize,
    demands: Vec<f64>,
    links: Vec<Vec<Link>>,
    clients_of_ap: Vec<Vec<usize>>,
}

impl Instance {
    /// Core builder: β = Q / R on every given pair, pairs with β > 1 dropped.
    ///
    /// β = 1 is kept. Fails if some client ends up without a candidate.
    pub fn from_rates(
        n_aps: usize,
        demands: Vec<f64>,
        rates: &PairValues,
    ) -> Result<Self, InstanceError> {
        if n_aps == 0 {
            return Err(InstanceError::NoAps);
        }
        let m = demands.len();
        for (j, &q) in demands.iter().enumerate() {
            if !(q > 0.0 && q.is_finite()) {
                return Err(InstanceError::InvalidValue {
                    field: format!("demands[{j}]"),
                    value: q,
                    requirement: "demand must be finite and strictly positive",
                });
            }
        }
        let mut links = vec![Vec::new(); m];
        let mut seen_any = vec![false; m];
        for (&(i, j), &r) in rates {
            if i >= n_aps {
                return Err(InstanceError::IndexOutOfRange {
                    what: "AP",
                    index: i,
                    bound: n_aps,
                });
            }
            if j >= m {
                return Err(InstanceError::IndexOutOfRange {
                    what: "client",
                    index: j,
                    bound: m,
                });
            }
            if !(r > 0.0 && r.is_finite()) {
                return Err(InstanceError::InvalidValue {
                    field: format!("rate[{i},{j}]"),
                    value: r,
                    requirement: "link rate must be finite and strictly positive",
                });
            }
            seen_any[j] = true;
            let beta = demands[j] / r;
            if beta <= 1.0 {
                links[j].push(Link { ap: i, beta, rate: r });
            }
        }
        for j in 0..m {
            if links[j].is_empty() {
                return Err(if seen_any[j] {
                    InstanceError::InfeasibleClient { client: j }
                } else {
                    InstanceError::IsolatedClient { client: j }
                });
            }
        }
        Ok(Self::assemble(n_aps, demands, links))
    }

    /// Builds from utilizations directly. Demands default to 1 so that the
    /// implied rate of every link is 1/β. Every β must lie in (0, 1].
    pub fn from_utilizations(
        n_aps: usize,
        rows: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self, InstanceError> {
        let demands = vec![1.0; rows.len()];
        Self::from_utilizations_with_demands(n_aps, demands, rows)
    }

    fn from_utilizations_with_demands(
        n_aps: usize,
        demands: Vec<f64>,
        rows: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self, InstanceError> {
        if n_aps == 0 {
            return Err(InstanceError::NoAps);
        }
        if demands.len() != rows.len() {
            return Err(InstanceError::LengthMismatch {
                what: "demands",
                expected: rows.len(),
                got: demands.len(),
            });
        }
        let mut links = Vec::with_capacity(rows.len());
        for (j, row) in rows.into_iter().enumerate() {
            if row.is_empty() {
                return Err(InstanceError::IsolatedClient { client: j });
            }
            let q = demands[j];
            if !(q > 0.0 && q.is_finite()) {
                return Err(InstanceError::InvalidValue {
                    field: format!("demands[{j}]"),
                    value: q,
                    requirement: "demand must be finite and strictly positive",
                });
            }
            let mut ls = Vec::with_capacity(row.len());
            for (i, beta) in row {
                if i >= n_aps {
                    return Err(InstanceError::IndexOutOfRange {
                        what: "AP",
                        index: i,
                        bound: n_aps,
                    });
                }
                if !(beta > 0.0 && beta <= 1.0) {
                    return Err(InstanceError::InvalidValue {
                        field: format!("beta[{i},{j}]"),
                        value: beta,
                        requirement: "utilization must lie in (0, 1]",
                    });
                }
                ls.push(Link {
                    ap: i,
                    beta,
                    rate: q / beta,
                });
            }
            ls.sort_by_key(|l| l.ap);
            if let Some(w) = ls.windows(2).find(|w| w[0].ap == w[1].ap) {
                return Err(InstanceError::DuplicatePair {
                    ap: w[0].ap,
                    client: j,
                });
            }
            links.push(ls);
        }
        Ok(Self::assemble(n_aps, demands, links))
    }

    fn assemble(n_aps: usize, demands: Vec<f64>, mut links: Vec<Vec<Link>>) -> Self {
        let mut clients_of_ap = vec![Vec::new(); n_aps];
        for (j, ls) in links.iter_mut().enumerate() {
            ls.sort_by_key(|l| l.ap);
            for l in ls.iter() {
                clients_of_ap[l.ap].push(j);
            }
        }
        Self {
            n_aps,
            demands,
            links,
            clients_of_ap,
        }
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn n_clients(&self) -> usize {
        self.links.len()
    }

    pub fn demands(&self) -> &[f64] {
        &self.demands
    }

    /// Retained candidate links of client `j`, sorted by AP.
    pub fn candidates(&self, j: usize) -> &[Link] {
        &self.links[j]
    }

    pub fn clients_of_ap(&self, i: usize) -> &[usize] {
        &self.clients_of_ap[i]
    }

    pub fn beta(&self, ap: usize, client: usize) -> Option<f64> {
        self.link(ap, client).map(|l| l.beta)
    }

    pub fn rate(&self, ap: usize, client: usize) -> Option<f64> {
        self.link(ap, client).map(|l| l.rate)
    }

    fn link(&self, ap: usize, client: usize) -> Option<&Link> {
        let ls = self.links.get(client)?;
        ls.binary_search_by_key(&ap, |l| l.ap).ok().map(|k| &ls[k])
    }

    pub fn n_pairs(&self) -> usize {
        self.links.iter().map(Vec::len).sum()
    }

    /// Every stored `(ap, client, beta)`, client-major.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.links
            .iter()
            .enumerate()
            .flat_map(|(j, ls)| ls.iter().map(move |l| (l.ap, j, l.beta)))
    }

    pub fn rate_pairs(&self) -> PairValues {
        self.links
            .iter()
            .enumerate()
            .flat_map(|(j, ls)| ls.iter().map(move |l| ((l.ap, j), l.rate)))
            .collect()
    }

    /// Number of integral assignments, Π_j |N_j|, as a float (it overflows
    /// integers quickly).
    pub fn search_space_size(&self) -> f64 {
        self.links.iter().map(|l| l.len() as f64).product()
    }

    /// ϱ: the largest stored utilization.
    pub fn max_beta(&self) -> f64 {
        self.pairs().map(|(_, _, b)| b).fold(0.0, f64::max)
    }

    /// ϱ_j: the smallest utilization among client `j`'s candidates.
    pub fn min_beta_of_client(&self, j: usize) -> f64 {
        self.links[j]
            .iter()
            .map(|l| l.beta)
            .fold(f64::INFINITY, f64::min)
    }

    /// Per-AP utilization Σ_j β_ij x_ij, accumulated in client order.
    ///
    /// Panics if some entry is not a candidate of its client; use
    /// [`Assignment::new`] to validate first.
    pub fn ap_loads(&self, ap_of_client: &[usize]) -> Vec<f64> {
        let mut loads = vec![0.0; self.n_aps];
        for (j, &i) in ap_of_client.iter().enumerate() {
            loads[i] += self.beta(i, j).expect("assignment outside candidate set");
        }
        loads
    }

    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc {
            n_aps: self.n_aps,
            n_clients: self.n_clients(),
            demands: Some(self.demands.clone()),
            beta: self
                .links
                .iter()
                .enumerate()
                .flat_map(|(j, ls)| {
                    ls.iter().map(move |l| BetaRecord {
                        i: l.ap,
                        j,
                        beta: l.beta,
                        rate: Some(l.rate),
                    })
                })
                .collect(),
        }
    }

    /// Validates a JSON document. β is authoritative; `demands` default to
    /// 1 and a missing `rate` defaults to Q_j/β. A present rate must agree
    /// with Q_j/β to relative 1e-9.
    pub fn from_doc(doc: &InstanceDoc) -> Result<Self, InstanceError> {
        if doc.n_aps == 0 {
            return Err(InstanceError::NoAps);
        }
        let demands = match &doc.demands {
            Some(d) => {
                if d.len() != doc.n_clients {
                    return Err(InstanceError::LengthMismatch {
                        what: "demands",
                        expected: doc.n_clients,
                        got: d.len(),
                    });
                }
                d.clone()
            }
            None => vec![1.0; doc.n_clients],
        };
        let mut rows = vec![Vec::new(); doc.n_clients];
        for (k, rec) in doc.beta.iter().enumerate() {
            if rec.j >= doc.n_clients {
                return Err(InstanceError::InvalidValue {
                    field: format!("beta[{k}].j"),
                    value: rec.j as f64,
                    requirement: "client index must be below n_clients",
                });
            }
            if rec.i >= doc.n_aps {
                return Err(InstanceError::InvalidValue {
                    field: format!("beta[{k}].i"),
                    value: rec.i as f64,
                    requirement: "AP index must be below n_aps",
                });
            }
            if !(rec.beta > 0.0 && rec.beta <= 1.0) {
                return Err(InstanceError::InvalidValue {
                    field: format!("beta[{k}].beta"),
                    value: rec.beta,
                    requirement: "utilization must lie in (0, 1]",
                });
            }
            if let Some(rate) = rec.rate {
                let q = demands[rec.j];
                if !(rate > 0.0) || ((q / rate) / rec.beta - 1.0).abs() > 1e-9 {
                    return Err(InstanceError::InvalidValue {
                        field: format!("beta[{k}].rate"),
                        value: rate,
                        requirement: "rate must equal demand / beta",
                    });
                }
            }
            rows[rec.j].push((rec.i, rec.beta));
        }
        let mut inst = Self::from_utilizations_with_demands(doc.n_aps, demands, rows)?;
        // keep file-provided rates verbatim
        for rec in &doc.beta {
            if let Some(rate) = rec.rate {
                let ls = &mut inst.links[rec.j];
                if let Ok(k) = ls.binary_search_by_key(&rec.i, |l| l.ap) {
                    ls[k].rate = rate;
                }
            }
        }
        Ok(inst)
    }
}

/// JSON form of an [`Instance`]; β as a list of `{i, j, beta}` records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub n_aps: usize,
    pub n_clients: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demands: Option<Vec<f64>>,
    pub beta: Vec<BetaRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRecord {
    pub i: usize,
    pub j: usize,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

/// Computes β from link rates over a topology's candidate pairs and prunes.
///
/// `link_rates` must be keyed by exactly the topology's `(ap, client)` pairs.
pub fn build_instance(
    topo: &Topology,
    demands: Vec<f64>,
    link_rates: &PairValues,
) -> Result<Instance, InstanceError> {
    if demands.len() != topo.n_clients() {
        return Err(InstanceError::LengthMismatch {
            what: "demands",
            expected: topo.n_clients(),
            got: demands.len(),
        });
    }
    for (i, j) in topo.pairs() {
        if !link_rates.contains_key(&(i, j)) {
            return Err(InstanceError::MissingRate { ap: i, client: j });
        }
    }
    for &(i, j) in link_rates.keys() {
        if j >= topo.n_clients() || topo.candidates_of_client(j).binary_search(&i).is_err() {
            return Err(InstanceError::UnexpectedRate { ap: i, client: j });
        }
    }
    Instance::from_rates(topo.n_aps(), demands, link_rates)
}

/// One AP per client together with its max-utilization objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    ap_of_client: Vec<usize>,
    objective: f64,
}

impl Assignment {
    pub fn new(inst: &Instance, ap_of_client: Vec<usize>) -> Result<Self, InstanceError> {
        if ap_of_client.len() != inst.n_clients() {
            return Err(InstanceError::LengthMismatch {
                what: "assignment",
                expected: inst.n_clients(),
                got: ap_of_client.len(),
            });
        }
        for (j, &i) in ap_of_client.iter().enumerate() {
            if inst.beta(i, j).is_none() {
                return Err(InstanceError::NotCandidate { client: j, ap: i });
            }
        }
        Ok(Self::from_valid(inst, ap_of_client))
    }

    pub(crate) fn from_valid(inst: &Instance, ap_of_client: Vec<usize>) -> Self {
        let objective = max_load(&inst.ap_loads(&ap_of_client));
        Self {
            ap_of_client,
            objective,
        }
    }

    pub(crate) fn from_parts(ap_of_client: Vec<usize>, objective: f64) -> Self {
        Self {
            ap_of_client,
            objective,
        }
    }

    pub fn ap_of_client(&self) -> &[usize] {
        &self.ap_of_client
    }

    /// max_i Σ_j β_ij x_ij.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn loads(&self, inst: &Instance) -> Vec<f64> {
        inst.ap_loads(&self.ap_of_client)
    }
}

pub(crate) fn max_load(loads: &[f64]) -> f64 {
    loads.iter().copied().fold(0.0, f64::max)
}

/// Chain network: client 0 reaches only AP 0, client j ≥ 1 reaches APs
/// j-1 and j. β_jj = `beta_diag` and β_(j-1)j = `off_diag[j-1]`.
///
/// The identity association is optimal with value `beta_diag`, and the LP
/// relaxation has the same value.
pub fn example1_instance(m: usize, beta_diag: f64, off_diag: &[f64]) -> Result<Instance, InstanceError> {
    if m == 0 {
        return Err(InstanceError::NoAps);
    }
    if off_diag.len() != m - 1 {
        return Err(InstanceError::LengthMismatch {
            what: "off_diag",
            expected: m - 1,
            got: off_diag.len(),
        });
    }
    let rows = (0..m)
        .map(|j| {
            if j == 0 {
                vec![(0, beta_diag)]
            } else {
                vec![(j - 1, off_diag[j - 1]), (j, beta_diag)]
            }
        })
        .collect();
    Instance::from_utilizations(m, rows)
}

/// Two client types over `n` APs. Type-1 clients are pinned to one AP with
/// utilizations summing to `type1_loads[i]` at AP i (split into pieces of at
/// most 1; none for a zero load). Then `m_per_ap * n` type-2 clients, each
/// reachable from every AP with utilization `beta2`.
///
/// With a common load B the optimum is B + m·β₂.
pub fn example2_instance(
    n: usize,
    type1_loads: &[f64],
    m_per_ap: usize,
    beta2: f64,
) -> Result<Instance, InstanceError> {
    if n == 0 {
        return Err(InstanceError::NoAps);
    }
    if type1_loads.len() != n {
        return Err(InstanceError::LengthMismatch {
            what: "type1_loads",
            expected: n,
            got: type1_loads.len(),
        });
    }
    let mut rows = Vec::new();
    for (i, &b) in type1_loads.iter().enumerate() {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(InstanceError::InvalidValue {
                field: format!("type1_loads[{i}]"),
                value: b,
                requirement: "load must be finite and non-negative",
            });
        }
        if b == 0.0 {
            continue;
        }
        let pieces = b.ceil() as usize;
        for _ in 0..pieces {
            rows.push(vec![(i, b / pieces as f64)]);
        }
    }
    for _ in 0..m_per_ap * n {
        rows.push((0..n).map(|i| (i, beta2)).collect());
    }
    Instance::from_utilizations(n, rows)
}
