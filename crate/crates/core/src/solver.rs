//! Solver for the traveler's flow problem.
//!
//! Maximizes `l'(u o x) - l'F(x)` subject to `Ax = b`, `x >= 0`. The
//! gradient of the equivalent minimization is `l_e (F'(x_e) - u_e)`, which
//! is strictly positive whenever utilities are negative, so the linearized
//! subproblem over the flow polytope is a shortest-path query. The reference
//! method is away-step conditional gradient over path vertices, followed by
//! a Newton refinement restricted to the active links. The refinement drives
//! the KKT residual to machine precision and produces exact zeros elsewhere.

use std::collections::{BinaryHeap, HashMap};

use crate::error::{CoreError, Result};
use crate::network::{DemandSpec, Network, UtilityRates};
use crate::perturbation::Perturbation;

/// Conditional-gradient duality gap at which the Newton refinement takes
/// over in the default method.
const FW_HANDOFF_GAP: f64 = 1e-6;
const FW_HANDOFF_ITERS: usize = 600;
/// Flow below which a residual is ignored during path peeling.
const PEEL_EPS: f64 = 1e-12;

/// Solution method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// Away-step conditional gradient warm start, then active-set Newton
    /// refinement with shortest-path pricing.
    #[default]
    AwayStepNewton,
    /// Pure away-step conditional gradient, terminating on the duality gap.
    /// Slower to high accuracy; kept as an independent cross-check.
    AwayStep,
}

/// Solver tolerances and iteration limits.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Target for the combined KKT residual.
    pub kkt_tol: f64,
    /// Allowed violation of `Ax = b` in max norm.
    pub feas_tol: f64,
    /// Flows at or below this threshold are truncated to exact zero and the
    /// link is reported inactive.
    pub zero_tol: f64,
    /// Iteration cap (conditional-gradient steps, or Newton rounds).
    pub max_iters: usize,
    pub method: SolveMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kkt_tol: 1e-9,
            feas_tol: 1e-9,
            zero_tol: 1e-8,
            max_iters: 20_000,
            method: SolveMethod::AwayStepNewton,
        }
    }
}

/// Optimal flows and duals for one OD pair.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub demand: DemandSpec,
    /// Per-link optimal flow of the unit-demand traveler.
    pub flows: Vec<f64>,
    /// Per-node multipliers of the conservation constraints.
    pub multipliers: Vec<f64>,
    /// Utility value at the optimum.
    pub objective: f64,
    /// Combined stationarity/complementarity/feasibility residual.
    pub kkt_residual: f64,
    /// `flows[e] > zero_tol`.
    pub active: Vec<bool>,
    /// Conditional-gradient iterations plus Newton rounds spent.
    pub iterations: usize,
}

impl FlowSolution {
    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// A loop-free path (as ordered link indices) carrying part of the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct PathWeight {
    pub links: Vec<usize>,
    pub weight: f64,
}

/// Result of re-solving after a utility change.
#[derive(Debug, Clone)]
pub struct SubstitutionResult {
    pub base: FlowSolution,
    pub perturbed: FlowSolution,
    /// `perturbed/base` flow ratio per link; `None` where the base flow is
    /// inactive (the perturbed flows themselves cover those links).
    pub ratios: Vec<Option<f64>>,
}

/// Solves the traveler's problem for one OD pair.
pub fn solve_flow(
    net: &Network,
    u: &UtilityRates,
    demand: &DemandSpec,
    pert: Perturbation,
    opts: &SolverOptions,
) -> Result<FlowSolution> {
    check_options(opts)?;
    if u.len() != net.n_links() {
        return Err(CoreError::DimensionMismatch {
            what: "utility rates",
            expected: net.n_links(),
            got: u.len(),
        });
    }
    let b = net.demand_vector(demand);
    solve_for_demand(net, u, demand, &b, pert, opts)
}

fn check_options(opts: &SolverOptions) -> Result<()> {
    if !(opts.kkt_tol > 0.0 && opts.feas_tol > 0.0 && opts.zero_tol > 0.0) {
        return Err(CoreError::InvalidArgument(
            "solver tolerances must be positive".into(),
        ));
    }
    Ok(())
}

fn solve_for_demand(
    net: &Network,
    u: &UtilityRates,
    demand: &DemandSpec,
    b: &[f64],
    pert: Perturbation,
    opts: &SolverOptions,
) -> Result<FlowSolution> {
    let lengths = net.lengths();

    // Zero demand: u < 0 and F'(0) = 0 make x = 0 optimal outright.
    if b.iter().all(|&v| v == 0.0) {
        let flows = vec![0.0; net.n_links()];
        let multipliers = vec![0.0; net.n_nodes()];
        let kkt = kkt_residual_raw(net, u, pert, &flows, &multipliers, b, opts.zero_tol);
        return Ok(FlowSolution {
            demand: *demand,
            flows,
            multipliers,
            objective: 0.0,
            kkt_residual: kkt,
            active: vec![false; net.n_links()],
            iterations: 0,
        });
    }

    // Reachability under the zero-flow costs (all strictly positive).
    let base_cost: Vec<f64> = (0..net.n_links())
        .map(|e| lengths[e] * (pert.prime_raw(0.0) - u.get(e)))
        .collect();
    let sp = Dijkstra::run(net, &base_cost, demand.origin);
    if !sp.dist[demand.destination].is_finite() {
        return Err(CoreError::Unreachable {
            origin: net.node_id(demand.origin).to_owned(),
            destination: net.node_id(demand.destination).to_owned(),
        });
    }

    let mut state = CgState::new(sp.path_to(net, demand.destination).expect("reachable"));
    let (gap_target, iter_cap) = match opts.method {
        SolveMethod::AwayStep => (opts.kkt_tol, opts.max_iters),
        SolveMethod::AwayStepNewton => (FW_HANDOFF_GAP, FW_HANDOFF_ITERS.min(opts.max_iters)),
    };

    let mut iterations = 0usize;
    let mut gap = f64::INFINITY;
    while iterations < iter_cap {
        iterations += 1;
        gap = state.step(net, u, &lengths, pert, demand)?;
        if gap <= gap_target {
            break;
        }
    }
    if opts.method == SolveMethod::AwayStep && gap > gap_target {
        return Err(CoreError::NonConvergence {
            iterations,
            residual: gap,
        });
    }

    let mut flows = state.flows(net.n_links());
    if opts.method == SolveMethod::AwayStepNewton {
        iterations += newton_refine(net, u, &lengths, pert, demand, b, &mut flows, opts)?;
    }

    finish_solution(net, u, &lengths, pert, demand, b, flows, iterations, opts)
}

#[allow(clippy::too_many_arguments)]
fn finish_solution(
    net: &Network,
    u: &UtilityRates,
    lengths: &[f64],
    pert: Perturbation,
    demand: &DemandSpec,
    b: &[f64],
    flows: Vec<f64>,
    iterations: usize,
    opts: &SolverOptions,
) -> Result<FlowSolution> {
    let multipliers = recover_multipliers(net, u, lengths, pert, &flows, demand.origin);
    let kkt = kkt_residual_raw(net, u, pert, &flows, &multipliers, b, opts.zero_tol);
    let feas = feasibility_violation(net, &flows, b);
    if kkt > opts.kkt_tol || feas > opts.feas_tol {
        return Err(CoreError::NonConvergence {
            iterations,
            residual: kkt.max(feas),
        });
    }
    let active: Vec<bool> = flows.iter().map(|&x| x > opts.zero_tol).collect();
    let objective = objective_value(u, lengths, pert, &flows);
    Ok(FlowSolution {
        demand: *demand,
        flows,
        multipliers,
        objective,
        kkt_residual: kkt,
        active,
        iterations,
    })
}

/// Utility value `l'(u o x) - l'F(x)`.
pub fn objective_value(
    u: &UtilityRates,
    lengths: &[f64],
    pert: Perturbation,
    flows: &[f64],
) -> f64 {
    flows
        .iter()
        .enumerate()
        .map(|(e, &x)| lengths[e] * (u.get(e) * x - pert.value_raw(x.max(0.0))))
        .sum()
}

/// Spec-shaped KKT residual of a candidate solution.
pub fn kkt_residual(
    net: &Network,
    u: &UtilityRates,
    pert: Perturbation,
    sol: &FlowSolution,
) -> f64 {
    let b = net.demand_vector(&sol.demand);
    kkt_residual_raw(net, u, pert, &sol.flows, &sol.multipliers, &b, 0.0)
}

/// Combined KKT residual from raw parts: the max of
/// `|x_e (l_e(u_e - F'(x_e)) + (A'lambda)_e)|` over all links, the positive
/// part of the stationarity of inactive links at zero flow, and
/// `max |Ax - b|`. Links with flow at or below `zero_tol` count as inactive.
pub fn kkt_residual_raw(
    net: &Network,
    u: &UtilityRates,
    pert: Perturbation,
    flows: &[f64],
    multipliers: &[f64],
    b: &[f64],
    zero_tol: f64,
) -> f64 {
    let mut res: f64 = feasibility_violation(net, flows, b);
    for (e, link) in net.links().iter().enumerate() {
        let x = flows[e].max(0.0);
        let dual_diff = multipliers[link.head] - multipliers[link.tail];
        let stat = link.length_km * (u.get(e) - pert.prime_raw(x)) + dual_diff;
        res = res.max((flows[e] * stat).abs());
        if flows[e] <= zero_tol {
            let slack = link.length_km * (u.get(e) - pert.prime_raw(0.0)) + dual_diff;
            res = res.max(slack.max(0.0));
        }
        res = res.max(-flows[e].min(0.0));
    }
    res
}

fn feasibility_violation(net: &Network, flows: &[f64], b: &[f64]) -> f64 {
    net.divergence(flows)
        .iter()
        .zip(b)
        .map(|(a, t)| (a - t).abs())
        .fold(0.0, f64::max)
}

/// Re-solves with per-link utility-rate changes and reports flow ratios on
/// the base-active links.
pub fn substitution_experiment(
    net: &Network,
    u: &UtilityRates,
    demand: &DemandSpec,
    pert: Perturbation,
    delta: &[f64],
    opts: &SolverOptions,
) -> Result<SubstitutionResult> {
    if delta.len() != net.n_links() {
        return Err(CoreError::DimensionMismatch {
            what: "utility deltas",
            expected: net.n_links(),
            got: delta.len(),
        });
    }
    let base = solve_flow(net, u, demand, pert, opts)?;
    let shifted: Vec<f64> = u.as_slice().iter().zip(delta).map(|(a, d)| a + d).collect();
    let shifted = UtilityRates::new(net, shifted)?;
    let perturbed = solve_flow(net, &shifted, demand, pert, opts)?;
    let ratios = base
        .flows
        .iter()
        .zip(&perturbed.flows)
        .zip(&base.active)
        .map(|((&bx, &px), &act)| if act { Some(px / bx) } else { None })
        .collect();
    Ok(SubstitutionResult {
        base,
        perturbed,
        ratios,
    })
}

/// Greedy peeling of a feasible flow into loop-free origin-destination paths.
///
/// Weights are nonnegative and sum to the total demand; any residual above
/// `1e-6` (cyclic flow) is an error.
pub fn decompose_flow(net: &Network, sol: &FlowSolution) -> Result<Vec<PathWeight>> {
    decompose_flows(net, &sol.flows, &sol.demand)
}

pub(crate) fn decompose_flows(
    net: &Network,
    flows: &[f64],
    demand: &DemandSpec,
) -> Result<Vec<PathWeight>> {
    let mut residual = flows.to_vec();
    let mut paths = Vec::new();
    let cap = 4 * net.n_links() + 4;

    for _ in 0..cap {
        // Largest unepeeled outflow at the origin.
        let start = net
            .out_links(demand.origin)
            .iter()
            .copied()
            .filter(|&e| residual[e] > PEEL_EPS)
            .max_by(|&a, &b| residual[a].partial_cmp(&residual[b]).unwrap());
        let Some(start) = start else { break };

        let mut links = Vec::new();
        let mut visited = vec![false; net.n_nodes()];
        visited[demand.origin] = true;
        let mut e = start;
        loop {
            links.push(e);
            let v = net.link(e).head;
            if v == demand.destination {
                break;
            }
            if visited[v] {
                let left: f64 = residual.iter().sum();
                return Err(CoreError::DecompositionResidual { residual: left });
            }
            visited[v] = true;
            e = net
                .out_links(v)
                .iter()
                .copied()
                .filter(|&f| residual[f] > PEEL_EPS)
                .max_by(|&a, &b| residual[a].partial_cmp(&residual[b]).unwrap())
                .ok_or(CoreError::DecompositionResidual {
                    residual: residual.iter().sum(),
                })?;
        }

        let weight = links
            .iter()
            .map(|&f| residual[f])
            .fold(f64::INFINITY, f64::min);
        for &f in &links {
            residual[f] -= weight;
            if residual[f] <= 1e-15 {
                residual[f] = 0.0;
            }
        }
        paths.push(PathWeight { links, weight });
    }

    let leftover: f64 = residual.iter().sum();
    if leftover > 1e-6 {
        return Err(CoreError::DecompositionResidual { residual: leftover });
    }
    Ok(paths)
}

// ---------------------------------------------------------------------------
// Conditional gradient over path vertices
// ---------------------------------------------------------------------------

struct CgState {
    paths: Vec<Vec<usize>>,
    weights: Vec<f64>,
    index: HashMap<Vec<usize>, usize>,
}

impl CgState {
    fn new(start: Vec<usize>) -> Self {
        let mut index = HashMap::new();
        index.insert(start.clone(), 0);
        CgState {
            paths: vec![start],
            weights: vec![1.0],
            index,
        }
    }

    fn flows(&self, n_links: usize) -> Vec<f64> {
        let mut x = vec![0.0; n_links];
        for (path, &w) in self.paths.iter().zip(&self.weights) {
            for &e in path {
                x[e] += w;
            }
        }
        x
    }

    /// One away-step conditional-gradient iteration; returns the duality gap
    /// evaluated before the step.
    fn step(
        &mut self,
        net: &Network,
        u: &UtilityRates,
        lengths: &[f64],
        pert: Perturbation,
        demand: &DemandSpec,
    ) -> Result<f64> {
        let x = self.flows(net.n_links());
        let cost: Vec<f64> = (0..net.n_links())
            .map(|e| lengths[e] * (pert.prime_raw(x[e].max(0.0)) - u.get(e)))
            .collect();
        let path_cost = |p: &[usize]| p.iter().map(|&e| cost[e]).sum::<f64>();

        let sp = Dijkstra::run(net, &cost, demand.origin);
        let fw_path = sp.path_to(net, demand.destination).expect("reachable");
        let cx: f64 = x.iter().zip(&cost).map(|(a, c)| a * c).sum();
        let gap = cx - path_cost(&fw_path);
        if gap <= 0.0 {
            return Ok(gap.max(0.0));
        }

        let (away_idx, away_cost) = self
            .paths
            .iter()
            .enumerate()
            .map(|(i, p)| (i, path_cost(p)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("at least one active path");

        let fw_gap = gap;
        let away_gap = away_cost - cx;
        let mut direction: Vec<(usize, f64)> = Vec::new();

        let (t_max, is_away) = if fw_gap >= away_gap || self.weights[away_idx] >= 1.0 {
            // d = s - x
            for &e in &fw_path {
                direction.push((e, 1.0));
            }
            for (e, &xe) in x.iter().enumerate() {
                if xe > 0.0 {
                    direction.push((e, -xe));
                }
            }
            (1.0, false)
        } else {
            // d = x - a
            for (e, &xe) in x.iter().enumerate() {
                if xe > 0.0 {
                    direction.push((e, xe));
                }
            }
            for &e in &self.paths[away_idx] {
                direction.push((e, -1.0));
            }
            let w = self.weights[away_idx];
            (w / (1.0 - w), true)
        };
        let direction = merge_direction(direction);

        let t = line_search(&x, &direction, lengths, u, pert, t_max);

        if is_away {
            for w in &mut self.weights {
                *w *= 1.0 + t;
            }
            self.weights[away_idx] -= t;
        } else {
            for w in &mut self.weights {
                *w *= 1.0 - t;
            }
            let idx = self.intern(fw_path);
            self.weights[idx] += t;
        }
        self.prune_and_normalize();
        Ok(gap)
    }

    fn intern(&mut self, path: Vec<usize>) -> usize {
        if let Some(&i) = self.index.get(&path) {
            i
        } else {
            let i = self.paths.len();
            self.index.insert(path.clone(), i);
            self.paths.push(path);
            self.weights.push(0.0);
            i
        }
    }

    fn prune_and_normalize(&mut self) {
        let mut i = 0;
        while i < self.weights.len() {
            if self.weights[i] <= 1e-15 {
                let last = self.weights.len() - 1;
                self.paths.swap(i, last);
                self.weights.swap(i, last);
                let moved = self.paths.pop().unwrap();
                self.weights.pop();
                self.index.remove(&moved);
                if i < self.paths.len() {
                    self.index.insert(self.paths[i].clone(), i);
                }
            } else {
                i += 1;
            }
        }
        let total: f64 = self.weights.iter().sum();
        if total > 0.0 {
            for w in &mut self.weights {
                *w /= total;
            }
        }
    }
}

fn merge_direction(mut entries: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    entries.sort_unstable_by_key(|&(e, _)| e);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (e, v) in entries {
        match merged.last_mut() {
            Some((le, lv)) if *le == e => *lv += v,
            _ => merged.push((e, v)),
        }
    }
    merged.retain(|&(_, v)| v != 0.0);
    merged
}

/// Exact line search for `min_t C(x + t d)` on `[0, t_max]` by bisection on
/// the monotone derivative.
fn line_search(
    x: &[f64],
    direction: &[(usize, f64)],
    lengths: &[f64],
    u: &UtilityRates,
    pert: Perturbation,
    t_max: f64,
) -> f64 {
    let slope = |t: f64| -> f64 {
        direction
            .iter()
            .map(|&(e, d)| d * lengths[e] * (pert.prime_raw((x[e] + t * d).max(0.0)) - u.get(e)))
            .sum()
    };
    if slope(t_max) <= 0.0 {
        return t_max;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Active-set Newton refinement
// ---------------------------------------------------------------------------

/// Refines a feasible flow to KKT stationarity on its support, pricing in
/// shortest-path links until the duality gap closes. Returns rounds spent.
#[allow(clippy::too_many_arguments)]
fn newton_refine(
    net: &Network,
    u: &UtilityRates,
    lengths: &[f64],
    pert: Perturbation,
    demand: &DemandSpec,
    b: &[f64],
    flows: &mut Vec<f64>,
    opts: &SolverOptions,
) -> Result<usize> {
    let mut in_set: Vec<bool> = flows.iter().map(|&x| x > 0.0).collect();
    let mut rounds = 0usize;
    let outer_cap = 400.min(opts.max_iters.max(4));
    let mut truncated = false;

    loop {
        rounds += 1;
        if rounds > outer_cap {
            return Err(CoreError::NonConvergence {
                iterations: rounds,
                residual: f64::NAN,
            });
        }

        newton_inner(net, u, lengths, pert, b, flows, &mut in_set)?;

        // Optimality audit: flow-weighted cost versus the shortest path at
        // the current gradient.
        let cost: Vec<f64> = (0..net.n_links())
            .map(|e| lengths[e] * (pert.prime_raw(flows[e].max(0.0)) - u.get(e)))
            .collect();
        let sp = Dijkstra::run(net, &cost, demand.origin);
        let cx: f64 = flows.iter().zip(&cost).map(|(x, c)| x * c).sum();
        let gap = cx - sp.dist[demand.destination];
        let scale = cx.abs().max(1.0);

        if gap > 1e-13 * scale && !truncated {
            let path = sp.path_to(net, demand.destination).expect("reachable");
            let mut grew = false;
            for e in path {
                if !in_set[e] {
                    in_set[e] = true;
                    grew = true;
                }
            }
            if grew {
                continue;
            }
            // Support already contains the shortest path: the inner solve
            // has not converged far enough; one more round.
            continue;
        }

        // Final cleanup: truncate positive dust at or below zero_tol and
        // re-optimize once on the reduced support.
        if !truncated {
            truncated = true;
            let mut any = false;
            for e in 0..net.n_links() {
                if in_set[e] && flows[e] <= opts.zero_tol {
                    in_set[e] = false;
                    flows[e] = 0.0;
                    any = true;
                }
            }
            if any {
                continue;
            }
        }
        return Ok(rounds);
    }
}

/// Damped Newton iterations for `min C(x)` s.t. `A_S x = b` over the links in
/// `in_set`, dropping links whose flow hits the boundary. Keeps `x` feasible
/// (the linear solve includes a feasibility correction term).
fn newton_inner(
    net: &Network,
    u: &UtilityRates,
    lengths: &[f64],
    pert: Perturbation,
    b: &[f64],
    flows: &mut [f64],
    in_set: &mut [bool],
) -> Result<()> {
    let scale: f64 = lengths
        .iter()
        .enumerate()
        .map(|(e, &l)| (l * u.get(e)).abs())
        .fold(1.0, f64::max);
    let stat_tol = 1e-13 * scale;
    let feas_tol = 1e-13;

    for _ in 0..80 {
        let set: Vec<usize> = (0..net.n_links()).filter(|&e| in_set[e]).collect();
        if set.is_empty() {
            return Ok(());
        }

        let lambda = solve_kkt_multipliers(net, u, lengths, pert, b, flows, &set)?;

        // Stationarity residual at the current point and the Newton step.
        let mut step: Vec<(usize, f64)> = Vec::with_capacity(set.len());
        let mut max_resid = 0.0f64;
        for &e in &set {
            let link = net.link(e);
            let h = lengths[e] * pert.second_raw(flows[e].max(0.0));
            let g = lengths[e] * (pert.prime_raw(flows[e].max(0.0)) - u.get(e));
            let r = lambda[link.head] - lambda[link.tail] - g;
            max_resid = max_resid.max(r.abs());
            step.push((e, r / h));
        }
        let feas = feasibility_violation(net, flows, b);
        if max_resid <= stat_tol && feas <= feas_tol {
            return Ok(());
        }

        // Fraction to the boundary, taken exactly.
        let mut t = 1.0f64;
        for &(e, d) in &step {
            if d < 0.0 {
                t = t.min(flows[e] / -d);
            }
        }
        let boundary = t < 1.0;

        for &(e, d) in &step {
            flows[e] += t * d;
            if flows[e] <= 1e-15 {
                flows[e] = 0.0;
                if boundary {
                    in_set[e] = false;
                }
            }
        }
    }
    Ok(())
}

/// Solves the grounded Laplacian system `A_S H^-1 A_S' lambda = A_S H^-1 g +
/// (A x - b)` for the active-set multipliers. One node per connected
/// component of the active subgraph is grounded at zero.
fn solve_kkt_multipliers(
    net: &Network,
    u: &UtilityRates,
    lengths: &[f64],
    pert: Perturbation,
    b: &[f64],
    flows: &[f64],
    set: &[usize],
) -> Result<Vec<f64>> {
    use nalgebra::{DMatrix, DVector};

    // Nodes incident to the active set, densely renumbered.
    let mut node_pos: Vec<Option<usize>> = vec![None; net.n_nodes()];
    let mut nodes: Vec<usize> = Vec::new();
    for &e in set {
        for v in [net.link(e).tail, net.link(e).head] {
            if node_pos[v].is_none() {
                node_pos[v] = Some(nodes.len());
                nodes.push(v);
            }
        }
    }
    let n = nodes.len();

    // Union-find over the active subgraph to pick one ground per component.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut i = i;
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for &e in set {
        let a = node_pos[net.link(e).tail].unwrap();
        let bb = node_pos[net.link(e).head].unwrap();
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, bb));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut ground = vec![false; n];
    let mut seen_root: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        seen_root.entry(r).or_insert(i);
    }
    for (_, &rep) in seen_root.iter() {
        ground[rep] = true;
    }

    // Dense grounded Laplacian; rhs = A_S H^-1 g + (b - A x). The second
    // term corrects any feasibility drift within one solve.
    let mut lap = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let mut div = vec![0.0; net.n_nodes()];
    for (e, &x) in flows.iter().enumerate() {
        div[net.link(e).tail] -= x;
        div[net.link(e).head] += x;
    }
    for (i, &v) in nodes.iter().enumerate() {
        rhs[i] = b[v] - div[v];
    }
    for &e in set {
        let link = net.link(e);
        let (i, j) = (node_pos[link.tail].unwrap(), node_pos[link.head].unwrap());
        let h = lengths[e] * pert.second_raw(flows[e].max(0.0));
        let g = lengths[e] * (pert.prime_raw(flows[e].max(0.0)) - u.get(e));
        let w = 1.0 / h;
        lap[(i, i)] += w;
        lap[(j, j)] += w;
        lap[(i, j)] -= w;
        lap[(j, i)] -= w;
        rhs[i] -= g * w;
        rhs[j] += g * w;
    }
    for i in 0..n {
        if ground[i] {
            for j in 0..n {
                lap[(i, j)] = 0.0;
                lap[(j, i)] = 0.0;
            }
            lap[(i, i)] = 1.0;
            rhs[i] = 0.0;
        }
    }

    let lambda_local = lap
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .or_else(|| lap.clone().lu().solve(&rhs))
        .ok_or(CoreError::NonConvergence {
            iterations: 0,
            residual: f64::NAN,
        })?;

    let mut lambda = vec![0.0; net.n_nodes()];
    for (i, &v) in nodes.iter().enumerate() {
        lambda[v] = lambda_local[i];
    }
    Ok(lambda)
}

/// Recovers node multipliers solving the active-link stationarity system:
/// shortest-path potentials from the origin under the optimal gradient
/// costs are tight on every flow-carrying link and dual-feasible elsewhere.
/// Nodes unreachable from the origin get a constant above the maximum.
pub fn recover_multipliers(
    net: &Network,
    u: &UtilityRates,
    lengths: &[f64],
    pert: Perturbation,
    flows: &[f64],
    origin: usize,
) -> Vec<f64> {
    let cost: Vec<f64> = (0..net.n_links())
        .map(|e| lengths[e] * (pert.prime_raw(flows[e].max(0.0)) - u.get(e)))
        .collect();
    let sp = Dijkstra::run(net, &cost, origin);
    let max_finite = sp
        .dist
        .iter()
        .copied()
        .filter(|d| d.is_finite())
        .fold(0.0, f64::max);
    sp.dist
        .iter()
        .map(|&d| if d.is_finite() { d } else { max_finite + 1.0 })
        .collect()
}

// ---------------------------------------------------------------------------
// Shortest paths
// ---------------------------------------------------------------------------

struct Dijkstra {
    dist: Vec<f64>,
    parent: Vec<Option<usize>>,
}

#[derive(PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap on distance, ties by node index for determinism.
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap()
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Dijkstra {
    /// Shortest distances from `origin` under strictly positive link costs.
    fn run(net: &Network, cost: &[f64], origin: usize) -> Dijkstra {
        let mut dist = vec![f64::INFINITY; net.n_nodes()];
        let mut parent = vec![None; net.n_nodes()];
        let mut heap = BinaryHeap::new();
        dist[origin] = 0.0;
        heap.push(HeapItem {
            dist: 0.0,
            node: origin,
        });
        while let Some(HeapItem { dist: d, node: v }) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &e in net.out_links(v) {
                let w = net.link(e).head;
                let nd = d + cost[e];
                if nd < dist[w] {
                    dist[w] = nd;
                    parent[w] = Some(e);
                    heap.push(HeapItem { dist: nd, node: w });
                }
            }
        }
        Dijkstra { dist, parent }
    }

    fn path_to(&self, net: &Network, dest: usize) -> Option<Vec<usize>> {
        if !self.dist[dest].is_finite() {
            return None;
        }
        let mut links = Vec::new();
        let mut v = dest;
        while let Some(e) = self.parent[v] {
            links.push(e);
            v = net.link(e).tail;
        }
        links.reverse();
        Some(links)
    }
}
