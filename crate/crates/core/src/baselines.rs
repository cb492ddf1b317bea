//! Enumerated-route logit baselines for small networks.
//!
//! Multinomial logit and path-size logit over the exhaustive set of
//! loop-free routes. These exist for comparison experiments only; the route
//! enumeration is capped and meant for toy-scale networks.

use crate::error::{CoreError, Result};
use crate::network::{DemandSpec, Network, UtilityRates};

/// A loop-free route with its total utility `sum_e l_e u_e` and length.
#[derive(Debug, Clone)]
pub struct Route {
    pub links: Vec<usize>,
    pub utility: f64,
    pub length_km: f64,
}

/// All loop-free routes for one OD.
#[derive(Debug, Clone)]
pub struct RouteSet {
    pub routes: Vec<Route>,
}

impl RouteSet {
    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }
}

/// Route choice probabilities and the per-link flows they induce.
#[derive(Debug, Clone)]
pub struct ChoiceProbabilities {
    pub probabilities: Vec<f64>,
    pub link_flows: Vec<f64>,
}

/// Exhaustive depth-first enumeration of loop-free routes, in deterministic
/// link-index order. Errors once the count would exceed `max_routes`.
pub fn enumerate_routes(
    net: &Network,
    u: &UtilityRates,
    demand: &DemandSpec,
    max_routes: usize,
) -> Result<RouteSet> {
    let mut routes = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut visited = vec![false; net.n_nodes()];
    visited[demand.origin] = true;
    dfs(
        net,
        u,
        demand.origin,
        demand.destination,
        &mut visited,
        &mut stack,
        &mut routes,
        max_routes,
    )?;
    if routes.is_empty() {
        return Err(CoreError::Unreachable {
            origin: net.node_id(demand.origin).to_owned(),
            destination: net.node_id(demand.destination).to_owned(),
        });
    }
    Ok(RouteSet { routes })
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    net: &Network,
    u: &UtilityRates,
    v: usize,
    dest: usize,
    visited: &mut Vec<bool>,
    stack: &mut Vec<usize>,
    routes: &mut Vec<Route>,
    max_routes: usize,
) -> Result<()> {
    if v == dest {
        if routes.len() >= max_routes {
            return Err(CoreError::RouteExplosion { max_routes });
        }
        let utility = stack
            .iter()
            .map(|&e| net.link(e).length_km * u.get(e))
            .sum();
        let length_km = stack.iter().map(|&e| net.link(e).length_km).sum();
        routes.push(Route {
            links: stack.clone(),
            utility,
            length_km,
        });
        return Ok(());
    }
    for &e in net.out_links(v) {
        let w = net.link(e).head;
        if visited[w] {
            continue;
        }
        visited[w] = true;
        stack.push(e);
        dfs(net, u, w, dest, visited, stack, routes, max_routes)?;
        stack.pop();
        visited[w] = false;
    }
    Ok(())
}

fn softmax_flows(net: &Network, rs: &RouteSet, systematic: &[f64]) -> ChoiceProbabilities {
    let vmax = systematic.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = systematic.iter().map(|&v| (v - vmax).exp()).collect();
    let total: f64 = weights.iter().sum();
    let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut link_flows = vec![0.0; net.n_links()];
    for (route, &p) in rs.routes.iter().zip(&probabilities) {
        for &e in &route.links {
            link_flows[e] += p;
        }
    }
    ChoiceProbabilities {
        probabilities,
        link_flows,
    }
}

/// Multinomial logit over the route set: `V_n = beta_u * U_n`.
pub fn mnl_probabilities(net: &Network, rs: &RouteSet, beta_u: f64) -> ChoiceProbabilities {
    let v: Vec<f64> = rs.routes.iter().map(|r| beta_u * r.utility).collect();
    softmax_flows(net, rs, &v)
}

/// Length-weighted path-size factors `S_n = sum_{e in n} (l_e/L_n)(1/N_e)`,
/// with `N_e` the number of routes in the set using link `e`.
pub fn path_size_factors(net: &Network, rs: &RouteSet) -> Vec<f64> {
    let mut usage = vec![0usize; net.n_links()];
    for route in &rs.routes {
        for &e in &route.links {
            usage[e] += 1;
        }
    }
    rs.routes
        .iter()
        .map(|route| {
            route
                .links
                .iter()
                .map(|&e| net.link(e).length_km / route.length_km / usage[e] as f64)
                .sum()
        })
        .collect()
}

/// Path-size logit: `V_n = beta_u * U_n + beta_ps * ln S_n`.
pub fn psl_probabilities(
    net: &Network,
    rs: &RouteSet,
    beta_u: f64,
    beta_ps: f64,
) -> ChoiceProbabilities {
    let sizes = path_size_factors(net, rs);
    let v: Vec<f64> = rs
        .routes
        .iter()
        .zip(&sizes)
        .map(|(r, &s)| beta_u * r.utility + beta_ps * s.ln())
        .collect();
    softmax_flows(net, rs, &v)
}

/// Which baseline a calibration targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Mnl,
    Psl,
}

/// Calibrated parameters and the attained sum of squared link-flow errors.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub params: Vec<f64>,
    pub sse: f64,
}

/// Fits baseline parameters to target link flows by minimizing the sum of
/// squared per-link errors with a bounded golden-section search.
///
/// The PSL calibration is sequential: the utility coefficient comes from
/// the multinomial-logit stage and the path-size coefficient is then fitted
/// with it held fixed. A joint search is deliberately not used here: on
/// overlap-symmetric networks it can reproduce target flows exactly with an
/// inflated utility coefficient, which defeats the comparison (see
/// [`calibrate_psl_joint`]).
pub fn calibrate_to_flows(
    net: &Network,
    rs: &RouteSet,
    kind: BaselineKind,
    target: &[f64],
) -> Result<Calibration> {
    check_target(net, target)?;
    let f_mnl = |b: f64| sse(&mnl_probabilities(net, rs, b).link_flows, target);
    let beta_u = golden_section(f_mnl, 1e-3, 16.0, 1e-9);
    match kind {
        BaselineKind::Mnl => Ok(Calibration {
            sse: f_mnl(beta_u),
            params: vec![beta_u],
        }),
        BaselineKind::Psl => {
            let f = |bp: f64| sse(&psl_probabilities(net, rs, beta_u, bp).link_flows, target);
            let beta_ps = golden_section(f, -4.0, 8.0, 1e-9);
            Ok(Calibration {
                sse: f(beta_ps),
                params: vec![beta_u, beta_ps],
            })
        }
    }
}

/// Joint two-parameter PSL fit by alternating golden-section sweeps. When
/// the target was generated by a PSL model this recovers its parameters.
pub fn calibrate_psl_joint(net: &Network, rs: &RouteSet, target: &[f64]) -> Result<Calibration> {
    check_target(net, target)?;
    let f = |bu: f64, bp: f64| sse(&psl_probabilities(net, rs, bu, bp).link_flows, target);
    let (mut bu, mut bp) = (2.0, 0.0);
    for sweep in 0..60 {
        let prev = (bu, bp);
        bu = golden_section(|b| f(b, bp), 1e-3, 16.0, 1e-9);
        bp = golden_section(|b| f(bu, b), -4.0, 8.0, 1e-9);
        if (bu - prev.0).abs() < 1e-7 && (bp - prev.1).abs() < 1e-7 {
            break;
        }
        if sweep == 59 {
            return Err(CoreError::SearchFailed(
                "alternating search did not settle".into(),
            ));
        }
    }
    Ok(Calibration {
        sse: f(bu, bp),
        params: vec![bu, bp],
    })
}

fn check_target(net: &Network, target: &[f64]) -> Result<()> {
    if target.len() != net.n_links() {
        return Err(CoreError::DimensionMismatch {
            what: "target flows",
            expected: net.n_links(),
            got: target.len(),
        });
    }
    Ok(())
}

fn sse(flows: &[f64], target: &[f64]) -> f64 {
    flows
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Golden-section minimizer for a unimodal function on `[lo, hi]`.
fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while (hi - lo).abs() > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}
