//! Synthetic trip generation from solved flows.
//!
//! A sampled trip is a random walk from origin to destination: at each node
//! the next link is drawn among the active outgoing links with probability
//! proportional to their optimal flows. Flow conservation makes the walk a
//! unit-flow routing, so expected traversal counts equal the link flows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::network::{DemandSpec, FeatureMatrix, Network};
use crate::perturbation::Perturbation;
use crate::solver::{solve_flow, FlowSolution, SolverOptions};
use crate::trip::Trip;

/// A seeded batch of ODs to sample.
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub ods: Vec<DemandSpec>,
    pub trips_per_od: usize,
    pub beta: Vec<f64>,
    pub seed: u64,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.trips_per_od == 0 {
            return Err(CoreError::InvalidArgument(
                "trips_per_od must be at least 1".into(),
            ));
        }
        if self.ods.is_empty() {
            return Err(CoreError::InvalidArgument("plan has no ODs".into()));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Independent substream key for `(seed, od, trip)`; ChaCha8 seeded with
/// this value is the documented portable generator, so datasets reproduce
/// bit-for-bit regardless of sampling order or parallelism.
pub fn substream_seed(seed: u64, od_index: usize, trip_index: usize) -> u64 {
    let a = splitmix64(seed ^ 0xa076_1d64_78bd_642f);
    let b = splitmix64(a ^ (od_index as u64).wrapping_mul(0xe703_7ed1_a0b4_28db));
    splitmix64(b ^ (trip_index as u64).wrapping_mul(0x8ebc_6af0_9c88_c6e3))
}

/// Samples one trip by a flow-proportional random walk.
pub fn sample_trip<R: Rng>(sol: &FlowSolution, net: &Network, rng: &mut R) -> Result<Trip> {
    let cap = 10 * net.n_links();
    let mut links = Vec::new();
    let mut v = sol.demand.origin;
    while v != sol.demand.destination {
        if links.len() >= cap {
            return Err(CoreError::StepCapExceeded { cap });
        }
        let candidates: Vec<usize> = net
            .out_links(v)
            .iter()
            .copied()
            .filter(|&e| sol.active[e])
            .collect();
        let total: f64 = candidates.iter().map(|&e| sol.flows[e]).sum();
        if candidates.is_empty() || total <= 0.0 {
            return Err(CoreError::DeadEnd {
                node: net.node_id(v).to_owned(),
            });
        }
        let mut draw = rng.gen_range(0.0..total);
        let mut chosen = *candidates.last().unwrap();
        for &e in &candidates {
            if draw < sol.flows[e] {
                chosen = e;
                break;
            }
            draw -= sol.flows[e];
        }
        links.push(chosen);
        v = net.link(chosen).head;
    }
    Ok(Trip {
        origin: net.node_id(sol.demand.origin).to_owned(),
        destination: net.node_id(sol.demand.destination).to_owned(),
        links: links
            .into_iter()
            .map(|e| net.link(e).id.clone())
            .collect(),
    })
}

/// Solves each OD once and samples the planned number of trips, each from
/// its own `(seed, od, trip)` substream.
pub fn simulate_dataset(
    net: &Network,
    z: &FeatureMatrix,
    plan: &SimulationPlan,
    pert: Perturbation,
    opts: &SolverOptions,
) -> Result<Vec<Trip>> {
    plan.validate()?;
    let u = z.utilities(net, &plan.beta)?;
    let mut solutions: Vec<FlowSolution> = Vec::with_capacity(plan.ods.len());
    let mut cache: std::collections::HashMap<DemandSpec, usize> = std::collections::HashMap::new();
    for od in &plan.ods {
        if let Some(&i) = cache.get(od) {
            let sol = solutions[i].clone();
            solutions.push(sol);
        } else {
            let sol = solve_flow(net, &u, od, pert, opts)?;
            cache.insert(*od, solutions.len());
            solutions.push(sol);
        }
    }

    let mut trips = Vec::with_capacity(plan.ods.len() * plan.trips_per_od);
    for (od_index, sol) in solutions.iter().enumerate() {
        for trip_index in 0..plan.trips_per_od {
            let mut rng =
                ChaCha8Rng::seed_from_u64(substream_seed(plan.seed, od_index, trip_index));
            trips.push(sample_trip(sol, net, &mut rng)?);
        }
    }
    Ok(trips)
}

/// Per-OD summary row: active-link count and expected travel time.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolutionStats {
    pub origin: String,
    pub destination: String,
    pub active_links: usize,
    /// `sum_e time_e * flow_e` with a caller-supplied per-link time.
    pub expected_time: f64,
}

/// Distribution inputs for active-link-count and travel-time summaries.
pub fn summarize_solution_stats(
    net: &Network,
    solutions: &[FlowSolution],
    time_per_link: &[f64],
) -> Result<Vec<SolutionStats>> {
    if time_per_link.len() != net.n_links() {
        return Err(CoreError::DimensionMismatch {
            what: "time per link",
            expected: net.n_links(),
            got: time_per_link.len(),
        });
    }
    Ok(solutions
        .iter()
        .map(|sol| SolutionStats {
            origin: net.node_id(sol.demand.origin).to_owned(),
            destination: net.node_id(sol.demand.destination).to_owned(),
            active_links: sol.n_active(),
            expected_time: sol
                .flows
                .iter()
                .zip(time_per_link)
                .map(|(x, t)| x * t)
                .sum(),
        })
        .collect())
}
