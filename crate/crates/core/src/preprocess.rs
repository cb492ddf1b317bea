//! Trip-data preparation: trimming trips to a compact set of origin and
//! destination nodes, screening out nonsensical trips, and dropping ODs
//! without within-OD variation.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::{CoreError, Result};
use crate::network::{DemandSpec, FeatureMatrix, Network};
use crate::perturbation::Perturbation;
use crate::solver::{solve_flow, SolverOptions};
use crate::trip::Trip;

/// Which end of the trips a node selection targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimDirection {
    Origin,
    Destination,
}

/// Greedy selection of `n` trim nodes.
///
/// Each round scores every node by the total number of trip nodes that
/// would still be cut away if the node were selected: a node at position
/// `k` of a trip whose earliest selected position is `k*` scores
/// `max(0, k* - k)`, summed across trips (first occurrence per trip). The
/// highest-scoring node is selected, ties broken by the smallest node id.
/// For destinations the same procedure runs on the reversed sequences.
///
/// Errors when fewer than `n` nodes ever attain a positive score.
pub fn select_trim_nodes(
    net: &Network,
    trips: &[Trip],
    n: usize,
    direction: TrimDirection,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(CoreError::InvalidArgument("n must be at least 1".into()));
    }
    if trips.is_empty() {
        return Err(CoreError::InvalidArgument("no trips given".into()));
    }
    let mut seqs: Vec<Vec<usize>> = Vec::with_capacity(trips.len());
    for trip in trips {
        let mut nodes = trip.node_sequence(net)?;
        if direction == TrimDirection::Destination {
            nodes.reverse();
        }
        seqs.push(nodes);
    }

    // k_star[t]: 1-based position of the earliest selected node of trip t,
    // initialized past the end (the trip length).
    let mut k_star: Vec<usize> = seqs.iter().map(|s| s.len()).collect();
    let mut selected: Vec<usize> = Vec::with_capacity(n);
    let mut selected_set: HashSet<usize> = HashSet::new();

    while selected.len() < n {
        let mut scores: HashMap<usize, usize> = HashMap::new();
        for (t, seq) in seqs.iter().enumerate() {
            let mut seen: HashSet<usize> = HashSet::new();
            for (pos0, &v) in seq.iter().enumerate() {
                if !seen.insert(v) {
                    continue;
                }
                let k = pos0 + 1;
                if k < k_star[t] {
                    *scores.entry(v).or_insert(0) += k_star[t] - k;
                }
            }
        }
        let best = scores
            .iter()
            .filter(|&(v, &s)| s > 0 && !selected_set.contains(v))
            .max_by(|a, b| {
                a.1.cmp(b.1)
                    .then_with(|| net.node_id(*b.0).cmp(net.node_id(*a.0)))
            })
            .map(|(&v, _)| v);
        let Some(v_star) = best else {
            return Err(CoreError::InvalidArgument(format!(
                "only {} nodes are eligible, {} requested",
                selected.len(),
                n
            )));
        };
        selected.push(v_star);
        selected_set.insert(v_star);
        for (t, seq) in seqs.iter().enumerate() {
            if let Some(pos0) = seq.iter().position(|&v| v == v_star) {
                k_star[t] = k_star[t].min(pos0 + 1);
            }
        }
    }
    Ok(selected)
}

/// Result of trimming a trip set to origin/destination node sets.
#[derive(Debug, Clone)]
pub struct TrimResult {
    pub origins: Vec<String>,
    pub destinations: Vec<String>,
    pub kept: Vec<Trip>,
    /// Trips that never hit both sets in the required order, unmodified.
    pub discarded: Vec<Trip>,
}

impl TrimResult {
    pub fn discarded_count(&self) -> usize {
        self.discarded.len()
    }
}

/// Trims each trip to start at its first visit of an origin node and end at
/// its last visit of a destination node. Trips that never touch both sets,
/// or whose first origin hit does not precede the last destination hit, are
/// discarded.
pub fn trim_trips(
    net: &Network,
    trips: &[Trip],
    origins: &HashSet<usize>,
    destinations: &HashSet<usize>,
) -> Result<TrimResult> {
    if origins.is_empty() || destinations.is_empty() {
        return Err(CoreError::InvalidArgument(
            "origin and destination sets must be nonempty".into(),
        ));
    }
    let mut kept = Vec::new();
    let mut discarded = Vec::new();
    for trip in trips {
        let nodes = trip.node_sequence(net)?;
        let first_o = nodes.iter().position(|v| origins.contains(v));
        let last_d = nodes.iter().rposition(|v| destinations.contains(v));
        match (first_o, last_d) {
            (Some(i), Some(j)) if i < j => {
                kept.push(Trip {
                    origin: net.node_id(nodes[i]).to_owned(),
                    destination: net.node_id(nodes[j]).to_owned(),
                    links: trip.links[i..j].to_vec(),
                });
            }
            _ => discarded.push(trip.clone()),
        }
    }
    let mut origin_ids: Vec<String> =
        origins.iter().map(|&v| net.node_id(v).to_owned()).collect();
    origin_ids.sort();
    let mut destination_ids: Vec<String> = destinations
        .iter()
        .map(|&v| net.node_id(v).to_owned())
        .collect();
    destination_ids.sort();
    Ok(TrimResult {
        origins: origin_ids,
        destinations: destination_ids,
        kept,
        discarded,
    })
}

/// Outcome of the utility-coverage screen.
#[derive(Debug, Clone)]
pub struct FilterResult {
    pub kept: Vec<Trip>,
    pub discarded: Vec<Trip>,
    /// Coverage share per input trip, aligned with the input order.
    pub coverages: Vec<f64>,
}

/// Screens out trips that spend too much of their utility outside the
/// active set predicted with a deliberately weak screening parameter.
///
/// For each OD the model is solved once with `screen_beta`; a trip is kept
/// when the share of its `l|u|`-weighted links inside the predicted active
/// set is at least `threshold`.
pub fn filter_nonsensical(
    net: &Network,
    z: &FeatureMatrix,
    screen_beta: &[f64],
    threshold: f64,
    pert: Perturbation,
    trips: &[Trip],
    opts: &SolverOptions,
) -> Result<FilterResult> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CoreError::InvalidArgument(format!(
            "threshold must lie in [0, 1], got {threshold}"
        )));
    }
    let u = z.utilities(net, screen_beta)?;

    let mut active_by_od: HashMap<(usize, usize), Vec<bool>> = HashMap::new();
    let mut kept = Vec::new();
    let mut discarded = Vec::new();
    let mut coverages = Vec::with_capacity(trips.len());
    for trip in trips {
        let demand = DemandSpec::new(net, &trip.origin, &trip.destination)?;
        let key = (demand.origin, demand.destination);
        let active = match active_by_od.get(&key) {
            Some(a) => a,
            None => {
                let sol = solve_flow(net, &u, &demand, pert, opts)?;
                active_by_od.entry(key).or_insert(sol.active)
            }
        };
        let mut total = 0.0;
        let mut inside = 0.0;
        for id in &trip.links {
            let e = net.link_idx(id)?;
            let weight = net.link(e).length_km * u.get(e).abs();
            total += weight;
            if active[e] {
                inside += weight;
            }
        }
        let coverage = if total > 0.0 { inside / total } else { 0.0 };
        coverages.push(coverage);
        if coverage >= threshold {
            kept.push(trip.clone());
        } else {
            discarded.push(trip.clone());
        }
    }
    Ok(FilterResult {
        kept,
        discarded,
        coverages,
    })
}

/// Drops ODs whose trips all used the same set of links (including
/// single-trip ODs); such ODs carry no within-OD variation.
pub fn drop_degenerate_ods(trips: &[Trip]) -> (Vec<Trip>, Vec<(String, String)>) {
    let mut link_sets: HashMap<(String, String), Vec<BTreeSet<&str>>> = HashMap::new();
    for trip in trips {
        link_sets
            .entry((trip.origin.clone(), trip.destination.clone()))
            .or_default()
            .push(trip.links.iter().map(|s| s.as_str()).collect());
    }
    let mut dropped: Vec<(String, String)> = link_sets
        .iter()
        .filter(|(_, sets)| sets.iter().all(|s| *s == sets[0]))
        .map(|(od, _)| od.clone())
        .collect();
    dropped.sort();
    let dropped_set: HashSet<&(String, String)> = dropped.iter().collect();
    let kept = trips
        .iter()
        .filter(|t| !dropped_set.contains(&(t.origin.clone(), t.destination.clone())))
        .cloned()
        .collect();
    (kept, dropped)
}
