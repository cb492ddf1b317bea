//! Prediction-quality metrics against observed trips.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::network::{DemandSpec, FeatureMatrix, Network, UtilityRates};
use crate::perturbation::Perturbation;
use crate::solver::{solve_flow, SolverOptions};
use crate::trip::Trip;

/// Predicted totals: the per-OD unit-demand flows scaled by trip counts and
/// summed across ODs. ODs are solved once each.
pub fn aggregate_predicted_flows(
    net: &Network,
    z: &FeatureMatrix,
    beta: &[f64],
    demands: &[(DemandSpec, u64)],
    pert: Perturbation,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let u = z.utilities(net, beta)?;
    let mut cache: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    let mut totals = vec![0.0; net.n_links()];
    for (demand, count) in demands {
        let key = (demand.origin, demand.destination);
        let flows = match cache.get(&key) {
            Some(f) => f,
            None => {
                let sol = solve_flow(net, &u, demand, pert, opts)?;
                cache.entry(key).or_insert(sol.flows)
            }
        };
        for (t, f) in totals.iter_mut().zip(flows) {
            *t += *count as f64 * f;
        }
    }
    Ok(totals)
}

/// Observed totals: link traversal counts summed over all trips.
pub fn observed_link_flows(net: &Network, trips: &[Trip]) -> Result<Vec<f64>> {
    let mut totals = vec![0.0; net.n_links()];
    for trip in trips {
        for id in &trip.links {
            totals[net.link_idx(id)?] += 1.0;
        }
    }
    Ok(totals)
}

/// Adjusted R² of predictions against observations with `p` estimated
/// parameters: `1 - (SSE/SST) * (N-1)/(N-p-1)`, `SSE` the squared
/// prediction error and `SST` the centered total sum of squares. Equals one
/// exactly for perfect predictions.
pub fn prediction_adj_r2(observed: &[f64], predicted: &[f64], p: usize) -> Result<f64> {
    let n = observed.len();
    if predicted.len() != n {
        return Err(CoreError::DimensionMismatch {
            what: "predicted flows",
            expected: n,
            got: predicted.len(),
        });
    }
    if n <= p + 1 {
        return Err(CoreError::InsufficientObservations { n_obs: n, params: p });
    }
    let mean = observed.iter().sum::<f64>() / n as f64;
    let sst: f64 = observed.iter().map(|x| (x - mean) * (x - mean)).sum();
    if sst <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "observed vector is constant; R² undefined".into(),
        ));
    }
    let sse: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(x, xh)| (xh - x) * (xh - x))
        .sum();
    Ok(1.0 - (sse / sst) * (n as f64 - 1.0) / (n as f64 - p as f64 - 1.0))
}

/// Alternative normalization that scales the explained share instead of the
/// error share: `1 - (1 - SSE/SST) * (N-1)/(N+p-1)`. Reported alongside the
/// primary statistic for comparison; the two diverge except near zero fit.
pub fn prediction_adj_r2_alt(observed: &[f64], predicted: &[f64], p: usize) -> Result<f64> {
    let n = observed.len();
    if predicted.len() != n {
        return Err(CoreError::DimensionMismatch {
            what: "predicted flows",
            expected: n,
            got: predicted.len(),
        });
    }
    let mean = observed.iter().sum::<f64>() / n as f64;
    let sst: f64 = observed.iter().map(|x| (x - mean) * (x - mean)).sum();
    if sst <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "observed vector is constant; R² undefined".into(),
        ));
    }
    let sse: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(x, xh)| (xh - x) * (xh - x))
        .sum();
    Ok(1.0 - (1.0 - sse / sst) * (n as f64 - 1.0) / (n as f64 + p as f64 - 1.0))
}

/// Share of a trip's `l|u|`-weighted utility on links outside the active
/// set. Zero means the trip lies fully inside the prediction.
pub fn outside_utility_share(
    net: &Network,
    trip_links: &[usize],
    active: &[bool],
    u: &UtilityRates,
) -> Result<f64> {
    let mut total = 0.0;
    let mut outside = 0.0;
    for &e in trip_links {
        let weight = net.link(e).length_km * u.get(e).abs();
        total += weight;
        if !active[e] {
            outside += weight;
        }
    }
    if total <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "trip has zero utility weight".into(),
        ));
    }
    Ok(outside / total)
}

/// Agreement between the predicted and observed sets of unused links.
#[derive(Debug, Clone, Serialize)]
pub struct UnusedLinkStats {
    /// Intersection over union of the two zero sets.
    pub jaccard: f64,
    /// Intersection over the predicted zero set.
    pub share_of_predicted: f64,
    /// Intersection over the observed zero set.
    pub share_of_observed: f64,
    pub n_predicted_zero: usize,
    pub n_observed_zero: usize,
    pub predicted_zero_km: f64,
    pub observed_zero_km: f64,
}

/// Compares zero-flow link sets; a link counts as unused at absolute flow
/// `<= zero_tol`.
pub fn unused_link_stats(
    net: &Network,
    predicted: &[f64],
    observed: &[f64],
    zero_tol: f64,
) -> UnusedLinkStats {
    let mut inter = 0usize;
    let mut union = 0usize;
    let mut n_p = 0usize;
    let mut n_o = 0usize;
    let mut km_p = 0.0;
    let mut km_o = 0.0;
    for (e, link) in net.links().iter().enumerate() {
        let p_zero = predicted[e].abs() <= zero_tol;
        let o_zero = observed[e].abs() <= zero_tol;
        if p_zero {
            n_p += 1;
            km_p += link.length_km;
        }
        if o_zero {
            n_o += 1;
            km_o += link.length_km;
        }
        if p_zero && o_zero {
            inter += 1;
        }
        if p_zero || o_zero {
            union += 1;
        }
    }
    let frac = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    UnusedLinkStats {
        jaccard: frac(inter, union),
        share_of_predicted: frac(inter, n_p),
        share_of_observed: frac(inter, n_o),
        n_predicted_zero: n_p,
        n_observed_zero: n_o,
        predicted_zero_km: km_p,
        observed_zero_km: km_o,
    }
}

/// Full comparison of a fitted model against an observed trip set.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n_links: usize,
    pub n_trips: usize,
    pub n_ods: usize,
    pub n_params: usize,
    pub adj_r2: f64,
    /// Alternative normalization, see [`prediction_adj_r2_alt`].
    pub adj_r2_alt: f64,
    pub unused: UnusedLinkStats,
    /// Per-trip share of utility outside the OD's predicted active set,
    /// in input trip order.
    pub outside_utility_shares: Vec<f64>,
    /// Share of trips fully inside their predicted active set.
    pub fully_covered_share: f64,
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
}

/// Groups trips by OD, solves each OD once, and assembles the aggregate and
/// per-trip validation metrics.
pub fn validate(
    net: &Network,
    z: &FeatureMatrix,
    beta: &[f64],
    trips: &[Trip],
    pert: Perturbation,
    opts: &SolverOptions,
) -> Result<ValidationReport> {
    if trips.is_empty() {
        return Err(CoreError::InvalidArgument("no trips to validate".into()));
    }
    let u = z.utilities(net, beta)?;

    let mut counts: Vec<((usize, usize), u64)> = Vec::new();
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    for trip in trips {
        let d = DemandSpec::new(net, &trip.origin, &trip.destination)?;
        let key = (d.origin, d.destination);
        match index.get(&key) {
            Some(&i) => counts[i].1 += 1,
            None => {
                index.insert(key, counts.len());
                counts.push((key, 1));
            }
        }
    }

    let mut solutions: HashMap<(usize, usize), crate::solver::FlowSolution> = HashMap::new();
    let mut predicted = vec![0.0; net.n_links()];
    for &(key, count) in &counts {
        let demand = DemandSpec::from_indices(net, key.0, key.1)?;
        let sol = solve_flow(net, &u, &demand, pert, opts)?;
        for (t, f) in predicted.iter_mut().zip(&sol.flows) {
            *t += count as f64 * f;
        }
        solutions.insert(key, sol);
    }

    let observed = observed_link_flows(net, trips)?;
    let p = beta.len();
    let adj_r2 = prediction_adj_r2(&observed, &predicted, p)?;
    let adj_r2_alt = prediction_adj_r2_alt(&observed, &predicted, p)?;
    let unused = unused_link_stats(net, &predicted, &observed, 0.0);

    let mut outside_shares = Vec::with_capacity(trips.len());
    let mut fully_covered = 0usize;
    for trip in trips {
        let d = DemandSpec::new(net, &trip.origin, &trip.destination)?;
        let sol = &solutions[&(d.origin, d.destination)];
        let links = trip.link_indices(net)?;
        let share = outside_utility_share(net, &links, &sol.active, &u)?;
        if share == 0.0 {
            fully_covered += 1;
        }
        outside_shares.push(share);
    }

    Ok(ValidationReport {
        n_links: net.n_links(),
        n_trips: trips.len(),
        n_ods: counts.len(),
        n_params: p,
        adj_r2,
        adj_r2_alt,
        unused,
        fully_covered_share: fully_covered as f64 / trips.len() as f64,
        outside_utility_shares: outside_shares,
        observed,
        predicted,
    })
}
