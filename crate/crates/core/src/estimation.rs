//! Parameter estimation from observed link flows.
//!
//! For each OD, the active-link rows of the first-order conditions are
//! freed of the node multipliers by the transformation `M = I - (BA')C`,
//! where `C` is the Moore-Penrose inverse of the reduced incidence `BA'`.
//! The transformed pairs `y = M B(l o F'(x))`, `w = M B(l o z)` satisfy
//! `y = w beta` exactly at a model optimum, so stacking them across ODs and
//! running OLS recovers the utility parameters.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::network::{DemandSpec, FeatureMatrix, Network};
use crate::perturbation::Perturbation;
use crate::trip::Trip;

/// Per-unit-demand observed flows for one OD pair.
#[derive(Debug, Clone)]
pub struct EmpiricalFlow {
    pub demand: DemandSpec,
    /// Link traversal counts divided by the trip count.
    pub flows: Vec<f64>,
    pub trip_count: u64,
}

impl EmpiricalFlow {
    /// Aggregates trips of one OD into a normalized flow vector. Every trip
    /// must run from the demand's origin to its destination over existing,
    /// consecutive links.
    pub fn from_trips(net: &Network, demand: &DemandSpec, trips: &[Trip]) -> Result<Self> {
        if trips.is_empty() {
            return Err(CoreError::InvalidTrip("no trips for OD".into()));
        }
        let mut counts = vec![0u64; net.n_links()];
        for trip in trips {
            let nodes = trip.node_sequence(net)?;
            if nodes[0] != demand.origin || *nodes.last().unwrap() != demand.destination {
                return Err(CoreError::InvalidTrip(format!(
                    "trip {}->{} does not match demand {}->{}",
                    trip.origin,
                    trip.destination,
                    net.node_id(demand.origin),
                    net.node_id(demand.destination)
                )));
            }
            for id in &trip.links {
                counts[net.link_idx(id)?] += 1;
            }
        }
        let n = trips.len() as f64;
        Ok(EmpiricalFlow {
            demand: *demand,
            flows: counts.iter().map(|&c| c as f64 / n).collect(),
            trip_count: trips.len() as u64,
        })
    }

    /// Wraps an already-normalized flow vector (for example a model solve).
    pub fn from_flows(demand: DemandSpec, flows: Vec<f64>, trip_count: u64) -> Self {
        EmpiricalFlow {
            demand,
            flows,
            trip_count,
        }
    }

    /// True when every link with positive flow was traversed a whole number
    /// of times by every trip, i.e. all trips share one link set and carry
    /// no within-OD variation.
    pub fn is_uniform(&self) -> bool {
        self.flows
            .iter()
            .all(|&x| x == 0.0 || ((x - x.round()).abs() <= 1e-12 && x.round() >= 1.0))
    }
}

/// How active links are selected into `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionPolicy {
    /// Every link with strictly positive flow.
    #[default]
    Positive,
    /// Links with at least this many traversals, guarding against sampling
    /// noise from small counts.
    MinTraversals(u64),
}

/// Ordered indices of the selected active links for one OD.
pub fn build_selection(
    net: &Network,
    x: &EmpiricalFlow,
    policy: SelectionPolicy,
) -> Result<Vec<usize>> {
    let selected: Vec<usize> = match policy {
        SelectionPolicy::Positive => (0..x.flows.len()).filter(|&e| x.flows[e] > 0.0).collect(),
        SelectionPolicy::MinTraversals(k) => (0..x.flows.len())
            .filter(|&e| x.flows[e] > 0.0)
            .filter(|&e| x.flows[e] * x.trip_count as f64 >= k as f64 - 1e-9)
            .collect(),
    };
    if selected.is_empty() {
        return Err(CoreError::EmptySelection {
            origin: net.node_id(x.demand.origin).to_owned(),
            destination: net.node_id(x.demand.destination).to_owned(),
        });
    }
    Ok(selected)
}

/// Reduced incidence `BA'` for the selected links: one row per selected
/// link with `-1` at its tail and `+1` at its head.
pub fn reduced_incidence(net: &Network, selection: &[usize]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(selection.len(), net.n_nodes());
    for (i, &e) in selection.iter().enumerate() {
        let link = net.link(e);
        m[(i, link.tail)] = -1.0;
        m[(i, link.head)] = 1.0;
    }
    m
}

/// Moore-Penrose inverse of the reduced incidence `BA'`.
pub fn reduced_pseudoinverse(net: &Network, selection: &[usize]) -> DMatrix<f64> {
    pseudoinverse(&reduced_incidence(net, selection))
}

/// SVD pseudoinverse with the cutoff `sigma <= sigma_max * max(m,n) * eps`.
pub fn pseudoinverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = smax * rows.max(cols) as f64 * f64::EPSILON;
    let mut inv = DMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            let col = v_t.row(k).transpose() / s;
            let row = u.column(k).transpose();
            inv += col * row;
        }
    }
    inv
}

/// One transformed observation.
#[derive(Debug, Clone)]
pub struct RegressionRow {
    /// OD label (`origin->destination`); doubles as the cluster key.
    pub od: String,
    pub y: f64,
    pub w: Vec<f64>,
}

/// Stacked transformed observations across ODs.
#[derive(Debug, Clone, Default)]
pub struct RegressionSystem {
    pub feature_names: Vec<String>,
    pub rows: Vec<RegressionRow>,
}

impl RegressionSystem {
    pub fn n_obs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn design(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.rows.len();
        let p = self.feature_names.len();
        let mut w = DMatrix::zeros(n, p);
        let mut y = DVector::zeros(n);
        for (i, row) in self.rows.iter().enumerate() {
            y[i] = row.y;
            for (j, &v) in row.w.iter().enumerate() {
                w[(i, j)] = v;
            }
        }
        (w, y)
    }
}

/// Builds the transformed rows for one OD from its empirical flows, the
/// selection `B`, and the pseudoinverse `C` of `BA'`.
pub fn build_regression_rows(
    net: &Network,
    z: &FeatureMatrix,
    x: &EmpiricalFlow,
    selection: &[usize],
    c: &DMatrix<f64>,
    pert: Perturbation,
) -> Result<Vec<RegressionRow>> {
    let nb = selection.len();
    let p = z.n_features();
    if c.shape() != (net.n_nodes(), nb) {
        return Err(CoreError::DimensionMismatch {
            what: "pseudoinverse",
            expected: net.n_nodes() * nb,
            got: c.shape().0 * c.shape().1,
        });
    }
    if z.rows.len() != net.n_links() {
        return Err(CoreError::DimensionMismatch {
            what: "feature matrix",
            expected: net.n_links(),
            got: z.rows.len(),
        });
    }

    let ba_t = reduced_incidence(net, selection);
    let m = DMatrix::identity(nb, nb) - &ba_t * c;

    let mut lf = DVector::zeros(nb);
    let mut lz = DMatrix::zeros(nb, p);
    for (i, &e) in selection.iter().enumerate() {
        let link = net.link(e);
        let flow = x.flows[e].max(0.0);
        lf[i] = link.length_km * pert.prime(flow)?;
        for j in 0..p {
            lz[(i, j)] = link.length_km * z.rows[e][j];
        }
    }
    let y = &m * lf;
    let w = &m * lz;

    let od = format!(
        "{}->{}",
        net.node_id(x.demand.origin),
        net.node_id(x.demand.destination)
    );
    Ok((0..nb)
        .map(|i| RegressionRow {
            od: od.clone(),
            y: y[i],
            w: (0..p).map(|j| w[(i, j)]).collect(),
        })
        .collect())
}

/// Covariance estimator for the OLS fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovKind {
    /// Heteroscedasticity-consistent sandwich with the `n/(n-p)` correction.
    #[default]
    Hc1,
    /// Cluster-robust by OD with the CR1 small-sample factor.
    ClusterByOd,
}

/// OLS estimates with robust covariance.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub feature_names: Vec<String>,
    pub beta: Vec<f64>,
    pub robust_se: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    /// `None` when the dependent variable is constant (R² undefined).
    pub adj_r2: Option<f64>,
    pub n_obs: usize,
}

/// Ordinary least squares with robust standard errors.
pub fn ols_fit(sys: &RegressionSystem, cov_kind: CovKind) -> Result<FitResult> {
    let n = sys.n_obs();
    let p = sys.n_features();
    if n < p {
        return Err(CoreError::InsufficientObservations { n_obs: n, params: p });
    }
    let (w, y) = sys.design();

    let svd = w.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    // An (almost) zero design identifies nothing; this happens when every
    // feature's length-weighted column is a node-potential difference on
    // each active set (equal route totals), which the transformation
    // annihilates.
    if smax <= 1e-12 {
        return Err(CoreError::RankDeficient { rank: 0, cols: p });
    }
    let cutoff = smax * n.max(p) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < p {
        return Err(CoreError::RankDeficient { rank, cols: p });
    }

    let v_t = svd.v_t.as_ref().expect("svd v_t");
    let u = svd.u.as_ref().expect("svd u");
    let mut beta = DVector::zeros(p);
    let mut xtx_inv = DMatrix::zeros(p, p);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            let vk = v_t.row(k).transpose();
            beta += &vk * (u.column(k).dot(&y) / s);
            xtx_inv += &vk * vk.transpose() / (s * s);
        }
    }

    let resid = &y - &w * &beta;
    let cov = robust_covariance(&w, &resid, &xtx_inv, sys, cov_kind);
    let robust_se: Vec<f64> = (0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();

    let mean = y.sum() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sse: f64 = resid.iter().map(|r| r * r).sum();
    let adj_r2 = if sst <= f64::EPSILON * n as f64 {
        None
    } else {
        let r2 = 1.0 - sse / sst;
        Some(1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64))
    };

    Ok(FitResult {
        feature_names: sys.feature_names.clone(),
        beta: beta.iter().copied().collect(),
        robust_se,
        cov: (0..p)
            .map(|i| (0..p).map(|j| cov[(i, j)]).collect())
            .collect(),
        adj_r2,
        n_obs: n,
    })
}

fn robust_covariance(
    w: &DMatrix<f64>,
    resid: &DVector<f64>,
    xtx_inv: &DMatrix<f64>,
    sys: &RegressionSystem,
    kind: CovKind,
) -> DMatrix<f64> {
    let (n, p) = w.shape();
    let meat = match kind {
        CovKind::Hc1 => {
            let mut meat = DMatrix::zeros(p, p);
            for i in 0..n {
                let wi = w.row(i).transpose();
                meat += &wi * wi.transpose() * (resid[i] * resid[i]);
            }
            meat * (n as f64 / (n as f64 - p as f64).max(1.0))
        }
        CovKind::ClusterByOd => {
            // Rows arrive grouped by OD, so consecutive runs form clusters.
            let mut groups: Vec<(&str, DVector<f64>)> = Vec::new();
            for (i, row) in sys.rows.iter().enumerate() {
                let score = w.row(i).transpose() * resid[i];
                match groups.last_mut() {
                    Some((od, acc)) if *od == row.od => *acc += score,
                    _ => groups.push((row.od.as_str(), score)),
                }
            }
            let g = groups.len() as f64;
            let mut meat = DMatrix::zeros(p, p);
            for (_, s) in &groups {
                meat += s * s.transpose();
            }
            let correction = if g > 1.0 {
                (g / (g - 1.0)) * ((n as f64 - 1.0) / (n as f64 - p as f64).max(1.0))
            } else {
                1.0
            };
            meat * correction
        }
    };
    let cov = xtx_inv * meat * xtx_inv;
    (&cov + cov.transpose()) * 0.5
}

/// Per-OD accounting emitted alongside a fit.
#[derive(Debug, Clone, Serialize)]
pub struct OdDiagnostic {
    pub od: String,
    pub n_trips: u64,
    pub n_selected: usize,
    pub n_rows: usize,
    pub pinv_ms: f64,
    pub skipped: Option<String>,
}

/// Estimation options.
#[derive(Debug, Clone, Default)]
pub struct EstimateOptions {
    pub policy: SelectionPolicy,
    pub cov: CovKind,
    /// Drop ODs whose trips all used identical links (no within-OD
    /// variation survives the transformation).
    pub drop_uniform_ods: bool,
}

/// Builds rows for one OD; the work per OD is independent, so callers may
/// fan this out across threads and stack results in OD order.
pub fn build_od_rows(
    net: &Network,
    z: &FeatureMatrix,
    x: &EmpiricalFlow,
    pert: Perturbation,
    policy: SelectionPolicy,
) -> Result<(Vec<RegressionRow>, OdDiagnostic)> {
    let od = format!(
        "{}->{}",
        net.node_id(x.demand.origin),
        net.node_id(x.demand.destination)
    );
    let selection = build_selection(net, x, policy)?;
    let started = Instant::now();
    let c = reduced_pseudoinverse(net, &selection);
    let pinv_ms = started.elapsed().as_secs_f64() * 1e3;
    let rows = build_regression_rows(net, z, x, &selection, &c, pert)?;
    let n_rows = rows.len();
    Ok((
        rows,
        OdDiagnostic {
            od,
            n_trips: x.trip_count,
            n_selected: selection.len(),
            n_rows,
            pinv_ms,
            skipped: None,
        },
    ))
}

/// Stacks transformed rows across ODs and fits by OLS.
pub fn estimate(
    net: &Network,
    z: &FeatureMatrix,
    flows: &[EmpiricalFlow],
    pert: Perturbation,
    opts: &EstimateOptions,
) -> Result<(FitResult, Vec<OdDiagnostic>)> {
    let mut sys = RegressionSystem {
        feature_names: z.names.clone(),
        rows: Vec::new(),
    };
    let mut diagnostics = Vec::with_capacity(flows.len());
    for x in flows {
        if opts.drop_uniform_ods && x.is_uniform() {
            diagnostics.push(OdDiagnostic {
                od: format!(
                    "{}->{}",
                    net.node_id(x.demand.origin),
                    net.node_id(x.demand.destination)
                ),
                n_trips: x.trip_count,
                n_selected: 0,
                n_rows: 0,
                pinv_ms: 0.0,
                skipped: Some("all trips share one link set".into()),
            });
            continue;
        }
        let (rows, diag) = build_od_rows(net, z, x, pert, opts.policy)?;
        sys.rows.extend(rows);
        diagnostics.push(diag);
    }
    if sys.rows.is_empty() {
        return Err(CoreError::InsufficientObservations {
            n_obs: 0,
            params: z.n_features(),
        });
    }
    let fit = ols_fit(&sys, opts.cov)?;
    Ok((fit, diagnostics))
}
