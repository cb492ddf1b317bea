//! Directed network data model, link features, and file I/O.
//!
//! Node and link ids are arbitrary strings in files and are mapped to dense
//! `0..n` indices at load time; all numeric code works on the dense indices.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Input record for building a [`Network`].
#[derive(Debug, Clone)]
pub struct LinkInput {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub length_km: f64,
    pub road_type: Option<String>,
    pub features: Vec<f64>,
}

/// A directed link with its length, feature row, and optional road type.
#[derive(Debug, Clone)]
pub struct Link {
    pub id: String,
    /// Dense index of the tail (from) node.
    pub tail: usize,
    /// Dense index of the head (to) node.
    pub head: usize,
    /// Length in kilometres; strictly positive.
    pub length_km: f64,
    pub road_type: Option<String>,
    /// Feature row `z_e`; same length for every link in a network.
    pub features: Vec<f64>,
}

/// Immutable directed multigraph with per-link lengths and features.
///
/// Parallel links and opposite-direction link pairs are allowed; self-loops
/// are rejected. The structure is immutable after construction and safe to
/// share across threads.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<String>,
    links: Vec<Link>,
    feature_names: Vec<String>,
    node_index: HashMap<String, usize>,
    link_index: HashMap<String, usize>,
    out_links: Vec<Vec<usize>>,
    in_links: Vec<Vec<usize>>,
}

impl Network {
    /// Builds a network from link records, validating all invariants.
    pub fn new(feature_names: Vec<String>, inputs: Vec<LinkInput>) -> Result<Self> {
        let mut nodes: Vec<String> = Vec::new();
        let mut node_index: HashMap<String, usize> = HashMap::new();
        let mut link_index: HashMap<String, usize> = HashMap::new();
        let mut links: Vec<Link> = Vec::with_capacity(inputs.len());

        let intern = |id: &str, nodes: &mut Vec<String>, map: &mut HashMap<String, usize>| {
            if let Some(&i) = map.get(id) {
                i
            } else {
                let i = nodes.len();
                nodes.push(id.to_owned());
                map.insert(id.to_owned(), i);
                i
            }
        };

        for input in inputs {
            if input.tail == input.head {
                return Err(CoreError::Validation(format!(
                    "link `{}` is a self-loop at node `{}`",
                    input.id, input.tail
                )));
            }
            if !(input.length_km > 0.0) || !input.length_km.is_finite() {
                return Err(CoreError::Validation(format!(
                    "link `{}` has nonpositive length {}",
                    input.id, input.length_km
                )));
            }
            if input.features.len() != feature_names.len() {
                return Err(CoreError::Validation(format!(
                    "link `{}` has {} feature values, expected {}",
                    input.id,
                    input.features.len(),
                    feature_names.len()
                )));
            }
            if input.features.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::Validation(format!(
                    "link `{}` has a non-finite feature value",
                    input.id
                )));
            }
            let tail = intern(&input.tail, &mut nodes, &mut node_index);
            let head = intern(&input.head, &mut nodes, &mut node_index);
            let idx = links.len();
            if link_index.insert(input.id.clone(), idx).is_some() {
                return Err(CoreError::Validation(format!(
                    "duplicate link id `{}`",
                    input.id
                )));
            }
            links.push(Link {
                id: input.id,
                tail,
                head,
                length_km: input.length_km,
                road_type: input.road_type,
                features: input.features,
            });
        }

        let mut out_links = vec![Vec::new(); nodes.len()];
        let mut in_links = vec![Vec::new(); nodes.len()];
        for (e, link) in links.iter().enumerate() {
            out_links[link.tail].push(e);
            in_links[link.head].push(e);
        }

        Ok(Network {
            nodes,
            links,
            feature_names,
            node_index,
            link_index,
            out_links,
            in_links,
        })
    }

    /// Loads a network from `links.csv`
    /// (`link_id,tail,head,length_km,road_type,<feature columns...>`).
    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, &path.display().to_string())
    }

    /// Loads a network from CSV content; `source` is used in error messages.
    pub fn from_csv_reader<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| parse_err(source, 0, e.to_string()))?
            .clone();
        let fixed = ["link_id", "tail", "head", "length_km", "road_type"];
        if headers.len() < fixed.len() {
            return Err(parse_err(
                source,
                0,
                format!("expected header starting with {:?}", fixed.join(",")),
            ));
        }
        for (i, want) in fixed.iter().enumerate() {
            if &headers[i] != *want {
                return Err(parse_err(
                    source,
                    0,
                    format!("column {i} must be `{want}`, found `{}`", &headers[i]),
                ));
            }
        }
        let feature_names: Vec<String> =
            headers.iter().skip(fixed.len()).map(str::to_owned).collect();

        let mut inputs = Vec::new();
        for (recno, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| parse_err(source, recno + 1, e.to_string()))?;
            if record.len() != headers.len() {
                return Err(parse_err(
                    source,
                    recno + 1,
                    format!("expected {} fields, found {}", headers.len(), record.len()),
                ));
            }
            let length_km: f64 = record[3]
                .parse()
                .map_err(|_| parse_err(source, recno + 1, format!("bad length `{}`", &record[3])))?;
            let road_type = if record[4].is_empty() {
                None
            } else {
                Some(record[4].to_owned())
            };
            let mut features = Vec::with_capacity(feature_names.len());
            for (k, raw) in record.iter().skip(fixed.len()).enumerate() {
                let v: f64 = raw.parse().map_err(|_| {
                    parse_err(
                        source,
                        recno + 1,
                        format!("bad value `{raw}` for feature `{}`", feature_names[k]),
                    )
                })?;
                features.push(v);
            }
            inputs.push(LinkInput {
                id: record[0].to_owned(),
                tail: record[1].to_owned(),
                head: record[2].to_owned(),
                length_km,
                road_type,
                features,
            });
        }
        Self::new(feature_names, inputs)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, e: usize) -> &Link {
        &self.links[e]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn node_id(&self, v: usize) -> &str {
        &self.nodes[v]
    }

    pub fn node_idx(&self, id: &str) -> Result<usize> {
        self.node_index
            .get(id)
            .copied()
            .ok_or_else(|| CoreError::UnknownNode(id.to_owned()))
    }

    pub fn link_idx(&self, id: &str) -> Result<usize> {
        self.link_index
            .get(id)
            .copied()
            .ok_or_else(|| CoreError::UnknownLink(id.to_owned()))
    }

    /// Links leaving node `v`.
    pub fn out_links(&self, v: usize) -> &[usize] {
        &self.out_links[v]
    }

    /// Links entering node `v`.
    pub fn in_links(&self, v: usize) -> &[usize] {
        &self.in_links[v]
    }

    /// Link lengths as a dense vector.
    pub fn lengths(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.length_km).collect()
    }

    /// Node-by-link incidence matrix: `-1` where the link leaves the node,
    /// `+1` where it enters.
    pub fn incidence_matrix(&self) -> SparseIncidence {
        let mut triplets = Vec::with_capacity(2 * self.links.len());
        for (e, link) in self.links.iter().enumerate() {
            triplets.push((link.tail, e, -1.0));
            triplets.push((link.head, e, 1.0));
        }
        SparseIncidence {
            n_rows: self.nodes.len(),
            n_cols: self.links.len(),
            triplets,
        }
    }

    /// Unit-demand vector: `-1` at the origin, `+1` at the destination.
    pub fn demand_vector(&self, demand: &DemandSpec) -> Vec<f64> {
        let mut b = vec![0.0; self.nodes.len()];
        b[demand.origin] = -1.0;
        b[demand.destination] = 1.0;
        b
    }

    /// Net flow divergence `A x` for a per-link flow vector.
    pub fn divergence(&self, flows: &[f64]) -> Vec<f64> {
        let mut div = vec![0.0; self.nodes.len()];
        for (e, link) in self.links.iter().enumerate() {
            div[link.tail] -= flows[e];
            div[link.head] += flows[e];
        }
        div
    }

    /// Utility rates `u = z beta` from the network's raw feature columns.
    ///
    /// Fails if any resulting rate is nonnegative, which signals a parameter
    /// vector outside the model's domain.
    pub fn link_utilities(&self, beta: &[f64]) -> Result<UtilityRates> {
        if beta.len() != self.feature_names.len() {
            return Err(CoreError::DimensionMismatch {
                what: "beta",
                expected: self.feature_names.len(),
                got: beta.len(),
            });
        }
        let mut rates = Vec::with_capacity(self.links.len());
        for link in &self.links {
            rates.push(dot(&link.features, beta));
        }
        UtilityRates::new(self, rates)
    }

    /// Intersection-penalty feature: `1/l_e` when the link's head node has at
    /// least two outgoing links, `0` otherwise. Dividing by length makes the
    /// length-weighted utility contribute a fixed per-link constant.
    pub fn outlink_feature(&self) -> Vec<f64> {
        self.links
            .iter()
            .map(|link| {
                if self.out_links[link.head].len() >= 2 {
                    1.0 / link.length_km
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Replaces one link by two links through a fresh node at the given
    /// fraction of its length. Both halves inherit the feature row and road
    /// type, so model predictions are unchanged on the rest of the network.
    pub fn split_link(&self, link_id: &str, fraction: f64) -> Result<Network> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "split fraction must lie strictly inside (0,1), got {fraction}"
            )));
        }
        let target = self.link_idx(link_id)?;
        let mut mid_id = format!("{link_id}__mid");
        while self.node_index.contains_key(&mid_id) {
            mid_id.push('_');
        }
        let mut inputs = Vec::with_capacity(self.links.len() + 1);
        for (e, link) in self.links.iter().enumerate() {
            if e == target {
                inputs.push(LinkInput {
                    id: format!("{link_id}__a"),
                    tail: self.nodes[link.tail].clone(),
                    head: mid_id.clone(),
                    length_km: link.length_km * fraction,
                    road_type: link.road_type.clone(),
                    features: link.features.clone(),
                });
                inputs.push(LinkInput {
                    id: format!("{link_id}__b"),
                    tail: mid_id.clone(),
                    head: self.nodes[link.head].clone(),
                    length_km: link.length_km * (1.0 - fraction),
                    road_type: link.road_type.clone(),
                    features: link.features.clone(),
                });
            } else {
                inputs.push(LinkInput {
                    id: link.id.clone(),
                    tail: self.nodes[link.tail].clone(),
                    head: self.nodes[link.head].clone(),
                    length_km: link.length_km,
                    road_type: link.road_type.clone(),
                    features: link.features.clone(),
                });
            }
        }
        Network::new(self.feature_names.clone(), inputs)
    }
}

/// Origin/destination pair resolved to dense node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DemandSpec {
    pub origin: usize,
    pub destination: usize,
}

impl DemandSpec {
    pub fn new(net: &Network, origin: &str, destination: &str) -> Result<Self> {
        let o = net.node_idx(origin)?;
        let d = net.node_idx(destination)?;
        if o == d {
            return Err(CoreError::InvalidArgument(format!(
                "origin and destination must differ (both `{origin}`)"
            )));
        }
        Ok(DemandSpec {
            origin: o,
            destination: d,
        })
    }

    pub fn from_indices(net: &Network, origin: usize, destination: usize) -> Result<Self> {
        if origin >= net.n_nodes() || destination >= net.n_nodes() {
            return Err(CoreError::UnknownNode(format!(
                "index {}",
                origin.max(destination)
            )));
        }
        if origin == destination {
            return Err(CoreError::InvalidArgument(
                "origin and destination must differ".into(),
            ));
        }
        Ok(DemandSpec {
            origin,
            destination,
        })
    }
}

/// Per-link utility rates (utils per km); all strictly negative.
#[derive(Debug, Clone)]
pub struct UtilityRates(Vec<f64>);

impl UtilityRates {
    /// Validates that every rate is strictly negative and finite.
    pub fn new(net: &Network, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != net.n_links() {
            return Err(CoreError::DimensionMismatch {
                what: "utility rates",
                expected: net.n_links(),
                got: rates.len(),
            });
        }
        for (e, &u) in rates.iter().enumerate() {
            if !(u < 0.0) || !u.is_finite() {
                return Err(CoreError::NonNegativeUtility {
                    link: net.link(e).id.clone(),
                    value: u,
                });
            }
        }
        Ok(UtilityRates(rates))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, e: usize) -> f64 {
        self.0[e]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Sparse node-by-link incidence matrix in triplet form.
#[derive(Debug, Clone)]
pub struct SparseIncidence {
    pub n_rows: usize,
    pub n_cols: usize,
    /// `(node, link, value)` entries; exactly two per link.
    pub triplets: Vec<(usize, usize, f64)>,
}

impl SparseIncidence {
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for &(r, c, v) in &self.triplets {
            m[(r, c)] += v;
        }
        m
    }
}

/// Declarative feature specification for a model: which CSV columns enter
/// `z`, whether to add the derived outlink constant, and which columns get
/// road-type interactions.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FeatureSpec {
    /// Raw CSV feature columns used as-is.
    #[serde(default)]
    pub columns: Vec<String>,
    /// Adds the derived `1{outlinks(head) >= 2}/l_e` column.
    #[serde(default)]
    pub outlink_constant: bool,
    /// For each listed column, replaces it by one interaction column per
    /// observed road type (column value where the link has that type, else 0).
    #[serde(default)]
    pub road_type_interactions: Vec<String>,
}

/// A named, per-link feature matrix (rows follow link indices).
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    /// `rows[e][k]` is feature `k` of link `e`.
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    /// Utility rates `u = z beta`; errors if any rate is nonnegative.
    pub fn utilities(&self, net: &Network, beta: &[f64]) -> Result<UtilityRates> {
        if beta.len() != self.names.len() {
            return Err(CoreError::DimensionMismatch {
                what: "beta",
                expected: self.names.len(),
                got: beta.len(),
            });
        }
        let rates = self.rows.iter().map(|row| dot(row, beta)).collect();
        UtilityRates::new(net, rates)
    }
}

/// Assembles the model feature matrix `z` from a [`FeatureSpec`].
pub fn assemble_features(net: &Network, spec: &FeatureSpec) -> Result<FeatureMatrix> {
    let col_idx = |name: &str| -> Result<usize> {
        net.feature_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| {
                CoreError::InvalidArgument(format!("unknown feature column `{name}`"))
            })
    };

    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();

    if spec.outlink_constant {
        names.push("outlink_constant".to_owned());
        columns.push(net.outlink_feature());
    }
    for name in &spec.columns {
        let k = col_idx(name)?;
        names.push(name.clone());
        columns.push(net.links().iter().map(|l| l.features[k]).collect());
    }
    if !spec.road_type_interactions.is_empty() {
        let mut types: Vec<String> = net
            .links()
            .iter()
            .filter_map(|l| l.road_type.clone())
            .collect();
        types.sort();
        types.dedup();
        if types.is_empty() {
            return Err(CoreError::InvalidArgument(
                "road-type interactions requested but no link has a road type".into(),
            ));
        }
        for name in &spec.road_type_interactions {
            let k = col_idx(name)?;
            for ty in &types {
                names.push(format!("{name}:{ty}"));
                columns.push(
                    net.links()
                        .iter()
                        .map(|l| {
                            if l.road_type.as_deref() == Some(ty.as_str()) {
                                l.features[k]
                            } else {
                                0.0
                            }
                        })
                        .collect(),
                );
            }
        }
    }
    if names.is_empty() {
        return Err(CoreError::InvalidArgument(
            "feature specification selects no columns".into(),
        ));
    }

    let rows = (0..net.n_links())
        .map(|e| columns.iter().map(|c| c[e]).collect())
        .collect();
    Ok(FeatureMatrix { names, rows })
}

/// One demand row of `demand.csv`.
#[derive(Debug, Clone)]
pub struct DemandCount {
    pub origin: String,
    pub destination: String,
    pub trip_count: u64,
}

/// Loads `demand.csv` (`origin,destination,trip_count`).
pub fn load_demands_csv<P: AsRef<Path>>(path: P) -> Result<Vec<DemandCount>> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(&source, 0, e.to_string()))?;
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(&source, 0, e.to_string()))?;
    if headers.len() < 3 || &headers[0] != "origin" || &headers[1] != "destination" {
        return Err(parse_err(
            &source,
            0,
            "expected header `origin,destination,trip_count`".into(),
        ));
    }
    let mut out = Vec::new();
    for (recno, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_err(&source, recno + 1, e.to_string()))?;
        let trip_count: u64 = record[2]
            .parse()
            .map_err(|_| parse_err(&source, recno + 1, format!("bad trip count `{}`", &record[2])))?;
        out.push(DemandCount {
            origin: record[0].to_owned(),
            destination: record[1].to_owned(),
            trip_count,
        });
    }
    Ok(out)
}

fn parse_err(path: &str, record: usize, message: String) -> CoreError {
    CoreError::Parse {
        path: path.to_owned(),
        record,
        message,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_csv() -> &'static str {
        "link_id,tail,head,length_km,road_type,pace\n\
         1,O,D,2,,1\n\
         2,O,M,1,,1\n\
         3,M,D,1,,1\n\
         4,M,D,1,,1\n\
         5,M,O,1,,1\n\
         6,O,D,2,,2\n"
    }

    #[test]
    fn loads_toy_network() {
        let net = Network::from_csv_reader(toy_csv().as_bytes(), "toy").unwrap();
        assert_eq!(net.n_nodes(), 3);
        assert_eq!(net.n_links(), 6);
        assert_eq!(net.feature_names(), ["pace"]);
        let l2 = net.link(net.link_idx("2").unwrap());
        assert_eq!(net.node_id(l2.tail), "O");
        assert_eq!(net.node_id(l2.head), "M");
    }

    #[test]
    fn single_link_network() {
        let csv = "link_id,tail,head,length_km,road_type,pace\na,A,B,1,,1\n";
        let net = Network::from_csv_reader(csv.as_bytes(), "mini").unwrap();
        assert_eq!((net.n_nodes(), net.n_links()), (2, 1));
        let inc = net.incidence_matrix().to_dense();
        assert_eq!(inc[(0, 0)], -1.0);
        assert_eq!(inc[(1, 0)], 1.0);
    }

    #[test]
    fn zero_length_rejected() {
        let csv = "link_id,tail,head,length_km,road_type,pace\na,A,B,0,,1\n";
        let err = Network::from_csv_reader(csv.as_bytes(), "bad").unwrap_err();
        assert!(matches!(err, CoreError::Validation(_)));
    }

    #[test]
    fn self_loop_rejected() {
        let csv = "link_id,tail,head,length_km,road_type,pace\na,A,A,1,,1\n";
        assert!(Network::from_csv_reader(csv.as_bytes(), "bad").is_err());
    }

    #[test]
    fn malformed_row_is_parse_error() {
        let csv = "link_id,tail,head,length_km,road_type,pace\na,A,B,abc,,1\n";
        let err = Network::from_csv_reader(csv.as_bytes(), "bad").unwrap_err();
        assert!(matches!(err, CoreError::Parse { .. }));
    }

    #[test]
    fn incidence_columns_sum_to_zero() {
        let net = Network::from_csv_reader(toy_csv().as_bytes(), "toy").unwrap();
        let dense = net.incidence_matrix().to_dense();
        for c in 0..net.n_links() {
            let col = dense.column(c);
            assert_eq!(col.sum(), 0.0);
            assert_eq!(col.iter().filter(|&&v| v == -1.0).count(), 1);
            assert_eq!(col.iter().filter(|&&v| v == 1.0).count(), 1);
        }
    }

    #[test]
    fn demand_vector_sums_to_zero() {
        let net = Network::from_csv_reader(toy_csv().as_bytes(), "toy").unwrap();
        let d = DemandSpec::new(&net, "O", "D").unwrap();
        let b = net.demand_vector(&d);
        assert_eq!(b[net.node_idx("O").unwrap()], -1.0);
        assert_eq!(b[net.node_idx("D").unwrap()], 1.0);
        assert_eq!(b.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn same_origin_destination_rejected() {
        let net = Network::from_csv_reader(toy_csv().as_bytes(), "toy").unwrap();
        assert!(DemandSpec::new(&net, "O", "O").is_err());
        assert!(DemandSpec::new(&net, "O", "nope").is_err());
    }

    #[test]
    fn utilities_from_pace() {
        let net = Network::from_csv_reader(toy_csv().as_bytes(), "toy").unwrap();
        let u = net.link_utilities(&[-1.0]).unwrap();
        assert_eq!(u.as_slice(), &[-1.0, -1.0, -1.0, -1.0, -1.0, -2.0]);
        assert!(net.link_utilities(&[1.0]).is_err());
        assert!(net.link_utilities(&[-1.0, 0.5]).is_err());
    }

    #[test]
    fn split_link_halves_lengths() {
        let net = Network::from_csv_reader(toy_csv().as_bytes(), "toy").unwrap();
        let split = net.split_link("1", 0.5).unwrap();
        assert_eq!(split.n_links(), 7);
        assert_eq!(split.n_nodes(), 4);
        let a = split.link(split.link_idx("1__a").unwrap());
        let b = split.link(split.link_idx("1__b").unwrap());
        assert_eq!(a.length_km, 1.0);
        assert_eq!(b.length_km, 1.0);
        assert_eq!(split.node_id(a.head), split.node_id(b.tail));
        assert!(net.split_link("1", 0.0).is_err());
        assert!(net.split_link("1", 1.0).is_err());
        assert!(net.split_link("zzz", 0.5).is_err());
    }

    #[test]
    fn outlink_feature_convention() {
        // b: head x has out-degree 2; c has length 2 into the same x.
        let csv = "link_id,tail,head,length_km,road_type,pace\n\
                   b,s,x,1,,1\n\
                   c,t,x,2,,1\n\
                   d,x,p,1,,1\n\
                   e,x,q,1,,1\n\
                   f,p,q,1,,1\n";
        let net = Network::from_csv_reader(csv.as_bytes(), "t").unwrap();
        let feat = net.outlink_feature();
        assert_eq!(feat[net.link_idx("b").unwrap()], 1.0);
        assert_eq!(feat[net.link_idx("c").unwrap()], 0.5);
        // head of d is p with a single outgoing link, head of e/f are sinks
        assert_eq!(feat[net.link_idx("d").unwrap()], 0.0);
        assert_eq!(feat[net.link_idx("e").unwrap()], 0.0);
        assert_eq!(feat[net.link_idx("f").unwrap()], 0.0);
    }

    #[test]
    fn feature_assembly_with_interactions() {
        let csv = "link_id,tail,head,length_km,road_type,pace,grade\n\
                   a,A,B,1,urban,1.5,0.1\n\
                   b,B,C,2,rural,2.5,0.2\n\
                   c,A,C,1,urban,3.5,0.3\n";
        let net = Network::from_csv_reader(csv.as_bytes(), "t").unwrap();
        let spec = FeatureSpec {
            columns: vec!["grade".into()],
            outlink_constant: true,
            road_type_interactions: vec!["pace".into()],
        };
        let z = assemble_features(&net, &spec).unwrap();
        assert_eq!(
            z.names,
            ["outlink_constant", "grade", "pace:rural", "pace:urban"]
        );
        // link a: head B has one outgoing link -> no constant
        assert_eq!(z.rows[0], vec![0.0, 0.1, 0.0, 1.5]);
        assert_eq!(z.rows[1], vec![0.0, 0.2, 2.5, 0.0]);
    }

    #[test]
    fn demand_csv_roundtrip() {
        let dir = std::env::temp_dir().join("purc_demand_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("demand.csv");
        std::fs::write(&path, "origin,destination,trip_count\nO,D,12\nA,B,3\n").unwrap();
        let demands = load_demands_csv(&path).unwrap();
        assert_eq!(demands.len(), 2);
        assert_eq!(demands[0].trip_count, 12);
        assert_eq!(demands[1].origin, "A");
    }

    proptest! {
        #[test]
        fn random_chain_demand_sums_to_zero(n in 2usize..40) {
            let inputs: Vec<LinkInput> = (0..n - 1)
                .map(|i| LinkInput {
                    id: format!("e{i}"),
                    tail: format!("n{i}"),
                    head: format!("n{}", i + 1),
                    length_km: 1.0,
                    road_type: None,
                    features: vec![1.0],
                })
                .collect();
            let net = Network::new(vec!["pace".into()], inputs).unwrap();
            let d = DemandSpec::new(&net, "n0", &format!("n{}", n - 1)).unwrap();
            let b = net.demand_vector(&d);
            prop_assert_eq!(b.iter().sum::<f64>(), 0.0);
            let dense = net.incidence_matrix().to_dense();
            for c in 0..net.n_links() {
                prop_assert_eq!(dense.column(c).sum(), 0.0);
            }
        }
    }
}
