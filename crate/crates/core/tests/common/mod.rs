//! Shared fixtures for the integration and acceptance suites.

use purc_core::network::{FeatureMatrix, LinkInput, Network, UtilityRates};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Six-link reference network: a direct two-km link, a one-km approach
/// splitting into two parallel one-km links, a reverse link closing a
/// potential loop, and an expensive two-km direct link. With `beta = -1`
/// the utility rates are `(-1,-1,-1,-1,-1,-2)`.
pub fn toy_network() -> Network {
    toy_with(&[
        (2.0, 1.0),
        (1.0, 1.0),
        (1.0, 1.0),
        (1.0, 1.0),
        (1.0, 1.0),
        (2.0, 2.0),
    ])
}

/// Toy variant with the expensive link cheapened to a pace of 1.25, which
/// pulls it into use.
pub fn toy_network_modified() -> Network {
    toy_with(&[
        (2.0, 1.0),
        (1.0, 1.0),
        (1.0, 1.0),
        (1.0, 1.0),
        (1.0, 1.0),
        (2.0, 1.25),
    ])
}

/// Toy variant with the branch node moved: the approach pair shortens to
/// half a kilometre and the parallel links lengthen to 1.5 km.
pub fn toy_network_moved_node() -> Network {
    toy_with(&[
        (2.0, 1.0),
        (0.5, 1.0),
        (1.5, 1.0),
        (1.5, 1.0),
        (0.5, 1.0),
        (2.0, 2.0),
    ])
}

fn toy_with(len_pace: &[(f64, f64)]) -> Network {
    let topo = [
        ("1", "O", "D"),
        ("2", "O", "M"),
        ("3", "M", "D"),
        ("4", "M", "D"),
        ("5", "M", "O"),
        ("6", "O", "D"),
    ];
    let inputs = topo
        .iter()
        .zip(len_pace)
        .map(|(&(id, t, h), &(len, pace))| LinkInput {
            id: id.into(),
            tail: t.into(),
            head: h.into(),
            length_km: len,
            road_type: None,
            features: vec![pace],
        })
        .collect();
    Network::new(vec!["pace".into()], inputs).unwrap()
}

pub fn feature_matrix(net: &Network) -> FeatureMatrix {
    FeatureMatrix {
        names: net.feature_names().to_vec(),
        rows: net.links().iter().map(|l| l.features.clone()).collect(),
    }
}

pub fn utilities(net: &Network, beta: f64) -> UtilityRates {
    net.link_utilities(&[beta]).unwrap()
}

/// Rectangular grid with directed links in both directions between
/// orthogonal neighbours, heterogeneous lengths and paces.
pub fn grid_network(rows: usize, cols: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node = |r: usize, c: usize| format!("r{r}c{c}");
    let mut inputs = Vec::new();
    let mut add = |tail: String, head: String, rng: &mut ChaCha8Rng, inputs: &mut Vec<LinkInput>| {
        let id = format!("e{}", inputs.len());
        inputs.push(LinkInput {
            id,
            tail,
            head,
            length_km: rng.gen_range(0.4..2.0),
            road_type: None,
            features: vec![rng.gen_range(0.6..2.4)],
        });
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                add(node(r, c), node(r, c + 1), &mut rng, &mut inputs);
                add(node(r, c + 1), node(r, c), &mut rng, &mut inputs);
            }
            if r + 1 < rows {
                add(node(r, c), node(r + 1, c), &mut rng, &mut inputs);
                add(node(r + 1, c), node(r, c), &mut rng, &mut inputs);
            }
        }
    }
    Network::new(vec!["pace".into()], inputs).unwrap()
}

/// Distant OD pairs on a grid (Manhattan separation of at least a third of
/// the grid diameter), deterministic in the seed.
pub fn grid_ods(rows: usize, cols: usize, count: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_sep = (rows + cols) / 3;
    let mut ods = Vec::with_capacity(count);
    while ods.len() < count {
        let a = (rng.gen_range(0..rows), rng.gen_range(0..cols));
        let b = (rng.gen_range(0..rows), rng.gen_range(0..cols));
        let sep = a.0.abs_diff(b.0) + a.1.abs_diff(b.1);
        if sep >= min_sep {
            ods.push((format!("r{}c{}", a.0, a.1), format!("r{}c{}", b.0, b.1)));
        }
    }
    ods
}

/// Random connected network: a guaranteed origin-destination chain plus
/// random chords, with heterogeneous lengths and paces.
pub fn random_network(rng: &mut ChaCha8Rng, n_nodes: usize, extra_links: usize) -> Network {
    let mut inputs = Vec::new();
    for i in 0..n_nodes - 1 {
        inputs.push(LinkInput {
            id: format!("p{i}"),
            tail: format!("n{i}"),
            head: format!("n{}", i + 1),
            length_km: rng.gen_range(0.3..3.0),
            road_type: None,
            features: vec![rng.gen_range(0.5..2.5)],
        });
    }
    for k in 0..extra_links {
        let a = rng.gen_range(0..n_nodes);
        let mut b = rng.gen_range(0..n_nodes);
        if a == b {
            b = (b + 1) % n_nodes;
        }
        inputs.push(LinkInput {
            id: format!("x{k}"),
            tail: format!("n{a}"),
            head: format!("n{b}"),
            length_km: rng.gen_range(0.3..3.0),
            road_type: None,
            features: vec![rng.gen_range(0.5..2.5)],
        });
    }
    Network::new(vec!["pace".into()], inputs).unwrap()
}
