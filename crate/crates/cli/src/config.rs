//! TOML run configurations: model specifications and simulation plans.

use std::path::Path;

use purc_core::network::FeatureSpec;
use purc_core::{CoreError, Network, Perturbation, Result};
use serde::{Deserialize, Serialize};

/// Declarative model specification (`model.toml`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default)]
    pub perturbation: Perturbation,
    /// Parameter vector aligned with the assembled feature columns; absent
    /// when the model is to be estimated.
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
    pub features: FeatureSpec,
}

impl ModelConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        toml::from_str(&raw).map_err(|e| CoreError::Parse {
            path: path.display().to_string(),
            record: 0,
            message: e.to_string(),
        })
    }

    /// Fallback model: the network's raw feature columns in file order.
    pub fn raw_columns(net: &Network) -> Self {
        ModelConfig {
            perturbation: Perturbation::default(),
            beta: None,
            features: FeatureSpec {
                columns: net.feature_names().to_vec(),
                outlink_constant: false,
                road_type_interactions: Vec::new(),
            },
        }
    }
}

/// One OD row of a simulation plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OdConfig {
    pub origin: String,
    pub destination: String,
}

/// Seeded simulation plan (`plan.toml`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanConfig {
    pub seed: u64,
    pub trips_per_od: usize,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub perturbation: Perturbation,
    pub features: FeatureSpec,
    pub od: Vec<OdConfig>,
}

impl PlanConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        toml::from_str(&raw).map_err(|e| CoreError::Parse {
            path: path.display().to_string(),
            record: 0,
            message: e.to_string(),
        })
    }
}

/// Parses a comma-separated float list (`-1.5,0.2`).
pub fn parse_float_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CoreError::InvalidArgument(format!("bad number `{s}`")))
        })
        .collect()
}

/// Parses an `origin,destination` pair.
pub fn parse_od(raw: &str) -> Result<(String, String)> {
    let mut parts = raw.splitn(2, ',');
    match (parts.next(), parts.next()) {
        (Some(o), Some(d)) if !o.trim().is_empty() && !d.trim().is_empty() => {
            Ok((o.trim().to_owned(), d.trim().to_owned()))
        }
        _ => Err(CoreError::InvalidArgument(format!(
            "expected `origin,destination`, got `{raw}`"
        ))),
    }
}
