//! Artifact writers and the per-run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use purc_core::{FlowSolution, Network, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Reproducibility record written next to every artifact set. Only
/// `created_unix_ms` varies between identical runs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    /// SHA-256 over the resolved arguments and the input file contents.
    pub config_hash: String,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub created_unix_ms: u128,
}

/// Accumulates the inputs that define a run and hashes them.
pub struct ManifestBuilder {
    command: String,
    hasher: Sha256,
    seed: Option<u64>,
    jobs: usize,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        ManifestBuilder {
            command: command.to_owned(),
            hasher,
            seed: None,
            jobs: 1,
        }
    }

    pub fn arg(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        self.hasher.update(key.as_bytes());
        self.hasher.update(value.to_string().as_bytes());
        self
    }

    pub fn file(mut self, path: &Path) -> Self {
        self.hasher.update(path.display().to_string().as_bytes());
        if let Ok(bytes) = std::fs::read(path) {
            self.hasher.update(&bytes);
        }
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs;
        self
    }

    pub fn write(self, out_dir: &Path) -> Result<()> {
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config_hash: format!("{:x}", self.hasher.finalize()),
            seed: self.seed,
            jobs: self.jobs,
            created_unix_ms: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
        };
        write_json(&out_dir.join("manifest.json"), &manifest)
    }
}

pub fn ensure_out_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)
        .map_err(|e| purc_core::CoreError::InvalidArgument(format!("serialize {e}")))?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// `link_id,flow,active` rows for one solution.
pub fn write_flows_csv(path: &Path, net: &Network, sol: &FlowSolution) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "link_id,flow,active")?;
    for (e, link) in net.links().iter().enumerate() {
        writeln!(w, "{},{},{}", link.id, sol.flows[e], sol.active[e] as u8)?;
    }
    Ok(())
}

/// Reads a `link_id,flow[,...]` CSV back into a dense per-link vector.
pub fn read_flows_csv(path: &Path, net: &Network) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| purc_core::CoreError::Parse {
            path: path.display().to_string(),
            record: 0,
            message: e.to_string(),
        })?;
    let mut flows = vec![0.0; net.n_links()];
    for (recno, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| purc_core::CoreError::Parse {
            path: path.display().to_string(),
            record: recno + 1,
            message: e.to_string(),
        })?;
        let e = net.link_idx(&record[0])?;
        flows[e] = record[1]
            .parse()
            .map_err(|_| purc_core::CoreError::Parse {
                path: path.display().to_string(),
                record: recno + 1,
                message: format!("bad flow `{}`", &record[1]),
            })?;
    }
    Ok(flows)
}
