//! Observed or simulated trips and their JSON-lines serialization.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::network::Network;

/// An ordered journey through the network, stored with file-level ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trip {
    pub origin: String,
    pub destination: String,
    pub links: Vec<String>,
}

impl Trip {
    /// Resolves the link ids to dense indices.
    pub fn link_indices(&self, net: &Network) -> Result<Vec<usize>> {
        self.links.iter().map(|id| net.link_idx(id)).collect()
    }

    /// The visited node sequence, validating connectivity and endpoints.
    pub fn node_sequence(&self, net: &Network) -> Result<Vec<usize>> {
        if self.links.is_empty() {
            return Err(CoreError::InvalidTrip("trip has no links".into()));
        }
        let mut nodes = Vec::with_capacity(self.links.len() + 1);
        let mut prev_head: Option<usize> = None;
        for id in &self.links {
            let link = net.link(net.link_idx(id)?);
            if let Some(h) = prev_head {
                if h != link.tail {
                    return Err(CoreError::InvalidTrip(format!(
                        "links `{id}` does not continue from node `{}`",
                        net.node_id(h)
                    )));
                }
            } else {
                nodes.push(link.tail);
            }
            nodes.push(link.head);
            prev_head = Some(link.head);
        }
        let o = net.node_idx(&self.origin)?;
        let d = net.node_idx(&self.destination)?;
        if nodes[0] != o || *nodes.last().unwrap() != d {
            return Err(CoreError::InvalidTrip(format!(
                "trip endpoints {}->{} do not match link sequence",
                self.origin, self.destination
            )));
        }
        Ok(nodes)
    }
}

/// Reads trips from JSON lines (`{"origin":..,"destination":..,"links":[..]}`).
pub fn read_trips_jsonl<R: Read>(reader: R) -> Result<Vec<Trip>> {
    let mut trips = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trip: Trip = serde_json::from_str(&line).map_err(|e| CoreError::Parse {
            path: "<trips.jsonl>".into(),
            record: i + 1,
            message: e.to_string(),
        })?;
        trips.push(trip);
    }
    Ok(trips)
}

pub fn read_trips_path<P: AsRef<Path>>(path: P) -> Result<Vec<Trip>> {
    let file = std::fs::File::open(path)?;
    read_trips_jsonl(file)
}

/// Writes trips as JSON lines; the byte output is deterministic.
pub fn write_trips_jsonl<W: Write>(mut writer: W, trips: &[Trip]) -> Result<()> {
    for trip in trips {
        serde_json::to_writer(&mut writer, trip).map_err(|e| {
            CoreError::InvalidArgument(format!("trip serialization failed: {e}"))
        })?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
