//! Raw little-endian `f64` dumps with a JSON sidecar.
//!
//! Values are row-major over the spatial axes followed by the velocity axes,
//! which is the in-memory layout of [`PhaseField`]. Spatial fields use
//! `n_v = 0`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{PhaseField, TorusGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub dimension: usize,
    pub n_x: usize,
    pub n_v: usize,
    pub v_max: f64,
    pub time: f64,
    pub field_name: String,
}

impl SnapshotMeta {
    pub fn value_count(&self) -> usize {
        let d = self.dimension as u32;
        let velocity = if self.n_v == 0 { 1 } else { self.n_v.pow(d) };
        self.n_x.pow(d) * velocity
    }
}

fn paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{stem}.bin")), dir.join(format!("{stem}.json")))
}

pub fn write(dir: &Path, stem: &str, meta: &SnapshotMeta, values: &[f64]) -> Result<()> {
    if values.len() != meta.value_count() {
        return Err(Error::GridMismatch(format!(
            "{} values for a snapshot of {} entries",
            values.len(),
            meta.value_count()
        )));
    }
    let (bin, json) = paths(dir, stem);
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(bin, bytes)?;
    let text = serde_json::to_string_pretty(meta).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(json, text)?;
    Ok(())
}

pub fn read(dir: &Path, stem: &str) -> Result<(SnapshotMeta, Vec<f64>)> {
    let (bin, json) = paths(dir, stem);
    let meta: SnapshotMeta =
        serde_json::from_str(&fs::read_to_string(json)?).map_err(|e| Error::Config(e.to_string()))?;
    let bytes = fs::read(bin)?;
    if bytes.len() != 8 * meta.value_count() {
        return Err(Error::GridMismatch(format!(
            "snapshot holds {} bytes, sidecar implies {}",
            bytes.len(),
            8 * meta.value_count()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((meta, values))
}

pub fn write_phase(dir: &Path, stem: &str, f: &PhaseField) -> Result<()> {
    let meta = SnapshotMeta {
        dimension: f.x.dim(),
        n_x: f.x.n(),
        n_v: f.v.n(),
        v_max: f.v.v_max(),
        time: f.time,
        field_name: "f".into(),
    };
    write(dir, stem, &meta, &f.values)
}

pub fn write_spatial(dir: &Path, stem: &str, grid: TorusGrid, time: f64, name: &str, values: &[f64]) -> Result<()> {
    let meta = SnapshotMeta {
        dimension: grid.dim(),
        n_x: grid.n(),
        n_v: 0,
        v_max: 0.0,
        time,
        field_name: name.into(),
    };
    write(dir, stem, &meta, values)
}
