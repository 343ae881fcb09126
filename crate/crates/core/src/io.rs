//! Field files: a JSON sidecar `<stem>.json` describing the grid and a raw
//! `<stem>.bin` of `N²` little-endian `f64` values in row-major order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::{FieldPair, SystemParams};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::kernel::KernelTable;
use crate::scalar::ScalarGroundState;
use crate::solver::{CoupledGroundState, StateRecord};

pub const DTYPE: &str = "float64-le";
pub const LAYOUT: &str = "row-major";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub dtype: String,
    pub layout: String,
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Writes `<stem>.json` and `<stem>.bin`.
pub fn save_field(field: &Field, stem: &Path) -> Result<()> {
    let spec = field.spec();
    let meta = FieldMeta {
        n: spec.n(),
        half_width: spec.half_width(),
        dtype: DTYPE.into(),
        layout: LAYOUT.into(),
    };
    write_json(&meta, &with_ext(stem, "json"))?;
    let bytes: Vec<u8> = field.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    let bin = with_ext(stem, "bin");
    std::fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))
}

pub fn load_field(stem: &Path) -> Result<Field> {
    let meta_path = with_ext(stem, "json");
    let meta: FieldMeta = read_json(&meta_path)?;
    if meta.dtype != DTYPE || meta.layout != LAYOUT {
        return Err(Error::InvalidArgument(format!(
            "{}: unsupported dtype/layout {}/{}",
            meta_path.display(),
            meta.dtype,
            meta.layout
        )));
    }
    let spec = GridSpec::new(meta.half_width, meta.n)?;
    let bin = with_ext(stem, "bin");
    let bytes = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if bytes.len() != 8 * spec.len() {
        return Err(Error::InvalidArgument(format!(
            "{}: expected {} bytes, found {}",
            bin.display(),
            8 * spec.len(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::from_values(spec, values)
}

/// Saves `u`, `v` and `state.json` into `dir`.
pub fn save_coupled(state: &CoupledGroundState, dir: &Path) -> Result<()> {
    save_field(state.pair.u(), &dir.join("u"))?;
    save_field(state.pair.v(), &dir.join("v"))?;
    write_json(&state.record(), &dir.join("state.json"))
}

/// Loads a stored coupled state; diagnostics are recomputed from the fields.
pub fn load_coupled(dir: &Path, table: &KernelTable) -> Result<(CoupledGroundState, StateRecord)> {
    let record: StateRecord = read_json(&dir.join("state.json"))?;
    let pair = FieldPair::new(load_field(&dir.join("u"))?, load_field(&dir.join("v"))?)?;
    let state = CoupledGroundState::from_pair(pair, record.params, table)?;
    Ok((state, record))
}

/// Saves `<name>.json|.bin` for the field and `<name>.state.json` for the record.
pub fn save_scalar(state: &ScalarGroundState, dir: &Path, name: &str) -> Result<()> {
    save_field(&state.u, &dir.join(name))?;
    write_json(&state.record(), &dir.join(format!("{name}.state.json")))
}

pub fn load_scalar(dir: &Path, name: &str, table: &KernelTable) -> Result<ScalarGroundState> {
    let record: crate::scalar::ScalarRecord = read_json(&dir.join(format!("{name}.state.json")))?;
    SystemParams::scalar(record.lambda, record.mu)?;
    let u = load_field(&dir.join(name))?;
    let mut state = ScalarGroundState::from_field(u, record.lambda, record.mu, table)?;
    state.iters = record.iters;
    Ok(state)
}
