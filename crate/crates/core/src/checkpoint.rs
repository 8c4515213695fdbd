//! Checkpoint container.
//!
//! Pretty-printed JSON holding a format tag and version, the GNN dims, every
//! tensor as `{name, shape, data}` with `data` in row-major order, optional
//! optimizer moments, the iteration count, the master seed and an echo of the
//! configuration that produced it. Loading and re-saving a checkpoint yields
//! the same bytes.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::gnn::{AdamState, GnnDims, GnnParams, TENSOR_NAMES};
use crate::training::TrainState;
use crate::{Error, Result, VERSION};

pub const FORMAT: &str = "sarrm-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerRecord {
    pub kind: String,
    pub steps: u64,
    pub first_moment: Vec<TensorRecord>,
    pub second_moment: Vec<TensorRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub format_version: u32,
    pub tool_version: String,
    pub dims: GnnDims,
    pub feature_sizes: [usize; 4],
    pub tensors: Vec<TensorRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerRecord>,
    pub iterations_done: usize,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
}

fn records(params: &GnnParams) -> Vec<TensorRecord> {
    TENSOR_NAMES
        .iter()
        .zip(params.tensors())
        .map(|(name, t)| TensorRecord {
            name: name.to_string(),
            shape: [t.nrows(), t.ncols()],
            data: t.transpose().as_slice().to_vec(),
        })
        .collect()
}

fn params_from(dims: GnnDims, records: &[TensorRecord], path: &Path) -> Result<GnnParams> {
    let mut params = GnnParams::zeros(dims);
    if records.len() != TENSOR_NAMES.len() {
        return Err(Error::format(path, "wrong number of tensors"));
    }
    for ((rec, name), slot) in records.iter().zip(TENSOR_NAMES).zip(params.tensors_mut()) {
        let [r, c] = rec.shape;
        if rec.name != name || (r, c) != slot.shape() || rec.data.len() != r * c {
            return Err(Error::format(path, format!("tensor {} has unexpected name or shape", rec.name)));
        }
        if rec.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(path, format!("tensor {} has non-finite entries", rec.name)));
        }
        *slot = DMatrix::from_row_slice(r, c, &rec.data);
    }
    Ok(params)
}

impl Checkpoint {
    pub fn from_state(state: &TrainState, seed: u64, config_hash: &str, config: serde_json::Value) -> Self {
        let dims = state.params.dims;
        Self {
            format: FORMAT.into(),
            format_version: FORMAT_VERSION,
            tool_version: VERSION.into(),
            dims,
            feature_sizes: dims.feature_sizes(),
            tensors: records(&state.params),
            optimizer: state.adam.as_ref().map(|a| OptimizerRecord {
                kind: "adam".into(),
                steps: a.steps,
                first_moment: records(&a.first),
                second_moment: records(&a.second),
            }),
            iterations_done: state.iterations_done,
            seed,
            config_hash: config_hash.into(),
            config,
        }
    }

    pub fn to_state(&self, path: &Path) -> Result<TrainState> {
        let adam = match &self.optimizer {
            Some(o) => Some(AdamState {
                first: params_from(self.dims, &o.first_moment, path)?,
                second: params_from(self.dims, &o.second_moment, path)?,
                steps: o.steps,
            }),
            None => None,
        };
        Ok(TrainState {
            params: params_from(self.dims, &self.tensors, path)?,
            adam,
            iterations_done: self.iterations_done,
        })
    }

    pub fn params(&self) -> Result<GnnParams> {
        params_from(self.dims, &self.tensors, Path::new("<checkpoint>"))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::format(path, e))?;
        if ck.format != FORMAT || ck.format_version != FORMAT_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported checkpoint {} v{}", ck.format, ck.format_version),
            ));
        }
        if ck.feature_sizes != ck.dims.feature_sizes() {
            return Err(Error::format(path, "feature sizes disagree with dims"));
        }
        ck.to_state(path)?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}
