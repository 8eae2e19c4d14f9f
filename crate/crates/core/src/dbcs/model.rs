//! Model directories: `D1.mat … DM.mat`, `Z.mat` and `manifest.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{mat_read, mat_write};

use super::{DbcsModel, FitSnapshot, LayerSpec};

pub const MANIFEST_FORMAT: &str = "dbcs-model/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub layer_sizes: Vec<usize>,
    pub lambda: f64,
    pub seed: u64,
    pub initial_objective: f64,
    pub objective_trace: Vec<f64>,
    pub rejected_sweeps: Vec<usize>,
    pub config: FitSnapshot,
}

pub fn save_model(model: &DbcsModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, d) in model.dictionaries.iter().enumerate() {
        mat_write(d, dir.join(format!("D{}.mat", i + 1)))?;
    }
    mat_write(&model.codes, dir.join("Z.mat"))?;
    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        layer_sizes: model.layer_spec.sizes().to_vec(),
        lambda: model.lambda,
        seed: model.config.seed,
        initial_objective: model.initial_objective,
        objective_trace: model.objective_trace.clone(),
        rejected_sweeps: model.rejected_sweeps.clone(),
        config: model.config.clone(),
    };
    write_json(&manifest, &dir.join("manifest.json"))
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<DbcsModel> {
    let dir = dir.as_ref();
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::InvalidArgument(format!(
            "unsupported model format {:?}",
            manifest.format
        )));
    }
    let layer_spec = LayerSpec::new(manifest.layer_sizes)?;
    let mut dictionaries = Vec::with_capacity(layer_spec.depth());
    for i in 0..layer_spec.depth() {
        let d = mat_read(dir.join(format!("D{}.mat", i + 1)))?;
        let expected = layer_spec.dictionary_shape(i);
        if d.shape() != expected {
            return Err(Error::InvalidArgument(format!(
                "D{} has shape {:?}, manifest says {:?}",
                i + 1,
                d.shape(),
                expected
            )));
        }
        dictionaries.push(d);
    }
    let codes = mat_read(dir.join("Z.mat"))?;
    if codes.rows() != layer_spec.code_dim() {
        return Err(Error::mismatch("Z rows vs code dim", layer_spec.code_dim(), codes.rows()));
    }
    Ok(DbcsModel {
        dictionaries,
        codes,
        lambda: manifest.lambda,
        layer_spec,
        initial_objective: manifest.initial_objective,
        objective_trace: manifest.objective_trace,
        rejected_sweeps: manifest.rejected_sweeps,
        config: manifest.config,
    })
}

/// Pretty JSON with a trailing newline.
pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })
}
