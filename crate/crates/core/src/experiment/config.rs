//! Experiment configuration.
//!
//! A config is one JSON document. Every field has a default and unknown keys
//! are rejected. [`ExperimentConfig::resolve`] fills in everything that
//! depends on the data (measurement count, operator seed, layer widths), and
//! the resolved form is what reports echo.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dbcs::{Lambda, Method, TrainOptions};
use crate::error::{Error, Result};
use crate::operators::{measurement_count, OperatorKind, DEFAULT_SPARSE_DENSITY};
use crate::rng::{derive_seed, streams};
use crate::solvers::SolverOptions;

/// Environment variable that overrides `seed`.
pub const SEED_ENV: &str = "DBCS_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataSpec,
    pub operator: OperatorSpec,
    pub model: ModelSpec,
    pub eval: EvalSpec,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            data: DataSpec::default(),
            operator: OperatorSpec::default(),
            model: ModelSpec::default(),
            eval: EvalSpec::default(),
            output_dir: PathBuf::from("dbcs-out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Synthetic(SyntheticSpec),
    /// A DBCS1 signal matrix (one sample per column) with optional labels, a
    /// JSON array of class indices.
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<PathBuf>,
    },
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::Synthetic(SyntheticSpec::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum SyntheticSpec {
    PlantedFactorization(PlantedSpec),
    LabeledMixture(MixtureSpec),
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec::PlantedFactorization(PlantedSpec::default())
    }
}

/// `X = D*1 ⋯ D*M Z* + noise` with unit-column Gaussian `D*i` and exactly
/// `sparsity` standard-normal nonzeros per column of `Z*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantedSpec {
    /// `[n, k1, …, kM]`.
    pub sizes: Vec<usize>,
    pub sparsity: usize,
    pub noise: f64,
    pub samples: usize,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            sizes: vec![64, 48, 32],
            sparsity: 5,
            noise: 0.0,
            samples: 400,
        }
    }
}

/// `C` Gaussian class means `mean_scale · N(0, I)`; samples are a mean plus
/// `noise · N(0, I)`. Sample `j` belongs to class `j mod C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixtureSpec {
    pub classes: usize,
    pub dim: usize,
    pub mean_scale: f64,
    pub noise: f64,
    pub samples_per_class: usize,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec {
            classes: 4,
            dim: 64,
            mean_scale: 1.0,
            noise: 0.2,
            samples_per_class: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    /// Measurement ratio used when `m` is not given: `m = ⌈ratio · n⌉`.
    pub ratio: f64,
    pub m: Option<usize>,
    pub density: Option<f64>,
    pub kept_rows: Option<Vec<usize>>,
    /// Defaults to a value derived from the experiment seed.
    pub seed: Option<u64>,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec {
            kind: OperatorKind::DenseGaussian,
            ratio: 0.25,
            m: None,
            density: None,
            kept_rows: None,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub method: Method,
    /// Dictionary widths `[k1, …, kM]`; the signal dimension is prepended.
    /// `bcs` and `dl` take exactly one width. Defaults to `[3n/4, n/2]` for
    /// `dbcs` and `[n]` otherwise.
    pub layers: Option<Vec<usize>>,
    /// Absolute λ. When unset, `lambda_scale · max |Gᵀ Y|` at initialization.
    pub lambda: Option<f64>,
    pub lambda_scale: f64,
    /// Ridge weight on the dictionary for `bcs`.
    pub mu: f64,
    pub sweeps: usize,
    pub sweep_tol: f64,
    pub ista: SolverOptions,
    pub cg: SolverOptions,
}

impl Default for ModelSpec {
    fn default() -> Self {
        let train = TrainOptions::default();
        ModelSpec {
            method: Method::Dbcs,
            layers: None,
            lambda: None,
            lambda_scale: 0.1,
            mu: 0.01,
            sweeps: train.sweeps,
            sweep_tol: train.sweep_tol,
            ista: train.ista,
            cg: train.cg,
        }
    }
}

impl ModelSpec {
    pub fn lambda_rule(&self) -> Lambda {
        match self.lambda {
            Some(v) => Lambda::Absolute(v),
            None => Lambda::DataScaled(self.lambda_scale),
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            sweeps: self.sweeps,
            sweep_tol: self.sweep_tol,
            ista: self.ista,
            cg: self.cg,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureProtocol {
    /// Fit on training measurements only, then encode test measurements with
    /// the dictionaries frozen.
    FrozenEncode,
    /// Fit on training and test measurements together.
    Transductive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSpec {
    pub train_fraction: f64,
    pub k: usize,
    pub protocol: FeatureProtocol,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            train_fraction: 0.5,
            k: 1,
            protocol: FeatureProtocol::FrozenEncode,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. Relative data paths are taken relative to the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let Some(base) = path.parent() {
            if let DataSpec::File { path: data, labels } = &mut cfg.data {
                if data.is_relative() {
                    *data = base.join(&*data);
                }
                if let Some(l) = labels {
                    if l.is_relative() {
                        *l = base.join(&*l);
                    }
                }
            }
        }
        Ok(cfg)
    }

    /// Applies `DBCS_SEED` if it is set.
    pub fn apply_env_overrides(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not a u64")))?;
        }
        Ok(())
    }

    /// Fills every data-dependent default for signals of dimension `n`.
    pub fn resolve(&self, n: usize) -> Result<ExperimentConfig> {
        let mut out = self.clone();
        let op = &mut out.operator;
        if !(op.ratio > 0.0 && op.ratio <= 1.0) {
            return Err(Error::Config(format!("operator ratio must lie in (0, 1], got {}", op.ratio)));
        }
        if op.kind == OperatorKind::Identity {
            op.m.get_or_insert(n);
        }
        if let Some(rows) = &op.kept_rows {
            op.m.get_or_insert(rows.len());
        }
        op.m.get_or_insert(measurement_count(n, op.ratio));
        op.seed.get_or_insert(derive_seed(self.seed, streams::OPERATOR));
        if op.kind == OperatorKind::SparseBinary {
            op.density.get_or_insert(DEFAULT_SPARSE_DENSITY);
        }

        let model = &mut out.model;
        let layers = model.layers.get_or_insert_with(|| match model.method {
            Method::Dbcs => vec![(3 * n / 4).max(1), (n / 2).max(1)],
            _ => vec![n],
        });
        if layers.is_empty() || layers.contains(&0) {
            return Err(Error::Config(format!("layers must be non-empty and positive, got {layers:?}")));
        }
        if matches!(model.method, Method::Bcs | Method::Dl) && layers.len() != 1 {
            return Err(Error::Config(format!(
                "method {} takes exactly one layer width, got {layers:?}",
                model.method.as_str()
            )));
        }
        if let Some(l) = model.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("lambda must be finite and >= 0, got {l}")));
            }
        }
        model
            .train_options()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(model.mu >= 0.0 && model.mu.is_finite()) {
            return Err(Error::Config(format!("mu must be finite and >= 0, got {}", model.mu)));
        }

        let ev = &out.eval;
        if !(ev.train_fraction > 0.0 && ev.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                ev.train_fraction
            )));
        }
        if ev.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        Ok(out)
    }
}
