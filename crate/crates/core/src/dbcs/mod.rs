//! Multi-level dictionary learning from compressive measurements.
//!
//! The model is `Y ≈ A D1 D2 ⋯ DM Z` with unit-norm dictionary columns and a
//! sparse code `Z`. Training minimizes
//!
//! ```text
//! ‖Y − A D1 ⋯ DM Z‖²_F + λ‖Z‖₁
//! ```
//!
//! by alternating over the blocks `D1, …, DM, Z`. Each dictionary block is a
//! sandwiched least-squares problem solved by conjugate gradient; the code
//! block is a lasso problem solved by ISTA. After each sweep the dictionary
//! columns are rescaled to unit norm and the scales are pushed into the next
//! factor downstream, so the product `D1 ⋯ DM Z` is unchanged.
//!
//! Single-layer blind compressed sensing ([`bcs_fit`], ridge penalty instead of
//! normalization) and plain dictionary learning ([`dl_fit`], `A = I`) share the
//! same alternating engine.

mod model;
mod train;

pub use model::{load_model, save_model, Manifest, MANIFEST_FORMAT};
pub(crate) use model::{read_json, write_json};
pub use train::{bcs_fit, dbcs_fit, dl_fit, encode, normalize_with_compensation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_map::LinearMap;
use crate::matrix::DenseMatrix;
use crate::operators::{MeasurementOperator, OperatorDescriptor};
use crate::solvers::SolverOptions;

/// Layer widths `[n, k1, …, kM]`; dictionary `Di` is `sizes[i−1] × sizes[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LayerSpec {
    sizes: Vec<usize>,
}

impl LayerSpec {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "layer spec needs at least [n, k1], got {sizes:?}"
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("layer sizes must be >= 1, got {sizes:?}")));
        }
        Ok(LayerSpec { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of dictionary layers M.
    pub fn depth(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn signal_dim(&self) -> usize {
        self.sizes[0]
    }

    /// Code dimension kM.
    pub fn code_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn dictionary_shape(&self, layer: usize) -> (usize, usize) {
        (self.sizes[layer], self.sizes[layer + 1])
    }
}

/// How λ is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum Lambda {
    Absolute(f64),
    /// `scale · max |Gᵀ Y|` with `G = A D1 ⋯ DM` at initialization.
    DataScaled(f64),
}

impl Default for Lambda {
    fn default() -> Self {
        Lambda::DataScaled(0.1)
    }
}

impl Lambda {
    fn validate(&self) -> Result<()> {
        let v = match self {
            Lambda::Absolute(v) | Lambda::DataScaled(v) => *v,
        };
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {v}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    /// Maximum number of alternating sweeps.
    pub sweeps: usize,
    /// Stop when the relative change of the sweep objective falls below this.
    pub sweep_tol: f64,
    pub ista: SolverOptions,
    pub cg: SolverOptions,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            sweeps: 30,
            sweep_tol: 1e-6,
            ista: SolverOptions::ista_default(),
            cg: SolverOptions::cg_default(),
        }
    }
}

impl TrainOptions {
    pub fn with_sweeps(mut self, sweeps: usize) -> Self {
        self.sweeps = sweeps;
        self
    }

    pub fn with_sweep_tol(mut self, tol: f64) -> Self {
        self.sweep_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::InvalidArgument("sweeps must be >= 1".into()));
        }
        if !(self.sweep_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("sweep_tol must be >= 0, got {}", self.sweep_tol)));
        }
        self.ista.validate()?;
        self.cg.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dbcs,
    Bcs,
    Dl,
    CsIsta,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dbcs => "dbcs",
            Method::Bcs => "bcs",
            Method::Dl => "dl",
            Method::CsIsta => "cs_ista",
        }
    }
}

/// Settings a model was trained with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSnapshot {
    pub method: Method,
    pub seed: u64,
    pub stream: u64,
    pub lambda_rule: Lambda,
    /// Ridge weight μ on the dictionary (single-layer BCS only).
    pub mu: f64,
    pub options: TrainOptions,
    pub operator: OperatorDescriptor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DbcsModel {
    pub dictionaries: Vec<DenseMatrix>,
    pub codes: DenseMatrix,
    /// Resolved λ.
    pub lambda: f64,
    pub layer_spec: LayerSpec,
    /// Objective before the first sweep (`‖Y‖²_F` for a zero code).
    pub initial_objective: f64,
    /// Objective after each completed sweep.
    pub objective_trace: Vec<f64>,
    /// Sweeps (0-based) whose joint update raised the objective and were
    /// replaced by a code-only update.
    pub rejected_sweeps: Vec<usize>,
    pub config: FitSnapshot,
}

impl DbcsModel {
    pub fn depth(&self) -> usize {
        self.dictionaries.len()
    }

    /// `D1 ⋯ DM`.
    pub fn synthesis(&self) -> DenseMatrix {
        synthesis(&self.dictionaries)
    }

    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(self.initial_objective)
    }
}

/// `D1 ⋯ DM` evaluated left to right.
pub fn synthesis(dicts: &[DenseMatrix]) -> DenseMatrix {
    DenseMatrix::chain_product(dicts.iter()).expect("at least one dictionary")
}

/// `D1 ⋯ DM Z`.
pub fn reconstruct(model: &DbcsModel) -> DenseMatrix {
    model.synthesis().matmul(&model.codes)
}

fn check_chain(dicts: &[DenseMatrix], z: &DenseMatrix, n: usize) -> Result<()> {
    let first = dicts.first().ok_or(Error::Empty("dictionary list"))?;
    if first.rows() != n {
        return Err(Error::mismatch("D1 rows vs operator n", n, first.rows()));
    }
    for w in dicts.windows(2) {
        if w[0].cols() != w[1].rows() {
            return Err(Error::mismatch("dictionary chain", w[0].cols(), w[1].rows()));
        }
    }
    let last = dicts.last().unwrap();
    if last.cols() != z.rows() {
        return Err(Error::mismatch("DM cols vs Z rows", last.cols(), z.rows()));
    }
    Ok(())
}

/// `‖Y − A D1 ⋯ DM Z‖²_F + λ Σ|Z_ij|`.
pub fn objective(
    dicts: &[DenseMatrix],
    z: &DenseMatrix,
    y: &DenseMatrix,
    op: &MeasurementOperator,
    lambda: f64,
) -> Result<f64> {
    check_chain(dicts, z, op.n())?;
    if y.rows() != op.m() {
        return Err(Error::mismatch("objective: Y rows", op.m(), y.rows()));
    }
    if y.cols() != z.cols() {
        return Err(Error::mismatch("objective: Y cols vs Z cols", z.cols(), y.cols()));
    }
    Ok(objective_unchecked(dicts, z, y, op, lambda))
}

pub(crate) fn objective_unchecked(
    dicts: &[DenseMatrix],
    z: &DenseMatrix,
    y: &DenseMatrix,
    op: &MeasurementOperator,
    lambda: f64,
) -> f64 {
    let g = op.forward(&synthesis(dicts));
    let fit = (&g.matmul(z) - y).frobenius_norm_sq();
    fit + lambda * z.l1_norm()
}
