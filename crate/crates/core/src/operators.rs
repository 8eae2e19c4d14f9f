//! Measurement operators `Y = A X`.
//!
//! Four acquisition models are supported:
//!
//! * `dense_gaussian`: i.i.d. N(0, 1) entries scaled by `1/√m`.
//! * `sparse_binary`: 0/1 entries with probability `density`, each row scaled
//!   to unit Euclidean norm. An all-zero row is redrawn.
//! * `row_subsample`: keeps `m` of the `n` coordinates.
//! * `identity`: `m = n`, `A = I`.
//!
//! Everything is derived from `(kind, m, n, seed, params)`, so rebuilding an
//! operator from its descriptor gives bit-identical results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_map::LinearMap;
use crate::matrix::DenseMatrix;
use crate::rng::Rng;

/// Density of `sparse_binary` operators when none is given.
pub const DEFAULT_SPARSE_DENSITY: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    DenseGaussian,
    SparseBinary,
    RowSubsample,
    Identity,
}

/// Kind-specific build parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperatorParams {
    pub density: Option<f64>,
    pub kept_rows: Option<Vec<usize>>,
}

/// Fully resolved description of an operator. Rebuilding from it reproduces
/// the operator exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDescriptor {
    pub kind: OperatorKind,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kept_rows: Option<Vec<usize>>,
}

#[derive(Clone, Debug)]
enum Realization {
    Dense(DenseMatrix),
    Select(Vec<usize>),
    Identity,
}

#[derive(Clone, Debug)]
pub struct MeasurementOperator {
    descriptor: OperatorDescriptor,
    realization: Realization,
}

/// `m = ⌈ratio · n⌉`, clamped to `1..=n`. A 1e-9 slack keeps products such as
/// `0.3 · 10` from rounding up past the intended integer.
pub fn measurement_count(n: usize, ratio: f64) -> usize {
    let m = (ratio * n as f64 - 1e-9).ceil();
    (m.max(1.0) as usize).min(n)
}

pub fn build_operator(
    kind: OperatorKind,
    m: usize,
    n: usize,
    seed: u64,
    params: &OperatorParams,
) -> Result<MeasurementOperator> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "operator dimensions must be positive, got m={m}, n={n}"
        )));
    }
    if m > n {
        return Err(Error::InvalidArgument(format!(
            "operator needs m <= n, got m={m}, n={n}"
        )));
    }
    if kind != OperatorKind::SparseBinary && params.density.is_some() {
        return Err(Error::InvalidArgument(
            "density only applies to sparse_binary".into(),
        ));
    }
    if kind != OperatorKind::RowSubsample && params.kept_rows.is_some() {
        return Err(Error::InvalidArgument(
            "kept_rows only applies to row_subsample".into(),
        ));
    }
    let mut rng = Rng::new(seed);
    let mut descriptor = OperatorDescriptor {
        kind,
        m,
        n,
        seed,
        density: None,
        kept_rows: None,
    };
    let realization = match kind {
        OperatorKind::Identity => {
            if m != n {
                return Err(Error::InvalidArgument(format!(
                    "identity operator needs m == n, got m={m}, n={n}"
                )));
            }
            Realization::Identity
        }
        OperatorKind::DenseGaussian => {
            let scale = 1.0 / (m as f64).sqrt();
            let mut a = crate::rng::gaussian_matrix(m, n, &mut rng);
            a.scale_in_place(scale);
            Realization::Dense(a)
        }
        OperatorKind::SparseBinary => {
            let density = params.density.unwrap_or(DEFAULT_SPARSE_DENSITY);
            if !(density > 0.0 && density <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "density must lie in (0, 1], got {density}"
                )));
            }
            descriptor.density = Some(density);
            Realization::Dense(sparse_binary(m, n, density, &mut rng))
        }
        OperatorKind::RowSubsample => {
            let rows = match &params.kept_rows {
                Some(given) => {
                    let mut rows = given.clone();
                    rows.sort_unstable();
                    if rows.windows(2).any(|w| w[0] == w[1]) {
                        return Err(Error::InvalidArgument("duplicate kept_rows".into()));
                    }
                    if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
                        return Err(Error::InvalidArgument(format!(
                            "kept row {bad} out of range 0..{n}"
                        )));
                    }
                    if rows.len() != m {
                        return Err(Error::mismatch("kept_rows length", m, rows.len()));
                    }
                    rows
                }
                None => rng.sample_indices(n, m),
            };
            descriptor.kept_rows = Some(rows.clone());
            Realization::Select(rows)
        }
    };
    Ok(MeasurementOperator {
        descriptor,
        realization,
    })
}

fn sparse_binary(m: usize, n: usize, density: f64, rng: &mut Rng) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(m, n);
    let mut row = vec![false; n];
    for i in 0..m {
        let ones = loop {
            for r in row.iter_mut() {
                *r = rng.bernoulli(density);
            }
            let ones = row.iter().filter(|&&b| b).count();
            if ones > 0 {
                break ones;
            }
        };
        let value = 1.0 / (ones as f64).sqrt();
        for (j, &on) in row.iter().enumerate() {
            if on {
                a.set(i, j, value);
            }
        }
    }
    a
}

impl MeasurementOperator {
    /// Rebuilds an operator from a descriptor.
    pub fn from_descriptor(d: &OperatorDescriptor) -> Result<Self> {
        let params = OperatorParams {
            density: d.density,
            kept_rows: d.kept_rows.clone(),
        };
        build_operator(d.kind, d.m, d.n, d.seed, &params)
    }

    pub fn descriptor(&self) -> &OperatorDescriptor {
        &self.descriptor
    }

    pub fn kind(&self) -> OperatorKind {
        self.descriptor.kind
    }

    /// Output (measurement) dimension.
    pub fn m(&self) -> usize {
        self.descriptor.m
    }

    /// Input (signal) dimension.
    pub fn n(&self) -> usize {
        self.descriptor.n
    }

    /// `A X` for an `n × N` matrix.
    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.n() {
            return Err(Error::mismatch("operator apply", self.n(), x.rows()));
        }
        Ok(self.apply_unchecked(x))
    }

    /// `Aᵀ Y` for an `m × N` matrix.
    pub fn adjoint(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        if y.rows() != self.m() {
            return Err(Error::mismatch("operator adjoint", self.m(), y.rows()));
        }
        Ok(self.adjoint_unchecked(y))
    }

    fn apply_unchecked(&self, x: &DenseMatrix) -> DenseMatrix {
        match &self.realization {
            Realization::Dense(a) => a.matmul(x),
            Realization::Select(rows) => x.select_rows(rows),
            Realization::Identity => x.clone(),
        }
    }

    fn adjoint_unchecked(&self, y: &DenseMatrix) -> DenseMatrix {
        match &self.realization {
            Realization::Dense(a) => a.tr_matmul(y),
            Realization::Select(rows) => {
                let mut out = DenseMatrix::zeros(self.n(), y.cols());
                for j in 0..y.cols() {
                    let src = y.col(j);
                    let dst = out.col_mut(j);
                    for (k, &r) in rows.iter().enumerate() {
                        dst[r] = src[k];
                    }
                }
                out
            }
            Realization::Identity => y.clone(),
        }
    }

    /// The operator as an explicit `m × n` matrix.
    pub fn materialize(&self) -> DenseMatrix {
        match &self.realization {
            Realization::Dense(a) => a.clone(),
            _ => self.apply_unchecked(&DenseMatrix::identity(self.n())),
        }
    }
}

impl LinearMap for MeasurementOperator {
    fn input_dim(&self) -> usize {
        self.n()
    }

    fn output_dim(&self) -> usize {
        self.m()
    }

    fn forward(&self, x: &DenseMatrix) -> DenseMatrix {
        assert_eq!(x.rows(), self.n(), "operator forward: dimension mismatch");
        self.apply_unchecked(x)
    }

    fn adjoint(&self, y: &DenseMatrix) -> DenseMatrix {
        assert_eq!(y.rows(), self.m(), "operator adjoint: dimension mismatch");
        self.adjoint_unchecked(y)
    }
}
