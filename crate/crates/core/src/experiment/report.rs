//! Report and classification documents written by the pipeline.

use serde::{Deserialize, Serialize};

use crate::dbcs::Method;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::operators::OperatorDescriptor;

use super::config::{ExperimentConfig, FeatureProtocol};

pub const REPORT_FORMAT: &str = "dbcs-report/1";

/// Version stamp embedded in every report.
pub const VERSION: &str = concat!("dbcs ", env!("CARGO_PKG_VERSION"));

/// JSON schema that every `report.json` satisfies.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub format: String,
    pub version: String,
    /// Resolved config, every default expanded.
    pub config: ExperimentConfig,
    pub method: Method,
    pub feature_protocol: FeatureProtocol,
    pub transductive: bool,
    pub data: DataSummary,
    pub operator: OperatorDescriptor,
    pub lambda: f64,
    pub objective: ObjectiveSummary,
    pub reconstruction: Option<ReconstructionSummary>,
    pub classification: Option<ClassificationReport>,
    pub notes: Vec<String>,
    pub wall_time_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSummary {
    pub source: String,
    pub signal_dim: usize,
    pub samples: usize,
    pub measurements: usize,
    pub num_classes: Option<usize>,
    pub ground_truth_factors: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSummary {
    pub initial: f64,
    /// One value per sweep (one per ISTA iteration for `cs_ista`).
    pub trace: Vec<f64>,
    #[serde(rename = "final")]
    pub last: f64,
    pub rejected_sweeps: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionSummary {
    pub nmse: f64,
    /// NMSE of the all-zero reconstruction, i.e. of the initialization.
    pub nmse_zero_baseline: f64,
    /// NMSE of `Aᵀ(AAᵀ)⁻¹Y`; absent when `AAᵀ` is singular.
    pub nmse_min_norm_least_squares: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassMetrics {
    pub class: usize,
    pub support: usize,
    /// `null` when the class is absent from the test labels.
    pub sensitivity: Option<f64>,
    /// `null` when every test sample belongs to the class.
    pub specificity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationReport {
    pub classifier: String,
    pub k: usize,
    pub protocol: FeatureProtocol,
    pub num_classes: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub accuracy: f64,
    pub macro_accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    /// Same classifier and split on the raw measurements `Y`.
    pub raw_measurement_accuracy: f64,
    pub predictions: Vec<usize>,
}

impl Report {
    /// Fails on any non-finite number, which JSON cannot represent.
    pub fn ensure_finite(&self) -> Result<()> {
        let mut values = vec![self.lambda, self.objective.initial, self.objective.last];
        values.extend(&self.objective.trace);
        if let Some(r) = &self.reconstruction {
            values.push(r.nmse);
            values.push(r.nmse_zero_baseline);
            values.extend(r.nmse_min_norm_least_squares);
        }
        if let Some(c) = &self.classification {
            values.push(c.accuracy);
            values.push(c.macro_accuracy);
            values.push(c.raw_measurement_accuracy);
            for m in &c.per_class {
                values.extend(m.sensitivity);
                values.extend(m.specificity);
            }
        }
        values.extend(self.wall_time_seconds);
        match values.iter().find(|v| !v.is_finite()) {
            Some(v) => Err(Error::InvalidArgument(format!("report holds a non-finite value {v}"))),
            None => Ok(()),
        }
    }
}

/// Minimum-norm least-squares estimate `Aᵀ(AAᵀ)⁻¹Y`, or `None` when `AAᵀ` is
/// numerically singular.
pub fn min_norm_least_squares(a: &DenseMatrix, y: &DenseMatrix) -> Option<DenseMatrix> {
    let gram = a.matmul_tr(a);
    let l = cholesky(&gram)?;
    let m = gram.rows();
    let mut w = y.clone();
    for j in 0..w.cols() {
        let col = w.col_mut(j);
        for i in 0..m {
            let mut s = col[i];
            for k in 0..i {
                s -= l.get(i, k) * col[k];
            }
            col[i] = s / l.get(i, i);
        }
        for i in (0..m).rev() {
            let mut s = col[i];
            for k in i + 1..m {
                s -= l.get(k, i) * col[k];
            }
            col[i] = s / l.get(i, i);
        }
    }
    Some(a.tr_matmul(&w))
}

fn cholesky(s: &DenseMatrix) -> Option<DenseMatrix> {
    let n = s.rows();
    let scale = (0..n).map(|i| s.get(i, i)).fold(0.0, f64::max);
    let floor = 1e-12 * scale;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = s.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > floor) {
            return None;
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let mut v = s.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, v / d);
        }
    }
    Some(l)
}
