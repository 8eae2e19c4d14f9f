//! Synthetic data generators.

use crate::dbcs::synthesis;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::normalize::normalize_columns;
use crate::rng::{gaussian_matrix, Rng};

use super::config::{MixtureSpec, PlantedSpec, SyntheticSpec};

#[derive(Clone, Debug)]
pub struct SynthData {
    /// Signals, one per column.
    pub x: DenseMatrix,
    pub labels: Option<Vec<usize>>,
    /// Generating factors of a planted factorization.
    pub truth: Option<PlantedTruth>,
}

#[derive(Clone, Debug)]
pub struct PlantedTruth {
    pub dictionaries: Vec<DenseMatrix>,
    pub codes: DenseMatrix,
}

impl PlantedTruth {
    pub fn synthesis(&self) -> DenseMatrix {
        synthesis(&self.dictionaries)
    }
}

pub fn generate(spec: &SyntheticSpec, rng: &mut Rng) -> Result<SynthData> {
    match spec {
        SyntheticSpec::PlantedFactorization(p) => planted(p, rng),
        SyntheticSpec::LabeledMixture(m) => mixture(m, rng),
    }
}

fn check_noise(noise: f64) -> Result<()> {
    if noise >= 0.0 && noise.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("noise must be finite and >= 0, got {noise}")))
    }
}

pub fn planted(spec: &PlantedSpec, rng: &mut Rng) -> Result<SynthData> {
    if spec.sizes.len() < 2 || spec.sizes.contains(&0) {
        return Err(Error::Config(format!(
            "planted sizes must be [n, k1, ...] with positive entries, got {:?}",
            spec.sizes
        )));
    }
    let k = *spec.sizes.last().unwrap();
    if spec.sparsity == 0 || spec.sparsity > k {
        return Err(Error::Config(format!("sparsity must lie in 1..={k}, got {}", spec.sparsity)));
    }
    if spec.samples == 0 {
        return Err(Error::Config("samples must be >= 1".into()));
    }
    check_noise(spec.noise)?;

    let dictionaries: Vec<DenseMatrix> = spec
        .sizes
        .windows(2)
        .map(|w| normalize_columns(&gaussian_matrix(w[0], w[1], rng), rng).0)
        .collect();
    let mut codes = DenseMatrix::zeros(k, spec.samples);
    for j in 0..spec.samples {
        for i in rng.sample_indices(k, spec.sparsity) {
            codes.set(i, j, rng.standard_normal());
        }
    }
    let mut x = synthesis(&dictionaries).matmul(&codes);
    if spec.noise > 0.0 {
        x.add_scaled(spec.noise, &gaussian_matrix(x.rows(), x.cols(), rng));
    }
    Ok(SynthData {
        x,
        labels: None,
        truth: Some(PlantedTruth { dictionaries, codes }),
    })
}

pub fn mixture(spec: &MixtureSpec, rng: &mut Rng) -> Result<SynthData> {
    if spec.classes < 2 {
        return Err(Error::Config(format!("a mixture needs at least 2 classes, got {}", spec.classes)));
    }
    if spec.dim == 0 || spec.samples_per_class == 0 {
        return Err(Error::Config("dim and samples_per_class must be >= 1".into()));
    }
    if !(spec.mean_scale >= 0.0 && spec.mean_scale.is_finite()) {
        return Err(Error::Config(format!("mean_scale must be finite and >= 0, got {}", spec.mean_scale)));
    }
    check_noise(spec.noise)?;

    let mut means = gaussian_matrix(spec.dim, spec.classes, rng);
    means.scale_in_place(spec.mean_scale);
    let total = spec.classes * spec.samples_per_class;
    let labels: Vec<usize> = (0..total).map(|j| j % spec.classes).collect();
    let mut x = means.select_columns(&labels);
    x.add_scaled(spec.noise, &gaussian_matrix(spec.dim, total, rng));
    Ok(SynthData {
        x,
        labels: Some(labels),
        truth: None,
    })
}
