use crate::linear_map::LinearMap;
use crate::matrix::DenseMatrix;
use crate::rng::{gaussian_matrix, Rng};

pub const DEFAULT_POWER_ITERS: usize = 50;

/// Largest singular value of `map`, by power iteration on `mapᵀ ∘ map` from a
/// random start. Returns 0 for a zero map.
///
/// The Rayleigh estimate approaches σ₁ from below; accuracy after `iters`
/// steps depends on the gap between σ₁ and σ₂.
pub fn spectral_norm_estimate<M: LinearMap + ?Sized>(map: &M, rng: &mut Rng, iters: usize) -> f64 {
    let dim = map.input_dim();
    if dim == 0 || map.output_dim() == 0 {
        return 0.0;
    }
    let mut x = gaussian_matrix(dim, 1, rng);
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return 0.0;
    }
    x.scale_in_place(1.0 / norm);
    for _ in 0..iters.max(1) {
        let w = map.adjoint(&map.forward(&x));
        let nw = w.frobenius_norm();
        if nw == 0.0 {
            return 0.0;
        }
        x = scaled(w, 1.0 / nw);
    }
    map.forward(&x).frobenius_norm()
}

fn scaled(mut m: DenseMatrix, alpha: f64) -> DenseMatrix {
    m.scale_in_place(alpha);
    m
}
