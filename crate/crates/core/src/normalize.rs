use crate::matrix::{dot, DenseMatrix};
use crate::rng::Rng;

/// Columns with Euclidean norm below this are treated as dead atoms.
pub const DEAD_ATOM_NORM: f64 = 1e-10;

/// Scales every column to unit Euclidean norm.
///
/// Returns the normalized matrix and the original column norms. A column whose
/// norm is below [`DEAD_ATOM_NORM`] is replaced by a fresh random unit vector
/// drawn from `rng` and reported with scale 0.
pub fn normalize_columns(m: &DenseMatrix, rng: &mut Rng) -> (DenseMatrix, Vec<f64>) {
    let mut out = m.clone();
    let mut scales = Vec::with_capacity(m.cols());
    for j in 0..m.cols() {
        let col = out.col_mut(j);
        let norm = dot(col, col).sqrt();
        if norm < DEAD_ATOM_NORM {
            let fresh = rng.unit_vector(col.len());
            col.copy_from_slice(&fresh);
            scales.push(0.0);
        } else {
            for v in col.iter_mut() {
                *v /= norm;
            }
            scales.push(norm);
        }
    }
    (out, scales)
}
