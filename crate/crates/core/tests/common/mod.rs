//! Dense oracles shared by the integration tests.
#![allow(dead_code)]

use dbcs_core::{gaussian_matrix, DenseMatrix, Rng};
use nalgebra::DMatrix;

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_col_major(m.nrows(), m.ncols(), m.as_slice().to_vec()).unwrap()
}

pub fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

/// Largest singular value by dense SVD.
pub fn spectral_norm(m: &DenseMatrix) -> f64 {
    to_na(m).singular_values().max()
}

/// Smallest singular value by dense SVD.
pub fn min_singular_value(m: &DenseMatrix) -> f64 {
    to_na(m).singular_values().min()
}

/// `argmin_D ‖Y − L D R‖_F` from the Kronecker system
/// `(R Rᵀ ⊗ LᵀL) vec(D) = vec(Lᵀ Y Rᵀ)`.
pub fn kronecker_solve(l: &DenseMatrix, r: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
    let (l, r, y) = (to_na(l), to_na(r), to_na(y));
    let ltl = l.transpose() * &l;
    let rrt = &r * r.transpose();
    let system = rrt.kronecker(&ltl);
    let rhs_mat = l.transpose() * y * r.transpose();
    let rhs = nalgebra::DVector::from_column_slice(rhs_mat.as_slice());
    let vec_d = system.lu().solve(&rhs).expect("nonsingular Kronecker system");
    from_na(&DMatrix::from_column_slice(rhs_mat.nrows(), rhs_mat.ncols(), vec_d.as_slice()))
}

/// Least-squares solution of `G Z = Y` for full-column-rank `G`.
pub fn least_squares(g: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
    let (g, y) = (to_na(g), to_na(y));
    let gtg = g.transpose() * &g;
    let rhs = g.transpose() * y;
    from_na(&gtg.cholesky().expect("full column rank").solve(&rhs))
}

/// Worst violation of the lasso optimality conditions for
/// `‖Y − G Z‖²_F + λ‖Z‖₁`, each scaled by its tolerance so that values
/// `≤ 1` pass.
pub fn subgradient_violation(g: &DenseMatrix, y: &DenseMatrix, z: &DenseMatrix, lambda: f64) -> f64 {
    let grad = to_na(g).transpose() * (to_na(g) * to_na(z) - to_na(y)) * 2.0;
    let mut worst: f64 = 0.0;
    for j in 0..z.cols() {
        for i in 0..z.rows() {
            let zij = z.get(i, j);
            let gij = grad[(i, j)];
            let v = if zij != 0.0 {
                (gij + lambda * zij.signum()).abs() / (1e-6 * (1.0 + lambda))
            } else {
                (gij.abs() - lambda).max(0.0) / 1e-6
            };
            worst = worst.max(v);
        }
    }
    worst
}

/// Random matrix with singular values in `[0.5, 1.5]`.
pub fn well_conditioned(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let a = to_na(&gaussian_matrix(rows, cols, rng));
    let svd = a.svd(true, true);
    let k = rows.min(cols);
    let sigma = DMatrix::from_fn(k, k, |i, j| if i == j { 0.5 + rng.uniform() } else { 0.0 });
    from_na(&(svd.u.unwrap() * sigma * svd.v_t.unwrap()))
}
