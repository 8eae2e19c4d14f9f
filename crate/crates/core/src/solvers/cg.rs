//! Conjugate gradient for the middle factor of `‖Y − L D R‖²_F (+ μ‖D‖²_F)`.
//!
//! The normal equations are `LᵀL D RRᵀ + μD = LᵀY Rᵀ`. The two-sided map is
//! applied with the small Gram matrices `LᵀL` (q×q) and `RRᵀ` (r×r), so the
//! `qr × qr` Kronecker system is never formed.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

use super::SolverOptions;

#[derive(Clone, Debug)]
pub struct CgOutput {
    pub d: DenseMatrix,
    pub iterations: usize,
    /// Final normal-equation residual `‖B − M(D)‖_F`.
    pub residual_norm: f64,
    /// `‖Y − L D R‖²_F + μ‖D‖²_F` at the warm start and at the result.
    pub initial_objective: f64,
    pub final_objective: f64,
}

/// `‖Y − L D R‖²_F + ridge·‖D‖²_F`.
pub fn sandwich_objective(l: &DenseMatrix, d: &DenseMatrix, r: &DenseMatrix, y: &DenseMatrix, ridge: f64) -> f64 {
    let fit = (&l.matmul(d).matmul(r) - y).frobenius_norm_sq();
    if ridge == 0.0 {
        fit
    } else {
        fit + ridge * d.frobenius_norm_sq()
    }
}

/// `argmin_D ‖Y − L D R‖²_F`, warm-started at `d0`.
pub fn sandwich_lsq(
    l: &DenseMatrix,
    r: &DenseMatrix,
    y: &DenseMatrix,
    d0: &DenseMatrix,
    opts: &SolverOptions,
) -> Result<CgOutput> {
    ridge_sandwich_lsq(l, r, y, d0, 0.0, opts)
}

/// `argmin_D ‖Y − L D R‖²_F + ridge·‖D‖²_F`, warm-started at `d0`.
///
/// The result never has a larger objective than `d0`: if rounding or early
/// termination leaves CG worse off, the warm start is returned unchanged.
pub fn ridge_sandwich_lsq(
    l: &DenseMatrix,
    r: &DenseMatrix,
    y: &DenseMatrix,
    d0: &DenseMatrix,
    ridge: f64,
    opts: &SolverOptions,
) -> Result<CgOutput> {
    opts.validate()?;
    check_dims(l, r, y, d0)?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge must be finite and >= 0, got {ridge}")));
    }

    let ltl = l.tr_matmul(l);
    let rrt = r.matmul_tr(r);
    let rhs = l.tr_matmul(y).matmul_tr(r);
    let normal_map = |d: &DenseMatrix| {
        let mut out = ltl.matmul(d).matmul(&rrt);
        if ridge != 0.0 {
            out.add_scaled(ridge, d);
        }
        out
    };

    let rhs_norm = rhs.frobenius_norm();
    let stop = opts.tol * rhs_norm;
    let mut d = d0.clone();
    let mut res = &rhs - &normal_map(&d);
    let mut rs = res.frobenius_norm_sq();
    let mut p = res.clone();
    let mut iterations = 0;

    while rs.sqrt() > stop && iterations < opts.max_iters {
        let mp = normal_map(&p);
        let curvature = p.dot(&mp);
        if !(curvature > 0.0) {
            if curvature.is_nan() {
                return Err(Error::NonFiniteIterate("sandwich_lsq"));
            }
            break;
        }
        iterations += 1;
        let alpha = rs / curvature;
        d.add_scaled(alpha, &p);
        res.add_scaled(-alpha, &mp);
        let rs_next = res.frobenius_norm_sq();
        if !rs_next.is_finite() {
            return Err(Error::NonFiniteIterate("sandwich_lsq"));
        }
        let beta = rs_next / rs;
        rs = rs_next;
        // p ← res + β p
        p.scale_in_place(beta);
        p.add_scaled(1.0, &res);
    }
    if d.find_non_finite().is_some() {
        return Err(Error::NonFiniteIterate("sandwich_lsq"));
    }

    let initial_objective = sandwich_objective(l, d0, r, y, ridge);
    let mut final_objective = if iterations == 0 {
        initial_objective
    } else {
        sandwich_objective(l, &d, r, y, ridge)
    };
    if final_objective > initial_objective {
        d = d0.clone();
        final_objective = initial_objective;
    }
    Ok(CgOutput {
        d,
        iterations,
        residual_norm: rs.sqrt(),
        initial_objective,
        final_objective,
    })
}

fn check_dims(l: &DenseMatrix, r: &DenseMatrix, y: &DenseMatrix, d0: &DenseMatrix) -> Result<()> {
    if d0.rows() != l.cols() {
        return Err(Error::mismatch("sandwich_lsq: D rows vs L cols", l.cols(), d0.rows()));
    }
    if d0.cols() != r.rows() {
        return Err(Error::mismatch("sandwich_lsq: D cols vs R rows", r.rows(), d0.cols()));
    }
    if y.rows() != l.rows() {
        return Err(Error::mismatch("sandwich_lsq: Y rows vs L rows", l.rows(), y.rows()));
    }
    if y.cols() != r.cols() {
        return Err(Error::mismatch("sandwich_lsq: Y cols vs R cols", r.cols(), y.cols()));
    }
    Ok(())
}
