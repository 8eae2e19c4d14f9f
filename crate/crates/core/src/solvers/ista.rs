//! Iterative soft thresholding for `min_Z ‖Y − G Z‖²_F + λ‖Z‖₁`.
//!
//! The fidelity term carries no ½ factor, so the gradient is `2Gᵀ(GZ − Y)`
//! and its Lipschitz constant is `2σ²` with σ the largest singular value of
//! `G`. The step is the fixed `1/L` with `L = 2σ̂²/safety`, where σ̂ comes from
//! power iteration. Any `L ≥ σ²` already makes every step a descent step,
//! so the objective trace is non-increasing even if σ̂ slightly
//! underestimates σ.

use crate::error::{Error, Result};
use crate::linear_map::LinearMap;
use crate::matrix::DenseMatrix;
use crate::rng::{streams, Rng};

use super::{relative_change, soft_threshold, spectral_norm_estimate, SolverOptions};

#[derive(Clone, Debug)]
pub struct IstaOutput {
    pub z: DenseMatrix,
    /// Objective at the warm start followed by one value per iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub lipschitz: f64,
}

impl IstaOutput {
    pub fn final_objective(&self) -> f64 {
        *self.trace.last().expect("trace holds at least the initial value")
    }
}

/// `‖Y − G Z‖²_F + λ‖Z‖₁`.
pub fn lasso_objective<M: LinearMap + ?Sized>(map: &M, y: &DenseMatrix, lambda: f64, z: &DenseMatrix) -> f64 {
    let r = &map.forward(z) - y;
    r.frobenius_norm_sq() + lambda * z.l1_norm()
}

/// Step-size constant `2σ̂²/safety` for `map`. The power iteration uses a
/// fixed stream so that the same map always gets the same step.
pub fn ista_lipschitz<M: LinearMap + ?Sized>(map: &M, opts: &SolverOptions) -> f64 {
    let mut rng = Rng::from_stream(0, streams::POWER_ITERATION);
    let sigma = spectral_norm_estimate(map, &mut rng, opts.power_iters);
    2.0 * sigma * sigma / opts.safety
}

pub fn ista<M: LinearMap + ?Sized>(
    map: &M,
    y: &DenseMatrix,
    lambda: f64,
    z0: &DenseMatrix,
    opts: &SolverOptions,
) -> Result<IstaOutput> {
    check_inputs(map, y, lambda, z0, opts)?;
    let lipschitz = ista_lipschitz(map, opts);
    run(map, y, lambda, z0, opts, lipschitz)
}

/// ISTA with a caller-supplied Lipschitz constant, for running many problems
/// that share one map.
pub fn ista_with_lipschitz<M: LinearMap + ?Sized>(
    map: &M,
    y: &DenseMatrix,
    lambda: f64,
    z0: &DenseMatrix,
    opts: &SolverOptions,
    lipschitz: f64,
) -> Result<IstaOutput> {
    check_inputs(map, y, lambda, z0, opts)?;
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid Lipschitz constant {lipschitz}")));
    }
    run(map, y, lambda, z0, opts, lipschitz)
}

fn check_inputs<M: LinearMap + ?Sized>(
    map: &M,
    y: &DenseMatrix,
    lambda: f64,
    z0: &DenseMatrix,
    opts: &SolverOptions,
) -> Result<()> {
    opts.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if y.rows() != map.output_dim() {
        return Err(Error::mismatch("ista: Y rows", map.output_dim(), y.rows()));
    }
    if z0.rows() != map.input_dim() {
        return Err(Error::mismatch("ista: Z0 rows", map.input_dim(), z0.rows()));
    }
    if z0.cols() != y.cols() {
        return Err(Error::mismatch("ista: Z0 cols", y.cols(), z0.cols()));
    }
    Ok(())
}

fn run<M: LinearMap + ?Sized>(
    map: &M,
    y: &DenseMatrix,
    lambda: f64,
    z0: &DenseMatrix,
    opts: &SolverOptions,
    lipschitz: f64,
) -> Result<IstaOutput> {
    let mut z = z0.clone();
    let mut residual = &map.forward(&z) - y;
    let mut f = residual.frobenius_norm_sq() + lambda * z.l1_norm();
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective("ista"));
    }
    let mut trace = vec![f];

    if lipschitz == 0.0 {
        // G = 0: the fidelity term is constant and the minimizer is Z = 0.
        let z = DenseMatrix::zeros(z0.rows(), z0.cols());
        trace.push(y.frobenius_norm_sq());
        return Ok(IstaOutput {
            z,
            trace,
            iterations: 1,
            lipschitz,
        });
    }

    let step = 1.0 / lipschitz;
    let threshold = lambda * step;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let grad = map.adjoint(&residual);
        // Z − (1/L)·2·Gᵀ(GZ − Y), then shrink
        let mut next = z.clone();
        next.add_scaled(-2.0 * step, &grad);
        for v in next.as_mut_slice() {
            *v = soft_threshold(*v, threshold);
        }
        let next_residual = &map.forward(&next) - y;
        let f_next = next_residual.frobenius_norm_sq() + lambda * next.l1_norm();
        if !f_next.is_finite() {
            return Err(Error::NonFiniteObjective("ista"));
        }
        trace.push(f_next);
        let change = relative_change(f, f_next);
        z = next;
        residual = next_residual;
        f = f_next;
        if change < opts.tol || f == 0.0 {
            break;
        }
    }
    Ok(IstaOutput {
        z,
        trace,
        iterations,
        lipschitz,
    })
}
