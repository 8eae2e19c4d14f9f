use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linear_map::LinearMap;
use crate::matrix::{parallel_enabled, DenseMatrix};
use crate::normalize::normalize_columns;
use crate::operators::{build_operator, MeasurementOperator, OperatorKind, OperatorParams};
use crate::rng::{gaussian_matrix, Rng};
use crate::solvers::{
    ista, ista_lipschitz, ista_with_lipschitz, relative_change, ridge_sandwich_lsq, SolverOptions,
};

use super::{
    check_chain, objective_unchecked, synthesis, DbcsModel, FitSnapshot, Lambda, LayerSpec, Method,
    TrainOptions,
};

/// Fits `Y ≈ A D1 ⋯ DM Z` by alternating minimization.
///
/// Dictionaries start as Gaussian matrices with unit-norm columns and the code
/// starts at zero. One sweep updates `D1, …, DM` in order by conjugate gradient
/// (each warm-started at its current value; skipped while `Z` is entirely
/// zero), then `Z` by ISTA, then rescales
/// every dictionary column to unit norm with compensation in the downstream
/// factor.
///
/// Compensation keeps `D1 ⋯ DM Z` fixed but rescales rows of `Z`, which can
/// raise `λ‖Z‖₁`. A sweep that ends above the previous objective is discarded
/// and replaced by an ISTA pass on `Z` alone from the previous state, so
/// `objective_trace` never increases.
pub fn dbcs_fit(
    y: &DenseMatrix,
    op: &MeasurementOperator,
    spec: &LayerSpec,
    lambda: Lambda,
    opts: &TrainOptions,
    rng: &mut Rng,
) -> Result<DbcsModel> {
    alternate(
        y,
        op,
        spec,
        lambda,
        opts,
        rng,
        Regime {
            method: Method::Dbcs,
            normalize: true,
            ridge: 0.0,
        },
    )
}

/// Single-layer blind compressed sensing with a ridge penalty on the
/// dictionary: `‖Y − A D Z‖²_F + λ‖Z‖₁ + μ‖D‖²_F`. No column normalization.
pub fn bcs_fit(
    y: &DenseMatrix,
    op: &MeasurementOperator,
    atoms: usize,
    lambda: Lambda,
    mu: f64,
    opts: &TrainOptions,
    rng: &mut Rng,
) -> Result<DbcsModel> {
    let spec = LayerSpec::new(vec![op.n(), atoms])?;
    alternate(
        y,
        op,
        &spec,
        lambda,
        opts,
        rng,
        Regime {
            method: Method::Bcs,
            normalize: false,
            ridge: mu,
        },
    )
}

/// Dictionary learning on uncompressed signals: [`dbcs_fit`] with `A = I` and
/// one layer of `atoms` columns.
pub fn dl_fit(x: &DenseMatrix, atoms: usize, lambda: Lambda, opts: &TrainOptions, rng: &mut Rng) -> Result<DbcsModel> {
    if x.is_empty() {
        return Err(Error::Empty("training signals"));
    }
    let op = build_operator(OperatorKind::Identity, x.rows(), x.rows(), 0, &OperatorParams::default())?;
    let spec = LayerSpec::new(vec![x.rows(), atoms])?;
    let mut model = dbcs_fit(x, &op, &spec, lambda, opts, rng)?;
    model.config.method = Method::Dl;
    Ok(model)
}

/// Normalizes the columns of every dictionary in order, multiplying the rows
/// of the next factor (`D_{i+1}`, or `Z` after the last layer) by the removed
/// scales. Returns the scales per layer.
pub fn normalize_with_compensation(dicts: &mut [DenseMatrix], z: &mut DenseMatrix, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut all = Vec::with_capacity(dicts.len());
    for i in 0..dicts.len() {
        let (normalized, scales) = normalize_columns(&dicts[i], rng);
        dicts[i] = normalized;
        match dicts.get_mut(i + 1) {
            Some(next) => next.scale_rows(&scales),
            None => z.scale_rows(&scales),
        }
        all.push(scales);
    }
    all
}

/// Sparse codes for new measurements with the dictionaries held fixed.
///
/// Every column is solved independently by ISTA from zero with a shared step
/// size, so the result for a column does not depend on the rest of the batch.
pub fn encode(
    op: &MeasurementOperator,
    dicts: &[DenseMatrix],
    y_new: &DenseMatrix,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<DenseMatrix> {
    let code_dim = dicts.last().map(|d| d.cols()).ok_or(Error::Empty("dictionary list"))?;
    check_chain(dicts, &DenseMatrix::zeros(code_dim, 0), op.n())?;
    if y_new.rows() != op.m() {
        return Err(Error::mismatch("encode: Y rows", op.m(), y_new.rows()));
    }
    opts.validate()?;
    let g = op.forward(&synthesis(dicts));
    let lipschitz = ista_lipschitz(&g, opts);
    let solve = |j: usize| -> Result<DenseMatrix> {
        let yj = y_new.select_columns(&[j]);
        let z0 = DenseMatrix::zeros(code_dim, 1);
        Ok(ista_with_lipschitz(&g, &yj, lambda, &z0, opts, lipschitz)?.z)
    };
    let columns: Vec<DenseMatrix> = if parallel_enabled() {
        (0..y_new.cols()).into_par_iter().map(solve).collect::<Result<_>>()?
    } else {
        (0..y_new.cols()).map(solve).collect::<Result<_>>()?
    };
    let slices: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    DenseMatrix::from_columns(code_dim, &slices)
}

struct Regime {
    method: Method,
    normalize: bool,
    ridge: f64,
}

fn alternate(
    y: &DenseMatrix,
    op: &MeasurementOperator,
    spec: &LayerSpec,
    lambda_rule: Lambda,
    opts: &TrainOptions,
    rng: &mut Rng,
    regime: Regime,
) -> Result<DbcsModel> {
    opts.validate()?;
    lambda_rule.validate()?;
    if y.is_empty() {
        return Err(Error::Empty("measurements"));
    }
    y.ensure_finite()?;
    if y.rows() != op.m() {
        return Err(Error::mismatch("fit: Y rows vs operator m", op.m(), y.rows()));
    }
    if spec.signal_dim() != op.n() {
        return Err(Error::mismatch("fit: layer n vs operator n", op.n(), spec.signal_dim()));
    }
    if !(regime.ridge >= 0.0 && regime.ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!("mu must be finite and >= 0, got {}", regime.ridge)));
    }

    let config = FitSnapshot {
        method: regime.method,
        seed: rng.seed(),
        stream: rng.stream(),
        lambda_rule,
        mu: regime.ridge,
        options: *opts,
        operator: op.descriptor().clone(),
    };

    let depth = spec.depth();
    let mut dicts: Vec<DenseMatrix> = (0..depth)
        .map(|i| {
            let (rows, cols) = spec.dictionary_shape(i);
            normalize_columns(&gaussian_matrix(rows, cols, rng), rng).0
        })
        .collect();
    let mut z = DenseMatrix::zeros(spec.code_dim(), y.cols());

    let lambda = match lambda_rule {
        Lambda::Absolute(v) => v,
        Lambda::DataScaled(scale) => scale * op.forward(&synthesis(&dicts)).tr_matmul(y).max_abs(),
    };

    let ridge = regime.ridge;
    let total = |dicts: &[DenseMatrix], z: &DenseMatrix| {
        let f = objective_unchecked(dicts, z, y, op, lambda);
        if ridge == 0.0 {
            f
        } else {
            f + ridge * dicts.iter().map(|d| d.frobenius_norm_sq()).sum::<f64>()
        }
    };

    let initial_objective = total(&dicts, &z);
    if !initial_objective.is_finite() {
        return Err(Error::NonFiniteObjective("fit"));
    }

    let a = op.materialize();
    let mut prev = initial_objective;
    let mut trace = Vec::with_capacity(opts.sweeps);
    let mut rejected = Vec::new();

    for sweep in 0..opts.sweeps {
        let saved = (dicts.clone(), z.clone());

        // An all-zero code says nothing about the dictionaries, and with a ridge
        // penalty the dictionary step would collapse them to zero.
        let skip_dictionaries = z.count_nonzero() == 0;
        for j in (0..depth).filter(|_| !skip_dictionaries) {
            let left = if j == 0 {
                a.clone()
            } else {
                op.forward(&synthesis(&dicts[..j]))
            };
            let right = dicts[j + 1..].iter().rev().fold(z.clone(), |acc, d| d.matmul(&acc));
            dicts[j] = ridge_sandwich_lsq(&left, &right, y, &dicts[j], ridge, &opts.cg)?.d;
        }

        let g = op.forward(&synthesis(&dicts));
        z = ista(&g, y, lambda, &z, &opts.ista)?.z;

        if regime.normalize {
            normalize_with_compensation(&mut dicts, &mut z, rng);
        }

        let mut f = total(&dicts, &z);
        if !f.is_finite() {
            return Err(Error::NonFiniteObjective("fit"));
        }
        if f > prev {
            log::debug!("sweep {sweep}: objective rose {prev:.6e} -> {f:.6e}, falling back to a code-only update");
            rejected.push(sweep);
            (dicts, z) = saved;
            let g = op.forward(&synthesis(&dicts));
            let candidate = ista(&g, y, lambda, &z, &opts.ista)?.z;
            let fc = total(&dicts, &candidate);
            if fc <= prev {
                z = candidate;
                f = fc;
            } else {
                f = prev;
            }
        }
        log::debug!("sweep {sweep}: objective {f:.6e}");
        trace.push(f);
        let change = relative_change(prev, f);
        prev = f;
        if change < opts.sweep_tol {
            break;
        }
    }

    Ok(DbcsModel {
        dictionaries: dicts,
        codes: z,
        lambda,
        layer_spec: spec.clone(),
        initial_objective,
        objective_trace: trace,
        rejected_sweeps: rejected,
        config,
    })
}
