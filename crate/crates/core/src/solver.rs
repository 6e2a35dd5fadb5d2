//! Group-sparse fit of the scattering dictionary.
//!
//! Minimises `½‖S − Ŝ(C)‖²_F + λ Σ_k ‖c_k‖₂` with accelerated proximal
//! gradient (FISTA). With `restart` on, a step that would raise the objective
//! is rejected and momentum reset, so the recorded objective never increases.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::geometry::{PolarGrid, SpatialGrid};
use crate::model::{group_norms, CoefficientMatrix, GaussianBasisSet, ScatteringOperator};
use crate::transform::PhaseHistory;

/// Regularisation weight, absolute or as a fraction of `lambda_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda {
    Absolute(f64),
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Fixed step from a power-iteration estimate of `‖A‖²`.
    PowerIteration,
    /// Start from a lower bound and double until sufficient decrease holds.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub lambda: Lambda,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub step_rule: StepRule,
    pub restart: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            lambda: Lambda::Relative(0.05),
            max_iters: 2000,
            rel_tol: 1e-6,
            step_rule: StepRule::PowerIteration,
            restart: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(invalid_param("max_iters must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(invalid_param("rel_tol must be positive"));
        }
        match self.lambda {
            Lambda::Absolute(v) | Lambda::Relative(v) if !(v >= 0.0) || !v.is_finite() => {
                Err(invalid_param("lambda must be finite and non-negative"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coeffs: CoefficientMatrix,
    /// Objective after each iteration; entry 0 is the value at `C = 0`.
    pub objective_trace: Vec<f64>,
    pub residual_fro: f64,
    pub sigma_g: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Step constant `L` in use when the solver stopped.
    pub lipschitz: f64,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial value")
    }
}

/// Proximal map of `τ‖·‖₂`.
pub fn block_soft_threshold(c: &[Complex64], tau: f64) -> Vec<Complex64> {
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm <= tau {
        return vec![Complex64::new(0.0, 0.0); c.len()];
    }
    let scale = 1.0 - tau / norm;
    c.iter().map(|z| z * scale).collect()
}

/// Column-wise [`block_soft_threshold`] on a `D × K` matrix.
pub(crate) fn threshold_columns(c: &mut Array2<Complex64>, tau: f64) {
    for mut col in c.columns_mut() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= tau {
            col.fill(Complex64::new(0.0, 0.0));
        } else {
            let s = 1.0 - tau / norm;
            col.mapv_inplace(|z| z * s);
        }
    }
}

fn fro2(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

fn re_inner(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Power-iteration estimate of `‖A‖²` (largest eigenvalue of `A^H A`).
pub fn lipschitz_estimate(op: &ScatteringOperator) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = Array2::from_shape_fn(op.coeff_dim(), |_| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let n0 = fro2(&v).sqrt();
    v.mapv_inplace(|z| z / n0);
    let mut est = 0.0;
    for _ in 0..200 {
        let w = op.apply_adjoint(&op.apply(&v));
        let nw = fro2(&w).sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        let change = (nw - est).abs() / nw;
        est = nw;
        v = w.mapv(|z| z / nw);
        if change <= 1e-4 {
            break;
        }
    }
    est
}

/// `max_k ‖(A^H S)_k‖₂`: smallest λ for which `C = 0` is optimal.
pub fn lambda_max(s: &PhaseHistory, spatial: &SpatialGrid, basis: &GaussianBasisSet) -> Result<f64> {
    let op = ScatteringOperator::new(spatial, basis, s.grid())?;
    Ok(lambda_max_with(&op, s.data()))
}

pub(crate) fn lambda_max_with(op: &ScatteringOperator, s: &Array2<Complex64>) -> f64 {
    group_norms(&op.apply_adjoint(s)).into_iter().fold(0.0, f64::max)
}

/// Gradient of the smooth data term, `A^H(A C − S)`.
pub fn data_gradient(op: &ScatteringOperator, s: &Array2<Complex64>, c: &Array2<Complex64>) -> Array2<Complex64> {
    op.apply_adjoint(&(op.apply(c) - s))
}

/// `½‖S − A C‖² + λ Σ‖c_k‖`.
pub fn objective(op: &ScatteringOperator, s: &Array2<Complex64>, c: &Array2<Complex64>, lambda: f64) -> f64 {
    objective_from_residual(&(op.apply(c) - s), c, lambda)
}

fn objective_from_residual(r: &Array2<Complex64>, c: &Array2<Complex64>, lambda: f64) -> f64 {
    0.5 * fro2(r) + lambda * group_norms(c).iter().sum::<f64>()
}

/// Fits coefficients for one basis width.
pub fn fit_coefficients(
    s: &PhaseHistory,
    spatial: &SpatialGrid,
    basis: &GaussianBasisSet,
    opts: &SolverOptions,
) -> Result<FitResult> {
    check_finite(s)?;
    let op = ScatteringOperator::new(spatial, basis, s.grid())?;
    let lambda = match opts.lambda {
        Lambda::Absolute(v) => v,
        Lambda::Relative(r) => r * lambda_max_with(&op, s.data()),
    };
    fit_with_operator(&op, s.data(), lambda, opts)
}

fn check_finite(s: &PhaseHistory) -> Result<()> {
    if s.data().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(invalid_input("phase history contains non-finite samples"));
    }
    Ok(())
}

/// FISTA on a prebuilt operator with an absolute `lambda`.
pub fn fit_with_operator(
    op: &ScatteringOperator,
    s: &Array2<Complex64>,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<FitResult> {
    opts.validate()?;
    if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(invalid_input("phase history contains non-finite samples"));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid_param("lambda must be finite and non-negative"));
    }
    if s.dim() != op.data_dim() {
        return Err(Error::DimensionMismatch(format!(
            "phase history {:?}, operator expects {:?}",
            s.dim(),
            op.data_dim()
        )));
    }
    let dim = op.coeff_dim();
    let sigma_g = op.basis().width();
    let f0 = 0.5 * fro2(s);
    let mut x = Array2::<Complex64>::zeros(dim);
    let mut trace = vec![f0];
    let done = |x: Array2<Complex64>, trace: Vec<f64>, iterations, converged, lipschitz, residual_fro| FitResult {
        coeffs: CoefficientMatrix(x),
        objective_trace: trace,
        residual_fro,
        sigma_g,
        lambda,
        iterations,
        converged,
        lipschitz,
    };
    if f0 == 0.0 {
        return Ok(done(x, trace, 0, true, 0.0, 0.0));
    }

    let mut l = match opts.step_rule {
        // small margin over the power-iteration value, which approaches ‖A‖² from below
        StepRule::PowerIteration => 1.01 * lipschitz_estimate(op),
        StepRule::Backtracking => {
            let g = op.apply_adjoint(s);
            fro2(&g) / fro2(s)
        }
    };
    if l == 0.0 {
        return Ok(done(x, trace, 0, true, 0.0, (2.0 * f0).sqrt()));
    }

    let neg_s = s.mapv(|z| -z);
    let mut ax = Array2::<Complex64>::zeros(op.data_dim());
    let mut y = x.clone();
    let mut ay = ax.clone();
    let mut fx = f0;
    let mut t = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let ry = &ay + &neg_s;
        let grad = op.apply_adjoint(&ry);
        let (z, az) = loop {
            let mut z = &y - &grad.mapv(|g| g / l);
            threshold_columns(&mut z, lambda / l);
            let az = op.apply(&z);
            if opts.step_rule == StepRule::Backtracking {
                let d = &z - &y;
                let lhs = 0.5 * fro2(&(&az + &neg_s));
                let rhs = 0.5 * fro2(&ry) + re_inner(&grad, &d) + 0.5 * l * fro2(&d);
                if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
                    l *= 2.0;
                    continue;
                }
            }
            break (z, az);
        };
        let fz = objective_from_residual(&(&az + &neg_s), &z, lambda);
        if !fz.is_finite() || fz > 10.0 * f0 {
            return Err(Error::SolverFailure(format!(
                "objective diverged at iteration {iterations} ({fz:e} vs initial {f0:e})"
            )));
        }
        if opts.restart && fz > fx {
            if t == 1.0 {
                // plain proximal step from x still rose: the step constant is too small
                l *= 2.0;
            }
            t = 1.0;
            y = x.clone();
            ay = ax.clone();
            trace.push(fx);
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = &z + &(&z - &x).mapv(|v| v * beta);
        ay = &az + &(&az - &ax).mapv(|v| v * beta);
        let change = (fx - fz).abs() / fx.max(f64::MIN_POSITIVE);
        x = z;
        ax = az;
        fx = fz;
        t = t_next;
        trace.push(fx);
        if change <= opts.rel_tol {
            converged = true;
            break;
        }
    }
    let residual = fro2(&(&ax + &neg_s)).sqrt();
    Ok(done(x, trace, iterations, converged, l, residual))
}

/// `n` log-spaced widths from the azimuth sample spacing up to half the aperture.
pub fn default_sigma_candidates(grid: &PolarGrid, n: usize) -> Result<Vec<f64>> {
    let th = grid.thetas();
    if th.len() < 2 || n == 0 {
        return Err(invalid_param("need at least two azimuths and one candidate"));
    }
    let lo = (th[th.len() - 1] - th[0]) / (th.len() - 1) as f64;
    let hi = 0.5 * (th[th.len() - 1] - th[0]);
    if n == 1 {
        return Ok(vec![lo]);
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    Ok((0..n).map(|i| lo * (ratio * i as f64).exp()).collect())
}

/// Line search over basis widths: fits every candidate and keeps the one with
/// the lowest converged objective, preferring the smaller width on ties.
///
/// A relative λ is resolved once, against the `lambda_max` of the median
/// candidate, so every candidate is scored on the same objective.
pub fn select_sigma(
    s: &PhaseHistory,
    spatial: &SpatialGrid,
    centers: &[f64],
    candidates: &[f64],
    opts: &SolverOptions,
) -> Result<(f64, FitResult)> {
    if candidates.is_empty() {
        return Err(invalid_param("no sigma candidates"));
    }
    if candidates.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(invalid_param("sigma candidates must be positive"));
    }
    check_finite(s)?;
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let lambda = match opts.lambda {
        Lambda::Absolute(v) => v,
        Lambda::Relative(r) => {
            let mid = sorted[(sorted.len() - 1) / 2];
            let basis = GaussianBasisSet::new(centers.to_vec(), mid)?;
            r * lambda_max(s, spatial, &basis)?
        }
    };
    let results: Vec<Result<FitResult>> = sorted
        .par_iter()
        .map(|&sigma| {
            let basis = GaussianBasisSet::new(centers.to_vec(), sigma)?;
            let op = ScatteringOperator::new(spatial, &basis, s.grid())?;
            fit_with_operator(&op, s.data(), lambda, opts)
        })
        .collect();
    let mut best: Option<FitResult> = None;
    let mut last_err = None;
    for r in results {
        match r {
            Ok(fit) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let (fo, bo) = (fit.objective(), b.objective());
                        fo < bo && (bo - fo) > 1e-12 * bo.abs()
                    }
                };
                if better {
                    best = Some(fit);
                }
            }
            Err(e) => {
                log::warn!("sigma candidate skipped: {e}");
                last_err = Some(e);
            }
        }
    }
    match best {
        Some(fit) => Ok((fit.sigma_g, fit)),
        None => Err(Error::SolverFailure(format!(
            "every sigma candidate failed (last: {})",
            last_err.map(|e| e.to_string()).unwrap_or_default()
        ))),
    }
}
