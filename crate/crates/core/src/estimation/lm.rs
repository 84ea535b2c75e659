//! Damped least squares (Levenberg–Marquardt with Marquardt diagonal scaling).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative χ² change below which an accepted step ends the search.
    pub ftol: f64,
    /// Relative step norm below which the search ends.
    pub xtol: f64,
    pub lambda0: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iter: 500, ftol: 1e-10, xtol: 1e-12, lambda0: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ChiSquareTolerance,
    StepTolerance,
    ExactFit,
    /// No damping level reduced χ²; the point is a minimum to working precision.
    Stalled,
    MaxIterations,
    NonFiniteStart,
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub jacobian: DMatrix<f64>,
    /// `(JᵀJ)⁻¹` at the optimum (pseudo-inverse if singular), unscaled.
    pub covariance: DMatrix<f64>,
    pub singular: bool,
}

fn chi2_of(r: &[f64]) -> f64 {
    let s: f64 = r.iter().map(|v| v * v).sum();
    if s.is_finite() { s } else { f64::INFINITY }
}

/// Central-difference Jacobian of `f` at `x`.
pub fn numeric_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], m: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(m, x.len());
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let h = 1e-6 * x[k].abs().max(1e-6);
        xp[k] = x[k] + h;
        let fp = f(&xp);
        xp[k] = x[k] - h;
        let fm = f(&xp);
        xp[k] = x[k];
        for i in 0..m {
            j[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    j
}

/// Pseudo-inverse of a symmetric positive semi-definite matrix; the flag is
/// set when small singular values had to be dropped.
pub fn pseudo_inverse_psd(a: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let n = a.nrows();
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * 1e-14 * n.max(1) as f64;
    let mut singular = smax == 0.0;
    let mut inv_s = DMatrix::zeros(n, n);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            inv_s[(i, i)] = 1.0 / s;
        } else {
            singular = true;
        }
    }
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    (vt.transpose() * inv_s * u.transpose(), singular)
}

/// Minimizes `Σ rᵢ(x)²` where `residuals` returns already-weighted
/// residuals. `jacobian`, when given, replaces the finite-difference one.
pub fn least_squares(
    residuals: &dyn Fn(&[f64]) -> Vec<f64>,
    jacobian: Option<&dyn Fn(&[f64]) -> DMatrix<f64>>,
    x0: &[f64],
    opts: &LmOptions,
) -> LmOutcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residuals(&x);
    let m = r.len();
    let mut chi2 = chi2_of(&r);
    let jac = |x: &[f64]| match jacobian {
        Some(j) => j(x),
        None => numeric_jacobian(residuals, x, m),
    };
    let finish = |x: Vec<f64>, r: Vec<f64>, chi2: f64, it: usize, term: Termination| {
        let j = if chi2.is_finite() { jac(&x) } else { DMatrix::zeros(m, n) };
        let (cov, singular) = pseudo_inverse_psd(&(j.transpose() * &j));
        let converged = !matches!(term, Termination::MaxIterations | Termination::NonFiniteStart);
        LmOutcome {
            params: x,
            residuals: r,
            chi2,
            iterations: it,
            converged,
            termination: term,
            jacobian: j,
            covariance: cov,
            singular,
        }
    };
    if !chi2.is_finite() {
        return finish(x, r, chi2, 0, Termination::NonFiniteStart);
    }
    let mut lambda = opts.lambda0;
    for it in 1..=opts.max_iter {
        if chi2 == 0.0 {
            return finish(x, r, chi2, it - 1, Termination::ExactFit);
        }
        let j = jac(&x);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * DVector::from_column_slice(&r);
        loop {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
            }
            let step = match a.clone().cholesky() {
                Some(c) => c.solve(&(-&g)),
                None => pseudo_inverse_psd(&a).0 * (-&g),
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rn = residuals(&xn);
            let cn = chi2_of(&rn);
            if cn <= chi2 {
                let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let small_step = step.norm() <= opts.xtol * (xnorm + opts.xtol);
                let rel = (chi2 - cn) / chi2.max(f64::MIN_POSITIVE);
                x = xn;
                r = rn;
                chi2 = cn;
                lambda = (lambda / 10.0).max(1e-12);
                if small_step {
                    return finish(x, r, chi2, it, Termination::StepTolerance);
                }
                if rel < opts.ftol {
                    return finish(x, r, chi2, it, Termination::ChiSquareTolerance);
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                return finish(x, r, chi2, it, Termination::Stalled);
            }
        }
    }
    finish(x, r, chi2, opts.max_iter, Termination::MaxIterations)
}
