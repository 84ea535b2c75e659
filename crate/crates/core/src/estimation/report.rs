use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lm::{least_squares, numeric_jacobian, LmOptions, LmOutcome, Termination};
use crate::error::{Error, Result};

/// Outcome of one least-squares fit.
///
/// `std_errors` come from the unscaled covariance `(JᵀJ)⁻¹` of the weighted
/// residuals; `scaled_std_errors` are multiplied by `√(χ²/dof)` when that
/// exceeds one. Both are empty when the fit did not converge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model_id: String,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub chi2: f64,
    pub dof: i64,
    pub points: usize,
    /// Order of the covariance rows and columns.
    pub param_names: Vec<String>,
    pub params: BTreeMap<String, f64>,
    pub std_errors: BTreeMap<String, f64>,
    pub scaled_std_errors: BTreeMap<String, f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Quantities computed from the parameters, with delta-method errors.
    pub derived: BTreeMap<String, f64>,
    pub derived_std_errors: BTreeMap<String, f64>,
    /// Starting point of the search, in the same names as `params`.
    pub initialization: BTreeMap<String, f64>,
    /// Parameters held fixed during the fit.
    pub fixed: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    /// Input name → content hash, filled in by callers that read files.
    pub inputs: BTreeMap<String, String>,
}

impl FitReport {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).or_else(|| self.derived.get(name)).copied()
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.std_errors.get(name).or_else(|| self.derived_std_errors.get(name)).copied()
    }

    pub fn reduced_chi2(&self) -> Option<f64> {
        (self.dof > 0).then(|| self.chi2 / self.dof as f64)
    }

    /// `max(1, χ²/dof)`.
    pub fn error_scale(&self) -> f64 {
        self.reduced_chi2().filter(|r| *r > 1.0).unwrap_or(1.0)
    }

    fn natural(&self) -> Vec<f64> {
        self.param_names.iter().map(|n| self.params[n]).collect()
    }

    /// Adds `f(params)` as a derived quantity; its error follows from the
    /// covariance and a central-difference gradient.
    pub fn add_derived(&mut self, name: &str, f: impl Fn(&[f64]) -> f64) {
        let x = self.natural();
        let value = f(&x);
        self.derived.insert(name.to_string(), value);
        if !self.converged || self.covariance.is_empty() {
            return;
        }
        let g = numeric_jacobian(&|p: &[f64]| vec![f(p)], &x, 1);
        let n = x.len();
        let mut var = 0.0;
        for i in 0..n {
            for j in 0..n {
                var += g[(0, i)] * self.covariance[i][j] * g[(0, j)];
            }
        }
        self.derived_std_errors.insert(name.to_string(), var.max(0.0).sqrt());
    }

    pub fn with_input(mut self, name: impl Into<String>, hash: impl Into<String>) -> Self {
        self.inputs.insert(name.into(), hash.into());
        self
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Numerical(format!("cannot serialize fit report: {e}")))
    }

    pub fn from_toml(text: &str, name: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format(name, e.to_string()))
    }
}

/// A sampled model curve for plotting next to the data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCurve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Report plus the fitted curves on the data grid.
#[derive(Debug, Clone)]
pub struct Fit {
    pub report: FitReport,
    pub curves: Vec<ModelCurve>,
}

/// One least-squares problem in internal coordinates `u`.
pub(crate) struct Problem<'a> {
    pub model_id: &'a str,
    pub names: &'a [&'a str],
    /// Weighted residuals `(data − model)/σ`.
    pub residuals: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub jacobian: Option<&'a dyn Fn(&[f64]) -> DMatrix<f64>>,
    /// Map from internal coordinates to the reported parameters; identity
    /// when absent.
    pub to_natural: Option<&'a dyn Fn(&[f64]) -> Vec<f64>>,
}

impl Problem<'_> {
    fn natural(&self, u: &[f64]) -> Vec<f64> {
        match self.to_natural {
            Some(f) => f(u),
            None => u.to_vec(),
        }
    }

    /// Runs the optimizer from each start and keeps the lowest χ².
    pub fn solve(&self, starts: &[Vec<f64>]) -> (FitReport, LmOutcome) {
        let opts = LmOptions::default();
        let best = starts
            .iter()
            .map(|u0| (u0, least_squares(self.residuals, self.jacobian, u0, &opts)))
            .min_by(|a, b| rank(&a.1).total_cmp(&rank(&b.1)))
            .expect("at least one start");
        let (u0, out) = best;
        (self.report(u0, &out), out)
    }

    fn report(&self, u0: &[f64], out: &LmOutcome) -> FitReport {
        let names: Vec<String> = self.names.iter().map(|s| s.to_string()).collect();
        let theta = self.natural(&out.params);
        let n = theta.len();
        let dof = out.residuals.len() as i64 - n as i64;
        let converged = out.converged && out.chi2.is_finite();
        let mut warnings = Vec::new();
        if !out.converged {
            warnings.push(format!("optimizer stopped without converging ({:?})", out.termination));
        }
        if out.singular {
            warnings.push("covariance is singular: some parameters are not constrained by the data".into());
        }
        let covariance = if converged {
            let m = match self.to_natural {
                Some(f) => numeric_jacobian(f, &out.params, n),
                None => DMatrix::identity(n, n),
            };
            let c = &m * &out.covariance * m.transpose();
            (0..n).map(|i| (0..n).map(|j| c[(i, j)]).collect()).collect()
        } else {
            Vec::new()
        };
        let mut report = FitReport {
            model_id: self.model_id.to_string(),
            converged,
            termination: out.termination,
            iterations: out.iterations,
            chi2: out.chi2,
            dof,
            points: out.residuals.len(),
            param_names: names.clone(),
            params: names.iter().cloned().zip(theta.iter().copied()).collect(),
            std_errors: BTreeMap::new(),
            scaled_std_errors: BTreeMap::new(),
            covariance,
            derived: BTreeMap::new(),
            derived_std_errors: BTreeMap::new(),
            initialization: names.iter().cloned().zip(self.natural(u0)).collect(),
            fixed: BTreeMap::new(),
            warnings,
            inputs: BTreeMap::new(),
        };
        if converged {
            let scale = report.error_scale().sqrt();
            for (i, name) in names.iter().enumerate() {
                let s = report.covariance[i][i].max(0.0).sqrt();
                report.std_errors.insert(name.clone(), s);
                report.scaled_std_errors.insert(name.clone(), s * scale);
            }
        }
        report
    }
}

fn rank(o: &LmOutcome) -> f64 {
    if o.chi2.is_finite() { o.chi2 } else { f64::INFINITY }
}

/// Rejects tables with non-finite entries or non-positive errors.
pub(crate) fn check_table(rows: &[(f64, f64, f64)], min_points: usize, what: &str) -> Result<()> {
    if rows.len() < min_points {
        return Err(Error::input(format!("{what} needs at least {min_points} points, got {}", rows.len())));
    }
    if rows.iter().any(|(x, y, s)| !(x.is_finite() && y.is_finite() && s.is_finite() && *s > 0.0)) {
        return Err(Error::input(format!("{what}: values must be finite and errors positive")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_problem() -> FitReport {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let f = move |p: &[f64]| xs.iter().map(|x| (1.0 + 2.0 * x + 0.3 * (x * 1.7).sin()) - (p[0] + p[1] * x)).collect::<Vec<_>>();
        let prob = Problem { model_id: "line", names: &["a", "b"], residuals: &f, jacobian: None, to_natural: None };
        prob.solve(&[vec![0.0, 0.0]]).0
    }

    #[test]
    fn toml_round_trip() {
        let mut r = line_problem().with_input("data.csv", "abc");
        r.add_derived("sum", |p| p[0] + p[1]);
        let text = r.to_toml().unwrap();
        let back = FitReport::from_toml(&text, "r.toml").unwrap();
        assert_eq!(back, r);
        assert!(text.contains("model_id = \"line\""));
    }

    #[test]
    fn scaled_errors_grow_with_misfit() {
        let r = line_problem();
        assert!(r.converged);
        assert_eq!(r.dof, 8);
        assert!(r.reduced_chi2().unwrap() < 1.0);
        assert_eq!(r.std_errors["a"], r.scaled_std_errors["a"]);
        let d = r.derived_std_errors.get("x");
        assert!(d.is_none());
    }

    #[test]
    fn derived_error_of_sum_uses_covariance() {
        let mut r = line_problem();
        r.add_derived("sum", |p| p[0] + p[1]);
        let c = &r.covariance;
        let expect = (c[0][0] + c[1][1] + 2.0 * c[0][1]).sqrt();
        assert!((r.derived_std_errors["sum"] - expect).abs() < 1e-6 * expect);
    }
}
