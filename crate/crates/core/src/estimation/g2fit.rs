use serde::{Deserialize, Serialize};

use super::report::{Fit, ModelCurve, Problem};
use crate::correlation::CorrelationHistogram;
use crate::error::{Error, Result};
use crate::models::{binned_convolved, hbt_from_qd, G2QdModel, MAX_GRID_STEP_PS};

/// Three-level (`Y = 0`) or four-level autocorrelation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum G2Levels {
    Three,
    Four,
}

impl G2Levels {
    pub fn model_id(self) -> &'static str {
        match self {
            G2Levels::Three => "g2-3level",
            G2Levels::Four => "g2-4level",
        }
    }

    fn names(self) -> &'static [&'static str] {
        match self {
            G2Levels::Three => &["x", "tau1_ps", "tau2_ps", "beta", "scale"],
            G2Levels::Four => &["x", "y", "tau1_ps", "tau2_ps", "tau3_ps", "beta", "scale"],
        }
    }
}

/// `(model, β, scale)` from natural parameters.
fn unpack(levels: G2Levels, p: &[f64]) -> (G2QdModel, f64, f64) {
    match levels {
        G2Levels::Three => (G2QdModel { x: p[0], y: 0.0, tau1_ps: p[1], tau2_ps: p[2], tau3_ps: p[2] }, p[3], p[4]),
        G2Levels::Four => (G2QdModel { x: p[0], y: p[1], tau1_ps: p[2], tau2_ps: p[3], tau3_ps: p[4] }, p[5], p[6]),
    }
}

/// Internal coordinates keep the timescales ordered: `ln τ1` and the log
/// of each positive gap.
fn to_natural(levels: G2Levels, u: &[f64]) -> Vec<f64> {
    match levels {
        G2Levels::Three => {
            let t1 = u[1].exp();
            vec![u[0], t1, t1 + u[2].exp(), u[3], u[4]]
        }
        G2Levels::Four => {
            let t1 = u[2].exp();
            let t2 = t1 + u[3].exp();
            vec![u[0], u[1], t1, t2, t2 + u[4].exp(), u[5], u[6]]
        }
    }
}

fn to_internal(levels: G2Levels, p: &[f64]) -> Vec<f64> {
    match levels {
        G2Levels::Three => vec![p[0], p[1].ln(), (p[2] - p[1]).ln(), p[3], p[4]],
        G2Levels::Four => vec![p[0], p[1], p[2].ln(), (p[3] - p[2]).ln(), (p[4] - p[3]).ln(), p[5], p[6]],
    }
}

/// Bin-averaged, detector-convolved `scale·(g_qd + 2β + β²)/(1+β)²`.
pub fn g2_hbt_binned(levels: G2Levels, p: &[f64], edges: &[f64], fwhm_ps: f64) -> Result<Vec<f64>> {
    let (m, beta, scale) = unpack(levels, p);
    let norm = scale / ((1.0 + beta) * (1.0 + beta));
    binned_convolved(|t| norm * (m.eval(t) + 2.0 * beta + beta * beta), edges, fwhm_ps, MAX_GRID_STEP_PS)
}

/// Fits the emitter autocorrelation with background to a normalized
/// histogram, with the model convolved with a Gaussian response of
/// `fwhm_ps`. Bin errors are Poisson, `√max(counts, 1)`.
///
/// `g2_zero` (deconvolved, `(2β+β²)/(1+β)²`) and `g2_zero_convolved` are
/// derived.
pub fn fit_g2_hbt(hist: &CorrelationHistogram, levels: G2Levels, fwhm_ps: f64) -> Result<Fit> {
    let (Some(norm), Some(baseline)) = (hist.normalized.as_ref(), hist.baseline) else {
        return Err(Error::input("histogram has no baseline; normalize it before fitting"));
    };
    let n_par = levels.names().len();
    if hist.counts.len() <= n_par {
        return Err(Error::input(format!("{} bins cannot constrain {n_par} parameters", hist.counts.len())));
    }
    let edges = hist.bin_edges_ps();
    let sigma: Vec<f64> = hist.counts.iter().map(|&c| (c.max(1) as f64).sqrt() / baseline).collect();
    let res = |u: &[f64]| {
        let p = to_natural(levels, u);
        match g2_hbt_binned(levels, &p, &edges, fwhm_ps) {
            Ok(m) => norm.iter().zip(&m).zip(&sigma).map(|((y, m), s)| (y - m) / s).collect(),
            Err(_) => vec![f64::NAN; norm.len()],
        }
    };
    let nat = |u: &[f64]| to_natural(levels, u);
    let bin = hist.bins.bin_ps as f64;
    let span = hist.bins.span_ps as f64;
    let zero = norm[norm.len() / 2];
    let beta0 = crate::domain::QuantumDotParams::beta_for_g2_zero(zero.clamp(0.0, 0.95)).unwrap_or(0.0) * 0.5;
    let bunch = (norm.iter().copied().fold(f64::MIN, f64::max) - 1.0).max(0.05);
    // Timescales spaced geometrically between the bin width and the span.
    let ratio = (span / bin).max(4.0);
    let geo = |k: f64, n: f64| bin * ratio.powf(k / n);
    let p_geo = match levels {
        G2Levels::Three => vec![bunch, geo(1.0, 3.0), geo(2.0, 3.0), beta0, 1.0],
        G2Levels::Four => vec![0.7 * bunch, 0.3 * bunch, geo(1.0, 4.0), geo(2.0, 4.0), geo(3.0, 4.0), beta0, 1.0],
    };
    // Second start: antibunching width from the half-recovery delay.
    let half = (zero + 1.0) / 2.0;
    let mid = norm.len() / 2;
    let t_half = (mid..norm.len()).find(|&i| norm[i] >= half).map(|i| hist.bins.center(i)).unwrap_or(bin).max(bin);
    let t1 = t_half / std::f64::consts::LN_2;
    let p_data = match levels {
        G2Levels::Three => vec![bunch, t1, t1 + (span / 4.0).max(2.0 * t1), beta0, 1.0],
        G2Levels::Four => vec![0.7 * bunch, 0.3 * bunch, t1, 5.0 * t1, 5.0 * t1 + (span / 4.0).max(10.0 * t1), beta0, 1.0],
    };
    let starts: Vec<Vec<f64>> = [p_geo, p_data].iter().map(|p| to_internal(levels, p)).collect();
    let problem = Problem { model_id: levels.model_id(), names: levels.names(), residuals: &res, jacobian: None, to_natural: Some(&nat) };
    let (mut report, _) = problem.solve(&starts);
    report.fixed.insert("response_fwhm_ps".into(), fwhm_ps);
    if levels == G2Levels::Three {
        report.fixed.insert("y".into(), 0.0);
    }
    let p: Vec<f64> = report.param_names.iter().map(|n| report.params[n]).collect();
    let (m, _, _) = unpack(levels, &p);
    let slowest = if levels == G2Levels::Four { m.tau3_ps } else { m.tau2_ps };
    let collapsed = levels == G2Levels::Four && m.tau3_ps / m.tau2_ps - 1.0 < 1e-3;
    if span < 3.0 * slowest || collapsed {
        report.warnings.push(format!(
            "span {span} ps does not constrain the slowest timescale ({slowest:.0} ps{})",
            if collapsed { ", merged with the one below" } else { "" }
        ));
    }
    if let Some(w) = m.check_non_negative() {
        report.warnings.push(w.to_string());
    }
    let beta_idx = n_par - 2;
    report.add_derived("g2_zero", |p| {
        let b = p[beta_idx];
        (2.0 * b + b * b) / ((1.0 + b) * (1.0 + b))
    });
    report.add_derived("g2_zero_convolved", |p| {
        let (m, b, _) = unpack(levels, p);
        hbt_from_qd(m.eval_convolved(0.0, fwhm_ps), b)
    });
    let curve = g2_hbt_binned(levels, &p, &edges, fwhm_ps)?;
    Ok(Fit {
        report,
        curves: vec![ModelCurve { label: "g2".into(), points: hist.centers_ps().into_iter().zip(curve).collect() }],
    })
}
