use std::f64::consts::TAU;

use nalgebra::DMatrix;

use super::report::{check_table, Fit, ModelCurve, Problem};
use super::spectral::{significance_threshold, spectral_peaks};
use crate::domain::{EnergyUeV, HBAR_UEV_PS};
use crate::error::{Error, Result};
use crate::models::{fringe_contrast, FringeEnvelopeParams};

pub const FRINGE_MODEL: &str = "fringe-envelope";
pub const OSCILLATION_MODEL: &str = "damped-cosine";

/// Measured visibility `|A0 e^{−|τ|/T2} cos(ΔEτ/ħ)|` and its derivatives
/// with respect to `(A0, T2, ΔE)`.
fn envelope(t: f64, p: &[f64]) -> (f64, [f64; 3]) {
    let e = (-t.abs() / p[1]).exp();
    let (s, c) = (p[2] * t / HBAR_UEV_PS).sin_cos();
    let f = p[0] * e * c;
    let sign = if f < 0.0 { -1.0 } else { 1.0 };
    (
        f.abs(),
        [sign * e * c, sign * p[0] * e * c * t.abs() / (p[1] * p[1]), -sign * p[0] * e * s * t / HBAR_UEV_PS],
    )
}

/// Residual Jacobian of the envelope model on `data` (analytic).
pub fn fringe_jacobian(data: &[(f64, f64, f64)], p: &[f64]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(data.len(), 3);
    for (i, &(t, _, s)) in data.iter().enumerate() {
        let d = envelope(t, p).1;
        for k in 0..3 {
            j[(i, k)] = -d[k] / s;
        }
    }
    j
}

pub fn fringe_residuals(data: &[(f64, f64, f64)], p: &[f64]) -> Vec<f64> {
    data.iter().map(|&(t, v, s)| (v - envelope(t, p).0) / s).collect()
}

/// `(A0, T2)` from a log-linear fit to the local maxima of the table.
fn upper_peak_decay(data: &[(f64, f64, f64)]) -> (f64, f64) {
    let mut pts: Vec<(f64, f64)> = data.iter().map(|&(t, v, _)| (t.abs(), v)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let span = pts.last().map(|p| p.0).unwrap_or(1.0).max(1.0);
    let peaks: Vec<(f64, f64)> = (0..pts.len())
        .filter(|&i| {
            pts[i].1 > 0.0
                && (i == 0 || pts[i].1 >= pts[i - 1].1)
                && (i + 1 == pts.len() || pts[i].1 >= pts[i + 1].1)
        })
        .map(|i| (pts[i].0, pts[i].1.ln()))
        .collect();
    if peaks.len() >= 2 {
        let n = peaks.len() as f64;
        let mx = peaks.iter().map(|p| p.0).sum::<f64>() / n;
        let my = peaks.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = peaks.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = peaks.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 && sxy < 0.0 {
            let slope = sxy / sxx;
            let a0 = (my - slope * mx).exp().min(1.0);
            return (a0, -1.0 / slope);
        }
    }
    let a0 = pts.iter().map(|p| p.1).fold(0.0, f64::max).clamp(1e-3, 1.0);
    (a0, span)
}

/// Fits the first-order coherence envelope to `(delay_ps, visibility, σ)`.
pub fn fit_fringe_envelope(data: &[(f64, f64, f64)]) -> Result<Fit> {
    check_table(data, 6, "fringe fit")?;
    let (a0, t2) = upper_peak_decay(data);
    let span = data.iter().map(|r| r.0.abs()).fold(0.0, f64::max).max(1.0);
    let pairs: Vec<(f64, f64)> = data.iter().map(|r| (r.0.abs(), r.1)).collect();
    let mut starts: Vec<Vec<f64>> =
        spectral_peaks(&pairs).iter().take(3).map(|&(w, _)| vec![a0, t2, 0.5 * HBAR_UEV_PS * w]).collect();
    starts.push(vec![a0, t2, 0.5 * HBAR_UEV_PS * TAU / (4.0 * span)]);
    let res = |p: &[f64]| fringe_residuals(data, p);
    let jac = |p: &[f64]| fringe_jacobian(data, p);
    let problem = Problem {
        model_id: FRINGE_MODEL,
        names: &["a0", "t2_ps", "delta_e_uev"],
        residuals: &res,
        jacobian: Some(&jac),
        to_natural: None,
    };
    let (mut report, _) = problem.solve(&starts);
    // The model is even in A0 and ΔE; report the positive branch.
    for k in ["a0", "delta_e_uev"] {
        if let Some(v) = report.params.get_mut(k) {
            *v = v.abs();
        }
    }
    let p = FringeEnvelopeParams {
        a0: report.params["a0"],
        t2_ps: report.params["t2_ps"],
        delta_e_uev: EnergyUeV(report.params["delta_e_uev"]),
    };
    let curve = data.iter().map(|r| (r.0, fringe_contrast(r.0, &p).abs())).collect();
    Ok(Fit { report, curves: vec![ModelCurve { label: "visibility".into(), points: curve }] })
}

/// Splitting read off an oscillating visibility table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beat {
    Found { delta_e: EnergyUeV, std_error_uev: f64 },
    NoBeat,
}

/// Fine-structure splitting from `(delay_ps, visibility)`: the periodogram
/// peak, refined by the envelope fit with equal weights.
///
/// A constant table gives [`Beat::NoBeat`]; a varying one without a
/// significant oscillation is an error.
pub fn beat_frequency(data: &[(f64, f64)]) -> Result<Beat> {
    if data.len() < 6 {
        return Err(Error::input(format!("beat estimate needs at least 6 points, got {}", data.len())));
    }
    let mean = data.iter().map(|d| d.1).sum::<f64>() / data.len() as f64;
    if data.iter().all(|d| (d.1 - mean).abs() <= 1e-12 * mean.abs().max(1.0)) {
        return Ok(Beat::NoBeat);
    }
    let pairs: Vec<(f64, f64)> = data.iter().map(|d| (d.0.abs(), d.1)).collect();
    let peaks = spectral_peaks(&pairs);
    let Some(&(w, power)) = peaks.first().filter(|p| p.1 > significance_threshold(data.len())) else {
        return Err(Error::Undefined("no significant oscillation in the visibility table".into()));
    };
    let span = pairs.iter().map(|p| p.0).fold(0.0, f64::max) - pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    // |cos| oscillates at twice the beat angular frequency.
    let periods = span * 0.5 * w / TAU;
    if periods < 2.0 {
        return Err(Error::input(format!("only {periods:.1} beat periods sampled, need 2 (peak power {power:.1})")));
    }
    let table: Vec<(f64, f64, f64)> = data.iter().map(|d| (d.0, d.1, 1.0)).collect();
    let fit = fit_fringe_envelope(&table)?;
    let r = &fit.report;
    match (r.converged, r.std_errors.get("delta_e_uev")) {
        (true, Some(&se)) => {
            // Unit weights: the residual scatter sets the error.
            let scale = r.reduced_chi2().unwrap_or(1.0).sqrt();
            Ok(Beat::Found { delta_e: EnergyUeV(r.params["delta_e_uev"]), std_error_uev: se * scale })
        }
        _ => Ok(Beat::Found { delta_e: EnergyUeV(0.5 * HBAR_UEV_PS * w), std_error_uev: f64::NAN }),
    }
}

fn damped(t: f64, p: &[f64]) -> f64 {
    p[0] + p[1] * (-t.abs() / p[4]).exp() * (p[2] * t + p[3]).cos()
}

/// Weighted sinusoid scan: at each trial ω the offset and both quadratures
/// are solved linearly. Returns `(ω, offset, a_cos, a_sin)` at the local χ²
/// minima, best first. Frequencies run from two periods over the range to
/// the Nyquist limit of the median step.
fn sinusoid_scan(data: &[(f64, f64, f64)]) -> Vec<(f64, f64, f64, f64)> {
    let mut ts: Vec<f64> = data.iter().map(|r| r.0).collect();
    ts.sort_by(f64::total_cmp);
    let range = ts[ts.len() - 1] - ts[0];
    let mut steps: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).collect();
    if !(range > 0.0) || steps.is_empty() {
        return Vec::new();
    }
    steps.sort_by(f64::total_cmp);
    let (w_lo, w_hi) = (2.0 * TAU / range, std::f64::consts::PI / steps[steps.len() / 2]);
    let dw = TAU / (8.0 * range);
    let solve = |w: f64| {
        let mut a = DMatrix::zeros(data.len(), 3);
        let mut b = DMatrix::zeros(data.len(), 1);
        for (i, &(t, y, s)) in data.iter().enumerate() {
            a[(i, 0)] = 1.0 / s;
            a[(i, 1)] = (w * t).cos() / s;
            a[(i, 2)] = (w * t).sin() / s;
            b[(i, 0)] = y / s;
        }
        let x = a.clone().svd(true, true).solve(&b, 1e-12).ok()?;
        let chi2 = (a * &x - b).norm_squared();
        Some((chi2, (w, x[(0, 0)], x[(1, 0)], x[(2, 0)])))
    };
    let grid: Vec<_> = (0..)
        .map(|k| w_lo + k as f64 * dw)
        .take_while(|&w| w <= w_hi)
        .filter_map(solve)
        .collect();
    let mut minima: Vec<_> = (0..grid.len())
        .filter(|&i| (i == 0 || grid[i].0 < grid[i - 1].0) && (i + 1 == grid.len() || grid[i].0 <= grid[i + 1].0))
        .map(|i| grid[i])
        .collect();
    minima.sort_by(|a, b| a.0.total_cmp(&b.0));
    minima.into_iter().map(|m| m.1).collect()
}

/// Fits `c + a·e^{−|t|/τ}·cos(ωt + φ)` to `(t_ps, y, σ)`; derived are the
/// period `2π/ω` and the energy `ħω`.
pub fn fit_damped_oscillation(data: &[(f64, f64, f64)]) -> Result<Fit> {
    check_table(data, 6, "oscillation fit")?;
    let span = data.iter().map(|r| r.0.abs()).fold(0.0, f64::max).max(1.0);
    let starts: Vec<Vec<f64>> =
        sinusoid_scan(data).into_iter().take(3).map(|(w, c, a, b)| vec![c, a.hypot(b).max(1e-6), w, (-b).atan2(a), 10.0 * span]).collect();
    if starts.is_empty() {
        return Err(Error::Undefined("no oscillation in the table".into()));
    }
    let res = |p: &[f64]| data.iter().map(|&(t, y, s)| (y - damped(t, p)) / s).collect::<Vec<_>>();
    let problem = Problem {
        model_id: OSCILLATION_MODEL,
        names: &["offset", "amplitude", "omega_rad_per_ps", "phase_rad", "decay_ps"],
        residuals: &res,
        jacobian: None,
        to_natural: None,
    };
    let (mut report, _) = problem.solve(&starts);
    report.add_derived("period_ps", |p| TAU / p[2].abs());
    report.add_derived("energy_uev", |p| HBAR_UEV_PS * p[2].abs());
    let p: Vec<f64> = report.param_names.iter().map(|n| report.params[n]).collect();
    let curve = data.iter().map(|r| (r.0, damped(r.0, &p))).collect();
    Ok(Fit { report, curves: vec![ModelCurve { label: "oscillation".into(), points: curve }] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::numeric_jacobian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn table(a0: f64, t2: f64, de: f64, noise: f64, seed: u64) -> Vec<(f64, f64, f64)> {
        let p = FringeEnvelopeParams { a0, t2_ps: t2, delta_e_uev: EnergyUeV(de) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, 1.0).unwrap();
        (0..151)
            .map(|i| i as f64 * 20.0)
            .map(|t| {
                let v = fringe_contrast(t, &p).abs();
                (t, v + noise * n.sample(&mut rng), noise.max(0.01))
            })
            .collect()
    }

    #[test]
    fn noiseless_recovery_exact() {
        let f = fit_fringe_envelope(&table(0.95, 1058.0, 18.5, 0.0, 0)).unwrap();
        let r = &f.report;
        assert!(r.converged);
        assert!(r.chi2 < 1e-12, "{}", r.chi2);
        for (k, v) in [("a0", 0.95), ("t2_ps", 1058.0), ("delta_e_uev", 18.5)] {
            assert!((r.params[k] / v - 1.0).abs() < 1e-6, "{k}: {}", r.params[k]);
        }
        assert_eq!(r.dof, 148);
        assert_eq!(f.curves[0].points.len(), 151);
    }

    #[test]
    fn noisy_recovery_within_two_sigma() {
        let f = fit_fringe_envelope(&table(0.95, 1058.0, 18.5, 0.05 * 0.95, 3)).unwrap();
        let r = &f.report;
        for (k, v) in [("t2_ps", 1058.0), ("delta_e_uev", 18.5)] {
            assert!((r.params[k] - v).abs() < 2.0 * r.std_errors[k], "{k}: {} ± {}", r.params[k], r.std_errors[k]);
        }
    }

    #[test]
    fn pull_distribution_calibrated() {
        let truth = [("a0", 0.95), ("t2_ps", 1058.0), ("delta_e_uev", 18.5)];
        let mut pulls: Vec<Vec<f64>> = vec![Vec::new(); 3];
        for seed in 0..60 {
            let r = fit_fringe_envelope(&table(0.95, 1058.0, 18.5, 0.03, 100 + seed)).unwrap().report;
            assert!(r.converged);
            for (k, (name, v)) in truth.iter().enumerate() {
                pulls[k].push((r.params[*name] - v) / r.std_errors[*name]);
            }
        }
        for (k, p) in pulls.iter().enumerate() {
            let n = p.len() as f64;
            let mean = p.iter().sum::<f64>() / n;
            let var = p.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!(mean.abs() < 0.2, "{}: mean pull {mean}", truth[k].0);
            assert!((0.7..1.4).contains(&var), "{}: pull variance {var}", truth[k].0);
        }
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let data = table(0.9, 800.0, 12.0, 0.0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = [rng.random_range(0.3..1.0), rng.random_range(200.0..2000.0), rng.random_range(2.0..30.0)];
            let a = fringe_jacobian(&data, &p);
            let n = numeric_jacobian(&|q: &[f64]| fringe_residuals(&data, q), &p, data.len());
            for i in 0..data.len() {
                // Skip rows sitting on a zero of the cosine, where |f| has a kink.
                if envelope(data[i].0, &p).0 < 1e-4 {
                    continue;
                }
                for k in 0..3 {
                    let scale = a[(i, k)].abs().max(1e-3);
                    assert!((a[(i, k)] - n[(i, k)]).abs() / scale < 1e-5, "row {i} col {k}: {} vs {}", a[(i, k)], n[(i, k)]);
                }
            }
        }
    }

    #[test]
    fn beat_frequency_examples() {
        let data: Vec<(f64, f64)> = table(0.95, 331.0, 18.5, 0.0, 0).iter().map(|r| (r.0, r.1)).collect();
        match beat_frequency(&data).unwrap() {
            Beat::Found { delta_e, .. } => assert!((delta_e.value() / 18.5 - 1.0).abs() < 0.02, "{delta_e}"),
            Beat::NoBeat => panic!("beat expected"),
        }
        let flat: Vec<(f64, f64)> = (0..40).map(|i| (i as f64 * 20.0, 0.8)).collect();
        assert_eq!(beat_frequency(&flat).unwrap(), Beat::NoBeat);
    }

    #[test]
    fn oscillation_period_recovered() {
        let period = TAU * HBAR_UEV_PS / 5.7;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = Normal::new(0.0, 0.01).unwrap();
        let data: Vec<(f64, f64, f64)> = (0..100)
            .map(|i| -3000.0 + 30.0 * i as f64)
            .map(|t| (t, 0.6 + 0.25 * (-t.abs() / 2500.0f64).exp() * (TAU * t / period + 0.4).cos() + n.sample(&mut rng), 0.01))
            .collect();
        let r = fit_damped_oscillation(&data).unwrap().report;
        assert!(r.converged);
        let p = r.derived["period_ps"];
        assert!((p / period - 1.0).abs() < 3.0 * r.derived_std_errors["period_ps"] / period + 1e-3, "{p} vs {period}");
        assert!((r.derived["energy_uev"] - 5.7).abs() < 0.1);
    }
}
