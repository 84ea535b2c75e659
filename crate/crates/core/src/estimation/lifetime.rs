use super::report::{check_table, Fit, ModelCurve, Problem};
use crate::error::Result;

pub const LIFETIME_MODEL: &str = "lifetime-2exp";

fn decay(t: f64, p: &[f64]) -> f64 {
    p[0] * (-t / p[1]).exp() + p[2] * (-t / p[3]).exp()
}

/// Internal `(a_fast, ln τ_fast, a_slow, ln(τ_slow − τ_fast))`.
fn to_natural(u: &[f64]) -> Vec<f64> {
    let fast = u[1].exp();
    vec![u[0], fast, u[2], fast + u[3].exp()]
}

/// `(amplitude, lifetime)` of a log-linear fit to the positive points.
fn log_linear(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let pos: Vec<(f64, f64)> = pts.iter().filter(|p| p.1 > 0.0).map(|p| (p.0, p.1.ln())).collect();
    if pos.len() < 2 {
        return None;
    }
    let n = pos.len() as f64;
    let mx = pos.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pos.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pos.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pos.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0 && sxy < 0.0).then(|| {
        let slope = sxy / sxx;
        ((my - slope * mx).exp(), -1.0 / slope)
    })
}

/// Double-exponential fit to a decay histogram `(t_ps, counts)` with
/// Poisson errors. The component with the larger area `a·τ` is reported as
/// `t1_ps`.
pub fn fit_lifetime(data: &[(f64, f64)]) -> Result<Fit> {
    let table: Vec<(f64, f64, f64)> = data.iter().map(|&(t, y)| (t, y, y.max(1.0).sqrt())).collect();
    check_table(&table, 6, "lifetime fit")?;
    if table.iter().any(|r| r.0 < 0.0) {
        return Err(crate::error::Error::input("lifetime data must start at t >= 0"));
    }
    let mut pts: Vec<(f64, f64)> = data.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let t_max = pts.last().map(|p| p.0).unwrap_or(1.0).max(1.0);
    let tail: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0 >= 0.4 * t_max).collect();
    let (a_slow, tau_slow) = log_linear(&tail).unwrap_or((pts[0].1, t_max / 3.0));
    let head: Vec<(f64, f64)> = pts
        .iter()
        .filter(|p| p.0 < 0.4 * t_max)
        .map(|&(t, y)| (t, y - a_slow * (-t / tau_slow).exp()))
        .collect();
    let (a_fast, tau_fast) = log_linear(&head).filter(|f| f.1 < tau_slow).unwrap_or((0.1 * a_slow, tau_slow / 5.0));
    let u0 = vec![a_fast, tau_fast.ln(), a_slow, (tau_slow - tau_fast).max(1e-3 * tau_slow).ln()];
    let u_alt = vec![0.2 * pts[0].1, (tau_slow / 10.0).ln(), 0.8 * pts[0].1, (0.9 * tau_slow).ln()];
    let res = |u: &[f64]| {
        let p = to_natural(u);
        table.iter().map(|&(t, y, s)| (y - decay(t, &p)) / s).collect::<Vec<_>>()
    };
    let nat = |u: &[f64]| to_natural(u);
    let problem = Problem {
        model_id: LIFETIME_MODEL,
        names: &["a_fast", "tau_fast_ps", "a_slow", "tau_slow_ps"],
        residuals: &res,
        jacobian: None,
        to_natural: Some(&nat),
    };
    let (mut report, _) = problem.solve(&[u0, u_alt]);
    let p: Vec<f64> = report.param_names.iter().map(|n| report.params[n]).collect();
    let weak = |a: &str, t: &str| match (report.std_errors.get(a), report.std_errors.get(t)) {
        (Some(sa), Some(st)) => report.params[a].abs() < 2.0 * sa || !(st / report.params[t] < 1.0),
        _ => true,
    };
    if p[3] / p[1] < 1.2 || weak("a_fast", "tau_fast_ps") || weak("a_slow", "tau_slow_ps") {
        report.warnings.push(format!(
            "lifetimes {:.0} and {:.0} ps are degenerate or one component is not significant; \
             refit with a single exponential",
            p[1], p[3]
        ));
    }
    // Dominant component by its area within the data range.
    let area = move |a: f64, tau: f64| if tau.is_finite() { a * tau * -(-t_max / tau).exp_m1() } else { a * t_max };
    report.add_derived("t1_ps", move |p| if area(p[0], p[1]) > area(p[2], p[3]) { p[1] } else { p[3] });
    let curve = pts.iter().map(|&(t, _)| (t, decay(t, &p))).collect();
    Ok(Fit { report, curves: vec![ModelCurve { label: "decay".into(), points: curve }] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::fit_fringe_envelope;
    use crate::models::{fourier_limit_ratio, fringe_contrast, FringeEnvelopeParams};
    use crate::domain::EnergyUeV;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn synthetic(p: [f64; 4], seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..400)
            .map(|i| i as f64 * 25.0)
            .map(|t| (t, Poisson::new(decay(t, &p)).unwrap().sample(&mut rng)))
            .collect()
    }

    #[test]
    fn recovers_dominant_lifetime() {
        let r = fit_lifetime(&synthetic([8000.0, 300.0, 50000.0, 1765.0], 1)).unwrap().report;
        assert!(r.converged);
        let (t1, s) = (r.derived["t1_ps"], r.derived_std_errors["t1_ps"]);
        assert!((t1 - 1765.0).abs() < 2.0 * s, "{t1} ± {s}");
        assert!((r.params["tau_fast_ps"] - 300.0).abs() < 3.0 * r.std_errors["tau_fast_ps"]);
    }

    #[test]
    fn single_exponential_second_amplitude_vanishes() {
        let r = fit_lifetime(&synthetic([0.0, 300.0, 5000.0, 1765.0], 2)).unwrap().report;
        let (a, s) = (r.params["a_fast"], r.std_errors.get("a_fast").copied().unwrap_or(f64::INFINITY));
        assert!(a.abs() < 3.0 * s + 5.0, "{a} ± {s}");
        assert!((r.derived["t1_ps"] - 1765.0).abs() < 30.0);
    }

    #[test]
    fn degenerate_lifetimes_warn() {
        let r = fit_lifetime(&synthetic([2000.0, 1600.0, 3000.0, 1765.0], 3)).unwrap().report;
        assert!(r.warnings.iter().any(|w| w.contains("single exponential")), "{:?}", r.warnings);
    }

    #[test]
    fn transform_limit_ratio_from_fits() {
        let rr = fit_lifetime(&synthetic([0.0, 300.0, 20000.0, 1765.0], 4)).unwrap().report;
        let t1 = rr.derived["t1_ps"];
        let p = FringeEnvelopeParams { a0: 0.97, t2_ps: 1058.0, delta_e_uev: EnergyUeV(18.5) };
        let table: Vec<(f64, f64, f64)> = (0..151).map(|i| i as f64 * 20.0).map(|t| (t, fringe_contrast(t, &p).abs(), 0.01)).collect();
        let t2 = fit_fringe_envelope(&table).unwrap().report.params["t2_ps"];
        let (ratio, w) = fourier_limit_ratio(t2, t1).unwrap();
        assert!((ratio - 0.298).abs() < 0.005, "{ratio}");
        assert!(w.is_none());
    }
}
