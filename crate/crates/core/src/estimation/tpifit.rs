use serde::{Deserialize, Serialize};

use super::report::{Fit, ModelCurve, Problem};
use crate::correlation::CorrelationHistogram;
use crate::domain::EnergyUeV;
use crate::error::{Error, Result};
use crate::models::{binned_convolved, g2_tpi, peak_visibility, TpiBaseline, TpiParams, MAX_GRID_STEP_PS};

pub const TPI_MODEL: &str = "tpi";

/// Settings of the joint co/cross-polarized fit.
///
/// Intensities, background and the dot's autocorrelation come from
/// `fixed`; its `t2_ps` and `detuning_uev` are only starting values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpiFitSpec {
    pub fixed: TpiParams,
    /// Whether the laser detuning is free; otherwise it stays at
    /// `fixed.detuning_uev`.
    pub fit_detuning: bool,
    pub response_fwhm_ps: f64,
}

fn params_of(spec: &TpiFitSpec, p: &[f64]) -> TpiParams {
    let detuning = if spec.fit_detuning { EnergyUeV(p[1]) } else { spec.fixed.detuning_uev };
    TpiParams { t2_ps: p[0], detuning_uev: detuning, ..spec.fixed }
}

fn binned(p: &TpiParams, edges: &[f64], fwhm: f64) -> Result<Vec<f64>> {
    binned_convolved(|t| g2_tpi(t, p, TpiBaseline::Normalized), edges, fwhm, MAX_GRID_STEP_PS)
}

/// Joint fit of the co- and cross-polarized dot/laser correlations.
///
/// Free are the coherence time `t2_ps` (reported also as `tau_c_ps`), the
/// detuning when requested, and one normalization per histogram. Derived
/// are the peak visibility without (`peak_visibility`) and with
/// (`peak_visibility_convolved`) the detector response.
pub fn fit_tpi(co: &CorrelationHistogram, cross: &CorrelationHistogram, spec: &TpiFitSpec) -> Result<Fit> {
    if co.bins != cross.bins {
        return Err(Error::input("co- and cross-polarized histograms must share their axis"));
    }
    spec.fixed.validate()?;
    let (Some(yc), Some(yx), Some(bc), Some(bx)) = (co.normalized.as_ref(), cross.normalized.as_ref(), co.baseline, cross.baseline)
    else {
        return Err(Error::input("histograms have no baseline; normalize them before fitting"));
    };
    let edges = co.bin_edges_ps();
    let sc: Vec<f64> = co.counts.iter().map(|&c| (c.max(1) as f64).sqrt() / bc).collect();
    let sx: Vec<f64> = cross.counts.iter().map(|&c| (c.max(1) as f64).sqrt() / bx).collect();
    let fwhm = spec.response_fwhm_ps;
    let names: &[&str] =
        if spec.fit_detuning { &["t2_ps", "detuning_uev", "norm_co", "norm_cross"] } else { &["t2_ps", "norm_co", "norm_cross"] };
    let k = names.len();
    let nat = |u: &[f64]| {
        let mut p = u.to_vec();
        p[0] = u[0].exp();
        p
    };
    let cross_shape = binned(&spec.fixed.cross_polarized(), &edges, fwhm)?;
    let res = |u: &[f64]| {
        let p = nat(u);
        let tp = params_of(spec, &p).co_polarized();
        let Ok(m) = binned(&tp, &edges, fwhm) else {
            return vec![f64::NAN; 2 * edges.len() - 2];
        };
        let (nc, nx) = (p[k - 2], p[k - 1]);
        let mut r: Vec<f64> = yc.iter().zip(&m).zip(&sc).map(|((y, m), s)| (y - nc * m) / s).collect();
        r.extend(yx.iter().zip(&cross_shape).zip(&sx).map(|((y, m), s)| (y - nx * m) / s));
        r
    };
    let t2_starts = [spec.fixed.t2_ps, 0.5 * spec.fixed.t2_ps, 2.0 * spec.fixed.t2_ps];
    let det0 = spec.fixed.detuning_uev.value();
    let det_starts: Vec<f64> = if det0 != 0.0 { vec![det0] } else { vec![0.5, -0.5] };
    let mut starts = Vec::new();
    for &t in &t2_starts {
        if spec.fit_detuning {
            for &d in &det_starts {
                starts.push(vec![t.ln(), d, 1.0, 1.0]);
            }
        } else {
            starts.push(vec![t.ln(), 1.0, 1.0]);
        }
    }
    let problem = Problem { model_id: TPI_MODEL, names, residuals: &res, jacobian: None, to_natural: Some(&nat) };
    let (mut report, _) = problem.solve(&starts);
    report.fixed.insert("eta".into(), spec.fixed.ratio.eta);
    report.fixed.insert("alpha2".into(), spec.fixed.ratio.alpha2);
    report.fixed.insert("beta".into(), spec.fixed.beta);
    report.fixed.insert("response_fwhm_ps".into(), fwhm);
    if !spec.fit_detuning {
        report.fixed.insert("detuning_uev".into(), det0);
    }
    report.add_derived("tau_c_ps", |p| p[0]);
    report.add_derived("peak_visibility", |p| peak_visibility(&params_of(spec, p), 0.0).unwrap_or(f64::NAN));
    report.add_derived("peak_visibility_convolved", |p| peak_visibility(&params_of(spec, p), fwhm).unwrap_or(f64::NAN));
    let p: Vec<f64> = report.param_names.iter().map(|n| report.params[n]).collect();
    let tp = params_of(spec, &p);
    let centers = co.centers_ps();
    let mc = binned(&tp.co_polarized(), &edges, fwhm)?;
    let curves = vec![
        ModelCurve { label: "co".into(), points: centers.iter().zip(&mc).map(|(t, m)| (*t, p[k - 2] * m)).collect() },
        ModelCurve { label: "cross".into(), points: centers.iter().zip(&cross_shape).map(|(t, m)| (*t, p[k - 1] * m)).collect() },
    ];
    Ok(Fit { report, curves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{BinSpec, Normalization};
    use crate::models::G2QdModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn hist(expect: &[f64], bins: BinSpec, level: f64, rng: &mut ChaCha8Rng) -> CorrelationHistogram {
        let counts = expect.iter().map(|e| Poisson::new(level * e).unwrap().sample(rng) as u64).collect();
        let mut h = CorrelationHistogram {
            bins,
            counts,
            channel_pair: (0, 1),
            singles: (0, 0),
            acquisition_ps: 0,
            normalization: Normalization::default(),
            baseline: None,
            normalized: None,
        };
        h.normalize(Normalization::Wings { fraction: 0.2 }).unwrap();
        h
    }

    fn setting(ratio: f64, g2: f64, t2: f64) -> TpiParams {
        let qd = G2QdModel { x: 0.35, y: 0.12, tau1_ps: 880.0, tau2_ps: 4000.0, tau3_ps: 20000.0 };
        TpiParams::from_g2_zero(ratio, g2, t2, EnergyUeV(0.0), qd).unwrap()
    }

    #[test]
    fn recovers_coherence_and_visibility() {
        for (ratio, g2, t2, v) in [(1.0, 0.177, 294.0, 0.586), (2.5, 0.095, 471.0, 0.724)] {
            let truth = setting(ratio, g2, t2);
            let bins = BinSpec::new(60_000, 50).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let co = hist(&binned(&truth.co_polarized(), &bins.edges(), 125.0).unwrap(), bins, 4000.0, &mut rng);
            let cross = hist(&binned(&truth.cross_polarized(), &bins.edges(), 125.0).unwrap(), bins, 4000.0, &mut rng);
            let spec = TpiFitSpec { fixed: TpiParams { t2_ps: 200.0, ..truth }, fit_detuning: false, response_fwhm_ps: 125.0 };
            let r = fit_tpi(&co, &cross, &spec).unwrap().report;
            assert!(r.converged, "{:?}", r.warnings);
            let (t, st) = (r.params["t2_ps"], r.std_errors["t2_ps"]);
            assert!((t - t2).abs() < 3.0 * st, "{t} ± {st}");
            let (pv, sv) = (r.derived["peak_visibility"], r.derived_std_errors["peak_visibility"]);
            assert!((pv - v).abs() < 3.0 * sv + 0.005, "{pv} ± {sv} vs {v}");
            assert!(r.derived["peak_visibility_convolved"] < pv);
        }
    }

    #[test]
    fn mismatched_axes_rejected() {
        let truth = setting(1.0, 0.177, 294.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = BinSpec::new(10_000, 50).unwrap();
        let b = BinSpec::new(10_000, 100).unwrap();
        let co = hist(&binned(&truth, &a.edges(), 0.0).unwrap(), a, 100.0, &mut rng);
        let cross = hist(&binned(&truth, &b.edges(), 0.0).unwrap(), b, 100.0, &mut rng);
        let spec = TpiFitSpec { fixed: truth, fit_detuning: false, response_fwhm_ps: 0.0 };
        assert!(matches!(fit_tpi(&co, &cross, &spec), Err(Error::Input(_))));
    }
}
