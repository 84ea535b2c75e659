//! Beam-splitter topologies: HBT autocorrelation and dot–laser two-photon
//! interference.
//!
//! Interference is modelled pairwise on a balanced mixing splitter of which
//! one port is analysed. Each laser photon within the overlap window of its
//! nearest dot photon leaves by the same port as that photon with
//! probability `(1 + m)/2`, where `m = cos((ω_dot − ω_laser)Δ)` for the
//! pair, with the homogeneous part of `ω_dot` drawn afresh per pair.
//! Averaged over the Lorentzian line this gives the
//! `e^{−|Δ|/T2} cos(δΔ/ħ)` bunching term of the same-port correlation.

use rand::Rng;

use super::{detect, lorentzian_offset, poisson_times, run_slabs, slab_rng, Diffusion, Purpose, SimConfig};
use crate::domain::{TimePs, HBAR_UEV_PS};
use crate::error::Result;
use crate::stream::{EventRecord, EventStream};

/// Dot photons (after collection) of one slab: `(t, spectral-diffusion shift)`.
fn slab_dot_photons(cfg: &SimConfig, rates: &super::EmitterRates, eff: f64, slab: usize, a: TimePs, b: TimePs) -> Vec<(TimePs, f64)> {
    let mut rng = slab_rng(cfg.seed, slab, Purpose::Emitter);
    let cascades = rates.simulate(&mut rng, a, b, cfg.emitter.xx_lifetime_ps);
    let mut rng = slab_rng(cfg.seed, slab, Purpose::Routing);
    let mut diffusion = Diffusion::new(cfg.emitter.spectral_diffusion, &mut rng);
    let mut out = Vec::with_capacity(cascades.len());
    for c in &cascades {
        if rng.random::<f64>() < eff {
            out.push((c.t_x, diffusion.at(c.t_x, &mut rng)));
        }
    }
    out
}

/// Autocorrelation setup: collected exciton photons and background split
/// between channels 0 and 1; with `hbt.record_xx` the biexciton photons
/// are recorded on channel 2.
pub fn run_hbt(cfg: &SimConfig) -> Result<EventStream> {
    cfg.validate()?;
    let rates = cfg.emitter_rates()?;
    let eff = cfg.collection(&rates, cfg.emitter.qd_rate_per_ps)?;
    let xx_eff = cfg.collection(&rates, cfg.emitter.xx_rate_per_ps.unwrap_or(cfg.emitter.qd_rate_per_ps))?;
    let dets = [cfg.detector_for(0), cfg.detector_for(1), cfg.detector_for(2)];
    run_slabs(cfg, |i, a, b| {
        let mut rng = slab_rng(cfg.seed, i, Purpose::Emitter);
        let cascades = rates.simulate(&mut rng, a, b, cfg.emitter.xx_lifetime_ps);
        let mut route = slab_rng(cfg.seed, i, Purpose::Routing);
        let mut ports: [Vec<TimePs>; 3] = Default::default();
        for c in &cascades {
            if route.random::<f64>() < eff {
                let p = if route.random::<f64>() < cfg.hbt.splitting { 0 } else { 1 };
                ports[p].push(c.t_x);
            }
            if cfg.hbt.record_xx && route.random::<f64>() < xx_eff {
                ports[2].push(c.t_xx);
            }
        }
        let mut bg = slab_rng(cfg.seed, i, Purpose::Background);
        for t in poisson_times(&mut bg, cfg.qd.beta * cfg.emitter.qd_rate_per_ps, a, b) {
            let p = if bg.random::<f64>() < cfg.hbt.splitting { 0 } else { 1 };
            ports[p].push(t);
        }
        let mut det = slab_rng(cfg.seed, i, Purpose::Detection);
        let mut out = Vec::new();
        let n = if cfg.hbt.record_xx { 3 } else { 2 };
        for ch in 0..n {
            detect(&mut det, &dets[ch], ch as u8, &ports[ch], (a, b), &mut out);
        }
        out
    })
}

/// Dot–laser interference, analysed by an HBT splitter on channels 0 and 1
/// behind the mixing port. The dot reaches the analysis port with
/// `hom.splitting_ratio` of the configured rate; the laser with `α²` times
/// that.
pub fn run_hom(cfg: &SimConfig, copolarized: bool) -> Result<EventStream> {
    cfg.validate()?;
    let rates = cfg.emitter_rates()?;
    let eta = cfg.hom.splitting_ratio * cfg.emitter.qd_rate_per_ps;
    // Both sources are generated at twice the port rate; half is discarded.
    let eff = cfg.collection(&rates, 2.0 * eta)?;
    let laser_rate = 2.0 * cfg.laser.intensity_alpha2 * eta;
    let window = cfg.hom.overlap_window_t2 * cfg.qd.t2_ps;
    let visibility = if copolarized { 1.0 } else { 0.0 };
    let laser_offset = cfg.laser.detuning_uev.value();
    let dets = [cfg.detector_for(0), cfg.detector_for(1)];
    run_slabs(cfg, |i, a, b| {
        let dot: Vec<(TimePs, f64)> = if cfg.hom.qd_as_laser {
            let mut rng = slab_rng(cfg.seed, i, Purpose::Emitter);
            let times = poisson_times(&mut rng, 2.0 * eta, a, b);
            times.into_iter().map(|t| (t, 0.0)).collect()
        } else {
            slab_dot_photons(cfg, &rates, eff, i, a, b)
        };
        let mut route = slab_rng(cfg.seed, i, Purpose::Interference);
        let dot_port: Vec<usize> = dot.iter().map(|_| route.random_range(0..2)).collect();
        let mut kept: Vec<TimePs> = dot.iter().zip(&dot_port).filter(|(_, &p)| p == 0).map(|(d, _)| d.0).collect();
        let mut lrng = slab_rng(cfg.seed, i, Purpose::Laser);
        let laser = poisson_times(&mut lrng, laser_rate, a, b);
        let mut j = 0;
        for &t in &laser {
            while j + 1 < dot.len() && (dot[j + 1].0 - t).abs() <= (dot[j].0 - t).abs() {
                j += 1;
            }
            let mut port = route.random_range(0..2);
            if let Some(&(td, shift)) = dot.get(j) {
                let d = t - td;
                if d.abs() <= window && visibility > 0.0 {
                    // Fresh homogeneous detuning per pair: a detuning shared by
                    // all laser partners of one dot photon would correlate
                    // those laser photons with each other.
                    let w = lorentzian_offset(&mut route, cfg.qd.t2_ps) + shift;
                    let m = visibility * ((w - laser_offset) * d / HBAR_UEV_PS).cos();
                    if route.random::<f64>() < m.abs() {
                        port = if m > 0.0 { dot_port[j] } else { 1 - dot_port[j] };
                    }
                }
            }
            if port == 0 {
                kept.push(t);
            }
        }
        let mut bg = slab_rng(cfg.seed, i, Purpose::Background);
        kept.extend(poisson_times(&mut bg, cfg.qd.beta * eta, a, b));
        let mut ports: [Vec<TimePs>; 2] = Default::default();
        for t in kept {
            ports[bg.random_range(0..2)].push(t);
        }
        let mut det = slab_rng(cfg.seed, i, Purpose::Detection);
        let mut out: Vec<EventRecord> = Vec::new();
        for ch in 0..2 {
            ports[ch].sort_by(f64::total_cmp);
            detect(&mut det, &dets[ch], ch as u8, &ports[ch], (a, b), &mut out);
        }
        out
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::base_config;
    use super::super::Topology;
    use super::*;
    use crate::correlation::{correlate_g2, BinSpec};
    use crate::models::G2QdModel;

    #[test]
    fn hbt_matches_autocorrelation_model() {
        let mut cfg = base_config(Topology::Hbt);
        cfg.duration_ps = 20_000_000_000;
        cfg.emitter.qd_rate_per_ps = 1e-4;
        let s = run_hbt(&cfg).unwrap();
        let h = correlate_g2(&s, 0, 1, BinSpec::new(100_000, 500).unwrap()).unwrap();
        let m = G2QdModel::from(&cfg.qd);
        let b = cfg.qd.beta;
        // Background mixes in as (2β + β²)/(1+β)² at every delay.
        let with_bg = |t: f64| (m.eval(t) + 2.0 * b + b * b) / ((1.0 + b) * (1.0 + b));
        let n = h.normalized.as_ref().unwrap();
        let baseline = h.baseline.unwrap();
        // The wings sit on the blinking tail, so rescale to the model there.
        let wing: Vec<usize> = (0..h.counts.len()).filter(|&k| h.bins.center(k).abs() > 80_000.0).collect();
        let scale = wing.iter().map(|&k| with_bg(h.bins.center(k))).sum::<f64>()
            / wing.iter().map(|&k| n[k]).sum::<f64>();
        for (k, &tau) in [0.0, 500.0, 2000.0, 5000.0, 20_000.0].iter().enumerate() {
            let idx = h.bins.index(tau as i64).unwrap();
            let sim = n[idx] * scale;
            let (lo, hi) = (h.bins.center(idx) - 250.0, h.bins.center(idx) + 250.0);
            let expect = (0..100).map(|q| with_bg(lo + (q as f64 + 0.5) * (hi - lo) / 100.0)).sum::<f64>() / 100.0;
            let err = 4.0 * (sim / (h.counts[idx] as f64).sqrt()).max(0.01);
            assert!((sim - expect).abs() < err, "case {k} tau {tau}: {sim} vs {expect}");
        }
        assert!(baseline > 0.0);
    }

    #[test]
    fn hom_is_seed_deterministic_and_balanced() {
        let mut cfg = base_config(Topology::Hom);
        cfg.duration_ps = 2_000_000_000;
        cfg.emitter.slab_ps = 300_000_000;
        let a = run_hom(&cfg, true).unwrap();
        let b = run_hom(&cfg, true).unwrap();
        assert_eq!(a.records(), b.records());
        let (c0, c1) = (a.count(0) as f64, a.count(1) as f64);
        assert!((c0 - c1).abs() < 5.0 * (c0 + c1).sqrt());
        cfg.seed += 1;
        assert_ne!(run_hom(&cfg, true).unwrap().records(), a.records());
    }
}
