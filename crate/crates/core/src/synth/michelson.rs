//! First-order interferometer with a coarse delay line and a fine phase
//! scan.
//!
//! The acquisition time is divided evenly over all `(delay, phase)`
//! settings. Each exciton photon carries one of the two fine-structure
//! components at `±ΔE` plus its Lorentzian offset and exits port 1 with
//! probability `½(1 + A0 cos(ωd + φ))`. Background photons split evenly.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lorentzian_offset, slab_rng, Diffusion, Purpose, SimConfig};
use crate::domain::{TimePs, HBAR_UEV_PS};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MichelsonRow {
    pub delay_ps: TimePs,
    /// `None` when fewer than `min_counts` photons were detected.
    pub visibility: Option<f64>,
    pub std_error: Option<f64>,
    pub counts: u64,
}

/// Visibility of a phase scan from the port-1 fraction at each of `n`
/// evenly spaced phases: `x_k ≈ a + b cos φ_k + c sin φ_k`, `V = √(b²+c²)/a`.
fn scan_visibility(fraction: &[f64]) -> f64 {
    let n = fraction.len() as f64;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for (k, x) in fraction.iter().enumerate() {
        let phi = TAU * k as f64 / n;
        a += x;
        b += x * phi.cos();
        c += x * phi.sin();
    }
    a /= n;
    (2.0 / n) * (b * b + c * c).sqrt() / a
}

pub fn run_michelson(cfg: &SimConfig) -> Result<Vec<MichelsonRow>> {
    cfg.validate()?;
    let m = &cfg.michelson;
    let k_steps = m.fine_steps;
    let settings = (m.coarse_delays_ps.len() * k_steps).max(1);
    let dwell = cfg.duration_ps as f64 / settings as f64;
    let det = cfg.detector_for(0);
    let photon_rate = cfg.emitter.qd_rate_per_ps * det.efficiency;
    let bg_rate = cfg.qd.beta * photon_rate;
    let split = cfg.qd.fss_uev.value() / HBAR_UEV_PS;
    Ok(m
        .coarse_delays_ps
        .par_iter()
        .enumerate()
        .map(|(ci, &d)| {
            let mut rng = slab_rng(cfg.seed, ci, Purpose::Routing);
            let mut diffusion = Diffusion::new(cfg.emitter.spectral_diffusion, &mut rng);
            let mut fraction = Vec::with_capacity(k_steps);
            let mut total = 0u64;
            let mut empty = false;
            for k in 0..k_steps {
                let phi = TAU * k as f64 / k_steps as f64;
                let t0 = (ci * k_steps + k) as f64 * dwell;
                let n = sample_poisson(&mut rng, photon_rate * dwell);
                let nb = sample_poisson(&mut rng, bg_rate * dwell);
                let mut port1 = 0u64;
                for j in 0..n {
                    let t = t0 + dwell * j as f64 / n as f64;
                    let line = if rng.random::<bool>() { split } else { -split };
                    let w = line + (lorentzian_offset(&mut rng, cfg.qd.t2_ps) + diffusion.at(t, &mut rng)) / HBAR_UEV_PS;
                    if rng.random::<f64>() < 0.5 * (1.0 + m.a0 * (w * d + phi).cos()) {
                        port1 += 1;
                    }
                }
                for _ in 0..nb {
                    port1 += rng.random_bool(0.5) as u64;
                }
                let all = n + nb;
                total += all;
                if all == 0 {
                    empty = true;
                    fraction.push(0.5);
                } else {
                    fraction.push(port1 as f64 / all as f64);
                }
            }
            let (visibility, std_error) = if empty || total < m.min_counts {
                (None, None)
            } else {
                (Some(scan_visibility(&fraction)), Some((2.0 / total as f64).sqrt()))
            };
            MichelsonRow { delay_ps: d, visibility, std_error, counts: total }
        })
        .collect())
}

fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::base_config;
    use super::super::Topology;
    use super::*;
    use crate::domain::EnergyUeV;
    use crate::models::{fringe_contrast, FringeEnvelopeParams};

    #[test]
    fn scan_visibility_exact_on_clean_fringe() {
        let f: Vec<f64> = (0..16).map(|k| 0.5 * (1.0 + 0.8 * (TAU * k as f64 / 16.0 + 1.1).cos())).collect();
        assert!((scan_visibility(&f) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn visibility_follows_envelope() {
        let mut cfg = base_config(Topology::Michelson);
        cfg.qd.t2_ps = 1058.0;
        cfg.qd.fss_uev = EnergyUeV(18.5);
        cfg.qd.beta = 0.0;
        cfg.michelson.coarse_delays_ps = vec![0.0, 111.8, 223.6, 600.0, 20_000.0];
        cfg.duration_ps = 20_000_000_000;
        cfg.emitter.qd_rate_per_ps = 1e-4;
        let rows = run_michelson(&cfg).unwrap();
        let p = FringeEnvelopeParams { a0: 1.0, t2_ps: 1058.0, delta_e_uev: EnergyUeV(18.5) };
        for r in &rows {
            let v = r.visibility.unwrap();
            let expect = fringe_contrast(r.delay_ps, &p).abs();
            assert!((v - expect).abs() < 5.0 * r.std_error.unwrap() + 0.01, "{}: {v} vs {expect}", r.delay_ps);
        }
    }

    #[test]
    fn starved_delays_flagged() {
        let mut cfg = base_config(Topology::Michelson);
        cfg.duration_ps = 1_000_000;
        cfg.michelson.coarse_delays_ps = vec![0.0, 100.0];
        let rows = run_michelson(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.visibility.is_none()));
    }
}
