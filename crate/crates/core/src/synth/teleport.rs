//! Teleportation apparatus: Charlie's polarizing splitter with detectors
//! `D_H` (channel 0) and `D_V` (channel 1), Bob's analyser with `D_P`
//! (channel 2) and `D_Q` (channel 3).
//!
//! Photons are generated classically (rates do not depend on interference).
//! Bob's polarization is then drawn from the state the Charlie detection
//! record projects the cascade onto. For an exciton photon at `t_x` in one
//! port and the nearest laser photon in the other port, with `t_H`, `t_V`
//! the two detection times,
//!
//! ```text
//! |b⟩ ∝ a_V √p(t_H) |H⟩ + a_H √p(t_V) e^{iΦ} |V⟩
//! Φ = [ΔE((t_H + t_V)/2 − t_xx) + ΔE_L (t_V − t_H)] / ħ
//! ```
//!
//! where `p(t) = e^{−(t − t_xx)/T1}/T1` for `t ≥ t_xx`, `a_H`, `a_V` the
//! input amplitudes, and the coherence is reduced by `e^{−|t_V − t_H|/T*}`
//! with `1/T* = 1/T2 − 1/2T1`. The expected output is `σx` applied to the
//! input. Imperfect entanglement enters as a Werner admixture.

use num_complex::Complex64;
use rand::Rng;

use super::{detect, poisson_times, run_slabs, slab_rng, Purpose, SimConfig};
use crate::domain::{PolarizationState, TimePs, HBAR_UEV_PS};
use crate::error::{Error, Result};
use crate::stream::{EventRecord, EventStream};

pub const CH_H: u8 = 0;
pub const CH_V: u8 = 1;
pub const CH_P: u8 = 2;
pub const CH_Q: u8 = 3;

/// Bob's ideal state for a given input.
pub fn expected_output(input: &PolarizationState) -> PolarizationState {
    input.flipped()
}

/// Bob's `(P, Q)` detector states from the config.
pub(crate) fn bob_basis(cfg: &SimConfig) -> Result<(PolarizationState, PolarizationState)> {
    let t = &cfg.teleport;
    let p = t.bob_p.unwrap_or_else(|| expected_output(&t.input));
    let q = t.bob_q.unwrap_or_else(|| p.orthogonal());
    if p.inner(&q).norm() > 1e-9 {
        return Err(Error::config("Bob's P and Q states must be orthogonal"));
    }
    Ok((p, q))
}

struct Projection {
    input: PolarizationState,
    basis: (PolarizationState, PolarizationState),
    t1: f64,
    inv_tstar: f64,
    fss: f64,
    laser: f64,
}

impl Projection {
    /// Probability of a `P` click for a cascade at `t_xx` whose exciton
    /// photon went to port `x_h` (true = H) at `t_x`, with the laser partner
    /// at `t_l` in the other port.
    fn prob_p(&self, t_xx: f64, t_x: f64, x_h: bool, t_l: f64) -> f64 {
        let (t_h, t_v) = if x_h { (t_x, t_l) } else { (t_l, t_x) };
        let p = |t: f64| if t >= t_xx { (-(t - t_xx) / self.t1).exp() } else { 0.0 };
        let phase = (self.fss * (0.5 * (t_h + t_v) - t_xx) + self.laser * (t_v - t_h)) / HBAR_UEV_PS;
        let bh = self.input.v() * p(t_h).sqrt();
        let bv = self.input.h() * p(t_v).sqrt() * Complex64::from_polar(1.0, phase);
        let n = bh.norm_sqr() + bv.norm_sqr();
        let (ph, pv) = (self.basis.0.h(), self.basis.0.v());
        if n == 0.0 {
            return if x_h { ph.norm_sqr() } else { pv.norm_sqr() };
        }
        let d = (-(t_v - t_h).abs() * self.inv_tstar).exp();
        let cross = (ph.conj() * bh * (pv.conj() * bv).conj()).re;
        ((ph.norm_sqr() * bh.norm_sqr() + pv.norm_sqr() * bv.norm_sqr() + 2.0 * d * cross) / n).clamp(0.0, 1.0)
    }

    /// `P` probability for a definite `H` or `V` photon.
    fn prob_p_pure(&self, h: bool) -> f64 {
        if h { self.basis.0.h().norm_sqr() } else { self.basis.0.v().norm_sqr() }
    }
}

/// Nearest time in sorted `times` to `t`, if within `window`.
fn nearest(times: &[TimePs], t: TimePs, window: f64) -> Option<TimePs> {
    let i = times.partition_point(|&x| x < t);
    let mut best: Option<TimePs> = None;
    for &c in times[i.saturating_sub(1)..(i + 1).min(times.len())].iter() {
        if (c - t).abs() <= window && best.is_none_or(|b| (c - t).abs() < (b - t).abs()) {
            best = Some(c);
        }
    }
    best
}

pub fn run_teleport(
    cfg: &SimConfig,
    input: PolarizationState,
    basis: (PolarizationState, PolarizationState),
) -> Result<EventStream> {
    cfg.validate()?;
    if basis.0.inner(&basis.1).norm() > 1e-9 {
        return Err(Error::config("Bob's P and Q states must be orthogonal"));
    }
    let rates = cfg.emitter_rates()?;
    let eta_c = cfg.teleport.splitting_ratio * cfg.emitter.qd_rate_per_ps;
    let eta_b = cfg.emitter.xx_rate_per_ps.unwrap_or(cfg.emitter.qd_rate_per_ps);
    let eff_c = cfg.collection(&rates, eta_c)?;
    let eff_b = cfg.collection(&rates, eta_b)?;
    let laser_rate = cfg.laser.intensity_alpha2 * eta_c;
    let p_h_laser = input.h().norm_sqr();
    let werner = ((4.0 * cfg.qd.entanglement_fidelity_max - 1.0) / 3.0).clamp(0.0, 1.0);
    let window = cfg.teleport.partner_window_t2 * cfg.qd.t2_ps;
    let inv_tstar = (1.0 / cfg.qd.t2_ps - 0.5 / cfg.qd.t1_ps).max(0.0);
    let proj = Projection {
        input,
        basis,
        t1: cfg.qd.t1_ps,
        inv_tstar,
        fss: cfg.qd.fss_uev.value(),
        laser: cfg.laser.detuning_uev.value(),
    };
    let dets = [CH_H, CH_V, CH_P, CH_Q].map(|c| cfg.detector_for(c));
    run_slabs(cfg, |i, a, b| {
        let mut rng = slab_rng(cfg.seed, i, Purpose::Emitter);
        let cascades = rates.simulate(&mut rng, a, b, cfg.emitter.xx_lifetime_ps);
        let mut lrng = slab_rng(cfg.seed, i, Purpose::Laser);
        let mut laser: [Vec<TimePs>; 2] = Default::default();
        for t in poisson_times(&mut lrng, laser_rate, a, b) {
            laser[usize::from(lrng.random::<f64>() >= p_h_laser)].push(t);
        }
        let mut ports: [Vec<TimePs>; 4] = Default::default();
        ports[0].extend_from_slice(&laser[0]);
        ports[1].extend_from_slice(&laser[1]);
        let mut route = slab_rng(cfg.seed, i, Purpose::Routing);
        let mut bob = slab_rng(cfg.seed, i, Purpose::Bob);
        for c in &cascades {
            let x_h = route.random::<bool>();
            let x_kept = route.random::<f64>() < eff_c;
            if x_kept {
                ports[usize::from(!x_h)].push(c.t_x);
            }
            if route.random::<f64>() >= eff_b {
                continue;
            }
            let prob = if !x_kept || bob.random::<f64>() >= werner {
                0.5
            } else {
                match nearest(&laser[usize::from(x_h)], c.t_x, window) {
                    Some(t_l) => proj.prob_p(c.t_xx, c.t_x, x_h, t_l),
                    None => proj.prob_p_pure(x_h),
                }
            };
            ports[if bob.random::<f64>() < prob { 2 } else { 3 }].push(c.t_xx);
        }
        let mut bg = slab_rng(cfg.seed, i, Purpose::Background);
        for t in poisson_times(&mut bg, cfg.qd.beta * eta_c, a, b) {
            ports[bg.random_range(0..2)].push(t);
        }
        for t in poisson_times(&mut bg, cfg.qd.beta * eta_b, a, b) {
            ports[bg.random_range(2..4)].push(t);
        }
        let mut det = slab_rng(cfg.seed, i, Purpose::Detection);
        let mut out: Vec<EventRecord> = Vec::new();
        for ch in 0..4 {
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
    use crate::correlation::{build_fidelity_map, correlate_g3, BinSpec};
    use crate::domain::{EnergyUeV, PolarizationLabel};

    #[test]
    fn expected_output_is_bit_flip() {
        let d = PolarizationState::from_label(PolarizationLabel::D);
        assert!(expected_output(&d).approx_eq(&d, 1e-12));
        let h = PolarizationState::from_label(PolarizationLabel::H);
        assert!(expected_output(&h).approx_eq(&PolarizationState::from_label(PolarizationLabel::V), 1e-12));
        let r = PolarizationState::from_label(PolarizationLabel::R);
        assert!(expected_output(&r).approx_eq(&PolarizationState::from_label(PolarizationLabel::L), 1e-12));
    }

    #[test]
    fn non_orthogonal_basis_rejected() {
        let mut cfg = base_config(Topology::Teleport);
        cfg.teleport.bob_p = Some(PolarizationState::from_label(PolarizationLabel::H));
        cfg.teleport.bob_q = Some(PolarizationState::from_label(PolarizationLabel::D));
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn ideal_projection_gives_expected_state() {
        for label in PolarizationLabel::ALL {
            let input = PolarizationState::from_label(label);
            let out = expected_output(&input);
            let proj = Projection { input, basis: (out, out.orthogonal()), t1: 1000.0, inv_tstar: 0.0, fss: 0.0, laser: 0.0 };
            // Coincident partner: perfect overlap.
            assert!((proj.prob_p(0.0, 300.0, true, 300.0) - 1.0).abs() < 1e-12, "{label}");
            assert!((proj.prob_p(0.0, 300.0, false, 300.0) - 1.0).abs() < 1e-12, "{label}");
        }
    }

    #[test]
    fn nearest_partner() {
        let t = [10.0, 50.0, 200.0];
        assert_eq!(nearest(&t, 45.0, 100.0), Some(50.0));
        assert_eq!(nearest(&t, 120.0, 100.0), Some(50.0));
        assert_eq!(nearest(&t, 500.0, 100.0), None);
        assert_eq!(nearest(&[], 5.0, 100.0), None);
    }

    #[test]
    fn ideal_limit_fidelity_near_one() {
        let mut cfg = base_config(Topology::Teleport);
        cfg.qd.fss_uev = EnergyUeV(0.0);
        cfg.qd.beta = 0.0;
        cfg.qd.entanglement_fidelity_max = 1.0;
        cfg.qd.t2_ps = 2.0 * cfg.qd.t1_ps;
        cfg.qd.blink_x = 0.0;
        cfg.qd.blink_y = 0.0;
        cfg.emitter.qd_rate_per_ps = 2.5e-4;
        cfg.emitter.xx_rate_per_ps = Some(2.5e-4);
        // Balances laser–laser heralds against exciton pairs from
        // consecutive cascades.
        cfg.laser.intensity_alpha2 = 0.3;
        cfg.duration_ps = 100_000_000_000;
        let input = PolarizationState::from_label(PolarizationLabel::D);
        let basis = (expected_output(&input), expected_output(&input).orthogonal());
        let s = run_teleport(&cfg, input, basis).unwrap();
        let ax = BinSpec::new(96, 32).unwrap();
        let gp = correlate_g3(&s, CH_H, CH_V, CH_P, ax).unwrap();
        let gq = correlate_g3(&s, CH_H, CH_V, CH_Q, ax).unwrap();
        let map = build_fidelity_map(&gp, &gq).unwrap();
        let cell = |tc: i64, tb: i64| {
            let (i, j) = (ax.index(tc).unwrap(), ax.index(tb).unwrap());
            let k = i * ax.nbins() + j;
            (map.fidelity_at(i, j).unwrap(), map.counts_p[k] + map.counts_q[k])
        };
        // Both Charlie photons after the biexciton emission.
        let (good, n) = cell(32, -32);
        assert!(n > 200 && good > 0.9, "{good} from {n}");
        // Laser photon before the biexciton emission: these heralds carry
        // no interference.
        let (bad, n) = cell(-64, 0);
        assert!(n > 200 && good - bad > 0.2, "{bad} from {n}");
    }
}
