//! Continuous-time Markov model of a pumped, blinking emitter.
//!
//! States: ground `G`, exciton `E`, and up to two dark states `D2`, `D3`
//! reachable only from `G`. Pumping `G → E` emits the biexciton photon,
//! `E → G` at `1/T1` emits the exciton photon. The chain is a star, hence
//! reversible, and its exciton autocorrelation is `1 + Σ cᵢ e^{−λᵢτ}`
//! with one fast antibunching mode and one bunching mode per dark state.
//! [`EmitterRates::solve`] picks the rates so these modes equal the
//! four-level model's timescales and amplitudes.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::domain::{QuantumDotParams, TimePs};
use crate::error::{Error, Result};
use crate::estimation::lm::{least_squares, LmOptions};
use crate::models::G2QdModel;

/// Transition rates in 1/ps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterRates {
    pub pump: f64,
    pub decay: f64,
    /// `(G → D, D → G)` for each dark state; `(0, 0)` disables one.
    pub dark: [(f64, f64); 2],
}

/// One biexciton–exciton cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cascade {
    pub t_xx: TimePs,
    pub t_x: TimePs,
}

impl EmitterRates {
    fn active_dark(&self) -> Vec<(f64, f64)> {
        self.dark.iter().copied().filter(|&(k, _)| k > 0.0).collect()
    }

    /// Stationary occupation of `[G, E, D2, D3]`.
    pub fn stationary(&self) -> [f64; 4] {
        let w = [
            1.0,
            self.pump / self.decay,
            if self.dark[0].0 > 0.0 { self.dark[0].0 / self.dark[0].1 } else { 0.0 },
            if self.dark[1].0 > 0.0 { self.dark[1].0 / self.dark[1].1 } else { 0.0 },
        ];
        let s: f64 = w.iter().sum();
        w.map(|x| x / s)
    }

    /// Mean exciton photon emission rate.
    pub fn photon_rate(&self) -> f64 {
        self.stationary()[1] * self.decay
    }

    /// Exciton autocorrelation modes `(cᵢ, λᵢ)`, fastest first, excluding the
    /// constant term.
    pub fn g2_modes(&self) -> Vec<(f64, f64)> {
        let dark = self.active_dark();
        let n = 2 + dark.len();
        let mut s = DMatrix::zeros(n, n);
        s[(0, 0)] = -(self.pump + dark.iter().map(|d| d.0).sum::<f64>());
        s[(1, 1)] = -self.decay;
        s[(0, 1)] = (self.pump * self.decay).sqrt();
        s[(1, 0)] = s[(0, 1)];
        for (i, &(k, kappa)) in dark.iter().enumerate() {
            s[(2 + i, 2 + i)] = -kappa;
            s[(0, 2 + i)] = (k * kappa).sqrt();
            s[(2 + i, 0)] = s[(0, 2 + i)];
        }
        let pi = self.stationary();
        let norm = (pi[0] * pi[1]).sqrt();
        let eig = s.symmetric_eigen();
        let mut modes: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v = eig.eigenvectors.column(i);
                (v[0] * v[1] / norm, -eig.eigenvalues[i])
            })
            .collect();
        // Drop the stationary mode (eigenvalue zero, amplitude one).
        modes.sort_by(|a, b| b.1.total_cmp(&a.1));
        modes.pop();
        modes
    }

    pub fn g2(&self, tau: TimePs) -> f64 {
        1.0 + self.g2_modes().iter().map(|(c, l)| c * (-l * tau.abs()).exp()).sum::<f64>()
    }

    /// Rates whose exciton autocorrelation equals the four-level model of
    /// `qd` (with `decay = 1/T1`).
    pub fn solve(qd: &QuantumDotParams) -> Result<Self> {
        let m = G2QdModel::from(qd);
        let gamma = 1.0 / qd.t1_ps;
        if m.tau1_ps >= qd.t1_ps {
            return Err(Error::config(format!(
                "tau1_ps = {} must be shorter than t1_ps = {} for a pumped emitter",
                m.tau1_ps, qd.t1_ps
            )));
        }
        let targets: Vec<(f64, f64)> =
            [(m.x, m.tau2_ps), (m.y, m.tau3_ps)].into_iter().filter(|&(a, _)| a > 0.0).collect();
        if targets.len() == 2 && (m.tau3_ps / m.tau2_ps - 1.0).abs() < 1e-6 {
            return Err(Error::config("blinking timescales tau2 and tau3 must differ"));
        }
        let build = |u: &[f64]| {
            let mut dark = [(0.0, 0.0); 2];
            for i in 0..targets.len() {
                dark[i] = (u[1 + 2 * i].exp(), u[2 + 2 * i].exp());
            }
            EmitterRates { pump: u[0].exp(), decay: gamma, dark }
        };
        // Two-timescale start: each dark state as a telegraph process seen
        // through the fast ground/exciton equilibrium.
        let mut u0 = Vec::new();
        let mut dark_out = 0.0;
        let mut rest = Vec::new();
        for &(a, tau) in &targets {
            let kappa = 1.0 / (tau * (1.0 + a));
            let k = a * kappa * 2.0;
            dark_out += k;
            rest.push(k.ln());
            rest.push(kappa.ln());
        }
        let pump0 = (1.0 / m.tau1_ps - gamma - dark_out).max(0.1 * (1.0 / m.tau1_ps - gamma));
        u0.push(pump0.ln());
        u0.extend(rest);
        let residuals = |u: &[f64]| {
            let rates = build(u);
            let modes = rates.g2_modes();
            let mut r = vec![(modes[0].1 * m.tau1_ps).ln()];
            for (i, &(a, tau)) in targets.iter().enumerate() {
                let (c, l) = modes.get(1 + i).copied().unwrap_or((0.0, 0.0));
                r.push(if l > 0.0 { (l * tau).ln() } else { 1e3 });
                r.push(c / a - 1.0);
            }
            r
        };
        let opts = LmOptions { max_iter: 2000, ftol: 1e-16, xtol: 1e-15, ..LmOptions::default() };
        let out = least_squares(&residuals, None, &u0, &opts);
        if !(out.chi2 < 1e-16) {
            return Err(Error::config(format!(
                "no emitter rates reproduce the autocorrelation parameters (residual {:.2e})",
                out.chi2
            )));
        }
        Ok(build(&out.params))
    }

    /// Gillespie trajectory over `[t0, t1)` starting from the stationary
    /// distribution. With `xx_lifetime_ps > 0` the biexciton photon is
    /// emitted after an extra exponential delay inside `G → E`.
    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R, t0: TimePs, t1: TimePs, xx_lifetime_ps: f64) -> Vec<Cascade> {
        let pi = self.stationary();
        let mut state = {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut s = 3;
            for (i, p) in pi.iter().enumerate() {
                acc += p;
                if u < acc {
                    s = i;
                    break;
                }
            }
            s
        };
        let unit = Exp::new(1.0).expect("unit rate");
        let g_out = self.pump + self.dark[0].0 + self.dark[1].0;
        let mut t = t0;
        let mut t_xx = f64::NEG_INFINITY;
        let mut out = Vec::with_capacity(((t1 - t0) * self.photon_rate() * 1.1) as usize + 16);
        loop {
            let rate = match state {
                0 => g_out,
                1 => self.decay,
                2 => self.dark[0].1,
                _ => self.dark[1].1,
            };
            t += unit.sample(rng) / rate;
            if t >= t1 {
                break;
            }
            state = match state {
                0 => {
                    let u = rng.random::<f64>() * g_out;
                    if u < self.pump {
                        if xx_lifetime_ps > 0.0 {
                            t += unit.sample(rng) * xx_lifetime_ps;
                        }
                        t_xx = t;
                        1
                    } else if u < self.pump + self.dark[0].0 {
                        2
                    } else {
                        3
                    }
                }
                1 => {
                    if t_xx.is_finite() {
                        out.push(Cascade { t_xx, t_x: t });
                    }
                    0
                }
                _ => 0,
            };
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::EnergyUeV;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dot(x: f64, y: f64, tau1: f64) -> QuantumDotParams {
        QuantumDotParams {
            t1_ps: 1765.0,
            t2_ps: 294.0,
            fss_uev: EnergyUeV(5.7),
            blink_x: x,
            blink_y: y,
            tau1_ps: tau1,
            tau2_ps: 4000.0,
            tau3_ps: 20000.0,
            beta: 0.0,
            pump_power_rel: 1.0,
            entanglement_fidelity_max: 1.0,
        }
    }

    #[test]
    fn three_state_limit_is_closed_form() {
        let q = dot(0.0, 0.0, 880.0);
        let r = EmitterRates::solve(&q).unwrap();
        assert!((r.pump - (1.0 / 880.0 - 1.0 / 1765.0)).abs() < 1e-12);
        for t in [0.0, 100.0, 880.0, 5000.0] {
            assert!((r.g2(t) - (1.0 - (-t / 880.0f64).exp())).abs() < 1e-9);
        }
    }

    #[test]
    fn solved_chain_reproduces_four_level_model() {
        for (x, y, tau1) in [(0.35, 0.12, 880.0), (0.1, 0.0, 1680.0), (0.6, 0.3, 500.0)] {
            let q = dot(x, y, tau1);
            let r = EmitterRates::solve(&q).unwrap();
            let m = G2QdModel::from(&q);
            for i in 0..200 {
                let t = i as f64 * 300.0;
                assert!((r.g2(t) - m.eval(t)).abs() < 1e-7, "x={x} t={t}: {} vs {}", r.g2(t), m.eval(t));
            }
        }
    }

    #[test]
    fn infeasible_rejected() {
        assert!(EmitterRates::solve(&dot(0.0, 0.0, 2000.0)).is_err());
    }

    #[test]
    fn simulated_rate_and_lifetime() {
        let r = EmitterRates::solve(&dot(0.35, 0.12, 880.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dur = 2e9;
        let c = r.simulate(&mut rng, 0.0, dur, 0.0);
        let rate = c.len() as f64 / dur;
        assert!((rate / r.photon_rate() - 1.0).abs() < 0.02, "{rate} vs {}", r.photon_rate());
        let mean_delay = c.iter().map(|c| c.t_x - c.t_xx).sum::<f64>() / c.len() as f64;
        assert!((mean_delay / 1765.0 - 1.0).abs() < 0.01, "{mean_delay}");
        assert!(c.windows(2).all(|w| w[0].t_x < w[1].t_xx));
    }
}
