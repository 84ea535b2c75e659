//! Seeded Monte Carlo generation of detector click streams.
//!
//! Time is cut into slabs of [`EmitterKnobs::slab_ps`]; every slab draws from
//! its own ChaCha stream derived from `(seed, slab, purpose)`, so output
//! does not depend on the thread count. Slabs start from the emitter's
//! stationary distribution.

mod emitter;
mod hom;
mod michelson;
mod teleport;

pub use emitter::{Cascade, EmitterRates};
pub use hom::{run_hbt, run_hom};
pub use michelson::{run_michelson, MichelsonRow};
pub use teleport::{expected_output, run_teleport, CH_H, CH_P, CH_Q, CH_V};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    to_timestamp, DetectorParams, LaserParams, PolarizationLabel, PolarizationState, QuantumDotParams, TimePs,
    Timestamp, HBAR_UEV_PS,
};
use crate::error::{Error, Result};
use crate::stream::{Channel, EventRecord, EventStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Michelson,
    Hbt,
    Hom,
    Teleport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    X,
    Xx,
    Laser,
    Background,
}

/// A photon before any optics or detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmittedPhoton {
    pub t_emit_ps: TimePs,
    /// Instantaneous detuning from the line centre.
    pub freq_offset_uev: f64,
    pub polarization: PolarizationState,
    pub origin: Origin,
}

/// Slow Ornstein–Uhlenbeck wander of the line centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralDiffusion {
    /// Stationary standard deviation.
    pub amplitude_uev: f64,
    pub timescale_ps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitterKnobs {
    /// Exciton photon rate delivered into the setup, before any splitter.
    pub qd_rate_per_ps: f64,
    /// Biexciton photon rate delivered to Bob (teleportation only);
    /// defaults to `qd_rate_per_ps`.
    pub xx_rate_per_ps: Option<f64>,
    /// Extra delay between pump and biexciton photon. Zero keeps the
    /// exciton autocorrelation exactly on the four-level model.
    pub xx_lifetime_ps: f64,
    pub slab_ps: Timestamp,
    pub spectral_diffusion: Option<SpectralDiffusion>,
}

impl Default for EmitterKnobs {
    fn default() -> Self {
        EmitterKnobs {
            qd_rate_per_ps: 2e-5,
            xx_rate_per_ps: None,
            xx_lifetime_ps: 0.0,
            slab_ps: 500_000_000,
            spectral_diffusion: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MichelsonKnobs {
    pub coarse_delays_ps: Vec<TimePs>,
    /// Fine phase settings per coarse delay, evenly spaced over one fringe.
    pub fine_steps: usize,
    /// Fringe contrast at zero delay (interferometer imperfections).
    pub a0: f64,
    /// Detected photons below which a delay is flagged instead of measured.
    pub min_counts: u64,
}

impl Default for MichelsonKnobs {
    fn default() -> Self {
        MichelsonKnobs {
            coarse_delays_ps: (0..=150).map(|i| i as f64 * 20.0).collect(),
            fine_steps: 16,
            a0: 1.0,
            min_counts: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HbtKnobs {
    /// Probability of the reflected port (channel 0).
    pub splitting: f64,
    /// Also record biexciton photons on channel 2.
    pub record_xx: bool,
}

impl Default for HbtKnobs {
    fn default() -> Self {
        HbtKnobs { splitting: 0.5, record_xx: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomKnobs {
    /// Dot transmission into the analysis port; the laser enters with
    /// `1 − splitting_ratio`. Laser intensity is set at the port.
    pub splitting_ratio: f64,
    pub copolarized: bool,
    /// Replace the dot by a Poissonian source of the same rate.
    pub qd_as_laser: bool,
    /// Half-width, in units of T2, of the region around each dot photon where
    /// laser photons are modulated.
    pub overlap_window_t2: f64,
}

impl Default for HomKnobs {
    fn default() -> Self {
        HomKnobs { splitting_ratio: 0.99, copolarized: true, qd_as_laser: false, overlap_window_t2: 12.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeleportKnobs {
    /// Input qubit carried by the laser.
    pub input: PolarizationState,
    /// Bob's P detector state; defaults to the expected output.
    pub bob_p: Option<PolarizationState>,
    /// Bob's Q detector state; defaults to the state orthogonal to P.
    pub bob_q: Option<PolarizationState>,
    /// Dot transmission of the splitter in front of Charlie.
    pub splitting_ratio: f64,
    /// Laser partners farther than this many T2 from a dot photon are
    /// treated as distinguishable.
    pub partner_window_t2: f64,
}

impl Default for TeleportKnobs {
    fn default() -> Self {
        TeleportKnobs {
            input: PolarizationState::from_label(PolarizationLabel::D),
            bob_p: None,
            bob_q: None,
            splitting_ratio: 0.99,
            partner_window_t2: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDetector {
    pub channel: Channel,
    pub detector: DetectorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub duration_ps: Timestamp,
    pub seed: u64,
    pub topology: Topology,
    pub qd: QuantumDotParams,
    pub laser: LaserParams,
    #[serde(default)]
    pub detector: DetectorParams,
    #[serde(default)]
    pub channel_detectors: Vec<ChannelDetector>,
    #[serde(default)]
    pub emitter: EmitterKnobs,
    #[serde(default)]
    pub michelson: MichelsonKnobs,
    #[serde(default)]
    pub hbt: HbtKnobs,
    #[serde(default)]
    pub hom: HomKnobs,
    #[serde(default)]
    pub teleport: TeleportKnobs,
    /// Clicks closer than this to the previous click on a channel are lost.
    #[serde(default)]
    pub dead_time_ps: TimePs,
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must lie in (0, 1), got {v}")))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.duration_ps <= 0 {
            return Err(Error::config(format!("duration_ps must be positive, got {}", self.duration_ps)));
        }
        self.qd.validate()?;
        self.laser.validate()?;
        self.detector.validate()?;
        for c in &self.channel_detectors {
            c.detector.validate()?;
        }
        let e = &self.emitter;
        if !(e.qd_rate_per_ps.is_finite() && e.qd_rate_per_ps >= 0.0) {
            return Err(Error::config("emitter.qd_rate_per_ps must be non-negative"));
        }
        if e.xx_rate_per_ps.is_some_and(|r| !(r.is_finite() && r >= 0.0)) {
            return Err(Error::config("emitter.xx_rate_per_ps must be non-negative"));
        }
        if e.slab_ps <= 0 {
            return Err(Error::config("emitter.slab_ps must be positive"));
        }
        if !(e.xx_lifetime_ps >= 0.0) || !(self.dead_time_ps >= 0.0) {
            return Err(Error::config("xx_lifetime_ps and dead_time_ps must be non-negative"));
        }
        if let Some(d) = e.spectral_diffusion {
            if !(d.amplitude_uev >= 0.0 && d.timescale_ps > 0.0) {
                return Err(Error::config("spectral diffusion needs amplitude >= 0 and timescale > 0"));
            }
        }
        unit_interval("hbt.splitting", self.hbt.splitting)?;
        unit_interval("hom.splitting_ratio", self.hom.splitting_ratio)?;
        unit_interval("teleport.splitting_ratio", self.teleport.splitting_ratio)?;
        if !(self.hom.overlap_window_t2 > 0.0 && self.teleport.partner_window_t2 > 0.0) {
            return Err(Error::config("overlap windows must be positive"));
        }
        let m = &self.michelson;
        if m.fine_steps < 3 {
            return Err(Error::config("michelson.fine_steps must be at least 3"));
        }
        if !(m.a0 > 0.0 && m.a0 <= 1.0) {
            return Err(Error::config("michelson.a0 must lie in (0, 1]"));
        }
        if m.coarse_delays_ps.iter().any(|d| !d.is_finite() || d.abs() >= self.duration_ps as f64) {
            return Err(Error::config("michelson delays must be finite and shorter than the duration"));
        }
        teleport::bob_basis(self).map(|_| ())
    }

    /// Detector model of one channel.
    pub fn detector_for(&self, channel: Channel) -> DetectorParams {
        self.channel_detectors
            .iter()
            .find(|c| c.channel == channel)
            .map(|c| c.detector)
            .unwrap_or(self.detector)
    }

    pub(crate) fn emitter_rates(&self) -> Result<EmitterRates> {
        EmitterRates::solve(&self.qd)
    }

    /// Fraction of emitted exciton photons delivered into the setup.
    pub(crate) fn collection(&self, rates: &EmitterRates, delivered: f64) -> Result<f64> {
        let eff = delivered / rates.photon_rate();
        if eff > 1.0 {
            return Err(Error::config(format!(
                "requested photon rate {delivered:.3e}/ps exceeds the emitter's {:.3e}/ps",
                rates.photon_rate()
            )));
        }
        Ok(eff)
    }

    fn slabs(&self) -> Vec<(usize, TimePs, TimePs)> {
        let n = (self.duration_ps + self.emitter.slab_ps - 1) / self.emitter.slab_ps;
        (0..n as usize)
            .map(|i| {
                let a = i as i64 * self.emitter.slab_ps;
                (i, a as f64, (a + self.emitter.slab_ps).min(self.duration_ps) as f64)
            })
            .collect()
    }
}

/// Random number streams used within one slab.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Purpose {
    Emitter = 1,
    Laser,
    Background,
    Routing,
    Interference,
    Detection,
    Bob,
}

pub(crate) fn slab_rng(seed: u64, slab: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((slab as u64) << 8) | purpose as u64);
    rng
}

/// Homogeneous Poisson arrival times on `[t0, t1)`.
pub(crate) fn poisson_times<R: Rng + ?Sized>(rng: &mut R, rate: f64, t0: TimePs, t1: TimePs) -> Vec<TimePs> {
    if !(rate > 0.0) || t1 <= t0 {
        return Vec::new();
    }
    let n = Poisson::new(rate * (t1 - t0)).map(|d| d.sample(rng) as usize).unwrap_or(0);
    let mut t: Vec<f64> = (0..n).map(|_| t0 + rng.random::<f64>() * (t1 - t0)).collect();
    t.sort_by(f64::total_cmp);
    t
}

/// Lorentzian frequency offset (µeV) whose ensemble coherence decays as
/// `e^{−|τ|/T2}`.
pub(crate) fn lorentzian_offset<R: Rng + ?Sized>(rng: &mut R, t2_ps: f64) -> f64 {
    Cauchy::new(0.0, HBAR_UEV_PS / t2_ps).expect("positive width").sample(rng)
}

/// Applies efficiency, timing jitter and dark counts for one channel and
/// appends the resulting clicks.
pub(crate) fn detect<R: Rng + ?Sized>(
    rng: &mut R,
    det: &DetectorParams,
    channel: Channel,
    times: &[TimePs],
    window: (TimePs, TimePs),
    out: &mut Vec<EventRecord>,
) {
    let sigma = det.response_sigma_ps();
    let jitter = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    for &t in times {
        if det.efficiency < 1.0 && rng.random::<f64>() >= det.efficiency {
            continue;
        }
        let dt = if sigma > 0.0 { jitter.sample(rng) } else { 0.0 };
        out.push(EventRecord::new(channel, to_timestamp(t + dt)));
    }
    for t in poisson_times(rng, det.dark_rate_per_ps, window.0, window.1) {
        out.push(EventRecord::new(channel, to_timestamp(t)));
    }
}

/// Removes clicks within `dead_ps` of the previous kept click on the same
/// channel. Input must be sorted.
pub(crate) fn apply_dead_time(records: Vec<EventRecord>, dead_ps: f64) -> Vec<EventRecord> {
    if dead_ps <= 0.0 {
        return records;
    }
    let mut last = [i64::MIN; 256];
    records
        .into_iter()
        .filter(|r| {
            let l = &mut last[r.channel as usize];
            if *l != i64::MIN && ((r.time_ps - *l) as f64) < dead_ps {
                false
            } else {
                *l = r.time_ps;
                true
            }
        })
        .collect()
}

/// Runs `f` on every slab in parallel and merges the clicks into one stream.
pub(crate) fn run_slabs<F>(cfg: &SimConfig, f: F) -> Result<EventStream>
where
    F: Fn(usize, TimePs, TimePs) -> Vec<EventRecord> + Sync,
{
    let parts: Vec<Vec<EventRecord>> = cfg.slabs().into_par_iter().map(|(i, a, b)| f(i, a, b)).collect();
    let mut all: Vec<EventRecord> = parts.into_iter().flatten().collect();
    all.sort_unstable();
    Ok(EventStream::from_sorted(apply_dead_time(all, cfg.dead_time_ps))?.with_acquisition(cfg.duration_ps))
}

/// Photons leaving the dot: exciton and biexciton photons of every cascade
/// plus the uncorrelated background at `β` times the exciton rate, all at
/// the emitter (no collection losses).
pub fn synth_qd_stream(cfg: &SimConfig) -> Result<Vec<EmittedPhoton>> {
    cfg.validate()?;
    let rates = cfg.emitter_rates()?;
    let h = PolarizationState::from_label(PolarizationLabel::H);
    let v = PolarizationState::from_label(PolarizationLabel::V);
    let parts: Vec<Vec<EmittedPhoton>> = cfg
        .slabs()
        .into_par_iter()
        .map(|(i, a, b)| {
            let mut rng = slab_rng(cfg.seed, i, Purpose::Emitter);
            let cascades = rates.simulate(&mut rng, a, b, cfg.emitter.xx_lifetime_ps);
            let mut rng = slab_rng(cfg.seed, i, Purpose::Routing);
            let mut diffusion = Diffusion::new(cfg.emitter.spectral_diffusion, &mut rng);
            let mut out = Vec::with_capacity(2 * cascades.len());
            for c in &cascades {
                let pol = if rng.random::<bool>() { h } else { v };
                let shift = diffusion.at(c.t_xx, &mut rng);
                out.push(EmittedPhoton {
                    t_emit_ps: c.t_xx,
                    freq_offset_uev: lorentzian_offset(&mut rng, cfg.qd.t2_ps) + shift,
                    polarization: pol,
                    origin: Origin::Xx,
                });
                out.push(EmittedPhoton {
                    t_emit_ps: c.t_x,
                    freq_offset_uev: lorentzian_offset(&mut rng, cfg.qd.t2_ps) + shift,
                    polarization: pol,
                    origin: Origin::X,
                });
            }
            let mut rng = slab_rng(cfg.seed, i, Purpose::Background);
            for t in poisson_times(&mut rng, cfg.qd.beta * rates.photon_rate(), a, b) {
                let pol = if rng.random::<bool>() { h } else { v };
                out.push(EmittedPhoton { t_emit_ps: t, freq_offset_uev: 0.0, polarization: pol, origin: Origin::Background });
            }
            out
        })
        .collect();
    let mut all: Vec<EmittedPhoton> = parts.into_iter().flatten().collect();
    all.sort_by(|a, b| a.t_emit_ps.total_cmp(&b.t_emit_ps));
    Ok(all)
}

/// Poissonian laser photons at `α²` times the delivered dot rate, with the
/// laser's fixed polarization and detuning.
pub fn synth_laser_stream(cfg: &SimConfig) -> Result<Vec<EmittedPhoton>> {
    cfg.validate()?;
    let rate = cfg.laser.intensity_alpha2 * cfg.emitter.qd_rate_per_ps;
    let parts: Vec<Vec<EmittedPhoton>> = cfg
        .slabs()
        .into_par_iter()
        .map(|(i, a, b)| {
            let mut rng = slab_rng(cfg.seed, i, Purpose::Laser);
            poisson_times(&mut rng, rate, a, b)
                .into_iter()
                .map(|t| EmittedPhoton {
                    t_emit_ps: t,
                    freq_offset_uev: cfg.laser.detuning_uev.value(),
                    polarization: cfg.laser.polarization,
                    origin: Origin::Laser,
                })
                .collect()
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

/// Ornstein–Uhlenbeck line-centre shift sampled at increasing times.
pub(crate) struct Diffusion {
    params: Option<SpectralDiffusion>,
    t: f64,
    x: f64,
}

impl Diffusion {
    pub(crate) fn new<R: Rng + ?Sized>(params: Option<SpectralDiffusion>, rng: &mut R) -> Self {
        let x = match params {
            Some(p) if p.amplitude_uev > 0.0 => p.amplitude_uev * rng.sample::<f64, _>(rand_distr::StandardNormal),
            _ => 0.0,
        };
        Diffusion { params, t: f64::NEG_INFINITY, x }
    }

    pub(crate) fn at<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) -> f64 {
        let Some(p) = self.params.filter(|p| p.amplitude_uev > 0.0) else {
            return 0.0;
        };
        if self.t.is_finite() {
            let rho = (-(t - self.t).max(0.0) / p.timescale_ps).exp();
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            self.x = rho * self.x + p.amplitude_uev * (1.0 - rho * rho).sqrt() * z;
        }
        self.t = t;
        self.x
    }
}

/// Dispatches to the click-stream generator of the configured topology.
pub fn simulate(cfg: &SimConfig) -> Result<EventStream> {
    match cfg.topology {
        Topology::Hbt => run_hbt(cfg),
        Topology::Hom => run_hom(cfg, cfg.hom.copolarized),
        Topology::Teleport => {
            let basis = teleport::bob_basis(cfg)?;
            run_teleport(cfg, cfg.teleport.input, basis)
        }
        Topology::Michelson => Err(Error::config("the michelson topology produces a fringe table, not a click stream")),
    }
}
