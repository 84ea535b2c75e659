//! End-to-end teleportation run: one stream per input state, fidelity maps,
//! window scan and the Bob-delay oscillation.

use serde::{Deserialize, Serialize};

use crate::correlation::{build_fidelity_map, correlate_g3_axes, window_scan, BinSpec, FidelityMap, WindowScanResult};
use crate::domain::{PolarizationLabel, PolarizationState};
use crate::error::{Error, Result};
use crate::estimation::{fit_damped_oscillation, FitReport};
use crate::stream::EventStream;
use crate::synth::{run_teleport, SimConfig, CH_H, CH_P, CH_Q, CH_V};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeleportAnalysis {
    pub charlie_span_ps: i64,
    pub charlie_bin_ps: i64,
    pub bob_span_ps: i64,
    pub bob_bin_ps: i64,
    pub windows_ps: Vec<f64>,
    pub sixstate_bound: f64,
    pub inputs: Vec<PolarizationLabel>,
    /// Half-width of the Charlie-delay band summed for the Bob-delay profile.
    pub profile_half_window_ps: f64,
}

impl Default for TeleportAnalysis {
    fn default() -> Self {
        TeleportAnalysis {
            charlie_span_ps: 1200,
            charlie_bin_ps: 8,
            bob_span_ps: 4000,
            bob_bin_ps: 8,
            windows_ps: vec![40.0, 103.0, 203.0, 303.0, 403.0, 603.0],
            sixstate_bound: 0.724,
            inputs: PolarizationLabel::ALL.to_vec(),
            profile_half_window_ps: 51.5,
        }
    }
}

impl TeleportAnalysis {
    pub fn axes(&self) -> Result<(BinSpec, BinSpec)> {
        Ok((BinSpec::new(self.charlie_span_ps, self.charlie_bin_ps)?, BinSpec::new(self.bob_span_ps, self.bob_bin_ps)?))
    }
}

#[derive(Debug, Clone)]
pub struct BasisOutcome {
    pub input: PolarizationLabel,
    pub map: FidelityMap,
    pub scan: WindowScanResult,
}

#[derive(Debug, Clone)]
pub struct TeleportOutcome {
    pub bases: Vec<BasisOutcome>,
    pub pooled: FidelityMap,
    pub scan: WindowScanResult,
    /// `(τ_Bob, n_p, n_q)` of the pooled superposition-state inputs within
    /// the profile band; empty without such inputs.
    pub superposition_profile: Vec<(f64, u64, u64)>,
    /// Damped-cosine fit of that profile on its heralded side.
    pub oscillation: Option<FitReport>,
}

/// Input `label` with Bob's detectors set to the expected output state.
pub fn config_for_input(cfg: &SimConfig, label: PolarizationLabel, index: usize) -> SimConfig {
    let mut c = cfg.clone();
    c.teleport.input = PolarizationState::from_label(label);
    c.teleport.bob_p = None;
    c.teleport.bob_q = None;
    c.seed = cfg.seed.wrapping_add(index as u64);
    c
}

pub fn simulate_inputs(cfg: &SimConfig, inputs: &[PolarizationLabel]) -> Result<Vec<(PolarizationLabel, EventStream)>> {
    inputs
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let c = config_for_input(cfg, l, i);
            let p = crate::synth::expected_output(&c.teleport.input);
            Ok((l, run_teleport(&c, c.teleport.input, (p, p.orthogonal()))?))
        })
        .collect()
}

pub fn fidelity_map_of(stream: &EventStream, a: &TeleportAnalysis) -> Result<FidelityMap> {
    let (ac, ab) = a.axes()?;
    let p = correlate_g3_axes(stream, CH_H, CH_V, CH_P, ac, ab)?;
    let q = correlate_g3_axes(stream, CH_H, CH_V, CH_Q, ac, ab)?;
    build_fidelity_map(&p, &q)
}

pub fn analyze(streams: &[(PolarizationLabel, &EventStream)], a: &TeleportAnalysis) -> Result<TeleportOutcome> {
    if streams.is_empty() {
        return Err(Error::input("no teleportation streams to analyze"));
    }
    let bases = streams
        .iter()
        .map(|&(input, s)| {
            let map = fidelity_map_of(s, a)?;
            let scan = window_scan(&map, &a.windows_ps, a.sixstate_bound)?;
            Ok(BasisOutcome { input, map, scan })
        })
        .collect::<Result<Vec<_>>>()?;
    let pooled = FidelityMap::pooled(&bases.iter().map(|b| &b.map).collect::<Vec<_>>())?;
    let scan = window_scan(&pooled, &a.windows_ps, a.sixstate_bound)?;
    let sup: Vec<&FidelityMap> = bases
        .iter()
        .filter(|b| !matches!(b.input, PolarizationLabel::H | PolarizationLabel::V))
        .map(|b| &b.map)
        .collect();
    let superposition_profile = if sup.is_empty() {
        Vec::new()
    } else {
        FidelityMap::pooled(&sup)?.bob_profile_counts(a.profile_half_window_ps)
    };
    let oscillation = oscillation_fit(&superposition_profile);
    Ok(TeleportOutcome { bases, pooled, scan, superposition_profile, oscillation })
}

/// Fits the Bob-delay fidelity profile on whichever side of zero carries
/// more heralds; the other side is dominated by accidentals.
fn oscillation_fit(prof: &[(f64, u64, u64)]) -> Option<FitReport> {
    let side = |neg: bool| prof.iter().filter(|r| (r.0 <= 0.0) == neg).map(|r| r.1 + r.2).sum::<u64>();
    let neg = side(true) >= side(false);
    let table: Vec<(f64, f64, f64)> = prof
        .iter()
        .filter(|r| (r.0 <= 0.0) == neg && r.1 + r.2 > 0)
        .map(|&(t, p, q)| {
            let n = (p + q) as f64;
            let f = (p as f64 + 0.5) / (n + 1.0);
            (t, p as f64 / n, (f * (1.0 - f) / (n + 1.0)).sqrt())
        })
        .collect();
    fit_damped_oscillation(&table).ok().map(|f| f.report)
}
