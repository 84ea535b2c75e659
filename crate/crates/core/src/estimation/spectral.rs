//! Direct periodogram for irregularly sampled tables.

use std::f64::consts::TAU;

/// Dominant angular frequencies (rad/ps) of `data`, strongest first, each
/// with its normalized power.
///
/// The periodogram is taken of the first differences, which suppresses
/// slowly varying envelopes relative to oscillations. Powers are normalized
/// by `N·var`, so white noise averages one.
pub fn spectral_peaks(data: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if data.len() < 4 {
        return Vec::new();
    }
    let mut pts = data.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let diffs: Vec<(f64, f64)> =
        pts.windows(2).filter(|w| w[1].0 > w[0].0).map(|w| (0.5 * (w[0].0 + w[1].0), w[1].1 - w[0].1)).collect();
    let n = diffs.len();
    if n < 3 {
        return Vec::new();
    }
    let span = pts[pts.len() - 1].0 - pts[0].0;
    let mut steps: Vec<f64> = pts.windows(2).map(|w| w[1].0 - w[0].0).filter(|d| *d > 0.0).collect();
    steps.sort_by(f64::total_cmp);
    let dt = steps[steps.len() / 2];
    let mean = diffs.iter().map(|d| d.1).sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d.1 - mean).powi(2)).sum::<f64>() / n as f64;
    if !(var > 1e-30) {
        return Vec::new();
    }
    let w_hi = std::f64::consts::PI / dt;
    let dw = TAU / (8.0 * span);
    let m = (w_hi / dw).floor() as usize;
    let power: Vec<f64> = (1..=m)
        .map(|k| {
            let w = k as f64 * dw;
            let (mut c, mut s) = (0.0, 0.0);
            for &(t, y) in &diffs {
                let (sn, cs) = (w * t).sin_cos();
                c += (y - mean) * cs;
                s += (y - mean) * sn;
            }
            (c * c + s * s) / (n as f64 * var)
        })
        .collect();
    let mut peaks: Vec<(f64, f64)> = (0..power.len())
        .filter(|&i| (i == 0 || power[i] > power[i - 1]) && (i + 1 == power.len() || power[i] >= power[i + 1]))
        .map(|i| {
            let w = (i + 1) as f64 * dw;
            // Parabolic refinement on the grid.
            if i > 0 && i + 1 < power.len() {
                let (a, b, c) = (power[i - 1], power[i], power[i + 1]);
                let den = a - 2.0 * b + c;
                let shift = if den.abs() > 0.0 { 0.5 * (a - c) / den } else { 0.0 };
                (w + shift.clamp(-0.5, 0.5) * dw, b)
            } else {
                (w, power[i])
            }
        })
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks
}

/// Normalized power a peak must exceed to count as an oscillation: a 1%
/// false-alarm level for `n` independent frequencies of white noise.
pub fn significance_threshold(n: usize) -> f64 {
    (n.max(2) as f64 / 0.01).ln()
}
