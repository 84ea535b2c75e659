use statrs::function::erf::erfc;

use super::ModelWarning;
use crate::domain::{fwhm_to_sigma, TimePs};
use crate::error::{Error, Result};

/// Gaussian kernels are truncated at this many standard deviations.
pub const KERNEL_HALF_WIDTH_SIGMAS: f64 = 5.0;

/// Finest-grid step used when a model is convolved and binned.
pub const MAX_GRID_STEP_PS: f64 = 5.0;

/// A real function sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    pub start_ps: TimePs,
    pub step_ps: TimePs,
    pub values: Vec<f64>,
}

impl SampledCurve {
    pub fn new(start_ps: TimePs, step_ps: TimePs, values: Vec<f64>) -> Result<Self> {
        if !(step_ps.is_finite() && step_ps > 0.0) {
            return Err(Error::input(format!("grid step must be positive, got {step_ps}")));
        }
        Ok(SampledCurve { start_ps, step_ps, values })
    }

    pub fn from_fn(start_ps: TimePs, step_ps: TimePs, len: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..len).map(|i| f(start_ps + i as f64 * step_ps)).collect();
        Self::new(start_ps, step_ps, values)
    }

    /// Builds a curve from `(tau, value)` pairs that must lie on a uniform grid.
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::input("a sampled curve needs at least two points"));
        }
        let step = points[1].0 - points[0].0;
        for w in points.windows(2) {
            let s = w[1].0 - w[0].0;
            if (s - step).abs() > 1e-9 * step.abs().max(1.0) {
                return Err(Error::input("sampled curve grid is not uniform"));
            }
        }
        Self::new(points[0].0, step, points.iter().map(|p| p.1).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tau(&self, i: usize) -> TimePs {
        self.start_ps + i as f64 * self.step_ps
    }

    pub fn points(&self) -> impl Iterator<Item = (TimePs, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.tau(i), v))
    }

    /// Discrete integral, `Σ values · step`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step_ps
    }
}

fn gaussian_kernel(sigma: f64, step: f64) -> Vec<f64> {
    let half = (KERNEL_HALF_WIDTH_SIGMAS * sigma / step).ceil() as usize;
    let mut k: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let x = (i as f64 - half as f64) * step;
            (-0.5 * x * x / (sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Convolves `values` with a discrete kernel of odd length, replicating the
/// edge samples beyond the grid.
fn convolve_clamped(values: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = values.len() as isize;
    let half = (kernel.len() / 2) as isize;
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let j = (i + k as isize - half).clamp(0, n - 1);
                    w * values[j as usize]
                })
                .sum()
        })
        .collect()
}

/// Convolves a curve with a unit-area Gaussian of the given FWHM.
///
/// The kernel is truncated at ±5σ and renormalized on the grid; samples
/// beyond the ends are taken equal to the end values. A zero FWHM is the
/// identity.
pub fn convolve_gaussian(
    curve: &SampledCurve,
    fwhm_ps: TimePs,
) -> Result<(SampledCurve, Option<ModelWarning>)> {
    if !(fwhm_ps.is_finite() && fwhm_ps >= 0.0) {
        return Err(Error::input(format!("fwhm must be non-negative, got {fwhm_ps}")));
    }
    if fwhm_ps == 0.0 || curve.is_empty() {
        return Ok((curve.clone(), None));
    }
    let warning = (curve.step_ps > fwhm_ps / 2.0)
        .then_some(ModelWarning::UndersampledKernel { step_ps: curve.step_ps, fwhm_ps });
    let kernel = gaussian_kernel(fwhm_to_sigma(fwhm_ps), curve.step_ps);
    let values = convolve_clamped(&curve.values, &kernel);
    Ok((SampledCurve { values, ..*curve }, warning))
}

/// Averages `model ∗ Gaussian(fwhm)` over each bin of a uniform grid.
///
/// The model is sampled at the midpoints of sub-bins no wider than
/// `max_step_ps`, over a range padded by the kernel half-width so no edge
/// treatment is involved.
pub fn binned_convolved(
    model: impl Fn(f64) -> f64,
    edges: &[f64],
    fwhm_ps: TimePs,
    max_step_ps: f64,
) -> Result<Vec<f64>> {
    if edges.len() < 2 {
        return Ok(Vec::new());
    }
    let width = edges[1] - edges[0];
    if !(width > 0.0) {
        return Err(Error::input("bin edges must be strictly increasing"));
    }
    let nbins = edges.len() - 1;
    let sub = (width / max_step_ps).ceil().max(1.0) as usize;
    let h = width / sub as f64;
    let sigma = fwhm_to_sigma(fwhm_ps);
    let pad = if fwhm_ps > 0.0 { (KERNEL_HALF_WIDTH_SIGMAS * sigma / h).ceil() as usize } else { 0 };
    let n_inner = nbins * sub;
    let x0 = edges[0] + 0.5 * h - pad as f64 * h;
    let raw: Vec<f64> = (0..n_inner + 2 * pad).map(|j| model(x0 + j as f64 * h)).collect();
    let fine: Vec<f64> = if pad == 0 {
        raw
    } else {
        let kernel = gaussian_kernel(sigma, h);
        let half = kernel.len() / 2;
        (pad..pad + n_inner)
            .map(|i| kernel.iter().enumerate().map(|(k, w)| w * raw[i + k - half]).sum())
            .collect()
    };
    Ok(fine.chunks(sub).map(|c| c.iter().sum::<f64>() / sub as f64).collect())
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 25.0 {
        (x * x).exp() * erfc(x)
    } else {
        let x2 = x * x;
        let series = 1.0 - 0.5 / x2 + 0.75 / (x2 * x2) - 1.875 / (x2 * x2 * x2);
        series / (x * std::f64::consts::PI.sqrt())
    }
}

/// Exact convolution of `exp(-|τ|/t)` with a unit-area Gaussian of
/// standard deviation `sigma`.
pub fn exp_gauss_conv(tau: f64, t: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return (-tau.abs() / t).exp();
    }
    let one_side = |x: f64| {
        let u = (sigma * sigma / t - x) / (sigma * std::f64::consts::SQRT_2);
        if u >= 0.0 {
            (-0.5 * x * x / (sigma * sigma)).exp() * erfcx(u)
        } else {
            (0.5 * sigma * sigma / (t * t) - x / t).exp() * erfc(u)
        }
    };
    0.5 * (one_side(tau) + one_side(-tau))
}
