//! Coincidence histograms from time-tag streams.
//!
//! Bins are left-closed and right-open with zero delay at the centre of the
//! middle bin, so a histogram with half-span `n·bin` has `2n + 1` bins with
//! edges at `(k ± ½)·bin`.

mod fidelity;
mod g3;
pub mod io;

pub use fidelity::{build_fidelity_map, window_scan, FidelityMap, WindowScanResult, CLASSICAL_BOUND};
pub use g3::{correlate_g3, correlate_g3_axes, G3Histogram};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Timestamp;
use crate::error::{Error, Result};
use crate::stream::{Channel, EventStream};

/// Histogram axis: `2·span/bin + 1` bins centred on zero delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinSpec {
    pub span_ps: Timestamp,
    pub bin_ps: Timestamp,
}

impl BinSpec {
    pub fn new(span_ps: Timestamp, bin_ps: Timestamp) -> Result<Self> {
        if bin_ps <= 0 {
            return Err(Error::config(format!("bin width must be positive, got {bin_ps} ps")));
        }
        if span_ps < 0 || span_ps % bin_ps != 0 {
            return Err(Error::config(format!(
                "span {span_ps} ps must be a non-negative multiple of the bin width {bin_ps} ps"
            )));
        }
        Ok(BinSpec { span_ps, bin_ps })
    }

    fn half_bins(&self) -> i64 {
        self.span_ps / self.bin_ps
    }

    pub fn nbins(&self) -> usize {
        (2 * self.half_bins() + 1) as usize
    }

    /// Bin holding delay `dt`, if inside the histogram.
    #[inline]
    pub fn index(&self, dt: Timestamp) -> Option<usize> {
        let b = self.bin_ps;
        let k = (2 * dt + b).div_euclid(2 * b) + self.half_bins();
        (0..self.nbins() as i64).contains(&k).then_some(k as usize)
    }

    pub fn center(&self, i: usize) -> f64 {
        ((i as i64 - self.half_bins()) * self.bin_ps) as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.nbins()).map(|i| self.center(i)).collect()
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.nbins()).map(|i| self.center(i) - 0.5 * self.bin_ps as f64).collect()
    }

    /// Largest |dt| that can land in a bin, rounded outwards.
    fn reach(&self) -> Timestamp {
        self.span_ps + self.bin_ps
    }
}

/// How `normalized` is derived from the raw counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    /// Mean counts of bins with `|τ| ≥ (1 − fraction)·span`.
    Wings { fraction: f64 },
    /// Uncorrelated level `N_a·N_b·bin/T`.
    Poisson,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization::Wings { fraction: 0.2 }
    }
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Normalization::Wings { fraction } => write!(f, "wings(outer {:.0}% of span)", fraction * 100.0),
            Normalization::Poisson => write!(f, "poisson(Na*Nb*bin/T)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub bins: BinSpec,
    pub counts: Vec<u64>,
    pub channel_pair: (Channel, Channel),
    pub singles: (u64, u64),
    pub acquisition_ps: Timestamp,
    pub normalization: Normalization,
    pub baseline: Option<f64>,
    pub normalized: Option<Vec<f64>>,
}

impl CorrelationHistogram {
    fn empty(bins: BinSpec, a: Channel, b: Channel, acquisition_ps: Timestamp) -> Self {
        CorrelationHistogram {
            bins,
            counts: vec![0; bins.nbins()],
            channel_pair: (a, b),
            singles: (0, 0),
            acquisition_ps,
            normalization: Normalization::default(),
            baseline: None,
            normalized: None,
        }
    }

    pub fn bin_edges_ps(&self) -> Vec<f64> {
        self.bins.edges()
    }

    pub fn centers_ps(&self) -> Vec<f64> {
        self.bins.centers()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Count in the bin containing zero delay.
    pub fn zero_delay_counts(&self) -> u64 {
        self.counts[self.bins.nbins() / 2]
    }

    /// Recomputes `baseline` and `normalized` with the given method.
    pub fn normalize(&mut self, method: Normalization) -> Result<()> {
        self.normalization = method;
        let baseline = match method {
            Normalization::Wings { fraction } => {
                if !(fraction > 0.0 && fraction <= 1.0) {
                    return Err(Error::config(format!("wing fraction must be in (0, 1], got {fraction}")));
                }
                let cut = (1.0 - fraction) * self.bins.span_ps as f64;
                let wing: Vec<u64> = (0..self.counts.len())
                    .filter(|&i| self.bins.center(i).abs() >= cut - 1e-9)
                    .map(|i| self.counts[i])
                    .collect();
                (!wing.is_empty()).then(|| wing.iter().sum::<u64>() as f64 / wing.len() as f64)
            }
            Normalization::Poisson => (self.acquisition_ps > 0).then(|| {
                self.singles.0 as f64 * self.singles.1 as f64 * self.bins.bin_ps as f64 / self.acquisition_ps as f64
            }),
        }
        .filter(|&b| b > 0.0);
        self.baseline = baseline;
        self.normalized = baseline.map(|b| self.counts.iter().map(|&c| c as f64 / b).collect());
        Ok(())
    }

    /// Adds another partial histogram over a disjoint stretch of data.
    pub fn merge(&mut self, other: &CorrelationHistogram) -> Result<()> {
        if self.bins != other.bins || self.channel_pair != other.channel_pair {
            return Err(Error::input("cannot merge histograms with different binning or channels"));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self.singles.0 += other.singles.0;
        self.singles.1 += other.singles.1;
        self.acquisition_ps += other.acquisition_ps;
        let method = self.normalization;
        self.normalize(method)
    }
}

/// Accumulates pairs `tb[j] − ta[i]` into `counts` with a forward-only sweep.
///
/// When `same` holds the two slices view one channel and `a_off`/`b_off`
/// are their offsets into it, so self-pairs can be skipped.
fn sweep(ta: &[Timestamp], tb: &[Timestamp], bins: &BinSpec, same: Option<(usize, usize)>, counts: &mut [u64]) {
    let reach = bins.reach();
    let mut lo = 0usize;
    for (i, &t) in ta.iter().enumerate() {
        while lo < tb.len() && tb[lo] < t - reach {
            lo += 1;
        }
        let mut j = lo;
        while j < tb.len() && tb[j] <= t + reach {
            let skip = same.is_some_and(|(a_off, b_off)| a_off + i == b_off + j);
            if !skip {
                if let Some(k) = bins.index(tb[j] - t) {
                    counts[k] += 1;
                }
            }
            j += 1;
        }
    }
}

/// Histogram of `t_b − t_a` over all ordered pairs within `±span`.
///
/// Self-pairs are excluded when `a == b`. The histogram is normalized with
/// [`Normalization::default`].
pub fn correlate_g2(stream: &EventStream, a: Channel, b: Channel, bins: BinSpec) -> Result<CorrelationHistogram> {
    correlate_g2_slabs(stream, a, b, bins, None)
}

/// As [`correlate_g2`], splitting the trigger channel into slabs of
/// `slab_ps` processed in parallel. Each slab sees partner events up to one
/// span beyond its edges, so the result is identical to the serial sweep.
pub fn correlate_g2_slabs(
    stream: &EventStream,
    a: Channel,
    b: Channel,
    bins: BinSpec,
    slab_ps: Option<Timestamp>,
) -> Result<CorrelationHistogram> {
    let bins = BinSpec::new(bins.span_ps, bins.bin_ps)?;
    let ta = stream.channel_times(a);
    let tb = if a == b { ta.clone() } else { stream.channel_times(b) };
    let mut h = CorrelationHistogram::empty(bins, a, b, stream.acquisition_ps());
    h.singles = (ta.len() as u64, tb.len() as u64);
    if ta.is_empty() || tb.is_empty() {
        return Ok(h);
    }
    let same = a == b;
    let reach = bins.reach();
    let slab = slab_ps.filter(|&s| s > 0).unwrap_or(i64::MAX);
    let t0 = ta[0];
    let span = ta[ta.len() - 1] - t0;
    let nslabs = (span / slab.max(1)).saturating_add(1) as usize;
    let partials: Vec<Vec<u64>> = (0..nslabs)
        .into_par_iter()
        .map(|s| {
            let start = t0.saturating_add((s as i64).saturating_mul(slab));
            let end = start.saturating_add(slab);
            let ia = ta.partition_point(|&t| t < start);
            let ie = ta.partition_point(|&t| t < end);
            let jb = tb.partition_point(|&t| t < start.saturating_sub(reach));
            let je = tb.partition_point(|&t| t <= end.saturating_add(reach));
            let mut counts = vec![0u64; bins.nbins()];
            sweep(&ta[ia..ie], &tb[jb..je], &bins, same.then_some((ia, jb)), &mut counts);
            counts
        })
        .collect();
    for p in partials {
        h.counts.iter_mut().zip(p).for_each(|(c, x)| *c += x);
    }
    h.normalize(Normalization::default())?;
    Ok(h)
}
