use serde::{Deserialize, Serialize};

use super::{BinSpec, G3Histogram};
use crate::error::{Error, Result};

/// Best fidelity attainable by measure-and-prepare strategies.
pub const CLASSICAL_BOUND: f64 = 2.0 / 3.0;

/// Cell-wise `F = n_p/(n_p + n_q)` with binomial standard errors.
///
/// Cells with no counts in either map are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityMap {
    pub axis_charlie: BinSpec,
    pub axis_bob: BinSpec,
    pub counts_p: Vec<u64>,
    pub counts_q: Vec<u64>,
    pub fidelity: Vec<Option<f64>>,
    pub std_error: Vec<Option<f64>>,
}

fn ratio(p: u64, q: u64) -> Option<(f64, f64)> {
    let n = p + q;
    (n > 0).then(|| {
        let f = p as f64 / n as f64;
        (f, (f * (1.0 - f) / n as f64).sqrt())
    })
}

pub fn build_fidelity_map(g3_p: &G3Histogram, g3_q: &G3Histogram) -> Result<FidelityMap> {
    if !g3_p.same_axes(g3_q) {
        return Err(Error::input("fidelity map needs P and Q histograms on identical axes"));
    }
    let (fidelity, std_error) = g3_p
        .counts
        .iter()
        .zip(&g3_q.counts)
        .map(|(&p, &q)| ratio(p, q).map_or((None, None), |(f, e)| (Some(f), Some(e))))
        .unzip();
    Ok(FidelityMap {
        axis_charlie: g3_p.axis_charlie,
        axis_bob: g3_p.axis_bob,
        counts_p: g3_p.counts.clone(),
        counts_q: g3_q.counts.clone(),
        fidelity,
        std_error,
    })
}

impl FidelityMap {
    pub fn shape(&self) -> (usize, usize) {
        (self.axis_charlie.nbins(), self.axis_bob.nbins())
    }

    fn at(&self, i: usize, j: usize) -> usize {
        i * self.axis_bob.nbins() + j
    }

    pub fn fidelity_at(&self, i: usize, j: usize) -> Option<f64> {
        self.fidelity[self.at(i, j)]
    }

    /// Cell containing zero delay on both axes.
    pub fn peak_cell(&self) -> (usize, usize) {
        (self.axis_charlie.nbins() / 2, self.axis_bob.nbins() / 2)
    }

    /// Summed counts inside a centred rectangle of `±ni` by `±nj` cells.
    fn window_counts(&self, ni: usize, nj: usize) -> (u64, u64) {
        let (ci, cj) = self.peak_cell();
        let mut p = 0;
        let mut q = 0;
        for i in ci - ni..=ci + ni {
            for j in cj - nj..=cj + nj {
                p += self.counts_p[self.at(i, j)];
                q += self.counts_q[self.at(i, j)];
            }
        }
        (p, q)
    }

    /// Fidelity per Bob-axis bin after summing over Charlie bins within
    /// `±half_window_ps`.
    pub fn bob_profile(&self, half_window_ps: f64) -> Vec<(f64, Option<f64>)> {
        self.bob_profile_counts(half_window_ps).into_iter().map(|(t, p, q)| (t, ratio(p, q).map(|r| r.0))).collect()
    }

    /// `(τ_Bob, n_p, n_q)` per Bob-axis bin, summed over Charlie bins within
    /// `±half_window_ps`.
    pub fn bob_profile_counts(&self, half_window_ps: f64) -> Vec<(f64, u64, u64)> {
        let ni = cells_within(&self.axis_charlie, half_window_ps).unwrap_or(0);
        let ci = self.axis_charlie.nbins() / 2;
        (0..self.axis_bob.nbins())
            .map(|j| {
                let (p, q) = (ci - ni..=ci + ni)
                    .fold((0, 0), |(p, q), i| (p + self.counts_p[self.at(i, j)], q + self.counts_q[self.at(i, j)]));
                (self.axis_bob.center(j), p, q)
            })
            .collect()
    }

    /// Cell-wise sum of maps on identical axes.
    pub fn pooled(maps: &[&FidelityMap]) -> Result<FidelityMap> {
        let Some(first) = maps.first() else {
            return Err(Error::input("no fidelity maps to pool"));
        };
        let mut p = first.counts_p.clone();
        let mut q = first.counts_q.clone();
        for m in &maps[1..] {
            if m.axis_charlie != first.axis_charlie || m.axis_bob != first.axis_bob {
                return Err(Error::input("pooled fidelity maps must share their axes"));
            }
            p.iter_mut().zip(&m.counts_p).for_each(|(a, b)| *a += b);
            q.iter_mut().zip(&m.counts_q).for_each(|(a, b)| *a += b);
        }
        let (fidelity, std_error) =
            p.iter().zip(&q).map(|(&a, &b)| ratio(a, b).map_or((None, None), |(f, e)| (Some(f), Some(e)))).unzip();
        Ok(FidelityMap {
            axis_charlie: first.axis_charlie,
            axis_bob: first.axis_bob,
            counts_p: p,
            counts_q: q,
            fidelity,
            std_error,
        })
    }
}

/// Number of cells either side of zero whose centres lie within `±half`.
fn cells_within(axis: &BinSpec, half: f64) -> Option<usize> {
    let n = (half / axis.bin_ps as f64 + 1e-9).floor() as i64;
    (n * axis.bin_ps <= axis.span_ps).then_some(n.max(0) as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScanResult {
    /// Requested square side lengths.
    pub window_sizes_ps: Vec<f64>,
    /// Side lengths actually covered: whole cells whose centres fall inside
    /// the requested square, `(2n + 1)·bin` per axis.
    pub effective_sizes_ps: Vec<(f64, f64)>,
    pub heralded: Vec<u64>,
    pub mean_fidelity: Vec<Option<f64>>,
    pub std_error: Vec<Option<f64>>,
    pub significance_vs_classical: Vec<Option<f64>>,
    pub significance_vs_sixstate: Vec<Option<f64>>,
    pub sixstate_bound: f64,
}

/// Mean fidelity from counts summed in square windows centred on zero delay.
pub fn window_scan(map: &FidelityMap, windows_ps: &[f64], sixstate_bound: f64) -> Result<WindowScanResult> {
    let mut out = WindowScanResult {
        window_sizes_ps: windows_ps.to_vec(),
        effective_sizes_ps: Vec::new(),
        heralded: Vec::new(),
        mean_fidelity: Vec::new(),
        std_error: Vec::new(),
        significance_vs_classical: Vec::new(),
        significance_vs_sixstate: Vec::new(),
        sixstate_bound,
    };
    for &w in windows_ps {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::config(format!("window sizes must be positive, got {w}")));
        }
        let extent = |a: &BinSpec| (2 * a.span_ps + a.bin_ps) as f64;
        if w > extent(&map.axis_charlie).min(extent(&map.axis_bob)) + 1e-9 {
            return Err(Error::config(format!("window {w} ps exceeds the map extent")));
        }
        let (ni, nj) = match (cells_within(&map.axis_charlie, w / 2.0), cells_within(&map.axis_bob, w / 2.0)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::config(format!("window {w} ps exceeds the map extent"))),
        };
        out.effective_sizes_ps.push((
            ((2 * ni + 1) as i64 * map.axis_charlie.bin_ps) as f64,
            ((2 * nj + 1) as i64 * map.axis_bob.bin_ps) as f64,
        ));
        let (p, q) = map.window_counts(ni, nj);
        out.heralded.push(p + q);
        let r = ratio(p, q);
        out.mean_fidelity.push(r.map(|r| r.0));
        out.std_error.push(r.map(|r| r.1));
        let sig = |bound: f64| r.and_then(|(f, e)| (e > 0.0).then(|| (f - bound) / e));
        out.significance_vs_classical.push(sig(CLASSICAL_BOUND));
        out.significance_vs_sixstate.push(sig(sixstate_bound));
    }
    Ok(out)
}
