use serde::{Deserialize, Serialize};

use super::BinSpec;
use crate::domain::Timestamp;
use crate::error::{Error, Result};
use crate::stream::{Channel, EventStream};

/// Triggered third-order coincidences over `(t_c2 − t_trig, t_c3 − t_trig)`.
///
/// `counts` is row-major with the first axis (`c2`, Charlie) as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G3Histogram {
    pub axis_charlie: BinSpec,
    pub axis_bob: BinSpec,
    pub counts: Vec<u64>,
    pub trigger_channel: Channel,
    pub channels: (Channel, Channel),
    pub triggers: u64,
    pub acquisition_ps: Timestamp,
}

impl G3Histogram {
    pub fn empty(axis_charlie: BinSpec, axis_bob: BinSpec, trigger: Channel, c2: Channel, c3: Channel) -> Self {
        G3Histogram {
            axis_charlie,
            axis_bob,
            counts: vec![0; axis_charlie.nbins() * axis_bob.nbins()],
            trigger_channel: trigger,
            channels: (c2, c3),
            triggers: 0,
            acquisition_ps: 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axis_charlie.nbins(), self.axis_bob.nbins())
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.axis_bob.nbins() + j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn same_axes(&self, other: &G3Histogram) -> bool {
        self.axis_charlie == other.axis_charlie && self.axis_bob == other.axis_bob
    }

    /// Sums counts from another run on the same axes (e.g. a different input
    /// state); channel labels are not required to match.
    pub fn merge(&mut self, other: &G3Histogram) -> Result<()> {
        if !self.same_axes(other) {
            return Err(Error::input("cannot merge third-order histograms with different axes"));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self.triggers += other.triggers;
        self.acquisition_ps += other.acquisition_ps;
        Ok(())
    }
}

/// Square-binned form of [`correlate_g3_axes`].
pub fn correlate_g3(
    stream: &EventStream,
    trigger: Channel,
    c2: Channel,
    c3: Channel,
    bins: BinSpec,
) -> Result<G3Histogram> {
    correlate_g3_axes(stream, trigger, c2, c3, bins, bins)
}

/// Counts every `(c2, c3)` event pair falling in the 2D histogram around
/// each trigger event. The three channels must be distinct.
pub fn correlate_g3_axes(
    stream: &EventStream,
    trigger: Channel,
    c2: Channel,
    c3: Channel,
    axis_charlie: BinSpec,
    axis_bob: BinSpec,
) -> Result<G3Histogram> {
    if c2 == c3 || trigger == c2 || trigger == c3 {
        return Err(Error::config(format!(
            "third-order correlation needs three distinct channels, got {trigger}, {c2}, {c3}"
        )));
    }
    let axis_charlie = BinSpec::new(axis_charlie.span_ps, axis_charlie.bin_ps)?;
    let axis_bob = BinSpec::new(axis_bob.span_ps, axis_bob.bin_ps)?;
    let mut h = G3Histogram::empty(axis_charlie, axis_bob, trigger, c2, c3);
    h.acquisition_ps = stream.acquisition_ps();
    let tt = stream.channel_times(trigger);
    let t2 = stream.channel_times(c2);
    let t3 = stream.channel_times(c3);
    h.triggers = tt.len() as u64;
    let nb = axis_bob.nbins();
    let (r2, r3) = (axis_charlie.reach(), axis_bob.reach());
    let (mut lo2, mut lo3) = (0usize, 0usize);
    let mut hits2: Vec<usize> = Vec::new();
    for &t in &tt {
        while lo2 < t2.len() && t2[lo2] < t - r2 {
            lo2 += 1;
        }
        while lo3 < t3.len() && t3[lo3] < t - r3 {
            lo3 += 1;
        }
        hits2.clear();
        hits2.extend(t2[lo2..].iter().take_while(|&&x| x <= t + r2).filter_map(|&x| axis_charlie.index(x - t)));
        if hits2.is_empty() {
            continue;
        }
        for &x in t3[lo3..].iter().take_while(|&&x| x <= t + r3) {
            if let Some(j) = axis_bob.index(x - t) {
                for &i in &hits2 {
                    h.counts[i * nb + j] += 1;
                }
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::EventRecord;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stream(n: usize, channels: u8, duration: i64, seed: u64) -> EventStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs = (0..n)
            .map(|_| EventRecord::new(rng.random_range(0..channels), rng.random_range(0..duration)))
            .collect();
        EventStream::from_unsorted(recs).with_acquisition(duration)
    }

    #[test]
    fn matches_brute_force() {
        let s = random_stream(3000, 3, 2_000_000, 9);
        let ax = BinSpec::new(2000, 80).unwrap();
        let ay = BinSpec::new(1200, 40).unwrap();
        let h = correlate_g3_axes(&s, 0, 1, 2, ax, ay).unwrap();
        let (t0, t1, t2) = (s.channel_times(0), s.channel_times(1), s.channel_times(2));
        let mut want = vec![0u64; h.counts.len()];
        for &t in &t0 {
            for &a in &t1 {
                for &b in &t2 {
                    if let (Some(i), Some(j)) = (ax.index(a - t), ay.index(b - t)) {
                        want[i * ay.nbins() + j] += 1;
                    }
                }
            }
        }
        assert_eq!(h.counts, want);
        assert!(h.total() > 0);
    }

    #[test]
    fn independent_streams_flat() {
        let s = random_stream(600_000, 3, 200_000_000, 4);
        let bins = BinSpec::new(2000, 400).unwrap();
        let h = correlate_g3(&s, 0, 1, 2, bins).unwrap();
        let mean = h.total() as f64 / h.counts.len() as f64;
        assert!(mean > 100.0);
        for &c in &h.counts {
            assert!(((c as f64 - mean) / mean.sqrt()).abs() < 5.0);
        }
    }

    #[test]
    fn degenerate_channels_rejected() {
        let s = random_stream(10, 3, 1000, 1);
        let b = BinSpec::new(100, 10).unwrap();
        assert!(matches!(correlate_g3(&s, 0, 1, 1, b), Err(Error::Config(_))));
        assert!(correlate_g3(&s, 1, 1, 2, b).is_err());
    }
}
