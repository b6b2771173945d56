use serde::{Deserialize, Serialize};

use super::{clicks, fmt_f64, record_rng, DetectionModel, Routing, STREAM_DETECTION};
use crate::error::{Error, Result};
use crate::solver::TrajectoryRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_cycles: u64,
}

impl Histogram {
    /// Uniform bins of `width` covering `[start, end]`; the last bin is
    /// shortened so the range ends exactly at `end`.
    pub fn uniform(start: f64, end: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !(end > start) {
            return Err(Error::Config("histogram needs width > 0 and end > start".into()));
        }
        let n = ((end - start) / width * (1.0 - 1e-12)).ceil() as usize;
        let mut bin_edges: Vec<f64> = (0..=n).map(|i| start + i as f64 * width).collect();
        *bin_edges.last_mut().expect("n >= 1") = end;
        Ok(Self {
            counts: vec![0; n],
            bin_edges,
            n_cycles: 0,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_of(&self, t: f64) -> Option<usize> {
        if t < self.bin_edges[0] || t >= *self.bin_edges.last()? {
            return None;
        }
        let i = self.bin_edges.partition_point(|&e| e <= t);
        Some(i - 1)
    }

    pub fn add(&mut self, t: f64) {
        if let Some(i) = self.bin_of(t) {
            self.counts[i] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `bin_start,bin_end,counts` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_start,bin_end,counts\n");
        for (w, c) in self.bin_edges.windows(2).zip(&self.counts) {
            s.push_str(&format!("{},{},{}\n", fmt_f64(w[0]), fmt_f64(w[1]), c));
        }
        s
    }
}

fn common_t_end(records: &[TrajectoryRecord]) -> Result<f64> {
    let first = records
        .first()
        .ok_or_else(|| Error::InsufficientData("no trajectory records".into()))?;
    if records.iter().any(|r| r.t_end != first.t_end) {
        return Err(Error::Config("records have different end times".into()));
    }
    Ok(first.t_end)
}

/// Arrival times of detected photons (both detectors summed) relative to
/// the start of each cycle, over `[0, t_end]` of the records.
pub fn time_arrival_histogram(records: &[TrajectoryRecord], detection: &DetectionModel, bin_width: f64) -> Result<Histogram> {
    detection.validate()?;
    let t_end = common_t_end(records)?;
    let mut h = Histogram::uniform(0.0, t_end, bin_width)?;
    for r in records {
        let mut rng = record_rng(r, STREAM_DETECTION);
        for c in clicks(r, detection, Routing::Split, 0.0, t_end, &mut rng) {
            h.add(c.time);
        }
    }
    h.n_cycles = records.len() as u64;
    Ok(h)
}

/// Detector counts per cycle inside the coincidence window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CycleCounts {
    pub n1: Vec<u32>,
    pub n2: Vec<u32>,
}

/// `counts[K + k] = Σ_i n1(i) n2(i + k)` for delays `k = -K..=K` cycles.
pub fn correlate_cycles(cycles: &CycleCounts, max_delay: usize) -> Vec<u64> {
    let n = cycles.n1.len().min(cycles.n2.len());
    let k_max = max_delay as i64;
    (-k_max..=k_max)
        .map(|k| {
            (0..n as i64)
                .filter_map(|i| {
                    let j = i + k;
                    (j >= 0 && j < n as i64).then(|| u64::from(cycles.n1[i as usize]) * u64::from(cycles.n2[j as usize]))
                })
                .sum()
        })
        .collect()
}

/// Coincidence histogram between two detectors behind a 50:50 splitter.
///
/// Each record is one excitation cycle; clicks are kept inside `window`
/// (relative to the pulse) and pair delays are tallied in whole cycles, so
/// bin `k` spans `[(k - ½) T, (k + ½) T)` and the τ = 0 bin holds only
/// same-cycle pairs.
pub fn coincidence_histogram(
    records: &[TrajectoryRecord],
    detection: &DetectionModel,
    cycle_period: f64,
    window: (f64, f64),
    max_delay: usize,
) -> Result<(Histogram, CycleCounts)> {
    detection.validate()?;
    let (start, end) = window;
    if !(start >= 0.0 && end > start && end <= cycle_period) {
        return Err(Error::Config(format!(
            "coincidence window [{start:e}, {end:e}] s must lie inside the {cycle_period:e} s cycle"
        )));
    }
    if records.is_empty() {
        return Err(Error::InsufficientData("no trajectory records".into()));
    }
    let mut cycles = CycleCounts::default();
    for r in records {
        let mut rng = record_rng(r, STREAM_DETECTION);
        let c = clicks(r, detection, Routing::Split, start, end, &mut rng);
        cycles.n1.push(c.iter().filter(|c| c.detector == 0).count() as u32);
        cycles.n2.push(c.iter().filter(|c| c.detector == 1).count() as u32);
    }
    let counts = correlate_cycles(&cycles, max_delay);
    let k = max_delay as f64;
    let bin_edges = (0..=2 * max_delay + 1).map(|i| (i as f64 - k - 0.5) * cycle_period).collect();
    Ok((
        Histogram {
            bin_edges,
            counts,
            n_cycles: records.len() as u64,
        },
        cycles,
    ))
}

/// Expected τ = 0 coincidences of a single-photon source plus noise:
/// a signal click (probability `p_signal` per cycle, split evenly) can only
/// pair with a noise click on the other detector, and noise pairs with
/// noise. `noise_per_detector` is the mean noise count per detector per
/// window. Returns `(mean, poisson σ)`.
pub fn accidental_coincidences(p_signal: f64, noise_per_detector: f64, n_cycles: u64) -> (f64, f64) {
    let b = noise_per_detector;
    let mean = n_cycles as f64 * (p_signal * b + b * b);
    (mean, mean.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{Level, Mode};
    use crate::model::ChannelTag;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn single_photon(seed: u64, t: f64) -> TrajectoryRecord {
        TrajectoryRecord {
            seed,
            jumps: vec![(t, ChannelTag::MirrorHt(Mode::SigmaPlus))],
            final_atom_state: Level::S,
            t_end: 2e-7,
        }
    }

    #[test]
    fn ideal_counts_equal_ht_jumps() {
        let records: Vec<_> = (0..100).map(|i| single_photon(i, 1e-9 * i as f64)).collect();
        let h = time_arrival_histogram(&records, &DetectionModel::ideal(), 1e-9).unwrap();
        assert_eq!(h.total(), 100);
        assert_eq!(h.n_cycles, 100);
        assert!(time_arrival_histogram(&[], &DetectionModel::ideal(), 1e-9).is_err());
    }

    #[test]
    fn single_photons_never_coincide() {
        let records: Vec<_> = (0..500).map(|i| single_photon(i, 5e-8)).collect();
        let (h, _) = coincidence_histogram(&records, &DetectionModel::ideal(), 4e-6, (2e-8, 1.5e-7), 5).unwrap();
        assert_eq!(h.counts[5], 0);
        assert!(h.counts[4] > 0 && h.counts[6] > 0);
        assert!(coincidence_histogram(&records, &DetectionModel::ideal(), 4e-6, (2e-8, 5e-6), 5).is_err());
    }

    #[test]
    fn poissonian_source_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Poisson::new(0.3).unwrap();
        let n = 50_000;
        let cycles = CycleCounts {
            n1: (0..n).map(|_| p.sample(&mut rng) as u32).collect(),
            n2: (0..n).map(|_| p.sample(&mut rng) as u32).collect(),
        };
        let c = correlate_cycles(&cycles, 5);
        let side: f64 = c.iter().enumerate().filter(|(i, _)| *i != 5).map(|(_, &v)| v as f64).sum::<f64>() / 10.0;
        assert!((c[5] as f64 - side).abs() < 4.0 * side.sqrt(), "{} vs {side}", c[5]);
    }

    #[test]
    fn csv_layout() {
        let mut h = Histogram::uniform(0.0, 3e-9, 1e-9).unwrap();
        h.add(1.5e-9);
        let csv = h.to_csv();
        assert_eq!(csv.lines().next(), Some("bin_start,bin_end,counts"));
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(2).unwrap().ends_with(",1"));
    }
}
