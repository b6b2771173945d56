//! Measured quantities: detector models applied to trajectory records,
//! histograms, spin-photon correlations, absorption per photon and fits.

mod absorption;
mod fit;
mod histogram;
mod spin;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::Mode;
use crate::model::ChannelTag;
use crate::solver::{splitmix64, TrajectoryRecord};

pub use absorption::{
    absorb_per_photon, absorption_direct, rate_matrix, AbsorptionPoint, AbsorptionSetup, RateMatrix,
};
pub use fit::{
    fit_exponential, fit_exponential_with_background, fit_saturation, synthetic_saturation, ExponentialFit,
    SaturationFit,
};
pub use histogram::{
    accidental_coincidences, coincidence_histogram, correlate_cycles, time_arrival_histogram, CycleCounts,
    Histogram,
};
pub use spin::{spin_photon_correlation, ConditionalSpinResult, ReadoutModel, SpinTallies};

/// Photon path from the HT mirror to the detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionModel {
    pub eta_mirror: f64,
    pub eps_mode: f64,
    pub eta_path: f64,
    pub eta_det: f64,
    /// Background light reaching each detector (counts/s).
    pub background_rate: f64,
    /// Dark counts of each detector (counts/s).
    pub dark_rate: f64,
    /// Probability that a photon's circular polarization is swapped before
    /// the polarizing beam splitter (residual fiber birefringence).
    pub polarization_mixing: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self {
            eta_mirror: 0.32,
            eps_mode: 0.90,
            eta_path: 0.75,
            eta_det: 0.25,
            background_rate: 0.0,
            dark_rate: 0.0,
            polarization_mixing: 0.0,
        }
    }
}

impl DetectionModel {
    /// Every photon leaving through the HT mirror is counted, no background.
    pub fn ideal() -> Self {
        Self {
            eta_mirror: 1.0,
            eps_mode: 1.0,
            eta_path: 1.0,
            eta_det: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        for (name, v) in [
            ("eta_mirror", self.eta_mirror),
            ("eps_mode", self.eps_mode),
            ("eta_path", self.eta_path),
            ("eta_det", self.eta_det),
            ("polarization_mixing", self.polarization_mixing),
        ] {
            if !(0.0..=1.0).contains(&v) {
                p.push(format!("detection.{name} must be in [0, 1] (got {v})"));
            }
        }
        if !(self.background_rate >= 0.0) || !(self.dark_rate >= 0.0) {
            p.push("detection background_rate and dark_rate must be >= 0".into());
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(p))
        }
    }

    /// Survival probability of a photon that left through the HT mirror.
    /// The mirror fraction itself is already resolved by the jump channel.
    pub fn thinning(&self) -> f64 {
        self.eps_mode * self.eta_path * self.eta_det
    }

    /// Spurious count rate of one detector.
    pub fn noise_rate(&self) -> f64 {
        self.background_rate + self.dark_rate
    }
}

/// A detector click in one cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Click {
    pub time: f64,
    /// Detector 0 or 1. Behind a polarizing splitter detector 0 sees σ⁺.
    pub detector: usize,
    pub signal: bool,
}

pub(crate) const STREAM_DETECTION: u64 = 1;
pub(crate) const STREAM_READOUT: u64 = 2;

/// Independent random stream for post-processing one record; keyed by the
/// record's own seed so results do not depend on record order.
pub(crate) fn record_rng(record: &TrajectoryRecord, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(record.seed ^ splitmix64(stream)))
}

/// How signal photons are routed to the two detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Routing {
    /// Non-polarizing 50:50 splitter.
    Split,
    /// Polarizing splitter: σ⁺ to detector 0, σ⁻ to detector 1, after
    /// polarization mixing.
    Polarizing,
}

/// Clicks of both detectors inside `[start, end)`, sorted by time.
pub(crate) fn clicks(
    record: &TrajectoryRecord,
    detection: &DetectionModel,
    routing: Routing,
    start: f64,
    end: f64,
    rng: &mut impl Rng,
) -> Vec<Click> {
    let keep = detection.thinning();
    let mut out = Vec::new();
    for &(t, tag) in &record.jumps {
        let ChannelTag::MirrorHt(mode) = tag else {
            continue;
        };
        // draw for every HT jump so the stream does not depend on the window
        let kept = rng.random::<f64>() < keep;
        let route: f64 = rng.random();
        if !kept || t < start || t >= end {
            continue;
        }
        let detector = match routing {
            Routing::Split => usize::from(route >= 0.5),
            Routing::Polarizing => {
                let flipped = route < detection.polarization_mixing;
                let plus = (mode == Mode::SigmaPlus) != flipped;
                usize::from(!plus)
            }
        };
        out.push(Click { time: t, detector, signal: true });
    }
    let noise = detection.noise_rate() * (end - start);
    if noise > 0.0 {
        let poisson = Poisson::new(noise).expect("positive mean");
        for detector in 0..2 {
            let n = poisson.sample(rng) as usize;
            for _ in 0..n {
                out.push(Click {
                    time: start + (end - start) * rng.random::<f64>(),
                    detector,
                    signal: false,
                });
            }
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    out
}

/// `true` if the record contains at least one jump through `pred`.
pub fn any_jump(record: &TrajectoryRecord, pred: impl Fn(ChannelTag) -> bool) -> bool {
    record.jumps.iter().any(|j| pred(j.1))
}

/// Fraction of records with at least one cavity-channel jump.
pub fn cavity_emission_fraction(records: &[TrajectoryRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| any_jump(r, ChannelTag::is_cavity)).count() as f64 / records.len() as f64
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Level;

    fn record(seed: u64, n_ht: usize) -> TrajectoryRecord {
        TrajectoryRecord {
            seed,
            jumps: (0..n_ht).map(|i| (1e-9 * (i + 1) as f64, ChannelTag::MirrorHt(Mode::SigmaPlus))).collect(),
            final_atom_state: Level::S,
            t_end: 1e-6,
        }
    }

    #[test]
    fn thinning_is_binomial() {
        let det = DetectionModel::default();
        let records: Vec<_> = (0..20000).map(|s| record(s, 1)).collect();
        let kept: usize = records
            .iter()
            .map(|r| clicks(r, &det, Routing::Split, 0.0, 1e-6, &mut record_rng(r, STREAM_DETECTION)).len())
            .sum();
        let p = det.thinning();
        let n = records.len() as f64;
        let sigma = (n * p * (1.0 - p)).sqrt();
        assert!((kept as f64 - n * p).abs() < 3.0 * sigma, "{kept} vs {}", n * p);
    }

    #[test]
    fn polarizing_routing_respects_mode() {
        let det = DetectionModel::ideal();
        let r = record(3, 5);
        let c = clicks(&r, &det, Routing::Polarizing, 0.0, 1e-6, &mut record_rng(&r, STREAM_DETECTION));
        assert_eq!(c.len(), 5);
        assert!(c.iter().all(|c| c.detector == 0 && c.signal));
    }

    #[test]
    fn probabilities_validated() {
        let det = DetectionModel { eta_det: 1.5, ..Default::default() };
        assert!(det.validate().is_err());
    }
}
