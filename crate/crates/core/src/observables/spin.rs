use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{clicks, record_rng, DetectionModel, Routing, STREAM_DETECTION, STREAM_READOUT};
use crate::error::{Error, Result};
use crate::hilbert::{Level, Mj};
use crate::solver::TrajectoryRecord;

/// Classical readout channel of the state-selective fluorescence detection.
///
/// D(−3/2) (↓) stays dark; every other final state, including the S manifold,
/// scatters and reads bright (↑).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReadoutModel {
    pub bright_given_up: f64,
    pub dark_given_down: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self {
            bright_given_up: 0.98,
            dark_given_down: 0.98,
        }
    }
}

impl ReadoutModel {
    pub fn perfect() -> Self {
        Self {
            bright_given_up: 1.0,
            dark_given_down: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.bright_given_up) || !(0.0..=1.0).contains(&self.dark_given_down) {
            return Err(Error::Validation(vec!["readout fidelities must be in [0, 1]".into()]));
        }
        Ok(())
    }

    /// Measured spin: `true` for ↓ (dark).
    fn read_down(&self, state: Level, rng: &mut impl Rng) -> bool {
        let u: f64 = rng.random();
        if state == Level::D(Mj::M3_2) {
            u < self.dark_given_down
        } else {
            u >= self.bright_given_up
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SpinTallies {
    /// Cycles whose first click was on the σ⁺ detector.
    pub plus: u64,
    pub plus_down: u64,
    /// Cycles whose first click was on the σ⁻ detector.
    pub minus: u64,
    pub minus_up: u64,
    /// How many of the conditioning clicks were noise.
    pub noise_triggers: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSpinResult {
    pub p_down_given_plus: f64,
    pub p_up_given_minus: f64,
    pub ratio_plus_minus: f64,
    pub counts: SpinTallies,
}

impl ConditionalSpinResult {
    /// Binomial standard errors of the two conditional probabilities.
    pub fn standard_errors(&self) -> (f64, f64) {
        let se = |p: f64, n: u64| (p * (1.0 - p) / n as f64).sqrt();
        (
            se(self.p_down_given_plus, self.counts.plus),
            se(self.p_up_given_minus, self.counts.minus),
        )
    }

    /// Standard error of the ratio of two independent Poisson counts.
    pub fn ratio_error(&self) -> f64 {
        let (a, b) = (self.counts.plus as f64, self.counts.minus as f64);
        (a / b) * (1.0 / a + 1.0 / b).sqrt()
    }
}

/// Spin state conditioned on the polarization of the first click in
/// `window` behind a polarizing splitter.
pub fn spin_photon_correlation(
    records: &[TrajectoryRecord],
    detection: &DetectionModel,
    readout: &ReadoutModel,
    window: (f64, f64),
) -> Result<ConditionalSpinResult> {
    detection.validate()?;
    readout.validate()?;
    if !(window.1 > window.0) || window.0 < 0.0 {
        return Err(Error::Config("spin-photon window must be a non-empty interval >= 0".into()));
    }
    let mut t = SpinTallies::default();
    for r in records {
        let mut rng = record_rng(r, STREAM_DETECTION);
        let Some(first) = clicks(r, detection, Routing::Polarizing, window.0, window.1, &mut rng).first().copied() else {
            continue;
        };
        let down = readout.read_down(r.final_atom_state, &mut record_rng(r, STREAM_READOUT));
        if !first.signal {
            t.noise_triggers += 1;
        }
        if first.detector == 0 {
            t.plus += 1;
            t.plus_down += u64::from(down);
        } else {
            t.minus += 1;
            t.minus_up += u64::from(!down);
        }
    }
    if t.plus == 0 || t.minus == 0 {
        return Err(Error::InsufficientData(format!(
            "need detections in both polarizations (σ⁺: {}, σ⁻: {})",
            t.plus, t.minus
        )));
    }
    Ok(ConditionalSpinResult {
        p_down_given_plus: t.plus_down as f64 / t.plus as f64,
        p_up_given_minus: t.minus_up as f64 / t.minus as f64,
        ratio_plus_minus: t.plus as f64 / t.minus as f64,
        counts: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Mode;
    use crate::model::ChannelTag;

    fn rec(seed: u64, mode: Mode, state: Level) -> TrajectoryRecord {
        TrajectoryRecord {
            seed,
            jumps: vec![(3e-8, ChannelTag::MirrorHt(mode))],
            final_atom_state: state,
            t_end: 2e-7,
        }
    }

    #[test]
    fn perfect_correlations() {
        let mut records = Vec::new();
        for i in 0..300 {
            records.push(rec(i, Mode::SigmaPlus, Level::D(Mj::M3_2)));
        }
        for i in 300..400 {
            records.push(rec(i, Mode::SigmaMinus, Level::D(Mj::P1_2)));
        }
        let r = spin_photon_correlation(&records, &DetectionModel::ideal(), &ReadoutModel::perfect(), (0.0, 2e-7)).unwrap();
        assert_eq!(r.p_down_given_plus, 1.0);
        assert_eq!(r.p_up_given_minus, 1.0);
        assert_eq!(r.ratio_plus_minus, 3.0);
    }

    #[test]
    fn no_clicks_is_an_error() {
        let records = vec![rec(1, Mode::SigmaPlus, Level::S)];
        assert!(spin_photon_correlation(&records, &DetectionModel::ideal(), &ReadoutModel::perfect(), (0.0, 1e-8)).is_err());
    }
}
