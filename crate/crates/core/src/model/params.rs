use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Level, Mj};
use crate::units::{deserialize_rate, two_pi_mhz};

/// Cavity-QED rates and cavity geometry. Rates in rad/s, transmissions and
/// losses in ppm, length in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CavityQEDParams {
    /// Coupling on the transition with the largest Clebsch-Gordan amplitude.
    #[serde(deserialize_with = "deserialize_rate")]
    pub g_bar: f64,
    /// Cavity field decay rate; the intensity decays at `2 kappa`.
    #[serde(deserialize_with = "deserialize_rate")]
    pub kappa: f64,
    /// Dipole decay rate of the excited manifold; population decays at `2 gamma`.
    #[serde(deserialize_with = "deserialize_rate")]
    pub gamma: f64,
    pub t_ht: f64,
    pub t_lt: f64,
    pub loss: f64,
    pub finesse: f64,
    pub length: f64,
    /// Independently measured excited-state lifetime (s). When present it
    /// must agree with `1 / (2 gamma)` to within [`LIFETIME_TOL`].
    #[serde(default)]
    pub lifetime: Option<f64>,
}

/// Allowed mismatch between a stated lifetime and `1 / (2 gamma)`.
pub const LIFETIME_TOL: f64 = 0.1e-9;

impl Default for CavityQEDParams {
    fn default() -> Self {
        Self {
            g_bar: two_pi_mhz(1.6),
            kappa: two_pi_mhz(25.0),
            gamma: two_pi_mhz(2.11),
            t_ht: 100.0,
            t_lt: 10.0,
            loss: 200.0,
            finesse: 2.0e4,
            length: 170e-6,
            lifetime: Some(37.7e-9),
        }
    }
}

impl CavityQEDParams {
    pub fn excited_lifetime(&self) -> f64 {
        1.0 / (2.0 * self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        if !(self.g_bar >= 0.0) {
            p.push(format!("g_bar must be >= 0 (got {})", self.g_bar));
        }
        if !(self.kappa > 0.0) {
            p.push(format!("kappa must be > 0 (got {})", self.kappa));
        }
        if !(self.gamma > 0.0) {
            p.push(format!("gamma must be > 0 (got {})", self.gamma));
        }
        if !(self.t_ht > self.t_lt) {
            p.push(format!("t_ht ({}) must exceed t_lt ({})", self.t_ht, self.t_lt));
        }
        if self.t_lt < 0.0 || self.loss < 0.0 {
            p.push("t_lt and loss must be >= 0".into());
        }
        if !(self.finesse > 0.0) || !(self.length > 0.0) {
            p.push("finesse and length must be > 0".into());
        }
        if let Some(tau) = self.lifetime {
            let implied = self.excited_lifetime();
            if (implied - tau).abs() > LIFETIME_TOL {
                p.push(format!(
                    "lifetime {tau:e} s inconsistent with 1/(2 gamma) = {implied:e} s"
                ));
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(p))
        }
    }

    /// Fractions of the cavity decay leaving through (HT, LT, loss).
    pub fn mirror_split(&self) -> (f64, f64, f64) {
        let total = self.t_ht + self.t_lt + self.loss;
        (self.t_ht / total, self.t_lt / total, self.loss / total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BranchingParams {
    pub b_s: f64,
    pub b_d: f64,
}

impl Default for BranchingParams {
    fn default() -> Self {
        Self { b_s: 0.982, b_d: 0.018 }
    }
}

impl BranchingParams {
    pub fn validate(&self) -> Result<()> {
        if self.b_s < 0.0 || self.b_d < 0.0 || (self.b_s + self.b_d - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(vec![format!(
                "branching ratios must be non-negative and sum to 1 (got {} + {})",
                self.b_s, self.b_d
            )]));
        }
        Ok(())
    }
}

/// Frequency modulation of the ion's transition by RF-driven micromotion:
/// `δ(t) = beta · omega_rf · cos(omega_rf · t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MicromotionParams {
    #[serde(deserialize_with = "deserialize_rate")]
    pub omega_rf: f64,
    pub beta: f64,
}

impl Default for MicromotionParams {
    fn default() -> Self {
        Self {
            omega_rf: two_pi_mhz(22.0),
            beta: 0.0,
        }
    }
}

impl MicromotionParams {
    pub fn is_active(&self) -> bool {
        self.beta != 0.0
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega_rf
    }
}

/// Coherent probe injected into the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Drive strength η (rad/s) entering `H = η (c₊ (a₊ + a₊†) + c₋ (a₋ + a₋†))`.
    #[serde(deserialize_with = "deserialize_rate")]
    pub amplitude: f64,
    /// Probe minus cavity (and atomic) resonance, rad/s.
    #[serde(default, deserialize_with = "deserialize_rate")]
    pub detuning: f64,
    /// Half-wave plate angle θ in degrees.
    pub waveplate_angle: f64,
}

/// Waveplate angle at which the probe is purely σ⁺.
pub const WAVEPLATE_OFFSET_DEG: f64 = 5.0;

impl DriveParams {
    /// Field amplitudes `(c₊, c₋) = (cos 2(θ−5°), sin 2(θ−5°))`.
    pub fn polarization_components(&self) -> (f64, f64) {
        let phi = 2.0 * (self.waveplate_angle - WAVEPLATE_OFFSET_DEG).to_radians();
        (phi.cos(), phi.sin())
    }

    /// Drive strength for which the empty resonant cavity emits, summed over
    /// all its loss channels, `eta_in · photon_rate` photons per second:
    /// `2κ⟨a†a⟩ = 2η²/κ = eta_in · R_in`, so `η = sqrt(eta_in · R_in · κ / 2)`.
    pub fn calibrated_amplitude(photon_rate: f64, kappa: f64, eta_in: f64) -> f64 {
        (eta_in * photon_rate * kappa / 2.0).sqrt()
    }

    /// Intracavity photon number of the empty cavity under this drive.
    pub fn empty_cavity_photons(&self, kappa: f64) -> f64 {
        self.amplitude * self.amplitude / (kappa * kappa + self.detuning * self.detuning)
    }
}

/// Result of optical pumping: the ion starts in D(−3/2) with probability
/// `fidelity`, otherwise in one of the other D sublevels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreparationParams {
    pub fidelity: f64,
    /// Probabilities for D(−1/2), D(+1/2), D(+3/2). `None` spreads
    /// `1 - fidelity` uniformly.
    #[serde(default)]
    pub residual: Option<[f64; 3]>,
}

impl Default for PreparationParams {
    fn default() -> Self {
        Self {
            fidelity: 0.9,
            residual: None,
        }
    }
}

impl PreparationParams {
    pub fn perfect() -> Self {
        Self {
            fidelity: 1.0,
            residual: None,
        }
    }

    pub fn residual_distribution(&self) -> [f64; 3] {
        self.residual.unwrap_or([(1.0 - self.fidelity) / 3.0; 3])
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.residual_distribution();
        let total = self.fidelity + r.iter().sum::<f64>();
        if !(0.0..=1.0).contains(&self.fidelity) || r.iter().any(|&x| x < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(vec![format!(
                "preparation probabilities must be in [0,1] and sum to 1 (got {total})"
            )]));
        }
        Ok(())
    }

    /// Initial D-sublevel populations with zero-weight entries dropped.
    pub fn weights(&self) -> Vec<(Level, f64)> {
        let r = self.residual_distribution();
        [
            (Level::D(Mj::M3_2), self.fidelity),
            (Level::D(Mj::M1_2), r[0]),
            (Level::D(Mj::P1_2), r[1]),
            (Level::D(Mj::P3_2), r[2]),
        ]
        .into_iter()
        .filter(|&(_, p)| p > 0.0)
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameters_are_consistent() {
        let p = CavityQEDParams::default();
        p.validate().unwrap();
        assert!((p.excited_lifetime() - 37.7e-9).abs() < 0.1e-9);
        BranchingParams::default().validate().unwrap();
        PreparationParams::default().validate().unwrap();
    }

    #[test]
    fn inconsistent_lifetime_is_rejected() {
        let p = CavityQEDParams {
            lifetime: Some(30e-9),
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn symmetric_mirrors_are_rejected() {
        let p = CavityQEDParams {
            t_lt: 100.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn waveplate_map() {
        let d = |theta| DriveParams {
            amplitude: 1.0,
            detuning: 0.0,
            waveplate_angle: theta,
        };
        let (p, m) = d(5.0).polarization_components();
        assert!((p - 1.0).abs() < 1e-15 && m.abs() < 1e-15);
        let (p, m) = d(50.0).polarization_components();
        assert!(p.abs() < 1e-15 && (m - 1.0).abs() < 1e-15);
        let (p, m) = d(27.5).polarization_components();
        assert!((p * p - m * m).abs() < 1e-15);
    }

    #[test]
    fn calibration_reproduces_input_flux() {
        let kappa = two_pi_mhz(25.0);
        let eta = DriveParams::calibrated_amplitude(3.0e5, kappa, 0.8);
        let d = DriveParams {
            amplitude: eta,
            detuning: 0.0,
            waveplate_angle: 5.0,
        };
        let flux = 2.0 * kappa * d.empty_cavity_photons(kappa);
        assert!((flux / (0.8 * 3.0e5) - 1.0).abs() < 1e-12);
    }
}
