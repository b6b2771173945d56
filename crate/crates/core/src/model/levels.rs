use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Level, Mj, Mode};

/// Photon polarization of a dipole transition, named from the emitted
/// photon's point of view along the quantization (cavity) axis.
///
/// A decay that lowers the atomic `m` by one emits σ⁺, raising it by one
/// emits σ⁻.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    SigmaPlus,
    SigmaMinus,
    Pi,
}

impl Polarization {
    pub fn of_decay(excited: Mj, lower: Mj) -> Option<Polarization> {
        match lower.0 - excited.0 {
            -2 => Some(Polarization::SigmaPlus),
            2 => Some(Polarization::SigmaMinus),
            0 => Some(Polarization::Pi),
            _ => None,
        }
    }

    /// Cavity mode this polarization couples to. π light has no cavity mode
    /// because the quantization axis lies along the cavity.
    pub fn cavity_mode(self) -> Option<Mode> {
        match self {
            Polarization::SigmaPlus => Some(Mode::SigmaPlus),
            Polarization::SigmaMinus => Some(Mode::SigmaMinus),
            Polarization::Pi => None,
        }
    }
}

/// The seven atomic states of the 935 nm repump system of ¹⁷⁴Yb⁺.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevelScheme {
    pub d_sublevels: Vec<Mj>,
    pub e_sublevels: Vec<Mj>,
    /// Rotating-frame energy shift of every level (rad/s), indexed like
    /// [`LevelScheme::levels`]. All zero unless a sensitivity study sets them.
    pub zeeman_shifts: Vec<f64>,
}

impl Default for LevelScheme {
    fn default() -> Self {
        Self::ytterbium()
    }
}

impl LevelScheme {
    pub const N_STATES: usize = 7;

    pub fn ytterbium() -> Self {
        Self {
            d_sublevels: vec![Mj::M3_2, Mj::M1_2, Mj::P1_2, Mj::P3_2],
            e_sublevels: vec![Mj::M1_2, Mj::P1_2],
            zeeman_shifts: vec![0.0; Self::N_STATES],
        }
    }

    /// Levels in Hilbert-space order: D sublevels, E sublevels, then S.
    pub fn levels(&self) -> Vec<Level> {
        self.d_sublevels
            .iter()
            .map(|&m| Level::D(m))
            .chain(self.e_sublevels.iter().map(|&m| Level::E(m)))
            .chain(std::iter::once(Level::S))
            .collect()
    }

    pub fn d_levels(&self) -> Vec<Level> {
        self.d_sublevels.iter().map(|&m| Level::D(m)).collect()
    }

    pub fn e_levels(&self) -> Vec<Level> {
        self.e_sublevels.iter().map(|&m| Level::E(m)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.levels().len();
        if n != Self::N_STATES {
            return Err(Error::Config(format!(
                "level scheme must have {} states, found {n}",
                Self::N_STATES
            )));
        }
        if self.zeeman_shifts.len() != n {
            return Err(Error::Config(format!(
                "zeeman_shifts has {} entries, expected {n}",
                self.zeeman_shifts.len()
            )));
        }
        Ok(())
    }

    pub fn zeeman_shift(&self, level: Level) -> f64 {
        self.levels()
            .iter()
            .position(|&l| l == level)
            .map_or(0.0, |i| self.zeeman_shifts[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub excited: Mj,
    pub lower: Mj,
    pub polarization: Polarization,
    /// Clebsch-Gordan amplitude, normalized so the squares over one excited
    /// sublevel's decays into the D manifold sum to one.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransitionTable {
    pub entries: Vec<Transition>,
}

impl Default for TransitionTable {
    fn default() -> Self {
        Self::j_half_to_three_halves()
    }
}

impl TransitionTable {
    /// Standard J′ = 1/2 → J = 3/2 dipole amplitudes.
    ///
    /// Relative decay strengths from each excited sublevel are 1/2 (stretched
    /// σ), 1/3 (π) and 1/6 (weak σ). All signs are taken positive: no two
    /// listed transitions share a final state and photon mode, so no
    /// observable depends on the relative phase.
    pub fn j_half_to_three_halves() -> Self {
        let strong = 0.5f64.sqrt();
        let pi = (1.0f64 / 3.0).sqrt();
        let weak = (1.0f64 / 6.0).sqrt();
        let t = |excited, lower, polarization, amplitude| Transition {
            excited,
            lower,
            polarization,
            amplitude,
        };
        use Polarization::*;
        Self {
            entries: vec![
                t(Mj::M1_2, Mj::M3_2, SigmaPlus, strong),
                t(Mj::M1_2, Mj::M1_2, Pi, pi),
                t(Mj::M1_2, Mj::P1_2, SigmaMinus, weak),
                t(Mj::P1_2, Mj::P3_2, SigmaMinus, strong),
                t(Mj::P1_2, Mj::P1_2, Pi, pi),
                t(Mj::P1_2, Mj::M1_2, SigmaPlus, weak),
            ],
        }
    }

    pub fn from_excited(&self, excited: Mj) -> impl Iterator<Item = &Transition> {
        self.entries.iter().filter(move |t| t.excited == excited)
    }

    pub fn find(&self, excited: Mj, lower: Mj) -> Option<&Transition> {
        self.entries.iter().find(|t| t.excited == excited && t.lower == lower)
    }

    /// Largest |amplitude| among cavity-coupled (σ) transitions; the coupling
    /// `g_bar` refers to this transition.
    pub fn strongest_cavity_amplitude(&self) -> f64 {
        self.entries
            .iter()
            .filter(|t| t.polarization != Polarization::Pi)
            .map(|t| t.amplitude.abs())
            .fold(0.0, f64::max)
    }

    /// Amplitudes of the photon state emitted into the cavity from one excited
    /// sublevel, renormalized over the σ⁺/σ⁻ transitions: `(σ⁺, σ⁻)`.
    pub fn cavity_amplitudes(&self, excited: Mj) -> (f64, f64) {
        let mut plus = 0.0;
        let mut minus = 0.0;
        for t in self.from_excited(excited) {
            match t.polarization {
                Polarization::SigmaPlus => plus = t.amplitude,
                Polarization::SigmaMinus => minus = t.amplitude,
                Polarization::Pi => {}
            }
        }
        let n = (plus * plus + minus * minus).sqrt();
        if n == 0.0 {
            (0.0, 0.0)
        } else {
            (plus / n, minus / n)
        }
    }

    pub fn validate(&self, scheme: &LevelScheme) -> Result<()> {
        let mut problems = Vec::new();
        for t in &self.entries {
            if !scheme.e_sublevels.contains(&t.excited) || !scheme.d_sublevels.contains(&t.lower) {
                problems.push(format!("transition E{} -> D{} outside level scheme", t.excited, t.lower));
            }
            if Polarization::of_decay(t.excited, t.lower) != Some(t.polarization) {
                problems.push(format!(
                    "transition E{} -> D{} cannot carry {:?}",
                    t.excited, t.lower, t.polarization
                ));
            }
        }
        for &e in &scheme.e_sublevels {
            let sum: f64 = self.from_excited(e).map(|t| t.amplitude * t.amplitude).sum();
            if sum == 0.0 {
                problems.push(format!("missing transition amplitudes for E{e}"));
            } else if (sum - 1.0).abs() > 1e-12 {
                problems.push(format!("amplitudes from E{e} square-sum to {sum}, not 1"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_has_seven_states() {
        let s = LevelScheme::ytterbium();
        assert_eq!(s.levels().len(), 7);
        s.validate().unwrap();
    }

    #[test]
    fn table_rows_are_normalized() {
        let t = TransitionTable::default();
        t.validate(&LevelScheme::default()).unwrap();
    }

    #[test]
    fn emitted_photon_amplitudes() {
        let t = TransitionTable::default();
        let (p, m) = t.cavity_amplitudes(Mj::M1_2);
        assert!((p - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((m - 0.5).abs() < 1e-15);
        let (p, m) = t.cavity_amplitudes(Mj::P1_2);
        assert!((p - 0.5).abs() < 1e-15);
        assert!((m - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn polarization_follows_delta_m() {
        assert_eq!(Polarization::of_decay(Mj::M1_2, Mj::M3_2), Some(Polarization::SigmaPlus));
        assert_eq!(Polarization::of_decay(Mj::M1_2, Mj::P1_2), Some(Polarization::SigmaMinus));
        assert_eq!(Polarization::of_decay(Mj::M1_2, Mj::P3_2), None);
    }

    #[test]
    fn missing_amplitudes_are_reported() {
        let mut t = TransitionTable::default();
        t.entries.retain(|x| x.excited != Mj::P1_2);
        assert!(t.validate(&LevelScheme::default()).is_err());
    }
}
