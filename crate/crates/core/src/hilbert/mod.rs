//! Composite ion ⊗ cavity Hilbert space.
//!
//! The space is the tensor product of an atomic factor (an ordered list of
//! [`Level`]s) with two truncated Fock spaces, one for each circularly
//! polarized cavity mode. Flat indices are laid out with the atomic index
//! slowest, then the σ⁺ photon number, then the σ⁻ photon number:
//!
//! ```text
//! index = atom * (n_max + 1)^2 + n_plus * (n_max + 1) + n_minus
//! ```
//!
//! This ordering is part of the serialized-state contract and must not change.

mod operator;
mod state;

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use operator::Operator;
pub use state::{DensityMatrix, StateVector};

/// Magnetic quantum number stored as twice its value, so that half-integers
/// stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mj(pub i8);

impl Mj {
    pub const M3_2: Mj = Mj(-3);
    pub const M1_2: Mj = Mj(-1);
    pub const P1_2: Mj = Mj(1);
    pub const P3_2: Mj = Mj(3);

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }
}

impl fmt::Display for Mj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "+" };
        if self.0 % 2 == 0 {
            write!(f, "{sign}{}", self.0.abs() / 2)
        } else {
            write!(f, "{sign}{}/2", self.0.abs())
        }
    }
}

/// Atomic basis state.
///
/// `D` is a Zeeman sublevel of the metastable ²D₃/₂ manifold, `E` of the
/// ³D[3/2]₁/₂ excited manifold, and `S` the lumped ²S₁/₂ sink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    D(Mj),
    E(Mj),
    S,
}

impl Level {
    pub fn is_excited(self) -> bool {
        matches!(self, Level::E(_))
    }

    pub fn name(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::D(m) => write!(f, "D{m}"),
            Level::E(m) => write!(f, "E{m}"),
            Level::S => write!(f, "S"),
        }
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "S" {
            return Ok(Level::S);
        }
        let (manifold, m) = s.split_at(1.min(s.len()));
        let twice = match m {
            "-3/2" => -3,
            "-1/2" => -1,
            "+1/2" | "1/2" => 1,
            "+3/2" | "3/2" => 3,
            _ => return Err(Error::UnknownLevel(s.to_string())),
        };
        match manifold {
            "D" => Ok(Level::D(Mj(twice))),
            "E" => Ok(Level::E(Mj(twice))),
            _ => Err(Error::UnknownLevel(s.to_string())),
        }
    }
}

impl Serialize for Level {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Circularly polarized cavity mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "sigma_plus")]
    SigmaPlus,
    #[serde(rename = "sigma_minus")]
    SigmaMinus,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::SigmaPlus, Mode::SigmaMinus];

    pub fn other(self) -> Mode {
        match self {
            Mode::SigmaPlus => Mode::SigmaMinus,
            Mode::SigmaMinus => Mode::SigmaPlus,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::SigmaPlus => f.write_str("sigma_plus"),
            Mode::SigmaMinus => f.write_str("sigma_minus"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisLabel {
    pub level: Level,
    pub fock_plus: usize,
    pub fock_minus: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HilbertSpace {
    levels: Vec<Level>,
    n_max: usize,
}

/// Build the composite space for the given atomic levels and Fock cutoff.
pub fn build_space(levels: &[Level], n_max: usize) -> Result<HilbertSpace> {
    HilbertSpace::new(levels.to_vec(), n_max)
}

impl HilbertSpace {
    pub fn new(levels: Vec<Level>, n_max: usize) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("level scheme has no atomic states".into()));
        }
        for (i, l) in levels.iter().enumerate() {
            if levels[..i].contains(l) {
                return Err(Error::Config(format!("duplicate atomic level {l}")));
            }
        }
        Ok(Self { levels, n_max })
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn photon_dim(&self) -> usize {
        self.fock_dim() * self.fock_dim()
    }

    pub fn dim(&self) -> usize {
        self.levels.len() * self.photon_dim()
    }

    pub fn level_index(&self, level: Level) -> Result<usize> {
        self.levels
            .iter()
            .position(|&l| l == level)
            .ok_or_else(|| Error::UnknownLevel(level.to_string()))
    }

    pub fn index(&self, label: BasisLabel) -> Result<usize> {
        if label.fock_plus > self.n_max || label.fock_minus > self.n_max {
            return Err(Error::Config(format!(
                "photon number exceeds truncation n_max = {}",
                self.n_max
            )));
        }
        let a = self.level_index(label.level)?;
        Ok(a * self.photon_dim() + label.fock_plus * self.fock_dim() + label.fock_minus)
    }

    pub fn label(&self, index: usize) -> BasisLabel {
        let pd = self.photon_dim();
        let fd = self.fock_dim();
        let rest = index % pd;
        BasisLabel {
            level: self.levels[index / pd],
            fock_plus: rest / fd,
            fock_minus: rest % fd,
        }
    }

    /// Photon number of `mode` in basis state `index`.
    pub fn photons(&self, index: usize, mode: Mode) -> usize {
        let l = self.label(index);
        match mode {
            Mode::SigmaPlus => l.fock_plus,
            Mode::SigmaMinus => l.fock_minus,
        }
    }

    /// Ladder operator `a` of one cavity mode. The truncated space has no
    /// `a†|n_max⟩` row, so `[a, a†] = 1` only on the block `n < n_max`.
    pub fn annihilation(&self, mode: Mode) -> Operator {
        let mut triplets = Vec::new();
        for col in 0..self.dim() {
            let mut l = self.label(col);
            let n = match mode {
                Mode::SigmaPlus => &mut l.fock_plus,
                Mode::SigmaMinus => &mut l.fock_minus,
            };
            if *n == 0 {
                continue;
            }
            let amp = (*n as f64).sqrt();
            *n -= 1;
            let row = self.index(l).expect("label stays inside the space");
            triplets.push((row, col, Complex64::new(amp, 0.0)));
        }
        Operator::from_triplets(self.dim(), triplets)
    }

    pub fn number(&self, mode: Mode) -> Operator {
        Operator::diagonal(
            (0..self.dim())
                .map(|i| Complex64::new(self.photons(i, mode) as f64, 0.0))
                .collect(),
        )
    }

    /// `|to⟩⟨from|` on the atomic factor, identity on both photon factors.
    pub fn atomic_projector(&self, from: Level, to: Level) -> Result<Operator> {
        let f = self.level_index(from)?;
        let t = self.level_index(to)?;
        let pd = self.photon_dim();
        let one = Complex64::new(1.0, 0.0);
        Ok(Operator::from_triplets(
            self.dim(),
            (0..pd).map(|p| (t * pd + p, f * pd + p, one)),
        ))
    }

    pub fn identity(&self) -> Operator {
        Operator::identity(self.dim())
    }

    /// `|level⟩ ⊗ |n_plus, n_minus⟩`.
    pub fn basis_state(&self, level: Level, n_plus: usize, n_minus: usize) -> Result<StateVector> {
        let idx = self.index(BasisLabel {
            level,
            fock_plus: n_plus,
            fock_minus: n_minus,
        })?;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.dim()];
        amps[idx] = Complex64::new(1.0, 0.0);
        Ok(StateVector::new(amps))
    }

    /// Population of every atomic level, traced over the photon factors.
    pub fn atomic_populations_pure(&self, psi: &[Complex64]) -> Vec<f64> {
        let pd = self.photon_dim();
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        (0..self.levels.len())
            .map(|a| psi[a * pd..(a + 1) * pd].iter().map(|c| c.norm_sqr()).sum::<f64>() / norm)
            .collect()
    }

    pub fn atomic_populations(&self, rho: &DensityMatrix) -> Vec<f64> {
        let pd = self.photon_dim();
        (0..self.levels.len())
            .map(|a| (a * pd..(a + 1) * pd).map(|i| rho.get(i, i).re).sum())
            .collect()
    }

    /// Density matrix `Σ p_l |l⟩⟨l| ⊗ |0,0⟩⟨0,0|`.
    pub fn atomic_mixture(&self, weights: &[(Level, f64)]) -> Result<DensityMatrix> {
        let mut rho = DensityMatrix::zeros(self.dim());
        for &(level, p) in weights {
            let idx = self.index(BasisLabel {
                level,
                fock_plus: 0,
                fock_minus: 0,
            })?;
            rho.set(idx, idx, rho.get(idx, idx) + Complex64::new(p, 0.0));
        }
        Ok(rho)
    }
}
