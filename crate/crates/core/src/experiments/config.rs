use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::budget::BudgetInputs;
use crate::error::{Error, Result};
use crate::model::{BranchingParams, CavityQEDParams, LevelScheme, MicromotionParams, PreparationParams, TransitionTable};
use crate::observables::{DetectionModel, ReadoutModel};
use crate::solver::SolverOptions;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EmitHistogram,
    G2,
    SpinPhoton,
    AbsorptionSweep,
    SaturationCurve,
    BudgetReport,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::EmitHistogram,
        ExperimentKind::G2,
        ExperimentKind::SpinPhoton,
        ExperimentKind::AbsorptionSweep,
        ExperimentKind::SaturationCurve,
        ExperimentKind::BudgetReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::EmitHistogram => "emit_histogram",
            ExperimentKind::G2 => "g2",
            ExperimentKind::SpinPhoton => "spin_photon",
            ExperimentKind::AbsorptionSweep => "absorption_sweep",
            ExperimentKind::SaturationCurve => "saturation_curve",
            ExperimentKind::BudgetReport => "budget_report",
        }
    }

    pub fn uses_trajectories(self) -> bool {
        matches!(self, ExperimentKind::EmitHistogram | ExperimentKind::G2 | ExperimentKind::SpinPhoton)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// How each emission cycle starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Excitation {
    /// The ion starts in E(−1/2) with the cavity empty; preparation errors
    /// are ignored.
    Instant,
    /// The prepared D mixture is driven by a square π pulse.
    #[default]
    Pulse,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub cavity: CavityQEDParams,
    pub branching: BranchingParams,
    pub micromotion: MicromotionParams,
    pub scheme: LevelScheme,
    pub table: TransitionTable,
    pub preparation: PreparationParams,
    /// Fock cutoff per mode; defaults to 1 for emission and 2 for absorption.
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Protocol {
    pub excitation: Excitation,
    pub pulse_duration: f64,
    pub cycle_period: f64,
    /// Length of each simulated emission cycle.
    pub record_time: f64,
    pub bin_width: f64,
    pub fit_start: f64,
    pub g2_window_start: f64,
    pub g2_window_length: f64,
    /// Largest cycle delay in the coincidence histogram.
    pub g2_max_delay: usize,
    pub spin_window_start: f64,
    pub spin_window_length: f64,
    pub probe_duration: f64,
    pub probe_detuning: f64,
    pub photons_in: f64,
    pub eta_in: f64,
    pub waveplate_angles: Vec<f64>,
    pub saturation_angle: f64,
    pub photon_numbers: Vec<f64>,
    pub saturation_shots: u64,
    /// Absorption per photon used to synthesize saturation data; computed
    /// from the model at `saturation_angle` when absent.
    pub saturation_p_abs: Option<f64>,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            excitation: Excitation::Pulse,
            pulse_duration: 2.7e-9,
            cycle_period: 4e-6,
            record_time: 400e-9,
            bin_width: 1e-9,
            fit_start: 25e-9,
            g2_window_start: 20e-9,
            g2_window_length: 130e-9,
            g2_max_delay: 5,
            spin_window_start: 20e-9,
            spin_window_length: 130e-9,
            probe_duration: 170e-6,
            probe_detuning: 0.0,
            photons_in: 1.0,
            eta_in: 0.8,
            waveplate_angles: (0..28).map(|i| 5.0 + 5.0 * i as f64).collect(),
            saturation_angle: 5.0,
            photon_numbers: vec![30.0, 40.0, 50.0, 60.0, 70.0, 80.0],
            saturation_shots: 2000,
            saturation_p_abs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            rel_tol: o.rel_tol,
            abs_tol: o.abs_tol,
            max_step: o.max_step,
        }
    }
}

fn default_trajectories() -> usize {
    10_000
}

/// One experiment run, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// May be left out when the experiment is chosen on the command line.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    pub base_seed: u64,
    #[serde(default = "default_trajectories")]
    pub n_trajectories: usize,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub detection: DetectionModel,
    #[serde(default)]
    pub readout: ReadoutModel,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub solver: Tolerances,
    #[serde(default)]
    pub budget: BudgetInputs,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Free-form provenance notes keyed by field path; not interpreted.
    #[serde(default)]
    pub citations: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Config with every block at its default.
    pub fn new(experiment: ExperimentKind, base_seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: Some(experiment),
            base_seed,
            n_trajectories: default_trajectories(),
            physics: PhysicsConfig::default(),
            detection: DetectionModel::default(),
            readout: ReadoutModel::default(),
            protocol: Protocol::default(),
            solver: Tolerances::default(),
            budget: BudgetInputs::default(),
            output_dir: None,
            citations: BTreeMap::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "config schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.experiment
            .ok_or_else(|| Error::Validation(vec!["experiment is not set".into()]))
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            rel_tol: self.solver.rel_tol,
            abs_tol: self.solver.abs_tol,
            max_step: self.solver.max_step,
            n_trajectories: self.n_trajectories,
            base_seed: self.base_seed,
        }
    }

    pub fn emission_n_max(&self) -> usize {
        self.physics.n_max.unwrap_or(1)
    }

    pub fn absorption_n_max(&self) -> usize {
        self.physics.n_max.unwrap_or(2)
    }

    /// Check every field and report all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        let mut sub = |r: Result<()>| match r {
            Ok(()) => {}
            Err(Error::Validation(v)) => p.extend(v),
            Err(e) => p.push(e.to_string()),
        };
        sub(self.physics.cavity.validate());
        sub(self.physics.branching.validate());
        sub(self.physics.scheme.validate());
        sub(self.physics.table.validate(&self.physics.scheme));
        sub(self.physics.preparation.validate());
        sub(self.detection.validate());
        sub(self.readout.validate());
        sub(self.solver_options().validate());
        let kind = match self.experiment {
            Some(k) => k,
            None => {
                p.push("experiment is not set".into());
                return Err(Error::Validation(p));
            }
        };
        let pr = &self.protocol;
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0) || !v.is_finite() {
                p.push(format!("protocol.{name} must be > 0 (got {v})"));
            }
        };
        positive("pulse_duration", pr.pulse_duration);
        positive("cycle_period", pr.cycle_period);
        positive("record_time", pr.record_time);
        positive("bin_width", pr.bin_width);
        positive("g2_window_length", pr.g2_window_length);
        positive("spin_window_length", pr.spin_window_length);
        positive("probe_duration", pr.probe_duration);
        positive("photons_in", pr.photons_in);
        positive("eta_in", pr.eta_in);
        for (name, v) in [
            ("fit_start", pr.fit_start),
            ("g2_window_start", pr.g2_window_start),
            ("spin_window_start", pr.spin_window_start),
        ] {
            if !(v >= 0.0) {
                p.push(format!("protocol.{name} must be >= 0 (got {v})"));
            }
        }
        if pr.eta_in > 1.0 {
            p.push(format!("protocol.eta_in must be <= 1 (got {})", pr.eta_in));
        }
        if pr.record_time > pr.cycle_period {
            p.push("protocol.record_time must not exceed cycle_period".into());
        }
        if pr.fit_start >= pr.record_time {
            p.push("protocol.fit_start must lie inside the record".into());
        }
        if pr.g2_window_start + pr.g2_window_length > pr.record_time {
            p.push("protocol g2 window must lie inside the recorded part of the cycle".into());
        }
        if pr.spin_window_start + pr.spin_window_length > pr.record_time {
            p.push("protocol spin window must lie inside the recorded part of the cycle".into());
        }
        if kind.uses_trajectories() && self.n_trajectories == 0 {
            p.push("n_trajectories must be > 0".into());
        }
        if kind == ExperimentKind::G2 && pr.g2_max_delay == 0 {
            p.push("protocol.g2_max_delay must be >= 1".into());
        }
        if kind == ExperimentKind::AbsorptionSweep && pr.waveplate_angles.is_empty() {
            p.push("protocol.waveplate_angles must not be empty".into());
        }
        if kind == ExperimentKind::SaturationCurve {
            if pr.photon_numbers.len() < 3 || pr.photon_numbers.iter().any(|&n| !(n >= 0.0)) {
                p.push("protocol.photon_numbers needs at least 3 values >= 0".into());
            }
            if pr.saturation_shots == 0 {
                p.push("protocol.saturation_shots must be > 0".into());
            }
            if let Some(x) = pr.saturation_p_abs {
                if !(0.0..=1.0).contains(&x) {
                    p.push(format!("protocol.saturation_p_abs must be in [0, 1] (got {x})"));
                }
            }
        }
        if self.physics.n_max == Some(0) {
            p.push("physics.n_max must be >= 1".into());
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(p))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_json(r#"{"schema_version": 1, "experiment": "g2", "base_seed": 4}"#).unwrap();
        assert_eq!(c.kind().unwrap(), ExperimentKind::G2);
        assert_eq!(c.protocol.cycle_period, 4e-6);
        c.validate().unwrap();
    }

    #[test]
    fn seed_is_required() {
        assert!(ExperimentConfig::from_json(r#"{"schema_version": 1}"#).is_err());
    }

    #[test]
    fn wrong_schema_version() {
        let e = ExperimentConfig::from_json(r#"{"schema_version": 7, "base_seed": 1}"#).unwrap_err();
        assert!(matches!(e, Error::Schema(_)));
    }

    #[test]
    fn rates_accept_shorthand() {
        let c = ExperimentConfig::from_json(
            r#"{"schema_version": 1, "base_seed": 1, "physics": {"cavity": {"g_bar": "2pi*2MHz"}}}"#,
        )
        .unwrap();
        assert!((c.physics.cavity.g_bar - crate::units::two_pi_mhz(2.0)).abs() < 1e-6);
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut c = ExperimentConfig::new(ExperimentKind::EmitHistogram, 1);
        c.n_trajectories = 0;
        c.protocol.bin_width = -1.0;
        c.detection.eta_det = 2.0;
        let Err(Error::Validation(v)) = c.validate() else { panic!() };
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
    }
}
