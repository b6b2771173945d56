use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, Level};
use crate::model::{
    build_absorption_model, BranchingParams, CavityQEDParams, DriveParams, LevelScheme, LindbladModel,
    MicromotionParams, PreparationParams, TransitionTable,
};
use crate::solver::{evolve_master, SolverOptions};

/// Weak coherent probe of the cavity with the ion prepared in the D manifold.
#[derive(Debug, Clone)]
pub struct AbsorptionSetup {
    pub params: CavityQEDParams,
    pub branching: BranchingParams,
    pub scheme: LevelScheme,
    pub table: TransitionTable,
    pub micromotion: MicromotionParams,
    pub preparation: PreparationParams,
    /// Probe detuning from resonance, rad/s.
    pub detuning: f64,
    pub probe_duration: f64,
    /// Photons impinging on the cavity during the probe.
    pub photons_in: f64,
    /// Fraction of impinging photons coupled into the cavity mode.
    pub eta_in: f64,
    pub n_max: usize,
    /// Time allowed for the cavity field and excited state to reach their
    /// quasi-steady state before rates are read off.
    pub settle_time: f64,
    /// Interval over which population changes are measured.
    pub sample_time: f64,
}

impl Default for AbsorptionSetup {
    fn default() -> Self {
        Self {
            params: CavityQEDParams::default(),
            branching: BranchingParams::default(),
            scheme: LevelScheme::default(),
            table: TransitionTable::default(),
            micromotion: MicromotionParams::default(),
            preparation: PreparationParams::default(),
            detuning: 0.0,
            probe_duration: 170e-6,
            photons_in: 1.0,
            eta_in: 0.8,
            n_max: 1,
            settle_time: 0.5e-6,
            sample_time: 0.5e-6,
        }
    }
}

impl AbsorptionSetup {
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        if !(self.probe_duration > 0.0) {
            p.push("probe_duration must be > 0".to_string());
        }
        if !(self.photons_in > 0.0) {
            p.push("photons_in must be > 0".to_string());
        }
        if !(self.eta_in > 0.0 && self.eta_in <= 1.0) {
            p.push("eta_in must be in (0, 1]".to_string());
        }
        if !(self.settle_time > 0.0) || !(self.sample_time > 0.0) {
            p.push("settle_time and sample_time must be > 0".to_string());
        }
        if p.is_empty() {
            self.preparation.validate()
        } else {
            Err(Error::Validation(p))
        }
    }

    /// Drive strength η giving `photons_in` impinging photons over the probe.
    pub fn drive_amplitude(&self) -> f64 {
        DriveParams::calibrated_amplitude(self.photons_in / self.probe_duration, self.params.kappa, self.eta_in)
    }

    pub fn drive(&self, theta: f64) -> DriveParams {
        DriveParams {
            amplitude: self.drive_amplitude(),
            detuning: self.detuning,
            waveplate_angle: theta,
        }
    }

    pub fn model(&self, theta: f64) -> Result<LindbladModel> {
        build_absorption_model(
            &self.params,
            &self.branching,
            &self.scheme,
            &self.table,
            &self.drive(theta),
            &self.micromotion,
            self.n_max,
        )
    }

    /// Round up to whole RF periods so micromotion averages out.
    fn whole_periods(&self, t: f64) -> f64 {
        if self.micromotion.is_active() {
            let p = self.micromotion.period();
            (t / p).ceil().max(1.0) * p
        } else {
            t
        }
    }

    fn warnings(&self, model: &LindbladModel) -> Vec<String> {
        let mut w = model.warnings().to_vec();
        let n = self.drive(0.0).empty_cavity_photons(self.params.kappa);
        if n > 0.1 {
            w.push(format!("empty-cavity photon number {n:.3} is outside the weak-drive regime (< 0.1)"));
        }
        w
    }
}

/// Slow dynamics among the D sublevels and the S sink under the probe.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    /// D sublevels followed by S.
    pub levels: Vec<Level>,
    /// `dp/dt = rates · p` (1/s).
    pub rates: DMatrix<f64>,
    pub warnings: Vec<String>,
}

impl RateMatrix {
    pub fn propagate(&self, p0: &[f64], t: f64) -> Vec<f64> {
        let p = (&self.rates * t).exp() * nalgebra::DVector::from_column_slice(p0);
        p.iter().copied().collect()
    }

    /// Initial populations from an optical-pumping result.
    pub fn initial(&self, prep: &PreparationParams) -> Vec<f64> {
        let w = prep.weights();
        self.levels
            .iter()
            .map(|l| w.iter().find(|(x, _)| x == l).map_or(0.0, |(_, p)| *p))
            .collect()
    }

    pub fn sink_index(&self) -> usize {
        self.levels.len() - 1
    }
}

fn slow_populations(levels: &[Level], model: &LindbladModel, rho: &DensityMatrix) -> Result<Vec<f64>> {
    let pops = model.space().atomic_populations(rho);
    levels.iter().map(|&l| Ok(pops[model.space().level_index(l)?])).collect()
}

/// Transfer rates between the slow states, read off the master equation.
///
/// Each D sublevel is evolved with the cavity in vacuum; after the settle
/// time the populations change linearly, and the rate matrix follows from
/// `ΔV = M V̄ Δt` with `V̄` the mean D populations over the interval.
pub fn rate_matrix(setup: &AbsorptionSetup, theta: f64, options: &SolverOptions) -> Result<RateMatrix> {
    setup.validate()?;
    let model = setup.model(theta)?;
    let mut levels = setup.scheme.d_levels();
    levels.push(Level::S);
    let nd = levels.len() - 1;
    let t1 = setup.whole_periods(setup.settle_time);
    let t2 = t1 + setup.whole_periods(setup.sample_time);
    let grid = [0.0, t1, t2];
    let runs: Vec<(Vec<f64>, Vec<f64>)> = levels[..nd]
        .par_iter()
        .map(|&d| {
            let rho0 = model.space().atomic_mixture(&[(d, 1.0)])?;
            let out = evolve_master(&model, &rho0, &grid, options)?;
            Ok((slow_populations(&levels, &model, &out[1])?, slow_populations(&levels, &model, &out[2])?))
        })
        .collect::<Result<_>>()?;
    let dt = t2 - t1;
    let delta = DMatrix::from_fn(nd + 1, nd, |r, c| runs[c].1[r] - runs[c].0[r]);
    let mean_d = DMatrix::from_fn(nd, nd, |r, c| 0.5 * (runs[c].1[r] + runs[c].0[r]));
    let inv = mean_d
        .try_inverse()
        .ok_or_else(|| Error::Fit("D-manifold populations are singular; cannot extract rates".into()))?;
    let m_d = delta * inv / dt;
    let mut rates = DMatrix::zeros(nd + 1, nd + 1);
    rates.view_mut((0, 0), (nd + 1, nd)).copy_from(&m_d);
    Ok(RateMatrix {
        levels,
        rates,
        warnings: setup.warnings(&model),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionPoint {
    pub theta: f64,
    /// Probability that one impinging photon transfers the ion to S.
    pub p_abs: f64,
    /// S population at the end of the probe.
    pub p_sink: f64,
    pub warnings: Vec<String>,
}

/// Absorption per photon over a waveplate-angle sweep: S population gained
/// during the probe divided by the number of impinging photons.
pub fn absorb_per_photon(setup: &AbsorptionSetup, thetas: &[f64], options: &SolverOptions) -> Result<Vec<AbsorptionPoint>> {
    thetas
        .par_iter()
        .map(|&theta| {
            let m = rate_matrix(setup, theta, options)?;
            let p = m.propagate(&m.initial(&setup.preparation), setup.probe_duration);
            let p_sink = p[m.sink_index()];
            Ok(AbsorptionPoint {
                theta,
                p_abs: p_sink / setup.photons_in,
                p_sink,
                warnings: m.warnings,
            })
        })
        .collect()
}

/// S population after `duration` of probing by direct master-equation
/// integration from the prepared mixture (for cross-checks on short probes).
pub fn absorption_direct(setup: &AbsorptionSetup, theta: f64, duration: f64, options: &SolverOptions) -> Result<f64> {
    setup.validate()?;
    let model = setup.model(theta)?;
    let rho0 = model.space().atomic_mixture(&setup.preparation.weights())?;
    let out = evolve_master(&model, &rho0, &[0.0, duration], options)?;
    let pops = model.space().atomic_populations(&out[1]);
    Ok(pops[model.space().level_index(Level::S)?])
}
