//! Time evolution of [`LindbladModel`]s: deterministic master-equation
//! integration and the Monte-Carlo wave-function unraveling.

mod dopri;
mod master;
mod stationary;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::Level;
use crate::model::ChannelTag;

pub use dopri::{Rhs, Stepper};
pub use master::{evolve_master, master_rhs, MasterRhs};
pub use stationary::stationary_state;
pub use trajectory::{
    run_trajectories, run_trajectories_from, run_trajectories_sampled, InitialState, PopulationSamples,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step size in seconds; 0 means unbounded (the
    /// model's own bound, e.g. from micromotion, still applies).
    pub max_step: f64,
    pub n_trajectories: usize,
    pub base_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 0.0,
            n_trajectories: 1000,
            base_seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::Config("solver tolerances must be > 0".into()));
        }
        if self.max_step < 0.0 {
            return Err(Error::Config("max_step must be >= 0".into()));
        }
        Ok(())
    }

    /// Effective step bound combining the user's choice with a model bound.
    pub(crate) fn step_bound(&self, model_bound: Option<f64>) -> f64 {
        let user = if self.max_step > 0.0 { self.max_step } else { f64::INFINITY };
        model_bound.map_or(user, |m| m.min(user))
    }
}

/// One quantum trajectory, reduced to what photodetection can see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub jumps: Vec<(f64, ChannelTag)>,
    pub final_atom_state: Level,
    pub t_end: f64,
}

impl TrajectoryRecord {
    pub fn count(&self, pred: impl Fn(ChannelTag) -> bool) -> usize {
        self.jumps.iter().filter(|j| pred(j.1)).count()
    }
}

/// SplitMix64 finalizer, used to decorrelate per-trajectory seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` in a run with `base_seed`.
pub fn trajectory_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base_seed).wrapping_add(index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..1000).map(|i| trajectory_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), a.len());
        assert_eq!(trajectory_seed(7, 3), a[3]);
        assert_ne!(trajectory_seed(8, 3), a[3]);
    }
}
