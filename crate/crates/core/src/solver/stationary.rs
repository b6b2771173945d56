use num_complex::Complex64;

use super::dopri::{Rhs, Stepper};
use super::master::master_rhs;
use super::SolverOptions;
use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;
use crate::model::LindbladModel;

const MAX_CHUNKS: usize = 10_000;

/// Long-time limit of the master equation reached from `rho_init`.
///
/// Models with an absorbing sink have many stationary states, so the result
/// depends on the starting point; for a unique steady state any valid
/// `rho_init` works. Convergence is declared when `‖dρ/dt‖_max` drops below
/// `abs_tol` times the largest rate of the model (the natural scale of the
/// generator), checked after every stretch of one slowest-rate time.
pub fn stationary_state(
    model: &LindbladModel,
    rho_init: &DensityMatrix,
    options: &SolverOptions,
) -> Result<DensityMatrix> {
    options.validate()?;
    if model.is_time_dependent() {
        return Err(Error::Config("stationary state needs a time-independent model".into()));
    }
    if rho_init.dim() != model.dim() {
        return Err(Error::Config("initial state dimension does not match the model".into()));
    }
    rho_init.validate()?;
    let rates: Vec<f64> = model.grouped_jumps().iter().map(|g| g.1).collect();
    let max_rate = rates.iter().copied().fold(0.0, f64::max);
    let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max_rate > 0.0) {
        return Err(Error::Config("stationary state needs at least one damping channel".into()));
    }
    let scale = max_rate.max(model.hamiltonian().max_abs());
    let chunk = 1.0 / min_rate;
    let n = model.dim();
    let mut rhs = master_rhs(model);
    let mut stepper = Stepper::new(
        0.0,
        rho_init.as_slice().to_vec(),
        options.rel_tol,
        options.abs_tol,
        // near the fixed point the error control alone lets the step drift to
        // the edge of the stability region, so bound it by the generator norm
        options.step_bound(Some(1.0 / model.h_eff_static().norm_inf())),
    );
    let mut deriv = vec![Complex64::new(0.0, 0.0); n * n];
    let mut residual = f64::INFINITY;
    for i in 0..MAX_CHUNKS {
        rhs.eval(stepper.t(), stepper.y(), &mut deriv);
        residual = deriv.iter().map(|c| c.norm()).fold(0.0, f64::max) / scale;
        if residual < options.abs_tol {
            return Ok(DensityMatrix::from_row_major(n, stepper.y().to_vec()));
        }
        let t_stop = (i + 1) as f64 * chunk;
        while stepper.t() < t_stop {
            stepper.step(&mut rhs, t_stop)?;
        }
    }
    Err(Error::NoConvergence(format!(
        "stationary state residual {residual:e} after {MAX_CHUNKS} relaxation times"
    )))
}
