use num_complex::Complex64;

use super::dopri::{Rhs, Stepper};
use super::SolverOptions;
use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;
use crate::model::LindbladModel;

type C = Complex64;

const MINUS_I: C = C::new(0.0, -1.0);

/// Lindblad right-hand side on a row-major density matrix.
///
/// Uses `dρ/dt = X + X† + Σ r L ρ L†` with `X = -i H_eff ρ`, which is the
/// usual form once `ρ` is Hermitian and keeps the derivative exactly
/// Hermitian.
pub struct MasterRhs<'a> {
    model: &'a LindbladModel,
    segment_mid: f64,
    x: Vec<C>,
}

pub fn master_rhs(model: &LindbladModel) -> MasterRhs<'_> {
    MasterRhs {
        model,
        segment_mid: 0.0,
        x: vec![C::new(0.0, 0.0); model.dim() * model.dim()],
    }
}

impl MasterRhs<'_> {
    /// Midpoint of the segment being integrated; fixes the value of window
    /// profiles on it.
    pub fn set_segment(&mut self, start: f64, end: f64) {
        self.segment_mid = 0.5 * (start + end);
    }
}

impl Rhs for MasterRhs<'_> {
    fn eval(&mut self, t: f64, rho: &[C], out: &mut [C]) {
        let n = self.model.dim();
        self.x.iter_mut().for_each(|v| *v = C::new(0.0, 0.0));
        self.model.h_eff_static().left_mul_add(MINUS_I, rho, &mut self.x);
        for term in self.model.terms() {
            let f = term.profile.value_on(t, self.segment_mid);
            if f != 0.0 {
                term.op.left_mul_add(MINUS_I * f, rho, &mut self.x);
            }
        }
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] = self.x[r * n + c] + self.x[c * n + r].conj();
            }
        }
        for &(j, rate) in self.model.grouped_jumps() {
            self.model.jump_op(j).sandwich_add(rate, rho, out);
        }
    }
}

/// Times strictly inside `(t0, t1)` where the model's Hamiltonian is
/// discontinuous, followed by `t1`.
pub(crate) fn segment_ends(model: &LindbladModel, t0: f64, t1: f64) -> Vec<f64> {
    let mut ends: Vec<f64> = model.breakpoints().into_iter().filter(|&b| b > t0 && b < t1).collect();
    ends.push(t1);
    ends
}

/// Integrate the master equation from `rho0` at `t_grid[0]` and return the
/// state at every grid time (the first entry is `rho0` itself).
pub fn evolve_master(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    options: &SolverOptions,
) -> Result<Vec<DensityMatrix>> {
    options.validate()?;
    if rho0.dim() != model.dim() {
        return Err(Error::Config(format!(
            "initial state has dimension {}, model has {}",
            rho0.dim(),
            model.dim()
        )));
    }
    rho0.validate()?;
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("t_grid must be non-empty and strictly increasing".into()));
    }
    let n = model.dim();
    let t0 = t_grid[0];
    let t1 = *t_grid.last().unwrap();
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(rho0.clone());
    if t_grid.len() == 1 {
        return Ok(out);
    }
    let mut rhs = master_rhs(model);
    let mut stepper = Stepper::new(
        t0,
        rho0.as_slice().to_vec(),
        options.rel_tol,
        options.abs_tol,
        options.step_bound(model.max_step_hint()),
    );
    let mut buf = vec![C::new(0.0, 0.0); n * n];
    let mut next = 1;
    let mut seg_start = t0;
    for seg_end in segment_ends(model, t0, t1) {
        rhs.set_segment(seg_start, seg_end);
        stepper.invalidate();
        while stepper.t() < seg_end {
            stepper.step(&mut rhs, seg_end)?;
            while next < t_grid.len() && t_grid[next] <= stepper.t() {
                if t_grid[next] == stepper.t() {
                    buf.copy_from_slice(stepper.y());
                } else {
                    stepper.dense(t_grid[next], &mut buf);
                }
                out.push(DensityMatrix::from_row_major(n, buf.clone()));
                next += 1;
            }
        }
        seg_start = seg_end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{HilbertSpace, Level, Mj, Mode};
    use crate::model::{ChannelTag, CollapseChannel};

    fn two_level(g: f64, gamma: f64) -> LindbladModel {
        let e = Level::E(Mj::M1_2);
        let d = Level::D(Mj::M3_2);
        let space = HilbertSpace::new(vec![d, e], 1).unwrap();
        let lower = space.atomic_projector(e, d).unwrap();
        let a = space.annihilation(Mode::SigmaPlus);
        let coupling = &a.adjoint() * &lower;
        let h = &(&coupling + &coupling.adjoint()) * g;
        let ops = vec![lower];
        let channels = vec![CollapseChannel {
            tag: ChannelTag::SpontToD(Mj::M3_2),
            rate: 2.0 * gamma,
            jump: 0,
        }];
        LindbladModel::new(space, h, ops, channels).unwrap()
    }

    #[test]
    fn vacuum_rabi_and_trace() {
        let g = 1.0e7;
        let m = two_level(g, 0.0);
        let psi = m.space().basis_state(Level::E(Mj::M1_2), 0, 0).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi);
        let grid: Vec<f64> = (0..200).map(|i| i as f64 * 2e-9).collect();
        let states = evolve_master(&m, &rho0, &grid, &SolverOptions::default()).unwrap();
        for (t, rho) in grid.iter().zip(&states) {
            let pe = m.space().atomic_populations(rho)[1];
            assert!((pe - (g * t).cos().powi(2)).abs() < 1e-6, "t={t} pe={pe}");
            assert!((rho.trace() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn pure_decay() {
        let gamma = 1.3e7;
        let m = two_level(0.0, gamma);
        let psi = m.space().basis_state(Level::E(Mj::M1_2), 0, 0).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi);
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 5e-9).collect();
        let states = evolve_master(&m, &rho0, &grid, &SolverOptions { rel_tol: 1e-10, abs_tol: 1e-12, ..Default::default() }).unwrap();
        for (t, rho) in grid.iter().zip(&states) {
            let pe = m.space().atomic_populations(rho)[1];
            assert!((pe - (-2.0 * gamma * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_grid() {
        let m = two_level(1.0, 1.0);
        let rho0 = DensityMatrix::from_pure(&m.space().basis_state(Level::E(Mj::M1_2), 0, 0).unwrap());
        assert!(evolve_master(&m, &rho0, &[0.0, 0.0], &SolverOptions::default()).is_err());
    }
}
