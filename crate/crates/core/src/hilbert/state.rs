use nalgebra::DMatrix;
use num_complex::Complex64;

use super::Operator;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amps: Vec<Complex64>) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Config("cannot normalize a zero state".into()));
        }
        for a in &mut self.amps {
            *a /= n;
        }
        Ok(self)
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-10
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &[Complex64]) -> Complex64 {
        self.amps.iter().zip(other).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn expectation(&self, op: &Operator) -> Complex64 {
        op.expectation_pure(&self.amps)
    }

    /// Superposition `Σ c_k |ψ_k⟩` (not normalized).
    pub fn superpose(terms: &[(Complex64, &StateVector)]) -> Self {
        let dim = terms.first().map_or(0, |t| t.1.dim());
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        for (c, s) in terms {
            for (a, b) in amps.iter_mut().zip(&s.amps) {
                *a += c * b;
            }
        }
        Self { amps }
    }
}

/// Dense density matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub const TRACE_TOL: f64 = 1e-8;
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const POSITIVITY_TOL: f64 = -1e-8;

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let a = psi.amplitudes();
        let dim = a.len();
        let mut data = Vec::with_capacity(dim * dim);
        for x in a {
            for y in a {
                data.push(x * y.conj());
            }
        }
        Self { dim, data }
    }

    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    pub fn normalize(&mut self) {
        let t = self.trace();
        for x in &mut self.data {
            *x /= t;
        }
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_dense();
        // symmetrize first so tiny anti-Hermitian noise cannot upset the solver
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Check the trace, Hermiticity and positivity tolerances.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if (self.trace() - 1.0).abs() > Self::TRACE_TOL {
            problems.push(format!("trace {} differs from 1", self.trace()));
        }
        let herm = self.hermiticity_error();
        if herm > Self::HERMITIAN_TOL {
            problems.push(format!("not Hermitian (error {herm:e})"));
        }
        let min_ev = self.min_eigenvalue();
        if min_ev < Self::POSITIVITY_TOL {
            problems.push(format!("negative eigenvalue {min_ev:e}"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn expectation(&self, op: &Operator) -> Complex64 {
        // tr(A ρ) = Σ A_rc ρ_cr
        op.iter().map(|(r, c, v)| v * self.get(c, r)).sum()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_state_is_valid_density_matrix() {
        let psi = StateVector::new(vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)])
            .normalized()
            .unwrap();
        assert!(psi.is_normalized());
        let rho = DensityMatrix::from_pure(&psi);
        rho.validate().unwrap();
        assert!((rho.get(0, 1) - Complex64::new(0.0, -0.48)).norm() < 1e-15);
    }

    #[test]
    fn negative_population_is_flagged() {
        let mut rho = DensityMatrix::zeros(2);
        rho.set(0, 0, Complex64::new(1.1, 0.0));
        rho.set(1, 1, Complex64::new(-0.1, 0.0));
        assert!(rho.validate().is_err());
    }

    #[test]
    fn zero_state_cannot_normalize() {
        assert!(StateVector::new(vec![Complex64::new(0.0, 0.0); 3]).normalized().is_err());
    }
}
