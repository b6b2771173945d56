use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Square complex operator in compressed sparse row form.
///
/// Every operator the models build is very sparse (ladder operators,
/// transition projectors, a handful of couplings), so the solver works on
/// this representation directly. Dense conversion is available for tests and
/// diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(vec![Complex64::new(1.0, 0.0); dim])
    }

    pub fn diagonal(diag: Vec<Complex64>) -> Self {
        let dim = diag.len();
        Self::from_triplets(dim, diag.into_iter().enumerate().map(|(i, v)| (i, i, v)))
    }

    /// Duplicates are summed; explicit zeros are dropped.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        let mut t: Vec<_> = triplets.into_iter().collect();
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            assert!(r < dim && c < dim, "operator entry ({r}, {c}) outside dim {dim}");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != Complex64::new(0.0, 0.0));
        let mut row_ptr = vec![0usize; dim + 1];
        let cols = merged.iter().map(|e| e.1).collect();
        let vals = merged.iter().map(|e| e.2).collect();
        for e in &merged {
            row_ptr[e.0 + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let dim = m.nrows();
        Self::from_triplets(
            dim,
            (0..dim).flat_map(|r| (0..dim).map(move |c| (r, c))).map(|(r, c)| (r, c, m[(r, c)])),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterate over stored entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub(crate) fn row(&self, r: usize) -> (&[usize], &[Complex64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= s;
        }
        if s == Complex64::new(0.0, 0.0) {
            return Self::zeros(self.dim);
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).1.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.iter().all(|(r, c, v)| (v - self.get(c, r).conj()).norm() <= tol)
            && self.adjoint().iter().all(|(r, c, v)| (v - self.get(r, c)).norm() <= tol)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.dim) {
            let (cols, vals) = self.row(r);
            let mut acc = Complex64::new(0.0, 0.0);
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            *yr = acc;
        }
    }

    /// `y += s A x`.
    pub fn apply_add(&self, s: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.dim) {
            let (cols, vals) = self.row(r);
            let mut acc = Complex64::new(0.0, 0.0);
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            *yr += s * acc;
        }
    }

    pub fn apply_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut y);
        y
    }

    /// `out += s A ρ` for a dense row-major `ρ`.
    pub(crate) fn left_mul_add(&self, s: Complex64, rho: &[Complex64], out: &mut [Complex64]) {
        let n = self.dim;
        for r in 0..n {
            let (cols, vals) = self.row(r);
            let orow = &mut out[r * n..(r + 1) * n];
            for (&c, &v) in cols.iter().zip(vals) {
                let sv = s * v;
                let rrow = &rho[c * n..(c + 1) * n];
                for (o, x) in orow.iter_mut().zip(rrow) {
                    *o += sv * x;
                }
            }
        }
    }

    /// `out += s L ρ L†` for a dense row-major `ρ`.
    pub(crate) fn sandwich_add(&self, s: f64, rho: &[Complex64], out: &mut [Complex64]) {
        let n = self.dim;
        for (i, j, v) in self.iter() {
            let sv = v * s;
            let rrow = &rho[j * n..(j + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (k, l, w) in self.iter() {
                orow[k] += sv * rrow[l] * w.conj();
            }
        }
    }

    /// `⟨ψ|A|ψ⟩` without normalization.
    pub fn expectation_pure(&self, psi: &[Complex64]) -> Complex64 {
        self.iter().map(|(r, c, v)| psi[r].conj() * v * psi[c]).sum()
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator::from_triplets(self.dim, self.iter().chain(rhs.iter()))
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator::from_triplets(self.dim, self.iter().chain(rhs.iter().map(|(r, c, v)| (r, c, -v))))
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        let mut t = Vec::new();
        for (r, k, a) in self.iter() {
            let (cols, vals) = rhs.row(k);
            for (&c, &b) in cols.iter().zip(vals) {
                t.push((r, c, a * b));
            }
        }
        Operator::from_triplets(self.dim, t)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

impl Mul<Complex64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: Complex64) -> Operator {
        self.scale(rhs)
    }
}
