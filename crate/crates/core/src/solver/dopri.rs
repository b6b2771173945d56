//! Dormand–Prince 5(4) stepper over complex vectors with the standard
//! fourth-order continuous extension.

use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const MAX_ATTEMPTS: usize = 200;

/// Right-hand side `dy/dt = f(t, y)` written into the output slice.
pub trait Rhs {
    fn eval(&mut self, t: f64, y: &[C], dy: &mut [C]);
}

impl<F: FnMut(f64, &[C], &mut [C])> Rhs for F {
    fn eval(&mut self, t: f64, y: &[C], dy: &mut [C]) {
        self(t, y, dy)
    }
}

#[derive(Debug, Clone)]
pub struct Stepper {
    rtol: f64,
    atol: f64,
    max_step: f64,
    t: f64,
    h: f64,
    y: Vec<C>,
    k: [Vec<C>; 7],
    tmp: Vec<C>,
    ynew: Vec<C>,
    rcont: [Vec<C>; 5],
    t_old: f64,
    h_last: f64,
    fsal: bool,
}

fn axpy(out: &mut [C], base: &[C], terms: &[(f64, &[C])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = base[i];
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        *o = acc;
    }
}

fn rms_norm(v: &[C], scale: &[f64]) -> f64 {
    let s: f64 = v.iter().zip(scale).map(|(x, s)| (x.norm() / s).powi(2)).sum();
    (s / v.len().max(1) as f64).sqrt()
}

impl Stepper {
    pub fn new(t0: f64, y0: Vec<C>, rtol: f64, atol: f64, max_step: f64) -> Self {
        let n = y0.len();
        let z = || vec![C::new(0.0, 0.0); n];
        Self {
            rtol,
            atol,
            max_step: if max_step > 0.0 { max_step } else { f64::INFINITY },
            t: t0,
            h: 0.0,
            y: y0,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            ynew: z(),
            rcont: [z(), z(), z(), z(), z()],
            t_old: t0,
            h_last: 0.0,
            fsal: false,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[C] {
        &self.y
    }

    /// Start of the last accepted step.
    pub fn t_old(&self) -> f64 {
        self.t_old
    }

    /// Replace the state (after a jump or across a discontinuity).
    pub fn reset(&mut self, t: f64, y: &[C]) {
        self.t = t;
        self.t_old = t;
        self.h_last = 0.0;
        self.y.copy_from_slice(y);
        self.fsal = false;
    }

    /// Mark the right-hand side as discontinuous at the current time.
    pub fn invalidate(&mut self) {
        self.fsal = false;
    }

    fn initial_step(&mut self, f: &mut impl Rhs, span: f64) -> f64 {
        let scale: Vec<f64> = self.y.iter().map(|x| self.atol + self.rtol * x.norm()).collect();
        let d0 = rms_norm(&self.y, &scale);
        let d1 = rms_norm(&self.k[0], &scale);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span).min(self.max_step);
        let y1: Vec<C> = self.y.iter().zip(&self.k[0]).map(|(y, k)| y + k * h0).collect();
        f.eval(self.t + h0, &y1, &mut self.tmp);
        let diff: Vec<C> = self.tmp.iter().zip(&self.k[0]).map(|(a, b)| a - b).collect();
        let d2 = rms_norm(&diff, &scale) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6 * span)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span).min(self.max_step)
    }

    /// Take one accepted step that ends at or before `t_stop`, landing on it
    /// exactly when within reach.
    pub fn step(&mut self, f: &mut impl Rhs, t_stop: f64) -> Result<()> {
        let span = t_stop - self.t;
        if span <= 0.0 {
            return Ok(());
        }
        if !self.fsal {
            f.eval(self.t, &self.y, &mut self.k[0]);
            self.fsal = true;
            if self.h <= 0.0 || self.h_last == 0.0 {
                self.h = self.initial_step(f, span);
            }
        }
        let min_h = 1e-14 * self.t.abs().max(span);
        let mut rejected = false;
        for _ in 0..MAX_ATTEMPTS {
            let mut h = self.h.min(self.max_step);
            let mut last = false;
            if self.t + h >= t_stop || self.t + 1.01 * h >= t_stop {
                h = t_stop - self.t;
                last = true;
            }
            if h < min_h {
                return Err(Error::Integration {
                    last_good_time: self.t,
                    reason: format!("step size {h:e} s underflowed"),
                });
            }
            self.stages(f, h);
            let n = self.y.len();
            let mut sum = 0.0;
            for i in 0..n {
                let e = (self.k[0][i] * E1
                    + self.k[2][i] * E3
                    + self.k[3][i] * E4
                    + self.k[4][i] * E5
                    + self.k[5][i] * E6
                    + self.k[6][i] * E7)
                    * h;
                let sk = self.atol + self.rtol * self.y[i].norm().max(self.ynew[i].norm());
                sum += (e.norm() / sk).powi(2);
            }
            let err = (sum / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                self.h = h * 0.2;
                rejected = true;
                continue;
            }
            if err <= 1.0 {
                self.dense_coefficients(h);
                self.t_old = self.t;
                self.t = if last { t_stop } else { self.t + h };
                self.h_last = h;
                std::mem::swap(&mut self.y, &mut self.ynew);
                self.k.swap(0, 6);
                let mut fac = if err == 0.0 { 10.0 } else { 0.9 * err.powf(-0.2) };
                fac = fac.clamp(0.2, 10.0);
                if rejected {
                    fac = fac.min(1.0);
                }
                // a forced short landing step says little about the natural step
                if !(last && h < self.h) {
                    self.h = h * fac;
                }
                return Ok(());
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            self.h = h * fac;
            rejected = true;
        }
        Err(Error::Integration {
            last_good_time: self.t,
            reason: "too many rejected steps".into(),
        })
    }

    fn stages(&mut self, f: &mut impl Rhs, h: f64) {
        let t = self.t;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        axpy(&mut self.tmp, &self.y, &[(h * A21, k1)]);
        f.eval(t + C2 * h, &self.tmp, k2);
        axpy(&mut self.tmp, &self.y, &[(h * A31, k1), (h * A32, k2)]);
        f.eval(t + C3 * h, &self.tmp, k3);
        axpy(&mut self.tmp, &self.y, &[(h * A41, k1), (h * A42, k2), (h * A43, k3)]);
        f.eval(t + C4 * h, &self.tmp, k4);
        axpy(
            &mut self.tmp,
            &self.y,
            &[(h * A51, k1), (h * A52, k2), (h * A53, k3), (h * A54, k4)],
        );
        f.eval(t + C5 * h, &self.tmp, k5);
        axpy(
            &mut self.tmp,
            &self.y,
            &[(h * A61, k1), (h * A62, k2), (h * A63, k3), (h * A64, k4), (h * A65, k5)],
        );
        f.eval(t + h, &self.tmp, k6);
        axpy(
            &mut self.ynew,
            &self.y,
            &[(h * A71, k1), (h * A73, k3), (h * A74, k4), (h * A75, k5), (h * A76, k6)],
        );
        f.eval(t + h, &self.ynew, k7);
    }

    fn dense_coefficients(&mut self, h: f64) {
        let [k1, _, k3, k4, k5, k6, k7] = &self.k;
        let [r1, r2, r3, r4, r5] = &mut self.rcont;
        for i in 0..self.y.len() {
            let ydiff = self.ynew[i] - self.y[i];
            let bspl = k1[i] * h - ydiff;
            r1[i] = self.y[i];
            r2[i] = ydiff;
            r3[i] = bspl;
            r4[i] = ydiff - k7[i] * h - bspl;
            r5[i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
        }
    }

    /// State at `t` inside the last accepted step `[t_old, t]`.
    pub fn dense(&self, t: f64, out: &mut [C]) {
        if self.h_last == 0.0 {
            out.copy_from_slice(&self.y);
            return;
        }
        let theta = (t - self.t_old) / self.h_last;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + (r2[i] + (r3[i] + (r4[i] + r5[i] * theta1) * theta) * theta1) * theta;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_phase() {
        // y' = -i w y
        let w = 3.0;
        let mut f = |_t: f64, y: &[C], dy: &mut [C]| dy[0] = C::new(0.0, -w) * y[0];
        let mut s = Stepper::new(0.0, vec![C::new(1.0, 0.0)], 1e-10, 1e-12, 0.0);
        let mut mid = vec![C::new(0.0, 0.0)];
        let mut worst: f64 = 0.0;
        while s.t() < 10.0 {
            s.step(&mut f, 10.0).unwrap();
            let tm = 0.5 * (s.t_old() + s.t());
            s.dense(tm, &mut mid);
            worst = worst.max((mid[0] - C::new(0.0, -w * tm).exp()).norm());
        }
        assert_eq!(s.t(), 10.0);
        assert!((s.y()[0] - C::new(0.0, -30.0).exp()).norm() < 1e-8);
        assert!(worst < 1e-7, "dense output error {worst}");
    }

    #[test]
    fn decay_lands_on_stop() {
        let mut f = |_t: f64, y: &[C], dy: &mut [C]| dy[0] = -y[0] * 2.0;
        let mut s = Stepper::new(0.0, vec![C::new(1.0, 0.0)], 1e-10, 1e-14, 0.1);
        for stop in [0.25, 1.0, 1.5] {
            while s.t() < stop {
                s.step(&mut f, stop).unwrap();
                assert!(s.t() - s.t_old() <= 0.1 + 1e-15);
            }
            assert_eq!(s.t(), stop);
            assert!((s.y()[0].re - (-2.0 * stop).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn blow_up_reports_last_good_time() {
        // y' = y^2 from 1 explodes at t = 1
        let mut f = |_t: f64, y: &[C], dy: &mut [C]| dy[0] = y[0] * y[0];
        let mut s = Stepper::new(0.0, vec![C::new(1.0, 0.0)], 1e-8, 1e-10, 0.0);
        let mut res = Ok(());
        while res.is_ok() && s.t() < 2.0 {
            res = s.step(&mut f, 2.0);
        }
        match res {
            Err(Error::Integration { last_good_time, reason }) => assert!((last_good_time - 1.0).abs() < 1e-3, "{last_good_time} {reason}"),
            other => panic!("expected integration failure, got {other:?}"),
        }
    }
}
