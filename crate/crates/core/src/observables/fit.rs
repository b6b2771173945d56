use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::Histogram;
use crate::error::{Error, Result};
use crate::solver::splitmix64;

const GRID: usize = 240;
const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Minimize `f` over `[lo, hi]` in log space: coarse scan, then golden
/// section around the best grid point. Returns `(x, at_lower, at_upper)`.
fn minimize_log(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, bool, bool) {
    let (l0, l1) = (lo.ln(), hi.ln());
    let xs: Vec<f64> = (0..GRID).map(|i| l0 + (l1 - l0) * i as f64 / (GRID - 1) as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x.exp())).collect();
    let best = vals
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    if best == 0 || best == GRID - 1 {
        return (xs[best].exp(), best == 0, best == GRID - 1);
    }
    let (mut a, mut b) = (xs[best - 1], xs[best + 1]);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c.exp()), f(d.exp()));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d.exp());
        }
    }
    (((a + b) / 2.0).exp(), false, false)
}

fn curvature(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-3 * x;
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub tau: f64,
    pub tau_err: f64,
    /// Signal count density (counts/s) at `t_start`.
    pub amplitude: f64,
    pub n_bins: usize,
}

/// Time constant of the decay of `hist` after `t_start` (Poisson maximum
/// likelihood on bin-integrated counts; the error comes from the curvature
/// of the profile likelihood).
pub fn fit_exponential(hist: &Histogram, t_start: f64) -> Result<ExponentialFit> {
    fit_exponential_with_background(hist, t_start, 0.0)
}

/// As [`fit_exponential`] with a known flat background of
/// `background_density` counts per second of histogram time.
pub fn fit_exponential_with_background(hist: &Histogram, t_start: f64, background_density: f64) -> Result<ExponentialFit> {
    let bins: Vec<(f64, f64, f64)> = hist
        .bin_edges
        .windows(2)
        .zip(&hist.counts)
        .filter(|(w, _)| w[0] >= t_start)
        .map(|(w, &c)| (w[0] - t_start, w[1] - t_start, c as f64))
        .collect();
    let nonzero = bins.iter().filter(|b| b.2 > 0.0).count();
    if nonzero < 5 {
        return Err(Error::InsufficientData(format!(
            "{nonzero} nonzero bins after t = {t_start:e} s, need at least 5"
        )));
    }
    let span = bins.last().map_or(0.0, |b| b.1);
    let width = bins.iter().map(|b| b.1 - b.0).fold(f64::INFINITY, f64::min);
    let total: f64 = bins.iter().map(|b| b.2).sum();
    let bkg: Vec<f64> = bins.iter().map(|b| background_density * (b.1 - b.0)).collect();

    let shape = |tau: f64| -> Vec<f64> {
        bins.iter().map(|b| tau * ((-b.0 / tau).exp() - (-b.1 / tau).exp())).collect()
    };
    let best_amplitude = |f: &[f64]| -> f64 {
        let sf: f64 = f.iter().sum();
        if background_density == 0.0 {
            return total / sf;
        }
        let g = |a: f64| -> f64 {
            bins.iter().zip(f).zip(&bkg).map(|((b, fi), bi)| b.2 * fi / (a * fi + bi)).sum::<f64>() - sf
        };
        if g(0.0) <= 0.0 {
            return 0.0;
        }
        let mut hi = (total / sf).max(1e-300);
        while g(hi) > 0.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let nll = |tau: f64| -> f64 {
        let f = shape(tau);
        let a = best_amplitude(&f);
        bins.iter()
            .zip(&f)
            .zip(&bkg)
            .map(|((b, fi), bi)| {
                let mu = a * fi + bi;
                if mu <= 0.0 {
                    if b.2 > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    mu - b.2 * mu.ln()
                }
            })
            .sum()
    };
    let (tau, at_lo, at_hi) = minimize_log(nll, width / 10.0, 1e3 * span);
    if at_lo || at_hi {
        return Err(Error::Fit(format!(
            "no exponential decay found after t = {t_start:e} s (time constant ran to the search edge)"
        )));
    }
    let d2 = curvature(nll, tau);
    if !(d2 > 0.0) {
        return Err(Error::Fit("likelihood has no curvature at the optimum".into()));
    }
    Ok(ExponentialFit {
        tau,
        tau_err: d2.sqrt().recip(),
        amplitude: best_amplitude(&shape(tau)),
        n_bins: bins.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationFit {
    pub n0: f64,
    pub n0_err: f64,
    pub p_abs: f64,
    pub rms_residual: f64,
    pub warnings: Vec<String>,
}

/// Least-squares fit of `P_S(n) = 1 − exp(−n/n0)`; `p_abs = 1/n0`.
pub fn fit_saturation(points: &[(f64, f64)]) -> Result<SaturationFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "saturation fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !(p.0 >= 0.0) || !p.1.is_finite()) {
        return Err(Error::Config("photon numbers must be >= 0 and probabilities finite".into()));
    }
    let n_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if !(n_max > 0.0) || points.iter().all(|p| p.1 <= 0.0) {
        return Err(Error::Fit("no transfer observed; n0 is unbounded".into()));
    }
    let sse = |n0: f64| -> f64 { points.iter().map(|&(n, p)| (p - 1.0 + (-n / n0).exp()).powi(2)).sum() };
    let (n0, at_lo, at_hi) = minimize_log(sse, 1e-3 * n_max, 1e6 * n_max);
    if at_lo || at_hi {
        return Err(Error::Fit("saturation scale ran to the search edge".into()));
    }
    let s_min = sse(n0);
    let dof = (points.len() - 1) as f64;
    let rms = (s_min / points.len() as f64).sqrt();
    let d2 = curvature(sse, n0);
    let n0_err = if d2 > 0.0 { (2.0 * (s_min / dof) / d2).sqrt() } else { f64::INFINITY };
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut warnings = Vec::new();
    // robust noise scale, so a single outlier cannot hide itself
    let mut abs_res: Vec<f64> = points.iter().map(|&(n, p)| (p - 1.0 + (-n / n0).exp()).abs()).collect();
    abs_res.sort_by(f64::total_cmp);
    let noise = 3.0 * abs_res[abs_res.len() / 2].max(1e-9);
    if sorted.windows(2).any(|w| w[1].1 < w[0].1 - noise) {
        warnings.push("transfer probability decreases with photon number beyond the noise level".into());
    }
    Ok(SaturationFit {
        n0,
        n0_err,
        p_abs: 1.0 / n0,
        rms_residual: rms,
        warnings,
    })
}

/// Simulated saturation measurement: each shot draws a Poissonian photon
/// number `k` with mean `n` and transfers with probability `1 − (1−p)^k`.
pub fn synthetic_saturation(p_abs: f64, photon_numbers: &[f64], shots: u64, seed: u64) -> Result<Vec<(f64, f64)>> {
    if !(0.0..=1.0).contains(&p_abs) || shots == 0 {
        return Err(Error::Config("synthetic saturation needs p_abs in [0, 1] and shots > 0".into()));
    }
    photon_numbers
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            if !(n >= 0.0) {
                return Err(Error::Config("photon numbers must be >= 0".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed.wrapping_add(splitmix64(i as u64))));
            let mut hits = 0u64;
            for _ in 0..shots {
                let k = if n > 0.0 { Poisson::new(n).expect("n > 0").sample(&mut rng) } else { 0.0 };
                if rng.random::<f64>() < 1.0 - (1.0 - p_abs).powf(k) {
                    hits += 1;
                }
            }
            Ok((n, hits as f64 / shots as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_histogram(tau: f64, amplitude: f64, width: f64, n: usize) -> Histogram {
        let mut h = Histogram::uniform(0.0, width * n as f64, width).unwrap();
        for (i, c) in h.counts.iter_mut().enumerate() {
            let (a, b) = (i as f64 * width, (i + 1) as f64 * width);
            *c = (amplitude * tau * ((-a / tau).exp() - (-b / tau).exp())).round() as u64;
        }
        h
    }

    #[test]
    fn recovers_lifetime() {
        let h = exact_histogram(37.7e-9, 1e14, 1e-9, 200);
        let f = fit_exponential(&h, 0.0).unwrap();
        assert!((f.tau / 37.7e-9 - 1.0).abs() < 1e-4, "{}", f.tau);
        assert!(f.tau_err > 0.0 && f.tau_err < 1e-10);
    }

    #[test]
    fn flat_histogram_fails() {
        let mut h = Histogram::uniform(0.0, 1e-7, 1e-9).unwrap();
        h.counts.iter_mut().for_each(|c| *c = 50);
        assert!(matches!(fit_exponential(&h, 0.0), Err(Error::Fit(_))));
    }

    #[test]
    fn too_few_bins() {
        let h = exact_histogram(1e-9, 1e9, 1e-9, 100);
        assert!(matches!(fit_exponential(&h, 0.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn background_is_subtracted() {
        let mut h = exact_histogram(20e-9, 1e12, 1e-9, 300);
        h.counts.iter_mut().for_each(|c| *c += 100);
        let biased = fit_exponential(&h, 0.0).unwrap();
        let f = fit_exponential_with_background(&h, 0.0, 100.0 / 1e-9).unwrap();
        assert!((f.tau / 20e-9 - 1.0).abs() < 1e-3, "{}", f.tau);
        assert!(biased.tau > 21e-9);
    }

    #[test]
    fn saturation_exact() {
        let pts: Vec<(f64, f64)> = [0.0, 20.0, 40.0, 56.0, 80.0, 120.0].iter().map(|&n| (n, 1.0 - (-n / 56.0f64).exp())).collect();
        assert_eq!(pts[0].1, 0.0);
        assert!((pts[3].1 - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let f = fit_saturation(&pts).unwrap();
        assert!((f.n0 - 56.0).abs() < 1e-6);
        assert!((f.p_abs - 1.0 / 56.0).abs() < 1e-9);
        assert!(f.warnings.is_empty());
        assert!(fit_saturation(&pts[..2]).is_err());
    }

    #[test]
    fn non_monotonic_warns() {
        let pts = vec![(10.0, 0.2), (30.0, 0.45), (50.0, 0.05), (70.0, 0.7), (90.0, 0.8)];
        let f = fit_saturation(&pts).unwrap();
        assert!(!f.warnings.is_empty());
    }

    #[test]
    fn synthetic_matches_expectation() {
        let pts = synthetic_saturation(1.0 / 56.0, &[56.0], 20_000, 3).unwrap();
        let expect = 1.0 - (-1.0f64).exp();
        assert!((pts[0].1 - expect).abs() < 4.0 * (expect * (1.0 - expect) / 20_000.0f64).sqrt());
    }
}
