use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dopri::{Rhs, Stepper};
use super::master::segment_ends;
use super::{trajectory_seed, SolverOptions, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::hilbert::{Level, StateVector};
use crate::model::{ChannelTag, LindbladModel};

type C = Complex64;

const MINUS_I: C = C::new(0.0, -1.0);

/// Starting point of every trajectory: a fixed pure state or a classical
/// mixture sampled independently per trajectory.
#[derive(Debug, Clone)]
pub enum InitialState {
    Pure(StateVector),
    Mixture(Vec<(f64, StateVector)>),
}

impl InitialState {
    fn validate(&self, dim: usize) -> Result<()> {
        let states: Vec<&StateVector> = match self {
            InitialState::Pure(s) => vec![s],
            InitialState::Mixture(m) => {
                let total: f64 = m.iter().map(|x| x.0).sum();
                if m.is_empty() || m.iter().any(|x| x.0 < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Config("mixture weights must be >= 0 and sum to 1".into()));
                }
                m.iter().map(|x| &x.1).collect()
            }
        };
        for s in states {
            if s.dim() != dim {
                return Err(Error::Config(format!("initial state has dimension {}, model has {dim}", s.dim())));
            }
            if !s.is_normalized() {
                return Err(Error::Config("initial state is not normalized".into()));
            }
        }
        Ok(())
    }

    fn pick(&self, rng: &mut impl Rng) -> &StateVector {
        match self {
            InitialState::Pure(s) => s,
            InitialState::Mixture(m) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, s) in m {
                    acc += w;
                    if u < acc {
                        return s;
                    }
                }
                &m.last().expect("validated non-empty").1
            }
        }
    }
}

/// Ensemble statistics of the atomic populations `⟨ψ|P_l|ψ⟩/⟨ψ|ψ⟩` along
/// the trajectories. `mean[k][l]` is the average at `times[k]` for level `l`
/// of the model's space; `variance` is the per-trajectory sample variance.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSamples {
    pub times: Vec<f64>,
    pub levels: Vec<Level>,
    pub mean: Vec<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
    /// Per-trajectory sample covariance between levels, `[time][l][m]`.
    pub covariance: Vec<Vec<Vec<f64>>>,
    pub n_trajectories: usize,
}

struct TrajRhs<'a> {
    model: &'a LindbladModel,
    segment_mid: f64,
}

impl Rhs for TrajRhs<'_> {
    fn eval(&mut self, t: f64, psi: &[C], out: &mut [C]) {
        out.iter_mut().for_each(|v| *v = C::new(0.0, 0.0));
        self.model.h_eff_static().apply_add(MINUS_I, psi, out);
        for term in self.model.terms() {
            let f = term.profile.value_on(t, self.segment_mid);
            if f != 0.0 {
                term.op.apply_add(MINUS_I * f, psi, out);
            }
        }
    }
}

fn norm_sqr(v: &[C]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

struct Sampler<'a> {
    times: &'a [f64],
    next: usize,
    rows: Vec<Vec<f64>>,
}

impl Sampler<'_> {
    fn record(&mut self, model: &LindbladModel, psi: &[C]) {
        self.rows.push(model.space().atomic_populations_pure(psi));
        self.next += 1;
    }

    /// Emit every pending sample time `<= t` using the stepper's dense output.
    fn emit_until(&mut self, model: &LindbladModel, stepper: &Stepper, t: f64, buf: &mut [C]) {
        while self.next < self.times.len() && self.times[self.next] <= t {
            let ts = self.times[self.next];
            if ts == stepper.t() {
                self.record(model, stepper.y());
            } else {
                stepper.dense(ts, buf);
                self.record(model, buf);
            }
        }
    }
}

fn run_one(
    model: &LindbladModel,
    init: &InitialState,
    t_end: f64,
    sample_times: &[f64],
    seed: u64,
    options: &SolverOptions,
) -> Result<(TrajectoryRecord, Vec<Vec<f64>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi0 = init.pick(&mut rng);
    let dim = model.dim();
    let time_tol = 1e-3 * model.shortest_decay_time().min(t_end);
    let mut stepper = Stepper::new(
        0.0,
        psi0.amplitudes().to_vec(),
        options.rel_tol,
        options.abs_tol,
        options.step_bound(model.max_step_hint()),
    );
    let mut rhs = TrajRhs { model, segment_mid: 0.0 };
    let mut sampler = Sampler {
        times: sample_times,
        next: 0,
        rows: Vec::with_capacity(sample_times.len()),
    };
    while sampler.next < sample_times.len() && sample_times[sampler.next] <= 0.0 {
        sampler.record(model, psi0.amplitudes());
    }
    let mut jumps = Vec::new();
    let mut threshold: f64 = rng.random();
    let mut buf = vec![C::new(0.0, 0.0); dim];
    let mut jumped = vec![C::new(0.0, 0.0); dim];
    let mut ended_in: Option<Level> = None;
    let mut seg_start = 0.0;
    'segments: for seg_end in segment_ends(model, 0.0, t_end) {
        rhs.segment_mid = 0.5 * (seg_start + seg_end);
        stepper.invalidate();
        while stepper.t() < seg_end {
            stepper.step(&mut rhs, seg_end)?;
            if norm_sqr(stepper.y()) >= threshold {
                sampler.emit_until(model, &stepper, stepper.t(), &mut buf);
                continue;
            }
            // locate the crossing of the norm threshold inside the last step
            let (mut lo, mut hi) = (stepper.t_old(), stepper.t());
            while hi - lo > time_tol {
                let mid = 0.5 * (lo + hi);
                stepper.dense(mid, &mut buf);
                if norm_sqr(&buf) >= threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t_jump = hi;
            sampler.emit_until(model, &stepper, t_jump, &mut buf);
            if t_jump == stepper.t() {
                buf.copy_from_slice(stepper.y());
            } else {
                stepper.dense(t_jump, &mut buf);
            }
            let tag = select_channel(model, t_jump, &buf, &mut jumped, &mut rng)?;
            jumps.push((t_jump, tag));
            let n = norm_sqr(&jumped).sqrt();
            jumped.iter_mut().for_each(|v| *v /= n);
            if model.is_terminal(tag) {
                let pops = model.space().atomic_populations_pure(&jumped);
                while sampler.next < sample_times.len() {
                    sampler.rows.push(pops.clone());
                    sampler.next += 1;
                }
                ended_in = Some(born_sample(model, &jumped, &mut rng));
                break 'segments;
            }
            stepper.reset(t_jump, &jumped);
            threshold = rng.random();
        }
        seg_start = seg_end;
    }
    let final_atom_state = match ended_in {
        Some(l) => l,
        None => {
            sampler.emit_until(model, &stepper, t_end, &mut buf);
            born_sample(model, stepper.y(), &mut rng)
        }
    };
    Ok((
        TrajectoryRecord {
            seed,
            jumps,
            final_atom_state,
            t_end,
        },
        sampler.rows,
    ))
}

/// Pick a channel with probability proportional to `rate ‖L ψ‖²` and write
/// the (unnormalized) post-jump state into `out`.
fn select_channel(
    model: &LindbladModel,
    t: f64,
    psi: &[C],
    out: &mut [C],
    rng: &mut impl Rng,
) -> Result<ChannelTag> {
    let weights: Vec<f64> = model
        .channels()
        .iter()
        .map(|c| {
            if c.rate == 0.0 {
                return 0.0;
            }
            c.rate * norm_sqr(&model.jump_op(c.jump).apply_vec(psi))
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Integration {
            last_good_time: t,
            reason: "norm decayed with no active collapse channel".into(),
        });
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = weights.iter().rposition(|&w| w > 0.0).expect("total > 0");
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            chosen = i;
            break;
        }
    }
    let c = &model.channels()[chosen];
    model.jump_op(c.jump).apply(psi, out);
    Ok(c.tag)
}

fn born_sample(model: &LindbladModel, psi: &[C], rng: &mut impl Rng) -> Level {
    let pops = model.space().atomic_populations_pure(psi);
    let u: f64 = rng.random();
    let levels = model.space().levels();
    let mut acc = 0.0;
    for (l, p) in levels.iter().zip(&pops) {
        acc += p;
        if u < acc {
            return *l;
        }
    }
    let last = pops.iter().rposition(|&p| p > 0.0).unwrap_or(levels.len() - 1);
    levels[last]
}

fn run_all(
    model: &LindbladModel,
    init: &InitialState,
    t_end: f64,
    sample_times: &[f64],
    options: &SolverOptions,
) -> Result<Vec<(TrajectoryRecord, Vec<Vec<f64>>)>> {
    options.validate()?;
    init.validate(model.dim())?;
    if !(t_end > 0.0) {
        return Err(Error::Config("t_end must be > 0".into()));
    }
    if sample_times.windows(2).any(|w| !(w[1] > w[0])) || sample_times.iter().any(|&t| t < 0.0 || t > t_end) {
        return Err(Error::Config("sample times must be increasing and inside [0, t_end]".into()));
    }
    (0..options.n_trajectories as u64)
        .into_par_iter()
        .map(|i| run_one(model, init, t_end, sample_times, trajectory_seed(options.base_seed, i), options))
        .collect()
}

/// Monte-Carlo wave-function unraveling from a pure state.
pub fn run_trajectories(
    model: &LindbladModel,
    psi0: &StateVector,
    t_end: f64,
    options: &SolverOptions,
) -> Result<Vec<TrajectoryRecord>> {
    run_trajectories_from(model, &InitialState::Pure(psi0.clone()), t_end, options)
}

pub fn run_trajectories_from(
    model: &LindbladModel,
    init: &InitialState,
    t_end: f64,
    options: &SolverOptions,
) -> Result<Vec<TrajectoryRecord>> {
    Ok(run_all(model, init, t_end, &[], options)?.into_iter().map(|r| r.0).collect())
}

/// As [`run_trajectories_from`], also averaging the atomic populations of
/// each trajectory at `sample_times`.
pub fn run_trajectories_sampled(
    model: &LindbladModel,
    init: &InitialState,
    t_end: f64,
    sample_times: &[f64],
    options: &SolverOptions,
) -> Result<(Vec<TrajectoryRecord>, PopulationSamples)> {
    let runs = run_all(model, init, t_end, sample_times, options)?;
    let n_levels = model.space().levels().len();
    let n = runs.len();
    let n_times = sample_times.len();
    let mut mean = vec![vec![0.0; n_levels]; n_times];
    let mut prod = vec![vec![vec![0.0; n_levels]; n_levels]; n_times];
    for (_, rows) in &runs {
        for (k, row) in rows.iter().enumerate() {
            for (l, p) in row.iter().enumerate() {
                mean[k][l] += p;
                for (m, q) in row.iter().enumerate() {
                    prod[k][l][m] += p * q;
                }
            }
        }
    }
    let nf = n as f64;
    for row in mean.iter_mut().flatten() {
        *row /= nf;
    }
    let mut covariance = prod;
    for k in 0..n_times {
        for l in 0..n_levels {
            for m in 0..n_levels {
                covariance[k][l][m] = if n > 1 {
                    (covariance[k][l][m] - nf * mean[k][l] * mean[k][m]) / (nf - 1.0)
                } else {
                    0.0
                };
            }
        }
    }
    let variance = (0..n_times)
        .map(|k| (0..n_levels).map(|l| covariance[k][l][l].max(0.0)).collect())
        .collect();
    let samples = PopulationSamples {
        times: sample_times.to_vec(),
        levels: model.space().levels().to_vec(),
        mean,
        variance,
        covariance,
        n_trajectories: n,
    };
    Ok((runs.into_iter().map(|r| r.0).collect(), samples))
}
