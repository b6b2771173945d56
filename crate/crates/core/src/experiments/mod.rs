//! Config-driven experiment runs with CSV/JSON artifacts and a manifest.

mod compare;
mod config;
mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use compare::{compare, compare_files, ComparisonReport, GoldenValue, QuantityCheck};
pub use config::{ExperimentConfig, ExperimentKind, Excitation, PhysicsConfig, Protocol, Tolerances, SCHEMA_VERSION};
pub use output::{code_version, sha256_hex, OutputFile, RunManifest, MANIFEST_FILE, SUMMARY_FILE};

use crate::budget::{absorption_chain, BudgetReport};
use crate::error::{Error, Result};
use crate::hilbert::{Level, Mj};
use crate::model::{build_emission_model, excitation_pulse, LindbladModel};
use crate::observables::{
    absorb_per_photon, accidental_coincidences, any_jump, cavity_emission_fraction, coincidence_histogram,
    fit_exponential_with_background, fit_saturation, fmt_f64, spin_photon_correlation, synthetic_saturation,
    time_arrival_histogram, AbsorptionSetup,
};
use crate::solver::{run_trajectories_from, InitialState, TrajectoryRecord};
use crate::model::ChannelTag;
use output::{csv_with_manifest, OutputSet};

/// Machine-readable result of a run; `quantities` is what golden files are
/// compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub manifest: String,
    pub quantities: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    pub summary: Summary,
}

#[derive(Default)]
struct Outcome {
    files: Vec<(String, Vec<u8>)>,
    quantities: BTreeMap<String, f64>,
    reported: BTreeMap<String, f64>,
    warnings: Vec<String>,
}

impl Outcome {
    fn csv(&mut self, name: &str, body: &str) {
        self.files.push((name.into(), csv_with_manifest(body).into_bytes()));
    }

    fn json(&mut self, name: &str, mut value: serde_json::Value) -> Result<()> {
        if let Some(obj) = value.as_object_mut() {
            obj.insert("manifest".into(), MANIFEST_FILE.into());
        }
        let mut bytes = serde_json::to_vec_pretty(&value)?;
        bytes.push(b'\n');
        self.files.push((name.into(), bytes));
        Ok(())
    }

    fn q(&mut self, name: &str, v: f64) {
        self.quantities.insert(name.into(), v);
    }
}

/// Emission model of the config (with the excitation pulse when
/// configured) and the matching initial state.
pub fn emission_setup(cfg: &ExperimentConfig) -> Result<(LindbladModel, InitialState)> {
    let ph = &cfg.physics;
    let mut model = build_emission_model(
        &ph.cavity,
        &ph.branching,
        &ph.scheme,
        &ph.table,
        &ph.micromotion,
        cfg.emission_n_max(),
    )?;
    let init = match cfg.protocol.excitation {
        Excitation::Instant => InitialState::Pure(model.space().basis_state(Level::E(Mj::M1_2), 0, 0)?),
        Excitation::Pulse => {
            let pulse = excitation_pulse(model.space(), &ph.table, cfg.protocol.pulse_duration, None)?;
            model = model.with_term(pulse)?;
            let states = ph
                .preparation
                .weights()
                .into_iter()
                .map(|(level, p)| Ok((p, model.space().basis_state(level, 0, 0)?)))
                .collect::<Result<Vec<_>>>()?;
            InitialState::Mixture(states)
        }
    };
    Ok((model, init))
}

pub fn emission_records(cfg: &ExperimentConfig) -> Result<(Vec<TrajectoryRecord>, Vec<String>)> {
    let (model, init) = emission_setup(cfg)?;
    let records = run_trajectories_from(&model, &init, cfg.protocol.record_time, &cfg.solver_options())?;
    Ok((records, model.warnings().to_vec()))
}

pub fn absorption_setup(cfg: &ExperimentConfig) -> AbsorptionSetup {
    let ph = &cfg.physics;
    let pr = &cfg.protocol;
    AbsorptionSetup {
        params: ph.cavity.clone(),
        branching: ph.branching,
        scheme: ph.scheme.clone(),
        table: ph.table.clone(),
        micromotion: ph.micromotion,
        preparation: ph.preparation.clone(),
        detuning: pr.probe_detuning,
        probe_duration: pr.probe_duration,
        photons_in: pr.photons_in,
        eta_in: pr.eta_in,
        n_max: cfg.absorption_n_max(),
        ..AbsorptionSetup::default()
    }
}

fn emit_histogram(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let (records, warnings) = emission_records(cfg)?;
    out.warnings = warnings;
    let hist = time_arrival_histogram(&records, &cfg.detection, cfg.protocol.bin_width)?;
    // noise of both detectors summed over all cycles
    let background = 2.0 * cfg.detection.noise_rate() * hist.n_cycles as f64;
    let fit = fit_exponential_with_background(&hist, cfg.protocol.fit_start, background)?;
    let n = records.len() as f64;
    out.q("tau_hist", fit.tau);
    out.q("tau_hist_err", fit.tau_err);
    out.q("emission_fraction", cavity_emission_fraction(&records));
    out.q(
        "ht_fraction",
        records.iter().filter(|r| any_jump(r, |t| matches!(t, ChannelTag::MirrorHt(_)))).count() as f64 / n,
    );
    out.q("detected_per_cycle", hist.total() as f64 / n);
    out.q("n_cycles", n);
    out.csv("histogram.csv", &hist.to_csv());
    out.json(
        "fit.json",
        serde_json::json!({
            "method": "poisson maximum likelihood, bin-integrated exponential plus known background",
            "fit_start": cfg.protocol.fit_start,
            "background_per_second": background,
            "tau": fit.tau,
            "tau_err": fit.tau_err,
            "amplitude": fit.amplitude,
            "n_bins": fit.n_bins,
        }),
    )?;
    out.reported.insert("background_rate".into(), cfg.detection.background_rate);
    out.reported.insert("dark_rate".into(), cfg.detection.dark_rate);
    Ok(out)
}

fn g2(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let pr = &cfg.protocol;
    let (records, warnings) = emission_records(cfg)?;
    out.warnings = warnings;
    let window = (pr.g2_window_start, pr.g2_window_start + pr.g2_window_length);
    let (hist, cycles) = coincidence_histogram(&records, &cfg.detection, pr.cycle_period, window, pr.g2_max_delay)?;
    let n = records.len() as f64;
    let k = pr.g2_max_delay;
    let zero = hist.counts[k] as f64;
    let side = hist.counts.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, &c)| c as f64).sum::<f64>()
        / (2 * k) as f64;
    let noise = cfg.detection.noise_rate() * pr.g2_window_length;
    let clicks: u64 = cycles.n1.iter().chain(&cycles.n2).map(|&c| u64::from(c)).sum();
    let p_signal = (clicks as f64 / n - 2.0 * noise).max(0.0);
    let (expected, sigma) = accidental_coincidences(p_signal, noise, records.len() as u64);
    out.q("coincidences_zero", zero);
    out.q("side_peak_mean", side);
    if side > 0.0 {
        out.q("zero_to_side_ratio", zero / side);
    }
    out.q("accidental_expected", expected);
    out.q("accidental_sigma", sigma);
    out.q("p_signal_per_cycle", p_signal);
    out.q("noise_per_detector", noise);
    out.q("n_cycles", n);
    let mut body = String::from("delay_cycles,bin_start,bin_end,counts\n");
    for (i, (w, c)) in hist.bin_edges.windows(2).zip(&hist.counts).enumerate() {
        body.push_str(&format!("{},{},{},{}\n", i as i64 - k as i64, fmt_f64(w[0]), fmt_f64(w[1]), c));
    }
    out.csv("coincidences.csv", &body);
    out.reported.insert("background_rate".into(), cfg.detection.background_rate);
    out.reported.insert("dark_rate".into(), cfg.detection.dark_rate);
    Ok(out)
}

fn spin_photon(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let pr = &cfg.protocol;
    let (records, warnings) = emission_records(cfg)?;
    out.warnings = warnings;
    let window = (pr.spin_window_start, pr.spin_window_start + pr.spin_window_length);
    let r = spin_photon_correlation(&records, &cfg.detection, &cfg.readout, window)?;
    let (e_down, e_up) = r.standard_errors();
    let triggers = (r.counts.plus + r.counts.minus) as f64;
    let background_fraction = r.counts.noise_triggers as f64 / triggers;
    out.q("p_down_given_plus", r.p_down_given_plus);
    out.q("p_down_given_plus_err", e_down);
    out.q("p_up_given_minus", r.p_up_given_minus);
    out.q("p_up_given_minus_err", e_up);
    out.q("ratio_plus_minus", r.ratio_plus_minus);
    out.q("ratio_plus_minus_err", r.ratio_error());
    out.q("background_fraction", background_fraction);
    out.q("n_cycles", records.len() as f64);
    out.json("spin_photon.json", serde_json::to_value(r)?)?;
    for (k, v) in [
        ("background_fraction", background_fraction),
        ("background_rate", cfg.detection.background_rate),
        ("dark_rate", cfg.detection.dark_rate),
        ("polarization_mixing", cfg.detection.polarization_mixing),
        ("preparation_fidelity", cfg.physics.preparation.fidelity),
    ] {
        out.reported.insert(k.into(), v);
    }
    Ok(out)
}

/// Largest |p(θ) − p(θ + 90°)| over grid pairs, relative to the largest p.
pub fn periodicity_deviation(points: &[(f64, f64)]) -> Option<f64> {
    let max = points.iter().map(|p| p.1).fold(0.0, f64::max);
    points
        .iter()
        .filter_map(|a| {
            let b = points.iter().find(|b| (b.0 - a.0 - 90.0).abs() < 1e-9)?;
            Some((a.1 - b.1).abs() / max)
        })
        .reduce(f64::max)
}

fn absorption_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let setup = absorption_setup(cfg);
    let points = absorb_per_photon(&setup, &cfg.protocol.waveplate_angles, &cfg.solver_options())?;
    let mut body = String::from("theta_deg,p_abs,p_sink\n");
    for p in &points {
        body.push_str(&format!("{},{},{}\n", fmt_f64(p.theta), fmt_f64(p.p_abs), fmt_f64(p.p_sink)));
        out.q(&format!("p_abs_theta_{}", fmt_f64(p.theta)), p.p_abs);
        for w in &p.warnings {
            if !out.warnings.contains(w) {
                out.warnings.push(w.clone());
            }
        }
    }
    let by = |better: fn(f64, f64) -> bool| {
        points.iter().fold(&points[0], |a, b| if better(b.p_abs, a.p_abs) { b } else { a })
    };
    let (hi, lo) = (by(|a, b| a > b), by(|a, b| a < b));
    out.q("p_abs_max", hi.p_abs);
    out.q("theta_max", hi.theta);
    out.q("p_abs_min", lo.p_abs);
    out.q("theta_min", lo.theta);
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.theta, p.p_abs)).collect();
    if let Some(d) = periodicity_deviation(&pairs) {
        out.q("periodicity_deviation", d);
    }
    out.q("p_abs_chain", absorption_chain(cfg.budget.c0_measured, &cfg.budget.absorption, 1.0));
    out.csv("absorption.csv", &body);
    out.reported.insert("micromotion_beta".into(), cfg.physics.micromotion.beta);
    out.reported.insert("photons_in".into(), cfg.protocol.photons_in);
    Ok(out)
}

fn saturation_curve(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let pr = &cfg.protocol;
    let p_abs = match pr.saturation_p_abs {
        Some(p) => p,
        None => {
            let pts = absorb_per_photon(&absorption_setup(cfg), &[pr.saturation_angle], &cfg.solver_options())?;
            out.warnings.extend(pts[0].warnings.iter().cloned());
            pts[0].p_abs
        }
    };
    let points = synthetic_saturation(p_abs, &pr.photon_numbers, pr.saturation_shots, cfg.base_seed)?;
    let fit = fit_saturation(&points)?;
    out.warnings.extend(fit.warnings.iter().cloned());
    let mut body = String::from("photons,p_s\n");
    for (n, p) in &points {
        body.push_str(&format!("{},{}\n", fmt_f64(*n), fmt_f64(*p)));
    }
    out.csv("saturation.csv", &body);
    out.q("n0", fit.n0);
    out.q("n0_err", fit.n0_err);
    out.q("p_abs_fit", fit.p_abs);
    out.q("p_abs_input", p_abs);
    out.json("saturation_fit.json", serde_json::to_value(&fit)?)?;
    out.reported.insert("micromotion_beta".into(), cfg.physics.micromotion.beta);
    Ok(out)
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut BTreeMap<String, f64>) {
    match v {
        serde_json::Value::Number(n) => {
            out.insert(prefix.to_string(), n.as_f64().unwrap_or(f64::NAN));
        }
        serde_json::Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        _ => {}
    }
}

fn budget_report(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let report = BudgetReport::new(&cfg.physics.cavity, &cfg.physics.branching, &cfg.budget)?;
    let value = serde_json::to_value(&report)?;
    flatten("", &value, &mut out.quantities);
    out.json("budget.json", value)?;
    Ok(out)
}

/// Run the configured experiment and write its artifacts into `out_dir`.
///
/// Nothing is written if the computation fails; if writing fails midway the
/// files already written are removed.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunResult> {
    config.validate()?;
    let kind = config.kind()?;
    let start = Instant::now();
    let outcome = match kind {
        ExperimentKind::EmitHistogram => emit_histogram(config),
        ExperimentKind::G2 => g2(config),
        ExperimentKind::SpinPhoton => spin_photon(config),
        ExperimentKind::AbsorptionSweep => absorption_sweep(config),
        ExperimentKind::SaturationCurve => saturation_curve(config),
        ExperimentKind::BudgetReport => budget_report(config),
    }?;
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        experiment: kind.name().into(),
        manifest: MANIFEST_FILE.into(),
        quantities: outcome.quantities,
        warnings: outcome.warnings.clone(),
    };
    let mut files = OutputSet::new(out_dir)?;
    for (name, bytes) in &outcome.files {
        files.write(name, bytes)?;
    }
    let mut summary_bytes = serde_json::to_vec_pretty(&summary)?;
    summary_bytes.push(b'\n');
    files.write(SUMMARY_FILE, &summary_bytes)?;
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        experiment: kind.name().into(),
        code_version: code_version(),
        base_seed: config.base_seed,
        config: serde_json::to_value(config)?,
        wall_time_s: start.elapsed().as_secs_f64(),
        reported_parameters: outcome.reported,
        warnings: outcome.warnings,
        outputs: files.entries.clone(),
    };
    files.commit(&manifest)?;
    Ok(RunResult {
        out_dir: out_dir.to_path_buf(),
        manifest,
        summary,
    })
}

/// Load a config, apply command-line overrides and run it.
pub fn run_file(
    path: &Path,
    experiment: Option<ExperimentKind>,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<RunResult> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(k) = experiment {
        cfg.experiment = Some(k);
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let dir = match (out_dir, &cfg.output_dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => return Err(Error::Config("no output directory given (--out or output_dir)".into())),
    };
    run(&cfg, &dir)
}
