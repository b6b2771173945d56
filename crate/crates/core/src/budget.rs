//! Closed-form efficiency and cooperativity bookkeeping.
//!
//! Every function here is a plain formula; rates are in rad/s, mirror
//! transmissions and losses in ppm.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BranchingParams, CavityQEDParams};
use crate::units::{deserialize_rate, two_pi_mhz};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

fn check_probability(name: &str, p: f64, problems: &mut Vec<String>) {
    if !(0.0..=1.0).contains(&p) {
        problems.push(format!("{name} must be in [0, 1] (got {p})"));
    }
}

/// Factors of the photon detection probability per excitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyChain {
    pub p_emit: f64,
    pub eta_mirror: f64,
    pub eps_mode: f64,
    pub eta_path: f64,
    pub eta_det: f64,
}

impl EfficiencyChain {
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        check_probability("p_emit", self.p_emit, &mut p);
        check_probability("eta_mirror", self.eta_mirror, &mut p);
        check_probability("eps_mode", self.eps_mode, &mut p);
        check_probability("eta_path", self.eta_path, &mut p);
        check_probability("eta_det", self.eta_det, &mut p);
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(p))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorBudget {
    pub t_ht: f64,
    pub t_lt: f64,
    pub loss: f64,
    /// Measured in-coupling (reflection dip depth) of the empty cavity.
    pub eta_in_exp: f64,
}

impl Default for MirrorBudget {
    fn default() -> Self {
        Self {
            t_ht: 100.0,
            t_lt: 10.0,
            loss: 200.0,
            eta_in_exp: 0.80,
        }
    }
}

impl MirrorBudget {
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        if self.t_ht < 0.0 || self.t_lt < 0.0 || self.loss < 0.0 {
            p.push("mirror transmissions and loss must be >= 0".to_string());
        }
        if !(self.t_ht + self.t_lt + self.loss > 0.0) {
            p.push("total mirror loss must be > 0".to_string());
        }
        check_probability("eta_in_exp", self.eta_in_exp, &mut p);
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(p))
        }
    }

    fn total(&self) -> f64 {
        self.t_ht + self.t_lt + self.loss
    }
}

/// `C₀ = g₀² / (2κγ)`.
pub fn cooperativity(g0: f64, kappa: f64, gamma: f64) -> Result<f64> {
    let denom = 2.0 * kappa * gamma;
    if !(denom > 0.0) {
        return Err(Error::Config("cooperativity needs kappa > 0 and gamma > 0".into()));
    }
    Ok(g0 * g0 / denom)
}

/// Probability that an excitation decays into the cavity, `2C₀ / (1 + 2C₀)`.
pub fn emission_probability(c0: f64) -> f64 {
    2.0 * c0 / (2.0 * c0 + 1.0)
}

pub fn detection_chain(chain: &EfficiencyChain) -> f64 {
    chain.p_emit * chain.eta_mirror * chain.eps_mode * chain.eta_path * chain.eta_det
}

/// Probability of a photon in the single-mode fiber per excitation.
pub fn fiber_emission(p_emit: f64, eta_mirror: f64, eps_mode: f64) -> f64 {
    p_emit * eta_mirror * eps_mode
}

/// Fraction of cavity photons leaving through the HT mirror.
pub fn mirror_outcoupling(budget: &MirrorBudget) -> f64 {
    budget.t_ht / budget.total()
}

/// Resonant in-coupling through the HT mirror for perfect mode matching.
pub fn ideal_incoupling(budget: &MirrorBudget) -> f64 {
    let x = (budget.t_ht - budget.t_lt - budget.loss) / budget.total();
    1.0 - x * x
}

pub fn mode_matching(eta_in_exp: f64, eta_in_ideal: f64) -> f64 {
    eta_in_exp / eta_in_ideal
}

/// Coupling on the strongest transition from the effective coupling seen
/// when both σ transitions radiate into the cavity: `g_obs² = g_bar² (1 + 1/3)`.
pub fn g_bar_from_observed(g_obs: f64) -> f64 {
    (0.75f64).sqrt() * g_obs
}

pub fn observed_from_g_bar(g_bar: f64) -> f64 {
    g_bar / (0.75f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvertedChain {
    pub p_emit: f64,
    pub c0: f64,
    pub g_obs: f64,
}

/// Recover `p_emit`, `C₀` and `g_obs` from a measured detection probability
/// and the downstream factors `[eta_mirror, eps_mode, eta_path, eta_det]`.
pub fn invert_detection_chain(eta_total_exp: f64, factors: [f64; 4], kappa: f64, gamma: f64) -> Result<InvertedChain> {
    if factors.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::Config("chain factors must be > 0".into()));
    }
    if eta_total_exp < 0.0 {
        return Err(Error::Config("eta_total_exp must be >= 0".into()));
    }
    let p_emit = eta_total_exp / factors.iter().product::<f64>();
    if p_emit >= 1.0 {
        return Err(Error::Inconsistent(format!(
            "implied emission probability {p_emit} is not below 1"
        )));
    }
    let c0 = p_emit / (2.0 * (1.0 - p_emit));
    Ok(InvertedChain {
        p_emit,
        c0,
        g_obs: (2.0 * c0 * kappa * gamma).sqrt(),
    })
}

/// Probability that an excitation ends in ²S₁/₂ with the cavity present:
/// the cavity adds a decay channel of relative strength `2C₀`.
pub fn purcell_branching(c0: f64, branching: &BranchingParams) -> f64 {
    branching.b_s / (1.0 + 2.0 * c0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionFactors {
    pub branching: f64,
    pub clebsch: f64,
    pub prep: f64,
    pub incoupling: f64,
}

impl Default for AbsorptionFactors {
    fn default() -> Self {
        Self {
            branching: 0.91,
            clebsch: 0.75,
            prep: 0.9,
            incoupling: 0.8,
        }
    }
}

impl AbsorptionFactors {
    pub fn product(&self) -> f64 {
        self.branching * self.clebsch * self.prep * self.incoupling
    }
}

/// Expected absorption per incoming photon, `2C₀ × factors × reduction`.
pub fn absorption_chain(c0: f64, factors: &AbsorptionFactors, micromotion_reduction: f64) -> f64 {
    2.0 * c0 * factors.product() * micromotion_reduction
}

/// Field decay rate `κ = 2π · c / (4 L F)` (half the linewidth in angular units).
pub fn kappa_from_geometry(finesse: f64, length: f64) -> f64 {
    TAU * SPEED_OF_LIGHT / (4.0 * length * finesse)
}

/// Measured inputs of the efficiency budget that are not model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetInputs {
    /// Cooperativity deduced from the emission experiment.
    pub c0_measured: f64,
    /// Effective coupling deduced assuming a two-level emitter.
    #[serde(deserialize_with = "deserialize_rate")]
    pub g_obs_measured: f64,
    pub eta_total_exp: f64,
    pub eta_path: f64,
    pub eta_det: f64,
    pub eta_in_exp: f64,
    pub absorption: AbsorptionFactors,
}

impl Default for BudgetInputs {
    fn default() -> Self {
        Self {
            c0_measured: 0.032,
            g_obs_measured: two_pi_mhz(1.8),
            eta_total_exp: 0.0033,
            eta_path: 0.75,
            eta_det: 0.25,
            eta_in_exp: 0.80,
            absorption: AbsorptionFactors::default(),
        }
    }
}

/// Every derived quantity of the budget, as printed by `ioncav budget`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub cooperativity_from_g_obs: f64,
    pub cooperativity_from_g_bar: f64,
    pub p_emit: f64,
    pub eta_mirror: f64,
    pub ideal_incoupling: f64,
    pub eps_mode: f64,
    pub fiber_emission: f64,
    pub eta_total: f64,
    pub inverted: InvertedChain,
    pub g_bar_from_observed: f64,
    pub purcell_branching: f64,
    pub absorption_chain: f64,
    pub kappa_from_geometry: f64,
}

impl BudgetReport {
    pub fn new(params: &CavityQEDParams, branching: &BranchingParams, inputs: &BudgetInputs) -> Result<Self> {
        let mirrors = MirrorBudget {
            t_ht: params.t_ht,
            t_lt: params.t_lt,
            loss: params.loss,
            eta_in_exp: inputs.eta_in_exp,
        };
        mirrors.validate()?;
        let eta_mirror = mirror_outcoupling(&mirrors);
        let ideal = ideal_incoupling(&mirrors);
        let eps_mode = mode_matching(inputs.eta_in_exp, ideal);
        let p_emit = emission_probability(inputs.c0_measured);
        let chain = EfficiencyChain {
            p_emit,
            eta_mirror,
            eps_mode,
            eta_path: inputs.eta_path,
            eta_det: inputs.eta_det,
        };
        chain.validate()?;
        Ok(Self {
            cooperativity_from_g_obs: cooperativity(inputs.g_obs_measured, params.kappa, params.gamma)?,
            cooperativity_from_g_bar: cooperativity(observed_from_g_bar(params.g_bar), params.kappa, params.gamma)?,
            p_emit,
            eta_mirror,
            ideal_incoupling: ideal,
            eps_mode,
            fiber_emission: fiber_emission(p_emit, eta_mirror, eps_mode),
            eta_total: detection_chain(&chain),
            inverted: invert_detection_chain(
                inputs.eta_total_exp,
                [eta_mirror, eps_mode, inputs.eta_path, inputs.eta_det],
                params.kappa,
                params.gamma,
            )?,
            g_bar_from_observed: g_bar_from_observed(inputs.g_obs_measured),
            purcell_branching: purcell_branching(inputs.c0_measured, branching),
            absorption_chain: absorption_chain(inputs.c0_measured, &inputs.absorption, 1.0),
            kappa_from_geometry: kappa_from_geometry(params.finesse, params.length),
        })
    }
}
