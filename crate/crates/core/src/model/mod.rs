//! ¹⁷⁴Yb⁺ level structure, cavity-QED parameters, and assembly of the
//! Lindblad models for the emission and absorption experiments.
//!
//! Conventions: `H = Σ g_t (a_p† |d⟩⟨e| + h.c.)` in the frame rotating at the
//! (common) cavity/atom resonance, cavity jump operators `√(2κ f) a_p` with
//! mirror fractions `f`, and free-space decay operators `√(2γ b w) |x⟩⟨e|`.
//! Cavity couplings scale as `g_bar · amplitude / strongest amplitude`, so the
//! stretched σ transition couples with `g_bar` and the weak one with `g_bar/√3`.

mod levels;
mod params;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpace, Level, Mj, Mode, Operator};

pub use levels::{LevelScheme, Polarization, Transition, TransitionTable};
pub use params::{
    BranchingParams, CavityQEDParams, DriveParams, MicromotionParams, PreparationParams,
    LIFETIME_TOL, WAVEPLATE_OFFSET_DEG,
};

/// Which physical process a quantum jump represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelTag {
    MirrorHt(Mode),
    MirrorLt(Mode),
    IntracavityLoss(Mode),
    SpontToS,
    SpontToD(Mj),
}

impl ChannelTag {
    pub fn is_cavity(self) -> bool {
        matches!(
            self,
            ChannelTag::MirrorHt(_) | ChannelTag::MirrorLt(_) | ChannelTag::IntracavityLoss(_)
        )
    }

    pub fn cavity_mode(self) -> Option<Mode> {
        match self {
            ChannelTag::MirrorHt(m) | ChannelTag::MirrorLt(m) | ChannelTag::IntracavityLoss(m) => Some(m),
            _ => None,
        }
    }
}

impl fmt::Display for ChannelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelTag::MirrorHt(m) => write!(f, "mirror_HT_{m}"),
            ChannelTag::MirrorLt(m) => write!(f, "mirror_LT_{m}"),
            ChannelTag::IntracavityLoss(m) => write!(f, "intracavity_loss_{m}"),
            ChannelTag::SpontToS => f.write_str("spont_to_S"),
            ChannelTag::SpontToD(m) => write!(f, "spont_to_D({m})"),
        }
    }
}

impl FromStr for ChannelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mode = |rest: &str| match rest {
            "sigma_plus" => Ok(Mode::SigmaPlus),
            "sigma_minus" => Ok(Mode::SigmaMinus),
            _ => Err(Error::Config(format!("unknown channel tag {s:?}"))),
        };
        if let Some(r) = s.strip_prefix("mirror_HT_") {
            return Ok(ChannelTag::MirrorHt(mode(r)?));
        }
        if let Some(r) = s.strip_prefix("mirror_LT_") {
            return Ok(ChannelTag::MirrorLt(mode(r)?));
        }
        if let Some(r) = s.strip_prefix("intracavity_loss_") {
            return Ok(ChannelTag::IntracavityLoss(mode(r)?));
        }
        if s == "spont_to_S" {
            return Ok(ChannelTag::SpontToS);
        }
        if let Some(m) = s.strip_prefix("spont_to_D(").and_then(|r| r.strip_suffix(')')) {
            if let Level::D(mj) = format!("D{m}").parse::<Level>()? {
                return Ok(ChannelTag::SpontToD(mj));
            }
        }
        Err(Error::Config(format!("unknown channel tag {s:?}")))
    }
}

impl Serialize for ChannelTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ChannelTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// One collapse channel: jump operator `√rate · jump_ops[jump]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseChannel {
    pub tag: ChannelTag,
    pub rate: f64,
    pub jump: usize,
}

/// Time profile multiplying a Hamiltonian term.
///
/// This is the whole time-dependence contract: the solver evaluates
/// `H(t) = H₀ + Σ f_k(t) H_k`, treats each `f_k` as smooth between the
/// profile's breakpoints, and never steps over a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// 1 on `[start, end)`, 0 elsewhere.
    Window { start: f64, end: f64 },
    /// `amplitude · cos(omega · t)`.
    Cosine { amplitude: f64, omega: f64 },
}

impl Profile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Profile::Window { start, end } => {
                if t >= start && t < end {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::Cosine { amplitude, omega } => amplitude * (omega * t).cos(),
        }
    }

    /// Value inside an integration segment whose midpoint is `segment_mid`.
    /// Windows are constant on a segment between breakpoints, so evaluating
    /// them at the midpoint avoids picking up the jump at the segment edges.
    pub fn value_on(&self, t: f64, segment_mid: f64) -> f64 {
        match self {
            Profile::Window { .. } => self.value(segment_mid),
            Profile::Cosine { .. } => self.value(t),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Profile::Window { start, end } => vec![start, end],
            Profile::Cosine { .. } => Vec::new(),
        }
    }

    /// Largest step that still resolves the profile (20 steps per period).
    pub fn max_step(&self) -> Option<f64> {
        match *self {
            Profile::Window { .. } => None,
            Profile::Cosine { omega, .. } => Some(std::f64::consts::TAU / omega / 20.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeDependentTerm {
    pub op: Operator,
    pub profile: Profile,
}

#[derive(Debug, Clone)]
pub struct LindbladModel {
    space: HilbertSpace,
    hamiltonian: Operator,
    terms: Vec<TimeDependentTerm>,
    jump_ops: Vec<Operator>,
    channels: Vec<CollapseChannel>,
    terminal: Vec<ChannelTag>,
    warnings: Vec<String>,
    // derived
    h_eff: Operator,
    grouped: Vec<(usize, f64)>,
}

fn hermitian_tol(op: &Operator) -> f64 {
    1e-12 * op.max_abs().max(1.0)
}

impl LindbladModel {
    /// Assemble a model. Rejects a non-Hermitian Hamiltonian or any
    /// time-dependent term, negative rates, and dimension mismatches.
    pub fn new(
        space: HilbertSpace,
        hamiltonian: Operator,
        jump_ops: Vec<Operator>,
        channels: Vec<CollapseChannel>,
    ) -> Result<Self> {
        let dim = space.dim();
        if hamiltonian.dim() != dim || jump_ops.iter().any(|j| j.dim() != dim) {
            return Err(Error::Config("operator dimension does not match the space".into()));
        }
        if !hamiltonian.is_hermitian(hermitian_tol(&hamiltonian)) {
            return Err(Error::Config("Hamiltonian is not Hermitian".into()));
        }
        for c in &channels {
            if c.jump >= jump_ops.len() || !(c.rate >= 0.0) {
                return Err(Error::Config(format!("invalid collapse channel {}", c.tag)));
            }
        }
        let mut m = Self {
            space,
            h_eff: hamiltonian.clone(),
            hamiltonian,
            terms: Vec::new(),
            jump_ops,
            channels,
            terminal: Vec::new(),
            warnings: Vec::new(),
            grouped: Vec::new(),
        };
        m.refresh();
        Ok(m)
    }

    fn refresh(&mut self) {
        let mut grouped: Vec<(usize, f64)> = Vec::new();
        for c in &self.channels {
            match grouped.iter_mut().find(|g| g.0 == c.jump) {
                Some(g) => g.1 += c.rate,
                None => grouped.push((c.jump, c.rate)),
            }
        }
        grouped.retain(|g| g.1 > 0.0);
        let mut decay = Operator::zeros(self.space.dim());
        for &(j, rate) in &grouped {
            let l = &self.jump_ops[j];
            decay = &decay + &(&(&l.adjoint() * l) * rate);
        }
        self.h_eff = &self.hamiltonian - &decay.scale(Complex64::new(0.0, 0.5));
        self.grouped = grouped;
    }

    pub fn with_term(mut self, term: TimeDependentTerm) -> Result<Self> {
        if term.op.dim() != self.space.dim() {
            return Err(Error::Config("term dimension does not match the space".into()));
        }
        if !term.op.is_hermitian(hermitian_tol(&term.op)) {
            return Err(Error::Config("time-dependent term is not Hermitian".into()));
        }
        self.terms.push(term);
        Ok(self)
    }

    /// Jumps on these channels end a trajectory (the ion has left the
    /// system of interest).
    pub fn with_terminal(mut self, tags: &[ChannelTag]) -> Self {
        self.terminal.extend_from_slice(tags);
        self
    }

    pub fn push_warning(&mut self, w: String) {
        self.warnings.push(w);
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn hamiltonian_at(&self, t: f64) -> Operator {
        self.terms.iter().fold(self.hamiltonian.clone(), |h, term| {
            let f = term.profile.value(t);
            if f == 0.0 {
                h
            } else {
                &h + &(&term.op * f)
            }
        })
    }

    pub fn terms(&self) -> &[TimeDependentTerm] {
        &self.terms
    }

    pub fn is_time_dependent(&self) -> bool {
        !self.terms.is_empty()
    }

    pub fn channels(&self) -> &[CollapseChannel] {
        &self.channels
    }

    pub fn jump_op(&self, idx: usize) -> &Operator {
        &self.jump_ops[idx]
    }

    pub fn is_terminal(&self, tag: ChannelTag) -> bool {
        self.terminal.contains(&tag)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `H - (i/2) Σ rate L†L` without the time-dependent terms.
    pub fn h_eff_static(&self) -> &Operator {
        &self.h_eff
    }

    /// Channels sharing a jump operator merged: `(jump index, total rate)`.
    pub fn grouped_jumps(&self) -> &[(usize, f64)] {
        &self.grouped
    }

    /// Collapse operators `√rate · L` for every channel.
    pub fn collapse_operators(&self) -> Vec<(ChannelTag, Operator)> {
        self.channels
            .iter()
            .map(|c| (c.tag, &self.jump_ops[c.jump] * c.rate.sqrt()))
            .collect()
    }

    /// Sum of the rates of all channels matching `pred`.
    pub fn rate_sum(&self, pred: impl Fn(ChannelTag) -> bool) -> f64 {
        self.channels.iter().filter(|c| pred(c.tag)).map(|c| c.rate).sum()
    }

    /// Inverse of the largest channel rate.
    pub fn shortest_decay_time(&self) -> f64 {
        let max_rate = self.grouped.iter().map(|g| g.1).fold(0.0, f64::max);
        if max_rate > 0.0 {
            1.0 / max_rate
        } else {
            f64::INFINITY
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.terms.iter().flat_map(|t| t.profile.breakpoints()).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    pub fn max_step_hint(&self) -> Option<f64> {
        self.terms
            .iter()
            .filter_map(|t| t.profile.max_step())
            .reduce(f64::min)
    }
}

fn add_cavity_couplings(
    space: &HilbertSpace,
    params: &CavityQEDParams,
    table: &TransitionTable,
    h: &mut Vec<(usize, usize, Complex64)>,
) -> Result<()> {
    let strongest = table.strongest_cavity_amplitude();
    for t in &table.entries {
        let Some(mode) = t.polarization.cavity_mode() else {
            continue;
        };
        let g = params.g_bar * t.amplitude / strongest;
        if g == 0.0 {
            continue;
        }
        let lower = space.atomic_projector(Level::E(t.excited), Level::D(t.lower))?;
        let a = space.annihilation(mode);
        let term = &a.adjoint() * &lower;
        let term = &term * g;
        h.extend(term.iter());
        h.extend(term.adjoint().iter());
    }
    Ok(())
}

fn collapse_set(
    space: &HilbertSpace,
    params: &CavityQEDParams,
    branching: &BranchingParams,
    scheme: &LevelScheme,
    table: &TransitionTable,
) -> Result<(Vec<Operator>, Vec<CollapseChannel>)> {
    let mut ops = Vec::new();
    let mut channels = Vec::new();
    let (f_ht, f_lt, f_loss) = params.mirror_split();
    let two_kappa = 2.0 * params.kappa;
    for mode in Mode::BOTH {
        ops.push(space.annihilation(mode));
        let j = ops.len() - 1;
        for (tag, f) in [
            (ChannelTag::MirrorHt(mode), f_ht),
            (ChannelTag::MirrorLt(mode), f_lt),
            (ChannelTag::IntracavityLoss(mode), f_loss),
        ] {
            channels.push(CollapseChannel {
                tag,
                rate: two_kappa * f,
                jump: j,
            });
        }
    }
    let two_gamma = 2.0 * params.gamma;
    for &e in &scheme.e_sublevels {
        ops.push(space.atomic_projector(Level::E(e), Level::S)?);
        channels.push(CollapseChannel {
            tag: ChannelTag::SpontToS,
            rate: two_gamma * branching.b_s,
            jump: ops.len() - 1,
        });
        for t in table.from_excited(e) {
            ops.push(space.atomic_projector(Level::E(e), Level::D(t.lower))?);
            channels.push(CollapseChannel {
                tag: ChannelTag::SpontToD(t.lower),
                rate: two_gamma * branching.b_d * t.amplitude * t.amplitude,
                jump: ops.len() - 1,
            });
        }
    }
    Ok((ops, channels))
}

fn zeeman_triplets(space: &HilbertSpace, scheme: &LevelScheme) -> Result<Vec<(usize, usize, Complex64)>> {
    let mut h = Vec::new();
    for level in scheme.levels() {
        let shift = scheme.zeeman_shift(level);
        if shift != 0.0 {
            h.extend(space.atomic_projector(level, level)?.scale(Complex64::new(shift, 0.0)).iter());
        }
    }
    Ok(h)
}

fn excited_projector(space: &HilbertSpace, scheme: &LevelScheme) -> Result<Operator> {
    let mut p = Operator::zeros(space.dim());
    for e in scheme.e_levels() {
        p = &p + &space.atomic_projector(e, e)?;
    }
    Ok(p)
}

fn micromotion_term(space: &HilbertSpace, scheme: &LevelScheme, mm: &MicromotionParams) -> Result<Option<TimeDependentTerm>> {
    if !mm.is_active() {
        return Ok(None);
    }
    if !(mm.omega_rf > 0.0) || mm.beta < 0.0 {
        return Err(Error::Config("micromotion needs omega_rf > 0 and beta >= 0".into()));
    }
    Ok(Some(TimeDependentTerm {
        op: excited_projector(space, scheme)?,
        profile: Profile::Cosine {
            amplitude: mm.beta * mm.omega_rf,
            omega: mm.omega_rf,
        },
    }))
}

fn check_inputs(
    params: &CavityQEDParams,
    branching: &BranchingParams,
    scheme: &LevelScheme,
    table: &TransitionTable,
) -> Result<()> {
    params.validate()?;
    branching.validate()?;
    scheme.validate()?;
    table.validate(scheme)
}

/// Ion ⊗ two-mode cavity model for spontaneous emission into the cavity.
///
/// π transitions only decay into free space; the S manifold is a single
/// absorbing level and a jump into it terminates a trajectory.
pub fn build_emission_model(
    params: &CavityQEDParams,
    branching: &BranchingParams,
    scheme: &LevelScheme,
    table: &TransitionTable,
    micromotion: &MicromotionParams,
    n_max: usize,
) -> Result<LindbladModel> {
    check_inputs(params, branching, scheme, table)?;
    if n_max < 1 {
        return Err(Error::Config("emission model needs n_max >= 1".into()));
    }
    let space = HilbertSpace::new(scheme.levels(), n_max)?;
    let mut h = zeeman_triplets(&space, scheme)?;
    add_cavity_couplings(&space, params, table, &mut h)?;
    let hamiltonian = Operator::from_triplets(space.dim(), h);
    let (ops, channels) = collapse_set(&space, params, branching, scheme, table)?;
    let mut model = LindbladModel::new(space, hamiltonian, ops, channels)?.with_terminal(&[ChannelTag::SpontToS]);
    if let Some(term) = micromotion_term(model.space(), scheme, micromotion)? {
        model = model.with_term(term)?;
    }
    Ok(model)
}

/// Emission model plus a coherent probe of strength `drive.amplitude`,
/// split between the σ± modes according to the waveplate angle.
///
/// Adds a warning when the empty-cavity photon number exceeds 0.5, where the
/// weak-drive picture (and a small Fock cutoff) stops being adequate.
pub fn build_absorption_model(
    params: &CavityQEDParams,
    branching: &BranchingParams,
    scheme: &LevelScheme,
    table: &TransitionTable,
    drive: &DriveParams,
    micromotion: &MicromotionParams,
    n_max: usize,
) -> Result<LindbladModel> {
    check_inputs(params, branching, scheme, table)?;
    if !(drive.amplitude >= 0.0) {
        return Err(Error::Config("drive amplitude must be >= 0".into()));
    }
    if n_max < 1 {
        return Err(Error::Config("absorption model needs n_max >= 1".into()));
    }
    let space = HilbertSpace::new(scheme.levels(), n_max)?;
    let mut h = zeeman_triplets(&space, scheme)?;
    add_cavity_couplings(&space, params, table, &mut h)?;
    let (c_plus, c_minus) = drive.polarization_components();
    for (mode, c) in [(Mode::SigmaPlus, c_plus), (Mode::SigmaMinus, c_minus)] {
        let a = space.annihilation(mode);
        let x = &a + &a.adjoint();
        h.extend((&x * (drive.amplitude * c)).iter());
    }
    if drive.detuning != 0.0 {
        // frame rotating at the probe frequency
        let n = &(&space.number(Mode::SigmaPlus) + &space.number(Mode::SigmaMinus)) + &excited_projector(&space, scheme)?;
        h.extend((&n * (-drive.detuning)).iter());
    }
    let hamiltonian = Operator::from_triplets(space.dim(), h);
    let (ops, channels) = collapse_set(&space, params, branching, scheme, table)?;
    let mut model = LindbladModel::new(space, hamiltonian, ops, channels)?.with_terminal(&[ChannelTag::SpontToS]);
    if let Some(term) = micromotion_term(model.space(), scheme, micromotion)? {
        model = model.with_term(term)?;
    }
    let n_empty = drive.empty_cavity_photons(params.kappa);
    if n_empty > 0.5 {
        model.push_warning(format!(
            "drive too strong: empty-cavity photon number {n_empty:.3} exceeds 0.5"
        ));
    }
    Ok(model)
}

/// Square excitation pulse on `[0, duration)` resonant with D(−3/2) ↔ E(−1/2).
///
/// The laser has the polarization of that target transition, so it also
/// drives every other table entry of the same polarization, with Rabi
/// frequency scaled by the amplitude ratio. `rabi_rate` defaults to
/// `π / duration` (a π pulse on the target).
pub fn excitation_pulse(
    space: &HilbertSpace,
    table: &TransitionTable,
    duration: f64,
    rabi_rate: Option<f64>,
) -> Result<TimeDependentTerm> {
    if !(duration > 0.0) {
        return Err(Error::Config("pulse duration must be > 0".into()));
    }
    let target = table
        .find(Mj::M1_2, Mj::M3_2)
        .ok_or_else(|| Error::Config("transition table lacks D(-3/2) -> E(-1/2)".into()))?;
    let omega = rabi_rate.unwrap_or(std::f64::consts::PI / duration);
    let mut t = Vec::new();
    for tr in table.entries.iter().filter(|x| x.polarization == target.polarization) {
        let (Ok(_), Ok(_)) = (space.level_index(Level::E(tr.excited)), space.level_index(Level::D(tr.lower))) else {
            continue;
        };
        let up = space.atomic_projector(Level::D(tr.lower), Level::E(tr.excited))?;
        let coupling = 0.5 * omega * tr.amplitude / target.amplitude;
        t.extend((&up * coupling).iter());
        t.extend((&up.adjoint() * coupling).iter());
    }
    Ok(TimeDependentTerm {
        op: Operator::from_triplets(space.dim(), t),
        profile: Profile::Window { start: 0.0, end: duration },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emission(g_bar: f64) -> LindbladModel {
        let p = CavityQEDParams {
            g_bar,
            ..Default::default()
        };
        build_emission_model(
            &p,
            &BranchingParams::default(),
            &LevelScheme::default(),
            &TransitionTable::default(),
            &MicromotionParams::default(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn coupling_ratio_is_root_three() {
        let m = emission(1.0e7);
        let s = m.space();
        let e = s.index(crate::hilbert::BasisLabel { level: Level::E(Mj::M1_2), fock_plus: 0, fock_minus: 0 }).unwrap();
        let plus = s.index(crate::hilbert::BasisLabel { level: Level::D(Mj::M3_2), fock_plus: 1, fock_minus: 0 }).unwrap();
        let minus = s.index(crate::hilbert::BasisLabel { level: Level::D(Mj::P1_2), fock_plus: 0, fock_minus: 1 }).unwrap();
        let h = m.hamiltonian();
        assert!((h.get(plus, e).re - 1.0e7).abs() < 1e-6);
        assert!((h.get(plus, e).re / h.get(minus, e).re - 3f64.sqrt()).abs() < 1e-12);
        // pi transition does not touch the cavity
        let pi = s.index(crate::hilbert::BasisLabel { level: Level::D(Mj::M1_2), fock_plus: 1, fock_minus: 0 }).unwrap();
        assert_eq!(h.get(pi, e), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn static_without_micromotion() {
        assert!(!emission(1.0e7).is_time_dependent());
        let p = CavityQEDParams::default();
        let m = build_emission_model(
            &p,
            &BranchingParams::default(),
            &LevelScheme::default(),
            &TransitionTable::default(),
            &MicromotionParams { beta: 0.5, ..Default::default() },
            1,
        )
        .unwrap();
        assert!(m.is_time_dependent());
        let period = MicromotionParams::default().period();
        assert!((m.max_step_hint().unwrap() - period / 20.0).abs() < 1e-20);
    }

    #[test]
    fn cavity_rates_sum_to_two_kappa_per_mode() {
        let m = emission(1.0e7);
        let p = CavityQEDParams::default();
        for mode in Mode::BOTH {
            let r = m.rate_sum(|t| t.cavity_mode() == Some(mode));
            assert!((r / (2.0 * p.kappa) - 1.0).abs() < 1e-14);
        }
        let ht = m.rate_sum(|t| t == ChannelTag::MirrorHt(Mode::SigmaPlus));
        let lt = m.rate_sum(|t| t == ChannelTag::MirrorLt(Mode::SigmaPlus));
        let loss = m.rate_sum(|t| t == ChannelTag::IntracavityLoss(Mode::SigmaPlus));
        assert!((ht / lt - 10.0).abs() < 1e-12 && (loss / lt - 20.0).abs() < 1e-12);
    }

    #[test]
    fn free_space_decay_totals_two_gamma() {
        let m = emission(1.0e7);
        let gamma = CavityQEDParams::default().gamma;
        for e in [Mj::M1_2, Mj::P1_2] {
            let total: f64 = m
                .channels()
                .iter()
                .filter(|c| !c.tag.is_cavity())
                .filter(|c| {
                    let l = m.jump_op(c.jump);
                    let e_idx = m.space().index(crate::hilbert::BasisLabel { level: Level::E(e), fock_plus: 0, fock_minus: 0 }).unwrap();
                    l.iter().any(|(_, col, _)| col == e_idx)
                })
                .map(|c| c.rate)
                .sum();
            assert!((total / (2.0 * gamma) - 1.0).abs() < 1e-12, "{e}: {total}");
        }
    }

    #[test]
    fn zero_coupling_is_allowed_negative_is_not() {
        let m = emission(0.0);
        assert_eq!(m.hamiltonian().nnz(), 0);
        let p = CavityQEDParams { g_bar: -1.0, ..Default::default() };
        assert!(build_emission_model(
            &p,
            &BranchingParams::default(),
            &LevelScheme::default(),
            &TransitionTable::default(),
            &MicromotionParams::default(),
            1
        )
        .is_err());
    }

    #[test]
    fn strong_drive_warns() {
        let p = CavityQEDParams::default();
        let drive = DriveParams { amplitude: p.kappa, detuning: 0.0, waveplate_angle: 5.0 };
        let m = build_absorption_model(
            &p,
            &BranchingParams::default(),
            &LevelScheme::default(),
            &TransitionTable::default(),
            &drive,
            &MicromotionParams::default(),
            2,
        )
        .unwrap();
        assert_eq!(m.warnings().len(), 1);
    }

    #[test]
    fn channel_tags_round_trip() {
        for tag in [
            ChannelTag::MirrorHt(Mode::SigmaPlus),
            ChannelTag::MirrorLt(Mode::SigmaMinus),
            ChannelTag::IntracavityLoss(Mode::SigmaPlus),
            ChannelTag::SpontToS,
            ChannelTag::SpontToD(Mj::P3_2),
        ] {
            assert_eq!(tag.to_string().parse::<ChannelTag>().unwrap(), tag);
        }
    }

    #[test]
    fn non_hermitian_hamiltonian_is_rejected() {
        let space = HilbertSpace::new(vec![Level::S], 1).unwrap();
        let a = space.annihilation(Mode::SigmaPlus);
        assert!(LindbladModel::new(space, a, vec![], vec![]).is_err());
    }

    #[test]
    fn pulse_couples_same_polarization_only() {
        let space = HilbertSpace::new(LevelScheme::default().levels(), 1).unwrap();
        let term = excitation_pulse(&space, &TransitionTable::default(), 2.7e-9, None).unwrap();
        let idx = |l| space.index(crate::hilbert::BasisLabel { level: l, fock_plus: 0, fock_minus: 0 }).unwrap();
        let omega = std::f64::consts::PI / 2.7e-9;
        let strong = term.op.get(idx(Level::E(Mj::M1_2)), idx(Level::D(Mj::M3_2))).re;
        let weak = term.op.get(idx(Level::E(Mj::P1_2)), idx(Level::D(Mj::M1_2))).re;
        assert!((strong - omega / 2.0).abs() / strong < 1e-14);
        assert!((strong / weak - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(term.op.get(idx(Level::E(Mj::M1_2)), idx(Level::D(Mj::P1_2))), Complex64::new(0.0, 0.0));
    }
}
