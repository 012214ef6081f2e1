//! The 18-level ⁴⁰Ca⁺ ion coupled to two orthogonally polarised cavity modes.
//!
//! The frame rotates at the first drive frequency and at the cavity
//! frequency. In it, S1/2(−1/2) has zero energy, P3/2(m) sits at −Δ plus its
//! Zeeman offset from m = −3/2, and D5/2(m) sits at its Zeeman offset from
//! m = −5/2 plus the Raman offset δ_R. Photon number does not enter the
//! diagonal: the cavity is resonant with the Raman transition to D5/2(−5/2).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::lindblad::{Jump, LindbladProblem, OscillatingTerm};
use crate::atomic::{dipole_cg, half, EmitterModel, Level, SchemeRates, Term};
use crate::cavity::{coupling_strength, CavityModel, CouplingContext};
use crate::consts::{khz, mhz};
use crate::linalg::CMat;
use crate::{Error, Result, C64};

/// Cavity polarisation modes. H is parallel to the magnetic field (π light),
/// V is perpendicular to it and to the cavity axis (σ± light).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    H,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub level: Level,
    pub n_h: usize,
    pub n_v: usize,
}

impl BasisState {
    pub fn photons(&self, mode: Mode) -> usize {
        match mode {
            Mode::H => self.n_h,
            Mode::V => self.n_v,
        }
    }
}

/// Electronic ⊗ Fock_H ⊗ Fock_V product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub n_max: usize,
    pub levels: Vec<Level>,
    pub states: Vec<BasisState>,
}

impl Basis {
    pub fn new(levels: Vec<Level>, n_max: usize) -> Self {
        let mut states = Vec::with_capacity(levels.len() * (n_max + 1) * (n_max + 1));
        for &level in &levels {
            for n_h in 0..=n_max {
                for n_v in 0..=n_max {
                    states.push(BasisState { level, n_h, n_v });
                }
            }
        }
        Basis { n_max, levels, states }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index(&self, level: Level, n_h: usize, n_v: usize) -> Option<usize> {
        if n_h > self.n_max || n_v > self.n_max {
            return None;
        }
        let li = self.levels.iter().position(|&l| l == level)?;
        let f = self.n_max + 1;
        Some(li * f * f + n_h * f + n_v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarization {
    #[default]
    SigmaMinus,
    SigmaPlus,
    Pi,
}

/// Orientation of the drive relative to the quantisation axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DriveGeometry {
    pub polarization: Polarization,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Photon-number cutoff per mode.
    pub n_max: usize,
    /// Dephasing rate of the D5/2 manifold from cavity-lock jitter (rad/s).
    pub jitter_rate: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { n_max: 1, jitter_rate: khz(10.0) }
    }
}

/// One frequency component of the 854-nm-detuned Raman drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveComponent {
    /// Rabi frequency Ω on S1/2(−1/2) ↔ P3/2(−3/2) (rad/s).
    pub rabi: f64,
    /// Detuning Δ from the bare S1/2(−1/2) ↔ P3/2(−3/2) resonance (rad/s).
    pub detuning: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveConfig {
    pub components: Vec<DriveComponent>,
    /// Drive on-time from t = 0 (s); `None` keeps the drive on for the whole run.
    pub pulse_duration: Option<f64>,
    /// Energy offset of D5/2 in the rotating frame (rad/s). `None` selects the
    /// light-shift-compensated Raman resonance.
    pub raman_offset: Option<f64>,
    pub polarization: Polarization,
}

impl DriveConfig {
    /// Default detuning Δ = −2π × 403 MHz.
    pub fn default_detuning() -> f64 {
        mhz(-403.0)
    }

    pub fn monochromatic(rabi: f64, detuning: f64) -> Self {
        DriveConfig {
            components: vec![DriveComponent { rabi, detuning, phase: 0.0 }],
            pulse_duration: None,
            raman_offset: None,
            polarization: Polarization::SigmaMinus,
        }
    }

    /// Two components whose detunings differ by the D5/2 Zeeman splitting `z`,
    /// driving Raman transitions to D5/2(−5/2) with a V photon and to
    /// D5/2(−3/2) with an H photon.
    pub fn bichromatic(rabi1: f64, rabi2: f64, detuning1: f64, z: f64, phase: f64) -> Self {
        DriveConfig {
            components: vec![
                DriveComponent { rabi: rabi1, detuning: detuning1, phase: 0.0 },
                DriveComponent { rabi: rabi2, detuning: detuning1 + z, phase },
            ],
            pulse_duration: None,
            raman_offset: None,
            polarization: Polarization::SigmaMinus,
        }
    }

    pub fn total_rabi(&self) -> f64 {
        self.components.iter().map(|c| c.rabi * c.rabi).sum::<f64>().sqrt()
    }

    pub fn with_pulse_duration(mut self, t: f64) -> Self {
        self.pulse_duration = Some(t);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("drive.components", "at least one component is required"));
        }
        if self.components.len() > 2 {
            return Err(Error::invalid("drive.components", "at most two components are supported"));
        }
        for c in &self.components {
            if !(c.rabi >= 0.0 && c.rabi.is_finite()) {
                return Err(Error::invalid("drive.rabi", "must be non-negative"));
            }
            if !(c.detuning != 0.0 && c.detuning.is_finite()) {
                return Err(Error::invalid("drive.detuning", "must be nonzero and finite"));
            }
        }
        if let Some(t) = self.pulse_duration {
            if !(t >= 0.0) {
                return Err(Error::invalid("drive.pulse_duration", "must be non-negative"));
            }
        }
        if self.polarization != Polarization::SigmaMinus {
            return Err(Error::invalid("drive.polarization", "only σ⁻ is consistent with the trap geometry"));
        }
        Ok(())
    }
}

/// The initial state |u⟩ = S1/2(−1/2).
pub const U_LEVEL: Level = Level::new(Term::S12, half(-1));
/// The excited state |e⟩ = P3/2(−3/2).
pub const E_LEVEL: Level = Level::new(Term::P32, half(-3));
/// |g₁⟩ = D5/2(−5/2), reached with a V photon.
pub const G1_LEVEL: Level = Level::new(Term::D52, half(-5));
/// |g₂⟩ = D5/2(−3/2), reached with an H photon.
pub const G2_LEVEL: Level = Level::new(Term::D52, half(-3));

#[derive(Debug, Clone)]
pub struct NamedJump {
    pub label: String,
    pub op: CMat,
    /// True for spontaneous decay into S1/2, the channel that re-excites.
    pub into_s12: bool,
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    pub emitter: EmitterModel,
    pub cavity: CavityModel,
    /// Coupling of the V-photon scheme, for reference.
    pub coupling: CouplingContext,
    /// Coupling of a unit-strength P3/2 → D5/2 dipole to a mode with ζ = 1 (rad/s).
    pub g0: f64,
    pub basis: Basis,
    pub options: BuildOptions,
    /// Static Hamiltonian without the drive and without the Raman offset.
    pub h_bare: CMat,
    pub collapse_ops: Vec<NamedJump>,
}

fn zeeman_reference(term: Term) -> Option<Level> {
    match term {
        Term::S12 => Some(U_LEVEL),
        Term::P32 => Some(E_LEVEL),
        Term::D52 => Some(G1_LEVEL),
        _ => None,
    }
}

pub fn build_system(emitter: &EmitterModel, cavity: &CavityModel, geometry: DriveGeometry, options: BuildOptions) -> Result<SystemModel> {
    if options.n_max < 1 {
        return Err(Error::invalid("n_max", "photon cutoff must be at least 1"));
    }
    if geometry.polarization != Polarization::SigmaMinus {
        return Err(Error::invalid("drive.polarization", "only σ⁻ is consistent with the trap geometry"));
    }
    if !(options.jitter_rate >= 0.0) {
        return Err(Error::invalid("jitter_rate", "must be non-negative"));
    }
    let scheme = SchemeRates::v_photon(emitter);
    let coupling = CouplingContext::new(cavity, &scheme, 1)?;
    let g0 = coupling_strength(emitter.gamma_total * emitter.branching.d52, cavity.geometry.length, cavity.a_tilde(), 1.0, 1)?;
    let basis = Basis::new(emitter.levels().collect(), options.n_max);
    let dim = basis.dim();

    let mut h = CMat::zeros(dim);
    for (i, s) in basis.states.iter().enumerate() {
        let z = emitter.zeeman_energy(s.level);
        let offset = zeeman_reference(s.level.term).map_or(0.0, |r| emitter.zeeman_energy(r));
        h[(i, i)] = C64::new(z - offset, 0.0);
    }
    let zeta_v = core::f64::consts::FRAC_1_SQRT_2;
    for me in Term::P32.sublevels() {
        let upper = Level::new(Term::P32, me);
        for mg in Term::D52.sublevels() {
            let lower = Level::new(Term::D52, mg);
            let q2 = me.twice() - mg.twice();
            if q2.abs() > 2 {
                continue;
            }
            let cg = dipole_cg(upper, lower);
            let (mode, zeta) = if q2 == 0 { (Mode::H, 1.0) } else { (Mode::V, zeta_v) };
            let g = g0 * cg * zeta;
            for (i, s) in basis.states.iter().enumerate() {
                if s.level != upper || s.photons(mode) >= options.n_max {
                    continue;
                }
                let (nh, nv) = match mode {
                    Mode::H => (s.n_h + 1, s.n_v),
                    Mode::V => (s.n_h, s.n_v + 1),
                };
                let j = basis.index(lower, nh, nv).expect("target inside cutoff");
                let amp = C64::new(g * (s.photons(mode) as f64 + 1.0).sqrt(), 0.0);
                h[(j, i)] += amp;
                h[(i, j)] += amp;
            }
        }
    }

    let mut jumps = Vec::new();
    for lower_term in [Term::S12, Term::D32, Term::D52] {
        for q in -1..=1 {
            let mut op = CMat::zeros(dim);
            let mut any = false;
            for c in emitter.channels.iter().filter(|c| c.lower.term == lower_term && c.q == q) {
                // Amplitude convention: population decays at twice the listed rate.
                let amp = (2.0 * c.rate).sqrt() * c.amplitude.signum();
                for (i, s) in basis.states.iter().enumerate() {
                    if s.level == c.upper {
                        let j = basis.index(c.lower, s.n_h, s.n_v).unwrap();
                        op[(j, i)] += C64::new(amp, 0.0);
                        any = true;
                    }
                }
            }
            if any {
                jumps.push(NamedJump { label: format!("P3/2->{lower_term} q={q}"), op, into_s12: lower_term == Term::S12 });
            }
        }
    }
    for (label, rate) in [("ext", cavity.rates.kappa_ext), ("int", cavity.rates.kappa_in)] {
        for mode in [Mode::H, Mode::V] {
            let mut op = CMat::zeros(dim);
            for (i, s) in basis.states.iter().enumerate() {
                let n = s.photons(mode);
                if n == 0 {
                    continue;
                }
                let (nh, nv) = match mode {
                    Mode::H => (n - 1, s.n_v),
                    Mode::V => (s.n_h, n - 1),
                };
                let j = basis.index(s.level, nh, nv).unwrap();
                op[(j, i)] = C64::new((2.0 * rate * n as f64).sqrt(), 0.0);
            }
            jumps.push(NamedJump { label: format!("cavity {label} {mode:?}"), op, into_s12: false });
        }
    }
    if options.jitter_rate > 0.0 {
        let mut op = CMat::zeros(dim);
        let amp = (2.0 * options.jitter_rate).sqrt();
        for (i, s) in basis.states.iter().enumerate() {
            if s.level.term == Term::D52 {
                op[(i, i)] = C64::new(amp, 0.0);
            }
        }
        jumps.push(NamedJump { label: "D5/2 dephasing".into(), op, into_s12: false });
    }

    Ok(SystemModel { emitter: emitter.clone(), cavity: *cavity, coupling, g0, basis, options, h_bare: h, collapse_ops: jumps })
}

impl SystemModel {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Relative σ⁻ drive strength of S1/2(m) → P3/2(m−1), normalised to |u⟩ → |e⟩.
    fn drive_weight(&self, m_s: crate::atomic::HalfInt) -> f64 {
        let up = Level::new(Term::P32, crate::atomic::HalfInt::from_twice(m_s.twice() - 2));
        dipole_cg(up, Level::new(Term::S12, m_s)) / dipole_cg(E_LEVEL, U_LEVEL)
    }

    /// σ⁻ coupling operator Σ_m w_m |P3/2(m−1)⟩⟨S1/2(m)| ⊗ 1.
    pub fn drive_operator(&self) -> CMat {
        let mut op = CMat::zeros(self.dim());
        for ms in Term::S12.sublevels() {
            let w = self.drive_weight(ms);
            let up = Level::new(Term::P32, crate::atomic::HalfInt::from_twice(ms.twice() - 2));
            for (i, s) in self.basis.states.iter().enumerate() {
                if s.level == Level::new(Term::S12, ms) {
                    let j = self.basis.index(up, s.n_h, s.n_v).unwrap();
                    op[(j, i)] = C64::new(w, 0.0);
                }
            }
        }
        op
    }

    /// Cavity coupling of |g₁⟩ with a V photon to |e⟩ (rad/s).
    pub fn g_v(&self) -> f64 {
        self.g0 * dipole_cg(E_LEVEL, G1_LEVEL) * core::f64::consts::FRAC_1_SQRT_2
    }

    /// Cavity coupling of |g₂⟩ with an H photon to |e⟩ (rad/s).
    pub fn g_h(&self) -> f64 {
        self.g0 * dipole_cg(E_LEVEL, G2_LEVEL)
    }

    /// Raman offset that places |g₁, 1_V⟩ on the light-shifted resonance with |u⟩:
    /// δ_R = Σ Ω_i²/(4Δ_i) − g_V²/Δ₁.
    pub fn compensated_raman_offset(&self, drive: &DriveConfig) -> f64 {
        let stark: f64 = drive.components.iter().map(|c| c.rabi * c.rabi / (4.0 * c.detuning)).sum();
        let d1 = drive.components[0].detuning;
        stark - self.g_v() * self.g_v() / d1
    }

    /// Zeeman splitting Z between |g₁⟩ and |g₂⟩ (rad/s).
    pub fn zeeman_z(&self) -> f64 {
        self.emitter.zeeman_energy(G2_LEVEL) - self.emitter.zeeman_energy(G1_LEVEL)
    }

    /// Frame energy of each basis state for a given drive (diagonal of H).
    pub fn frame_energies(&self, drive: &DriveConfig) -> Vec<f64> {
        let delta = drive.components[0].detuning;
        let raman = drive.raman_offset.unwrap_or_else(|| self.compensated_raman_offset(drive));
        self.basis
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let base = self.h_bare[(i, i)].re;
                match s.level.term {
                    Term::P32 => base - delta,
                    Term::D52 => base + raman,
                    _ => base,
                }
            })
            .collect()
    }

    /// Assembles the master equation for a drive; `drive_on = false` drops
    /// all drive terms (after the pulse), and `recycle_s12 = false` removes
    /// the feeding term of decays into S1/2.
    pub fn problem(&self, drive: &DriveConfig, drive_on: bool, recycle_s12: bool) -> Result<LindbladProblem> {
        drive.validate()?;
        let energies = self.frame_energies(drive);
        let mut h = self.h_bare.clone();
        for (i, e) in energies.iter().enumerate() {
            h[(i, i)] = C64::new(*e, 0.0);
        }
        let mut oscillating = Vec::new();
        if drive_on {
            let op = self.drive_operator();
            let c0 = drive.components[0];
            let a0 = op.scale(C64::from_polar(c0.rabi / 2.0, c0.phase));
            h = h.add(&a0).add(&a0.adjoint());
            for c in &drive.components[1..] {
                let freq = c.detuning - c0.detuning;
                oscillating.push(OscillatingTerm { op: op.scale(C64::from_polar(c.rabi / 2.0, c.phase)), freq });
            }
        }
        let jumps = self.collapse_ops.iter().map(|j| Jump { op: j.op.clone(), recycle: recycle_s12 || !j.into_s12 }).collect();
        Ok(LindbladProblem { h_static: h, oscillating, jumps })
    }

    pub fn initial_index(&self) -> usize {
        self.basis.index(U_LEVEL, 0, 0).expect("initial state in basis")
    }
}
