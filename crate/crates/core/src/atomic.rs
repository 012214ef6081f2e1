//! Level structure of ⁴⁰Ca⁺ and the atomic rates derived from it.
//!
//! Angular momenta are stored as twice their value ([`HalfInt`]) so that
//! Clebsch–Gordan algebra stays in integers until the final square root.
//!
//! Decay rates follow the amplitude (half-width) convention used throughout
//! the crate: the P3/2 rate γ = 2π × 11.49 MHz damps coherences at γ and
//! populations at 2γ.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::consts::{mhz, MU_B_OVER_H, TWO_PI};
use crate::{Error, Result};

/// A half-integer stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Shorthand for `HalfInt::from_twice`.
pub const fn half(twice: i32) -> HalfInt {
    HalfInt::from_twice(twice)
}

/// Fine-structure terms of the valence electron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    S12,
    P12,
    P32,
    D32,
    D52,
}

impl Term {
    pub const ALL: [Term; 5] = [Term::S12, Term::P12, Term::P32, Term::D32, Term::D52];

    pub fn orbital_l(self) -> i32 {
        match self {
            Term::S12 => 0,
            Term::P12 | Term::P32 => 1,
            Term::D32 | Term::D52 => 2,
        }
    }

    pub fn j(self) -> HalfInt {
        match self {
            Term::S12 | Term::P12 => half(1),
            Term::P32 | Term::D32 => half(3),
            Term::D52 => half(5),
        }
    }

    /// Landé factor from L, S = 1/2 and J.
    pub fn lande_g(self) -> f64 {
        let j = self.j().value();
        let l = self.orbital_l() as f64;
        let s = 0.5;
        1.0 + (j * (j + 1.0) + s * (s + 1.0) - l * (l + 1.0)) / (2.0 * j * (j + 1.0))
    }

    pub fn label(self) -> &'static str {
        match self {
            Term::S12 => "S1/2",
            Term::P12 => "P1/2",
            Term::P32 => "P3/2",
            Term::D32 => "D3/2",
            Term::D52 => "D5/2",
        }
    }

    /// Magnetic sublevels from −J to J.
    pub fn sublevels(self) -> impl Iterator<Item = HalfInt> {
        let j2 = self.j().twice();
        (-j2..=j2).step_by(2).map(HalfInt::from_twice)
    }

    pub fn contains(self, m: HalfInt) -> bool {
        let j2 = self.j().twice();
        m.twice().abs() <= j2 && (m.twice() - j2) % 2 == 0
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A single Zeeman sublevel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level {
    pub term: Term,
    pub m: HalfInt,
}

impl Level {
    pub const fn new(term: Term, m: HalfInt) -> Self {
        Level { term, m }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.term, self.m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelManifold {
    pub term: Term,
    pub j: HalfInt,
    pub lande_g: f64,
    pub sublevels: Vec<HalfInt>,
}

impl LevelManifold {
    pub fn new(term: Term) -> Self {
        LevelManifold { term, j: term.j(), lande_g: term.lande_g(), sublevels: term.sublevels().collect() }
    }
}

fn factorial(n: i32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Clebsch–Gordan coefficient ⟨j1 m1; j2 m2 | j m⟩ (Condon–Shortley phase).
///
/// Returns 0 for any combination forbidden by the triangle or projection rules.
pub fn clebsch_gordan(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> f64 {
    let (j1, m1, j2, m2, j, m) = (j1.0, m1.0, j2.0, m2.0, j.0, m.0);
    if m1 + m2 != m || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
        return 0.0;
    }
    if (j1 + m1) % 2 != 0 || (j2 + m2) % 2 != 0 || (j + m) % 2 != 0 {
        return 0.0;
    }
    if j > j1 + j2 || j < (j1 - j2).abs() || (j1 + j2 + j) % 2 != 0 {
        return 0.0;
    }
    // All arguments below are integers once halved.
    let h = |x: i32| x / 2;
    let pre = ((j + 1) as f64 * factorial(h(j + j1 - j2)) * factorial(h(j - j1 + j2)) * factorial(h(j1 + j2 - j))
        / factorial(h(j1 + j2 + j) + 1))
        .sqrt();
    let norm = (factorial(h(j + m))
        * factorial(h(j - m))
        * factorial(h(j1 - m1))
        * factorial(h(j1 + m1))
        * factorial(h(j2 - m2))
        * factorial(h(j2 + m2)))
    .sqrt();
    let mut sum = 0.0;
    for k in 0..=h(j1 + j2 - j) {
        let args = [h(j1 + j2 - j) - k, h(j1 - m1) - k, h(j2 + m2) - k, h(j - j2 + m1) + k, h(j - j1 - m2) + k];
        if args.iter().any(|&a| a < 0) {
            continue;
        }
        let denom = factorial(k) * args.iter().map(|&a| factorial(a)).product::<f64>();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / denom;
    }
    pre * norm * sum
}

/// Dipole amplitude for emission from `upper` into `lower`, ⟨J_l m_l; 1 q | J_u m_u⟩ with q = m_u − m_l.
pub fn dipole_cg(upper: Level, lower: Level) -> f64 {
    let q = upper.m.twice() - lower.m.twice();
    if q.abs() > 2 {
        return 0.0;
    }
    clebsch_gordan(lower.term.j(), lower.m, half(2), half(q), upper.term.j(), upper.m)
}

/// Branching ratios of P3/2 into the three lower manifolds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branching {
    pub s12: f64,
    pub d32: f64,
    pub d52: f64,
}

impl Branching {
    pub fn for_term(&self, term: Term) -> f64 {
        match term {
            Term::S12 => self.s12,
            Term::D32 => self.d32,
            Term::D52 => self.d52,
            _ => 0.0,
        }
    }

    pub fn sum(&self) -> f64 {
        self.s12 + self.d32 + self.d52
    }
}

impl Default for Branching {
    fn default() -> Self {
        Branching { s12: 0.9347, d32: 0.00661, d52: 0.0587 }
    }
}

/// Tunable constants of the emitter model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterConstants {
    /// Total P3/2 decay rate γ (rad/s).
    pub gamma_total: f64,
    pub branching: Branching,
    pub b_field_gauss: f64,
    /// μ_B/h in Hz per gauss.
    pub mu_b_over_h: f64,
}

impl Default for EmitterConstants {
    fn default() -> Self {
        EmitterConstants { gamma_total: mhz(11.49), branching: Branching::default(), b_field_gauss: 4.23, mu_b_over_h: MU_B_OVER_H }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayChannel {
    pub upper: Level,
    pub lower: Level,
    /// Photon polarisation q = m_upper − m_lower.
    pub q: i32,
    /// Signed Clebsch–Gordan amplitude of the transition.
    pub amplitude: f64,
    /// Decay rate (rad/s).
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmitterModel {
    pub manifolds: Vec<LevelManifold>,
    pub gamma_total: f64,
    pub branching: Branching,
    pub channels: Vec<DecayChannel>,
    pub b_field_gauss: f64,
    pub mu_b_over_h: f64,
}

impl EmitterModel {
    pub fn new(constants: EmitterConstants) -> Result<Self> {
        let b = constants.branching;
        if !(constants.gamma_total > 0.0 && constants.gamma_total.is_finite()) {
            return Err(Error::invalid("gamma_total", "must be positive"));
        }
        if [b.s12, b.d32, b.d52].iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::invalid("branching", "each ratio must lie in [0, 1]"));
        }
        if (b.sum() - 1.0).abs() > 1e-3 {
            return Err(Error::invalid("branching", "ratios must sum to 1 within 1e-3"));
        }
        if !(constants.b_field_gauss >= 0.0 && constants.b_field_gauss.is_finite()) {
            return Err(Error::invalid("b_field_gauss", "must be non-negative"));
        }
        if !(constants.mu_b_over_h > 0.0) {
            return Err(Error::invalid("mu_b_over_h", "must be positive"));
        }
        let mut model = EmitterModel {
            manifolds: Term::ALL.iter().map(|&t| LevelManifold::new(t)).collect(),
            gamma_total: constants.gamma_total,
            branching: b,
            channels: Vec::new(),
            b_field_gauss: constants.b_field_gauss,
            mu_b_over_h: constants.mu_b_over_h,
        };
        model.channels = decay_channel_table(&model);
        Ok(model)
    }

    pub fn calcium40() -> Self {
        Self::new(EmitterConstants::default()).expect("default constants are valid")
    }

    pub fn levels(&self) -> impl Iterator<Item = Level> + '_ {
        self.manifolds.iter().flat_map(|mf| mf.sublevels.iter().map(move |&m| Level::new(mf.term, m)))
    }

    pub fn state_count(&self) -> usize {
        self.manifolds.iter().map(|m| m.sublevels.len()).sum()
    }

    /// Zeeman energy g_J m μ_B B of a sublevel (rad/s).
    pub fn zeeman_energy(&self, level: Level) -> f64 {
        TWO_PI * level.term.lande_g() * level.m.value() * self.mu_b_over_h * self.b_field_gauss
    }

    pub fn channels_from(&self, upper: Level) -> impl Iterator<Item = &DecayChannel> {
        self.channels.iter().filter(move |c| c.upper == upper)
    }

    pub fn channel(&self, upper: Level, lower: Level) -> Option<&DecayChannel> {
        self.channels.iter().find(|c| c.upper == upper && c.lower == lower)
    }
}

/// All dipole-allowed P3/2 → {S1/2, D3/2, D5/2} channels.
pub fn decay_channel_table(emitter: &EmitterModel) -> Vec<DecayChannel> {
    let mut out = Vec::new();
    for mu in Term::P32.sublevels() {
        let upper = Level::new(Term::P32, mu);
        for lower_term in [Term::S12, Term::D32, Term::D52] {
            let r = emitter.branching.for_term(lower_term);
            for ml in lower_term.sublevels() {
                let lower = Level::new(lower_term, ml);
                let q2 = mu.twice() - ml.twice();
                if q2.abs() > 2 {
                    continue;
                }
                let amplitude = dipole_cg(upper, lower);
                if amplitude == 0.0 {
                    continue;
                }
                out.push(DecayChannel { upper, lower, q: q2 / 2, amplitude, rate: emitter.gamma_total * r * amplitude * amplitude });
            }
        }
    }
    out
}

/// The P3/2 → D5/2 transition that emits into the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CavityTransition {
    pub upper: HalfInt,
    pub lower: HalfInt,
}

impl CavityTransition {
    /// P3/2(−3/2) → D5/2(−5/2), emitting a V photon.
    pub const V_PHOTON: CavityTransition = CavityTransition { upper: half(-3), lower: half(-5) };
    /// P3/2(−3/2) → D5/2(−3/2), emitting an H photon.
    pub const H_PHOTON: CavityTransition = CavityTransition { upper: half(-3), lower: half(-3) };
}

/// Partition of the excited-state decay relevant for one photon-generation scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeRates {
    pub gamma_g: f64,
    pub gamma_u: f64,
    pub gamma_o: f64,
    pub r_u: f64,
    pub zeta: f64,
}

impl SchemeRates {
    pub fn gamma_total(&self) -> f64 {
        self.gamma_g + self.gamma_u + self.gamma_o
    }

    pub fn with_zeta(mut self, zeta: f64) -> Self {
        self.zeta = zeta;
        self
    }

    /// The V-photon scheme from S1/2(−1/2) with ζ = √0.5.
    pub fn v_photon(emitter: &EmitterModel) -> Self {
        scheme_rates(emitter, CavityTransition::V_PHOTON, Level::new(Term::S12, half(-1)), core::f64::consts::FRAC_1_SQRT_2)
            .expect("V-photon scheme is dipole allowed")
    }

    /// The H-photon scheme from S1/2(−1/2) with ζ = 1.
    pub fn h_photon(emitter: &EmitterModel) -> Self {
        scheme_rates(emitter, CavityTransition::H_PHOTON, Level::new(Term::S12, half(-1)), 1.0)
            .expect("H-photon scheme is dipole allowed")
    }
}

pub fn scheme_rates(emitter: &EmitterModel, transition: CavityTransition, initial: Level, zeta: f64) -> Result<SchemeRates> {
    let upper = Level::new(Term::P32, transition.upper);
    let lower = Level::new(Term::D52, transition.lower);
    if !Term::P32.contains(transition.upper) || !Term::D52.contains(transition.lower) {
        return Err(Error::invalid("cavity_transition", "sublevel outside −J..J"));
    }
    if (transition.upper.twice() - transition.lower.twice()).abs() > 2 {
        return Err(Error::invalid("cavity_transition", "|Δm| > 1 is dipole forbidden"));
    }
    if initial.term != Term::S12 || !Term::S12.contains(initial.m) {
        return Err(Error::invalid("initial_state", "must be an S1/2 sublevel"));
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::invalid("zeta", "must lie in (0, 1]"));
    }
    let rate = |l: Level| emitter.channel(upper, l).map_or(0.0, |c| c.rate);
    let gamma = emitter.gamma_total;
    let gamma_g = rate(lower);
    let gamma_u = rate(initial);
    Ok(SchemeRates { gamma_g, gamma_u, gamma_o: gamma - gamma_g - gamma_u, r_u: gamma_u / gamma, zeta })
}

/// Energy difference |m_a − m_b| g_J μ_B B between two sublevels (rad/s).
pub fn zeeman_splitting(term: Term, m_a: HalfInt, m_b: HalfInt, b_field_gauss: f64, mu_b_over_h: f64) -> Result<f64> {
    if !term.contains(m_a) || !term.contains(m_b) {
        return Err(Error::invalid("m_j", "sublevel outside −J..J for this manifold"));
    }
    let dm = (m_a.twice() - m_b.twice()).abs() as f64 / 2.0;
    Ok(TWO_PI * dm * term.lande_g() * mu_b_over_h * b_field_gauss)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionalRabi {
    pub omega_n: f64,
    /// False when η²(2n+1) > 0.3 and the first-order expansion is unreliable.
    pub in_lamb_dicke_regime: bool,
}

/// First-order Debye–Waller reduction Ω_n ≈ Ω(1 − η²n).
pub fn motional_rabi_scaling(omega: f64, eta: f64, n: u32) -> MotionalRabi {
    let e2 = eta * eta;
    MotionalRabi { omega_n: omega * (1.0 - e2 * n as f64), in_lamb_dicke_regime: e2 * (2.0 * n as f64 + 1.0) <= 0.3 }
}

impl fmt::Display for SchemeRates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |w: f64| crate::consts::to_mhz(w).to_string();
        write!(f, "(γ_g, γ_u, γ_o)/2π = ({}, {}, {}) MHz, ζ = {}", s(self.gamma_g), s(self.gamma_u), s(self.gamma_o), self.zeta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::to_mhz;

    #[test]
    fn cg_known_values() {
        let v = clebsch_gordan(half(1), half(1), half(1), half(-1), half(2), half(0));
        assert!((v - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        let v = clebsch_gordan(half(1), half(1), half(1), half(-1), half(0), half(0));
        assert!((v - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        let v = clebsch_gordan(half(1), half(-1), half(1), half(1), half(0), half(0));
        assert!((v + core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        assert_eq!(clebsch_gordan(half(1), half(1), half(2), half(2), half(1), half(3)), 0.0);
    }

    #[test]
    fn p32_minus_three_halves_into_d52() {
        let up = Level::new(Term::P32, half(-3));
        let g: Vec<f64> = [-5, -3, -1].iter().map(|&m| dipole_cg(up, Level::new(Term::D52, half(m)))).collect();
        let expect = [10.0 / 15.0, 4.0 / 15.0, 1.0 / 15.0];
        for (a, e) in g.iter().zip(expect) {
            assert!((a * a - e).abs() < 1e-14);
        }
        assert!((g.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eighteen_states_and_lande() {
        let em = EmitterModel::calcium40();
        assert_eq!(em.state_count(), 18);
        let g: Vec<f64> = Term::ALL.iter().map(|t| t.lande_g()).collect();
        let expect = [2.0, 2.0 / 3.0, 4.0 / 3.0, 0.8, 1.2];
        for (a, e) in g.iter().zip(expect) {
            assert!((a - e).abs() < 1e-14);
        }
    }

    #[test]
    fn rates_out_of_each_p32_sublevel_sum_to_gamma() {
        let em = EmitterModel::calcium40();
        for m in Term::P32.sublevels() {
            let total: f64 = em.channels_from(Level::new(Term::P32, m)).map(|c| c.rate).sum();
            assert!((total / em.gamma_total - em.branching.sum()).abs() < 1e-12);
        }
        for c in &em.channels {
            assert_eq!(c.upper.m.twice() - c.lower.m.twice(), 2 * c.q);
            assert!(c.q.abs() <= 1);
        }
    }

    #[test]
    fn v_scheme_rates() {
        let em = EmitterModel::calcium40();
        let s = SchemeRates::v_photon(&em);
        assert!((to_mhz(s.gamma_g) - 0.45).abs() < 0.005);
        assert!((to_mhz(s.gamma_u) - 10.74).abs() < 0.005);
        assert!((to_mhz(s.gamma_o) - 0.30).abs() < 0.005);
        assert!((s.gamma_total() - em.gamma_total).abs() / em.gamma_total < 1e-12);
        let h = SchemeRates::h_photon(&em);
        assert!((to_mhz(h.gamma_g) - 11.49 * 0.0587 * 4.0 / 15.0).abs() < 1e-9);
    }

    #[test]
    fn forbidden_transition_rejected() {
        let em = EmitterModel::calcium40();
        let t = CavityTransition { upper: half(-3), lower: half(1) };
        assert!(scheme_rates(&em, t, Level::new(Term::S12, half(-1)), 1.0).is_err());
    }

    #[test]
    fn zeeman_values() {
        let z = zeeman_splitting(Term::D52, half(-5), half(-3), 4.23, MU_B_OVER_H).unwrap();
        assert!((to_mhz(z) - 7.10).abs() < 0.01);
        let z = zeeman_splitting(Term::S12, half(-1), half(1), 4.23, MU_B_OVER_H).unwrap();
        assert!((to_mhz(z) - 2.0 * 1.39962 * 4.23).abs() < 1e-9);
        assert_eq!(zeeman_splitting(Term::S12, half(1), half(1), 4.23, MU_B_OVER_H).unwrap(), 0.0);
        assert!(zeeman_splitting(Term::S12, half(3), half(1), 4.23, MU_B_OVER_H).is_err());
    }

    #[test]
    fn motional_scaling() {
        assert_eq!(motional_rabi_scaling(1.0, 0.13, 0).omega_n, 1.0);
        let r = motional_rabi_scaling(1.0, 0.13, 11);
        // η²(2n+1) = 0.389 already exceeds the 0.3 threshold at n = 11.
        assert!((r.omega_n - 0.8141).abs() < 1e-4 && !r.in_lamb_dicke_regime);
        assert!(motional_rabi_scaling(1.0, 0.13, 5).in_lamb_dicke_regime);
        assert!(!motional_rabi_scaling(1.0, 0.13, 30).in_lamb_dicke_regime);
    }
}
