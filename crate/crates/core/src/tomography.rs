//! Ion–photon two-qubit state tomography.
//!
//! Qubit order is ion ⊗ photon with basis index 2·ion + photon, where the ion
//! states are |g₁⟩ = |0⟩, |g₂⟩ = |1⟩ and the photon states are |V⟩ = |0⟩,
//! |H⟩ = |1⟩. Outcome labels give the ion sign first, then the photon sign;
//! `+` is the +1 eigenstate of the measured Pauli operator.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::{Euclid, Float};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::linalg::{project_to_density, CMat};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliBasis {
    Z,
    X,
    Y,
}

impl PauliBasis {
    pub const ALL: [PauliBasis; 3] = [PauliBasis::Z, PauliBasis::X, PauliBasis::Y];

    pub fn label(self) -> &'static str {
        match self {
            PauliBasis::Z => "Z",
            PauliBasis::X => "X",
            PauliBasis::Y => "Y",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "Z" | "z" => Some(PauliBasis::Z),
            "X" | "x" => Some(PauliBasis::X),
            "Y" | "y" => Some(PauliBasis::Y),
            _ => None,
        }
    }

    /// Eigenvector with eigenvalue +1 (`plus`) or −1.
    pub fn eigenvector(self, plus: bool) -> [C64; 2] {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let sign = if plus { 1.0 } else { -1.0 };
        match self {
            PauliBasis::Z if plus => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            PauliBasis::Z => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            PauliBasis::X => [C64::new(s, 0.0), C64::new(sign * s, 0.0)],
            PauliBasis::Y => [C64::new(s, 0.0), C64::new(0.0, sign * s)],
        }
    }

    pub fn matrix(self) -> [[C64; 2]; 2] {
        let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
        match self {
            PauliBasis::Z => [[o, z], [z, -o]],
            PauliBasis::X => [[z, o], [o, z]],
            PauliBasis::Y => [[z, -i], [i, z]],
        }
    }
}

/// One of the nine joint measurement settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Setting {
    pub photon: PauliBasis,
    pub ion: PauliBasis,
}

/// Settings in table order: photon basis major, ion basis minor.
pub fn settings() -> [Setting; 9] {
    let mut out = [Setting { photon: PauliBasis::Z, ion: PauliBasis::Z }; 9];
    for (k, s) in out.iter_mut().enumerate() {
        *s = Setting { photon: PauliBasis::ALL[k / 3], ion: PauliBasis::ALL[k % 3] };
    }
    out
}

pub const OUTCOMES: [&str; 4] = ["++", "+-", "-+", "--"];

fn outcome_signs(o: usize) -> (bool, bool) {
    (o < 2, o.is_multiple_of(2))
}

pub fn outcome_index(label: &str) -> Option<usize> {
    OUTCOMES.iter().position(|&o| o == label.trim())
}

pub fn setting_index(s: Setting) -> usize {
    let pos = |b: PauliBasis| PauliBasis::ALL.iter().position(|&x| x == b).unwrap();
    3 * pos(s.photon) + pos(s.ion)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub setting: Setting,
    pub outcome: &'static str,
    pub op: CMat,
}

fn projector(s: Setting, o: usize) -> CMat {
    let (ion_plus, photon_plus) = outcome_signs(o);
    let a = s.ion.eigenvector(ion_plus);
    let b = s.photon.eigenvector(photon_plus);
    let psi = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]];
    CMat::outer(&psi)
}

/// The 36 rank-one projectors, four per setting in [`OUTCOMES`] order.
pub fn measurement_set() -> Vec<Projector> {
    let mut out = Vec::with_capacity(36);
    for s in settings() {
        for (o, &label) in OUTCOMES.iter().enumerate() {
            out.push(Projector { setting: s, outcome: label, op: projector(s, o) });
        }
    }
    out
}

/// Born probabilities per setting and outcome.
pub fn born_probabilities(rho: &CMat) -> [[f64; 4]; 9] {
    let mut p = [[0.0; 4]; 9];
    for (k, s) in settings().into_iter().enumerate() {
        for (o, slot) in p[k].iter_mut().enumerate() {
            *slot = rho.trace_product(&projector(s, o)).re.max(0.0);
        }
    }
    p
}

/// |Ψ(θ)⟩ = (|g₁V⟩ + e^{iθ}|g₂H⟩)/√2.
pub fn target_state(theta: f64) -> [C64; 4] {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    [C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::from_polar(s, theta)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    /// Counts per setting (in [`settings`] order) and outcome.
    pub counts: [[u64; 4]; 9],
    pub attempts: Option<u64>,
    /// Detection window per attempt (s).
    pub window: f64,
    /// Background detection rate (1/s).
    pub background_rate: f64,
}

impl CountTable {
    pub fn new(counts: [[u64; 4]; 9]) -> Self {
        CountTable { counts, attempts: None, window: 0.0, background_rate: 0.0 }
    }

    pub fn get(&self, s: Setting, outcome: usize) -> u64 {
        self.counts[setting_index(s)][outcome]
    }

    pub fn set(&mut self, s: Setting, outcome: usize, n: u64) {
        self.counts[setting_index(s)][outcome] = n;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Per-setting normalised frequencies.
    pub fn frequencies(&self) -> Result<[[f64; 4]; 9]> {
        let mut f = [[0.0; 4]; 9];
        for (k, row) in self.counts.iter().enumerate() {
            let n: u64 = row.iter().sum();
            if n == 0 {
                let s = settings()[k];
                return Err(Error::InsufficientData(format!(
                    "no events in photon {} / ion {} basis",
                    s.photon.label(),
                    s.ion.label()
                )));
            }
            for o in 0..4 {
                f[k][o] = row[o] as f64 / n as f64;
            }
        }
        Ok(f)
    }
}

/// Linear inversion ρ = ¼ Σ ⟨σ_a ⊗ σ_b⟩ σ_a ⊗ σ_b over a, b ∈ {I, X, Y, Z}.
pub fn linear_inversion(f: &[[f64; 4]; 9]) -> CMat {
    // Joint and marginal expectation values; marginals average over the other qubit's setting.
    let mut joint = [[0.0; 3]; 3];
    let mut ion = [0.0; 3];
    let mut photon = [0.0; 3];
    for (k, s) in settings().into_iter().enumerate() {
        let (pi, ii) = (setting_index(Setting { photon: s.photon, ion: PauliBasis::Z }) / 3, setting_index(s) % 3);
        for (o, &p) in f[k].iter().enumerate() {
            let (ion_plus, photon_plus) = outcome_signs(o);
            let (si, sp) = (if ion_plus { 1.0 } else { -1.0 }, if photon_plus { 1.0 } else { -1.0 });
            joint[ii][pi] += si * sp * p;
            ion[ii] += si * p / 3.0;
            photon[pi] += sp * p / 3.0;
        }
    }
    let id = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
    let kron = |a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]| CMat::from_fn(4, |r, c| a[r / 2][c / 2] * b[r % 2][c % 2]);
    let mut rho = kron(&id, &id);
    for (i, bi) in PauliBasis::ALL.iter().enumerate() {
        rho = rho.add(&kron(&bi.matrix(), &id).scale(C64::new(ion[i], 0.0)));
        rho = rho.add(&kron(&id, &bi.matrix()).scale(C64::new(photon[i], 0.0)));
        for (p, bp) in PauliBasis::ALL.iter().enumerate() {
            rho = rho.add(&kron(&bi.matrix(), &bp.matrix()).scale(C64::new(joint[i][p], 0.0)));
        }
    }
    rho.scale(C64::new(0.25, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub state: CMat,
    pub converged: bool,
    pub iterations: usize,
    /// Σ f log p over all settings and outcomes.
    pub log_likelihood: f64,
    /// Log-likelihood of the seed and of every accepted iterate.
    pub trace: Vec<f64>,
}

pub const MLE_TOLERANCE: f64 = 1e-10;
pub const MLE_MAX_ITERATIONS: usize = 10_000;

fn log_likelihood(f: &[[f64; 4]; 9], projectors: &[CMat], rho: &CMat) -> f64 {
    let mut l = 0.0;
    for k in 0..9 {
        for o in 0..4 {
            if f[k][o] > 0.0 {
                let p = rho.trace_product(&projectors[4 * k + o]).re;
                l += f[k][o] * if p > 0.0 { p.ln() } else { -1e300 };
            }
        }
    }
    l
}

/// Linear-inversion seed refined by diluted RρR likelihood ascent.
///
/// Each step is ρ ← (I + εR)ρ(I + εR)/tr with R = Σ (f/p) Π / 9. A step that
/// would lower the likelihood is retried with half the dilution ε.
pub fn reconstruct(counts: &CountTable) -> Result<Reconstruction> {
    let f = counts.frequencies()?;
    let projectors: Vec<CMat> = measurement_set().into_iter().map(|p| p.op).collect();
    let seed = project_to_density(&linear_inversion(&f).hermitian_part());
    // A small admixture of I/4 keeps every Born probability positive.
    let mut rho = seed.scale(C64::new(1.0 - 1e-3, 0.0)).add(&CMat::identity(4).scale(C64::new(0.25e-3, 0.0)));
    let mut logl = log_likelihood(&f, &projectors, &rho);
    let mut trace = alloc::vec![logl];
    let mut eps: f64 = 10.0;
    for it in 1..=MLE_MAX_ITERATIONS {
        let mut r = CMat::zeros(4);
        for k in 0..9 {
            for o in 0..4 {
                let proj = &projectors[4 * k + o];
                let p = rho.trace_product(proj).re;
                if f[k][o] > 0.0 && p > 0.0 {
                    r = r.add(&proj.scale(C64::new(f[k][o] / p / 9.0, 0.0)));
                }
            }
        }
        let mut accepted = None;
        while eps > 1e-12 {
            let step = CMat::identity(4).add(&r.scale(C64::new(eps, 0.0)));
            let next = step.mul(&rho).mul(&step);
            let next = next.scale(C64::new(1.0 / next.trace().re, 0.0)).hermitian_part();
            let l_next = log_likelihood(&f, &projectors, &next);
            if l_next >= logl {
                accepted = Some((next, l_next));
                break;
            }
            eps *= 0.5;
        }
        let Some((next, l_next)) = accepted else {
            return Ok(Reconstruction { state: rho, converged: true, iterations: it, log_likelihood: logl, trace });
        };
        let gain = l_next - logl;
        rho = next;
        logl = l_next;
        trace.push(logl);
        eps = (eps * 2.0).min(1e4);
        if gain < MLE_TOLERANCE {
            return Ok(Reconstruction { state: rho, converged: true, iterations: it, log_likelihood: logl, trace });
        }
    }
    Ok(Reconstruction { state: rho, converged: false, iterations: MLE_MAX_ITERATIONS, log_likelihood: logl, trace })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateMetrics {
    pub fidelity: f64,
    pub theta: f64,
    pub purity: f64,
    /// √𝒫 − F.
    pub bound_gap: f64,
}

/// F(θ) = ⟨Ψ(θ)|ρ|Ψ(θ)⟩.
pub fn fidelity_at(rho: &CMat, theta: f64) -> f64 {
    rho.expectation(&target_state(theta)).re
}

/// Golden-section maximisation of F(θ) over [0, 2π), to 1e-6 rad.
pub fn fit_theta(rho: &CMat) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let n = 16;
    let best = (0..n).map(|k| two_pi * k as f64 / n as f64).fold((0.0, f64::NEG_INFINITY), |acc, t| {
        let v = fidelity_at(rho, t);
        if v > acc.1 {
            (t, v)
        } else {
            acc
        }
    });
    let (mut a, mut b) = (best.0 - two_pi / n as f64, best.0 + two_pi / n as f64);
    let r = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (fidelity_at(rho, c), fidelity_at(rho, d));
    while b - a > 1e-6 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = fidelity_at(rho, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = fidelity_at(rho, d);
        }
    }
    Euclid::rem_euclid(&(0.5 * (a + b)), &two_pi)
}

pub fn purity(rho: &CMat) -> f64 {
    rho.trace_product(rho).re
}

/// Fidelity, purity and bound gap; θ is fitted when not given.
pub fn metrics(rho: &CMat, theta: Option<f64>) -> StateMetrics {
    let theta = theta.unwrap_or_else(|| fit_theta(rho));
    let fidelity = fidelity_at(rho, theta).clamp(0.0, 1.0);
    let purity = purity(rho);
    StateMetrics { fidelity, theta, purity, bound_gap: purity.sqrt() - fidelity }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// Metrics of the reconstruction from the original counts.
    pub central: StateMetrics,
    pub fidelity_mean: f64,
    pub fidelity_std: f64,
    pub purity_mean: f64,
    pub purity_std: f64,
    pub theta_std: f64,
    pub bound_gap_std: f64,
    pub resamples: usize,
    pub failed: usize,
    /// Set when fewer than 20 resamples contributed.
    pub low_confidence: bool,
}

/// Poisson resample of every count, seeded by `seed + index`.
pub fn resample_counts(counts: &CountTable, seed: u64, index: u64) -> CountTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index));
    let mut out = counts.clone();
    for row in out.counts.iter_mut() {
        for n in row.iter_mut() {
            *n = if *n == 0 { 0 } else { Poisson::new(*n as f64).expect("positive mean").sample(&mut rng) as u64 };
        }
    }
    out
}

/// Reconstruction and metrics of one bootstrap resample.
pub fn bootstrap_sample(counts: &CountTable, seed: u64, index: u64, theta: Option<f64>) -> Result<StateMetrics> {
    let rec = reconstruct(&resample_counts(counts, seed, index))?;
    Ok(metrics(&rec.state, theta))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Combines per-resample outcomes, in index order, into error bars.
pub fn summarize_bootstrap(central: StateMetrics, samples: &[Result<StateMetrics>]) -> Result<BootstrapResult> {
    let ok: Vec<StateMetrics> = samples.iter().filter_map(|s| s.as_ref().ok().copied()).collect();
    if ok.len() < 2 {
        return Err(Error::InsufficientData(format!("only {} of {} resamples reconstructed", ok.len(), samples.len())));
    }
    let col = |f: fn(&StateMetrics) -> f64| ok.iter().map(f).collect::<Vec<_>>();
    let (fidelity_mean, fidelity_std) = mean_std(&col(|m| m.fidelity));
    let (purity_mean, purity_std) = mean_std(&col(|m| m.purity));
    // θ lives on a circle, so spread is measured from the central value.
    let pi = core::f64::consts::PI;
    let dtheta: Vec<f64> = ok.iter().map(|m| Euclid::rem_euclid(&(m.theta - central.theta + pi), &(2.0 * pi)) - pi).collect();
    let (_, theta_std) = mean_std(&dtheta);
    let (_, bound_gap_std) = mean_std(&col(|m| m.bound_gap));
    Ok(BootstrapResult {
        central,
        fidelity_mean,
        fidelity_std,
        purity_mean,
        purity_std,
        theta_std,
        bound_gap_std,
        resamples: ok.len(),
        failed: samples.len() - ok.len(),
        low_confidence: ok.len() < 20,
    })
}

/// Monte-Carlo error bars from `m` Poisson resamples of all 36 counts.
pub fn bootstrap(counts: &CountTable, m: usize, seed: u64, theta: Option<f64>) -> Result<BootstrapResult> {
    if m < 2 {
        return Err(Error::invalid("bootstrap.m", "at least two resamples are required"));
    }
    let central = metrics(&reconstruct(counts)?.state, theta);
    let samples: Vec<Result<StateMetrics>> = (0..m as u64).map(|i| bootstrap_sample(counts, seed, i, theta)).collect();
    summarize_bootstrap(central, &samples)
}

/// Fidelity ceiling of a Φ⁺ state mixed with unpolarised background.
///
/// The background weight is w = b·τ / (s + b·τ) for signal probability `s`
/// per attempt, background rate b and window τ.
pub fn background_fidelity_limit(signal_per_attempt: f64, background_rate: f64, window: f64) -> Result<f64> {
    for (name, v) in [("signal_per_attempt", signal_per_attempt), ("background_rate", background_rate), ("window", window)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, "must be non-negative"));
        }
    }
    let bg = background_rate * window;
    if signal_per_attempt + bg == 0.0 {
        return Err(Error::invalid("signal_per_attempt", "signal and background cannot both vanish"));
    }
    let w = bg / (signal_per_attempt + bg);
    let bell = CMat::outer(&target_state(0.0));
    let rho = bell.scale(C64::new(1.0 - w, 0.0)).add(&CMat::identity(4).scale(C64::new(0.25 * w, 0.0)));
    Ok(fidelity_at(&rho, 0.0))
}

/// Human-readable description of a setting, e.g. `photon X / ion Z`.
pub fn setting_label(s: Setting) -> String {
    format!("photon {} / ion {}", s.photon.label(), s.ion.label())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_counts(rho: &CMat, shots: f64) -> CountTable {
        let p = born_probabilities(rho);
        let mut c = [[0u64; 4]; 9];
        for k in 0..9 {
            for o in 0..4 {
                c[k][o] = (p[k][o] * shots).round() as u64;
            }
        }
        CountTable::new(c)
    }

    #[test]
    fn projectors_are_complete_per_setting() {
        let set = measurement_set();
        assert_eq!(set.len(), 36);
        for chunk in set.chunks(4) {
            let sum = chunk.iter().fold(CMat::zeros(4), |acc, p| acc.add(&p.op));
            assert!(sum.max_abs_diff(&CMat::identity(4)) < 1e-12);
        }
    }

    #[test]
    fn born_rule_of_target_in_zz() {
        let p = born_probabilities(&CMat::outer(&target_state(0.0)));
        let zz = p[setting_index(Setting { photon: PauliBasis::Z, ion: PauliBasis::Z })];
        for (a, b) in zz.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_inversion_is_exact_on_exact_data() {
        let rho = CMat::outer(&target_state(0.91));
        let f = born_probabilities(&rho);
        assert!(linear_inversion(&f).max_abs_diff(&rho) < 1e-12);
    }

    #[test]
    fn round_trip_pure_target() {
        let rho = CMat::outer(&target_state(0.91));
        let rec = reconstruct(&exact_counts(&rho, 1e6)).unwrap();
        assert!(fidelity_at(&rec.state, 0.91) > 0.999);
        let m = metrics(&rec.state, None);
        assert!((m.theta - 0.91).abs() < 1e-3);
    }

    #[test]
    fn maximally_mixed_counts() {
        let rec = reconstruct(&CountTable::new([[250; 4]; 9])).unwrap();
        assert!(rec.state.max_abs_diff(&CMat::identity(4).scale(C64::new(0.25, 0.0))) < 1e-3);
        let m = metrics(&rec.state, None);
        assert!((m.fidelity - 0.25).abs() < 1e-3 && (m.purity - 0.25).abs() < 1e-3);
    }

    #[test]
    fn empty_basis_is_rejected() {
        let mut c = CountTable::new([[10; 4]; 9]);
        c.counts[4] = [0; 4];
        assert!(matches!(reconstruct(&c), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn background_limits() {
        assert!((background_fidelity_limit(0.46, 0.0, 60e-6).unwrap() - 1.0).abs() < 1e-12);
        assert!((background_fidelity_limit(0.0, 20.0, 60e-6).unwrap() - 0.25).abs() < 1e-12);
    }
}
