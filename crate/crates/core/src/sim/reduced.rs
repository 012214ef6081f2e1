//! Four-level model with P3/2 adiabatically eliminated.
//!
//! States: |u⟩ (drive-ready), |g,1⟩ (Raman partner with one cavity photon),
//! |g,0⟩ (photon gone) and |o⟩ (scattered out of the scheme). The Raman
//! transfer |u⟩ ↔ |g,1⟩ runs at Ω_eff and competes with off-resonant
//! scattering at γ_eff, of which a share r_u returns to |u⟩.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::evolve::{EvolveOptions, PopulationSeries, SimResult};
use super::lindblad::{Jump, LindbladProblem};
use super::system::{DriveConfig, SystemModel};
use crate::linalg::{expm, CMat};
use crate::{Error, Result, C64};

/// Ω/|Δ| above which adiabatic elimination is flagged as unreliable.
pub const REGIME_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedRates {
    /// Ω_eff = gΩ/(2Δ) (rad/s); the sign is irrelevant.
    pub omega_eff: f64,
    pub kappa_ext: f64,
    pub kappa_in: f64,
    /// γ_eff = (Ω/2Δ)²γ (rad/s).
    pub gamma_eff: f64,
    /// Share of scattering that returns to |u⟩.
    pub r_u: f64,
    /// Dephasing of the Raman partner relative to |u⟩ (rad/s).
    pub jitter: f64,
    /// Ω/|Δ| of the underlying drive, used only for the regime flag.
    pub drive_ratio: f64,
}

impl ReducedRates {
    /// Effective rates for a monochromatic drive on the full model.
    pub fn from_model(model: &SystemModel, drive: &DriveConfig) -> Result<Self> {
        drive.validate()?;
        let c = drive.components[0];
        let gamma = model.emitter.gamma_total;
        let s = c.rabi / (2.0 * c.detuning);
        let scheme = crate::atomic::SchemeRates::v_photon(&model.emitter);
        Ok(ReducedRates {
            omega_eff: (model.g_v() * s).abs(),
            kappa_ext: model.cavity.rates.kappa_ext,
            kappa_in: model.cavity.rates.kappa_in,
            gamma_eff: s * s * gamma,
            r_u: scheme.r_u,
            jitter: model.options.jitter_rate,
            drive_ratio: (c.rabi / c.detuning).abs(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !(self.omega_eff > 0.0 && self.omega_eff.is_finite()) {
            return Err(Error::invalid("omega_eff", "must be positive"));
        }
        if !(self.kappa_ext > 0.0 && self.kappa_ext.is_finite()) {
            return Err(Error::invalid("kappa_ext", "must be positive"));
        }
        for (name, v) in [("kappa_in", self.kappa_in), ("gamma_eff", self.gamma_eff), ("jitter", self.jitter)] {
            if !nonneg(v) {
                return Err(Error::invalid(name, "must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.r_u) {
            return Err(Error::invalid("r_u", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReducedResult {
    pub sim: SimResult,
    /// Set when Ω/|Δ| exceeds [`REGIME_LIMIT`].
    pub regime_violation: bool,
}

const U: usize = 0;
const G1: usize = 1;
const G0: usize = 2;
const O: usize = 3;

fn unit(r: usize, c: usize, amp: f64) -> CMat {
    let mut m = CMat::zeros(4);
    m[(r, c)] = C64::new(amp, 0.0);
    m
}

pub fn reduced_model_evolve(rates: &ReducedRates, options: &EvolveOptions) -> Result<ReducedResult> {
    rates.validate()?;
    options.validate()?;
    let mut h = CMat::zeros(4);
    h[(G1, U)] = C64::new(rates.omega_eff, 0.0);
    h[(U, G1)] = C64::new(rates.omega_eff, 0.0);
    let mut jitter = CMat::zeros(4);
    jitter[(G1, G1)] = C64::new((2.0 * rates.jitter).sqrt(), 0.0);
    jitter[(G0, G0)] = jitter[(G1, G1)];
    let jumps = [
        unit(O, U, (2.0 * rates.gamma_eff * (1.0 - rates.r_u)).sqrt()),
        unit(U, U, (2.0 * rates.gamma_eff * rates.r_u).sqrt()),
        unit(G0, G1, (2.0 * rates.kappa_ext).sqrt()),
        unit(G0, G1, (2.0 * rates.kappa_in).sqrt()),
        jitter,
    ];
    let problem = LindbladProblem {
        h_static: h,
        oscillating: Vec::new(),
        jumps: jumps.into_iter().map(|op| Jump { op, recycle: true }).collect(),
    };
    let l = problem.build(&[(U, U)]);
    let dt = options.sample_dt;
    let u = expm(&l.static_dense().scale(C64::new(dt, 0.0)));
    let n_bins = (options.t_end / dt).ceil() as usize;
    let mut y = vec![C64::new(0.0, 0.0); l.len()];
    let idx = |i: usize| l.support.index(i, i);
    y[idx(U).unwrap()] = C64::new(1.0, 0.0);
    let pop = |y: &[C64], i: usize| idx(i).map_or(0.0, |k| y[k].re);

    let labels = ["u", "g,1", "g,0", "o"];
    let mut populations: Vec<PopulationSeries> = labels.iter().map(|&label| PopulationSeries { label, values: Vec::new() }).collect();
    let (mut times, mut flux_v, mut flux_loss) = (Vec::new(), Vec::new(), Vec::new());
    let mut next = y.clone();
    let mut worst = 0.0f64;
    for k in 0..=n_bins {
        if k > 0 {
            u.matvec(&y, &mut next);
            core::mem::swap(&mut y, &mut next);
        }
        let t = k as f64 * dt;
        times.push(t);
        let n1 = pop(&y, G1);
        flux_v.push(2.0 * rates.kappa_ext * n1);
        flux_loss.push(2.0 * rates.kappa_in * n1);
        let mut trace = 0.0;
        for (i, series) in populations.iter_mut().enumerate() {
            let p = pop(&y, i);
            trace += p;
            series.values.push(p);
        }
        let drift = (trace - 1.0).abs();
        if drift > super::evolve::TRACE_TOLERANCE {
            return Err(Error::TraceDrift { time: t, drift });
        }
        worst = worst.max(drift);
    }
    let trapz = |f: &[f64]| f.windows(2).map(|w| 0.5 * dt * (w[0] + w[1])).sum::<f64>();
    let p_s_v = trapz(&flux_v);
    let p_loss = trapz(&flux_loss);
    let sim = SimResult {
        flux_h: vec![0.0; times.len()],
        times,
        flux_v,
        flux_loss,
        populations,
        p_s_h: 0.0,
        p_s_v,
        p_s: p_s_v,
        p_loss,
        final_state: l.support.to_matrix(&y),
        trace_drift_max: worst,
        min_eigenvalue: 0.0,
        reexcitation_fraction: None,
        sample_dt: dt,
        dim: 4,
        support_size: l.len(),
    };
    Ok(ReducedResult { sim, regime_violation: rates.drive_ratio > REGIME_LIMIT })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::khz;

    fn rates() -> ReducedRates {
        ReducedRates {
            omega_eff: khz(16.2),
            kappa_ext: khz(54.0),
            kappa_in: khz(15.5),
            gamma_eff: khz(3.9),
            r_u: 0.5,
            jitter: 0.0,
            drive_ratio: 0.035,
        }
    }

    #[test]
    fn lossless_transfer_is_complete() {
        let r = ReducedRates { gamma_eff: 0.0, kappa_in: 0.0, ..rates() };
        let out = reduced_model_evolve(&r, &EvolveOptions { t_end: 2e-3, sample_dt: 0.2e-6, ..Default::default() }).unwrap();
        assert!((out.sim.p_s - 1.0).abs() < 1e-3);
        assert!(!out.regime_violation);
    }

    #[test]
    fn scattering_lowers_efficiency() {
        let opts = EvolveOptions { t_end: 2e-3, sample_dt: 0.5e-6, ..Default::default() };
        let mut last = f64::INFINITY;
        for g in [0.0, 2.0, 4.0, 8.0] {
            let p = reduced_model_evolve(&ReducedRates { gamma_eff: khz(g), ..rates() }, &opts).unwrap().sim.p_s;
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn regime_flag() {
        let opts = EvolveOptions { t_end: 1e-4, sample_dt: 1e-6, ..Default::default() };
        let out = reduced_model_evolve(&ReducedRates { drive_ratio: 0.2, ..rates() }, &opts).unwrap();
        assert!(out.regime_violation);
        assert!(reduced_model_evolve(&ReducedRates { omega_eff: 0.0, ..rates() }, &opts).is_err());
    }
}
