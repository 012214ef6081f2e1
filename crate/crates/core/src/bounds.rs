//! Closed-form bounds on the probability of collecting a photon from the
//! output mirror of a cavity containing a Λ-type emitter.
//!
//! With cooperativity C and re-excitation branching r_u, each excitation of
//! the emitter ends in the cavity with probability 2C/(1+2C) and returns to
//! the initial state with probability r_u/(1+2C). Summing over the number of
//! returns gives P_in = 2C/(1+2C−r_u); the pure variant keeps only the first
//! term.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::atomic::SchemeRates;
use crate::cavity::{cooperativity_from_losses, CavityModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundVariant {
    /// Photons generated after any number of returns to the initial state.
    Full,
    /// Only photons generated without a prior return to the initial state.
    Pure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInput {
    pub c: f64,
    pub r_u: f64,
    pub t2: f64,
    pub alpha_loss: f64,
    pub beta: f64,
    pub a_tilde: f64,
    pub variant: BoundVariant,
}

impl BoundInput {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid("c", "cooperativity must be positive"));
        }
        if !(0.0..1.0).contains(&self.r_u) {
            return Err(Error::invalid("r_u", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.t2) {
            return Err(Error::invalid("t2", "must lie in [0, 1)"));
        }
        if !(self.alpha_loss > 0.0 && self.alpha_loss < 1.0) {
            return Err(Error::invalid("alpha_loss", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub p_in: f64,
    pub p_esc: f64,
    pub p_s: f64,
    /// Contribution to P_in of the photons emitted after exactly j returns.
    pub per_j_terms: Option<Vec<f64>>,
}

pub fn p_escape(t2: f64, alpha_loss: f64) -> f64 {
    if t2 + alpha_loss <= 0.0 {
        return 0.0;
    }
    t2 / (t2 + alpha_loss)
}

fn first_term_and_ratio(input: &BoundInput) -> Result<(f64, f64)> {
    input.validate()?;
    let denom = 1.0 + 2.0 * input.c;
    let ratio = match input.variant {
        BoundVariant::Full => input.r_u / denom,
        BoundVariant::Pure => 0.0,
    };
    if ratio >= 1.0 {
        return Err(Error::invalid("r_u", "re-excitation series diverges"));
    }
    Ok((2.0 * input.c / denom, ratio))
}

/// Closed-form bound.
pub fn p_bound(input: &BoundInput) -> Result<BoundResult> {
    let (a0, ratio) = first_term_and_ratio(input)?;
    let p_in = a0 / (1.0 - ratio);
    let p_esc = p_escape(input.t2, input.alpha_loss);
    Ok(BoundResult { p_in, p_esc, p_s: p_in * p_esc, per_j_terms: None })
}

/// Term-by-term evaluation keeping the first `terms` contributions.
pub fn p_bound_series(input: &BoundInput, terms: usize) -> Result<BoundResult> {
    let (a0, ratio) = first_term_and_ratio(input)?;
    let mut per_j = Vec::with_capacity(terms);
    let mut t = a0;
    for _ in 0..terms {
        per_j.push(t);
        t *= ratio;
    }
    let p_in: f64 = per_j.iter().sum();
    let p_esc = p_escape(input.t2, input.alpha_loss);
    Ok(BoundResult { p_in, p_esc, p_s: p_in * p_esc, per_j_terms: Some(per_j) })
}

fn enhancement(beta: f64, alpha_loss: f64, a_tilde: f64) -> f64 {
    (1.0 + beta * (1.0 / alpha_loss) * (2.0 / a_tilde)).sqrt()
}

/// Output-mirror transmission maximising the bound.
pub fn t2_optimal(beta: f64, alpha_loss: f64, a_tilde: f64) -> f64 {
    alpha_loss * enhancement(beta, alpha_loss, a_tilde)
}

/// The bound evaluated at the optimal transmission.
pub fn p_opt(beta: f64, alpha_loss: f64, a_tilde: f64) -> f64 {
    1.0 - 2.0 / (1.0 + enhancement(beta, alpha_loss, a_tilde))
}

pub fn beta(scheme: &SchemeRates, variant: BoundVariant) -> f64 {
    let z2 = scheme.zeta * scheme.zeta;
    match variant {
        BoundVariant::Full => z2 * scheme.gamma_g / (scheme.gamma_g + scheme.gamma_o),
        BoundVariant::Pure => z2 * scheme.gamma_g / scheme.gamma_total(),
    }
}

/// A scheme placed in a cavity, with β and C always derived from the rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub scheme: SchemeRates,
    pub a_tilde: f64,
    pub alpha_loss: f64,
    pub t2: f64,
    pub n_ions: u32,
}

impl OperatingPoint {
    pub fn new(scheme: SchemeRates, cavity: &CavityModel, n_ions: u32) -> Self {
        OperatingPoint { scheme, a_tilde: cavity.a_tilde(), alpha_loss: cavity.alpha_loss(), t2: cavity.mirrors.t2, n_ions }
    }

    pub fn with_t2(mut self, t2: f64) -> Self {
        self.t2 = t2;
        self
    }

    pub fn cooperativity(&self) -> f64 {
        let s = &self.scheme;
        cooperativity_from_losses(s.zeta, self.n_ions, s.gamma_g, s.gamma_total(), self.a_tilde, self.alpha_loss, self.t2)
    }

    /// β including the collective N-ion enhancement.
    pub fn beta(&self, variant: BoundVariant) -> f64 {
        self.n_ions as f64 * beta(&self.scheme, variant)
    }

    pub fn input(&self, variant: BoundVariant) -> BoundInput {
        BoundInput {
            c: self.cooperativity(),
            r_u: self.scheme.r_u,
            t2: self.t2,
            alpha_loss: self.alpha_loss,
            beta: self.beta(variant),
            a_tilde: self.a_tilde,
            variant,
        }
    }

    pub fn evaluate(&self, variant: BoundVariant) -> Result<BoundResult> {
        p_bound(&self.input(variant))
    }

    pub fn t2_optimal(&self, variant: BoundVariant) -> f64 {
        t2_optimal(self.beta(variant), self.alpha_loss, self.a_tilde)
    }

    pub fn p_opt(&self, variant: BoundVariant) -> f64 {
        p_opt(self.beta(variant), self.alpha_loss, self.a_tilde)
    }
}
