//! Fabry–Pérot cavity quantities derived from measured primitives.
//!
//! Losses are stored as fractions (1 ppm = 1e-6). Rates use the amplitude
//! convention: κ is the field decay rate, so the intracavity photon number
//! decays at 2κ.

use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::atomic::SchemeRates;
use crate::consts::{ppm, SPEED_OF_LIGHT};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityGeometry {
    /// Mirror separation l (m).
    pub length: f64,
    /// Mirror radius of curvature R_C (m).
    pub mirror_radius: f64,
    /// Vacuum wavelength λ (m).
    pub wavelength: f64,
}

impl Default for CavityGeometry {
    fn default() -> Self {
        CavityGeometry { length: 19.906e-3, mirror_radius: 9.984e-3, wavelength: 854e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorSet {
    /// Transmission of the back mirror.
    pub t1: f64,
    /// Transmission of the output mirror.
    pub t2: f64,
    /// Scattering, absorption and alignment losses per round trip.
    pub scatter_absorb: f64,
}

impl MirrorSet {
    /// Round-trip loss not leaving through the output mirror, L + T1.
    pub fn alpha_loss(&self) -> f64 {
        self.scatter_absorb + self.t1
    }

    pub fn total_loss(&self) -> f64 {
        self.t2 + self.alpha_loss()
    }

    pub fn with_t2(mut self, t2: f64) -> Self {
        self.t2 = t2;
        self
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("t1", self.t1), ("t2", self.t2), ("scatter_absorb", self.scatter_absorb)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::invalid(name, "must lie in [0, 1)"));
            }
        }
        if self.total_loss() <= 0.0 {
            return Err(Error::invalid("t2", "zero total loss gives an infinite finesse"));
        }
        Ok(())
    }
}

impl Default for MirrorSet {
    fn default() -> Self {
        MirrorSet { t1: ppm(2.9), t2: ppm(90.0), scatter_absorb: ppm(23.0) }
    }
}

/// Effective-area cross section σ = 3λ²/(2π).
pub fn scattering_cross_section(wavelength: f64) -> f64 {
    3.0 * wavelength * wavelength / (2.0 * PI)
}

/// Normalised mode area Ã = (π w0²/4) / σ for a given waist.
pub fn a_tilde_for_waist(w0: f64, wavelength: f64) -> f64 {
    (PI * w0 * w0 / 4.0) / scattering_cross_section(wavelength)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryDerived {
    /// Mode waist w0 (m).
    pub w0: f64,
    /// Free spectral range (Hz).
    pub fsr: f64,
    /// Signed stability parameter 1 − l/R_C.
    pub stability_g: f64,
    pub stability_g_abs: f64,
    /// Effective mode area π w0²/4 (m²).
    pub a_eff: f64,
    pub a_tilde: f64,
}

pub fn derive_geometry(geometry: &CavityGeometry) -> Result<GeometryDerived> {
    let CavityGeometry { length: l, mirror_radius: r, wavelength: lambda } = *geometry;
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid("length", "must be positive"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("mirror_radius", "must be positive"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("wavelength", "must be positive"));
    }
    if l >= 2.0 * r {
        return Err(Error::invalid("length", "unstable resonator: l must be below 2 R_C"));
    }
    let w0 = (lambda * (l * (2.0 * r - l)).sqrt() / (2.0 * PI)).sqrt();
    let stability_g = 1.0 - l / r;
    Ok(GeometryDerived {
        w0,
        fsr: SPEED_OF_LIGHT / (2.0 * l),
        stability_g,
        stability_g_abs: stability_g.abs(),
        a_eff: PI * w0 * w0 / 4.0,
        a_tilde: a_tilde_for_waist(w0, lambda),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDerived {
    pub kappa: f64,
    pub kappa_in: f64,
    pub kappa_ext: f64,
    pub finesse: f64,
    pub total_loss: f64,
    /// Intensity ringdown time τ_C (s).
    pub ringdown: f64,
}

pub fn derive_rates(geometry: &CavityGeometry, mirrors: &MirrorSet) -> Result<RateDerived> {
    mirrors.validate()?;
    if !(geometry.length > 0.0) {
        return Err(Error::invalid("length", "must be positive"));
    }
    let l = geometry.length;
    let unit = SPEED_OF_LIGHT / (4.0 * l);
    let total_loss = mirrors.total_loss();
    let finesse = 2.0 * PI / total_loss;
    Ok(RateDerived {
        kappa: unit * total_loss,
        kappa_in: unit * mirrors.alpha_loss(),
        kappa_ext: unit * mirrors.t2,
        finesse,
        total_loss,
        ringdown: finesse / PI * l / SPEED_OF_LIGHT,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityModel {
    pub geometry: CavityGeometry,
    pub mirrors: MirrorSet,
    pub derived: GeometryDerived,
    pub rates: RateDerived,
}

impl CavityModel {
    pub fn new(geometry: CavityGeometry, mirrors: MirrorSet) -> Result<Self> {
        Ok(CavityModel { geometry, mirrors, derived: derive_geometry(&geometry)?, rates: derive_rates(&geometry, &mirrors)? })
    }

    /// The experimental cavity: l = 19.906 mm, R_C = 9.984 mm, T1 = 2.9 ppm, T2 = 90 ppm, L = 23 ppm.
    pub fn reference() -> Self {
        Self::new(CavityGeometry::default(), MirrorSet::default()).expect("reference cavity is valid")
    }

    /// Replaces the geometric waist by `w0` (m), keeping length and losses.
    pub fn with_waist(mut self, w0: f64) -> Result<Self> {
        if !(w0 > 0.0 && w0.is_finite()) {
            return Err(Error::invalid("w0", "must be positive"));
        }
        self.derived.w0 = w0;
        self.derived.a_eff = PI * w0 * w0 / 4.0;
        self.derived.a_tilde = a_tilde_for_waist(w0, self.geometry.wavelength);
        Ok(self)
    }

    pub fn with_mirrors(self, mirrors: MirrorSet) -> Result<Self> {
        let rates = derive_rates(&self.geometry, &mirrors)?;
        Ok(CavityModel { mirrors, rates, ..self })
    }

    pub fn a_tilde(&self) -> f64 {
        self.derived.a_tilde
    }

    pub fn alpha_loss(&self) -> f64 {
        self.mirrors.alpha_loss()
    }

    pub fn p_escape(&self) -> f64 {
        self.mirrors.t2 / self.mirrors.total_loss()
    }
}

/// Vacuum Rabi coupling g = ζ √N √(c γ_g / (2 l Ã)) (rad/s).
pub fn coupling_strength(gamma_g: f64, length: f64, a_tilde: f64, zeta: f64, n_ions: u32) -> Result<f64> {
    if !(gamma_g > 0.0) {
        return Err(Error::invalid("gamma_g", "must be positive"));
    }
    if !(length > 0.0) {
        return Err(Error::invalid("length", "must be positive"));
    }
    if !(a_tilde > 0.0) {
        return Err(Error::invalid("a_tilde", "must be positive"));
    }
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::invalid("zeta", "must lie in (0, 1]"));
    }
    if n_ions == 0 {
        return Err(Error::invalid("n_ions", "must be at least 1"));
    }
    Ok(zeta * (n_ions as f64).sqrt() * (SPEED_OF_LIGHT * gamma_g / (2.0 * length * a_tilde)).sqrt())
}

/// C = g²/(2κγ).
pub fn cooperativity(g: f64, kappa: f64, gamma: f64) -> f64 {
    g * g / (2.0 * kappa * gamma)
}

/// C = ζ² N γ_g / (γ Ã (α_loss + T2)), the mode-area form.
pub fn cooperativity_from_losses(zeta: f64, n_ions: u32, gamma_g: f64, gamma: f64, a_tilde: f64, alpha_loss: f64, t2: f64) -> f64 {
    zeta * zeta * n_ions as f64 * gamma_g / (gamma * a_tilde * (alpha_loss + t2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingContext {
    pub g: f64,
    pub zeta: f64,
    pub n_ions: u32,
    pub c: f64,
    pub c_in: f64,
}

impl CouplingContext {
    /// Evaluates both cooperativity forms and fails if they disagree beyond 1e-6.
    pub fn new(cavity: &CavityModel, scheme: &SchemeRates, n_ions: u32) -> Result<Self> {
        let gamma = scheme.gamma_total();
        let g = coupling_strength(scheme.gamma_g, cavity.geometry.length, cavity.a_tilde(), scheme.zeta, n_ions)?;
        let c = cooperativity(g, cavity.rates.kappa, gamma);
        let alpha = cavity.alpha_loss();
        let t2 = cavity.mirrors.t2;
        let c_area = cooperativity_from_losses(scheme.zeta, n_ions, scheme.gamma_g, gamma, cavity.a_tilde(), alpha, t2);
        if ((c - c_area) / c_area).abs() > 1e-6 {
            return Err(Error::ModelIntegrity(alloc::format!("cooperativity forms disagree: {c} vs {c_area}")));
        }
        let c_in = if alpha > 0.0 { c * (alpha + t2) / alpha } else { f64::INFINITY };
        Ok(CouplingContext { g, zeta: scheme.zeta, n_ions, c, c_in })
    }
}
