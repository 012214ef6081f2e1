//! Physical constants and unit helpers.

use core::f64::consts::PI;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Bohr magneton over Planck's constant (Hz/G).
pub const MU_B_OVER_H: f64 = 1.399_62e6;

pub const TWO_PI: f64 = 2.0 * PI;

/// Converts a frequency in MHz to an angular frequency in rad/s.
#[inline]
pub fn mhz(f: f64) -> f64 {
    TWO_PI * f * 1e6
}

/// Converts a frequency in kHz to an angular frequency in rad/s.
#[inline]
pub fn khz(f: f64) -> f64 {
    TWO_PI * f * 1e3
}

/// Angular frequency (rad/s) to MHz.
#[inline]
pub fn to_mhz(w: f64) -> f64 {
    w / (TWO_PI * 1e6)
}

/// Angular frequency (rad/s) to kHz.
#[inline]
pub fn to_khz(w: f64) -> f64 {
    w / (TWO_PI * 1e3)
}

#[inline]
pub fn ppm(x: f64) -> f64 {
    x * 1e-6
}

#[inline]
pub fn to_ppm(x: f64) -> f64 {
    x * 1e6
}
