//! Single-photon collection toolkit for cavity-coupled trapped ions.
//!
//! The crate is `no_std` (it needs `alloc`) and is organised bottom-up:
//!
//! * [`atomic`] – the ⁴⁰Ca⁺ level structure, Clebsch–Gordan weights and decay rates.
//! * [`cavity`] – mode geometry, loss budget, coupling strength and cooperativity.
//! * [`bounds`] – closed-form collection bounds and the optimal output coupler.
//! * [`design`] – transmission sweeps, coupling-scheme ladders and future systems.
//! * [`sim`] – Lindblad simulation of the cavity-mediated Raman transition.
//! * [`tomography`] – two-qubit state reconstruction and error bars.
//! * [`analysis`] – time-tag binning, efficiencies and photon-train statistics.
//! * [`synthetic`] – seeded generators of count tables and time tags.
//!
//! Angular frequencies are in rad/s, times in seconds and losses are plain
//! fractions unless a name says otherwise (`_ppm`, `_us`, `_mhz`).
#![no_std]
// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Float-method imports carry `allow(unused_imports)`: when std is linked anywhere in the
// build graph its inherent f64 methods take precedence over `num_traits::Float`.

extern crate alloc;

pub mod analysis;
pub mod atomic;
pub mod bounds;
pub mod cavity;
pub mod consts;
pub mod design;
mod error;
pub mod linalg;
pub mod ode;
pub mod sim;
pub mod synthetic;
pub mod tomography;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
