//! Master-equation simulation of the cavity-mediated Raman transition.
//!
//! [`build_system`] assembles the ion–cavity model, [`evolve`] integrates it
//! for a drive and returns photon-flux wavepackets and integrity diagnostics,
//! [`simulate_entanglement`] adds the ion–photon state of a bichromatic run and
//! [`reduced_model_evolve`] is the adiabatically eliminated four-level model.

mod evolve;
pub mod lindblad;
mod reduced;
mod system;

pub use evolve::*;
pub use reduced::*;
pub use system::*;
