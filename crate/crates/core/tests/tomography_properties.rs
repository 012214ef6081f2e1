//! Reconstruction, metric and error-bar properties on synthetic data.

use cpk_core::linalg::{hermitian_eigen, CMat};
use cpk_core::synthetic::{expected_counts, poisson_counts};
use cpk_core::tomography::{
    background_fidelity_limit, born_probabilities, bootstrap, metrics, reconstruct, target_state, CountTable,
};
use cpk_core::C64;
use proptest::prelude::*;

/// Ginibre-distributed density matrix G G† / tr from 32 real entries.
fn random_state(entries: &[f64]) -> CMat {
    let g = CMat::from_fn(4, |i, j| C64::new(entries[8 * i + 2 * j], entries[8 * i + 2 * j + 1]));
    let rho = g.mul(&g.adjoint());
    let tr = rho.trace().re;
    rho.scale(C64::new(1.0 / tr, 0.0))
}

/// |Ψ(θ)⟩ with a share `w` of white noise.
fn noisy_target(theta: f64, w: f64) -> CMat {
    CMat::outer(&target_state(theta)).scale(C64::new(1.0 - w, 0.0)).add(&CMat::identity(4).scale(C64::new(w / 4.0, 0.0)))
}

fn assert_physical(rho: &CMat) {
    assert!(rho.hermiticity_error() < 1e-10);
    assert!((rho.trace().re - 1.0).abs() < 1e-10);
    assert!(hermitian_eigen(rho).values[0] > -1e-10);
}

fn total_variation(rho: &CMat, counts: &CountTable) -> f64 {
    let p = born_probabilities(rho);
    let f = counts.frequencies().unwrap();
    let per_setting: f64 = (0..9).map(|k| 0.5 * (0..4).map(|o| (p[k][o] - f[k][o]).abs()).sum::<f64>()).sum();
    per_setting / 9.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn fidelity_never_exceeds_root_purity(entries in proptest::collection::vec(-1.0f64..1.0, 32)) {
        let rho = random_state(&entries);
        let m = metrics(&rho, None);
        prop_assert!((0.0..=1.0).contains(&m.fidelity));
        prop_assert!(m.purity >= 0.25 - 1e-12 && m.purity <= 1.0 + 1e-12);
        prop_assert!(m.fidelity <= m.purity.sqrt() + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn reconstruction_is_physical_and_ascends(entries in proptest::collection::vec(-1.0f64..1.0, 32), seed in 0u64..1000, events in 50.0f64..5000.0) {
        let counts = poisson_counts(&random_state(&entries), events, seed).unwrap();
        let rec = reconstruct(&counts).unwrap();
        assert_physical(&rec.state);
        prop_assert!(rec.trace.windows(2).all(|w| w[1] >= w[0]));
        let m = metrics(&rec.state, None);
        prop_assert!(m.fidelity <= m.purity.sqrt() + 1e-9);
    }
}

#[test]
fn exact_counts_recover_the_target() {
    let rho = CMat::outer(&target_state(0.91));
    let rec = reconstruct(&expected_counts(&rho, 1e6)).unwrap();
    assert_physical(&rec.state);
    assert!(rec.converged);
    let f = rec.state.expectation(&target_state(0.91)).re;
    assert!(f > 0.999, "{f}");
}

#[test]
fn uniform_counts_give_the_maximally_mixed_state() {
    let rec = reconstruct(&CountTable::new([[500; 4]; 9])).unwrap();
    assert!(rec.state.max_abs_diff(&CMat::identity(4).scale(C64::new(0.25, 0.0))) < 1e-3);
    let m = metrics(&rec.state, None);
    assert!((m.fidelity - 0.25).abs() < 1e-3 && (m.purity - 0.25).abs() < 1e-3);
}

#[test]
fn residual_shrinks_with_more_shots() {
    let rho = noisy_target(0.91, 0.05);
    let tv: Vec<f64> = [1e3, 1e4, 1e6]
        .iter()
        .map(|&n| {
            let counts = poisson_counts(&rho, n, 11).unwrap();
            total_variation(&reconstruct(&counts).unwrap().state, &counts)
        })
        .collect();
    assert!(tv[0] > tv[1] && tv[1] > tv[2], "{tv:?}");
}

#[test]
fn error_bars_scale_as_inverse_root_counts() {
    // An interior state keeps the positivity constraint inactive at both count levels;
    // near purity 0.95 most low-count estimates sit on the boundary and the spread is compressed.
    let rho = noisy_target(0.91, 0.2);
    let low = bootstrap(&poisson_counts(&rho, 2310.0, 5).unwrap(), 200, 17, None).unwrap();
    let high = bootstrap(&poisson_counts(&rho, 231_000.0, 5).unwrap(), 200, 18, None).unwrap();
    let ratio = low.fidelity_std / high.fidelity_std;
    assert!((7.0..=13.0).contains(&ratio), "{ratio}");
}

#[test]
fn error_bar_at_matched_statistics() {
    let counts = poisson_counts(&noisy_target(0.91, 0.045), 2310.0, 5).unwrap();
    let b = bootstrap(&counts, 200, 17, None).unwrap();
    assert!((0.003..=0.008).contains(&b.fidelity_std), "{}", b.fidelity_std);
    assert_eq!(b.failed, 0);
}

#[test]
fn minimal_bootstrap_is_flagged() {
    let counts = poisson_counts(&noisy_target(0.91, 0.05), 2310.0, 3).unwrap();
    let b = bootstrap(&counts, 2, 9, None).unwrap();
    assert!(b.low_confidence);
    assert!(b.fidelity_std.is_finite());
    assert!(bootstrap(&counts, 1, 9, None).is_err());
}

#[test]
fn bootstrap_is_reproducible() {
    let counts = poisson_counts(&noisy_target(0.91, 0.05), 2310.0, 3).unwrap();
    let a = bootstrap(&counts, 20, 42, None).unwrap();
    let b = bootstrap(&counts, 20, 42, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.fidelity_std.to_bits(), b.fidelity_std.to_bits());
}

#[test]
fn background_limit_endpoints() {
    assert!((background_fidelity_limit(0.5, 0.0, 60e-6).unwrap() - 1.0).abs() < 1e-12);
    assert!((background_fidelity_limit(0.0, 20.0, 60e-6).unwrap() - 0.25).abs() < 1e-12);
    assert!(background_fidelity_limit(0.5, -1.0, 60e-6).is_err());
}
