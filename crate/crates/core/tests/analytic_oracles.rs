//! Independent oracles and property tests for the cavity model and the
//! closed-form collection bounds.

use std::f64::consts::PI;

use cpk_core::atomic::{EmitterModel, SchemeRates};
use cpk_core::bounds::{p_bound, p_bound_series, p_opt, t2_optimal, BoundInput, BoundVariant, OperatingPoint};
use cpk_core::cavity::{cooperativity_from_losses, CavityGeometry, CavityModel, MirrorSet};
use cpk_core::consts::{ppm, to_khz, to_mhz, SPEED_OF_LIGHT};
use cpk_core::design::{scheme_ladder, sweep_t2, Grid};
use proptest::prelude::*;

fn reference_point() -> OperatingPoint {
    let em = EmitterModel::calcium40();
    OperatingPoint::new(SchemeRates::v_photon(&em), &CavityModel::reference(), 1)
}

/// Waist of a symmetric two-mirror resonator from the Gaussian-beam q parameter.
fn waist_oracle(l: f64, r: f64, lambda: f64) -> f64 {
    let z_r = 0.5 * (l * (2.0 * r - l)).sqrt();
    (lambda * z_r / PI).sqrt()
}

#[test]
fn waist_matches_gaussian_beam_oracle() {
    let g = CavityGeometry::default();
    let cav = CavityModel::reference();
    let w = waist_oracle(g.length, g.mirror_radius, g.wavelength);
    assert!((cav.derived.w0 - w).abs() / w < 1e-12);
    assert!((cav.derived.fsr - SPEED_OF_LIGHT / (2.0 * g.length)).abs() < 1e-6);
}

#[test]
fn coupling_matches_dipole_moment_oracle() {
    // g = d √(ω / (2ħε₀V)) with V = π w0² l / 4 and d² from the partial decay
    // rate 2γ_g = ω³d²/(3πε₀ħc³) reduces to √(3cλ²γ_g / (π² w0² l)).
    let em = EmitterModel::calcium40();
    let cav = CavityModel::reference();
    let scheme = SchemeRates::v_photon(&em);
    let ctx = cpk_core::cavity::CouplingContext::new(&cav, &scheme, 1).unwrap();
    let (l, w0, lambda) = (cav.geometry.length, cav.derived.w0, cav.geometry.wavelength);
    let g = scheme.zeta * (3.0 * SPEED_OF_LIGHT * lambda * lambda * scheme.gamma_g / (PI * PI * w0 * w0 * l)).sqrt();
    assert!((ctx.g - g).abs() / g < 1e-12);
    assert!((to_mhz(g) - 0.88).abs() < 0.01);
}

#[test]
fn decay_rate_matches_round_trip_loss() {
    // κ is the field decay rate: the loss per round trip divided by twice the round-trip time.
    let cav = CavityModel::reference();
    let l_tot = cav.mirrors.total_loss();
    let kappa = l_tot / (2.0 * (2.0 * cav.geometry.length / SPEED_OF_LIGHT));
    assert!((cav.rates.kappa - kappa).abs() / kappa < 1e-12);
    assert!((to_khz(cav.rates.kappa) - 70.0).abs() < 1.0);
    assert!((cav.rates.finesse - 2.0 * PI / l_tot).abs() < 1e-6);
}

#[test]
fn headline_chain() {
    let r = reference_point().evaluate(BoundVariant::Full).unwrap();
    assert!((r.p_esc - 0.776).abs() < 0.001);
    assert!((r.p_in - 0.940).abs() < 0.002);
    assert!((r.p_s - 0.728).abs() < 0.005);
}

#[test]
fn sweep_maximum_agrees_with_closed_form_optimum() {
    let base = reference_point();
    let curve = sweep_t2(&base, ppm(10.0), ppm(1000.0), 4001, Grid::Log).unwrap();
    let best = curve.argmax().unwrap();
    let t_opt = base.t2_optimal(BoundVariant::Full);
    assert!((best.x - t_opt).abs() / t_opt < 0.005);
    assert!((best.p_bound - base.p_opt(BoundVariant::Full)).abs() < 1e-6);
}

#[test]
fn ladder_pure_fractions_increase() {
    let ladder = scheme_ladder(&reference_point()).unwrap();
    let fr: Vec<f64> = ladder.iter().map(|d| d.results.pure_fraction).collect();
    assert!(fr.windows(2).all(|w| w[1] > w[0]));
    assert!(fr[3] >= 0.85);
    assert!(ladder.iter().all(|d| d.results.p_bound < d.results.p_esc));
}

fn bound_at(beta: f64, alpha: f64, a_tilde: f64, t2: f64) -> f64 {
    // For a scheme with γ_u = 0, β = γ_g/γ ζ², and C from the mode-area form.
    let c = cooperativity_from_losses(1.0, 1, beta, 1.0, a_tilde, alpha, t2);
    let input = BoundInput { c, r_u: 0.0, t2, alpha_loss: alpha, beta, a_tilde, variant: BoundVariant::Full };
    p_bound(&input).unwrap().p_s
}

proptest! {
    #[test]
    fn closed_form_equals_long_series(c in 0.01f64..50.0, r_u in 0.0f64..0.99, t2 in 1e-6f64..1e-3, alpha in 1e-6f64..1e-3) {
        let input = BoundInput { c, r_u, t2, alpha_loss: alpha, beta: 0.5, a_tilde: 300.0, variant: BoundVariant::Full };
        let closed = p_bound(&input).unwrap();
        let series = p_bound_series(&input, 20_000).unwrap();
        prop_assert!((closed.p_s - series.p_s).abs() < 1e-10);
        prop_assert!(closed.p_s >= 0.0 && closed.p_s <= closed.p_esc && closed.p_esc <= 1.0);
        let pure = p_bound(&BoundInput { variant: BoundVariant::Pure, ..input }).unwrap();
        prop_assert!(pure.p_s <= closed.p_s + 1e-15);
    }

    #[test]
    fn bound_increases_with_cooperativity(c in 0.01f64..50.0, dc in 1e-3f64..10.0, r_u in 0.0f64..0.9) {
        let mk = |c| BoundInput { c, r_u, t2: ppm(90.0), alpha_loss: ppm(26.0), beta: 0.6, a_tilde: 340.0, variant: BoundVariant::Full };
        prop_assert!(p_bound(&mk(c + dc)).unwrap().p_s > p_bound(&mk(c)).unwrap().p_s);
    }

    #[test]
    fn optimal_transmission_is_a_maximum(beta in 0.05f64..1.0, alpha in ppm(1.0)..ppm(200.0), a_tilde in 10.0f64..2000.0, f in 0.5f64..0.98) {
        let t = t2_optimal(beta, alpha, a_tilde);
        let best = bound_at(beta, alpha, a_tilde, t);
        prop_assert!((best - p_opt(beta, alpha, a_tilde)).abs() < 1e-9);
        prop_assert!(bound_at(beta, alpha, a_tilde, t * f) <= best + 1e-12);
        prop_assert!(bound_at(beta, alpha, a_tilde, t / f) <= best + 1e-12);
    }

    #[test]
    fn escape_probability_ignores_input_mirror_split(t1 in 0.0f64..ppm(20.0), extra in 0.0f64..ppm(50.0)) {
        let mirrors = MirrorSet { t1, t2: ppm(90.0), scatter_absorb: extra };
        let cav = CavityModel::new(CavityGeometry::default(), mirrors).unwrap();
        let alpha = t1 + extra;
        prop_assert!((cav.p_escape() - ppm(90.0) / (ppm(90.0) + alpha)).abs() < 1e-14);
    }
}
