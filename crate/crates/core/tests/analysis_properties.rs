//! Wavepacket normalisation, efficiency correction and photon-train statistics.

use cpk_core::analysis::{
    bin_timetags, correct_for_path, fit_geometric, train_statistics, PathEfficiency, TimeTag, TimeTagSet, TrainStats,
};
use cpk_core::synthetic::{bernoulli_trains, train_slots, wavepacket_tags};
use cpk_core::Error;
use proptest::prelude::*;

fn exponential_packet(attempts: u64, p: f64, seed: u64) -> TimeTagSet {
    let t: Vec<f64> = (0..=200).map(|k| k as f64 * 0.5).collect();
    let d: Vec<f64> = t.iter().map(|x| x * (-x / 12.0f64).exp()).collect();
    wavepacket_tags(&t, &d, p, attempts, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn integral_is_independent_of_binning(seed in 0u64..10_000, bin in 0.05f64..10.0) {
        let tags = exponential_packet(2000, 0.5, seed);
        let wp = bin_timetags(&tags, bin).unwrap();
        let exact = tags.first_per_attempt().len() as f64 / 2000.0;
        prop_assert!((wp.integral() - exact).abs() < 1e-12);
        prop_assert!(wp.p_d.iter().all(|&p| p >= 0.0));
    }
}

#[test]
fn fifty_thousand_attempt_detection_count() {
    // 24358 detections out of 50000 attempts, spread over 100 μs.
    let tags: Vec<TimeTag> = (0..24_358u64).map(|i| TimeTag::new(i * 2, (i % 1000) as f64 * 0.1)).collect();
    let wp = bin_timetags(&TimeTagSet::new(tags, 50_000), 0.5).unwrap();
    assert!((wp.integral() - 0.48716).abs() < 1e-12);
}

#[test]
fn single_event_gives_unit_density() {
    let wp = bin_timetags(&TimeTagSet::new(vec![TimeTag::new(0, 0.3)], 1), 1.0).unwrap();
    assert_eq!(wp.p_d, vec![1.0]);
}

#[test]
fn doubling_the_bin_halves_a_sharp_peak() {
    // Events narrower than a bin: the same count spreads over twice the width.
    let tags: Vec<TimeTag> = (0..500u64).map(|i| TimeTag::new(i, 0.2)).collect();
    let set = TimeTagSet::new(tags, 1000);
    let peak = |bin: f64| bin_timetags(&set, bin).unwrap().p_d.iter().cloned().fold(0.0, f64::max);
    assert!((peak(1.0) - 0.5).abs() < 1e-12);
    assert!((peak(2.0) - 0.25).abs() < 1e-12);
}

#[test]
fn flat_density_is_bin_independent() {
    let tags: Vec<TimeTag> = (0..1000u64).map(|i| TimeTag::new(i, (i % 100) as f64 + 0.5)).collect();
    let mut set = TimeTagSet::new(tags, 1000);
    set.span_us = Some((0.0, 100.0));
    for bin in [1.0, 2.0, 5.0] {
        assert!(bin_timetags(&set, bin).unwrap().p_d.iter().all(|&p| (p - 0.01).abs() < 1e-12));
    }
}

#[test]
fn empty_input_warns() {
    let wp = bin_timetags(&TimeTagSet::new(Vec::new(), 10), 1.0).unwrap();
    assert_eq!(wp.integral(), 0.0);
    assert!(wp.warning.is_some());
}

#[test]
fn efficiency_correction_reproduces_reported_values() {
    let single = correct_for_path(0.490, 0.0, &PathEfficiency::default()).unwrap();
    assert!((single.p_s - 0.72).abs() < 0.005, "{}", single.p_s);
    assert!((single.p_s_err - 0.03).abs() < 0.005, "{}", single.p_s_err);
    let ent = correct_for_path(0.462, 0.0, &PathEfficiency::entanglement()).unwrap();
    assert!((ent.p_s - 0.69).abs() < 0.01, "{}", ent.p_s);
    let unity = correct_for_path(0.462, 0.001, &PathEfficiency::unity()).unwrap();
    assert_eq!(unity.p_s, 0.462);
    assert!(matches!(correct_for_path(0.8, 0.0, &PathEfficiency::default()), Err(Error::Calibration(_))));
}

#[test]
fn counting_error_follows_root_n() {
    let p = 0.49;
    let seeds = 300u64;
    let (mut vals, mut errs) = (Vec::new(), Vec::new());
    for s in 0..seeds {
        let wp = bin_timetags(&exponential_packet(4000, p, s), 1.0).unwrap();
        let eff = correct_for_path(wp.integral(), (wp.total_counts() as f64).sqrt() / 4000.0, &PathEfficiency::unity()).unwrap();
        assert!((eff.p_tot_err - (wp.total_counts() as f64).sqrt() / 4000.0).abs() < 1e-15);
        vals.push(eff.p_tot);
        errs.push(eff.p_tot_err);
    }
    let mean = vals.iter().sum::<f64>() / seeds as f64;
    let scatter = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64).sqrt();
    let reported = errs.iter().sum::<f64>() / seeds as f64;
    // Poisson counting overstates the binomial scatter by 1/√(1 − p).
    let ratio = scatter / (reported * (1.0 - p).sqrt());
    assert!((0.85..=1.15).contains(&ratio), "{ratio}");
    let quarter = bin_timetags(&exponential_packet(16_000, p, 1), 1.0).unwrap();
    let e4 = (quarter.total_counts() as f64).sqrt() / 16_000.0;
    assert!((reported / e4 - 2.0).abs() < 0.1);
}

#[test]
fn independent_slots_follow_powers() {
    let slots = train_slots(15, 200.0, 60.0);
    let stats = train_statistics(&bernoulli_trains(&[0.474; 15], 30_000, &slots, 21).unwrap()).unwrap();
    for (n, &p) in stats.p_consec.iter().enumerate() {
        let q = 0.474f64.powi(n as i32 + 1);
        let sigma = (q * (1.0 - q) / 30_000.0).sqrt();
        assert!((p - q).abs() <= 3.0 * sigma.max(1.0 / 30_000.0), "n={} {p} vs {q}", n + 1);
    }
    assert!(stats.p_consec.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn empty_trains_give_zero() {
    let mut set = TimeTagSet::new(Vec::new(), 100);
    set.slots = train_slots(15, 200.0, 60.0);
    let stats = train_statistics(&set).unwrap();
    assert!(stats.p_consec.iter().all(|&p| p == 0.0));
    assert!(fit_geometric(&stats).is_err());
}

#[test]
fn overlapping_windows_are_rejected() {
    let mut set = TimeTagSet::new(Vec::new(), 10);
    set.slots = vec![(0.0, 10.0), (5.0, 15.0)];
    assert!(train_statistics(&set).is_err());
}

#[test]
fn exact_geometric_input_is_recovered() {
    let p: Vec<f64> = (1..=15).map(|n| 0.5f64.powi(n)).collect();
    let fit = fit_geometric(&TrainStats::from_consecutive(p, 30_000)).unwrap();
    assert!((fit.p - 0.5).abs() < 1e-12);
    assert!(!fit.non_geometric);
    assert!(fit_geometric(&TrainStats::from_consecutive(vec![0.5], 30_000)).is_err());
}

#[test]
fn decaying_slots_are_flagged() {
    let slots = train_slots(15, 200.0, 60.0);
    let p: Vec<f64> = (0..15).map(|i| 0.474 * 0.99f64.powi(i)).collect();
    let stats = train_statistics(&bernoulli_trains(&p, 30_000, &slots, 4).unwrap()).unwrap();
    assert!(fit_geometric(&stats).unwrap().non_geometric);
}

#[test]
fn fitted_p_covers_the_slot_mean() {
    let slots = train_slots(15, 200.0, 60.0);
    let trials = 400u64;
    let hits = (0..trials)
        .filter(|&s| {
            let stats = train_statistics(&bernoulli_trains(&[0.474; 15], 30_000, &slots, s).unwrap()).unwrap();
            let fit = fit_geometric(&stats).unwrap();
            (fit.p - stats.mean_slot_probability()).abs() < 2.0 * fit.stderr
        })
        .count();
    assert!(hits as f64 >= 0.95 * trials as f64, "{hits}/{trials}");
}
