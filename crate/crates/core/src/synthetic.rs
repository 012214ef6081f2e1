//! Seeded generators of tomography counts and detection time tags.
//!
//! All generators use ChaCha8 seeded from a `u64`, so identical arguments give
//! identical data on every platform.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::analysis::{TimeTag, TimeTagSet};
use crate::linalg::CMat;
use crate::tomography::{born_probabilities, CountTable};
use crate::{Error, Result};

/// Counts equal to the rounded Born expectation for `shots` events per setting.
pub fn expected_counts(rho: &CMat, shots: f64) -> CountTable {
    let p = born_probabilities(rho);
    let mut c = [[0u64; 4]; 9];
    for (row, probs) in c.iter_mut().zip(p.iter()) {
        for (n, &q) in row.iter_mut().zip(probs.iter()) {
            *n = (q * shots).round() as u64;
        }
    }
    CountTable::new(c)
}

/// Poisson counts with mean p·`events` per setting and outcome.
pub fn poisson_counts(rho: &CMat, events: f64, seed: u64) -> Result<CountTable> {
    if !(events > 0.0 && events.is_finite()) {
        return Err(Error::invalid("events", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = born_probabilities(rho);
    let mut c = [[0u64; 4]; 9];
    for (row, probs) in c.iter_mut().zip(p.iter()) {
        for (n, &q) in row.iter_mut().zip(probs.iter()) {
            let mean = q * events;
            *n = if mean > 0.0 { Poisson::new(mean).expect("positive mean").sample(&mut rng) as u64 } else { 0 };
        }
    }
    Ok(CountTable::new(c))
}

/// Evenly spaced train windows: slot i covers [i(len + gap), i(len + gap) + len) μs.
pub fn train_slots(n_slots: usize, len_us: f64, gap_us: f64) -> Vec<(f64, f64)> {
    (0..n_slots).map(|i| (i as f64 * (len_us + gap_us), i as f64 * (len_us + gap_us) + len_us)).collect()
}

/// Independent per-slot detections with probabilities `p_slots`; each
/// detection time is uniform within its window.
pub fn bernoulli_trains(p_slots: &[f64], attempts: u64, slots: &[(f64, f64)], seed: u64) -> Result<TimeTagSet> {
    if p_slots.len() != slots.len() {
        return Err(Error::invalid("p_slots", "needs one probability per slot window"));
    }
    if p_slots.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("p_slots", "probabilities must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tags = Vec::new();
    for a in 0..attempts {
        for (&p, &(lo, hi)) in p_slots.iter().zip(slots) {
            let hit = rng.random::<f64>() < p;
            let u = rng.random::<f64>();
            if hit {
                tags.push(TimeTag::new(a, lo + u * (hi - lo)));
            }
        }
    }
    let span = slots.last().map(|s| (0.0, s.1));
    Ok(TimeTagSet { tags, attempts, span_us: span, slots: slots.to_vec() })
}

/// Detection events drawn from a wavepacket shape.
///
/// Each attempt yields a detection with probability `p_detect`, at a time
/// drawn from the piecewise-linear density through (`times_us`, `density`).
pub fn wavepacket_tags(times_us: &[f64], density: &[f64], p_detect: f64, attempts: u64, seed: u64) -> Result<TimeTagSet> {
    if times_us.len() != density.len() || times_us.len() < 2 {
        return Err(Error::invalid("density", "needs at least two samples matching the time grid"));
    }
    if !(0.0..=1.0).contains(&p_detect) {
        return Err(Error::invalid("p_detect", "must lie in [0, 1]"));
    }
    let mut cum = Vec::with_capacity(times_us.len());
    cum.push(0.0);
    for k in 1..times_us.len() {
        let area = 0.5 * (times_us[k] - times_us[k - 1]) * (density[k].max(0.0) + density[k - 1].max(0.0));
        cum.push(cum[k - 1] + area);
    }
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::invalid("density", "must have positive area"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tags = Vec::new();
    for a in 0..attempts {
        let hit = rng.random::<f64>() < p_detect;
        let u = rng.random::<f64>() * total;
        if hit {
            let k = cum.partition_point(|&c| c < u).clamp(1, cum.len() - 1);
            let f = if cum[k] > cum[k - 1] { (u - cum[k - 1]) / (cum[k] - cum[k - 1]) } else { 0.0 };
            tags.push(TimeTag::new(a, times_us[k - 1] + f * (times_us[k] - times_us[k - 1])));
        }
    }
    Ok(TimeTagSet { tags, attempts, span_us: Some((times_us[0], *times_us.last().unwrap())), slots: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomography::target_state;

    #[test]
    fn seeded_generators_are_reproducible() {
        let rho = CMat::outer(&target_state(0.91));
        assert_eq!(poisson_counts(&rho, 2300.0, 7).unwrap(), poisson_counts(&rho, 2300.0, 7).unwrap());
        assert_ne!(poisson_counts(&rho, 2300.0, 7).unwrap(), poisson_counts(&rho, 2300.0, 8).unwrap());
        let slots = train_slots(3, 200.0, 60.0);
        assert_eq!(bernoulli_trains(&[0.5; 3], 100, &slots, 1).unwrap(), bernoulli_trains(&[0.5; 3], 100, &slots, 1).unwrap());
    }

    #[test]
    fn slots_are_disjoint() {
        let s = train_slots(15, 200.0, 60.0);
        assert_eq!(s[1], (260.0, 460.0));
        assert!(s.windows(2).all(|w| w[0].1 < w[1].0));
    }

    #[test]
    fn wavepacket_sampling_rate() {
        let t: Vec<f64> = (0..=100).map(|k| k as f64).collect();
        let d: Vec<f64> = t.iter().map(|x| (-x / 20.0f64).exp()).collect();
        let set = wavepacket_tags(&t, &d, 0.49, 50_000, 3).unwrap();
        let frac = set.tags.len() as f64 / 50_000.0;
        assert!((frac - 0.49).abs() < 0.01);
    }
}
