//! Time-tag binning, detection efficiencies and photon-train statistics.
//!
//! Detection times are in μs relative to the start of the drive pulse.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeTag {
    pub attempt: u64,
    pub t_us: f64,
    pub detector: u32,
    pub pol: Option<String>,
}

impl TimeTag {
    pub fn new(attempt: u64, t_us: f64) -> Self {
        TimeTag { attempt, t_us, detector: 0, pol: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeTagSet {
    pub tags: Vec<TimeTag>,
    /// Number of attempts k.
    pub attempts: u64,
    /// Acquisition span (μs); tags outside it are invalid.
    pub span_us: Option<(f64, f64)>,
    /// Train slot windows (μs), ordered and disjoint.
    pub slots: Vec<(f64, f64)>,
}

impl TimeTagSet {
    pub fn new(tags: Vec<TimeTag>, attempts: u64) -> Self {
        TimeTagSet { tags, attempts, span_us: None, slots: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.attempts == 0 {
            return Err(Error::invalid("attempts", "must be positive"));
        }
        for tag in &self.tags {
            if tag.attempt >= self.attempts {
                return Err(Error::invalid("attempt_index", format!("{} is not below the attempt count {}", tag.attempt, self.attempts)));
            }
            if !tag.t_us.is_finite() {
                return Err(Error::invalid("t_us", "must be finite"));
            }
            if let Some((a, b)) = self.span_us {
                if tag.t_us < a || tag.t_us > b {
                    return Err(Error::invalid("t_us", format!("{} outside the acquisition span [{a}, {b}]", tag.t_us)));
                }
            }
        }
        Ok(())
    }

    /// Earliest tag of each attempt, in attempt order.
    pub fn first_per_attempt(&self) -> Vec<&TimeTag> {
        let mut sorted: Vec<&TimeTag> = self.tags.iter().collect();
        sorted.sort_by(|a, b| a.attempt.cmp(&b.attempt).then(a.t_us.total_cmp(&b.t_us)));
        sorted.dedup_by_key(|t| t.attempt);
        sorted
    }

    /// Number of attempts with more than one detection.
    pub fn multi_detection_attempts(&self) -> usize {
        let mut attempts: Vec<u64> = self.tags.iter().map(|t| t.attempt).collect();
        attempts.sort_unstable();
        let mut n = 0;
        let mut k = 0;
        while k < attempts.len() {
            let mut j = k + 1;
            while j < attempts.len() && attempts[j] == attempts[k] {
                j += 1;
            }
            if j - k > 1 {
                n += 1;
            }
            k = j;
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wavepacket {
    pub edges_us: Vec<f64>,
    pub counts: Vec<u64>,
    /// p_d = N_d/(k·δt) (1/μs).
    pub p_d: Vec<f64>,
    /// Poisson error √N_d/(k·δt) (1/μs).
    pub p_d_err: Vec<f64>,
    pub attempts: u64,
    pub bin_us: f64,
    pub warning: Option<String>,
}

impl Wavepacket {
    /// Σ p_d δt, the detected probability per attempt.
    pub fn integral(&self) -> f64 {
        self.p_d.iter().sum::<f64>() * self.bin_us
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn centers_us(&self) -> Vec<f64> {
        self.edges_us.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Histogram of the earliest detection per attempt, normalised to a
/// probability density per attempt.
///
/// The histogram covers `span_us` when set, otherwise [0, latest tag].
pub fn bin_timetags(tags: &TimeTagSet, bin_us: f64) -> Result<Wavepacket> {
    if !(bin_us > 0.0 && bin_us.is_finite()) {
        return Err(Error::invalid("bin_us", "must be positive"));
    }
    tags.validate()?;
    let first = tags.first_per_attempt();
    let (start, end) = tags.span_us.unwrap_or_else(|| {
        let times = first.iter().map(|t| t.t_us);
        (times.clone().fold(0.0, f64::min), times.fold(0.0, f64::max))
    });
    let n_bins = (((end - start) / bin_us).ceil() as usize).max(1);
    let edges_us: Vec<f64> = (0..=n_bins).map(|i| start + i as f64 * bin_us).collect();
    let mut counts = vec![0u64; n_bins];
    for t in &first {
        let k = (((t.t_us - start) / bin_us).floor() as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    let norm = 1.0 / (tags.attempts as f64 * bin_us);
    let p_d = counts.iter().map(|&c| c as f64 * norm).collect();
    let p_d_err = counts.iter().map(|&c| (c as f64).sqrt() * norm).collect();
    let warning = first.is_empty().then(|| String::from("no detection events; wavepacket is zero"));
    Ok(Wavepacket { edges_us, counts, p_d, p_d_err, attempts: tags.attempts, bin_us, warning })
}

/// Detection path: optical elements, fibre coupling and detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEfficiency {
    pub p_el: f64,
    pub p_fc: f64,
    pub p_det: f64,
    pub p_el_err: f64,
    pub p_fc_err: f64,
    pub p_det_err: f64,
}

impl Default for PathEfficiency {
    fn default() -> Self {
        PathEfficiency { p_el: 0.97, p_fc: 0.81, p_det: 0.87, p_el_err: 0.01, p_fc_err: 0.03, p_det_err: 0.02 }
    }
}

impl PathEfficiency {
    /// The path with the polarisation analysis optics, which cost another 1 % in P_el.
    pub fn entanglement() -> Self {
        PathEfficiency { p_el: 0.96, ..Self::default() }
    }

    /// A lossless path with no calibration uncertainty.
    pub fn unity() -> Self {
        PathEfficiency { p_el: 1.0, p_fc: 1.0, p_det: 1.0, p_el_err: 0.0, p_fc_err: 0.0, p_det_err: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("path.p_el", self.p_el), ("path.p_fc", self.p_fc), ("path.p_det", self.p_det)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, "must lie in (0, 1]"));
            }
        }
        for (name, v) in [("path.p_el_err", self.p_el_err), ("path.p_fc_err", self.p_fc_err), ("path.p_det_err", self.p_det_err)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn p_path(&self) -> f64 {
        self.p_el * self.p_fc * self.p_det
    }

    /// Uncertainty of P_path from the factor errors in quadrature.
    pub fn p_path_err(&self) -> f64 {
        let rel = (self.p_el_err / self.p_el).powi(2) + (self.p_fc_err / self.p_fc).powi(2) + (self.p_det_err / self.p_det).powi(2);
        self.p_path() * rel.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Efficiency {
    pub p_tot: f64,
    pub p_tot_err: f64,
    pub p_s: f64,
    pub p_s_err: f64,
}

/// P_S = P_tot / P_path from a detected probability with its counting error.
pub fn correct_for_path(p_tot: f64, p_tot_err: f64, path: &PathEfficiency) -> Result<Efficiency> {
    path.validate()?;
    if !(0.0..=1.0).contains(&p_tot) {
        return Err(Error::invalid("p_tot", "must lie in [0, 1]"));
    }
    let p_path = path.p_path();
    let p_s = p_tot / p_path;
    if p_s > 1.0 {
        return Err(Error::Calibration(format!("P_S = {p_s:.4} exceeds 1 after dividing by P_path = {p_path:.4}")));
    }
    let rel_tot = if p_tot > 0.0 { p_tot_err / p_tot } else { 0.0 };
    let p_s_err = p_s * (rel_tot.powi(2) + (path.p_path_err() / p_path).powi(2)).sqrt();
    Ok(Efficiency { p_tot, p_tot_err, p_s, p_s_err })
}

/// Integrates a wavepacket and corrects it for the detection path.
pub fn integrate_efficiency(wp: &Wavepacket, path: &PathEfficiency) -> Result<Efficiency> {
    let k = wp.attempts as f64;
    correct_for_path(wp.integral(), (wp.total_counts() as f64).sqrt() / k, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    pub n_slots: usize,
    pub attempts: u64,
    /// Detection probability of each slot.
    pub p_slot: Vec<f64>,
    /// P(n): probability of detections in every slot 1..n.
    pub p_consec: Vec<f64>,
    pub consec_counts: Vec<u64>,
}

impl TrainStats {
    pub fn mean_slot_probability(&self) -> f64 {
        self.p_slot.iter().sum::<f64>() / self.n_slots as f64
    }

    /// Stats from given P(n) values, as if measured over `attempts` trains.
    pub fn from_consecutive(p_consec: Vec<f64>, attempts: u64) -> Self {
        let consec_counts = p_consec.iter().map(|p| (p * attempts as f64).round() as u64).collect();
        TrainStats { n_slots: p_consec.len(), attempts, p_slot: Vec::new(), p_consec, consec_counts }
    }
}

/// Per-slot and consecutive-detection statistics of photon trains.
pub fn train_statistics(tags: &TimeTagSet) -> Result<TrainStats> {
    tags.validate()?;
    let slots = &tags.slots;
    if slots.is_empty() {
        return Err(Error::invalid("slots", "at least one slot window is required"));
    }
    for (i, &(a, b)) in slots.iter().enumerate() {
        if !(b > a) {
            return Err(Error::invalid("slots", format!("window {i} is empty or reversed")));
        }
        if i > 0 && a < slots[i - 1].1 {
            return Err(Error::invalid("slots", format!("window {i} overlaps or precedes window {}", i - 1)));
        }
    }
    let n = slots.len();
    let k = tags.attempts as usize;
    let mut hit = vec![false; k * n];
    for t in &tags.tags {
        // Windows are sorted and disjoint.
        let idx = slots.partition_point(|&(_, b)| b <= t.t_us);
        if idx < n && t.t_us >= slots[idx].0 {
            hit[t.attempt as usize * n + idx] = true;
        }
    }
    let mut slot_counts = vec![0u64; n];
    let mut consec_counts = vec![0u64; n];
    for a in 0..k {
        let row = &hit[a * n..(a + 1) * n];
        for (s, &h) in row.iter().enumerate() {
            slot_counts[s] += h as u64;
        }
        let run = row.iter().take_while(|&&h| h).count();
        for c in consec_counts.iter_mut().take(run) {
            *c += 1;
        }
    }
    let kf = k as f64;
    let p_consec: Vec<f64> = consec_counts.iter().map(|&c| c as f64 / kf).collect();
    debug_assert!(p_consec.windows(2).all(|w| w[0] >= w[1]));
    Ok(TrainStats { n_slots: n, attempts: tags.attempts, p_slot: slot_counts.iter().map(|&c| c as f64 / kf).collect(), p_consec, consec_counts })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricFit {
    pub p: f64,
    pub stderr: f64,
    /// χ² of the increments about the fit.
    pub chi2: f64,
    pub dof: usize,
    /// χ² of the per-slot probabilities about their mean, with one fewer
    /// degree of freedom than slots.
    pub slot_chi2: Option<f64>,
    /// χ² above its 99.9 % quantile: the decay is not a single geometric law.
    pub non_geometric: bool,
}

/// χ² of the per-slot detection probabilities about their mean.
fn slot_homogeneity(stats: &TrainStats) -> Option<f64> {
    if stats.p_slot.len() < 2 {
        return None;
    }
    let mean = stats.mean_slot_probability();
    let var = mean * (1.0 - mean) / stats.attempts as f64;
    if !(var > 0.0) {
        return None;
    }
    Some(stats.p_slot.iter().map(|p| (p - mean).powi(2) / var).sum())
}

/// Upper quantile of χ²_k by the Wilson–Hilferty approximation.
pub fn chi2_quantile_wh(k: usize, z: f64) -> f64 {
    let k = k as f64;
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}

const Z_999: f64 = 3.090_232_306_167_813;

/// Weighted fit of P(n) = pⁿ.
///
/// The nested P(n) are strongly correlated, so the fit uses the increments
/// d_n = log P(n) − log P(n−1) (with P(0) = 1), which are approximately
/// independent. Increment n has binomial variance (1 − p)/(p N P(n−1)) with
/// the observed P(n−1) and the fitted p; the inverse-variance mean of the
/// increments is iterated to a fixed point.
///
/// Residuals are checked twice: the increments against the fitted p, and,
/// when per-slot probabilities are available, the slots against their mean.
/// Either χ² above its 99.9 % quantile flags non-geometric behaviour.
pub fn fit_geometric(stats: &TrainStats) -> Result<GeometricFit> {
    let used: Vec<f64> = stats.p_consec.iter().copied().take_while(|&p| p > 0.0).collect();
    if used.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} nonzero P(n) points; at least two are required", used.len())));
    }
    if stats.attempts == 0 {
        return Err(Error::invalid("attempts", "must be positive"));
    }
    let nf = stats.attempts as f64;
    let before: Vec<f64> = core::iter::once(1.0).chain(used.iter().copied()).take(used.len()).collect();
    let mut prev = 1.0;
    let d: Vec<f64> = used
        .iter()
        .map(|&p| {
            let v = (p / prev).ln();
            prev = p;
            v
        })
        .collect();
    let weights = |p: f64| -> Vec<f64> {
        let q = p.clamp(1e-12, 1.0 - 1e-12);
        before.iter().map(|&pb| nf * pb * q / (1.0 - q)).collect()
    };
    let mut logp = d.iter().sum::<f64>() / d.len() as f64;
    let mut w = weights(logp.exp());
    for _ in 0..100 {
        let sw: f64 = w.iter().sum();
        let next = d.iter().zip(&w).map(|(d, w)| d * w).sum::<f64>() / sw;
        let done = (next - logp).abs() < 1e-15;
        logp = next;
        w = weights(logp.exp());
        if done {
            break;
        }
    }
    let sw: f64 = w.iter().sum();
    let p = logp.exp();
    let chi2: f64 = d.iter().zip(&w).map(|(d, w)| w * (d - logp).powi(2)).sum();
    let dof = d.len() - 1;
    let mut non_geometric = dof > 0 && chi2 > chi2_quantile_wh(dof, Z_999);
    let slot_chi2 = slot_homogeneity(stats);
    if let Some(c) = slot_chi2 {
        non_geometric |= c > chi2_quantile_wh(stats.p_slot.len() - 1, Z_999);
    }
    Ok(GeometricFit { p, stderr: p / sw.sqrt(), chi2, dof, slot_chi2, non_geometric })
}
