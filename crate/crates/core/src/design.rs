//! Design-space exploration on top of the closed-form bounds.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::atomic::SchemeRates;
use crate::bounds::{BoundVariant, OperatingPoint};
use crate::cavity::{a_tilde_for_waist, CavityModel};
use crate::consts::ppm;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignResults {
    pub p_bound: f64,
    pub p_pure: f64,
    pub pure_fraction: f64,
    pub p_in: f64,
    pub p_esc: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub label: String,
    pub point: OperatingPoint,
    pub results: DesignResults,
}

pub fn evaluate(point: &OperatingPoint) -> Result<DesignResults> {
    let full = point.evaluate(BoundVariant::Full)?;
    let pure = point.evaluate(BoundVariant::Pure)?;
    Ok(DesignResults {
        p_bound: full.p_s,
        p_pure: pure.p_s,
        pure_fraction: if full.p_s > 0.0 { pure.p_s / full.p_s } else { 0.0 },
        p_in: full.p_in,
        p_esc: full.p_esc,
        c: point.cooperativity(),
    })
}

pub fn design_point(label: &str, point: OperatingPoint) -> Result<DesignPoint> {
    Ok(DesignPoint { label: label.into(), point, results: evaluate(&point)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Output-mirror transmission (fraction).
    T2,
    /// Coupling strength relative to the base point, g/g_base.
    GRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grid {
    Linear,
    #[default]
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub x: f64,
    pub p_bound: f64,
    pub p_pure: f64,
    pub p_in: f64,
    pub p_esc: f64,
}

impl SweepPoint {
    pub fn pure_fraction(&self) -> f64 {
        if self.p_bound > 0.0 {
            self.p_pure / self.p_bound
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    /// Closed-form optimum of the full bound on this axis, if defined.
    pub x_opt: Option<f64>,
    /// Closed-form optimum of the pure bound on this axis, if defined.
    pub x_opt_pure: Option<f64>,
}

impl SweepCurve {
    /// Grid point with the largest full bound.
    pub fn argmax(&self) -> Option<&SweepPoint> {
        self.points.iter().max_by(|a, b| a.p_bound.total_cmp(&b.p_bound))
    }
}

pub fn grid(min: f64, max: f64, n: usize, kind: Grid) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid("points", "need at least 2 points"));
    }
    if !(min < max) || !min.is_finite() || !max.is_finite() {
        return Err(Error::invalid("range", "min must be below max"));
    }
    let step = |i: usize| i as f64 / (n - 1) as f64;
    Ok(match kind {
        Grid::Linear => (0..n).map(|i| min + (max - min) * step(i)).collect(),
        Grid::Log => {
            if min <= 0.0 {
                return Err(Error::invalid("range", "log grid needs a positive minimum"));
            }
            let (a, b) = (min.ln(), max.ln());
            (0..n).map(|i| (a + (b - a) * step(i)).exp()).collect()
        }
    })
}

fn sweep_point(x: f64, point: &OperatingPoint) -> Result<SweepPoint> {
    let r = evaluate(point)?;
    Ok(SweepPoint { x, p_bound: r.p_bound, p_pure: r.p_pure, p_in: r.p_in, p_esc: r.p_esc })
}

/// Evaluates the bounds over output-mirror transmissions in `[t2_min, t2_max]`.
pub fn sweep_t2(base: &OperatingPoint, t2_min: f64, t2_max: f64, n: usize, kind: Grid) -> Result<SweepCurve> {
    if !(t2_min > 0.0 && t2_max < 1.0) {
        return Err(Error::invalid("t2_range", "must lie within (0, 1)"));
    }
    let xs = grid(t2_min, t2_max, n, kind)?;
    let points = xs.iter().map(|&t2| sweep_point(t2, &base.with_t2(t2))).collect::<Result<Vec<_>>>()?;
    Ok(SweepCurve {
        axis: SweepAxis::T2,
        points,
        x_opt: Some(base.t2_optimal(BoundVariant::Full)),
        x_opt_pure: Some(base.t2_optimal(BoundVariant::Pure)),
    })
}

/// Evaluates the bounds while scaling the coupling g by a factor in `[min, max]`.
///
/// Scaling g by s scales C by s², implemented as Ã → Ã/s².
pub fn sweep_g_ratio(base: &OperatingPoint, min: f64, max: f64, n: usize, kind: Grid) -> Result<SweepCurve> {
    if !(min > 0.0) {
        return Err(Error::invalid("g_ratio_range", "must be positive"));
    }
    let xs = grid(min, max, n, kind)?;
    let points = xs
        .iter()
        .map(|&s| {
            let mut p = *base;
            p.a_tilde = base.a_tilde / (s * s);
            sweep_point(s, &p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepCurve { axis: SweepAxis::GRatio, points, x_opt: None, x_opt_pure: None })
}

/// Coupling schemes A–D: V photon (ζ² = 1/2), H photon (ζ = 1), and
/// superradiant H photons from two and three ions.
pub fn scheme_ladder(base: &OperatingPoint) -> Result<Vec<DesignPoint>> {
    let specs: [(&str, f64, u32); 4] =
        [("A", core::f64::consts::FRAC_1_SQRT_2, 1), ("B", 1.0, 1), ("C", 1.0, 2), ("D", 1.0, 3)];
    specs
        .iter()
        .map(|&(label, zeta, n)| {
            let point = OperatingPoint { scheme: base.scheme.with_zeta(zeta), n_ions: n, ..*base };
            design_point(label, point)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FutureSystem {
    /// Ten times lower unwanted loss (2.7 ppm) with T2 = 25 ppm.
    LowLoss,
    /// Waist reduced to 3.9 μm with T2 = 252 ppm.
    SmallWaist,
    /// Ten ions coupled collectively with T2 = 252 ppm.
    TenIon,
}

impl FutureSystem {
    pub const ALL: [FutureSystem; 3] = [FutureSystem::LowLoss, FutureSystem::SmallWaist, FutureSystem::TenIon];

    pub fn id(self) -> &'static str {
        match self {
            FutureSystem::LowLoss => "low-loss",
            FutureSystem::SmallWaist => "small-waist",
            FutureSystem::TenIon => "ten-ion",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.id() == id)
    }
}

/// Evaluates one of the future parameter combinations with ζ = 1.
pub fn evaluate_future(cavity: &CavityModel, scheme: SchemeRates, system: FutureSystem) -> Result<DesignPoint> {
    let scheme = scheme.with_zeta(1.0);
    let base = OperatingPoint::new(scheme, cavity, 1);
    let point = match system {
        FutureSystem::LowLoss => OperatingPoint { alpha_loss: ppm(2.7), t2: ppm(25.0), ..base },
        FutureSystem::SmallWaist => {
            OperatingPoint { a_tilde: a_tilde_for_waist(3.9e-6, cavity.geometry.wavelength), t2: ppm(252.0), ..base }
        }
        FutureSystem::TenIon => OperatingPoint { n_ions: 10, t2: ppm(252.0), ..base },
    };
    design_point(system.id(), point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::EmitterModel;

    fn base() -> OperatingPoint {
        OperatingPoint::new(SchemeRates::v_photon(&EmitterModel::calcium40()), &CavityModel::reference(), 1)
    }

    #[test]
    fn t2_sweep_landmarks() {
        let b = base();
        let at90 = evaluate(&b).unwrap();
        assert!((at90.p_bound - 0.73).abs() < 0.005);
        let at216 = evaluate(&b.with_t2(ppm(216.0))).unwrap();
        assert!((at216.p_bound - 0.78).abs() < 0.01);
        let curve = sweep_t2(&b, ppm(100.0), ppm(400.0), 301, Grid::Linear).unwrap();
        let best = curve.argmax().unwrap().x;
        assert!((best - curve.x_opt.unwrap()).abs() <= ppm(1.0));
        assert!(curve.points.windows(2).all(|w| w[0].x < w[1].x));
    }

    #[test]
    fn ladder_ordering() {
        let ladder = scheme_ladder(&base()).unwrap();
        assert!((ladder[0].results.pure_fraction - 0.53).abs() < 0.01);
        for w in ladder.windows(2) {
            assert!(w[1].results.pure_fraction > w[0].results.pure_fraction);
        }
        let d = &ladder[3].results;
        assert!(d.pure_fraction >= 0.85 && (d.p_bound - 0.77).abs() < 0.01);
        for p in &ladder {
            assert!(p.results.p_bound < p.results.p_esc);
        }
    }

    #[test]
    fn future_systems_near_ninety_percent() {
        let cav = CavityModel::reference();
        let s = SchemeRates::v_photon(&EmitterModel::calcium40());
        for sys in FutureSystem::ALL {
            let r = evaluate_future(&cav, s, sys).unwrap().results;
            assert!((0.88..=0.92).contains(&r.p_bound), "{:?} {}", sys, r.p_bound);
            assert!((0.88..=0.92).contains(&r.pure_fraction), "{:?} {}", sys, r.pure_fraction);
        }
    }

    #[test]
    fn waist_and_area_paths_agree() {
        let cav = CavityModel::reference();
        let s = SchemeRates::v_photon(&EmitterModel::calcium40());
        let via_area = evaluate_future(&cav, s, FutureSystem::SmallWaist).unwrap().results;
        let small = cav.with_waist(3.9e-6).unwrap().with_mirrors(cav.mirrors.with_t2(ppm(252.0))).unwrap();
        let via_waist = evaluate(&OperatingPoint::new(s.with_zeta(1.0), &small, 1)).unwrap();
        assert!((via_area.p_bound - via_waist.p_bound).abs() < 1e-14);
        let scaled = cav.a_tilde() * (3.9e-6 / cav.derived.w0).powi(2);
        assert!((scaled - small.a_tilde()).abs() / scaled < 1e-12);
    }

    #[test]
    fn g_ratio_sweep_increases_bound() {
        let c = sweep_g_ratio(&base(), 0.5, 4.0, 20, Grid::Log).unwrap();
        assert!(c.points.windows(2).all(|w| w[1].p_bound > w[0].p_bound && w[1].pure_fraction() > w[0].pure_fraction()));
    }
}
