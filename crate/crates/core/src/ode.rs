//! Dormand–Prince 8(5,3) integrator for complex first-order systems.
//!
//! Coefficients, the combined 5th/3rd-order error estimate and the step-size
//! controller follow Hairer's DOP853. Dense output is not needed here: callers
//! integrate between fixed sample times.

// DOP853 coefficients are kept at their published precision.
#![allow(clippy::excessive_precision)]

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result, C64};

/// Right-hand side dy/dt = f(t, y).
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step (s); `f64::INFINITY` for none.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-8, atol: 1e-10, h_max: f64::INFINITY, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

const SAFE: f64 = 0.9;
const FAC1: f64 = 0.333;
const FAC2: f64 = 6.0;
const EXPO: f64 = 1.0 / 8.0;

/// Reusable DOP853 stepper; buffers are sized on first use.
#[derive(Debug, Clone)]
pub struct Dop853 {
    pub tol: Tolerances,
    pub stats: Stats,
    /// Step size carried over between calls.
    h: Option<f64>,
    k: Vec<Vec<C64>>,
    ytmp: Vec<C64>,
    ynew: Vec<C64>,
}

impl Dop853 {
    pub fn new(tol: Tolerances) -> Self {
        Dop853 { tol, stats: Stats::default(), h: None, k: Vec::new(), ytmp: Vec::new(), ynew: Vec::new() }
    }

    fn ensure(&mut self, n: usize) {
        if self.ytmp.len() != n {
            self.k = (0..12).map(|_| vec![C64::new(0.0, 0.0); n]).collect();
            self.ytmp = vec![C64::new(0.0, 0.0); n];
            self.ynew = vec![C64::new(0.0, 0.0); n];
            self.h = None;
        }
    }

    fn scale(&self, a: C64, b: C64) -> f64 {
        self.tol.atol + self.tol.rtol * a.norm().max(b.norm())
    }

    fn initial_step<S: OdeSystem>(&mut self, sys: &S, t: f64, y: &[C64], span: f64) -> f64 {
        let n = y.len();
        let (mut d0, mut d1) = (0.0, 0.0);
        for (yi, ki) in y.iter().zip(&self.k[0]) {
            let sk = self.scale(*yi, *yi);
            d0 += (yi.norm() / sk).powi(2);
            d1 += (ki.norm() / sk).powi(2);
        }
        let (d0, d1) = ((d0 / n as f64).sqrt(), (d1 / n as f64).sqrt());
        let mut h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 * span } else { 0.01 * d0 / d1 };
        h = h.min(self.tol.h_max).min(span);
        for ((t, yi), ki) in self.ytmp.iter_mut().zip(y).zip(&self.k[0]) {
            *t = yi + ki * h;
        }
        sys.rhs(t + h, &self.ytmp, &mut self.k[1]);
        self.stats.evaluations += 1;
        let mut d2 = 0.0;
        for (yi, (k1, k0)) in y.iter().zip(self.k[1].iter().zip(&self.k[0])) {
            let sk = self.scale(*yi, *yi);
            d2 += ((k1 - k0).norm() / sk).powi(2);
        }
        let d2 = (d2 / n as f64).sqrt() / h;
        let der = d1.max(d2);
        let h1 = if der <= 1e-15 { (1e-6f64).max(h * 1e-3) } else { (0.01 / der).powf(EXPO) };
        (100.0 * h).min(h1).min(self.tol.h_max).min(span)
    }

    fn stage(&mut self, y: &[C64], h: f64, coeffs: &[(usize, f64)]) {
        let Dop853 { k, ytmp, .. } = self;
        for (i, out) in ytmp.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &(j, a) in coeffs {
                acc += k[j][i] * a;
            }
            *out = y[i] + acc * h;
        }
    }

    /// Integrates `y` in place from `t0` to `t1`.
    pub fn integrate<S: OdeSystem>(&mut self, sys: &S, t0: f64, t1: f64, y: &mut [C64]) -> Result<()> {
        let n = sys.dim();
        assert_eq!(y.len(), n, "state length does not match the system dimension");
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(());
        }
        self.ensure(n);
        let mut t = t0;
        sys.rhs(t, y, &mut self.k[0]);
        self.stats.evaluations += 1;
        let mut h = match self.h {
            Some(h) => h.min(span).min(self.tol.h_max),
            None => self.initial_step(sys, t, y, span),
        };
        let mut last_rejected = false;
        let mut steps = 0usize;
        loop {
            if steps >= self.tol.max_steps {
                return Err(Error::IntegrationFailure { time: t, reason: format!("exceeded {} steps", self.tol.max_steps) });
            }
            let remaining = t1 - t;
            let finishing = h >= remaining * (1.0 - 1e-12);
            let step_h = if finishing { remaining } else { h };
            if step_h.abs() <= 1e-14 * t.abs().max(span) {
                return Err(Error::IntegrationFailure { time: t, reason: format!("step size underflow (h = {step_h:e})") });
            }
            let hh = step_h;
            self.stage(y, hh, &[(0, A21)]);
            sys.rhs(t + C2 * hh, &self.ytmp, &mut self.k[1]);
            self.stage(y, hh, &[(0, A31), (1, A32)]);
            sys.rhs(t + C3 * hh, &self.ytmp, &mut self.k[2]);
            self.stage(y, hh, &[(0, A41), (2, A43)]);
            sys.rhs(t + C4 * hh, &self.ytmp, &mut self.k[3]);
            self.stage(y, hh, &[(0, A51), (2, A53), (3, A54)]);
            sys.rhs(t + C5 * hh, &self.ytmp, &mut self.k[4]);
            self.stage(y, hh, &[(0, A61), (3, A64), (4, A65)]);
            sys.rhs(t + C6 * hh, &self.ytmp, &mut self.k[5]);
            self.stage(y, hh, &[(0, A71), (3, A74), (4, A75), (5, A76)]);
            sys.rhs(t + C7 * hh, &self.ytmp, &mut self.k[6]);
            self.stage(y, hh, &[(0, A81), (3, A84), (4, A85), (5, A86), (6, A87)]);
            sys.rhs(t + C8 * hh, &self.ytmp, &mut self.k[7]);
            self.stage(y, hh, &[(0, A91), (3, A94), (4, A95), (5, A96), (6, A97), (7, A98)]);
            sys.rhs(t + C9 * hh, &self.ytmp, &mut self.k[8]);
            self.stage(y, hh, &[(0, A101), (3, A104), (4, A105), (5, A106), (6, A107), (7, A108), (8, A109)]);
            sys.rhs(t + C10 * hh, &self.ytmp, &mut self.k[9]);
            self.stage(y, hh, &[(0, A111), (3, A114), (4, A115), (5, A116), (6, A117), (7, A118), (8, A119), (9, A1110)]);
            sys.rhs(t + C11 * hh, &self.ytmp, &mut self.k[10]);
            self.stage(
                y,
                hh,
                &[(0, A121), (3, A124), (4, A125), (5, A126), (6, A127), (7, A128), (8, A129), (9, A1210), (10, A1211)],
            );
            let t_new = if finishing { t1 } else { t + hh };
            sys.rhs(t_new, &self.ytmp, &mut self.k[11]);
            self.stats.evaluations += 11;

            let (mut err5, mut err3) = (0.0, 0.0);
            {
                let k = &self.k;
                for i in 0..n {
                    let slope = k[0][i] * B1
                        + k[5][i] * B6
                        + k[6][i] * B7
                        + k[7][i] * B8
                        + k[8][i] * B9
                        + k[9][i] * B10
                        + k[10][i] * B11
                        + k[11][i] * B12;
                    let yn = y[i] + slope * hh;
                    self.ynew[i] = yn;
                    let sk = self.tol.atol + self.tol.rtol * y[i].norm().max(yn.norm());
                    let e3 = slope - k[0][i] * BHH1 - k[8][i] * BHH2 - k[11][i] * BHH3;
                    err3 += (e3.norm() / sk).powi(2);
                    let e5 = k[0][i] * ER1
                        + k[5][i] * ER6
                        + k[6][i] * ER7
                        + k[7][i] * ER8
                        + k[8][i] * ER9
                        + k[9][i] * ER10
                        + k[10][i] * ER11
                        + k[11][i] * ER12;
                    err5 += (e5.norm() / sk).powi(2);
                }
            }
            let mut deno = err5 + 0.01 * err3;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = hh.abs() * err5 * (1.0 / (deno * n as f64)).sqrt();
            if !err.is_finite() {
                return Err(Error::IntegrationFailure { time: t, reason: "non-finite error estimate".into() });
            }
            let fac11 = err.powf(EXPO);
            let fac = (1.0 / FAC2).max((1.0 / FAC1).min(fac11 / SAFE));
            let mut h_new = hh / fac;
            steps += 1;
            if err <= 1.0 {
                self.stats.accepted += 1;
                y.copy_from_slice(&self.ynew);
                t = t_new;
                if last_rejected {
                    h_new = h_new.min(hh);
                }
                last_rejected = false;
                h = h_new.min(self.tol.h_max);
                if finishing {
                    self.h = Some(h);
                    return Ok(());
                }
                sys.rhs(t, y, &mut self.k[0]);
                self.stats.evaluations += 1;
            } else {
                self.stats.rejected += 1;
                last_rejected = true;
                h = hh / (1.0 / FAC1).min(fac11 / SAFE);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator {
        w: f64,
        decay: f64,
    }

    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = C64::new(-self.decay, -self.w) * y[0];
        }
    }

    #[test]
    fn damped_rotation_matches_exact() {
        let sys = Oscillator { w: 50.0, decay: 0.3 };
        let mut y = [C64::new(1.0, 0.0)];
        let mut ode = Dop853::new(Tolerances { rtol: 1e-10, atol: 1e-12, ..Default::default() });
        ode.integrate(&sys, 0.0, 2.0, &mut y).unwrap();
        let exact = (C64::new(-0.3, -50.0) * 2.0).exp();
        assert!((y[0] - exact).norm() < 1e-8);
    }

    struct Driven;

    impl OdeSystem for Driven {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = C64::new(t.cos(), 0.0);
            dy[1] = y[0];
        }
    }

    #[test]
    fn time_dependent_forcing_and_chained_calls() {
        let mut y = [C64::new(0.0, 0.0); 2];
        let mut ode = Dop853::new(Tolerances::default());
        for k in 0..10 {
            ode.integrate(&Driven, k as f64 * 0.3, (k + 1) as f64 * 0.3, &mut y).unwrap();
        }
        assert!((y[0].re - 3.0f64.sin()).abs() < 1e-8);
        assert!((y[1].re - (1.0 - 3.0f64.cos())).abs() < 1e-8);
    }

    #[test]
    fn step_limit_reports_failure_time() {
        let sys = Oscillator { w: 1e6, decay: 0.0 };
        let mut y = [C64::new(1.0, 0.0)];
        let mut ode = Dop853::new(Tolerances { max_steps: 5, ..Default::default() });
        match ode.integrate(&sys, 0.0, 1.0, &mut y) {
            Err(Error::IntegrationFailure { time, .. }) => assert!(time < 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
