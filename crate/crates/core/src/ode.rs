//! Explicit Runge-Kutta integration with the Dormand-Prince 8(5,3) pair.

use crate::error::{Error, Result};

/// Relative and absolute integration tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rtol: 1e-11, atol: 1e-13 }
    }
}

impl Tolerance {
    /// `atol` follows `rtol` two orders down, as in the default.
    pub fn relative(rtol: f64) -> Self {
        Tolerance { rtol, atol: rtol * 1e-2 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol >= 1e-14 && self.rtol <= 1e-6) || !(self.atol > 0.0) {
            return Err(Error::Precondition(format!(
                "tolerance must lie in [1e-14, 1e-6], got rtol {} atol {}",
                self.rtol, self.atol
            )));
        }
        Ok(())
    }
}

/// Right-hand side `y' = f(x, y)` of a real system.
pub trait System {
    fn dim(&self) -> usize;
    fn rhs(&self, x: f64, y: &[f64], dy: &mut [f64]);
}

const C: [f64; 12] = [
    0.0,
    5.260_015_195_876_773E-2,
    7.890_022_793_815_16E-2,
    1.183_503_419_072_274E-1,
    2.816_496_580_927_726E-1,
    3.333_333_333_333_333E-1,
    0.25,
    3.076_923_076_923_077E-1,
    6.512_820_512_820_513E-1,
    0.6,
    8.571_428_571_428_571E-1,
    1.0,
];

const A: [[f64; 11]; 12] = [
    [0.0; 11],
    [5.260_015_195_876_773E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.972_505_698_453_79E-2, 5.917_517_095_361_37E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.958_758_547_680_685E-2, 0.0, 8.876_275_643_042_054E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        2.413_651_341_592_667E-1,
        0.0,
        -8.845_494_793_282_861E-1,
        9.248_340_032_617_92E-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.703_703_703_703_703_5E-2,
        0.0,
        0.0,
        1.708_286_087_294_738_6E-1,
        1.254_676_875_668_224_2E-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.710_937_5E-2,
        0.0,
        0.0,
        1.702_522_110_195_440_5E-1,
        6.021_653_898_045_596E-2,
        -1.757_812_5E-2,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.709_200_011_850_479E-2,
        0.0,
        0.0,
        1.703_839_257_122_399_8E-1,
        1.072_620_304_463_732_8E-1,
        -1.531_943_774_862_440_2E-2,
        8.273_789_163_814_023E-3,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        6.241_109_587_160_757E-1,
        0.0,
        0.0,
        -3.360_892_629_446_941_4,
        -8.682_193_468_417_26E-1,
        2.759_209_969_944_671E1,
        2.015_406_755_047_789_4E1,
        -4.348_988_418_106_996E1,
        0.0,
        0.0,
        0.0,
    ],
    [
        4.776_625_364_382_643_4E-1,
        0.0,
        0.0,
        -2.488_114_619_971_667_7,
        -5.902_908_268_368_43E-1,
        2.123_005_144_818_119_3E1,
        1.527_923_363_288_242_3E1,
        -3.328_821_096_898_486E1,
        -2.033_120_170_850_862_7E-2,
        0.0,
        0.0,
    ],
    [
        -9.371_424_300_859_873E-1,
        0.0,
        0.0,
        5.186_372_428_844_064,
        1.091_437_348_996_729_5,
        -8.149_787_010_746_927,
        -1.852_006_565_999_696E1,
        2.273_948_709_935_050_5E1,
        2.493_605_552_679_652_3,
        -3.046_764_471_898_219_6,
        0.0,
    ],
    [
        2.273_310_147_516_538,
        0.0,
        0.0,
        -1.053_449_546_673_725E1,
        -2.000_872_058_224_862_5,
        -1.795_893_186_311_88E1,
        2.794_888_452_941_996E1,
        -2.858_998_277_135_023_5,
        -8.872_856_933_530_63,
        1.236_056_717_579_430_3E1,
        6.433_927_460_157_636E-1,
    ],
];

const B: [f64; 12] = [
    5.429_373_411_656_876_5E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450_312_892_752_409,
    1.891_517_899_314_500_3,
    -5.801_203_960_010_585,
    3.111_643_669_578_199E-1,
    -1.521_609_496_625_161E-1,
    2.013_654_008_040_303_4E-1,
    4.471_061_572_777_259E-2,
];

// difference between the 8th order weights and the embedded 5th order ones
const E5: [f64; 12] = [
    1.312_004_499_419_488E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.225_156_446_376_204_4,
    -4.957_589_496_572_502E-1,
    1.664_377_182_454_986_4,
    -3.503_288_487_499_736_6E-1,
    3.341_791_187_130_175E-1,
    8.192_320_648_511_571E-2,
    -2.235_530_786_388_629_4E-2,
];

// embedded 3rd order weights
const BHH: [(usize, f64); 3] = [
    (0, 0.244_094_488_188_976_388),
    (8, 0.733_846_688_281_611_857),
    (11, 2.205_882_352_941_176_47E-2),
];

/// Why an integration ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    /// The observer asked to stop at this abscissa.
    Stopped(f64),
}

#[derive(Debug, Clone)]
pub struct Integration {
    /// Accepted step end points, starting with the initial point.
    pub xs: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    pub termination: Termination,
    pub rejected: usize,
}

impl Integration {
    pub fn last(&self) -> (f64, &[f64]) {
        let n = self.xs.len() - 1;
        (self.xs[n], &self.ys[n])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Dop853 {
    pub tol: Tolerance,
    pub max_steps: usize,
    /// Upper bound on |h|; `None` means the full range.
    pub max_step: Option<f64>,
}

impl Dop853 {
    pub fn new(tol: Tolerance) -> Self {
        Dop853 { tol, max_steps: 2_000_000, max_step: None }
    }

    /// Integrate from `x0` to `x1` (either direction). After each accepted
    /// step the observer sees `(x, y)`; returning `false` stops the run.
    pub fn integrate<S, O>(&self, sys: &S, x0: f64, y0: &[f64], x1: f64, mut observer: O) -> Result<Integration>
    where
        S: System + ?Sized,
        O: FnMut(f64, &[f64]) -> bool,
    {
        let n = sys.dim();
        if y0.len() != n {
            return Err(Error::Arity { expected: n, found: y0.len() });
        }
        let mut out = Integration {
            xs: vec![x0],
            ys: vec![y0.to_vec()],
            termination: Termination::Completed,
            rejected: 0,
        };
        if x0 == x1 {
            return Ok(out);
        }
        let dir = (x1 - x0).signum();
        let span = (x1 - x0).abs();
        let hmax = self.max_step.unwrap_or(span).min(span);
        let mut x = x0;
        let mut y = y0.to_vec();
        let mut k = vec![vec![0.0; n]; 12];
        let mut ytmp = vec![0.0; n];
        let mut ynew = vec![0.0; n];
        sys.rhs(x, &y, &mut k[0]);
        let mut h = self.initial_step(sys, x, &y, &k[0], dir, hmax);
        let mut steps = 0usize;
        let mut last_rejected = false;
        loop {
            let remaining = (x1 - x).abs();
            if remaining <= 1e-14 * span.max(x.abs()) {
                break;
            }
            if steps >= self.max_steps {
                return Err(Error::Integration(format!("step limit reached at x = {x}")));
            }
            steps += 1;
            let mut habs = h.abs().min(hmax);
            let finishing = habs >= remaining;
            if finishing {
                habs = remaining;
            }
            let hs = dir * habs;
            for i in 1..12 {
                for j in 0..n {
                    let mut acc = 0.0;
                    for (l, kl) in k.iter().enumerate().take(i) {
                        acc += A[i][l] * kl[j];
                    }
                    ytmp[j] = y[j] + hs * acc;
                }
                let (done, rest) = k.split_at_mut(i);
                let _ = done;
                sys.rhs(x + C[i] * hs, &ytmp, &mut rest[0]);
            }
            let mut err5 = 0.0;
            let mut err3 = 0.0;
            for j in 0..n {
                let mut acc = 0.0;
                let mut e5 = 0.0;
                for (l, kl) in k.iter().enumerate() {
                    acc += B[l] * kl[j];
                    e5 += E5[l] * kl[j];
                }
                let mut e3 = acc;
                for &(l, w) in BHH.iter() {
                    e3 -= w * k[l][j];
                }
                ynew[j] = y[j] + hs * acc;
                let sc = self.tol.atol + self.tol.rtol * y[j].abs().max(ynew[j].abs());
                err5 += (e5 / sc).powi(2);
                err3 += (e3 / sc).powi(2);
            }
            let err = if err5 == 0.0 && err3 == 0.0 {
                0.0
            } else {
                habs * err5 / ((err5 + 0.01 * err3) * n as f64).sqrt()
            };
            if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
                h = dir * habs * 0.2;
                out.rejected += 1;
                last_rejected = true;
                if habs < 1e-300 {
                    return Err(Error::Integration(format!("non-finite state near x = {x}")));
                }
                continue;
            }
            if err <= 1.0 {
                x = if finishing { x1 } else { x + hs };
                std::mem::swap(&mut y, &mut ynew);
                out.xs.push(x);
                out.ys.push(y.clone());
                let mut fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-1.0 / 8.0)).clamp(0.2, 10.0) };
                if last_rejected {
                    fac = fac.min(1.0);
                }
                last_rejected = false;
                h = dir * habs * fac;
                if !observer(x, &y) {
                    out.termination = Termination::Stopped(x);
                    return Ok(out);
                }
                if finishing {
                    break;
                }
                let (first, _) = k.split_at_mut(1);
                sys.rhs(x, &y, &mut first[0]);
            } else {
                let fac = (0.9 * err.powf(-1.0 / 8.0)).clamp(0.2, 1.0);
                h = dir * habs * fac;
                out.rejected += 1;
                last_rejected = true;
                if habs * fac <= 1e-15 * x.abs().max(1.0) {
                    return Err(Error::Integration(format!("step size underflow at x = {x}")));
                }
            }
        }
        Ok(out)
    }

    fn initial_step<S: System + ?Sized>(&self, sys: &S, x: f64, y: &[f64], f0: &[f64], dir: f64, hmax: f64) -> f64 {
        let n = y.len();
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for j in 0..n {
            let sc = self.tol.atol + self.tol.rtol * y[j].abs();
            d0 += (y[j] / sc).powi(2);
            d1 += (f0[j] / sc).powi(2);
        }
        d0 = (d0 / n as f64).sqrt();
        d1 = (d1 / n as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(hmax);
        let y1: Vec<f64> = (0..n).map(|j| y[j] + dir * h0 * f0[j]).collect();
        let mut f1 = vec![0.0; n];
        sys.rhs(x + dir * h0, &y1, &mut f1);
        let mut d2 = 0.0;
        for j in 0..n {
            let sc = self.tol.atol + self.tol.rtol * y[j].abs();
            d2 += ((f1[j] - f0[j]) / sc).powi(2);
        }
        d2 = (d2 / n as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1).min(hmax).max(1e-12 * hmax)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator(f64);
    impl System for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _x: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -self.0 * self.0 * y[0];
        }
    }

    #[test]
    fn tableau_is_consistent() {
        for i in 1..12 {
            let s: f64 = A[i].iter().sum();
            assert!((s - C[i]).abs() < 1e-13, "row {i}");
        }
        assert!((B.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        // order conditions sum b c^q = 1/(q+1) for q up to 7
        for q in 1..8 {
            let s: f64 = (0..12).map(|i| B[i] * C[i].powi(q)).sum();
            assert!((s - 1.0 / (q + 1) as f64).abs() < 1e-12, "q = {q}");
        }
    }

    #[test]
    fn observed_order_is_eight() {
        // fixed steps on y' = y; error ratio when halving h should be ~2^8
        let step = |h: f64, nsteps: usize| {
            let mut y = 1.0;
            for _ in 0..nsteps {
                let mut k = [0.0; 12];
                for i in 0..12 {
                    let yi = y + h * (0..i).map(|l| A[i][l] * k[l]).sum::<f64>();
                    k[i] = yi;
                }
                y += h * (0..12).map(|l| B[l] * k[l]).sum::<f64>();
            }
            y
        };
        let e1 = (step(0.5, 4) - 2f64.exp()).abs();
        let e2 = (step(0.25, 8) - 2f64.exp()).abs();
        let order = (e1 / e2).log2();
        assert!(order > 7.5 && order < 8.8, "observed order {order}");
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let sys = Oscillator(3.0);
        let run = Dop853::new(Tolerance::default()).integrate(&sys, 0.0, &[1.0, 0.0], 10.0, |_, _| true).unwrap();
        let (x, y) = run.last();
        assert_eq!(x, 10.0);
        assert!((y[0] - 30f64.cos()).abs() < 1e-9);
        assert!((y[1] + 3.0 * 30f64.sin()).abs() < 3e-9);
    }

    #[test]
    fn backward_integration_and_observer_stop() {
        let sys = Oscillator(1.0);
        let run = Dop853::new(Tolerance::default())
            .integrate(&sys, 0.0, &[0.0, 1.0], -5.0, |x, _| x > -2.0)
            .unwrap();
        match run.termination {
            Termination::Stopped(x) => assert!(x <= -2.0),
            _ => panic!("expected stop"),
        }
        let (x, y) = run.last();
        assert!((y[0] - x.sin()).abs() < 1e-10);
    }
}
