//! Scalar minimization and bracketed root finding.
//!
//! Every fixed point in the closed-form cost formulas is monotone on an
//! interval known in advance, so the solvers here are bracketed and never
//! leave `[lo, hi]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of scan points used by [`minimize_scalar`].
pub const DEFAULT_SCAN_POINTS: usize = 64;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// A closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!("bracket requires lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `n` evenly spaced points including both endpoints.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![0.5 * (self.lo + self.hi)],
            _ => {
                let step = self.width() / (n - 1) as f64;
                (0..n).map(|k| if k == n - 1 { self.hi } else { self.lo + k as f64 * step }).collect()
            }
        }
    }
}

/// Result of a scalar minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub f: f64,
}

/// Minimizes `f` on `b`: a 64-point scan picks the best basin, then
/// golden-section search narrows it to width `tol`.
pub fn minimize_scalar<F: FnMut(f64) -> f64>(f: F, b: Bracket, tol: f64) -> Minimum {
    minimize_scalar_with_scan(f, b, DEFAULT_SCAN_POINTS, tol)
}

/// Same as [`minimize_scalar`] with a configurable scan size (at least 3).
///
/// Non-finite function values are treated as `+inf`, so a scan point where
/// the objective is undefined never becomes the incumbent.
pub fn minimize_scalar_with_scan<F: FnMut(f64) -> f64>(mut f: F, b: Bracket, n_scan: usize, tol: f64) -> Minimum {
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let xs = b.grid(n_scan.max(3));
    let fs: Vec<f64> = xs.iter().map(|&x| eval(x)).collect();
    let (k_best, _) =
        fs.iter().enumerate().fold((0, f64::INFINITY), |(kb, fb), (k, &v)| if v < fb { (k, v) } else { (kb, fb) });
    let mut best = Minimum { x: xs[k_best], f: fs[k_best] };

    let mut a = xs[k_best.saturating_sub(1)];
    let mut d = xs[(k_best + 1).min(xs.len() - 1)];
    let mut x1 = d - INV_PHI * (d - a);
    let mut x2 = a + INV_PHI * (d - a);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    while d - a > tol {
        if f1 <= f2 {
            d = x2;
            x2 = x1;
            f2 = f1;
            x1 = d - INV_PHI * (d - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (d - a);
            f2 = eval(x2);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v < best.f {
            best = Minimum { x, f: v };
        }
    }
    best
}

/// Brent's bracketed root finder (inverse quadratic interpolation and secant
/// steps safeguarded by bisection). Stops once `|f(x)| <= tol` or the bracket
/// has shrunk to machine resolution, returning the point with smallest `|f|`.
pub fn solve_scalar_root<F: FnMut(f64) -> f64>(mut f: F, b: Bracket, tol: f64) -> Result<f64> {
    let (mut a, mut bb) = (b.lo, b.hi);
    let (mut fa, mut fb) = (f(a), f(bb));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(bb);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoSignChange { lo: b.lo, hi: b.hi, f_lo: fa, f_hi: fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = bb - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = bb - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = bb;
            bb = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * bb.abs() + 0.5 * f64::MIN_POSITIVE;
        let xm = 0.5 * (c - bb);
        if fb.abs() <= tol || xm.abs() <= tol1 || fb == 0.0 {
            return Ok(bb);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (bb - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = bb;
        fa = fb;
        bb += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(bb);
    }
    Ok(bb)
}
