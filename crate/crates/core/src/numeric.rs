//! Small numerical kernels: compensated sums, root refinement, sign scans.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated arithmetic mean, summed in iteration order.
pub(crate) fn mean<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = Accumulator::default();
    let mut n = 0usize;
    for v in values {
        acc.add(v);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        acc.total() / n as f64
    }
}

/// Locates a sign change of `f` inside `[lo, hi]`.
///
/// `f_lo` and `f_hi` must have opposite signs. Uses the Illinois variant of
/// regula falsi with a bisection step whenever the bracket stops halving, and
/// runs until the bracket is a few ulps wide. Returns the endpoint with the
/// smaller residual.
pub(crate) fn refine_root<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    f_lo: f64,
    f_hi: f64,
) -> f64 {
    debug_assert!(f_lo.signum() != f_hi.signum() || f_lo == 0.0 || f_hi == 0.0);
    if f_lo == 0.0 {
        return lo;
    }
    if f_hi == 0.0 {
        return hi;
    }
    let lo_sign = f_lo.signum();
    let (mut r_lo, mut r_hi) = (f_lo.abs(), f_hi.abs());
    // Weighted values used for the secant step.
    let (mut w_lo, mut w_hi) = (f_lo, f_hi);
    let mut last_side = 0i8;
    let mut width_mark = hi - lo;
    for it in 0..300 {
        let width = hi - lo;
        if width <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) + f64::MIN_POSITIVE {
            break;
        }
        let mut x = if it % 4 == 3 && width > 0.5 * width_mark {
            0.5 * (lo + hi)
        } else {
            (lo * w_hi - hi * w_lo) / (w_hi - w_lo)
        };
        if it % 4 == 3 {
            width_mark = width;
        }
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
            if !(x > lo && x < hi) {
                break;
            }
        }
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx.signum() == lo_sign {
            lo = x;
            r_lo = fx.abs();
            w_lo = fx;
            if last_side == -1 {
                w_hi *= 0.5;
            }
            last_side = -1;
        } else {
            hi = x;
            r_hi = fx.abs();
            w_hi = fx;
            if last_side == 1 {
                w_lo *= 0.5;
            }
            last_side = 1;
        }
    }
    if r_lo <= r_hi {
        lo
    } else {
        hi
    }
}

/// A bracket on which `f` changes sign from positive to negative.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Descent {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

/// Samples `f` on `n + 1` evenly spaced points of `[lo, hi]` and returns every
/// interval where it goes from positive to non-positive.
pub(crate) fn scan_descents<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize) -> Vec<Descent> {
    let mut out = Vec::new();
    let mut x_prev = lo;
    let mut f_prev = f(lo);
    for i in 1..=n {
        let x = if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 };
        let fx = f(x);
        if f_prev > 0.0 && fx <= 0.0 {
            out.push(Descent {
                lo: x_prev,
                hi: x,
                f_lo: f_prev,
                f_hi: fx,
            });
        }
        x_prev = x;
        f_prev = fx;
    }
    out
}

/// Golden-section maximisation of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
