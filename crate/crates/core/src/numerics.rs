//! Root finding and quadrature.
//!
//! Everything here is deliberately elementary: bracketed bisection with a
//! doubling bracket scan, adaptive Simpson quadrature, and composite Simpson
//! rules on non-uniform grids.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Absolute time tolerance used by every time-valued root finder.
pub const TIME_TOL: f64 = 1e-9;
/// Iteration cap of the bisection solver.
pub const MAX_BISECTIONS: usize = 200;
/// Relative tolerance of adaptive quadrature.
pub const QUAD_REL_TOL: f64 = 1e-10;

/// Bisection on `[lo, hi]` for a function whose sign differs at the two ends.
///
/// Stops when the bracket is narrower than `tol`, after [`MAX_BISECTIONS`]
/// halvings, or when the midpoint is no longer representable between the ends.
pub fn bisect<F: Scalar>(mut f: impl FnMut(F) -> F, lo: F, hi: F, tol: F) -> Result<F> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == F::zero() {
        return Ok(a);
    }
    if fb == F::zero() {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::RootFinding(format!(
            "no sign change on [{a}, {b}]: f(a) = {fa}, f(b) = {fb}"
        )));
    }
    let neg_at_a = fa < F::zero();
    for _ in 0..MAX_BISECTIONS {
        if (b - a).abs() <= tol {
            break;
        }
        let m = a + (b - a) * F::half();
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == F::zero() {
            return Ok(m);
        }
        if (fm < F::zero()) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(a + (b - a) * F::half())
}

/// Scans `start + d, start + 2d, start + 4d, ...` (capped at `limit`) for the
/// first point where the nondecreasing function `f` becomes nonnegative.
///
/// Returns the bracket `(lo, hi)` with `f(lo) < 0 <= f(hi)`, or `None` when
/// `f(limit) < 0`.
pub fn bracket_by_doubling<F: Scalar>(mut f: impl FnMut(F) -> F, start: F, limit: F) -> Option<(F, F)> {
    if f(start) >= F::zero() {
        return Some((start, start));
    }
    let span = limit - start;
    if span <= F::zero() {
        return None;
    }
    let mut d = span / F::lit(1024.0);
    let mut lo = start;
    loop {
        let hi = (start + d).min(limit);
        if f(hi) >= F::zero() {
            return Some((lo, hi));
        }
        if hi >= limit {
            return None;
        }
        lo = hi;
        d = d * F::two();
    }
}

/// Root of a nondecreasing function on `[start, limit]` to time tolerance [`TIME_TOL`].
pub fn increasing_root<F: Scalar>(mut f: impl FnMut(F) -> F, start: F, limit: F) -> Option<F> {
    let (lo, hi) = bracket_by_doubling(&mut f, start, limit)?;
    if lo == hi {
        return Some(lo);
    }
    bisect(f, lo, hi, F::lit(TIME_TOL)).ok()
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to relative tolerance `rel`.
pub fn adaptive_simpson<F: Scalar>(f: impl Fn(F) -> F, a: F, b: F, rel: F) -> F {
    if a == b {
        return F::zero();
    }
    let six = F::lit(6.0);
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) * F::half();
    let fm = f(m);
    let whole = (b - a) / six * (fa + F::lit(4.0) * fm + fb);
    // a coarse pass sets the absolute scale
    let coarse = composite_simpson_uniform(&f, a, b, 64);
    let scale = coarse.abs().max(whole.abs()).max(F::min_positive_value());
    let eps = (rel * scale).max(F::epsilon() * scale);
    simpson_step(&f, a, b, fa, fm, fb, whole, eps, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Scalar>(f: &impl Fn(F) -> F, a: F, b: F, fa: F, fm: F, fb: F, whole: F, eps: F, depth: u32) -> F {
    let six = F::lit(6.0);
    let four = F::lit(4.0);
    let m = (a + b) * F::half();
    let lm = (a + m) * F::half();
    let rm = (m + b) * F::half();
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / six * (fa + four * flm + fm);
    let right = (b - m) / six * (fm + four * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= F::lit(15.0) * eps || m <= a || m >= b {
        return left + right + delta / F::lit(15.0);
    }
    let half_eps = eps * F::half();
    simpson_step(f, a, m, fa, flm, fm, left, half_eps, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, half_eps, depth - 1)
}

/// Composite Simpson rule with `2 * pairs` uniform panels.
pub fn composite_simpson_uniform<F: Scalar>(f: &impl Fn(F) -> F, a: F, b: F, pairs: usize) -> F {
    let n = 2 * pairs.max(1);
    let h = (b - a) / F::from_usize_lossy(n);
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { F::lit(4.0) } else { F::two() };
        acc = acc + w * f(a + h * F::from_usize_lossy(i));
    }
    acc * h / F::lit(3.0)
}

/// Composite Simpson rule on an arbitrary increasing grid.
///
/// Consecutive interval pairs use the exact integral of the interpolating
/// parabola; an odd trailing interval integrates the parabola through the
/// last three nodes over its final interval. Two nodes fall back to the
/// trapezoid rule.
pub fn simpson_nonuniform<F: Scalar>(t: &[F], y: &[F]) -> F {
    assert_eq!(t.len(), y.len(), "grid and values must have equal length");
    let n = t.len();
    if n < 2 {
        return F::zero();
    }
    if n == 2 {
        return (t[1] - t[0]) * (y[0] + y[1]) * F::half();
    }
    let six = F::lit(6.0);
    let intervals = n - 1;
    let paired = intervals - intervals % 2;
    let mut acc = F::zero();
    let mut i = 0;
    while i < paired {
        let h0 = t[i + 1] - t[i];
        let h1 = t[i + 2] - t[i + 1];
        let hs = h0 + h1;
        if h0 <= F::zero() || h1 <= F::zero() {
            acc = acc + h0 * (y[i] + y[i + 1]) * F::half() + h1 * (y[i + 1] + y[i + 2]) * F::half();
        } else {
            acc = acc
                + hs / six
                    * ((F::two() - h1 / h0) * y[i] + hs * hs / (h0 * h1) * y[i + 1] + (F::two() - h0 / h1) * y[i + 2]);
        }
        i += 2;
    }
    if intervals % 2 == 1 {
        let (a, b, c) = (n - 3, n - 2, n - 1);
        let h0 = t[b] - t[a];
        let h1 = t[c] - t[b];
        if h0 <= F::zero() || h1 <= F::zero() {
            acc = acc + h1 * (y[b] + y[c]) * F::half();
        } else {
            let w0 = -h1 * h1 * h1 / (six * h0 * (h0 + h1));
            let w1 = h1 * (h1 + F::lit(3.0) * h0) / (six * h0);
            let w2 = h1 * (F::two() * h1 + F::lit(3.0) * h0) / (six * (h0 + h1));
            acc = acc + w0 * y[a] + w1 * y[b] + w2 * y[c];
        }
    }
    acc
}
