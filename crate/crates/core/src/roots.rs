//! Bracketed scalar root finding (bisection safeguarding secant and inverse
//! quadratic steps, Brent's scheme).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Accept `x` once `|f(x)| <= f_tol`.
    pub f_tol: f64,
    /// Accept once the bracket is narrower than `x_rel * |x| + x_abs`.
    pub x_rel: f64,
    pub x_abs: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            f_tol: 0.0,
            x_rel: 4.0 * f64::EPSILON,
            x_abs: 0.0,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Finds a root of `f` in `[a, b]` given `f(a)` and `f(b)` of opposite sign
/// (or one of them zero).
pub fn brent<F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, opts: RootOptions) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    if fa == 0.0 {
        return Ok(Root {
            x: a,
            fx: fa,
            iterations: 0,
        });
    }
    if fb == 0.0 {
        return Ok(Root {
            x: b,
            fx: fb,
            iterations: 0,
        });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::DomainError(format!(
            "root not bracketed: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=opts.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 0.5 * (opts.x_rel * b.abs() + opts.x_abs) + f64::MIN_POSITIVE;
        let m = 0.5 * (c - b);
        if fb.abs() <= opts.f_tol || fb == 0.0 || m.abs() <= tol {
            return Ok(Root {
                x: b,
                fx: fb,
                iterations: iter,
            });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
    })
}

/// Solves `g(x) = target` for a non-decreasing `g` on `(lo_limit, hi_limit)`,
/// growing a bracket geometrically from `start`.
pub fn solve_increasing<G>(
    mut g: G,
    target: f64,
    start: f64,
    lo_limit: f64,
    hi_limit: f64,
    opts: RootOptions,
) -> Result<Root>
where
    G: FnMut(f64) -> Result<f64>,
{
    let mut h = |x: f64| g(x).map(|v| v - target);
    let mut lo = start;
    let mut hi = start;
    let mut f_lo = h(lo)?;
    let mut f_hi = f_lo;
    let mut steps = 0;
    while f_hi < 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi = if hi_limit.is_finite() {
            (2.0 * hi).min(0.5 * (hi + hi_limit))
        } else {
            2.0 * hi
        };
        f_hi = h(hi)?;
        steps += 1;
        if steps > 2100 || !hi.is_finite() {
            return Err(Error::NoConvergence { iterations: steps });
        }
    }
    while f_lo > 0.0 {
        hi = lo;
        f_hi = f_lo;
        lo = if lo_limit > 0.0 {
            (0.5 * lo).max(0.5 * (lo + lo_limit))
        } else {
            0.5 * lo
        };
        f_lo = h(lo)?;
        steps += 1;
        if steps > 2100 || lo <= lo_limit {
            return Err(Error::NoConvergence { iterations: steps });
        }
    }
    brent(h, lo, hi, f_lo, f_hi, opts)
}
