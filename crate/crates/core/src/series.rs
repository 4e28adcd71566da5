//! The saddlepoint series of the spectrum:
//!
//! ```text
//! mu(theta)  = sum 1/(a_i^2 + 2 theta)
//! psi(theta) = sqrt(sum 2 theta^2 / (a_i^2 + 2 theta)^2)
//! I(theta)   = 1/2 sum log(1 + 2 theta / a_i^2) - theta mu(theta)
//! ```
//!
//! Every value carries a bound on its truncation remainder. Power-law tails
//! are summed directly up to `N` and closed with the midpoint Euler-Maclaurin
//! formula `sum_{i>N} f(i) = int_{N+1/2}^inf f + f'(N+1/2)/24 - ...`, whose
//! integral is computed in `log x` so the knee at `x^p ~ theta` and the
//! algebraic decay are both resolved. Geometric tails are summed until the
//! dominating geometric series falls under the budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::spectrum::{EigenSpectrum, TailLaw};

/// Terms summed directly before the Euler-Maclaurin tail takes over.
const MIN_DIRECT_TERMS: usize = 1024;

/// Relative accuracy the tail quadrature can reliably deliver.
const QUAD_REL_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub max_terms: usize,
    /// Error budget, applied as `tail_tolerance * max(1, |value|)`.
    pub tail_tolerance: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            max_terms: 10_000_000,
            tail_tolerance: 1e-12,
        }
    }
}

impl TruncationPolicy {
    pub fn new(max_terms: usize, tail_tolerance: f64) -> Result<Self> {
        if max_terms == 0 {
            return Err(Error::BadParameter("max_terms must be >= 1".into()));
        }
        if !(tail_tolerance > 0.0) {
            return Err(Error::BadParameter(format!(
                "tail_tolerance must be positive, got {tail_tolerance}"
            )));
        }
        Ok(Self {
            max_terms,
            tail_tolerance,
        })
    }

    pub fn budget(&self, value: f64) -> f64 {
        self.tail_tolerance * value.abs().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    /// Bound on `|value - exact|` from truncation and tail quadrature.
    pub tail_error: f64,
    pub terms_used: usize,
}

/// A non-negative summand `g(a_i^2)`.
trait Term {
    fn eval(&self, a_sq: f64) -> f64;
    /// `(k, c)` with `g(a^2) <= c * a^{-2k}` for all `a^2 > 0`.
    fn dominance(&self) -> (f64, f64);
}

struct MuTerm {
    two_theta: f64,
}

impl Term for MuTerm {
    #[inline]
    fn eval(&self, a_sq: f64) -> f64 {
        1.0 / (a_sq + self.two_theta)
    }
    fn dominance(&self) -> (f64, f64) {
        (1.0, 1.0)
    }
}

/// `1/(a^2 + 2 theta)^2`
struct SquareTerm {
    two_theta: f64,
}

impl Term for SquareTerm {
    #[inline]
    fn eval(&self, a_sq: f64) -> f64 {
        let d = a_sq + self.two_theta;
        1.0 / (d * d)
    }
    fn dominance(&self) -> (f64, f64) {
        (2.0, 1.0)
    }
}

/// `a^2/(a^2 + 2 theta)^3`
struct CubeTerm {
    two_theta: f64,
}

impl Term for CubeTerm {
    #[inline]
    fn eval(&self, a_sq: f64) -> f64 {
        let d = a_sq + self.two_theta;
        a_sq / (d * d * d)
    }
    fn dominance(&self) -> (f64, f64) {
        (2.0, 1.0)
    }
}

/// Summand of I: `1/2 [log(1+x) - x/(1+x)]`, `x = 2 theta / a^2`.
///
/// Writing I this way keeps every term non-negative; `theta mu(theta)` is
/// folded in term by term instead of being subtracted at the end.
struct RateTerm {
    two_theta: f64,
}

impl Term for RateTerm {
    #[inline]
    fn eval(&self, a_sq: f64) -> f64 {
        let x = self.two_theta / a_sq;
        if x < 1e-4 {
            // log(1+x) - x/(1+x) = sum_{k>=2} (-1)^k (k-1)/k x^k
            0.5 * x * x * (0.5 - x * (2.0 / 3.0 - x * (0.75 - 0.8 * x)))
        } else {
            0.5 * (x.ln_1p() - x / (1.0 + x))
        }
    }
    fn dominance(&self) -> (f64, f64) {
        // log(1+x) - x/(1+x) <= x^2
        (2.0, 0.5 * self.two_theta * self.two_theta)
    }
}

#[derive(Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

fn sum_terms<T: Term>(
    s: &EigenSpectrum,
    term: &T,
    max_terms: usize,
    budget: impl Fn(f64) -> f64,
) -> Result<SeriesValue> {
    let law = s.tail_law();
    if matches!(law, TailLaw::Finite) {
        return Err(Error::NoTailModel {
            len: s.listed_len(),
        });
    }
    let mut acc = Compensated::default();
    for &a_sq in s.head() {
        acc.add(term.eval(a_sq));
    }
    let mut n = s.head().len();
    let (k, c) = term.dominance();
    match law {
        TailLaw::Geometric { rate, .. } => {
            let ratio = (-k * rate).exp();
            loop {
                let next = law.a_sq(n as f64 + 1.0);
                let rest = c * next.powf(-k) / (1.0 - ratio);
                if rest <= 0.5 * budget(acc.value()) {
                    return Ok(SeriesValue {
                        value: acc.value(),
                        tail_error: rest,
                        terms_used: n.max(1),
                    });
                }
                if n >= max_terms {
                    return Err(Error::ToleranceUnreachable {
                        terms: n,
                        tail_error: rest,
                        budget: budget(acc.value()),
                    });
                }
                let stop = (n + 64).min(max_terms);
                for i in n + 1..=stop {
                    acc.add(term.eval(law.a_sq(i as f64)));
                }
                n = stop;
            }
        }
        TailLaw::Power { scale, exponent } => {
            let target = n.max(MIN_DIRECT_TERMS.min(max_terms));
            for i in n + 1..=target {
                acc.add(term.eval(scale * (i as f64).powf(exponent)));
            }
            n = target;
            loop {
                let partial = acc.value();
                let tail = power_tail(term, scale, exponent, k, c, n, &|v| budget(partial + v))?;
                let value = partial + tail.value;
                if tail.tail_error <= budget(value) {
                    return Ok(SeriesValue {
                        value,
                        tail_error: tail.tail_error,
                        terms_used: n,
                    });
                }
                if n >= max_terms {
                    return Err(Error::ToleranceUnreachable {
                        terms: n,
                        tail_error: tail.tail_error,
                        budget: budget(value),
                    });
                }
                let next = n.saturating_mul(8).min(max_terms);
                for i in n + 1..=next {
                    acc.add(term.eval(scale * (i as f64).powf(exponent)));
                }
                n = next;
            }
        }
        TailLaw::Finite => unreachable!(),
    }
}

/// `sum_{i > n} g(scale i^p)` by midpoint Euler-Maclaurin.
fn power_tail<T: Term>(
    term: &T,
    scale: f64,
    p: f64,
    k: f64,
    c: f64,
    n: usize,
    budget: &dyn Fn(f64) -> f64,
) -> Result<SeriesValue> {
    if c == 0.0 {
        return Ok(SeriesValue {
            value: 0.0,
            tail_error: 0.0,
            terms_used: n,
        });
    }
    let f = |x: f64| term.eval(scale * x.powf(p));
    let x0 = n as f64 + 0.5;
    let decay = k * p - 1.0;
    // Past `x_end` the dominating power law leaves less than `cut` behind.
    let coeff = c * scale.powf(-k) / decay;
    let cut = 1e-3 * budget(0.0).min(budget(f(x0) * x0));
    let x_end = (coeff / cut).powf(1.0 / decay).max(2.0 * x0);
    let remainder = coeff * x_end.powf(-decay);

    let (t0, t1) = (x0.ln(), x_end.ln());
    let guess = f(x0) * x0;
    let tol = Tolerance::new(0.125 * budget(guess), QUAD_REL_FLOOR).with_max_intervals(2000);
    let integral = quad::integrate(
        |t: f64| {
            let x = t.exp();
            x * f(x)
        },
        t0,
        t1,
        tol,
    )?;

    let h1 = 1e-3 * x0;
    let d1 = (f(x0 + h1) - f(x0 - h1)) / (2.0 * h1);
    let h3 = 1e-2 * x0;
    let d3 = (f(x0 + 2.0 * h3) - 2.0 * f(x0 + h3) + 2.0 * f(x0 - h3) - f(x0 - 2.0 * h3))
        / (2.0 * h3 * h3 * h3);
    let em_error = 7.0 / 5760.0 * d3.abs() + 1e-5 * d1.abs() / 24.0;

    Ok(SeriesValue {
        value: integral.value + d1 / 24.0,
        tail_error: integral.abs_error + em_error + remainder,
        terms_used: n,
    })
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta >= 0.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!(
            "theta must be finite and >= 0, got {theta}"
        )))
    }
}

/// `mu(theta) = sum 1/(a_i^2 + 2 theta)`.
pub fn eval_mu(s: &EigenSpectrum, theta: f64, p: &TruncationPolicy) -> Result<SeriesValue> {
    check_theta(theta)?;
    sum_terms(
        s,
        &MuTerm {
            two_theta: 2.0 * theta,
        },
        p.max_terms,
        |v| p.budget(v),
    )
}

/// `psi(theta) = sqrt(sum 2 theta^2/(a_i^2 + 2 theta)^2)`.
pub fn eval_psi(s: &EigenSpectrum, theta: f64, p: &TruncationPolicy) -> Result<SeriesValue> {
    check_theta(theta)?;
    let factor = 2.0 * theta * theta;
    if factor == 0.0 {
        return Ok(SeriesValue {
            value: 0.0,
            tail_error: 0.0,
            terms_used: 1,
        });
    }
    // An error e on psi^2 moves psi by about e / (2 psi).
    let sq = sum_terms(
        s,
        &SquareTerm {
            two_theta: 2.0 * theta,
        },
        p.max_terms,
        |v| {
            let psi = (factor * v).sqrt();
            2.0 * psi * p.budget(psi) / factor
        },
    )?;
    let value = (factor * sq.value).sqrt();
    Ok(SeriesValue {
        value,
        tail_error: factor * sq.tail_error / (2.0 * value),
        terms_used: sq.terms_used,
    })
}

/// `I(theta) = 1/2 sum log(1 + 2 theta/a_i^2) - theta mu(theta)`.
pub fn eval_i(s: &EigenSpectrum, theta: f64, p: &TruncationPolicy) -> Result<SeriesValue> {
    check_theta(theta)?;
    if theta == 0.0 {
        return Ok(SeriesValue {
            value: 0.0,
            tail_error: 0.0,
            terms_used: 1,
        });
    }
    sum_terms(
        s,
        &RateTerm {
            two_theta: 2.0 * theta,
        },
        p.max_terms,
        |v| p.budget(v),
    )
}

/// `mu'(theta) = -sum 2/(a_i^2 + 2 theta)^2`.
pub fn eval_mu_prime(s: &EigenSpectrum, theta: f64, p: &TruncationPolicy) -> Result<SeriesValue> {
    check_theta(theta)?;
    let sq = sum_terms(
        s,
        &SquareTerm {
            two_theta: 2.0 * theta,
        },
        p.max_terms,
        |v| 0.5 * p.budget(2.0 * v),
    )?;
    Ok(SeriesValue {
        value: -2.0 * sq.value,
        tail_error: 2.0 * sq.tail_error,
        terms_used: sq.terms_used,
    })
}

/// `psi'(theta)/psi(theta) = (1/theta) sum a_i^2/(a_i^2+2 theta)^3 / sum 1/(a_i^2+2 theta)^2`.
pub fn eval_log_psi_prime(
    s: &EigenSpectrum,
    theta: f64,
    p: &TruncationPolicy,
) -> Result<SeriesValue> {
    check_theta(theta)?;
    if theta == 0.0 {
        return Err(Error::DomainError(
            "psi'/psi is undefined at theta = 0".into(),
        ));
    }
    let rel = 0.25 * p.tail_tolerance;
    let two_theta = 2.0 * theta;
    let num = sum_terms(s, &CubeTerm { two_theta }, p.max_terms, |v| rel * v.abs())?;
    let den = sum_terms(s, &SquareTerm { two_theta }, p.max_terms, |v| rel * v.abs())?;
    let value = num.value / (theta * den.value);
    Ok(SeriesValue {
        value,
        tail_error: value * (num.tail_error / num.value + den.tail_error / den.value),
        terms_used: num.terms_used.max(den.terms_used),
    })
}

/// `N(theta) = sup{i : a_i^2 <= theta}` (0 when `a_1^2 > theta`).
pub fn count_n(s: &EigenSpectrum, theta: f64) -> usize {
    if !(theta >= 0.0) {
        return 0;
    }
    let head = s.head();
    let listed = head.partition_point(|&a2| a2 <= theta);
    if listed < head.len() {
        return listed;
    }
    let law = s.tail_law();
    let guess = match law {
        TailLaw::Finite => return listed,
        TailLaw::Power { scale, exponent } => (theta / scale).powf(1.0 / exponent),
        TailLaw::Geometric {
            anchor,
            anchor_sq,
            rate,
        } => anchor + (theta / anchor_sq).ln() / rate,
    };
    let mut c = if guess.is_finite() {
        (guess.floor().max(0.0) as usize).max(listed)
    } else {
        usize::MAX / 2
    };
    while c > listed && law.a_sq(c as f64) > theta {
        c -= 1;
    }
    while law.a_sq(c as f64 + 1.0) <= theta {
        c += 1;
    }
    c
}
