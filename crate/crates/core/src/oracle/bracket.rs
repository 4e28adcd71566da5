//! Brackets for `P(z < eps)` from the truncation `z_N = sum_{i<=N} x_i^2/a_i^2`.
//!
//! `z >= z_N` gives the upper end `P(z_N < eps)`. With `R_N = z - z_N`,
//! `P(z < eps) >= P(z_N < eps - d) - P(R_N >= d)` for every `d` in `(0, eps)`,
//! and `P(R_N >= d)` is bounded by Markov (`T/d`, `T >= E R_N`) and by the
//! weighted chi-square deviation bound `exp(-A (sqrt d - sqrt T)^2)` with
//! `A = a_{N+1}^2 / 2`.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::spectrum::EigenSpectrum;

/// Constants controlling the law of the remainder `R_N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Remainder {
    /// Upper bound on `E R_N = sum_{i>N} 1/a_i^2`.
    pub mean_bound: f64,
    /// `a_{N+1}^2`.
    pub next_sq: f64,
}

impl Remainder {
    pub fn of(s: &EigenSpectrum, n: usize) -> Result<Self> {
        let mean_bound = s.tail_sum_bounds(n)?.hi;
        let next_sq = s.a_sq(n + 1).ok_or(Error::NoTailModel {
            len: s.listed_len(),
        })?;
        Ok(Self {
            mean_bound,
            next_sq,
        })
    }

    /// Upper bound on `P(R_N >= d)`.
    pub fn exceedance_bound(&self, d: f64) -> f64 {
        let t = self.mean_bound;
        let mut b = (t / d).min(1.0);
        if d > t {
            let gap = d.sqrt() - t.sqrt();
            b = b.min((-0.5 * self.next_sq * gap * gap).exp());
        }
        b
    }
}

/// Shifts `d` tried for the lower end: multiples of the mean remainder plus
/// a log-spaced sweep of `(0, eps)`.
pub fn bracket_shifts(epsilon: f64, r: &Remainder) -> Vec<f64> {
    let mut d: Vec<f64> = [1.01, 1.1, 1.5, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0]
        .iter()
        .map(|m| m * r.mean_bound)
        .collect();
    let (lo, hi) = ((epsilon * 1e-6).ln(), (0.9 * epsilon).ln());
    d.extend((0..40).map(|k| (lo + (hi - lo) * k as f64 / 39.0).exp()));
    d.retain(|&x| x > 0.0 && x < epsilon);
    d.sort_by(f64::total_cmp);
    d.dedup();
    d
}

/// Combines `upper = P(z_N < eps)` with `(d, P(z_N < eps - d))` pairs.
pub fn bracket_from_values(upper: f64, shifted: &[(f64, f64)], r: &Remainder) -> Result<Interval> {
    let lower = shifted
        .iter()
        .map(|&(d, p)| p - r.exceedance_bound(d))
        .fold(f64::NEG_INFINITY, f64::max);
    if !(lower > 0.0) {
        return Err(Error::VacuousBracket { lower });
    }
    Ok(Interval::new(lower.min(upper), upper))
}

/// Bracket for `P(z < eps)` given a CDF `inner` of the truncation `z_N`.
///
/// Shifts where `inner` fails (for instance too deep in the tail for the
/// method) are skipped.
pub fn truncation_bracket<F>(
    s: &EigenSpectrum,
    epsilon: f64,
    n: usize,
    mut inner: F,
) -> Result<Interval>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(epsilon > 0.0) {
        return Err(Error::DomainError(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let r = Remainder::of(s, n)?;
    if r.mean_bound >= epsilon {
        return Err(Error::VacuousBracket {
            lower: -r.mean_bound,
        });
    }
    let upper = inner(epsilon)?;
    let mut shifted = Vec::new();
    for d in bracket_shifts(epsilon, &r) {
        // Shifts whose remainder bound is already 1 cannot help.
        if r.exceedance_bound(d) >= 1.0 {
            continue;
        }
        match inner(epsilon - d) {
            Ok(p) => shifted.push((d, p)),
            Err(Error::UnderflowRegime { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    bracket_from_values(upper, &shifted, &r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markov_regime_is_vacuous() {
        let s = EigenSpectrum::polynomial(2.0).unwrap();
        // E R_1 ~ 0.64 > eps
        let r = truncation_bracket(&s, 0.5, 1, |_| Ok(0.5));
        assert!(matches!(r, Err(Error::VacuousBracket { .. })));
    }

    #[test]
    fn exceedance_bound_is_a_probability_bound() {
        let r = Remainder {
            mean_bound: 1e-4,
            next_sq: 1e8,
        };
        assert_eq!(r.exceedance_bound(1e-5), 1.0);
        assert!((r.exceedance_bound(2e-4) - 0.5).abs() < 1e-15 || r.exceedance_bound(2e-4) < 0.5);
        assert!(r.exceedance_bound(1e-3) < 1e-50);
    }

    #[test]
    fn remainder_bound_holds_for_one_term() {
        // R = g^2 / 4: P(R >= d) = P(|g| >= 2 sqrt d)
        let r = Remainder {
            mean_bound: 0.25,
            next_sq: 4.0,
        };
        for d in [0.3, 0.5, 1.0, 2.0, 4.0] {
            let exact = statrs::function::erf::erfc((2.0f64 * d).sqrt());
            assert!(r.exceedance_bound(d) >= exact, "d={d}");
        }
    }
}
