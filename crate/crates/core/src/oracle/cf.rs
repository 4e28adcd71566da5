//! Numerical inversion of the characteristic function of `z_N`:
//!
//! ```text
//! P(Q < x) = 1/2 - (1/pi) int_0^inf sin(t(u)) / (u r(u)) du
//! t(u) = 1/2 sum atan(l_j u) - x u / 2,   r(u) = prod (1 + l_j^2 u^2)^{1/4}
//! ```
//!
//! for `Q = sum l_j g_j^2`. The integral runs over panels of one period of
//! `x u / 2` until the envelope bound on the rest falls under the tolerance.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::spectrum::EigenSpectrum;

use super::bracket;
use super::{Method, OracleEstimate};

/// Probabilities below this are refused as unreliable.
pub const CF_FLOOR: f64 = 1e-10;

/// Weights with `l u` below this switch to power series.
const SERIES_SWITCH: f64 = 0.01;

const MAX_PANELS: usize = 5_000_000;

struct Form {
    /// Weights in decreasing order.
    lam: Vec<f64>,
    /// `suffix[m][k] = sum_{j >= k} lam_j^{m+1}`.
    suffix: [Vec<f64>; 8],
}

impl Form {
    fn new(mut lam: Vec<f64>) -> Self {
        lam.sort_by(|a, b| b.total_cmp(a));
        let n = lam.len();
        let suffix = std::array::from_fn(|m| {
            let mut s = vec![0.0; n + 1];
            for k in (0..n).rev() {
                s[k] = s[k + 1] + lam[k].powi(m as i32 + 1);
            }
            s
        });
        Self { lam, suffix }
    }

    /// `(sum atan(l_j u), sum ln(1 + l_j^2 u^2))`.
    fn sums(&self, u: f64) -> (f64, f64) {
        let k = self.lam.partition_point(|&l| l * u >= SERIES_SWITCH);
        let mut at = 0.0;
        let mut lg = 0.0;
        for &l in &self.lam[..k] {
            let y = l * u;
            at += y.atan();
            lg += (y * y).ln_1p();
        }
        if k < self.lam.len() {
            let p = |m: usize| self.suffix[m - 1][k];
            let u2 = u * u;
            at += u * (p(1) - u2 * (p(3) / 3.0 - u2 * (p(5) / 5.0 - u2 * p(7) / 7.0)));
            lg += u2 * (p(2) - u2 * (p(4) / 2.0 - u2 * (p(6) / 3.0 - u2 * p(8) / 4.0)));
        }
        (at, lg)
    }

    fn integrand(&self, u: f64, x: f64) -> f64 {
        let (at, lg) = self.sums(u);
        (0.5 * at - 0.5 * x * u).sin() / (u * (0.25 * lg).exp())
    }

    fn envelope(&self, u: f64) -> f64 {
        1.0 / (u * (0.25 * self.sums(u).1).exp())
    }

    /// `P(Q < x)` and its error bound.
    fn cdf(&self, x: f64, tol: f64) -> Result<(f64, f64)> {
        if x <= 0.0 {
            return Ok((0.0, 0.0));
        }
        let width = 2.0 * PI / x;
        let panel_tol = Tolerance::new(1e-3 * tol, 1e-13);
        let mut total = 0.0;
        let mut err = 0.0;
        for k in 0..MAX_PANELS {
            let (a, b) = (k as f64 * width, (k + 1) as f64 * width);
            let r = quad::integrate(|u| self.integrand(u, x), a, b, panel_tol)?;
            total += r.value;
            err += r.abs_error;
            let rest = 4.0 / x * self.envelope(b);
            if rest / PI <= 0.1 * tol {
                let p = 0.5 - total / PI;
                return Ok((p, (err + rest) / PI));
            }
        }
        Err(Error::QuadratureFailure(format!(
            "characteristic function tail still above {tol:e} after {MAX_PANELS} periods"
        )))
    }
}

/// `P(sum w_j g_j^2 < x)` for positive weights `w_j`.
pub fn cf_cdf_weights(weights: &[f64], x: f64, tol: f64) -> Result<f64> {
    if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::BadParameter(
            "weights must be positive and finite".into(),
        ));
    }
    let form = Form::new(weights.to_vec());
    checked(&form, x, tol)
}

fn checked(form: &Form, x: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::BadParameter(format!(
            "quadrature tolerance must be positive, got {tol}"
        )));
    }
    let (p, err) = form.cdf(x, tol)?;
    if err > tol {
        return Err(Error::QuadratureFailure(format!(
            "error bound {err:e} exceeds tolerance {tol:e}"
        )));
    }
    if x > 0.0 && p < CF_FLOOR {
        return Err(Error::UnderflowRegime {
            estimate: p,
            floor: CF_FLOOR,
        });
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Deterministic `P(z_N < eps)` with a truncation bracket when available.
pub fn cf_inversion_cdf(
    s: &EigenSpectrum,
    epsilon: f64,
    n: usize,
    quad_tol: f64,
) -> Result<OracleEstimate> {
    if n == 0 {
        return Err(Error::BadParameter("need N >= 1".into()));
    }
    let form = Form::new(s.a_sq_prefix(n)?.iter().map(|a2| 1.0 / a2).collect());
    let estimate = checked(&form, epsilon, quad_tol)?;
    let bracket = if epsilon > 0.0 {
        match bracket::truncation_bracket(s, epsilon, n, |x| checked(&form, x, quad_tol)) {
            Ok(b) => Some(b),
            Err(e) => {
                log::debug!("no truncation bracket at eps = {epsilon}, N = {n}: {e}");
                None
            }
        }
    } else {
        None
    };
    Ok(OracleEstimate {
        epsilon,
        method: Method::CfInversion,
        estimate,
        log_estimate: estimate.ln(),
        std_error: 0.0,
        rel_std_error: 0.0,
        bracket,
        terms: n,
        samples: 0,
        seed: 0,
        tilt: 0.0,
    })
}
