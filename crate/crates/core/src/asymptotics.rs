//! Saddlepoint small-ball estimate, the two closed-form families, the
//! exponential-integral representation and the norm transform.
//!
//! Everything is carried in log space: the estimates underflow long before
//! the asymptotic regime (about `e^{-2467}` at `eps = 5e-4` for `a_i = i`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::{self, AuxFunction};
use crate::quad::{self, Tolerance};
use crate::series::{self, TruncationPolicy};
use crate::spectrum::{EigenSpectrum, Family};

/// `ln(2 pi) / 2`
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBallEstimate {
    pub epsilon: f64,
    pub theta: f64,
    pub i_value: f64,
    pub psi_value: f64,
    /// `exp(-I) / (sqrt(2 pi) psi)`; zero once it underflows.
    pub value: f64,
    pub log_value: f64,
}

/// `P(z < eps) ~ exp(-I(theta)) / (sqrt(2 pi) psi(theta))` with `mu(theta) = eps`.
pub fn dmz_estimate(s: &EigenSpectrum, epsilon: f64, tol: f64) -> Result<SmallBallEstimate> {
    let sol = inversion::invert_mu(s, epsilon, tol)?;
    let policy = TruncationPolicy::default();
    let i_value = series::eval_i(s, sol.theta, &policy)?.value;
    let psi_value = series::eval_psi(s, sol.theta, &policy)?.value;
    let log_value = -i_value - psi_value.ln() - HALF_LN_2PI;
    Ok(SmallBallEstimate {
        epsilon,
        theta: sol.theta,
        i_value,
        psi_value,
        value: log_value.exp(),
        log_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClosedFormFamily {
    /// `c1 s^{-1/(2 beta - 2)} exp(-c2 s^{-1/(beta - 1)})`
    Polynomial { beta: f64, c1: f64, c2: f64 },
    /// `sqrt(alpha / (-pi log s)) exp(-(log s)^2 / (4 alpha))`
    Exponential { alpha: f64 },
}

impl ClosedFormFamily {
    pub fn polynomial(beta: f64, c1: f64, c2: f64) -> Result<Self> {
        let f = Self::Polynomial { beta, c1, c2 };
        f.validate()?;
        Ok(f)
    }

    pub fn exponential(alpha: f64) -> Result<Self> {
        let f = Self::Exponential { alpha };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Polynomial { beta, c1, c2 } => beta > 1.0 && c1 > 0.0 && c2 > 0.0,
            Self::Exponential { alpha } => alpha > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BadParameter(format!(
                "invalid closed-form family {self:?}"
            )))
        }
    }
}

/// Natural log of the closed form at `s`.
pub fn closed_form_log(f: &ClosedFormFamily, s: f64) -> Result<f64> {
    f.validate()?;
    if !(s > 0.0) {
        return Err(Error::DomainError(format!(
            "closed forms need s > 0, got {s}"
        )));
    }
    match *f {
        ClosedFormFamily::Polynomial { beta, c1, c2 } => {
            Ok(c1.ln() - s.ln() / (2.0 * beta - 2.0) - c2 * s.powf(-1.0 / (beta - 1.0)))
        }
        ClosedFormFamily::Exponential { alpha } => {
            if s >= 1.0 {
                return Err(Error::DomainError(format!(
                    "exponential closed form needs s < 1, got {s}"
                )));
            }
            let l = s.ln();
            Ok(0.5 * (alpha / (-std::f64::consts::PI * l)).ln() - l * l / (4.0 * alpha))
        }
    }
}

pub fn closed_form_eval(f: &ClosedFormFamily, s: f64) -> Result<f64> {
    closed_form_log(f, s).map(f64::exp)
}

/// Least-squares fit `log F(s) ~ log c1 + exponent log s - c2 s^{-1/(beta-1)}`
/// of the saddlepoint estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyCalibration {
    pub c1: f64,
    pub c2: f64,
    /// Fitted power of the prefactor.
    pub prefactor_exponent: f64,
    /// Root-mean-square residual of the fit in log space.
    pub rms_residual: f64,
    pub points: usize,
}

/// Largest acceptable RMS log residual of [`calibrate_poly_constants`].
pub const CALIBRATION_MAX_RMS: f64 = 0.05;

pub fn calibrate_poly_constants(s: &EigenSpectrum, eps_grid: &[f64]) -> Result<PolyCalibration> {
    let beta = match s.family() {
        Family::Polynomial { beta } => *beta,
        _ => {
            return Err(Error::BadParameter(
                "calibration needs a polynomial spectrum".into(),
            ))
        }
    };
    let mut logs = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        logs.push(dmz_estimate(s, eps, inversion::DEFAULT_TOL)?.log_value);
    }
    fit_poly_log(beta, eps_grid, &logs)
}

/// The fit behind [`calibrate_poly_constants`], on given log values.
pub fn fit_poly_log(beta: f64, eps_grid: &[f64], log_values: &[f64]) -> Result<PolyCalibration> {
    if eps_grid.len() != log_values.len() {
        return Err(Error::BadParameter(
            "grid and values differ in length".into(),
        ));
    }
    let mut distinct = eps_grid.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::PoorFit(format!(
            "need at least 4 distinct grid points for 3 parameters, got {}",
            distinct.len()
        )));
    }
    let k = -1.0 / (beta - 1.0);
    let rows: Vec<[f64; 3]> = eps_grid
        .iter()
        .map(|&e| [1.0, e.ln(), -e.powf(k)])
        .collect();
    let (coef, rms) = least_squares(&rows, log_values)?;
    let fit = PolyCalibration {
        c1: coef[0].exp(),
        c2: coef[2],
        prefactor_exponent: coef[1],
        rms_residual: rms,
        points: rows.len(),
    };
    if !(rms <= CALIBRATION_MAX_RMS) || !(fit.c2 > 0.0) || !(fit.c1 > 0.0 && fit.c1.is_finite()) {
        return Err(Error::PoorFit(format!(
            "rms residual {rms:e}, c1 = {}, c2 = {}",
            fit.c1, fit.c2
        )));
    }
    Ok(fit)
}

/// Least squares by modified Gram-Schmidt on equilibrated columns.
fn least_squares<const K: usize>(rows: &[[f64; K]], y: &[f64]) -> Result<([f64; K], f64)> {
    let n = rows.len();
    let mut cols: Vec<Vec<f64>> = (0..K)
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let mut scale = [1.0; K];
    for (j, c) in cols.iter_mut().enumerate() {
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::PoorFit(format!("design column {j} is degenerate")));
        }
        scale[j] = norm;
        c.iter_mut().for_each(|v| *v /= norm);
    }
    let mut r = [[0.0; K]; K];
    for j in 0..K {
        for i in 0..j {
            let d: f64 = (0..n).map(|t| cols[i][t] * cols[j][t]).sum();
            r[i][j] = d;
            for t in 0..n {
                cols[j][t] -= d * cols[i][t];
            }
        }
        let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-13) {
            return Err(Error::PoorFit("design matrix is rank deficient".into()));
        }
        r[j][j] = norm;
        cols[j].iter_mut().for_each(|v| *v /= norm);
    }
    let mut rhs = y.to_vec();
    let mut qty = [0.0; K];
    for j in 0..K {
        let d: f64 = (0..n).map(|t| cols[j][t] * rhs[t]).sum();
        qty[j] = d;
        for t in 0..n {
            rhs[t] -= d * cols[j][t];
        }
    }
    let mut x = [0.0; K];
    for j in (0..K).rev() {
        let mut acc = qty[j];
        for i in j + 1..K {
            acc -= r[j][i] * x[i];
        }
        x[j] = acc / r[j][j];
    }
    for j in 0..K {
        x[j] /= scale[j];
    }
    let rms = (rows
        .iter()
        .zip(y)
        .map(|(row, &yy)| {
            let pred: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            (yy - pred).powi(2)
        })
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok((x, rms))
}

/// `int_s^upper dt / rho(t)`, integrated in `u = log t`.
pub fn inverse_aux_integral(rho: &AuxFunction, s: f64, upper: f64) -> Result<f64> {
    if !(s > 0.0 && s <= upper) {
        return Err(Error::DomainError(format!(
            "need 0 < s <= {upper}, got s = {s}"
        )));
    }
    if upper > rho.s_max() {
        return Err(Error::DomainError(format!(
            "upper limit {upper} outside the domain of {} (s_max = {})",
            rho.label(),
            rho.s_max()
        )));
    }
    if s == upper {
        return Ok(0.0);
    }
    let mut failure = None;
    let r = quad::integrate(
        |u: f64| {
            let t = u.exp();
            match rho.eval(t) {
                Ok(v) => t / v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        s.ln(),
        upper.ln(),
        Tolerance::new(1e-10, 1e-13),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let r = r?;
    if r.abs_error > 1e-8 {
        return Err(Error::QuadratureFailure(format!(
            "integral of 1/rho has error {:e}",
            r.abs_error
        )));
    }
    Ok(r.value)
}

/// `log C - int_s^upper dt/rho - 2 log rho(s)`.
pub fn log_representation_eval(rho: &AuxFunction, s: f64, log_c: f64, upper: f64) -> Result<f64> {
    let integral = inverse_aux_integral(rho, s, upper)?;
    Ok(log_c - integral - 2.0 * rho.eval(s)?.ln())
}

/// `C exp(-int_s^1 dt/rho) / rho(s)^2`.
pub fn representation_eval(rho: &AuxFunction, s: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::BadParameter(format!(
            "constant must be positive, got {c}"
        )));
    }
    log_representation_eval(rho, s, c.ln(), 1.0).map(f64::exp)
}

/// `log C` matching the representation to `log_f` at the anchor `s0`.
pub fn calibrate_representation(rho: &AuxFunction, s0: f64, log_f: f64, upper: f64) -> Result<f64> {
    Ok(log_f - log_representation_eval(rho, s0, 0.0, upper)?)
}

/// Auxiliary function of `G(s) = F(s^2)`: `rho_G(s) = rho_F(s^2) / (2 s)`.
pub fn norm_transform(rho_f: &AuxFunction) -> AuxFunction {
    let inner = rho_f.clone();
    AuxFunction::new(
        format!("norm transform of {}", rho_f.label()),
        rho_f.provenance(),
        rho_f.s_max().sqrt(),
        move |s| {
            let sq = s * s;
            if !(sq > 0.0 && sq <= inner.s_max()) {
                return Err(Error::DomainError(format!(
                    "s^2 = {sq} outside the domain of {}",
                    inner.label()
                )));
            }
            Ok(inner.eval(sq)? / (2.0 * s))
        },
    )
}
