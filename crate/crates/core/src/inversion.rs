//! Saddlepoint inversion `theta(eps) = mu^{-1}(eps)`, the auxiliary function
//! `rho = 1/mu^{-1}` and `phi(t) = t mu(t)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{self, RootOptions};
use crate::series::{self, TruncationPolicy};
use crate::spectrum::EigenSpectrum;

/// Fraction of `mu(0)` kept as the upper end of the domain of `rho`.
pub const S_MAX_FACTOR: f64 = 1.0 - 1e-9;

/// Default relative tolerance for `|mu(theta) - eps|`.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSolution {
    pub epsilon: f64,
    pub theta: f64,
    /// `|mu(theta) - eps|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Series policy whose budget stays a tenth of the inversion tolerance.
fn inner_policy(epsilon: f64, tol: f64) -> TruncationPolicy {
    TruncationPolicy {
        tail_tolerance: (0.1 * tol * epsilon.min(1.0)).min(1e-12),
        ..TruncationPolicy::default()
    }
}

/// `mu(0) = sum 1/a_i^2`.
pub fn mu_at_zero(s: &EigenSpectrum) -> Result<f64> {
    Ok(series::eval_mu(s, 0.0, &TruncationPolicy::default())?.value)
}

/// Solves `mu(theta) = eps` to `|mu(theta) - eps| <= tol * eps`.
pub fn invert_mu(s: &EigenSpectrum, epsilon: f64, tol: f64) -> Result<ThetaSolution> {
    if !(tol > 0.0) {
        return Err(Error::BadParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mu0 = mu_at_zero(s)?;
    if !(epsilon > 0.0 && epsilon < mu0) {
        return Err(Error::OutOfRange {
            what: "epsilon",
            value: epsilon,
            lo: 0.0,
            hi: mu0,
        });
    }
    let policy = inner_policy(epsilon, tol);
    let opts = RootOptions {
        f_tol: 0.5 * tol * epsilon,
        ..RootOptions::default()
    };
    let root = roots::solve_increasing(
        |theta| Ok(-series::eval_mu(s, theta, &policy)?.value),
        -epsilon,
        1.0,
        0.0,
        f64::INFINITY,
        opts,
    )?;
    let residual = root.fx.abs();
    if residual > tol * epsilon {
        return Err(Error::NoConvergence {
            iterations: root.iterations,
        });
    }
    Ok(ThetaSolution {
        epsilon,
        theta: root.x,
        residual,
        iterations: root.iterations,
    })
}

/// `rho(x) = 1 / mu^{-1}(x)` for `0 < x <= mu(0) (1 - 1e-9)`.
pub fn eval_rho(s: &EigenSpectrum, x: f64) -> Result<f64> {
    let s_max = mu_at_zero(s)? * S_MAX_FACTOR;
    if !(x > 0.0 && x <= s_max) {
        return Err(Error::OutOfRange {
            what: "s",
            value: x,
            lo: 0.0,
            hi: s_max,
        });
    }
    Ok(1.0 / invert_mu(s, x, DEFAULT_TOL)?.theta)
}

/// `phi(t) = t mu(t)`.
pub fn eval_phi(s: &EigenSpectrum, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::DomainError(format!(
            "phi needs finite t >= 0, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(t * series::eval_mu(s, t, &TruncationPolicy::default())?.value)
}

/// Generalized inverse `inf{t : phi(t) >= y}` to relative accuracy `tol`.
pub fn invert_phi(s: &EigenSpectrum, y: f64, tol: f64) -> Result<f64> {
    if !s.has_infinite_tail() {
        return Err(Error::NoTailModel {
            len: s.listed_len(),
        });
    }
    invert_increasing(|t| eval_phi(s, t), y, tol, f64::INFINITY)
}

/// Generalized inverse of a non-decreasing `f` on `[0, inf)` with `f(0) = 0`
/// and supremum `sup`.
pub(crate) fn invert_increasing<F>(f: F, y: f64, tol: f64, sup: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(y >= 0.0) || y >= sup {
        return Err(Error::OutOfRange {
            what: "y",
            value: y,
            lo: 0.0,
            hi: sup,
        });
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let opts = RootOptions {
        x_rel: tol.max(4.0 * f64::EPSILON),
        ..RootOptions::default()
    };
    Ok(roots::solve_increasing(f, y, 1.0, 0.0, f64::INFINITY, opts)?.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    InvertedMu,
    ClosedForm,
    EstimatedFromF,
}

type AuxFn = dyn Fn(f64) -> Result<f64> + Send + Sync;

/// An evaluable auxiliary function `rho` on `(0, s_max]`.
#[derive(Clone)]
pub struct AuxFunction {
    eval: Arc<AuxFn>,
    provenance: Provenance,
    s_max: f64,
    label: String,
}

impl fmt::Debug for AuxFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AuxFunction")
            .field("label", &self.label)
            .field("provenance", &self.provenance)
            .field("s_max", &self.s_max)
            .finish()
    }
}

impl AuxFunction {
    pub fn new<F>(label: impl Into<String>, provenance: Provenance, s_max: f64, f: F) -> Self
    where
        F: Fn(f64) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            provenance,
            s_max,
            label: label.into(),
        }
    }

    pub fn closed_form<F>(label: impl Into<String>, s_max: f64, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(label, Provenance::ClosedForm, s_max, move |s| Ok(f(s)))
    }

    /// `rho = 1/mu^{-1}` for a spectrum, with `mu(0)` computed once.
    pub fn inverted_mu(spectrum: &EigenSpectrum) -> Result<Self> {
        let s_max = mu_at_zero(spectrum)? * S_MAX_FACTOR;
        let sp = spectrum.clone();
        Ok(Self::new(
            format!("1/mu^-1 [{}]", spectrum.description()),
            Provenance::InvertedMu,
            s_max,
            move |x| Ok(1.0 / invert_mu(&sp, x, DEFAULT_TOL)?.theta),
        ))
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s <= self.s_max) {
            return Err(Error::OutOfRange {
                what: "s",
                value: s,
                lo: 0.0,
                hi: self.s_max,
            });
        }
        let v = (self.eval)(s)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::DomainError(format!(
                "auxiliary function {} returned {v} at s = {s}",
                self.label
            )));
        }
        Ok(v)
    }
}
