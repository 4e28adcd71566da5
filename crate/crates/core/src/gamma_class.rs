//! Numerical tools for the class `Gamma_0`: non-decreasing `F` vanishing at
//! zero with `F(s + x rho(s)) / F(s) -> e^x` as `s -> 0`.
//!
//! Functions `F` are always passed as `log F`, since members of the class
//! underflow long before the limit is visible.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::{AuxFunction, Provenance};
use crate::quad::{self, Tolerance};
use crate::roots::{self, RootOptions};
use crate::spectrum::{EigenSpectrum, TailModel};

/// Final relative error accepted by the membership verdict.
pub const VERDICT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCheckReport {
    /// Decreasing.
    pub s_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    /// `ratios[i][j]` at `s_grid[i]`, `x_grid[j]`.
    pub ratios: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub max_rel_error: Vec<f64>,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// Pass: small final error and strict improvement over the last three grid
/// points. Fail: large final error without that improvement.
pub fn verdict(errors: &[f64], threshold: f64) -> Verdict {
    let Some(&last) = errors.last() else {
        return Verdict::Inconclusive;
    };
    let tail = &errors[errors.len().saturating_sub(3)..];
    let improving = tail.len() == 3 && tail.windows(2).all(|w| w[1] < w[0]);
    match (last <= threshold, improving) {
        (true, true) => Verdict::Pass,
        (false, false) => Verdict::Fail,
        _ => Verdict::Inconclusive,
    }
}

fn check_grids(s_grid: &[f64], x_grid: &[f64]) -> Result<()> {
    if s_grid.is_empty() || x_grid.is_empty() {
        return Err(Error::BadParameter(
            "s and x grids must be non-empty".into(),
        ));
    }
    if s_grid.iter().any(|s| !(*s > 0.0)) || s_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::BadParameter(
            "s grid must be positive and strictly decreasing".into(),
        ));
    }
    if x_grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::BadParameter("x grid must be finite".into()));
    }
    Ok(())
}

fn report(
    s_grid: &[f64],
    x_grid: &[f64],
    ratios: Vec<Vec<f64>>,
    targets: Vec<f64>,
) -> GammaCheckReport {
    let max_rel_error: Vec<f64> = ratios
        .iter()
        .map(|row| {
            row.iter()
                .zip(&targets)
                .map(|(r, t)| (r / t - 1.0).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    GammaCheckReport {
        s_grid: s_grid.to_vec(),
        x_grid: x_grid.to_vec(),
        verdict: verdict(&max_rel_error, VERDICT_THRESHOLD),
        ratios,
        targets,
        max_rel_error,
        threshold: VERDICT_THRESHOLD,
    }
}

/// Checks `F(s + x rho(s)) / F(s) -> e^x` along a decreasing `s_grid`.
pub fn gamma_membership_check<F>(
    log_f: F,
    rho: &AuxFunction,
    s_grid: &[f64],
    x_grid: &[f64],
) -> Result<GammaCheckReport>
where
    F: Fn(f64) -> Result<f64>,
{
    check_grids(s_grid, x_grid)?;
    let mut ratios = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let r = rho.eval(s)?;
        let base = log_f(s)?;
        let mut row = Vec::with_capacity(x_grid.len());
        for &x in x_grid {
            let t = s + x * r;
            row.push(if x == 0.0 {
                1.0
            } else if t <= 0.0 {
                0.0
            } else {
                (log_f(t)? - base).exp()
            });
        }
        ratios.push(row);
    }
    let targets = x_grid.iter().map(|x| x.exp()).collect();
    Ok(report(s_grid, x_grid, ratios, targets))
}

/// Checks `rho(s + x rho(s)) / rho(s) -> 1` along a decreasing `s_grid`.
pub fn self_neglect_check(
    rho: &AuxFunction,
    s_grid: &[f64],
    x_grid: &[f64],
) -> Result<GammaCheckReport> {
    check_grids(s_grid, x_grid)?;
    let mut ratios = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let r = rho.eval(s)?;
        let mut row = Vec::with_capacity(x_grid.len());
        for &x in x_grid {
            if x == 0.0 {
                row.push(1.0);
                continue;
            }
            let t = s + x * r;
            if t <= 0.0 {
                return Err(Error::DomainError(format!(
                    "s + x rho(s) = {t} <= 0 at s = {s}, x = {x}"
                )));
            }
            row.push(rho.eval(t)? / r);
        }
        ratios.push(row);
    }
    let targets = vec![1.0; x_grid.len()];
    Ok(report(s_grid, x_grid, ratios, targets))
}

/// `int_0^s F(t) dt / F(s)`, the canonical auxiliary function of `F`.
pub fn estimate_aux<F>(log_f: F, s: f64, quad_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::DomainError(format!("need s > 0, got {s}")));
    }
    let base = log_f(s)?;
    if !base.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "log F({s}) = {base} is not finite"
        )));
    }
    // Mass concentrates within rho(s) of s: refine geometrically towards s.
    let mut breaks = vec![0.0];
    breaks.extend((1..=12).map(|k| s * (1.0 - 10f64.powi(-k))));
    breaks.push(s);
    let mut failure = None;
    let r = quad::integrate_pieces(
        |t: f64| match log_f(t) {
            Ok(l) => (l - base).exp(),
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        &breaks,
        Tolerance::new(0.0, quad_tol),
    );
    if let Some(e) = failure {
        return Err(Error::QuadratureFailure(format!(
            "log F failed inside (0, {s}): {e}"
        )));
    }
    Ok(r?.value)
}

/// [`estimate_aux`] packaged as an auxiliary function.
pub fn aux_from_f<F>(label: impl Into<String>, log_f: F, s_max: f64, quad_tol: f64) -> AuxFunction
where
    F: Fn(f64) -> Result<f64> + Send + Sync + 'static,
{
    let log_f = Arc::new(log_f);
    AuxFunction::new(label, Provenance::EstimatedFromF, s_max, move |s| {
        estimate_aux(|t| log_f(t), s, quad_tol)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessRow {
    pub order: u32,
    /// `log(F(s) / s^p)` along the grid.
    pub log_ratios: Vec<f64>,
    /// Strictly decreasing along the (decreasing) grid.
    pub decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub s_grid: Vec<f64>,
    pub rows: Vec<FlatnessRow>,
}

impl FlatnessReport {
    /// Highest order `p` up to which every row decreases.
    pub fn flat_through(&self) -> Option<u32> {
        self.rows
            .iter()
            .take_while(|r| r.decreasing)
            .map(|r| r.order)
            .last()
    }
}

/// Tabulates `F(s)/s^p` for `p = 0..=p_max` along a decreasing grid.
pub fn flatness_probe<F>(log_f: F, p_max: u32, s_grid: &[f64]) -> Result<FlatnessReport>
where
    F: Fn(f64) -> Result<f64>,
{
    check_grids(s_grid, &[0.0])?;
    let logs = s_grid
        .iter()
        .map(|&s| log_f(s))
        .collect::<Result<Vec<_>>>()?;
    let rows = (0..=p_max)
        .map(|p| {
            let log_ratios: Vec<f64> = s_grid
                .iter()
                .zip(&logs)
                .map(|(s, l)| l - p as f64 * s.ln())
                .collect();
            let decreasing = log_ratios.windows(2).all(|w| w[1] < w[0]);
            FlatnessRow {
                order: p,
                log_ratios,
                decreasing,
            }
        })
        .collect();
    Ok(FlatnessReport {
        s_grid: s_grid.to_vec(),
        rows,
    })
}

/// Log-log slope of `rho` between `a < b`.
fn log_slope(rho: &AuxFunction, a: f64, b: f64) -> Result<f64> {
    Ok((rho.eval(b)?.ln() - rho.eval(a)?.ln()) / (b / a).ln())
}

/// Tolerance on the agreement of the two decade slopes.
pub const SLOPE_STABILITY: f64 = 1e-2;

/// Slopes of `log rho` against `log s` over the two decades below `s0`;
/// fails unless they agree and exceed one (so that `rho(s)/s -> 0`).
pub fn regular_variation_probe(rho: &AuxFunction, s0: f64) -> Result<(f64, f64)> {
    let upper = log_slope(rho, s0 / 10.0, s0)?;
    let lower = log_slope(rho, s0 / 100.0, s0 / 10.0)?;
    if (upper - lower).abs() > SLOPE_STABILITY {
        return Err(Error::NotRegularlyVarying(format!(
            "decade slopes {lower} and {upper} differ by more than {SLOPE_STABILITY}"
        )));
    }
    if lower <= 1.0 + SLOPE_STABILITY {
        return Err(Error::NotRegularlyVarying(format!(
            "slope {lower} does not exceed 1, so rho(s)/s does not vanish"
        )));
    }
    Ok((lower, upper))
}

/// Spectrum with `a_i^2 = C phi^{-1}(i)`, `phi(t) = t mu(t)`, `mu = (1/rho)^{-1}`.
pub fn reconstruct_spectrum(rho: &AuxFunction, c: f64, i_max: usize) -> Result<EigenSpectrum> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::BadParameter(format!(
            "constant must be positive, got {c}"
        )));
    }
    if i_max < 10 {
        return Err(Error::BadParameter("need i_max >= 10 to fit a tail".into()));
    }
    let s0 = (0.5 * rho.s_max()).min(1e-2);
    regular_variation_probe(rho, s0)?;

    let mut s_top = rho.s_max().min(1e100);
    while rho.eval(s_top).is_err() && s_top > 1.0 {
        s_top = s_top.sqrt();
    }
    let t_min = 1.0 / rho.eval(s_top)?;
    // mu(t) solves rho(s) = 1/t.
    let mu = |t: f64| -> Result<f64> {
        let target = -t.ln();
        let opts = RootOptions {
            x_rel: 1e-15,
            ..RootOptions::default()
        };
        let start = s_top.min(1.0);
        Ok(roots::solve_increasing(|s| Ok(rho.eval(s)?.ln()), target, start, 0.0, s_top, opts)?.x)
    };
    let phi = |t: f64| -> Result<f64> { Ok(t * mu(t)?) };

    let lo = t_min * (1.0 + 1e-12);
    let phi_lo = phi(lo)?;
    let mut a_sq = Vec::with_capacity(i_max);
    let mut start = 2.0 * lo;
    for i in 1..=i_max {
        let y = i as f64;
        if y < phi_lo {
            return Err(Error::OutOfRange {
                what: "phi^{-1} argument",
                value: y,
                lo: phi_lo,
                hi: f64::INFINITY,
            });
        }
        let opts = RootOptions {
            x_rel: 1e-14,
            ..RootOptions::default()
        };
        let t = roots::solve_increasing(phi, y, start, lo, f64::INFINITY, opts)?.x;
        start = t;
        a_sq.push(c * t);
    }

    // Power tail fitted on the last decade.
    let from = i_max / 10;
    let pts: Vec<(f64, f64)> = (from..=i_max)
        .map(|i| ((i as f64).ln(), a_sq[i - 1].ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    if !(slope > 1.0) {
        return Err(Error::NonSummable(format!(
            "fitted tail exponent {slope} does not exceed 1"
        )));
    }
    let values = a_sq.iter().map(|v| v.sqrt()).collect();
    Ok(
        EigenSpectrum::explicit(values, TailModel::Power { exponent: slope })?
            .with_description(format!("reconstructed from {} (C = {c})", rho.label())),
    )
}

/// `x_0 = x0`, `x_n = x_{n-1} - rho(x_{n-1})`, up to `n_max` steps.
///
/// Stops early once a step no longer changes `x` in floating point.
pub fn step_sequence(rho: &AuxFunction, x0: f64, n_max: usize) -> Result<Vec<f64>> {
    let mut xs = vec![x0];
    let mut x = x0;
    for step in 1..=n_max {
        let next = x - rho.eval(x)?;
        if next <= 0.0 {
            return Err(Error::LeavesDomain { step, value: next });
        }
        if next >= x {
            break;
        }
        xs.push(next);
        x = next;
    }
    Ok(xs)
}

/// Smooth probability density on `[0, 1]`.
#[derive(Clone)]
pub struct SmoothDensity {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    label: String,
}

impl std::fmt::Debug for SmoothDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothDensity")
            .field("label", &self.label)
            .finish()
    }
}

fn bump_norm() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| {
        quad::integrate(raw_bump, 0.0, 1.0, Tolerance::new(0.0, 1e-13))
            .expect("bump integral")
            .value
    })
}

fn raw_bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

impl SmoothDensity {
    /// `exp(-1/(t(1-t))) / Z` on `(0, 1)`.
    pub fn bump() -> Self {
        let z = bump_norm();
        Self {
            f: Arc::new(move |t| raw_bump(t) / z),
            label: "bump".into(),
        }
    }

    /// A user density; must integrate to 1 within `1e-10`.
    pub fn new<F>(label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mass = quad::integrate(&f, 0.0, 1.0, Tolerance::new(1e-13, 1e-13))?.value;
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::BadParameter(format!(
                "density integrates to {mass}, not 1"
            )));
        }
        Ok(Self {
            f: Arc::new(f),
            label: label.into(),
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// `phi(x) = c(x) exp(int_x^1 eps(u)/rho(u) du)` built on the step sequence:
/// on `[x_{n+1}, x_n]`, `eps(u) = k_n p((x_n - u)/(x_n - x_{n+1})) rho(u)` with
/// `k_n = (ln phi(x_{n+1}) - ln phi(x_n)) / (x_n - x_{n+1})`; on `[x_0, 1]`
/// the same with `k = ln phi(x_0) / (1 - x_0)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfNeglectRepr {
    /// `x_0 > x_1 > ...`.
    pub grid_points: Vec<f64>,
    /// `k` on `[x_0, 1]`.
    pub initial_coefficient: f64,
    /// `k_n` on `[x_{n+1}, x_n]`.
    pub coefficients: Vec<f64>,
    /// `max |eps|` sampled on each `[x_{n+1}, x_n]`.
    pub epsilon_values: Vec<f64>,
    /// `ln phi(x_n)`.
    pub log_phi: Vec<f64>,
    /// `int_{x_n}^1 eps/rho` by quadrature.
    pub log_reconstruction: Vec<f64>,
    /// `c(x)` at the last grid point.
    pub c_value: f64,
    pub density: String,
    pub rho_self_neglecting: Verdict,
    #[serde(skip)]
    parts: Option<(AuxFunction, SmoothDensity)>,
}

impl SelfNeglectRepr {
    /// `max_n |exp(int_{x_n}^1 eps/rho) / phi(x_n) - 1|`.
    pub fn identity_error(&self) -> f64 {
        self.log_phi
            .iter()
            .zip(&self.log_reconstruction)
            .map(|(a, b)| (b - a).exp_m1().abs())
            .fold(0.0, f64::max)
    }

    /// `eps(u)` for `x_last <= u <= 1`.
    pub fn epsilon_at(&self, u: f64) -> Result<f64> {
        let (rho, p) = self.parts.as_ref().ok_or_else(|| {
            Error::DomainError("representation was deserialized without rho".into())
        })?;
        let g = &self.grid_points;
        let x0 = g[0];
        if u > x0 && u <= 1.0 {
            return Ok(self.initial_coefficient * p.eval((1.0 - u) / (1.0 - x0)) * rho.eval(u)?);
        }
        let n = g.partition_point(|&x| x > u);
        if n == 0 {
            return Ok(if u == x0 { 0.0 } else { f64::NAN });
        }
        if n >= g.len() && u < g[g.len() - 1] {
            return Err(Error::DomainError(format!(
                "u = {u} below the last grid point"
            )));
        }
        let n = n.min(g.len() - 1);
        let (hi, lo) = (g[n - 1], g[n]);
        Ok(self.coefficients[n - 1] * p.eval((hi - u) / (hi - lo)) * rho.eval(u)?)
    }
}

/// Builds the representation of a positive `phi` on the step sequence of `rho`.
pub fn build_self_neglect_repr<P>(
    phi: P,
    rho: &AuxFunction,
    x0: f64,
    density: &SmoothDensity,
    n_max: usize,
) -> Result<SelfNeglectRepr>
where
    P: Fn(f64) -> Result<f64>,
{
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(Error::BadParameter(format!(
            "x0 must lie in (0, 1), got {x0}"
        )));
    }
    let grid = step_sequence(rho, x0, n_max)?;
    if grid.len() < 2 {
        return Err(Error::BadParameter("step sequence has no interval".into()));
    }
    let log_phi = grid
        .iter()
        .map(|&x| {
            let v = phi(x)?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositivePhi { x, value: v });
            }
            Ok(v.ln())
        })
        .collect::<Result<Vec<f64>>>()?;

    let initial = log_phi[0] / (1.0 - x0);
    let coefficients: Vec<f64> = grid
        .windows(2)
        .zip(log_phi.windows(2))
        .map(|(x, l)| (l[1] - l[0]) / (x[0] - x[1]))
        .collect();

    let eps = |k: f64, top: f64, width: f64, u: f64| -> Result<f64> {
        Ok(k * density.eval((top - u) / width) * rho.eval(u)?)
    };
    let piece = |k: f64, lo: f64, hi: f64, top: f64, width: f64| -> Result<f64> {
        if k == 0.0 {
            return Ok(0.0);
        }
        let mut failure = None;
        let r = quad::integrate(
            |u: f64| match (eps(k, top, width, u), rho.eval(u)) {
                (Ok(e), Ok(r)) => e / r,
                (Err(e), _) | (_, Err(e)) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            lo,
            hi,
            Tolerance::new(1e-15, 1e-13),
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(r?.value)
    };

    let mut log_reconstruction = Vec::with_capacity(grid.len());
    let mut acc = piece(initial, x0, 1.0, 1.0, 1.0 - x0)?;
    log_reconstruction.push(acc);
    let mut epsilon_values = Vec::with_capacity(coefficients.len());
    for (n, &k) in coefficients.iter().enumerate() {
        let (hi, lo) = (grid[n], grid[n + 1]);
        let width = hi - lo;
        acc += piece(k, lo, hi, hi, width)?;
        log_reconstruction.push(acc);
        let mut m: f64 = 0.0;
        for j in 1..64 {
            let u = hi - width * j as f64 / 64.0;
            m = m.max(eps(k, hi, width, u)?.abs());
        }
        epsilon_values.push(m);
    }

    let tail = grid.len().saturating_sub(4);
    let probe: Vec<f64> = grid[tail..grid.len() - 1].to_vec();
    let rho_self_neglecting = if probe.len() >= 3 {
        match self_neglect_check(rho, &probe, &[-1.0, 1.0]) {
            Ok(r) => r.verdict,
            Err(_) => Verdict::Inconclusive,
        }
    } else {
        Verdict::Inconclusive
    };
    if rho_self_neglecting == Verdict::Fail {
        log::warn!(
            "{} does not look self-neglecting on the step grid",
            rho.label()
        );
    }

    let last = grid.len() - 1;
    Ok(SelfNeglectRepr {
        c_value: (log_phi[last] - log_reconstruction[last]).exp(),
        grid_points: grid,
        initial_coefficient: initial,
        coefficients,
        epsilon_values,
        log_phi,
        log_reconstruction,
        density: density.label().to_string(),
        rho_self_neglecting,
        parts: Some((rho.clone(), density.clone())),
    })
}
