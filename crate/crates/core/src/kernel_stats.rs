//! Kernel-smoothed expectations `E K(|X| / h)` for kernels supported on
//! `[0, 1]`, written through the small-ball function `F`:
//! `F(h) [K(1) - int_0^1 K'(s) F(hs)/F(h) ds]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

/// Accuracy to which a kernel must integrate to one.
pub const MASS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelSpec {
    /// `K = 1`.
    Uniform,
    /// `K(s) = intercept + slope * s`.
    TruncatedLinear { intercept: f64, slope: f64 },
    /// Piecewise-linear through `(nodes[i], values[i])`, nodes spanning `[0, 1]`.
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
}

impl KernelSpec {
    pub fn truncated_linear(intercept: f64, slope: f64) -> Result<Self> {
        let k = Self::TruncatedLinear { intercept, slope };
        k.validate()?;
        Ok(k)
    }

    pub fn tabulated(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let k = Self::Tabulated { nodes, values };
        k.validate()?;
        Ok(k)
    }

    /// Checks non-negativity and unit mass; warns when `K(1) = 0`.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Uniform => {}
            Self::TruncatedLinear { intercept, slope } => {
                if !(intercept.is_finite() && slope.is_finite()) {
                    return Err(Error::InvalidKernel("coefficients must be finite".into()));
                }
                if *intercept < 0.0 || intercept + slope < 0.0 {
                    return Err(Error::InvalidKernel("kernel takes negative values".into()));
                }
            }
            Self::Tabulated { nodes, values } => {
                if nodes.len() < 2 || nodes.len() != values.len() {
                    return Err(Error::InvalidKernel(
                        "need at least two nodes and one value per node".into(),
                    ));
                }
                if nodes[0] != 0.0 || nodes[nodes.len() - 1] != 1.0 {
                    return Err(Error::InvalidKernel(
                        "nodes must start at 0 and end at 1".into(),
                    ));
                }
                if nodes.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidKernel(
                        "nodes must be strictly increasing".into(),
                    ));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::InvalidKernel(
                        "values must be finite and non-negative".into(),
                    ));
                }
            }
        }
        let mass = quad::integrate_pieces(
            |s| self.eval(s),
            &self.breakpoints(),
            Tolerance::new(1e-14, 1e-13),
        )?
        .value;
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidKernel(format!(
                "kernel integrates to {mass}, not 1"
            )));
        }
        if self.at_one() == 0.0 {
            log::warn!("kernel vanishes at 1; the leading K(1) F(h) term is absent");
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Self::Uniform => 1.0,
            Self::TruncatedLinear { intercept, slope } => intercept + slope * s,
            Self::Tabulated { nodes, values } => {
                let j = segment(nodes, s);
                let w = (s - nodes[j]) / (nodes[j + 1] - nodes[j]);
                values[j] + w * (values[j + 1] - values[j])
            }
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            Self::Uniform => 0.0,
            Self::TruncatedLinear { slope, .. } => *slope,
            Self::Tabulated { nodes, values } => {
                let j = segment(nodes, s);
                (values[j + 1] - values[j]) / (nodes[j + 1] - nodes[j])
            }
        }
    }

    pub fn at_one(&self) -> f64 {
        self.eval(1.0)
    }

    /// Points where `K'` may jump.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Tabulated { nodes, .. } => nodes.clone(),
            _ => vec![0.0, 1.0],
        }
    }

    fn is_flat(&self) -> bool {
        match self {
            Self::Uniform => true,
            Self::TruncatedLinear { slope, .. } => *slope == 0.0,
            Self::Tabulated { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// `(min K, max K)` over `[0, 1]`.
    pub fn range(&self) -> (f64, f64) {
        let pts = self.breakpoints();
        let vals = pts.iter().map(|&s| self.eval(s));
        vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    }
}

fn segment(nodes: &[f64], s: f64) -> usize {
    nodes.partition_point(|&x| x <= s).clamp(1, nodes.len() - 1) - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelExpectation {
    pub h: f64,
    /// `log F(h)`.
    pub log_f_h: f64,
    /// Bracketed factor `K(1) - int K'(s) F(hs)/F(h) ds`.
    pub factor: f64,
    pub value: f64,
    pub log_value: f64,
}

impl KernelExpectation {
    /// `value / (K(1) F(h))`.
    pub fn ratio_to_leading(&self, k: &KernelSpec) -> f64 {
        self.factor / k.at_one()
    }
}

/// Integrates `int_0^1 K'(s) g(s) ds` over the kernel's pieces, refining
/// towards `s = 1` where `F(hs)/F(h)` concentrates.
fn weighted_integral<G>(k: &KernelSpec, mut g: G, quad_tol: f64) -> Result<f64>
where
    G: FnMut(f64) -> f64,
{
    let mut breaks = k.breakpoints();
    breaks.extend((1..=12).map(|j| 1.0 - 10f64.powi(-j)));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let r = quad::integrate_pieces(
        |s| k.derivative(s) * g(s),
        &breaks,
        Tolerance::new(1e-300, quad_tol),
    )?;
    Ok(r.value)
}

/// `E K(|X|/h)` from `log F`; values of `F(hs)` underflow to zero in the quadrature.
pub fn kernel_expectation<F>(
    log_f: F,
    k: &KernelSpec,
    h: f64,
    quad_tol: f64,
) -> Result<KernelExpectation>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::BadParameter(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    let log_f_h = log_f(h)?;
    if !log_f_h.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "log F({h}) = {log_f_h} is not finite"
        )));
    }
    let integral = if k.is_flat() {
        0.0
    } else {
        let mut failure = None;
        let v = weighted_integral(
            k,
            |s| {
                if s <= 0.0 {
                    return 0.0;
                }
                match log_f(h * s) {
                    Ok(l) => (l - log_f_h).exp(),
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            },
            quad_tol,
        );
        if let Some(e) = failure {
            return Err(Error::QuadratureFailure(format!(
                "log F failed below h = {h}: {e}"
            )));
        }
        v?
    };
    let factor = k.at_one() - integral;
    Ok(KernelExpectation {
        h,
        log_f_h,
        factor,
        value: factor * log_f_h.exp(),
        log_value: log_f_h + factor.ln(),
    })
}

/// [`kernel_expectation`] over a grid of bandwidths, in parallel.
pub fn kernel_expectation_grid<F>(
    log_f: F,
    k: &KernelSpec,
    hs: &[f64],
    quad_tol: f64,
) -> Result<Vec<KernelExpectation>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    hs.par_iter()
        .map(|&h| kernel_expectation(&log_f, k, h, quad_tol))
        .collect()
}

/// `K(1) - int_0^1 s^d K'(s) ds`, the limit of `E K(|X|/h) / F(h)` when `F`
/// varies regularly at zero with index `d`.
pub fn regular_variation_limit(k: &KernelSpec, d: f64, quad_tol: f64) -> Result<f64> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::BadParameter(format!(
            "index must be non-negative, got {d}"
        )));
    }
    if k.is_flat() {
        return Ok(k.at_one());
    }
    Ok(k.at_one() - weighted_integral(k, |s| s.powf(d), quad_tol)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin() -> KernelSpec {
        KernelSpec::truncated_linear(4.0 / 3.0, -2.0 / 3.0).unwrap()
    }

    fn power(d: f64) -> impl Fn(f64) -> Result<f64> {
        move |t: f64| Ok(d * t.ln())
    }

    #[test]
    fn uniform_returns_f() {
        let r = kernel_expectation(power(3.0), &KernelSpec::Uniform, 0.2, 1e-12).unwrap();
        assert_eq!(r.factor, 1.0);
        assert!((r.value - 0.008).abs() < 1e-17);
        assert_eq!(
            regular_variation_limit(&KernelSpec::Uniform, 2.0, 1e-12).unwrap(),
            1.0
        );
    }

    #[test]
    fn linear_kernel_square() {
        for h in [1e-3, 0.1, 1.0, 7.0] {
            let r = kernel_expectation(power(2.0), &lin(), h, 1e-13).unwrap();
            assert!((r.value / (8.0 / 9.0 * h * h) - 1.0).abs() < 1e-12, "{h}");
        }
        assert!((regular_variation_limit(&lin(), 2.0, 1e-13).unwrap() - 8.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn zero_index_gives_k0() {
        let v = regular_variation_limit(&lin(), 0.0, 1e-13).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::truncated_linear(1.0, 1.0).is_err());
        assert!(KernelSpec::truncated_linear(2.0, -3.0).is_err());
        // Epanechnikov-like kernel vanishing at 1 is accepted.
        let k = KernelSpec::truncated_linear(2.0, -2.0).unwrap();
        assert_eq!(k.at_one(), 0.0);
        assert!(KernelSpec::tabulated(vec![0.0, 0.5, 1.0], vec![1.0, 1.0, 1.0]).is_ok());
        assert!(KernelSpec::tabulated(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(KernelSpec::tabulated(vec![0.0, 0.5], vec![2.0, 2.0]).is_err());
        assert!(KernelSpec::tabulated(vec![0.0, 1.0, 0.5], vec![1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn tabulated_matches_linear() {
        let t = KernelSpec::tabulated(
            vec![0.0, 0.3, 1.0],
            vec![4.0 / 3.0, 4.0 / 3.0 - 0.2, 2.0 / 3.0],
        )
        .unwrap();
        let a = kernel_expectation(power(2.0), &t, 0.5, 1e-13).unwrap();
        let b = kernel_expectation(power(2.0), &lin(), 0.5, 1e-13).unwrap();
        assert!((a.value / b.value - 1.0).abs() < 1e-12);
        assert_eq!(segment(&[0.0, 0.3, 1.0], 1.0), 1);
        assert_eq!(segment(&[0.0, 0.3, 1.0], 0.0), 0);
    }

    #[test]
    fn grid_matches_pointwise() {
        let hs = [0.1, 0.2, 0.4];
        let g = kernel_expectation_grid(power(1.5), &lin(), &hs, 1e-12).unwrap();
        for (r, &h) in g.iter().zip(&hs) {
            assert_eq!(
                *r,
                kernel_expectation(power(1.5), &lin(), h, 1e-12).unwrap()
            );
        }
    }

    #[test]
    fn log_failure_surfaces() {
        let r = kernel_expectation(
            |t: f64| {
                if t < 0.05 {
                    Err(Error::DomainError("x".into()))
                } else {
                    Ok(t.ln())
                }
            },
            &lin(),
            0.1,
            1e-12,
        );
        assert!(matches!(r, Err(Error::QuadratureFailure(_))));
    }
}
