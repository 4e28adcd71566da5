//! Monte Carlo estimates of `P(z_N < eps)`.
//!
//! Under the tilted law `x_i ~ N(0, a_i^2 / (a_i^2 + 2 theta))` the quadratic
//! form is `z = sum g_i^2 / (a_i^2 + 2 theta)` with `g_i` standard normal, and
//!
//! ```text
//! P(z_N < eps) = M(theta) e^{theta eps} E_theta[1{z < eps} e^{theta (z - eps)}]
//! M(theta)     = prod_{i<=N} (1 + 2 theta / a_i^2)^{-1/2}
//! ```
//!
//! `theta` solves the truncated saddlepoint equation `mu_N(theta) = eps`.
//! Plain sampling is the case `theta = 0`.
//!
//! Sample `k` draws its normals from ChaCha8 stream `k` of the seed, and
//! samples are reduced in fixed blocks in block order, so the output does
//! not depend on the number of workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{self, RootOptions};
use crate::spectrum::EigenSpectrum;

use super::bracket::{self, Remainder};
use super::{Method, OracleEstimate};

/// Samples per reduction block.
pub const SAMPLE_BLOCK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    /// Truncation `N`.
    pub terms: usize,
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl McConfig {
    pub fn new(terms: usize, samples: u64, seed: u64) -> Self {
        Self {
            terms,
            samples,
            seed,
            workers: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.terms == 0 || self.samples == 0 {
            return Err(Error::BadParameter(
                "Monte Carlo needs N >= 1 and samples >= 1".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::BadParameter("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// One threshold family sharing a tilt.
struct Plan {
    epsilon: f64,
    theta: f64,
    log_m: f64,
    /// `1/(a_i^2 + 2 theta)`.
    v: Vec<f64>,
    /// `eps` first, then `eps - d` for each bracket shift.
    thresholds: Vec<f64>,
    shifts: Vec<f64>,
}

fn truncated_mu(a_sq: &[f64], theta: f64) -> f64 {
    a_sq.iter().rev().map(|a2| 1.0 / (a2 + 2.0 * theta)).sum()
}

fn solve_tilt(a_sq: &[f64], epsilon: f64) -> Result<f64> {
    if epsilon >= truncated_mu(a_sq, 0.0) {
        return Ok(0.0);
    }
    let opts = RootOptions {
        x_rel: 1e-14,
        ..RootOptions::default()
    };
    roots::solve_increasing(
        |t| Ok(-truncated_mu(a_sq, t)),
        -epsilon,
        1.0,
        0.0,
        f64::INFINITY,
        opts,
    )
    .map(|r| r.x)
    .map_err(|e| Error::DegenerateTilt(format!("no tilt for eps = {epsilon}: {e}")))
}

fn make_plan(
    a_sq: &[f64],
    epsilon: f64,
    tilted: bool,
    remainder: Option<&Remainder>,
) -> Result<Plan> {
    let theta = if tilted && epsilon > 0.0 {
        solve_tilt(a_sq, epsilon)?
    } else {
        0.0
    };
    if !theta.is_finite() {
        return Err(Error::DegenerateTilt(format!(
            "tilt {theta} at eps = {epsilon}"
        )));
    }
    let log_m = -0.5
        * a_sq
            .iter()
            .map(|a2| (2.0 * theta / a2).ln_1p())
            .sum::<f64>();
    let v = a_sq.iter().map(|a2| 1.0 / (a2 + 2.0 * theta)).collect();
    let shifts: Vec<f64> = match remainder {
        Some(r) if epsilon > 0.0 && r.mean_bound < epsilon => bracket::bracket_shifts(epsilon, r)
            .into_iter()
            .filter(|&d| r.exceedance_bound(d) < 1.0)
            .collect(),
        _ => Vec::new(),
    };
    let thresholds = std::iter::once(epsilon)
        .chain(shifts.iter().map(|d| epsilon - d))
        .collect();
    Ok(Plan {
        epsilon,
        theta,
        log_m,
        v,
        thresholds,
        shifts,
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Weight sums `(sum w, sum w^2)` per plan and threshold, flattened.
fn simulate_block(plans: &[Plan], n: usize, seed: u64, first: u64, count: u64) -> Vec<f64> {
    let width: usize = plans.iter().map(|p| p.thresholds.len()).sum();
    let mut acc = vec![0.0; 2 * width];
    let mut sq = vec![0.0; n];
    let base = ChaCha8Rng::seed_from_u64(seed);
    for k in first..first + count {
        let mut rng = base.clone();
        rng.set_stream(k);
        for g in sq.iter_mut() {
            let x: f64 = StandardNormal.sample(&mut rng);
            *g = x * x;
        }
        let mut col = 0;
        for p in plans {
            let z = dot(&p.v, &sq);
            let w = if p.theta == 0.0 {
                1.0
            } else {
                (p.theta * (z - p.epsilon)).exp()
            };
            for &t in &p.thresholds {
                if z < t {
                    acc[2 * col] += w;
                    acc[2 * col + 1] += w * w;
                }
                col += 1;
            }
        }
    }
    acc
}

fn simulate(
    s: &EigenSpectrum,
    epsilons: &[f64],
    cfg: &McConfig,
    tilted: bool,
) -> Result<Vec<OracleEstimate>> {
    cfg.validate()?;
    let a_sq = s.a_sq_prefix(cfg.terms)?;
    let remainder = Remainder::of(s, cfg.terms).ok();
    let plans = epsilons
        .iter()
        .map(|&e| make_plan(&a_sq, e, tilted, remainder.as_ref()))
        .collect::<Result<Vec<_>>>()?;

    let n_blocks = cfg.samples.div_ceil(SAMPLE_BLOCK);
    let run = || {
        (0..n_blocks)
            .into_par_iter()
            .map(|b| {
                let first = b * SAMPLE_BLOCK;
                let count = SAMPLE_BLOCK.min(cfg.samples - first);
                simulate_block(&plans, cfg.terms, cfg.seed, first, count)
            })
            .collect::<Vec<_>>()
    };
    let blocks = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::BadParameter(format!("cannot start {w} workers: {e}")))?
            .install(run),
        None => run(),
    };
    let mut totals = vec![0.0; blocks.first().map_or(0, Vec::len)];
    for b in &blocks {
        for (t, v) in totals.iter_mut().zip(b) {
            *t += v;
        }
    }

    let n = cfg.samples as f64;
    let method = if tilted {
        Method::McTilted
    } else {
        Method::McPlain
    };
    let mut out = Vec::with_capacity(plans.len());
    let mut col = 0;
    for p in &plans {
        let scale = p.log_m + p.theta * p.epsilon;
        let stats = |c: usize| {
            let mean = totals[2 * c] / n;
            let var = (totals[2 * c + 1] / n - mean * mean).max(0.0);
            (mean, (var / n).sqrt())
        };
        let (mean, se) = stats(col);
        let log_estimate = if mean > 0.0 {
            scale + mean.ln()
        } else {
            f64::NEG_INFINITY
        };
        let estimate = log_estimate.exp();
        let rel = if mean > 0.0 { se / mean } else { f64::INFINITY };
        let bracket = match &remainder {
            Some(r) if !p.shifts.is_empty() => {
                let shifted: Vec<(f64, f64)> = p
                    .shifts
                    .iter()
                    .enumerate()
                    .map(|(j, &d)| (d, scale.exp() * stats(col + 1 + j).0))
                    .collect();
                bracket::bracket_from_values(estimate, &shifted, r).ok()
            }
            _ => None,
        };
        col += p.thresholds.len();
        out.push(OracleEstimate {
            epsilon: p.epsilon,
            method,
            estimate,
            log_estimate,
            std_error: if mean > 0.0 { estimate * rel } else { 0.0 },
            rel_std_error: rel,
            bracket,
            terms: cfg.terms,
            samples: cfg.samples,
            seed: cfg.seed,
            tilt: p.theta,
        });
    }
    Ok(out)
}

/// Plain simulation of `P(z_N < eps)`.
pub fn mc_plain_cdf(s: &EigenSpectrum, epsilon: f64, cfg: &McConfig) -> Result<OracleEstimate> {
    Ok(simulate(s, &[epsilon], cfg, false)?.remove(0))
}

/// Exponentially tilted simulation of `P(z_N < eps)`.
pub fn mc_tilted_cdf(s: &EigenSpectrum, epsilon: f64, cfg: &McConfig) -> Result<OracleEstimate> {
    Ok(simulate(s, &[epsilon], cfg, true)?.remove(0))
}

/// Plain estimates for several thresholds from one set of samples.
pub fn mc_plain_batch(
    s: &EigenSpectrum,
    epsilons: &[f64],
    cfg: &McConfig,
) -> Result<Vec<OracleEstimate>> {
    simulate(s, epsilons, cfg, false)
}

/// Tilted estimates for several thresholds, each with its own tilt, from
/// one set of normal draws.
pub fn mc_tilted_batch(
    s: &EigenSpectrum,
    epsilons: &[f64],
    cfg: &McConfig,
) -> Result<Vec<OracleEstimate>> {
    simulate(s, epsilons, cfg, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::TailModel;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn one_term_plain() {
        let s = EigenSpectrum::explicit(vec![1.0], TailModel::None).unwrap();
        let e = mc_plain_cdf(&s, 1.0, &McConfig::new(1, 200_000, 7)).unwrap();
        let exact = 2.0 * Normal::standard().cdf(1.0) - 1.0;
        assert!((exact - 0.682689).abs() < 1e-6);
        assert!((e.estimate - exact).abs() < 3.0 * e.std_error, "{e:?}");
        let se = (e.estimate * (1.0 - e.estimate) / 200_000.0).sqrt();
        assert!((e.std_error - se).abs() < 1e-15);
    }

    #[test]
    fn zero_threshold_gives_zero() {
        let s = EigenSpectrum::polynomial(2.0).unwrap();
        let cfg = McConfig::new(100, 5000, 1);
        assert_eq!(mc_plain_cdf(&s, 0.0, &cfg).unwrap().estimate, 0.0);
        assert_eq!(mc_tilted_cdf(&s, 0.0, &cfg).unwrap().estimate, 0.0);
    }

    #[test]
    fn bit_identical_across_runs_and_workers() {
        let s = EigenSpectrum::polynomial(2.0).unwrap();
        let cfg = McConfig::new(500, 5000, 42);
        let a = mc_tilted_cdf(&s, 0.3, &cfg).unwrap();
        let b = mc_tilted_cdf(&s, 0.3, &cfg).unwrap();
        let c = mc_tilted_cdf(&s, 0.3, &cfg.with_workers(3)).unwrap();
        let d = mc_tilted_cdf(&s, 0.3, &cfg.with_workers(1)).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.estimate.to_bits(), c.estimate.to_bits());
        assert_eq!(a.estimate.to_bits(), d.estimate.to_bits());
        assert_eq!(a.std_error.to_bits(), c.std_error.to_bits());
    }

    #[test]
    fn zero_tilt_reduces_to_plain() {
        let s = EigenSpectrum::polynomial(2.0).unwrap();
        let a_sq = s.a_sq_prefix(50).unwrap();
        let eps = truncated_mu(&a_sq, 0.0);
        let cfg = McConfig::new(50, 4000, 9);
        let t = mc_tilted_cdf(&s, eps, &cfg).unwrap();
        let p = mc_plain_cdf(&s, eps, &cfg).unwrap();
        assert_eq!(t.tilt, 0.0);
        assert_eq!(t.estimate.to_bits(), p.estimate.to_bits());
        assert_eq!(t.std_error.to_bits(), p.std_error.to_bits());
    }

    #[test]
    fn tilted_agrees_with_plain() {
        let s = EigenSpectrum::polynomial(2.0).unwrap();
        let cfg = McConfig::new(1000, 100_000, 3);
        let t = mc_tilted_cdf(&s, 0.3, &cfg).unwrap();
        let p = mc_plain_cdf(&s, 0.3, &cfg.with_workers(1)).unwrap();
        let combined = (t.std_error.powi(2) + p.std_error.powi(2)).sqrt();
        assert!(
            (t.estimate - p.estimate).abs() < 3.0 * combined,
            "{t:?} {p:?}"
        );
        assert!(t.rel_std_error < p.rel_std_error);
    }

    #[test]
    fn tilted_reaches_deep_tail() {
        let s = EigenSpectrum::polynomial(2.0).unwrap();
        let e = mc_tilted_cdf(&s, 0.02, &McConfig::new(2000, 20_000, 5)).unwrap();
        let target = -(std::f64::consts::PI.powi(2) / 8.0) / 0.02;
        assert!(
            (e.log_estimate / target - 1.0).abs() < 0.05,
            "{}",
            e.log_estimate
        );
        assert!(e.rel_std_error < 0.05);
    }

    #[test]
    fn estimates_monotone_in_threshold() {
        let s = EigenSpectrum::polynomial(2.0).unwrap();
        let grid = [0.1, 0.2, 0.3, 0.5, 0.8];
        let cfg = McConfig::new(300, 20_000, 11);
        let plain = mc_plain_batch(&s, &grid, &cfg).unwrap();
        assert!(plain.windows(2).all(|w| w[0].estimate <= w[1].estimate));
        let tilted = mc_tilted_batch(&s, &grid, &cfg).unwrap();
        assert!(tilted.windows(2).all(|w| w[0].estimate <= w[1].estimate));
    }

    #[test]
    fn estimate_inside_own_bracket() {
        let s = EigenSpectrum::polynomial(2.0).unwrap();
        let e = mc_tilted_cdf(&s, 0.5, &McConfig::new(10_000, 2000, 2)).unwrap();
        let b = e.bracket.expect("bracket");
        assert!(b.contains(e.estimate));
    }
}
