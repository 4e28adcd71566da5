//! Independent estimates of `P(z < eps)`, `z = sum x_i^2 / a_i^2`.
//!
//! All methods work with the truncation `z_N` to the first `N` terms and
//! attach a bracket for the untruncated probability when the spectrum
//! provides a tail bound (see [`bracket`]).

pub mod bracket;
mod cf;
mod mc;

use serde::{Deserialize, Serialize};

use crate::interval::Interval;

pub use bracket::truncation_bracket;
pub use cf::{cf_cdf_weights, cf_inversion_cdf, CF_FLOOR};
pub use mc::{
    mc_plain_batch, mc_plain_cdf, mc_tilted_batch, mc_tilted_cdf, McConfig, SAMPLE_BLOCK,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    McTilted,
    McPlain,
    CfInversion,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::McTilted => "mc-tilted",
            Method::McPlain => "mc-plain",
            Method::CfInversion => "cf-inversion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub epsilon: f64,
    pub method: Method,
    /// Estimate of `P(z_N < eps)`; underflows to 0 deep in the tail.
    pub estimate: f64,
    pub log_estimate: f64,
    /// Absolute standard error (0 for deterministic methods).
    pub std_error: f64,
    /// Standard error relative to the estimate.
    pub rel_std_error: f64,
    /// Interval for the untruncated `P(z < eps)`, when the tail allows one.
    pub bracket: Option<Interval>,
    pub terms: usize,
    pub samples: u64,
    pub seed: u64,
    /// Exponential tilt used by the sampler (0 for the other methods).
    pub tilt: f64,
}
