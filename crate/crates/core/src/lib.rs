//! Small-deviation probabilities `P(||X|| < eps)` for Gaussian elements of
//! `l^2` with coordinates `x_i / a_i`, `x_i` i.i.d. standard normal.
//!
//! The saddlepoint series live in [`series`], their inverses in
//! [`inversion`], the resulting estimates in [`asymptotics`], and independent
//! checks in [`oracle`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod error;
pub mod gamma_class;
pub mod interval;
pub mod inversion;
pub mod kernel_stats;
pub mod oracle;
pub mod quad;
pub mod roots;
pub mod series;
pub mod spectrum;

pub use asymptotics::{ClosedFormFamily, SmallBallEstimate};
pub use error::{Error, Result};
pub use gamma_class::{GammaCheckReport, SelfNeglectRepr, SmoothDensity, Verdict};
pub use interval::Interval;
pub use inversion::{AuxFunction, Provenance, ThetaSolution};
pub use kernel_stats::{KernelExpectation, KernelSpec};
pub use oracle::{McConfig, Method, OracleEstimate};
pub use series::{SeriesValue, TruncationPolicy};
pub use spectrum::{EigenSpectrum, Family, SpectrumDescriptor, TailModel};
