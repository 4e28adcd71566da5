//! Experiment configuration: a JSON file merged with command-line flags.
//!
//! Every command fills the defaults it uses back into the config, so the
//! copy embedded in the output is the one that actually ran.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallball::asymptotics::dmz_estimate;
use smallball::gamma_class::aux_from_f;
use smallball::inversion::{mu_at_zero, AuxFunction, DEFAULT_TOL, S_MAX_FACTOR};
use smallball::{EigenSpectrum, KernelSpec, Method, SpectrumDescriptor};

use crate::CliError;

/// Where `log F` comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSource {
    /// The saddlepoint estimate of the configured spectrum.
    Saddlepoint,
    /// `F(s) = s^exponent`.
    Power { exponent: f64 },
    /// `F(s) = exp(-s^-exponent)`.
    ExpInversePower { exponent: f64 },
}

/// Where the auxiliary function comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RhoSource {
    /// `1 / theta(s)` for the configured spectrum.
    InvertedMu,
    /// `coefficient * s^exponent`.
    Power { coefficient: f64, exponent: f64 },
    /// `int_0^s F / F(s)` for the configured function.
    Estimated,
}

/// `phi(x) = coefficient * x^exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSource {
    pub coefficient: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleParams {
    pub method: Method,
    pub terms: usize,
    #[serde(default)]
    pub samples: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_terms: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<RhoSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
}

pub type LogFn = Arc<dyn Fn(f64) -> smallball::Result<f64> + Send + Sync>;

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid {what} {}: {e}", path.display())))
}

pub fn powers_of_ten(hi: i32, lo: i32) -> Vec<f64> {
    (lo..=hi).rev().map(|k| 10f64.powi(k)).collect()
}

impl ExperimentConfig {
    pub fn load(
        config: Option<&Path>,
        spectrum: Option<&Path>,
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        let mut cfg: Self = match config {
            Some(p) => read_json(p, "config")?,
            None => Self::default(),
        };
        if let Some(p) = spectrum {
            cfg.spectrum = Some(read_json(p, "spectrum")?);
        }
        if seed.is_some() {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    pub fn spectrum(&self) -> Result<EigenSpectrum, CliError> {
        let desc = self.spectrum.clone().ok_or_else(|| {
            CliError::Config(
                "a spectrum is required (--spectrum or \"spectrum\" in the config)".into(),
            )
        })?;
        EigenSpectrum::from_descriptor(desc)
            .map_err(|e| CliError::Config(format!("invalid spectrum: {e}")))
    }

    pub fn tolerance(&mut self) -> Result<f64, CliError> {
        let t = *self.tolerance.get_or_insert(DEFAULT_TOL);
        positive("tolerance", t)
    }

    pub fn quad_tolerance(&mut self) -> Result<f64, CliError> {
        let t = *self.quad_tolerance.get_or_insert(1e-10);
        positive("quad_tolerance", t)
    }

    pub fn policy(&mut self) -> Result<smallball::TruncationPolicy, CliError> {
        let terms = *self.max_terms.get_or_insert(10_000_000);
        let tol = *self.tail_tolerance.get_or_insert(1e-12);
        smallball::TruncationPolicy::new(terms, tol).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn function(&mut self) -> Result<LogFn, CliError> {
        let source = self
            .function
            .get_or_insert(FunctionSource::Saddlepoint)
            .clone();
        Ok(match source {
            FunctionSource::Saddlepoint => {
                let s = self.spectrum()?;
                let tol = self.tolerance()?;
                Arc::new(move |e| Ok(dmz_estimate(&s, e, tol)?.log_value))
            }
            FunctionSource::Power { exponent } => {
                if !(exponent > 0.0) {
                    return Err(CliError::Config(format!(
                        "power exponent must be positive, got {exponent}"
                    )));
                }
                Arc::new(move |e: f64| Ok(exponent * e.ln()))
            }
            FunctionSource::ExpInversePower { exponent } => {
                if !(exponent > 0.0) {
                    return Err(CliError::Config(format!(
                        "exponent must be positive, got {exponent}"
                    )));
                }
                Arc::new(move |e: f64| Ok(-e.powf(-exponent)))
            }
        })
    }

    /// Domain of the configured function.
    fn function_domain(&self) -> Result<f64, CliError> {
        match self.function {
            Some(FunctionSource::Saddlepoint) | None => {
                let s = self.spectrum()?;
                Ok(mu_at_zero(&s).map_err(CliError::Compute)? * S_MAX_FACTOR)
            }
            _ => Ok(f64::INFINITY),
        }
    }

    /// The configured auxiliary function; there is no default.
    pub fn rho(&mut self) -> Result<AuxFunction, CliError> {
        let source = self.rho.clone().ok_or_else(|| {
            CliError::Config("an auxiliary function source (\"rho\") is required".into())
        })?;
        Ok(match source {
            RhoSource::InvertedMu => {
                AuxFunction::inverted_mu(&self.spectrum()?).map_err(CliError::Compute)?
            }
            RhoSource::Power {
                coefficient,
                exponent,
            } => {
                if !(coefficient > 0.0 && exponent.is_finite()) {
                    return Err(CliError::Config(
                        "rho power needs a positive coefficient".into(),
                    ));
                }
                AuxFunction::closed_form(
                    format!("{coefficient} s^{exponent}"),
                    f64::INFINITY,
                    move |s| coefficient * s.powf(exponent),
                )
            }
            RhoSource::Estimated => {
                let f = self.function()?;
                let tol = self.quad_tolerance()?;
                let domain = self.function_domain()?;
                aux_from_f("estimated from F", move |s| f(s), domain, tol)
            }
        })
    }

    pub fn phi(&self) -> Result<PhiSource, CliError> {
        let p = self
            .phi
            .clone()
            .ok_or_else(|| CliError::Config("a \"phi\" source is required".into()))?;
        positive("phi coefficient", p.coefficient)?;
        Ok(p)
    }

    pub fn kernel(&mut self) -> Result<KernelSpec, CliError> {
        let k = self
            .kernel
            .get_or_insert(KernelSpec::TruncatedLinear {
                intercept: 4.0 / 3.0,
                slope: -2.0 / 3.0,
            })
            .clone();
        k.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(k)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::Config("stochastic methods need a seed (--seed or \"seed\")".into())
        })
    }
}

fn positive(what: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!(
            "{what} must be positive, got {v}"
        )))
    }
}

/// Fills `slot` with `default` if empty and checks the grid.
pub fn grid(
    slot: &mut Option<Vec<f64>>,
    name: &str,
    default: Vec<f64>,
) -> Result<Vec<f64>, CliError> {
    let g = slot.get_or_insert(default).clone();
    if g.is_empty() {
        return Err(CliError::Config(format!("{name} is empty")));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Config(format!("{name} has non-finite entries")));
    }
    let up = g.windows(2).all(|w| w[1] > w[0]);
    let down = g.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(CliError::Config(format!("{name} must be strictly sorted")));
    }
    Ok(g)
}

/// As [`grid`], additionally requiring positive, strictly decreasing values.
pub fn decreasing_grid(
    slot: &mut Option<Vec<f64>>,
    name: &str,
    default: Vec<f64>,
) -> Result<Vec<f64>, CliError> {
    let g = grid(slot, name, default)?;
    if g.iter().any(|v| *v <= 0.0) || g.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::Config(format!(
            "{name} must be positive and strictly decreasing"
        )));
    }
    Ok(g)
}
