//! Eigenvalue sequences `(a_i)` of the Gaussian element `X = (x_i / a_i)`.
//!
//! A spectrum is either one of the two parametric families used throughout
//! the library or an explicit finite list whose continuation is described by
//! a [`TailModel`]. Every other module reads `a_i^2` through
//! [`EigenSpectrum::a_sq`], which keeps the definition of the sequence in one
//! place.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;

/// Continuation of an explicit list beyond its last value `a_L`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TailModel {
    /// Nothing is known past the list; infinite sums are refused.
    #[default]
    None,
    /// `1/a_{i+1}^2 = ratio / a_i^2` for `i >= L`.
    Geometric { ratio: f64 },
    /// `a_i^2 = a_L^2 (i / L)^exponent` for `i > L`.
    Power { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    /// `a_i = i^{beta/2}`, `beta > 1`.
    Polynomial { beta: f64 },
    /// `a_i = exp(alpha i)`, `alpha > 0`.
    Exponential { alpha: f64 },
    /// Listed `a_1 <= a_2 <= ... <= a_L` plus a tail model.
    Explicit {
        values: Vec<f64>,
        #[serde(default)]
        tail: TailModel,
    },
}

/// File form of a spectrum: the family plus an optional free-text label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDescriptor {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// Law of `a_i^2` beyond the listed head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum TailLaw {
    /// `a_i^2 = scale * i^exponent`.
    Power {
        scale: f64,
        exponent: f64,
    },
    /// `a_i^2 = anchor_sq * exp(rate * (i - anchor))`.
    Geometric {
        anchor: f64,
        anchor_sq: f64,
        rate: f64,
    },
    Finite,
}

impl TailLaw {
    #[inline]
    pub(crate) fn a_sq(&self, i: f64) -> f64 {
        match *self {
            TailLaw::Power { scale, exponent } => scale * i.powf(exponent),
            TailLaw::Geometric {
                anchor,
                anchor_sq,
                rate,
            } => anchor_sq * (rate * (i - anchor)).exp(),
            TailLaw::Finite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    family: Family,
    description: String,
    /// Squared listed values `a_1^2 .. a_L^2` (empty for parametric families).
    head: Vec<f64>,
    tail: TailLaw,
}

impl EigenSpectrum {
    pub fn new(family: Family) -> Result<Self> {
        let (head, tail) = match &family {
            Family::Polynomial { beta } => {
                let beta = *beta;
                if !beta.is_finite() || beta <= 1.0 {
                    return Err(Error::BadParameter(format!(
                        "polynomial family needs beta > 1, got {beta}"
                    )));
                }
                (
                    Vec::new(),
                    TailLaw::Power {
                        scale: 1.0,
                        exponent: beta,
                    },
                )
            }
            Family::Exponential { alpha } => {
                let alpha = *alpha;
                if !alpha.is_finite() || alpha <= 0.0 {
                    return Err(Error::BadParameter(format!(
                        "exponential family needs alpha > 0, got {alpha}"
                    )));
                }
                (
                    Vec::new(),
                    TailLaw::Geometric {
                        anchor: 0.0,
                        anchor_sq: 1.0,
                        rate: 2.0 * alpha,
                    },
                )
            }
            Family::Explicit { values, tail } => explicit_law(values, *tail)?,
        };
        let description = match &family {
            Family::Polynomial { beta } => format!("polynomial(beta={beta})"),
            Family::Exponential { alpha } => format!("exponential(alpha={alpha})"),
            Family::Explicit { values, tail } => {
                format!("explicit({} values, tail={tail:?})", values.len())
            }
        };
        Ok(Self {
            family,
            description,
            head,
            tail,
        })
    }

    pub fn polynomial(beta: f64) -> Result<Self> {
        Self::new(Family::Polynomial { beta })
    }

    pub fn exponential(alpha: f64) -> Result<Self> {
        Self::new(Family::Exponential { alpha })
    }

    pub fn explicit(values: Vec<f64>, tail: TailModel) -> Result<Self> {
        Self::new(Family::Explicit { values, tail })
    }

    pub fn from_descriptor(desc: SpectrumDescriptor) -> Result<Self> {
        let mut s = Self::new(desc.family)?;
        if let Some(d) = desc.description {
            s.description = d;
        }
        Ok(s)
    }

    pub fn descriptor(&self) -> SpectrumDescriptor {
        SpectrumDescriptor {
            family: self.family.clone(),
            description: Some(self.description.clone()),
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Number of explicitly listed values (0 for parametric families).
    pub fn listed_len(&self) -> usize {
        self.head.len()
    }

    /// Whether infinite sums over the spectrum are defined.
    pub fn has_infinite_tail(&self) -> bool {
        !matches!(self.tail, TailLaw::Finite)
    }

    /// `a_i^2` for `i >= 1`; `None` past the end of a tail-less list.
    #[inline]
    pub fn a_sq(&self, i: usize) -> Option<f64> {
        assert!(i >= 1, "eigenvalue index starts at 1");
        if i <= self.head.len() {
            Some(self.head[i - 1])
        } else if self.has_infinite_tail() {
            Some(self.tail.a_sq(i as f64))
        } else {
            None
        }
    }

    pub fn a(&self, i: usize) -> Option<f64> {
        match self.family {
            Family::Polynomial { beta } => Some((i as f64).powf(0.5 * beta)),
            Family::Exponential { alpha } => Some((alpha * i as f64).exp()),
            Family::Explicit { ref values, .. } if i <= values.len() => Some(values[i - 1]),
            _ => self.a_sq(i).map(f64::sqrt),
        }
    }

    /// First `n` squared values, or `NoTailModel` if the list is shorter.
    pub fn a_sq_prefix(&self, n: usize) -> Result<Vec<f64>> {
        (1..=n)
            .map(|i| {
                self.a_sq(i).ok_or(Error::NoTailModel {
                    len: self.head.len(),
                })
            })
            .collect()
    }

    pub(crate) fn head(&self) -> &[f64] {
        &self.head
    }

    pub(crate) fn tail_law(&self) -> TailLaw {
        self.tail
    }

    /// Interval containing `sum_{i > n} 1/a_i^2`.
    ///
    /// For a list without tail model the interval is one-sided (`hi = inf`)
    /// while `n` is inside the list, and `NoTailModel` past it.
    pub fn tail_sum_bounds(&self, n: usize) -> Result<Interval> {
        if n == 0 {
            return Err(Error::BadParameter("tail_sum_bounds needs N >= 1".into()));
        }
        let listed: f64 = self.head.iter().skip(n).map(|a2| 1.0 / a2).sum();
        let m = n.max(self.head.len()) as f64;
        match self.tail {
            TailLaw::Power { scale, exponent } => {
                let k = scale * (exponent - 1.0);
                Ok(Interval::new(
                    listed + (m + 1.0).powf(1.0 - exponent) / k,
                    listed + m.powf(1.0 - exponent) / k,
                ))
            }
            TailLaw::Geometric { rate, .. } => {
                let first = 1.0 / self.tail.a_sq(m + 1.0);
                let t = listed + first / (-(-rate).exp_m1());
                Ok(Interval::point(t))
            }
            TailLaw::Finite => {
                if n >= self.head.len() {
                    Err(Error::NoTailModel {
                        len: self.head.len(),
                    })
                } else {
                    Ok(Interval::new(listed, f64::INFINITY))
                }
            }
        }
    }
}

fn explicit_law(values: &[f64], tail: TailModel) -> Result<(Vec<f64>, TailLaw)> {
    if values.is_empty() {
        return Err(Error::BadParameter(
            "explicit spectrum needs at least one value".into(),
        ));
    }
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::BadParameter(format!(
            "eigenvalue entries must be finite and positive, got {bad}"
        )));
    }
    if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::NotMonotone {
            index: i + 1,
            prev: values[i],
            next: values[i + 1],
        });
    }
    let head: Vec<f64> = values.iter().map(|a| a * a).collect();
    let len = head.len() as f64;
    let last_sq = *head.last().unwrap();
    let law = match tail {
        TailModel::None => TailLaw::Finite,
        TailModel::Geometric { ratio } => {
            if !(ratio > 0.0) || !ratio.is_finite() {
                return Err(Error::BadParameter(format!(
                    "geometric tail ratio must be in (0, 1), got {ratio}"
                )));
            }
            if ratio >= 1.0 {
                return Err(Error::NonSummable(format!(
                    "geometric tail ratio {ratio} >= 1"
                )));
            }
            TailLaw::Geometric {
                anchor: len,
                anchor_sq: last_sq,
                rate: -ratio.ln(),
            }
        }
        TailModel::Power { exponent } => {
            if !exponent.is_finite() || exponent <= 1.0 {
                return Err(Error::NonSummable(format!(
                    "power tail exponent must exceed 1, got {exponent}"
                )));
            }
            TailLaw::Power {
                scale: last_sq / len.powf(exponent),
                exponent,
            }
        }
    };
    Ok((head, law))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn polynomial_values() {
        let s = EigenSpectrum::polynomial(2.0).unwrap();
        assert_eq!(s.a(5), Some(5.0));
        assert_eq!(s.a_sq(5), Some(25.0));
    }

    #[test]
    fn exponential_values() {
        let s = EigenSpectrum::exponential(0.5).unwrap();
        assert!((s.a(2).unwrap() - 1f64.exp()).abs() < 1e-15);
        assert!(format!("{:.6}", s.a(2).unwrap()) == "2.718282");
    }

    #[test]
    fn decreasing_list_is_rejected() {
        let r = EigenSpectrum::explicit(vec![3.0, 2.0, 1.0], TailModel::None);
        assert!(matches!(r, Err(Error::NotMonotone { index: 1, .. })));
    }

    #[test]
    fn parameter_ranges() {
        assert!(matches!(
            EigenSpectrum::polynomial(1.0),
            Err(Error::BadParameter(_))
        ));
        assert!(matches!(
            EigenSpectrum::polynomial(0.5),
            Err(Error::BadParameter(_))
        ));
        assert!(matches!(
            EigenSpectrum::exponential(0.0),
            Err(Error::BadParameter(_))
        ));
        assert!(matches!(
            EigenSpectrum::explicit(vec![1.0, 2.0], TailModel::Power { exponent: 1.0 }),
            Err(Error::NonSummable(_))
        ));
        assert!(matches!(
            EigenSpectrum::explicit(vec![1.0, 2.0], TailModel::Geometric { ratio: 1.5 }),
            Err(Error::NonSummable(_))
        ));
        assert!(matches!(
            EigenSpectrum::explicit(vec![1.0, -2.0], TailModel::None),
            Err(Error::BadParameter(_))
        ));
    }

    #[test]
    fn polynomial_tail_bounds_bracket_basel_tail() {
        let s = EigenSpectrum::polynomial(2.0).unwrap();
        let b = s.tail_sum_bounds(100).unwrap();
        assert!((b.lo - 1.0 / 101.0).abs() < 1e-16 && (b.hi - 1.0 / 100.0).abs() < 1e-16);
        // Oracle: pi^2/6 - sum_{i<=100} 1/i^2.
        let partial: f64 = (1..=100).map(|i| 1.0 / (i as f64).powi(2)).sum();
        let exact = std::f64::consts::PI.powi(2) / 6.0 - partial;
        assert!(b.contains(exact));
    }

    #[test]
    fn exponential_tail_is_geometric() {
        let s = EigenSpectrum::exponential(0.5).unwrap();
        let b = s.tail_sum_bounds(10).unwrap();
        let expected = (-11f64).exp() / (1.0 - (-1f64).exp());
        assert!((b.lo / expected - 1.0).abs() < 1e-14);
        assert_eq!(b.lo, b.hi);
    }

    #[test]
    fn tail_less_list_bounds() {
        let s = EigenSpectrum::explicit(vec![1.0, 2.0, 4.0], TailModel::None).unwrap();
        let b = s.tail_sum_bounds(1).unwrap();
        assert!((b.lo - (0.25 + 1.0 / 16.0)).abs() < 1e-16);
        assert!(b.hi.is_infinite());
        assert!(matches!(
            s.tail_sum_bounds(3),
            Err(Error::NoTailModel { len: 3 })
        ));
        assert_eq!(s.a_sq(4), None);
    }

    #[test]
    fn explicit_tails_continue_the_list() {
        let p =
            EigenSpectrum::explicit(vec![1.0, 2.0], TailModel::Power { exponent: 2.0 }).unwrap();
        // a_2^2 = 4, so a_i^2 = 4 (i/2)^2 = i^2.
        assert!((p.a_sq(7).unwrap() - 49.0).abs() < 1e-12);
        let g =
            EigenSpectrum::explicit(vec![1.0, 2.0], TailModel::Geometric { ratio: 0.25 }).unwrap();
        assert!((g.a_sq(3).unwrap() - 16.0).abs() < 1e-12);
        let b = g.tail_sum_bounds(2).unwrap();
        // 1/16 + 1/64 + ... = (1/16)/(3/4)
        assert!((b.lo - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn polynomial_is_exact_power() {
        for beta in [1.5, 2.0, 3.0] {
            let s = EigenSpectrum::polynomial(beta).unwrap();
            for i in (1..=1_000_000usize).step_by(9973).chain([1_000_000]) {
                assert_eq!(s.a_sq(i).unwrap(), (i as f64).powf(beta));
            }
        }
    }

    #[test]
    fn descriptor_json_forms() {
        let d: SpectrumDescriptor =
            serde_json::from_str(r#"{"family":"polynomial","beta":2.0}"#).unwrap();
        assert_eq!(d.family, Family::Polynomial { beta: 2.0 });
        let d: SpectrumDescriptor =
            serde_json::from_str(r#"{"family":"exponential","alpha":0.5}"#).unwrap();
        assert_eq!(d.family, Family::Exponential { alpha: 0.5 });
        let d: SpectrumDescriptor = serde_json::from_str(
            r#"{"family":"explicit","values":[1,2,3],"tail":{"kind":"power","exponent":2.0}}"#,
        )
        .unwrap();
        assert_eq!(
            d.family,
            Family::Explicit {
                values: vec![1.0, 2.0, 3.0],
                tail: TailModel::Power { exponent: 2.0 }
            }
        );
        let s = EigenSpectrum::from_descriptor(d).unwrap();
        assert_eq!(s.listed_len(), 3);
    }

    proptest! {
        #[test]
        fn upper_tail_bounds_are_nested(beta in 1.05f64..6.0, alpha in 0.05f64..3.0, n in 1usize..5000) {
            for s in [EigenSpectrum::polynomial(beta).unwrap(), EigenSpectrum::exponential(alpha).unwrap()] {
                let a = s.tail_sum_bounds(n).unwrap();
                let b = s.tail_sum_bounds(n + 1).unwrap();
                prop_assert!(b.hi <= a.hi);
                prop_assert!(b.lo <= a.lo);
                prop_assert!(a.lo <= a.hi);
            }
        }

        #[test]
        fn explicit_power_bounds_are_nested(len in 1usize..40, exponent in 1.1f64..4.0, n in 1usize..100) {
            let values: Vec<f64> = (1..=len).map(|i| (i as f64).sqrt() + 1.0).collect();
            let s = EigenSpectrum::explicit(values, TailModel::Power { exponent }).unwrap();
            let a = s.tail_sum_bounds(n).unwrap();
            let b = s.tail_sum_bounds(n + 1).unwrap();
            prop_assert!(b.hi <= a.hi * (1.0 + 1e-12));
        }
    }
}
