//! Welch's t-test, Glass' Δ, and Cohen's descriptors.

use std::fmt;

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("each sample needs at least two points and one sample must vary")]
    DegenerateSample,
    #[error("control sample has zero standard deviation")]
    ZeroControlVariance,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample (n − 1) variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Two-sided p-value of the unequal-variance t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::DegenerateSample);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    if va == 0.0 && vb == 0.0 {
        return Err(StatsError::DegenerateSample);
    }
    let diff = mean(a) - mean(b);
    if diff == 0.0 {
        return Ok(1.0);
    }
    let se2 = va + vb;
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

/// (mean(experimental) − mean(control)) / sd(control).
pub fn glass_delta(experimental: &[f64], control: &[f64]) -> Result<f64, StatsError> {
    if experimental.is_empty() || control.len() < 2 {
        return Err(StatsError::DegenerateSample);
    }
    let sd = std_dev(control);
    if sd == 0.0 {
        return Err(StatsError::ZeroControlVariance);
    }
    Ok((mean(experimental) - mean(control)) / sd)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Descriptor {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Descriptor {
    /// Bins on |effect|: [0, 0.2), [0.2, 0.5), [0.5, 0.8), [0.8, ∞).
    pub fn of(effect: f64) -> Descriptor {
        let m = effect.abs();
        if m < 0.2 {
            Descriptor::Negligible
        } else if m < 0.5 {
            Descriptor::Small
        } else if m < 0.8 {
            Descriptor::Medium
        } else {
            Descriptor::Large
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Descriptor::Negligible => "negligible",
            Descriptor::Small => "small",
            Descriptor::Medium => "medium",
            Descriptor::Large => "large",
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
