//! Divergences between label distributions, and the f-divergence generator /
//! conjugate pairs used by the f-GAN objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::LabelDistribution;

fn check(p: &LabelDistribution, q: &LabelDistribution) -> Result<()> {
    if p.categories != q.categories {
        return Err(Error::CategoryMismatch);
    }
    Ok(())
}

/// Jensen–Shannon divergence with base-2 logarithms, so it lies in `[0, 1]`.
pub fn jensen_shannon(p: &LabelDistribution, q: &LabelDistribution) -> Result<f64> {
    check(p, q)?;
    let kl_to_mid = |a: f64, m: f64| if a > 0.0 { a * (a / m).log2() } else { 0.0 };
    let js: f64 = p
        .proportions
        .iter()
        .zip(&q.proportions)
        .map(|(&a, &b)| {
            let m = (a + b) / 2.0;
            0.5 * kl_to_mid(a, m) + 0.5 * kl_to_mid(b, m)
        })
        .sum();
    Ok(js.clamp(0.0, 1.0))
}

/// Hellinger distance `(1/√2)·‖√p − √q‖₂`.
pub fn hellinger(p: &LabelDistribution, q: &LabelDistribution) -> Result<f64> {
    check(p, q)?;
    let s: f64 = p
        .proportions
        .iter()
        .zip(&q.proportions)
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    Ok((s.sqrt() / std::f64::consts::SQRT_2).min(1.0))
}

/// Wasserstein-1 distance with categories placed at their dictionary index.
pub fn wasserstein1_categorical(p: &LabelDistribution, q: &LabelDistribution) -> Result<f64> {
    check(p, q)?;
    let (mut cp, mut cq, mut w) = (0.0, 0.0, 0.0);
    // the last CDF difference is zero for valid distributions
    let n = p.proportions.len().saturating_sub(1);
    for i in 0..n {
        cp += p.proportions[i];
        cq += q.proportions[i];
        w += (cp - cq).abs();
    }
    Ok(w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divergences {
    pub categories: Vec<String>,
    pub real: Vec<f64>,
    pub synthetic: Vec<f64>,
    pub jensen_shannon: f64,
    pub hellinger: f64,
    pub wasserstein: f64,
}

/// All three divergences after aligning the category lists.
pub fn label_divergences(real: &LabelDistribution, synth: &LabelDistribution) -> Divergences {
    let (p, q) = real.align(synth);
    Divergences {
        jensen_shannon: jensen_shannon(&p, &q).expect("aligned"),
        hellinger: hellinger(&p, &q).expect("aligned"),
        wasserstein: wasserstein1_categorical(&p, &q).expect("aligned"),
        categories: p.categories,
        real: p.proportions,
        synthetic: q.proportions,
    }
}

/// f-divergences supported by the f-GAN objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FDivergence {
    KullbackLeibler,
    SquaredHellinger,
}

impl std::str::FromStr for FDivergence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" | "kld" | "kullback-leibler" | "kullbackleibler" => Ok(Self::KullbackLeibler),
            "h2" | "h2d" | "hellinger" | "squared-hellinger" | "squaredhellinger" => {
                Ok(Self::SquaredHellinger)
            }
            other => Err(Error::Unsupported(format!("f-divergence `{other}`"))),
        }
    }
}

/// Generator function, conjugate and output activation of one f-divergence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FDivergencePair {
    pub name: FDivergence,
}

pub fn f_pair(name: FDivergence) -> FDivergencePair {
    FDivergencePair { name }
}

impl FDivergencePair {
    /// Generator `f(u)` on `u > 0` (`u ≥ 0` for squared Hellinger).
    pub fn f(&self, u: f64) -> f64 {
        match self.name {
            FDivergence::KullbackLeibler => {
                if u == 0.0 {
                    0.0
                } else {
                    u * u.ln()
                }
            }
            FDivergence::SquaredHellinger => (u.sqrt() - 1.0).powi(2),
        }
    }

    /// Fenchel conjugate `f*(t)`.
    pub fn f_conjugate(&self, t: f64) -> Result<f64> {
        match self.name {
            FDivergence::KullbackLeibler => Ok((t - 1.0).exp()),
            FDivergence::SquaredHellinger => {
                if t < 1.0 {
                    Ok(t / (1.0 - t))
                } else {
                    Err(Error::DomainError {
                        what: "squared-Hellinger conjugate t/(1-t)",
                        value: t,
                    })
                }
            }
        }
    }

    /// `d f*(t) / dt`, same domain as [`Self::f_conjugate`].
    pub fn f_conjugate_derivative(&self, t: f64) -> f64 {
        match self.name {
            FDivergence::KullbackLeibler => (t - 1.0).exp(),
            FDivergence::SquaredHellinger => 1.0 / ((1.0 - t) * (1.0 - t)),
        }
    }

    /// Output activation `g_f(v)` mapping a raw critic output into `dom f*`.
    pub fn activation(&self, v: f64) -> f64 {
        match self.name {
            FDivergence::KullbackLeibler => v,
            FDivergence::SquaredHellinger => 1.0 - (-v).exp(),
        }
    }

    pub fn activation_derivative(&self, v: f64) -> f64 {
        match self.name {
            FDivergence::KullbackLeibler => 1.0,
            FDivergence::SquaredHellinger => (-v).exp(),
        }
    }

    /// Supremum (exclusive) of the conjugate's domain.
    pub fn conjugate_upper_bound(&self) -> f64 {
        match self.name {
            FDivergence::KullbackLeibler => f64::INFINITY,
            FDivergence::SquaredHellinger => 1.0,
        }
    }
}
