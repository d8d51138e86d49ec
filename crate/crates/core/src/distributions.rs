//! Parametric, exchangeable value distributions stored in contexts.
//!
//! Three representations are supported:
//!
//! * an urn without replacement over a multiset of discrete values, shared by
//!   up to `size` referencing slots,
//! * a point mass on a single value,
//! * a univariate Gaussian, referenced by exactly one slot.
//!
//! Urns are split per value (one branch per distinct value, weighted by its
//! multiplicity) and Gaussians are conditioned with the scalar Kalman update.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiset::Multiset;
use crate::value::Value;

/// Relative tolerance used when comparing real parameters.
pub const REAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub var: f64,
}

impl Gaussian {
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if !(var > 0.0 && var.is_finite()) || !mean.is_finite() {
            return Err(Error::InvalidInput(format!(
                "gaussian needs finite mean and positive variance, got N({mean}, {var})"
            )));
        }
        Ok(Gaussian { mean, var })
    }

    fn key(&self) -> (u64, u64) {
        (self.mean.to_bits(), self.var.to_bits())
    }
}

impl PartialEq for Gaussian {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Gaussian {}

impl PartialOrd for Gaussian {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Gaussian {
    fn cmp(&self, other: &Self) -> Ordering {
        self.mean
            .total_cmp(&other.mean)
            .then(self.var.total_cmp(&other.var))
    }
}

impl Hash for Gaussian {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

/// A distribution representation bound to a label in a context.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionRep {
    Urn(Multiset<Value>),
    Dirac(Value),
    Gaussian(Gaussian),
}

impl DistributionRep {
    pub fn urn<I, V>(values: I) -> Self
    where
        I: IntoIterator<Item = V>,
        V: Into<Value>,
    {
        DistributionRep::Urn(values.into_iter().map(Into::into).collect())
    }

    pub fn dirac(v: impl Into<Value>) -> Self {
        DistributionRep::Dirac(v.into())
    }

    /// Panics on invalid parameters; use [`Gaussian::new`] for checked construction.
    pub fn gaussian(mean: f64, var: f64) -> Self {
        DistributionRep::Gaussian(Gaussian::new(mean, var).expect("valid gaussian"))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionRep::Urn(u) if u.is_empty() => {
                Err(Error::InvalidInput("urn must not be empty".into()))
            }
            DistributionRep::Gaussian(g) => Gaussian::new(g.mean, g.var).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Maximum number of slots that may reference this representation.
    /// `None` means unbounded: a point mass pins every referencing slot to the same value.
    pub fn arity(&self) -> Option<usize> {
        match self {
            DistributionRep::Urn(u) => Some(u.size()),
            DistributionRep::Dirac(_) => None,
            DistributionRep::Gaussian(_) => Some(1),
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, DistributionRep::Gaussian(_))
    }

    /// Support of the marginal of a single slot, with probabilities.
    /// `None` for continuous representations.
    pub fn marginal(&self) -> Option<Vec<(Value, f64)>> {
        match self {
            DistributionRep::Urn(u) => {
                let n = u.size() as f64;
                Some(u.iter().map(|(v, &c)| (v.clone(), c as f64 / n)).collect())
            }
            DistributionRep::Dirac(v) => Some(vec![(v.clone(), 1.0)]),
            DistributionRep::Gaussian(_) => None,
        }
    }

    /// Equality with exact discrete parameters and relative tolerance on reals.
    pub fn approx_eq(&self, other: &Self) -> bool {
        match (self, other) {
            (DistributionRep::Gaussian(a), DistributionRep::Gaussian(b)) => {
                close(a.mean, b.mean) && close(a.var, b.var)
            }
            _ => self == other,
        }
    }
}

pub(crate) fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REAL_TOLERANCE * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

impl fmt::Display for DistributionRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionRep::Urn(u) => {
                f.write_str("U(")?;
                for (i, v) in u.iter_copies().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
            DistributionRep::Dirac(v) => write!(f, "δ{v}"),
            DistributionRep::Gaussian(g) => write!(f, "N({}, {})", g.mean, g.var),
        }
    }
}

/// One world of an urn split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitBranch {
    /// The urn left for the other slots; `None` when the urn is exhausted.
    pub remaining: Option<DistributionRep>,
    /// The value assigned to the split-off slot.
    pub taken: Value,
    pub probability: f64,
}

impl SplitBranch {
    pub fn split_off(&self) -> DistributionRep {
        DistributionRep::Dirac(self.taken.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub branches: Vec<SplitBranch>,
}

fn urn_without(u: &Multiset<Value>, v: &Value) -> Option<DistributionRep> {
    let mut rest = u.clone();
    rest.remove_one(v);
    if rest.is_empty() {
        None
    } else {
        Some(DistributionRep::Urn(rest))
    }
}

/// Splits one slot off an urn: one branch per distinct value, weighted by multiplicity.
pub fn urn_split(u: &Multiset<Value>) -> Result<SplitOutcome> {
    if u.is_empty() {
        return Err(Error::InvalidInput("cannot split an empty urn".into()));
    }
    let n = u.size() as f64;
    let branches = u
        .iter()
        .map(|(v, &c)| SplitBranch {
            remaining: urn_without(u, v),
            taken: v.clone(),
            probability: c as f64 / n,
        })
        .collect();
    Ok(SplitOutcome { branches })
}

/// Conditions one slot of the urn on taking value `v`.
///
/// Returns the urn left for the remaining slots and the probability of `v`.
/// An impossible value yields probability 0 and the urn unchanged.
pub fn urn_condition_eq(u: &Multiset<Value>, v: &Value) -> Result<(Option<DistributionRep>, f64)> {
    if u.is_empty() {
        return Err(Error::InvalidInput("cannot condition an empty urn".into()));
    }
    let c = u.count(v);
    if c == 0 {
        return Ok((Some(DistributionRep::Urn(u.clone())), 0.0));
    }
    Ok((urn_without(u, v), c as f64 / u.size() as f64))
}

fn check_noise(noise_variance: f64) -> Result<()> {
    if noise_variance > 0.0 && noise_variance.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "noise variance must be positive, got {noise_variance}"
        )))
    }
}

/// Scalar Kalman measurement update of a Gaussian prior.
pub fn gaussian_posterior(prior: &Gaussian, observation: f64, noise_variance: f64) -> Result<Gaussian> {
    check_noise(noise_variance)?;
    let s = prior.var + noise_variance;
    Ok(Gaussian {
        mean: (prior.mean * noise_variance + observation * prior.var) / s,
        var: prior.var * noise_variance / s,
    })
}

/// Marginal density of the observation: `N(y; mean, var + noise)`.
pub fn gaussian_likelihood(prior: &Gaussian, observation: f64, noise_variance: f64) -> Result<f64> {
    check_noise(noise_variance)?;
    Ok(normal_pdf(observation, prior.mean, prior.var + noise_variance))
}

pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Whether `rep` admits `slots` referencing slots with a permutation-invariant joint.
pub fn is_exchangeable_joint(rep: &DistributionRep, slots: usize) -> bool {
    slots >= 1 && rep.arity().is_none_or(|a| slots <= a)
}
