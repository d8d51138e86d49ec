//! Observation models and the exact Bayesian update on lifted distributions.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{gaussian_likelihood, gaussian_posterior, normal_pdf, DistributionRep};
use crate::dynamics::{eval_constraint, split_slot_draws, split_until_determinate, Constraint, Determinacy, Limits, StepStats};
use crate::error::{Error, PriorSnapshot, Result};
use crate::lifted::{EntityStructure, GroundState, LiftedDistribution, LiftedState};
use crate::value::Value;

/// Noisy reading of a numeric property of one uniformly chosen entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationReading {
    pub prop: String,
    pub value: f64,
    pub noise_var: f64,
    /// Entities the reading may come from; defaults to those having `prop`.
    #[serde(rename = "where", default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Constraint>,
}

/// A symmetric-noise report of a discrete property of one uniformly chosen
/// entity among those matching `where`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReading {
    pub prop: String,
    pub value: Value,
    #[serde(rename = "where")]
    pub source: Constraint,
    pub reliability: f64,
    /// Number of possible values of `prop`; filled from the scenario vocabulary when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<usize>,
}

/// Number of entities inside a region, passed through a confusion model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReading {
    pub region: Constraint,
    pub count: usize,
    #[serde(default)]
    pub confusion: Confusion,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confusion {
    /// The reported count is exact.
    #[default]
    Identity,
    Table(ConfusionTable),
}

/// Likelihood of the reported count given each true count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionTable {
    pub likelihoods: BTreeMap<usize, f64>,
    #[serde(default)]
    pub otherwise: f64,
}

impl Confusion {
    pub fn likelihood(&self, reported: usize, true_count: usize) -> f64 {
        match self {
            Confusion::Identity => {
                if reported == true_count {
                    1.0
                } else {
                    0.0
                }
            }
            Confusion::Table(t) => t.likelihoods.get(&true_count).copied().unwrap_or(t.otherwise),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observation {
    Location(LocationReading),
    Identity(IdentityReading),
    Count(CountReading),
    /// Several conditionally independent readings taken together.
    All(Vec<Observation>),
}

impl IdentityReading {
    fn support_size(&self) -> Result<usize> {
        self.support
            .ok_or_else(|| Error::InvalidInput(format!("identity reading on {} has no support size", self.prop)))
    }

    fn likelihood(&self, v: Option<&Value>) -> Result<f64> {
        let k = self.support_size()?;
        let r = self.reliability;
        Ok(match v {
            Some(v) if *v == self.value => r,
            _ if k > 1 => (1.0 - r) / (k - 1) as f64,
            _ => 1.0 - r,
        })
    }

    /// Likelihood when no entity matches `where`.
    fn no_source(&self) -> Result<f64> {
        Ok((1.0 - self.reliability) / self.support_size()? as f64)
    }
}

impl Observation {
    /// Static checks on parameters.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ModelValidation(m));
        match self {
            Observation::Location(r) => {
                if !(r.noise_var > 0.0 && r.noise_var.is_finite()) || !r.value.is_finite() {
                    return bad(format!("location reading on {}: invalid value or noise", r.prop));
                }
            }
            Observation::Identity(r) => {
                if !(r.reliability > 0.0 && r.reliability <= 1.0) {
                    return bad(format!("identity reading on {}: reliability must be in (0, 1]", r.prop));
                }
                if r.support == Some(0) {
                    return bad(format!("identity reading on {}: empty support", r.prop));
                }
            }
            Observation::Count(r) => {
                if let Confusion::Table(t) = &r.confusion {
                    if t.likelihoods.values().chain([&t.otherwise]).any(|p| !(*p >= 0.0 && p.is_finite())) {
                        return bad("count reading: confusion likelihoods must be non-negative".into());
                    }
                }
            }
            Observation::All(ys) => {
                for y in ys {
                    y.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Every property referenced by the observation.
    pub fn properties(&self) -> Vec<&str> {
        match self {
            Observation::Location(r) => {
                let mut v = vec![r.prop.as_str()];
                v.extend(r.source.iter().flat_map(|c| c.properties()));
                v
            }
            Observation::Identity(r) => {
                let mut v = vec![r.prop.as_str()];
                v.extend(r.source.properties());
                v
            }
            Observation::Count(r) => r.region.properties(),
            Observation::All(ys) => ys.iter().flat_map(|y| y.properties()).collect(),
        }
    }

    /// Fills missing identity support sizes.
    pub fn resolve_support(&mut self, domain_size: &dyn Fn(&str) -> Option<usize>) {
        match self {
            Observation::Identity(r) if r.support.is_none() => r.support = domain_size(&r.prop),
            Observation::All(ys) => ys.iter_mut().for_each(|y| y.resolve_support(domain_size)),
            _ => {}
        }
    }

    /// Likelihood of the observation in a ground state.
    pub fn ground_likelihood(&self, s: &GroundState) -> Result<f64> {
        match self {
            Observation::Count(r) => {
                let n = s.iter().filter(|(e, _)| r.region.holds(e)).map(|(_, &m)| m).sum();
                Ok(r.confusion.likelihood(r.count, n))
            }
            Observation::Location(r) => {
                let has = Constraint::Has(r.prop.clone());
                let src = r.source.as_ref().unwrap_or(&has);
                let mut total = 0usize;
                let mut acc = 0.0;
                for (e, &m) in s.iter() {
                    if !src.holds(e) {
                        continue;
                    }
                    total += m;
                    if let Some(v) = e.get(&r.prop) {
                        let x = v
                            .as_f64()
                            .ok_or_else(|| Error::InvalidInput(format!("property {} is not numeric", r.prop)))?;
                        acc += m as f64 * normal_pdf(r.value, x, r.noise_var);
                    }
                }
                Ok(if total == 0 { 0.0 } else { acc / total as f64 })
            }
            Observation::Identity(r) => {
                let mut total = 0usize;
                let mut acc = 0.0;
                for (e, &m) in s.iter() {
                    if r.source.holds(e) {
                        total += m;
                        acc += m as f64 * r.likelihood(e.get(&r.prop))?;
                    }
                }
                if total == 0 {
                    r.no_source()
                } else {
                    Ok(acc / total as f64)
                }
            }
            Observation::All(ys) => ys.iter().try_fold(1.0, |acc, y| Ok(acc * y.ground_likelihood(s)?)),
        }
    }
}

/// Unnormalized posterior components of a single lifted state: each is a
/// canonical refinement of `l` weighted by probability times likelihood.
fn reweigh(l: &LiftedState, y: &Observation, limits: &Limits, stats: &mut StepStats) -> Result<Vec<(LiftedState, f64)>> {
    match y {
        Observation::All(ys) => {
            let mut comps = vec![(l.canonicalize(), 1.0)];
            for yi in ys {
                let mut next = LiftedDistribution::new();
                for (c, w) in comps {
                    for (s, v) in reweigh(&c, yi, limits, stats)? {
                        if v > 0.0 {
                            next.insert_canonical(s, w * v);
                        }
                    }
                }
                comps = next.iter().map(|(s, w)| (s.clone(), w)).collect();
            }
            Ok(comps)
        }
        Observation::Count(r) => {
            let branches = split_until_determinate(l, &[&r.region], limits, stats)?;
            branches
                .into_iter()
                .map(|(b, p)| {
                    let mut n = 0;
                    for (e, &m) in b.structure().iter() {
                        if eval_constraint(&r.region, e, b.context())? == Determinacy::Sat {
                            n += m;
                        }
                    }
                    Ok((b, p * r.confusion.likelihood(r.count, n)))
                })
                .collect()
        }
        Observation::Location(r) => {
            let has = Constraint::Has(r.prop.clone());
            let src = r.source.as_ref().unwrap_or(&has);
            targeted(l, src, &r.prop, limits, stats, |b, e, share, out| location_target(b, e, share, r, out), |_| Ok(0.0))
        }
        Observation::Identity(r) => targeted(
            l,
            &r.source,
            &r.prop,
            limits,
            stats,
            |b, e, share, out| identity_target(b, e, share, r, out),
            |_| r.no_source(),
        ),
    }
}

/// Mixes over the entity that produced a targeted reading, chosen uniformly
/// among the copies satisfying `src`.
fn targeted(
    l: &LiftedState,
    src: &Constraint,
    prop: &str,
    limits: &Limits,
    stats: &mut StepStats,
    mut target: impl FnMut(&LiftedState, &EntityStructure, f64, &mut Vec<(LiftedState, f64)>) -> Result<()>,
    no_source: impl Fn(&LiftedState) -> Result<f64>,
) -> Result<Vec<(LiftedState, f64)>> {
    let mut out = Vec::new();
    for (b, p) in split_until_determinate(l, &[src], limits, stats)? {
        let mut sources = Vec::new();
        for (e, &m) in b.structure().iter() {
            if eval_constraint(src, e, b.context())? == Determinacy::Sat {
                sources.push((e.clone(), m));
            }
        }
        let total: usize = sources.iter().map(|(_, m)| m).sum();
        if total == 0 {
            let lik = no_source(&b)?;
            out.push((b, p * lik));
            continue;
        }
        let mut parts = Vec::new();
        for (e, m) in &sources {
            if e.get(prop).and_then(|lab| b.rep(lab)).is_some_and(|r| matches!(r, DistributionRep::Urn(_))) {
                stats.splits += 1;
            }
            target(&b, e, *m as f64 / total as f64, &mut parts)?;
        }
        out.extend(parts.into_iter().map(|(s, w)| (s, p * w)));
    }
    Ok(out)
}

fn location_target(b: &LiftedState, e: &EntityStructure, share: f64, r: &LocationReading, out: &mut Vec<(LiftedState, f64)>) -> Result<()> {
    let Some(label) = e.get(&r.prop) else {
        return Ok(());
    };
    let numeric = |v: &Value| {
        v.as_f64()
            .ok_or_else(|| Error::InvalidInput(format!("property {} is not numeric", r.prop)))
    };
    match b.rep(label) {
        Some(DistributionRep::Dirac(v)) => {
            out.push((b.clone(), share * normal_pdf(r.value, numeric(v)?, r.noise_var)));
        }
        Some(DistributionRep::Urn(_)) => {
            for (s, q, x) in split_slot_draws(b, e, &r.prop)? {
                out.push((s, share * q * normal_pdf(r.value, numeric(&x)?, r.noise_var)));
            }
        }
        Some(DistributionRep::Gaussian(g)) => {
            let lik = gaussian_likelihood(g, r.value, r.noise_var)?;
            let post = gaussian_posterior(g, r.value, r.noise_var)?;
            let (structure, mut context) = b.clone().into_parts();
            context.insert(label, DistributionRep::Gaussian(post));
            out.push((LiftedState::from_parts(structure, context).canonicalize(), share * lik));
        }
        None => return Err(Error::InvalidInput(format!("label {label} is unbound"))),
    }
    Ok(())
}

fn identity_target(b: &LiftedState, e: &EntityStructure, share: f64, r: &IdentityReading, out: &mut Vec<(LiftedState, f64)>) -> Result<()> {
    let Some(label) = e.get(&r.prop) else {
        out.push((b.clone(), share * r.likelihood(None)?));
        return Ok(());
    };
    match b.rep(label) {
        Some(DistributionRep::Dirac(v)) => out.push((b.clone(), share * r.likelihood(Some(v))?)),
        Some(DistributionRep::Urn(_)) => {
            for (s, q, v) in split_slot_draws(b, e, &r.prop)? {
                out.push((s, share * q * r.likelihood(Some(&v))?));
            }
        }
        Some(DistributionRep::Gaussian(_)) => {
            return Err(Error::UnsupportedConstraint(format!("identity reading on continuous property {}", r.prop)))
        }
        None => return Err(Error::InvalidInput(format!("label {label} is unbound"))),
    }
    Ok(())
}

/// Bayesian update of a lifted distribution. Fails with
/// [`Error::ImpossibleObservation`] when every state has zero likelihood.
pub fn update_with(d: &LiftedDistribution, y: &Observation, limits: &Limits, stats: &mut StepStats) -> Result<LiftedDistribution> {
    let entries: Vec<(&LiftedState, f64)> = d.iter().collect();
    let parts: Vec<Result<(Vec<(LiftedState, f64)>, StepStats)>> = entries
        .par_iter()
        .map(|&(l, w)| {
            let mut st = StepStats::default();
            let comps = reweigh(l, y, limits, &mut st)?;
            Ok((comps.into_iter().map(|(s, v)| (s, w * v)).collect(), st))
        })
        .collect();
    let mut out = LiftedDistribution::new();
    for part in parts {
        let (comps, st) = part?;
        *stats += st;
        for (s, w) in comps {
            if w > 0.0 {
                out.insert_canonical(s, w);
            }
        }
    }
    let total = out.normalize();
    if out.is_empty() || !(total > 0.0) {
        return Err(Error::ImpossibleObservation {
            step: None,
            prior: Box::new(PriorSnapshot::Lifted(d.clone())),
        });
    }
    out.prune(limits.prune);
    Ok(out)
}

pub fn update(d: &LiftedDistribution, y: &Observation) -> Result<LiftedDistribution> {
    update_with(d, y, &Limits::default(), &mut StepStats::default())
}

/// Total probability of `y` under `l` (the marginal likelihood).
pub fn structure_likelihood(l: &LiftedState, y: &Observation) -> Result<f64> {
    Ok(reweigh(l, y, &Limits::default(), &mut StepStats::default())?
        .iter()
        .map(|(_, w)| w)
        .sum())
}
