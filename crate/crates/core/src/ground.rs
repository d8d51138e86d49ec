//! Brute-force reference semantics on ground states.
//!
//! Every entity copy is treated as individually labeled. Compound actions are
//! enumerated as maximal sets of instances over disjoint copies, then mapped
//! back to multisets of ground instances. Nothing here uses labels, urns or
//! canonical forms, which makes it an independent check of the lifted engine.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Action, EffectOp, Limits, Source};
use crate::error::{Error, PriorSnapshot, Result};
use crate::lifted::{mixture_ground, GroundEntity, GroundState, LiftedDistribution};
use crate::multiset::Multiset;
use crate::observation::Observation;
use crate::value::Value;

/// A finite distribution over ground states.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundDistribution {
    states: BTreeMap<GroundState, f64>,
}

impl GroundDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(s: GroundState) -> Self {
        let mut d = Self::new();
        d.add(s, 1.0);
        d
    }

    /// Adds probability mass to a state.
    pub fn add(&mut self, s: GroundState, p: f64) {
        *self.states.entry(s).or_insert(0.0) += p;
    }

    pub fn prob(&self, s: &GroundState) -> f64 {
        self.states.get(s).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroundState, f64)> + '_ {
        self.states.iter().map(|(s, &p)| (s, p))
    }

    pub fn total(&self) -> f64 {
        self.states.values().sum()
    }

    /// Drops zero-mass states and rescales; returns the previous total.
    pub fn normalize(&mut self) -> f64 {
        let total = self.total();
        if total > 0.0 {
            self.states.retain(|_, p| *p > 0.0);
            for p in self.states.values_mut() {
                *p /= total;
            }
        }
        total
    }
}

impl FromIterator<(GroundState, f64)> for GroundDistribution {
    fn from_iter<I: IntoIterator<Item = (GroundState, f64)>>(iter: I) -> Self {
        let mut d = Self::new();
        for (s, p) in iter {
            d.add(s, p);
        }
        d
    }
}

/// An action bound to concrete entities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundInstance {
    pub action: usize,
    pub binding: Vec<GroundEntity>,
}

impl fmt::Display for GroundInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}(", self.action)?;
        for (i, e) in self.binding.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str(")")
    }
}

pub type GroundCompound = Multiset<GroundInstance>;

/// An action bound to specific entity copies (indices into the copy list).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LabeledInstance {
    pub action: usize,
    pub copies: Vec<usize>,
}

/// Every applicable instance over labeled copies: distinct copies per
/// binding, each satisfying its slot's precondition.
pub fn labeled_instances(copies: &[&GroundEntity], actions: &[Action]) -> Vec<LabeledInstance> {
    fn bind(
        copies: &[&GroundEntity],
        a: &Action,
        ai: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<LabeledInstance>,
    ) {
        let k = cur.len();
        if k == a.pre.len() {
            out.push(LabeledInstance {
                action: ai,
                copies: cur.clone(),
            });
            return;
        }
        for (ci, e) in copies.iter().enumerate() {
            if !cur.contains(&ci) && a.pre[k].holds(e) {
                cur.push(ci);
                bind(copies, a, ai, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    for (ai, a) in actions.iter().enumerate() {
        bind(copies, a, ai, &mut Vec::new(), &mut out);
    }
    out
}

/// Maximal sets of copy-disjoint labeled instances, with the product of
/// their action weights.
pub fn labeled_compounds(
    copies: &[&GroundEntity],
    actions: &[Action],
    budget: usize,
) -> Result<Vec<(Vec<LabeledInstance>, f64)>> {
    let inst = labeled_instances(copies, actions);
    // last instance index touching each copy: an instance left out while its
    // copies are free can only be blocked by a later instance
    let mut last_use = vec![None; copies.len()];
    for (k, i) in inst.iter().enumerate() {
        for &c in &i.copies {
            last_use[c] = Some(k);
        }
    }
    let mut search = LabeledSearch {
        inst: &inst,
        actions,
        last_use,
        used: vec![false; copies.len()],
        chosen: vec![false; inst.len()],
        out: Vec::new(),
        visited: 0,
        budget,
    };
    search.go(0)?;
    Ok(search.out)
}

struct LabeledSearch<'a> {
    inst: &'a [LabeledInstance],
    actions: &'a [Action],
    last_use: Vec<Option<usize>>,
    used: Vec<bool>,
    chosen: Vec<bool>,
    out: Vec<(Vec<LabeledInstance>, f64)>,
    visited: usize,
    budget: usize,
}

impl LabeledSearch<'_> {
    fn free(&self, k: usize) -> bool {
        self.inst[k].copies.iter().all(|&c| !self.used[c])
    }

    fn mark(&mut self, k: usize, on: bool) {
        for &c in &self.inst[k].copies {
            self.used[c] = on;
        }
        self.chosen[k] = on;
    }

    fn go(&mut self, k: usize) -> Result<()> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(Error::ResourceLimit {
                what: "ground compound enumeration",
                budget: self.budget,
                frontier: self.out.len(),
            });
        }
        if k == self.inst.len() {
            if (0..self.inst.len()).all(|j| self.chosen[j] || !self.free(j)) {
                let set: Vec<LabeledInstance> =
                    (0..self.inst.len()).filter(|&j| self.chosen[j]).map(|j| self.inst[j].clone()).collect();
                let w = set.iter().map(|i| self.actions[i.action].weight).product();
                self.out.push((set, w));
            }
            return Ok(());
        }
        if !self.free(k) {
            return self.go(k + 1);
        }
        self.mark(k, true);
        self.go(k + 1)?;
        self.mark(k, false);
        let blockable = self.inst[k].copies.iter().any(|&c| self.last_use[c].is_some_and(|j| j > k));
        if blockable {
            self.go(k + 1)?;
        }
        Ok(())
    }
}

/// Ground AMCAs of a state with their probabilities, obtained by grouping
/// labeled compounds by their image.
pub fn ground_amcas(s: &GroundState, actions: &[Action], budget: usize) -> Result<Vec<(GroundCompound, f64)>> {
    let copies: Vec<&GroundEntity> = s.iter_copies().collect();
    let mut grouped: BTreeMap<GroundCompound, f64> = BTreeMap::new();
    for (set, w) in labeled_compounds(&copies, actions, budget)? {
        let k: GroundCompound = set
            .iter()
            .map(|i| GroundInstance {
                action: i.action,
                binding: i.copies.iter().map(|&c| copies[c].clone()).collect(),
            })
            .collect();
        *grouped.entry(k).or_insert(0.0) += w;
    }
    let total: f64 = grouped.values().sum();
    Ok(grouped.into_iter().map(|(k, w)| (k, w / total)).collect())
}

fn choices(src: &Source) -> Result<Vec<(Value, f64)>> {
    match src {
        Source::Value(v) => Ok(vec![(v.clone(), 1.0)]),
        Source::Dist(r) => r
            .marginal()
            .ok_or_else(|| Error::UnsupportedExpansion(format!("effect draws from continuous {r}"))),
    }
}

type Partial = (Vec<Option<GroundEntity>>, Vec<GroundEntity>, f64);

/// Outcome distribution of one instance: the entities it leaves behind.
fn apply_instance(inst: &GroundInstance, action: &Action) -> Result<Vec<(Vec<GroundEntity>, f64)>> {
    let mut partial: Vec<Partial> = vec![(inst.binding.iter().cloned().map(Some).collect(), Vec::new(), 1.0)];
    for op in &action.eff {
        let mut next = Vec::with_capacity(partial.len());
        for (slots, added, p) in partial {
            match op {
                EffectOp::SetProperty { slot, prop, to } => {
                    for (v, q) in choices(to)? {
                        let mut slots = slots.clone();
                        let e = slots[*slot]
                            .as_mut()
                            .ok_or_else(|| Error::ModelValidation(format!("slot {slot} removed")))?;
                        e.0.insert(prop.clone(), v);
                        next.push((slots, added.clone(), p * q));
                    }
                }
                EffectOp::RemoveEntity { slot } => {
                    let mut slots = slots;
                    slots[*slot] = None;
                    next.push((slots, added, p));
                }
                EffectOp::AddEntity { props } => {
                    let mut worlds: Vec<(GroundEntity, f64)> = vec![(GroundEntity(BTreeMap::new()), 1.0)];
                    for (prop, src) in props {
                        let opts = choices(src)?;
                        worlds = worlds
                            .into_iter()
                            .flat_map(|(e, pe)| {
                                opts.iter().map(move |(v, q)| {
                                    let mut e = e.clone();
                                    e.0.insert(prop.clone(), v.clone());
                                    (e, pe * q)
                                })
                            })
                            .collect();
                    }
                    for (e, q) in worlds {
                        let mut added = added.clone();
                        added.push(e);
                        next.push((slots.clone(), added, p * q));
                    }
                }
                EffectOp::ShiftGaussian { slot, prop, delta, var } => {
                    if *var > 0.0 {
                        return Err(Error::UnsupportedExpansion(format!("shift of {prop} adds continuous noise")));
                    }
                    let mut slots = slots;
                    let e = slots[*slot]
                        .as_mut()
                        .ok_or_else(|| Error::ModelValidation(format!("slot {slot} removed")))?;
                    let x = e
                        .get(prop)
                        .and_then(Value::as_f64)
                        .ok_or_else(|| Error::UnsupportedEffect(format!("cannot shift {prop}")))?;
                    e.0.insert(prop.clone(), Value::num(x + delta));
                    next.push((slots, added, p));
                }
            }
        }
        partial = next;
    }
    Ok(partial
        .into_iter()
        .map(|(slots, mut added, p)| {
            let mut out: Vec<GroundEntity> = slots.into_iter().flatten().collect();
            out.append(&mut added);
            (out, p)
        })
        .collect())
}

/// Successor distribution of a ground state under one compound action.
pub fn apply_ground(k: &GroundCompound, s: &GroundState, actions: &[Action]) -> Result<Vec<(GroundState, f64)>> {
    let mut rest = s.clone();
    let mut outcomes = Vec::new();
    for (inst, &n) in k.iter() {
        let action = actions
            .get(inst.action)
            .ok_or_else(|| Error::InvalidInput(format!("unknown action index {}", inst.action)))?;
        let o = apply_instance(inst, action)?;
        for _ in 0..n {
            for e in &inst.binding {
                if !rest.remove_one(e) {
                    return Err(Error::InvalidInput(format!("compound is not applicable: {e} is exhausted")));
                }
            }
            outcomes.push(o.clone());
        }
    }
    let mut worlds: BTreeMap<GroundState, f64> = BTreeMap::from([(rest, 1.0)]);
    for o in outcomes {
        let mut next = BTreeMap::new();
        for (w, p) in &worlds {
            for (ents, q) in &o {
                let mut s = w.clone();
                for e in ents {
                    s.insert(e.clone());
                }
                *next.entry(s).or_insert(0.0) += p * q;
            }
        }
        worlds = next;
    }
    Ok(worlds.into_iter().collect())
}

/// One ground prediction step. Returns the prior predictive distribution and
/// the total number of ground AMCAs enumerated.
pub fn predict_ground_with(d: &GroundDistribution, actions: &[Action], limits: &Limits) -> Result<(GroundDistribution, usize)> {
    let entries: Vec<(&GroundState, f64)> = d.iter().collect();
    let parts: Vec<Result<(Vec<(GroundState, f64)>, usize)>> = entries
        .par_iter()
        .map(|&(s, w)| {
            let amcas = ground_amcas(s, actions, limits.amca_budget)?;
            let n = amcas.len();
            let mut out = Vec::new();
            for (k, pk) in amcas {
                for (t, pt) in apply_ground(&k, s, actions)? {
                    out.push((t, w * pk * pt));
                }
            }
            Ok((out, n))
        })
        .collect();
    let mut out = GroundDistribution::new();
    let mut n_amca = 0;
    for part in parts {
        let (succ, n) = part?;
        n_amca += n;
        for (t, p) in succ {
            out.add(t, p);
        }
    }
    out.normalize();
    Ok((out, n_amca))
}

pub fn predict_ground(d: &GroundDistribution, actions: &[Action]) -> Result<GroundDistribution> {
    Ok(predict_ground_with(d, actions, &Limits::default())?.0)
}

/// Bayesian update on ground states.
pub fn update_ground(d: &GroundDistribution, y: &Observation) -> Result<GroundDistribution> {
    let mut out = GroundDistribution::new();
    for (s, p) in d.iter() {
        let lik = y.ground_likelihood(s)?;
        if lik > 0.0 {
            out.add(s.clone(), p * lik);
        }
    }
    let total = out.normalize();
    if !(total > 0.0) {
        return Err(Error::ImpossibleObservation {
            step: None,
            prior: Box::new(PriorSnapshot::Ground(d.clone())),
        });
    }
    Ok(out)
}

/// Differences between a lifted posterior's ground mixture and a ground posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    /// Largest absolute probability difference over the union of supports.
    pub max_deviation: f64,
    /// States only in the lifted mixture.
    pub lifted_only: usize,
    /// States only in the ground distribution.
    pub ground_only: usize,
    pub lifted_support: usize,
    pub ground_support: usize,
}

impl CompareReport {
    pub fn agrees(&self, tol: f64) -> bool {
        self.max_deviation < tol && self.lifted_only == 0 && self.ground_only == 0
    }
}

pub fn compare(lifted: &LiftedDistribution, ground: &GroundDistribution) -> Result<CompareReport> {
    let mix = mixture_ground(lifted)?;
    Ok(compare_ground(&mix, ground))
}

pub fn compare_ground(a: &GroundDistribution, b: &GroundDistribution) -> CompareReport {
    let mut max_deviation: f64 = 0.0;
    let mut lifted_only = 0;
    for (s, p) in a.iter() {
        if !b.states.contains_key(s) {
            lifted_only += 1;
        }
        max_deviation = max_deviation.max((p - b.prob(s)).abs());
    }
    let mut ground_only = 0;
    for (s, p) in b.iter() {
        if !a.states.contains_key(s) {
            ground_only += 1;
            max_deviation = max_deviation.max(p);
        }
    }
    CompareReport {
        max_deviation,
        lifted_only,
        ground_only,
        lifted_support: a.len(),
        ground_support: b.len(),
    }
}
