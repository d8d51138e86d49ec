//! Lifted states: a structure of labeled entity structures plus a context
//! binding each label to a distribution representation.
//!
//! A lifted state `(t, c)` stands for the distribution over ground states that
//! share the structure `t`, with property values drawn from the context. Slots
//! referencing the same label are jointly distributed (an urn shared by several
//! entities draws without replacement); different labels are independent.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::distributions::{is_exchangeable_joint, DistributionRep};
use crate::error::{Error, Result};
use crate::ground::GroundDistribution;
use crate::multiset::Multiset;
use crate::value::Value;

/// A pointer from an entity property to a distribution in the context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub u32);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

/// Partial map from property names to labels.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityStructure {
    props: BTreeMap<String, Label>,
}

impl EntityStructure {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, prop: &str) -> Option<Label> {
        self.props.get(prop).copied()
    }

    pub fn with(mut self, prop: impl Into<String>, label: Label) -> Self {
        self.props.insert(prop.into(), label);
        self
    }

    pub fn set(&mut self, prop: impl Into<String>, label: Label) {
        self.props.insert(prop.into(), label);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Label)> + '_ {
        self.props.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.props.values().copied()
    }

    pub fn len(&self) -> usize {
        self.props.len()
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    /// Rewrites every label through `f`.
    pub fn relabel(&self, mut f: impl FnMut(Label) -> Label) -> Self {
        EntityStructure {
            props: self.props.iter().map(|(k, &l)| (k.clone(), f(l))).collect(),
        }
    }
}

impl FromIterator<(String, Label)> for EntityStructure {
    fn from_iter<I: IntoIterator<Item = (String, Label)>>(iter: I) -> Self {
        EntityStructure {
            props: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for EntityStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("⟨")?;
        for (i, (k, l)) in self.props.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}:{l}")?;
        }
        f.write_str("⟩")
    }
}

pub type Structure = Multiset<EntityStructure>;
pub type Context = BTreeMap<Label, DistributionRep>;

/// A structure paired with its context.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LiftedState {
    structure: Structure,
    context: Context,
}

/// Number of slots referencing each label.
pub(crate) fn slot_counts(structure: &Structure) -> BTreeMap<Label, usize> {
    let mut counts = BTreeMap::new();
    for (e, &m) in structure.iter() {
        for l in e.labels() {
            *counts.entry(l).or_insert(0) += m;
        }
    }
    counts
}

impl LiftedState {
    /// Builds a lifted state, checking that every label resolves and that each
    /// representation supports the number of slots referencing it. Unreferenced
    /// bindings are dropped.
    pub fn new(structure: Structure, context: Context) -> Result<Self> {
        let counts = slot_counts(&structure);
        for (label, &slots) in &counts {
            let rep = context
                .get(label)
                .ok_or_else(|| Error::InvalidInput(format!("label {label} is not bound in the context")))?;
            rep.validate()?;
            if !is_exchangeable_joint(rep, slots) {
                return Err(Error::InvalidInput(format!(
                    "label {label} bound to {rep} is referenced by {slots} slots"
                )));
            }
        }
        Ok(Self::from_parts(structure, context))
    }

    /// Skips validation but still prunes unreferenced labels.
    pub(crate) fn from_parts(structure: Structure, mut context: Context) -> Self {
        let counts = slot_counts(&structure);
        context.retain(|l, _| counts.contains_key(l));
        LiftedState { structure, context }
    }

    pub fn empty() -> Self {
        LiftedState {
            structure: Multiset::new(),
            context: BTreeMap::new(),
        }
    }

    /// The canonical all-Dirac lifted state describing exactly one ground state.
    pub fn from_ground(s: &GroundState) -> Self {
        let (structure, values) = decompose(s);
        let context = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| (Label(i as u32), DistributionRep::Dirac(v)))
            .collect();
        LiftedState { structure, context }.canonicalize()
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn context(&self) -> &Context {
        &self.context
    }

    pub fn rep(&self, label: Label) -> Option<&DistributionRep> {
        self.context.get(&label)
    }

    pub fn entity_count(&self) -> usize {
        self.structure.size()
    }

    pub fn has_continuous(&self) -> bool {
        self.context.values().any(|r| !r.is_discrete())
    }

    pub(crate) fn fresh_label(&self) -> Label {
        Label(self.context.keys().next_back().map_or(0, |l| l.0 + 1))
    }

    pub(crate) fn into_parts(self) -> (Structure, Context) {
        (self.structure, self.context)
    }

    pub fn canonicalize(&self) -> LiftedState {
        canonical::canonicalize(self)
    }

    /// Equal structure (exactly) and contexts equal up to real tolerance.
    /// Meaningful on canonical forms.
    pub fn approx_eq(&self, other: &Self) -> bool {
        self.structure == other.structure
            && self.context.len() == other.context.len()
            && self
                .context
                .iter()
                .zip(other.context.iter())
                .all(|((la, ra), (lb, rb))| la == lb && ra.approx_eq(rb))
    }

    /// The state with all real parameters erased; the bucket key for tolerant merging.
    fn skeleton(&self) -> LiftedState {
        let context = self
            .context
            .iter()
            .map(|(&l, r)| match r {
                DistributionRep::Gaussian(_) => (l, DistributionRep::gaussian(0.0, 1.0)),
                other => (l, other.clone()),
            })
            .collect();
        LiftedState {
            structure: self.structure.clone(),
            context,
        }
    }
}

impl fmt::Display for LiftedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {{", self.structure)?;
        for (i, (l, r)) in self.context.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}↦{r}")?;
        }
        f.write_str("}")
    }
}

pub fn canonicalize(l: &LiftedState) -> LiftedState {
    canonical::canonicalize(l)
}

/// Weighted set of canonical lifted states; states with equal canonical form
/// are merged on insert.
#[derive(Debug, Clone, Default)]
pub struct LiftedDistribution {
    entries: Vec<(LiftedState, f64)>,
    index: HashMap<LiftedState, usize>,
    skeletons: HashMap<LiftedState, Vec<usize>>,
}

impl PartialEq for LiftedDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl LiftedDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Canonicalizes and merges; does not normalize.
    pub fn from_weighted<I: IntoIterator<Item = (LiftedState, f64)>>(states: I) -> Self {
        let mut d = Self::new();
        for (s, w) in states {
            d.insert(s, w);
        }
        d
    }

    pub fn singleton(state: LiftedState) -> Self {
        Self::from_weighted([(state, 1.0)])
    }

    pub fn insert(&mut self, state: LiftedState, weight: f64) {
        self.insert_canonical(state.canonicalize(), weight);
    }

    /// Inserts a state that is already in canonical form.
    pub(crate) fn insert_canonical(&mut self, state: LiftedState, weight: f64) {
        if let Some(&i) = self.index.get(&state) {
            self.entries[i].1 += weight;
            return;
        }
        let continuous = state.has_continuous();
        if continuous {
            let key = state.skeleton();
            if let Some(bucket) = self.skeletons.get(&key) {
                if let Some(&i) = bucket.iter().find(|&&i| self.entries[i].0.approx_eq(&state)) {
                    self.entries[i].1 += weight;
                    return;
                }
            }
            self.skeletons.entry(key).or_default().push(self.entries.len());
        }
        self.index.insert(state.clone(), self.entries.len());
        self.entries.push((state, weight));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LiftedState, f64)> + '_ {
        self.entries.iter().map(|(s, w)| (s, *w))
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }

    pub fn weight_of(&self, state: &LiftedState) -> f64 {
        let c = state.canonicalize();
        self.index.get(&c).map_or(0.0, |&i| self.entries[i].1)
    }

    /// Drops zero-weight states and rescales to total 1. Returns the pre-normalization total.
    pub fn normalize(&mut self) -> f64 {
        let total = self.total_weight();
        if total > 0.0 {
            let kept: Vec<_> = self
                .entries
                .drain(..)
                .filter(|(_, w)| *w > 0.0)
                .map(|(s, w)| (s, w / total))
                .collect();
            self.rebuild(kept);
        }
        total
    }

    /// Removes states whose weight is below `eps` and renormalizes. `eps = 0` keeps everything.
    pub fn prune(&mut self, eps: f64) {
        if eps <= 0.0 {
            return;
        }
        let kept: Vec<_> = self.entries.drain(..).filter(|(_, w)| *w >= eps).collect();
        self.rebuild(kept);
        self.normalize();
    }

    fn rebuild(&mut self, entries: Vec<(LiftedState, f64)>) {
        self.entries.clear();
        self.index.clear();
        self.skeletons.clear();
        for (s, w) in entries {
            self.insert_canonical(s, w);
        }
    }

    pub fn has_continuous(&self) -> bool {
        self.entries.iter().any(|(s, _)| s.has_continuous())
    }

    /// Sets the weight of an existing entry; used to build perturbed fixtures.
    pub fn set_weight(&mut self, i: usize, w: f64) {
        self.entries[i].1 = w;
    }
}

/// Map from property names to concrete values.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundEntity(pub BTreeMap<String, Value>);

impl GroundEntity {
    pub fn get(&self, prop: &str) -> Option<&Value> {
        self.0.get(prop)
    }
}

impl<K: Into<String>, V: Into<Value>> FromIterator<(K, V)> for GroundEntity {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        GroundEntity(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

impl fmt::Display for GroundEntity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("⟨")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}:{v}")?;
        }
        f.write_str("⟩")
    }
}

pub type GroundState = Multiset<GroundEntity>;

/// Splits a ground state into a structure with one fresh label per property
/// value, and the values in label order.
pub fn decompose(s: &GroundState) -> (Structure, Vec<Value>) {
    let mut structure = Multiset::new();
    let mut values = Vec::new();
    for e in s.iter_copies() {
        let es: EntityStructure = e
            .0
            .iter()
            .map(|(k, v)| {
                values.push(v.clone());
                (k.clone(), Label(values.len() as u32 - 1))
            })
            .collect();
        structure.insert(es);
    }
    (structure, values)
}

/// Enumerates the ground states described by a lifted state with finite context.
pub fn ground_expand(l: &LiftedState) -> Result<Vec<(GroundState, f64)>> {
    // one slot per (entity copy, property)
    let mut copies: Vec<&EntityStructure> = Vec::new();
    for e in l.structure.iter_copies() {
        copies.push(e);
    }
    let mut slots: Vec<(usize, &str, Label)> = Vec::new();
    for (ci, e) in copies.iter().enumerate() {
        for (p, lab) in e.iter() {
            slots.push((ci, p, lab));
        }
    }
    let mut fixed: Vec<Option<Value>> = vec![None; slots.len()];
    let mut urns: Vec<(Multiset<Value>, Vec<usize>)> = Vec::new();
    let mut urn_of: BTreeMap<Label, usize> = BTreeMap::new();
    for (si, &(_, _, lab)) in slots.iter().enumerate() {
        match l.context.get(&lab) {
            Some(DistributionRep::Dirac(v)) => fixed[si] = Some(v.clone()),
            Some(DistributionRep::Urn(u)) => {
                let ui = *urn_of.entry(lab).or_insert_with(|| {
                    urns.push((u.clone(), Vec::new()));
                    urns.len() - 1
                });
                urns[ui].1.push(si);
            }
            Some(DistributionRep::Gaussian(_)) => {
                return Err(Error::UnsupportedExpansion(format!(
                    "label {lab} is bound to a continuous distribution"
                )))
            }
            None => return Err(Error::InvalidInput(format!("label {lab} is unbound"))),
        }
    }

    let mut out: BTreeMap<GroundState, f64> = BTreeMap::new();
    let mut assign = fixed;
    expand_urns(&urns, 0, 0, 1.0, &mut assign, &mut |assign, p| {
        let mut entities: Vec<BTreeMap<String, Value>> = vec![BTreeMap::new(); copies.len()];
        for (si, &(ci, prop, _)) in slots.iter().enumerate() {
            entities[ci].insert(prop.to_string(), assign[si].clone().expect("assigned"));
        }
        let gs: GroundState = entities.into_iter().map(GroundEntity).collect();
        *out.entry(gs).or_insert(0.0) += p;
    });
    Ok(out.into_iter().collect())
}

fn expand_urns(
    urns: &[(Multiset<Value>, Vec<usize>)],
    ui: usize,
    k: usize,
    p: f64,
    assign: &mut Vec<Option<Value>>,
    emit: &mut dyn FnMut(&[Option<Value>], f64),
) {
    if ui == urns.len() {
        emit(assign, p);
        return;
    }
    let (urn, slots) = &urns[ui];
    if k == slots.len() {
        return expand_urns(urns, ui + 1, 0, p, assign, emit);
    }
    // remaining pool = urn minus values already drawn for earlier slots of this urn
    let mut pool = urn.clone();
    for &s in &slots[..k] {
        pool.remove_one(assign[s].as_ref().expect("drawn"));
    }
    let n = pool.size() as f64;
    for (v, &c) in pool.iter() {
        assign[slots[k]] = Some(v.clone());
        expand_urns(urns, ui, k + 1, p * c as f64 / n, assign, emit);
    }
    assign[slots[k]] = None;
}

/// Ground mixture of a lifted distribution.
pub fn mixture_ground(d: &LiftedDistribution) -> Result<GroundDistribution> {
    let mut out = GroundDistribution::new();
    for (l, w) in d.iter() {
        for (s, p) in ground_expand(l)? {
            out.add(s, w * p);
        }
    }
    Ok(out)
}
