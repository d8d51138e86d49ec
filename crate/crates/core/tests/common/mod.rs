//! Test-side generators and brute-force oracles shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use lifted_filter::dynamics::{enumerate_instances, ActionInstance};
use lifted_filter::ground::{GroundCompound, GroundInstance};
use lifted_filter::observation::{Confusion, ConfusionTable, CountReading, IdentityReading, LocationReading};
use lifted_filter::{
    Action, Constraint, DistributionRep, EffectOp, EntityStructure, GroundEntity, GroundState, Label,
    LiftedDistribution, LiftedState, Multiset, Observation, Source, Value,
};

pub type Q = Ratio<i128>;

pub const TYPES: [&str; 3] = ["a", "b", "c"];
pub const NAMES: [&str; 4] = ["n0", "n1", "n2", "n3"];

pub fn ground_entity(pairs: &[(&str, Value)]) -> GroundEntity {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Converts a lifted instance on an all-point-mass state to the ground instance it denotes.
pub fn to_ground_instance(inst: &ActionInstance, l: &LiftedState) -> GroundInstance {
    GroundInstance {
        action: inst.action,
        binding: inst.binding.iter().map(|e| to_ground_entity(e, l)).collect(),
    }
}

pub fn to_ground_entity(e: &EntityStructure, l: &LiftedState) -> GroundEntity {
    e.iter()
        .map(|(p, lab)| match l.rep(lab) {
            Some(DistributionRep::Dirac(v)) => (p.to_string(), v.clone()),
            other => panic!("{p} is not a point mass: {other:?}"),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Labeled-copy AMCA oracle with exact rational arithmetic.

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Labeled {
    action: usize,
    copies: Vec<usize>,
}

fn labeled_instances(copies: &[GroundEntity], actions: &[Action]) -> Vec<Labeled> {
    let mut out = Vec::new();
    for (ai, a) in actions.iter().enumerate() {
        let mut stack: Vec<Vec<usize>> = vec![vec![]];
        while let Some(cur) = stack.pop() {
            if cur.len() == a.pre.len() {
                out.push(Labeled {
                    action: ai,
                    copies: cur,
                });
                continue;
            }
            for (ci, e) in copies.iter().enumerate() {
                if !cur.contains(&ci) && a.pre[cur.len()].holds(e) {
                    let mut next = cur.clone();
                    next.push(ci);
                    stack.push(next);
                }
            }
        }
    }
    out.sort();
    out
}

/// Per ground compound: number of labeled bindings and exact probability.
pub fn rational_amca(s: &GroundState, actions: &[Action], weights: &[Q]) -> BTreeMap<GroundCompound, (u64, Q)> {
    let copies: Vec<GroundEntity> = s.iter_copies().cloned().collect();
    let inst = labeled_instances(&copies, actions);
    let mut last = vec![None; copies.len()];
    for (k, i) in inst.iter().enumerate() {
        for &c in &i.copies {
            last[c] = Some(k);
        }
    }
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut used = vec![false; copies.len()];
    let mut chosen = Vec::new();
    fn go(
        k: usize,
        inst: &[Labeled],
        last: &[Option<usize>],
        used: &mut Vec<bool>,
        chosen: &mut Vec<usize>,
        sets: &mut Vec<Vec<usize>>,
    ) {
        let free = |i: &Labeled, used: &[bool]| i.copies.iter().all(|&c| !used[c]);
        if k == inst.len() {
            let maximal = inst
                .iter()
                .enumerate()
                .all(|(j, i)| chosen.contains(&j) || !free(i, used));
            if maximal {
                sets.push(chosen.clone());
            }
            return;
        }
        if !free(&inst[k], used) {
            return go(k + 1, inst, last, used, chosen, sets);
        }
        for &c in &inst[k].copies {
            used[c] = true;
        }
        chosen.push(k);
        go(k + 1, inst, last, used, chosen, sets);
        chosen.pop();
        for &c in &inst[k].copies {
            used[c] = false;
        }
        if inst[k].copies.iter().any(|&c| last[c].is_some_and(|j| j > k)) {
            go(k + 1, inst, last, used, chosen, sets);
        }
    }
    go(0, &inst, &last, &mut used, &mut chosen, &mut sets);

    let mut grouped: BTreeMap<GroundCompound, (u64, Q)> = BTreeMap::new();
    let mut total = Q::from_integer(0);
    for set in sets {
        let w = set.iter().fold(Q::from_integer(1), |acc, &j| acc * weights[inst[j].action]);
        total += w;
        let k: GroundCompound = set
            .iter()
            .map(|&j| GroundInstance {
                action: inst[j].action,
                binding: inst[j].copies.iter().map(|&c| copies[c].clone()).collect(),
            })
            .collect();
        let e = grouped.entry(k).or_insert((0, Q::from_integer(0)));
        e.0 += 1;
        e.1 += w;
    }
    for v in grouped.values_mut() {
        v.1 /= total;
    }
    grouped
}

pub fn q_to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Compounds reachable by inserting applicable lifted instances in any
/// order, deduplicated afterwards; the leaves where nothing fits.
pub fn naive_amca_counts(l: &LiftedState, actions: &[Action]) -> BTreeSet<Vec<usize>> {
    let mut cands = Vec::new();
    for (i, a) in actions.iter().enumerate() {
        cands.extend(enumerate_instances(l, i, a).unwrap());
    }
    let types: Vec<(EntityStructure, usize)> = l.structure().iter().map(|(e, &m)| (e.clone(), m)).collect();
    let fits = |counts: &[usize], j: usize| -> bool {
        let inst: &ActionInstance = &cands[j];
        if inst.binding.is_empty() {
            return counts[j] == 0;
        }
        types.iter().all(|(e, m)| {
            let used: usize = counts
                .iter()
                .enumerate()
                .map(|(i, &n)| n * cands[i].binding.iter().filter(|b| *b == e).count())
                .sum();
            let need = inst.binding.iter().filter(|b| *b == e).count();
            used + need <= *m
        })
    };
    let mut leaves = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut stack = vec![vec![0usize; cands.len()]];
    while let Some(counts) = stack.pop() {
        if !seen.insert(counts.clone()) {
            continue;
        }
        let mut any = false;
        for j in 0..cands.len() {
            if fits(&counts, j) {
                any = true;
                let mut next = counts.clone();
                next[j] += 1;
                stack.push(next);
            }
        }
        if !any {
            leaves.insert(counts);
        }
    }
    leaves
}

pub fn candidate_list(l: &LiftedState, actions: &[Action]) -> Vec<ActionInstance> {
    let mut cands = Vec::new();
    for (i, a) in actions.iter().enumerate() {
        cands.extend(enumerate_instances(l, i, a).unwrap());
    }
    cands
}

/// All multisets over `TYPES` with 1..=max copies, as ground states with a `T` property.
pub fn typed_states(max: usize) -> Vec<GroundState> {
    let mut out = Vec::new();
    for a in 0..=max {
        for b in 0..=max - a {
            for c in 0..=max - a - b {
                if a + b + c == 0 {
                    continue;
                }
                let mut s = GroundState::new();
                for (t, n) in TYPES.iter().zip([a, b, c]) {
                    s.insert_n(ground_entity(&[("T", Value::sym(*t))]), n);
                }
                out.push(s);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Random finite-context scenarios.

pub struct RandomCase {
    pub initial: LiftedDistribution,
    pub actions: Vec<Action>,
    pub observations: Vec<Option<Observation>>,
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> &'a T {
    xs.choose(rng).expect("non-empty")
}

fn random_urn(rng: &mut ChaCha8Rng, pool: &[&str], size: usize) -> DistributionRep {
    DistributionRep::urn((0..size).map(|_| *pick(rng, pool)))
}

fn random_state(rng: &mut ChaCha8Rng) -> LiftedState {
    let n_types = rng.random_range(1..=3);
    let counts: Vec<usize> = (0..n_types).map(|_| rng.random_range(1..=2)).collect();
    let mut context = BTreeMap::new();
    let mut next = 0u32;
    let mut fresh = |context: &mut BTreeMap<Label, DistributionRep>, r: DistributionRep| {
        let l = Label(next);
        next += 1;
        context.insert(l, r);
        l
    };

    let mut entities: Vec<EntityStructure> = vec![EntityStructure::new(); n_types];
    // names: some types share one urn, the rest get point masses
    let share: Vec<bool> = (0..n_types).map(|_| rng.random_bool(0.7)).collect();
    let mut slots = 0;
    let mut users = Vec::new();
    for i in 0..n_types {
        if share[i] && slots + counts[i] <= 4 {
            slots += counts[i];
            users.push(i);
        }
    }
    if !users.is_empty() {
        let size = rng.random_range(slots..=4);
        let l = fresh(&mut context, random_urn(rng, &NAMES, size));
        for &i in &users {
            entities[i].set("N", l);
        }
    }
    for i in 0..n_types {
        if entities[i].get("N").is_none() && rng.random_bool(0.8) {
            let l = fresh(&mut context, DistributionRep::dirac(*pick(rng, &NAMES)));
            entities[i].set("N", l);
        }
    }
    // types: usually point masses, sometimes a shared urn
    if rng.random_bool(0.3) {
        let slots: usize = counts.iter().sum();
        if slots <= 4 {
            let size = rng.random_range(slots..=4);
            let l = fresh(&mut context, random_urn(rng, &TYPES, size));
            entities.iter_mut().for_each(|e| e.set("T", l));
        }
    }
    for e in entities.iter_mut() {
        if e.get("T").is_none() {
            let l = fresh(&mut context, DistributionRep::dirac(*pick(rng, &TYPES)));
            e.set("T", l);
        }
        if rng.random_bool(0.5) {
            let x = rng.random_range(0..3) as f64;
            let l = fresh(&mut context, DistributionRep::dirac(x));
            e.set("X", l);
        }
    }
    let structure: Multiset<EntityStructure> = entities.into_iter().zip(counts).collect();
    LiftedState::new(structure, context).expect("generated state is valid")
}

fn random_constraint(rng: &mut ChaCha8Rng) -> Constraint {
    let names_subset = |rng: &mut ChaCha8Rng| -> Vec<Value> {
        let k = rng.random_range(1..=2);
        (0..k).map(|_| Value::sym(*pick(rng, &NAMES))).collect()
    };
    match rng.random_range(0..6) {
        0 => Constraint::Has("T".into()),
        1 | 2 => Constraint::eq("T", *pick(rng, &TYPES)),
        3 => Constraint::In("N".into(), names_subset(rng)),
        4 => Constraint::And(vec![Constraint::eq("T", *pick(rng, &TYPES)), Constraint::In("N".into(), names_subset(rng))]),
        _ => Constraint::Has("X".into()),
    }
}

fn random_action(rng: &mut ChaCha8Rng, i: usize) -> Action {
    let arity = if rng.random_bool(0.2) { 2 } else { 1 };
    let mut pre: Vec<Constraint> = (0..arity).map(|_| random_constraint(rng)).collect();
    let mut eff = Vec::new();
    for _ in 0..rng.random_range(0..=2) {
        let slot = rng.random_range(0..arity);
        match rng.random_range(0..5) {
            0 => eff.push(EffectOp::SetProperty {
                slot,
                prop: "T".into(),
                to: Source::Value(Value::sym(*pick(rng, &TYPES))),
            }),
            1 => {
                let size = rng.random_range(1..=2);
                eff.push(EffectOp::SetProperty {
                    slot,
                    prop: "N".into(),
                    to: Source::Dist(random_urn(rng, &NAMES, size)),
                })
            }
            2 => {
                pre[slot] = Constraint::And(vec![pre[slot].clone(), Constraint::has("X")]);
                eff.push(EffectOp::ShiftGaussian {
                    slot,
                    prop: "X".into(),
                    delta: *pick(rng, &[1.0, -1.0]),
                    var: 0.0,
                })
            }
            _ => {}
        }
    }
    if rng.random_bool(0.2) {
        // replace the first bound entity by a fresh one; the entity count is unchanged
        eff.push(EffectOp::RemoveEntity { slot: 0 });
        let mut props = BTreeMap::new();
        props.insert("T".to_string(), Source::Value(Value::sym(*pick(rng, &TYPES))));
        props.insert("N".to_string(), Source::Dist(random_urn(rng, &NAMES, 2)));
        eff.push(EffectOp::AddEntity { props });
    }
    let weight = *pick(rng, &[0.5, 1.0, 2.0, 3.0]);
    let a = Action::new(format!("act{i}"), weight, pre, eff);
    a.validate().expect("generated action is valid");
    a
}

fn random_observation(rng: &mut ChaCha8Rng, max_count: usize) -> Observation {
    match rng.random_range(0..4) {
        0 => {
            let likelihoods = (0..=max_count).map(|n| (n, rng.random_range(0.05..1.0))).collect();
            Observation::Count(CountReading {
                region: random_constraint(rng),
                count: rng.random_range(0..=max_count),
                confusion: Confusion::Table(ConfusionTable {
                    likelihoods,
                    otherwise: 0.05,
                }),
            })
        }
        1 => Observation::Identity(IdentityReading {
            prop: "N".into(),
            value: Value::sym(*pick(rng, &NAMES)),
            source: random_constraint(rng),
            reliability: 0.8,
            support: Some(NAMES.len()),
        }),
        2 => Observation::Location(LocationReading {
            prop: "X".into(),
            value: rng.random_range(-1.0..4.0),
            noise_var: 1.0,
            source: if rng.random_bool(0.5) {
                None
            } else {
                Some(Constraint::And(vec![Constraint::has("X"), random_constraint(rng)]))
            },
        }),
        _ => Observation::All(vec![random_observation(rng, max_count), random_observation(rng, max_count)]),
    }
}

pub fn random_case(rng: &mut ChaCha8Rng) -> RandomCase {
    let mut initial = LiftedDistribution::new();
    let n_init = rng.random_range(1..=2);
    for _ in 0..n_init {
        initial.insert(random_state(rng), rng.random_range(0.2..1.0));
    }
    initial.normalize();
    let max_count = initial.iter().map(|(l, _)| l.entity_count()).max().unwrap_or(0);
    let n_actions = rng.random_range(1..=3);
    let actions = (0..n_actions).map(|i| random_action(rng, i)).collect();
    let steps = rng.random_range(1..=5);
    let observations = (0..steps)
        .map(|_| {
            if rng.random_bool(0.25) {
                None
            } else {
                Some(random_observation(rng, max_count))
            }
        })
        .collect();
    RandomCase {
        initial,
        actions,
        observations,
    }
}
