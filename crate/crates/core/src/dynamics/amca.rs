use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lifted::{EntityStructure, LiftedState};
use crate::multiset::Multiset;

use super::{eval_constraint, Action, ActionInstance, CompoundAction, Determinacy, Limits};

/// An applicable maximal compound action with its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Amca {
    pub compound: CompoundAction,
    /// Number of ways the compound can be bound to individual entity copies.
    pub ways: f64,
    /// `ways` times the product of action weights.
    pub weight: f64,
    /// `weight` normalized over all AMCAs of the state.
    pub probability: f64,
}

/// All applicable instances of one action.
///
/// Each precondition slot takes an entity structure on which its constraint
/// holds; bindings that would need more copies of a structure than the
/// state holds are dropped. Fails if a precondition is indeterminate.
pub fn enumerate_instances(l: &LiftedState, index: usize, action: &Action) -> Result<Vec<ActionInstance>> {
    let mut candidates: Vec<Vec<&EntityStructure>> = Vec::with_capacity(action.pre.len());
    for c in &action.pre {
        let mut slot = Vec::new();
        for (e, _) in l.structure().iter() {
            match eval_constraint(c, e, l.context())? {
                Determinacy::Sat => slot.push(e),
                Determinacy::Unsat => {}
                Determinacy::Indeterminate { prop, .. } => {
                    return Err(Error::InvalidInput(format!(
                        "precondition of {} is indeterminate on {prop}; split first",
                        action.name
                    )))
                }
            }
        }
        candidates.push(slot);
    }

    let mut out = Vec::new();
    let mut binding: Vec<&EntityStructure> = Vec::with_capacity(candidates.len());
    bind(l, index, &candidates, &mut binding, &mut out);
    Ok(out)
}

fn bind<'a>(
    l: &LiftedState,
    index: usize,
    candidates: &[Vec<&'a EntityStructure>],
    binding: &mut Vec<&'a EntityStructure>,
    out: &mut Vec<ActionInstance>,
) {
    let k = binding.len();
    if k == candidates.len() {
        out.push(ActionInstance {
            action: index,
            binding: binding.iter().map(|&e| e.clone()).collect(),
        });
        return;
    }
    for &e in &candidates[k] {
        let used = binding.iter().filter(|&&b| b == e).count();
        if used < l.structure().count(e) {
            binding.push(e);
            bind(l, index, candidates, binding, out);
            binding.pop();
        }
    }
}

struct Candidate {
    instance: ActionInstance,
    /// (type index, copies consumed)
    demand: Vec<(usize, usize)>,
    weight: f64,
}

struct Search<'a> {
    cands: &'a [Candidate],
    counts: Vec<usize>,
    remaining: Vec<usize>,
    initial: &'a [usize],
    visited: usize,
    budget: usize,
    found: Vec<(Vec<usize>, f64, f64)>,
}

impl Search<'_> {
    fn fits(&self, j: usize) -> bool {
        let c = &self.cands[j];
        if c.demand.is_empty() {
            // a zero-arity action fires at most once per step
            return self.counts[j] == 0;
        }
        c.demand.iter().all(|&(t, n)| self.remaining[t] >= n)
    }

    fn take(&mut self, j: usize, sign: bool) {
        for &(t, n) in &self.cands[j].demand {
            if sign {
                self.remaining[t] -= n;
            } else {
                self.remaining[t] += n;
            }
        }
        if sign {
            self.counts[j] += 1;
        } else {
            self.counts[j] -= 1;
        }
    }

    fn run(&mut self, start: usize) -> Result<()> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(Error::ResourceLimit {
                what: "compound action enumeration",
                budget: self.budget,
                frontier: self.found.len(),
            });
        }
        for j in start..self.cands.len() {
            if self.fits(j) {
                self.take(j, true);
                self.run(j)?;
                self.take(j, false);
            }
        }
        if !(0..self.cands.len()).any(|j| self.fits(j)) {
            self.emit();
        }
        Ok(())
    }

    fn emit(&mut self) {
        let mut ways = 1.0;
        for (t, &m) in self.initial.iter().enumerate() {
            let used = m - self.remaining[t];
            for i in 0..used {
                ways *= (m - i) as f64;
            }
        }
        let mut weight = 1.0;
        for (j, &n) in self.counts.iter().enumerate() {
            for i in 1..=n {
                ways /= i as f64;
            }
            weight *= self.cands[j].weight.powi(n as i32);
        }
        self.found.push((self.counts.clone(), ways, ways * weight));
    }
}

/// Enumerates the AMCAs of a determinate lifted state.
///
/// Instances are inserted in non-decreasing index order so each multiset is
/// generated once. With no applicable instance the empty compound is the
/// only AMCA.
pub fn enumerate_amca_with(l: &LiftedState, actions: &[Action], limits: &Limits) -> Result<Vec<Amca>> {
    let types: Vec<(&EntityStructure, usize)> = l.structure().iter().map(|(e, &m)| (e, m)).collect();
    let type_index: BTreeMap<&EntityStructure, usize> = types.iter().enumerate().map(|(i, (e, _))| (*e, i)).collect();
    let initial: Vec<usize> = types.iter().map(|&(_, m)| m).collect();

    let mut cands = Vec::new();
    for (i, a) in actions.iter().enumerate() {
        for inst in enumerate_instances(l, i, a)? {
            let demand: Multiset<usize> = inst.binding.iter().map(|e| type_index[e]).collect();
            cands.push(Candidate {
                demand: demand.iter().map(|(&t, &n)| (t, n)).collect(),
                instance: inst,
                weight: a.weight,
            });
        }
    }

    let mut search = Search {
        cands: &cands,
        counts: vec![0; cands.len()],
        remaining: initial.clone(),
        initial: &initial,
        visited: 0,
        budget: limits.amca_budget,
        found: Vec::new(),
    };
    search.run(0)?;

    let total: f64 = search.found.iter().map(|(_, _, w)| w).sum();
    Ok(search
        .found
        .into_iter()
        .map(|(counts, ways, weight)| Amca {
            compound: counts
                .iter()
                .enumerate()
                .filter(|&(_, &n)| n > 0)
                .map(|(j, &n)| (cands[j].instance.clone(), n))
                .collect(),
            ways,
            weight,
            probability: weight / total,
        })
        .collect())
}

/// AMCAs with their probabilities, using default limits.
pub fn enumerate_amca(l: &LiftedState, actions: &[Action]) -> Result<Vec<(CompoundAction, f64)>> {
    Ok(enumerate_amca_with(l, actions, &Limits::default())?
        .into_iter()
        .map(|a| (a.compound, a.probability))
        .collect())
}
