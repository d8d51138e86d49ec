use crate::distributions::{urn_split, DistributionRep};
use crate::error::{Error, Result};
use crate::lifted::{EntityStructure, LiftedDistribution, LiftedState};
use crate::value::Value;

use super::{eval_constraint, Action, Constraint, Determinacy, Limits, StepStats};

/// Splits one slot of `entity`'s `prop` off its urn.
///
/// One copy of `entity` is rewired to a fresh label bound to a point mass on
/// the drawn value; the other slots keep the urn minus that value. Branches
/// are returned in canonical form. A point mass yields the input unchanged.
pub fn split_slot(l: &LiftedState, entity: &EntityStructure, prop: &str) -> Result<Vec<(LiftedState, f64)>> {
    Ok(split_slot_draws(l, entity, prop)?.into_iter().map(|(s, p, _)| (s, p)).collect())
}

/// Like [`split_slot`], also returning the value drawn in each branch.
pub(crate) fn split_slot_draws(
    l: &LiftedState,
    entity: &EntityStructure,
    prop: &str,
) -> Result<Vec<(LiftedState, f64, Value)>> {
    let label = entity
        .get(prop)
        .ok_or_else(|| Error::InvalidInput(format!("entity {entity} has no property {prop}")))?;
    if l.structure().count(entity) == 0 {
        return Err(Error::InvalidInput(format!("entity {entity} is not in the state")));
    }
    let urn = match l.rep(label) {
        Some(DistributionRep::Urn(u)) => u,
        Some(DistributionRep::Dirac(v)) => return Ok(vec![(l.canonicalize(), 1.0, v.clone())]),
        Some(DistributionRep::Gaussian(_)) => {
            return Err(Error::UnsupportedConstraint(format!("cannot split continuous property {prop}")))
        }
        None => return Err(Error::InvalidInput(format!("label {label} is unbound"))),
    };
    let fresh = l.fresh_label();
    let mut rewired = entity.clone();
    rewired.set(prop, fresh);

    let mut out = Vec::new();
    for b in urn_split(urn)?.branches {
        let (mut structure, mut context) = l.clone().into_parts();
        structure.remove_one(entity);
        structure.insert(rewired.clone());
        match &b.remaining {
            Some(rest) => context.insert(label, rest.clone()),
            None => context.remove(&label),
        };
        context.insert(fresh, b.split_off());
        out.push((LiftedState::from_parts(structure, context).canonicalize(), b.probability, b.taken));
    }
    Ok(out)
}

/// The first entity (in canonical order) on which some constraint is
/// indeterminate, with the smallest property that needs splitting.
pub fn first_indeterminate(l: &LiftedState, constraints: &[&Constraint]) -> Result<Option<(EntityStructure, String)>> {
    for (e, _) in l.structure().iter() {
        let mut best: Option<String> = None;
        for c in constraints {
            if let Determinacy::Indeterminate { prop, .. } = eval_constraint(c, e, l.context())? {
                if best.as_ref().is_none_or(|b| prop < *b) {
                    best = Some(prop);
                }
            }
        }
        if let Some(p) = best {
            return Ok(Some((e.clone(), p)));
        }
    }
    Ok(None)
}

/// Splits `l` until every constraint is determinate on every entity.
///
/// Branches reaching the same canonical state are merged. The returned
/// probabilities sum to one.
pub fn split_until_determinate(
    l: &LiftedState,
    constraints: &[&Constraint],
    limits: &Limits,
    stats: &mut StepStats,
) -> Result<Vec<(LiftedState, f64)>> {
    let mut done = LiftedDistribution::new();
    let mut frontier = vec![(l.canonicalize(), 1.0)];
    let mut created = 0usize;
    while let Some((s, p)) = frontier.pop() {
        match first_indeterminate(&s, constraints)? {
            None => done.insert_canonical(s, p),
            Some((e, prop)) => {
                let branches = split_slot(&s, &e, &prop)?;
                stats.splits += 1;
                created += branches.len();
                if created > limits.split_budget {
                    return Err(Error::ResourceLimit {
                        what: "urn splitting",
                        budget: limits.split_budget,
                        frontier: frontier.len() + branches.len(),
                    });
                }
                // reversed so that the first branch is expanded first
                for (b, q) in branches.into_iter().rev() {
                    frontier.push((b, p * q));
                }
            }
        }
    }
    Ok(done.iter().map(|(s, w)| (s.clone(), w)).collect())
}

/// Splits until every action precondition is determinate.
pub fn split_to_determinacy(l: &LiftedState, actions: &[Action]) -> Result<Vec<(LiftedState, f64)>> {
    let constraints: Vec<&Constraint> = actions.iter().flat_map(|a| a.pre.iter()).collect();
    split_until_determinate(l, &constraints, &Limits::default(), &mut StepStats::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifted::{ground_expand, Label};
    use crate::multiset::Multiset;
    use std::collections::BTreeMap;

    fn names_state(names: &[&str], copies: usize) -> LiftedState {
        let e = EntityStructure::new().with("N", Label(0)).with("T", Label(1));
        LiftedState::new(
            Multiset::singleton(e, copies),
            [(Label(0), DistributionRep::urn(names.iter().copied())), (Label(1), DistributionRep::dirac("p"))]
                .into_iter()
                .collect(),
        )
        .unwrap()
    }

    fn ground_mix(parts: &[(LiftedState, f64)]) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for (s, w) in parts {
            for (g, p) in ground_expand(s).unwrap() {
                *m.entry(g.to_string()).or_insert(0.0) += w * p;
            }
        }
        m
    }

    #[test]
    fn split_two_names() {
        let l = names_state(&["A", "B"], 2);
        let e = l.structure().elements().next().unwrap().clone();
        let out = split_slot(&l, &e, "N").unwrap();
        assert_eq!(out.len(), 2);
        for (s, p) in &out {
            assert!((p - 0.5).abs() < 1e-15);
            assert_eq!(s.structure().distinct(), 2);
            assert!(s.context().values().all(|r| matches!(r, DistributionRep::Dirac(_))));
        }
    }

    #[test]
    fn splitting_preserves_ground_mixture() {
        let l = names_state(&["A", "A", "B", "C"], 3);
        let e = l.structure().elements().next().unwrap().clone();
        let out = split_slot(&l, &e, "N").unwrap();
        let before = ground_mix(&[(l, 1.0)]);
        let after = ground_mix(&out);
        assert_eq!(before.len(), after.len());
        for (k, v) in before {
            assert!((after[&k] - v).abs() < 1e-12, "{k}");
        }
    }

    #[test]
    fn determinacy_splits_only_what_is_needed() {
        let l = names_state(&["A", "B", "C"], 3);
        let c = Constraint::eq("N", "A");
        let out = split_until_determinate(&l, &[&c], &Limits::default(), &mut StepStats::default()).unwrap();
        let total: f64 = out.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (s, _) in &out {
            assert!(first_indeterminate(s, &[&c]).unwrap().is_none());
        }
        let before = ground_mix(&[(l, 1.0)]);
        let after = ground_mix(&out);
        for (k, v) in before {
            assert!((after[&k] - v).abs() < 1e-12, "{k}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let names: Vec<String> = (0..8).map(|i| format!("n{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let l = names_state(&refs, 8);
        let c = Constraint::In("N".into(), vec![Value::sym("n0"), Value::sym("n2"), Value::sym("n4"), Value::sym("n6")]);
        let limits = Limits {
            split_budget: 5,
            ..Limits::default()
        };
        let r = split_until_determinate(&l, &[&c], &limits, &mut StepStats::default());
        assert!(matches!(r, Err(Error::ResourceLimit { .. })));
    }
}
