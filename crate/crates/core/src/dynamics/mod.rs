//! Maximally parallel rewriting dynamics on lifted states.
//!
//! An action binds one entity to each of its precondition slots and rewrites
//! the bound entities with a short list of effect operations. A compound
//! action is a multiset of action instances executed together; only the
//! applicable maximal ones (AMCAs) are considered, weighted by the number of
//! ways individual entity copies can be bound to them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distributions::DistributionRep;
use crate::error::{Error, Result};
use crate::lifted::{Context, EntityStructure, GroundEntity, Label};
use crate::multiset::Multiset;
use crate::value::Value;

mod amca;
mod apply;
mod predict;
mod split;

pub use amca::{enumerate_amca, enumerate_amca_with, enumerate_instances, Amca};
pub use apply::apply_compound;
pub use predict::{predict, predict_with};
pub(crate) use split::split_slot_draws;
pub use split::{first_indeterminate, split_slot, split_to_determinacy, split_until_determinate};

/// Predicate over a single bound entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    Has(String),
    Eq(String, Value),
    In(String, Vec<Value>),
    And(Vec<Constraint>),
}

/// Outcome of checking a constraint against an entity structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Determinacy {
    Sat,
    Unsat,
    /// Some values satisfy the constraint and some do not; the urn behind
    /// `label` must be split on `prop`.
    Indeterminate { prop: String, label: Label },
}

impl Constraint {
    pub fn has(p: impl Into<String>) -> Self {
        Constraint::Has(p.into())
    }

    pub fn eq(p: impl Into<String>, v: impl Into<Value>) -> Self {
        Constraint::Eq(p.into(), v.into())
    }

    /// Evaluates on a concrete entity.
    pub fn holds(&self, e: &GroundEntity) -> bool {
        match self {
            Constraint::Has(p) => e.get(p).is_some(),
            Constraint::Eq(p, v) => e.get(p) == Some(v),
            Constraint::In(p, vs) => e.get(p).is_some_and(|x| vs.contains(x)),
            Constraint::And(cs) => cs.iter().all(|c| c.holds(e)),
        }
    }

    pub fn properties(&self) -> Vec<&str> {
        match self {
            Constraint::Has(p) | Constraint::Eq(p, _) | Constraint::In(p, _) => vec![p.as_str()],
            Constraint::And(cs) => cs.iter().flat_map(|c| c.properties()).collect(),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Has(p) => write!(f, "has({p})"),
            Constraint::Eq(p, v) => write!(f, "{p}={v}"),
            Constraint::In(p, vs) => {
                write!(f, "{p}∈{{")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("}")
            }
            Constraint::And(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ∧ ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

fn eval_value_pred(
    prop: &str,
    e: &EntityStructure,
    ctx: &Context,
    pred: impl Fn(&Value) -> bool,
) -> Result<Determinacy> {
    let Some(label) = e.get(prop) else {
        return Ok(Determinacy::Unsat);
    };
    let rep = ctx
        .get(&label)
        .ok_or_else(|| Error::InvalidInput(format!("label {label} is unbound")))?;
    match rep {
        DistributionRep::Dirac(v) => Ok(if pred(v) { Determinacy::Sat } else { Determinacy::Unsat }),
        DistributionRep::Urn(u) => {
            let hits = u.elements().filter(|v| pred(v)).count();
            Ok(if hits == u.distinct() {
                Determinacy::Sat
            } else if hits == 0 {
                Determinacy::Unsat
            } else {
                Determinacy::Indeterminate {
                    prop: prop.to_string(),
                    label,
                }
            })
        }
        DistributionRep::Gaussian(_) => Err(Error::UnsupportedConstraint(format!(
            "value test on continuous property {prop}"
        ))),
    }
}

pub fn eval_constraint(c: &Constraint, e: &EntityStructure, ctx: &Context) -> Result<Determinacy> {
    match c {
        Constraint::Has(p) => Ok(if e.get(p).is_some() {
            Determinacy::Sat
        } else {
            Determinacy::Unsat
        }),
        Constraint::Eq(p, v) => eval_value_pred(p, e, ctx, |x| x == v),
        Constraint::In(p, vs) => eval_value_pred(p, e, ctx, |x| vs.contains(x)),
        Constraint::And(cs) => {
            let mut first_open = None;
            for c in cs {
                match eval_constraint(c, e, ctx)? {
                    Determinacy::Unsat => return Ok(Determinacy::Unsat),
                    Determinacy::Sat => {}
                    open => {
                        first_open.get_or_insert(open);
                    }
                }
            }
            Ok(first_open.unwrap_or(Determinacy::Sat))
        }
    }
}

/// Where a written property value comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// A concrete value (a point mass).
    Value(Value),
    /// A fresh label bound to this representation. A one-slot urn is a
    /// uniform categorical choice.
    Dist(DistributionRep),
}

impl Source {
    pub fn rep(&self) -> DistributionRep {
        match self {
            Source::Value(v) => DistributionRep::Dirac(v.clone()),
            Source::Dist(r) => r.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectOp {
    #[serde(rename = "set")]
    SetProperty { slot: usize, prop: String, to: Source },
    #[serde(rename = "remove")]
    RemoveEntity { slot: usize },
    #[serde(rename = "add")]
    AddEntity { props: BTreeMap<String, Source> },
    /// Linear-Gaussian motion: mean shifted by `delta`, variance grown by `var`.
    #[serde(rename = "shift")]
    ShiftGaussian {
        slot: usize,
        prop: String,
        delta: f64,
        var: f64,
    },
}

impl EffectOp {
    fn slot(&self) -> Option<usize> {
        match self {
            EffectOp::SetProperty { slot, .. }
            | EffectOp::RemoveEntity { slot }
            | EffectOp::ShiftGaussian { slot, .. } => Some(*slot),
            EffectOp::AddEntity { .. } => None,
        }
    }
}

/// A weighted precondition/effect rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub name: String,
    pub weight: f64,
    pub pre: Vec<Constraint>,
    #[serde(default)]
    pub eff: Vec<EffectOp>,
}

impl Action {
    pub fn new(name: impl Into<String>, weight: f64, pre: Vec<Constraint>, eff: Vec<EffectOp>) -> Self {
        Action {
            name: name.into(),
            weight,
            pre,
            eff,
        }
    }

    pub fn arity(&self) -> usize {
        self.pre.len()
    }

    /// Static checks: positive weight, valid slot references, no effect on a
    /// slot after it was removed, valid distribution sources.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ModelValidation(format!("action {}: {msg}", self.name)));
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return bad(format!("weight must be positive, got {}", self.weight));
        }
        let mut removed = vec![false; self.pre.len()];
        for op in &self.eff {
            if let Some(s) = op.slot() {
                if s >= self.pre.len() {
                    return bad(format!("effect references slot {s} but there are {} slots", self.pre.len()));
                }
                if removed[s] {
                    return bad(format!("effect references slot {s} after it was removed"));
                }
            }
            match op {
                EffectOp::RemoveEntity { slot } => removed[*slot] = true,
                EffectOp::SetProperty { to: Source::Dist(r), .. } => {
                    r.validate().map_err(|e| Error::ModelValidation(format!("action {}: {e}", self.name)))?;
                    if r.arity().is_some_and(|a| a < 1) {
                        return bad("empty distribution source".into());
                    }
                }
                EffectOp::AddEntity { props } => {
                    for s in props.values() {
                        s.rep()
                            .validate()
                            .map_err(|e| Error::ModelValidation(format!("action {}: {e}", self.name)))?;
                    }
                }
                EffectOp::ShiftGaussian { delta, var, .. } if !delta.is_finite() || !(*var >= 0.0 && var.is_finite()) => {
                    return bad(format!("invalid shift ({delta}, {var})"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// An action together with the entity structures bound to its slots.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionInstance {
    /// Index into the action list the instance was enumerated from.
    pub action: usize,
    pub binding: Vec<EntityStructure>,
}

pub type CompoundAction = Multiset<ActionInstance>;

/// Budgets and pruning for one filtering step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    /// Maximum number of lifted states created by splitting from one state.
    pub split_budget: usize,
    /// Maximum number of search nodes visited while enumerating compound actions.
    pub amca_budget: usize,
    /// Posterior states lighter than this are dropped (0 keeps everything).
    pub prune: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            split_budget: 1_000_000,
            amca_budget: 1_000_000,
            prune: 0.0,
        }
    }
}

/// Work counters collected during a step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub splits: usize,
    pub amcas: usize,
}

impl std::ops::AddAssign for StepStats {
    fn add_assign(&mut self, o: Self) {
        self.splits += o.splits;
        self.amcas += o.amcas;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(pairs: &[(u32, DistributionRep)]) -> Context {
        pairs.iter().map(|(l, r)| (Label(*l), r.clone())).collect()
    }

    #[test]
    fn eq_against_point_mass_and_urn() {
        let e = EntityStructure::new().with("N", Label(0));
        let c = Constraint::eq("N", "Alice");
        assert_eq!(
            eval_constraint(&c, &e, &ctx(&[(0, DistributionRep::dirac("Alice"))])).unwrap(),
            Determinacy::Sat
        );
        assert_eq!(
            eval_constraint(&c, &e, &ctx(&[(0, DistributionRep::urn(["Alice", "Bob"]))])).unwrap(),
            Determinacy::Indeterminate {
                prop: "N".into(),
                label: Label(0)
            }
        );
        assert_eq!(
            eval_constraint(&Constraint::eq("N", "Carol"), &e, &ctx(&[(0, DistributionRep::urn(["Alice", "Bob"]))]))
                .unwrap(),
            Determinacy::Unsat
        );
    }

    #[test]
    fn value_test_on_gaussian_is_unsupported() {
        let e = EntityStructure::new().with("L", Label(0));
        let r = eval_constraint(&Constraint::eq("L", 1.0), &e, &ctx(&[(0, DistributionRep::gaussian(0.0, 1.0))]));
        assert!(matches!(r, Err(Error::UnsupportedConstraint(_))));
        // presence checks do not look at the value
        let r = eval_constraint(&Constraint::has("L"), &e, &ctx(&[(0, DistributionRep::gaussian(0.0, 1.0))]));
        assert_eq!(r.unwrap(), Determinacy::Sat);
    }

    #[test]
    fn conjunction_short_circuits_on_unsat() {
        let e = EntityStructure::new().with("N", Label(0)).with("T", Label(1));
        let c = ctx(&[(0, DistributionRep::urn(["A", "B"])), (1, DistributionRep::dirac("p"))]);
        let both = Constraint::And(vec![Constraint::eq("N", "A"), Constraint::eq("T", "q")]);
        assert_eq!(eval_constraint(&both, &e, &c).unwrap(), Determinacy::Unsat);
        let open = Constraint::And(vec![Constraint::eq("T", "p"), Constraint::In("N".into(), vec!["A".into()])]);
        assert!(matches!(eval_constraint(&open, &e, &c).unwrap(), Determinacy::Indeterminate { .. }));
        assert_eq!(eval_constraint(&Constraint::And(vec![]), &e, &c).unwrap(), Determinacy::Sat);
    }

    #[test]
    fn missing_property_is_unsat() {
        let e = EntityStructure::new();
        assert_eq!(eval_constraint(&Constraint::eq("N", "A"), &e, &Context::new()).unwrap(), Determinacy::Unsat);
        assert_eq!(eval_constraint(&Constraint::has("N"), &e, &Context::new()).unwrap(), Determinacy::Unsat);
    }

    #[test]
    fn ground_holds() {
        let e: GroundEntity = [("N", Value::sym("A")), ("L", Value::num(1.0))].into_iter().collect();
        assert!(Constraint::eq("N", "A").holds(&e));
        assert!(Constraint::In("L".into(), vec![1.0.into(), 2.0.into()]).holds(&e));
        assert!(!Constraint::has("X").holds(&e));
    }

    #[test]
    fn validation_catches_bad_slots() {
        let a = Action::new("a", 1.0, vec![Constraint::has("T")], vec![EffectOp::RemoveEntity { slot: 1 }]);
        assert!(matches!(a.validate(), Err(Error::ModelValidation(_))));
        let a = Action::new(
            "a",
            1.0,
            vec![Constraint::has("T")],
            vec![
                EffectOp::RemoveEntity { slot: 0 },
                EffectOp::SetProperty {
                    slot: 0,
                    prop: "T".into(),
                    to: Source::Value("x".into()),
                },
            ],
        );
        assert!(matches!(a.validate(), Err(Error::ModelValidation(_))));
        let a = Action::new("a", 0.0, vec![], vec![]);
        assert!(a.validate().is_err());
    }

    #[test]
    fn serde_encodings() {
        let a: Action = serde_json::from_str(
            r#"{"name":"move","weight":2.0,
                "pre":[{"and":[{"has":"Loc"},{"eq":["Loc","r1"]},{"in":["T",["p","q"]]}]}],
                "eff":[{"set":{"slot":0,"prop":"Loc","to":{"value":"r2"}}},
                       {"shift":{"slot":0,"prop":"X","delta":1.0,"var":0.5}},
                       {"add":{"props":{"T":{"dist":{"urn":["a","b"]}}}}},
                       {"remove":{"slot":0}}]}"#,
        )
        .unwrap();
        assert_eq!(a.pre.len(), 1);
        assert_eq!(a.eff.len(), 4);
        let back: Action = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(a, back);
    }
}
