use crate::distributions::{DistributionRep, Gaussian};
use crate::error::{Error, Result};
use crate::lifted::{EntityStructure, Label, LiftedState};
use crate::value::Value;

use super::{Action, CompoundAction, EffectOp};

struct Labels {
    next: u32,
}

impl Labels {
    fn fresh(&mut self) -> Label {
        self.next += 1;
        Label(self.next - 1)
    }
}

fn shifted(rep: &DistributionRep, delta: f64, var: f64, prop: &str) -> Result<DistributionRep> {
    match rep {
        DistributionRep::Gaussian(g) => Ok(DistributionRep::Gaussian(Gaussian::new(g.mean + delta, g.var + var)?)),
        DistributionRep::Dirac(Value::Num(x)) => {
            let m = x.into_inner() + delta;
            if var > 0.0 {
                Ok(DistributionRep::Gaussian(Gaussian::new(m, var)?))
            } else {
                Ok(DistributionRep::dirac(m))
            }
        }
        other => Err(Error::UnsupportedEffect(format!("cannot shift {prop} bound to {other}"))),
    }
}

/// Applies a compound action to a determinate lifted state.
///
/// Bound copies are consumed and replaced by their rewritten versions; every
/// written property gets a fresh label, so the result stays exchangeable.
/// The successor is returned in canonical form.
pub fn apply_compound(k: &CompoundAction, l: &LiftedState, actions: &[Action]) -> Result<LiftedState> {
    let mut labels = Labels {
        next: l.fresh_label().0,
    };
    let (mut structure, mut context) = l.clone().into_parts();
    let mut produced: Vec<EntityStructure> = Vec::new();

    for (inst, &n) in k.iter() {
        let action = actions
            .get(inst.action)
            .ok_or_else(|| Error::InvalidInput(format!("unknown action index {}", inst.action)))?;
        if inst.binding.len() != action.arity() {
            return Err(Error::InvalidInput(format!("instance of {} has a wrong binding", action.name)));
        }
        for _ in 0..n {
            for e in &inst.binding {
                if !structure.remove_one(e) {
                    return Err(Error::InvalidInput(format!("compound is not applicable: {e} is exhausted")));
                }
            }
            let mut slots: Vec<Option<EntityStructure>> = inst.binding.iter().cloned().map(Some).collect();
            for op in &action.eff {
                match op {
                    EffectOp::SetProperty { slot, prop, to } => {
                        let lab = labels.fresh();
                        context.insert(lab, to.rep());
                        slot_mut(&mut slots, *slot, &action.name)?.set(prop.clone(), lab);
                    }
                    EffectOp::RemoveEntity { slot } => {
                        slot_mut(&mut slots, *slot, &action.name)?;
                        slots[*slot] = None;
                    }
                    EffectOp::AddEntity { props } => {
                        let mut e = EntityStructure::new();
                        for (p, src) in props {
                            let lab = labels.fresh();
                            context.insert(lab, src.rep());
                            e.set(p.clone(), lab);
                        }
                        produced.push(e);
                    }
                    EffectOp::ShiftGaussian { slot, prop, delta, var } => {
                        let e = slot_mut(&mut slots, *slot, &action.name)?;
                        let old = e
                            .get(prop)
                            .ok_or_else(|| Error::UnsupportedEffect(format!("cannot shift missing property {prop}")))?;
                        let rep = context
                            .get(&old)
                            .ok_or_else(|| Error::InvalidInput(format!("label {old} is unbound")))?;
                        let new_rep = shifted(rep, *delta, *var, prop)?;
                        let lab = labels.fresh();
                        context.insert(lab, new_rep);
                        e.set(prop.clone(), lab);
                    }
                }
            }
            produced.extend(slots.into_iter().flatten());
        }
    }
    for e in produced {
        structure.insert(e);
    }
    Ok(LiftedState::from_parts(structure, context).canonicalize())
}

fn slot_mut<'a>(slots: &'a mut [Option<EntityStructure>], slot: usize, name: &str) -> Result<&'a mut EntityStructure> {
    slots
        .get_mut(slot)
        .and_then(Option::as_mut)
        .ok_or_else(|| Error::ModelValidation(format!("action {name}: slot {slot} is not available")))
}
