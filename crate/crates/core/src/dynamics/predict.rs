use rayon::prelude::*;

use crate::error::Result;
use crate::lifted::{LiftedDistribution, LiftedState};

use super::{apply_compound, enumerate_amca_with, split_until_determinate, Action, Constraint, Limits, StepStats};

type Successors = (Vec<(LiftedState, f64)>, StepStats);

fn successors(l: &LiftedState, w: f64, actions: &[Action], constraints: &[&Constraint], limits: &Limits) -> Result<Successors> {
    let mut stats = StepStats::default();
    let mut out = Vec::new();
    for (b, pb) in split_until_determinate(l, constraints, limits, &mut stats)? {
        let amcas = enumerate_amca_with(&b, actions, limits)?;
        stats.amcas += amcas.len();
        for a in amcas {
            out.push((apply_compound(&a.compound, &b, actions)?, w * pb * a.probability));
        }
    }
    Ok((out, stats))
}

/// One prediction step: split to determinacy, enumerate AMCAs and apply them.
///
/// States are processed in parallel; results are merged in input order so the
/// output does not depend on scheduling.
pub fn predict_with(d: &LiftedDistribution, actions: &[Action], limits: &Limits, stats: &mut StepStats) -> Result<LiftedDistribution> {
    let constraints: Vec<&Constraint> = actions.iter().flat_map(|a| a.pre.iter()).collect();
    let entries: Vec<(&LiftedState, f64)> = d.iter().collect();
    let results: Vec<Result<Successors>> = entries
        .par_iter()
        .map(|&(l, w)| successors(l, w, actions, &constraints, limits))
        .collect();
    let mut out = LiftedDistribution::new();
    for r in results {
        let (succ, st) = r?;
        *stats += st;
        for (s, w) in succ {
            out.insert_canonical(s, w);
        }
    }
    out.normalize();
    out.prune(limits.prune);
    Ok(out)
}

pub fn predict(d: &LiftedDistribution, actions: &[Action]) -> Result<LiftedDistribution> {
    predict_with(d, actions, &Limits::default(), &mut StepStats::default())
}
