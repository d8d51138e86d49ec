use std::time::Instant;

use crate::dynamics::{predict_with, StepStats};
use crate::error::{Error, Result};
use crate::ground::{compare, predict_ground_with, update_ground, CompareReport, GroundDistribution};
use crate::lifted::{mixture_ground, LiftedDistribution};
use crate::observation::update_with;

use super::format::Scenario;
use super::metrics::StepMetrics;

/// Largest lifted/ground deviation accepted when the oracle is on.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct FilterRun {
    /// Posterior after each step.
    pub posteriors: Vec<LiftedDistribution>,
    pub metrics: Vec<StepMetrics>,
    /// Oracle comparison per step; empty when the oracle is off.
    pub reports: Vec<CompareReport>,
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub posteriors: Vec<GroundDistribution>,
    pub metrics: Vec<StepMetrics>,
}

fn elapsed_ms(start: Instant, timing: bool) -> f64 {
    if timing {
        (start.elapsed().as_secs_f64() * 1e6).round() / 1e3
    } else {
        0.0
    }
}

/// Alternates predict and update over the observation sequence.
///
/// With the oracle on, the ground filter runs in lock step and any deviation
/// of at least [`ORACLE_TOLERANCE`] aborts the run with
/// [`Error::OracleMismatch`].
pub fn run_filter(sc: &Scenario) -> Result<FilterRun> {
    run(sc, sc.options.oracle, true)
}

/// Runs lifted and ground filters side by side and reports every step's
/// comparison without stopping at a mismatch.
pub fn run_compare(sc: &Scenario) -> Result<FilterRun> {
    run(sc, true, false)
}

fn run(sc: &Scenario, oracle: bool, strict: bool) -> Result<FilterRun> {
    let limits = sc.limits();
    let timing = sc.options.timing;
    let mut lifted = sc.initial.clone();
    let mut ground = if oracle {
        Some(mixture_ground(&lifted)?)
    } else {
        None
    };
    let mut out = FilterRun {
        posteriors: Vec::with_capacity(sc.observations.len()),
        metrics: Vec::with_capacity(sc.observations.len()),
        reports: Vec::new(),
    };
    for (i, y) in sc.observations.iter().enumerate() {
        let step = i + 1;
        let start = Instant::now();
        let mut stats = StepStats::default();
        lifted = predict_with(&lifted, &sc.actions, &limits, &mut stats)?;
        if let Some(y) = y {
            lifted = update_with(&lifted, y, &limits, &mut stats).map_err(|e| e.with_step(step))?;
        }
        let ms = elapsed_ms(start, timing);

        let mut n_ground = None;
        if let Some(g) = ground.take() {
            let (mut g, _) = predict_ground_with(&g, &sc.actions, &limits)?;
            if let Some(y) = y {
                g = update_ground(&g, y).map_err(|e| e.with_step(step))?;
            }
            let report = compare(&lifted, &g)?;
            if strict && !report.agrees(ORACLE_TOLERANCE) {
                return Err(Error::OracleMismatch {
                    step,
                    deviation: report.max_deviation,
                });
            }
            n_ground = Some(g.len());
            out.reports.push(report);
            ground = Some(g);
        }

        out.metrics.push(StepMetrics {
            step,
            n_lifted: Some(lifted.len()),
            n_ground,
            n_splits: stats.splits,
            n_amca: stats.amcas,
            ms,
        });
        out.posteriors.push(lifted.clone());
    }
    Ok(out)
}

/// The ground filter alone.
pub fn run_oracle(sc: &Scenario) -> Result<OracleRun> {
    let limits = sc.limits();
    let mut g = mixture_ground(&sc.initial)?;
    let mut out = OracleRun {
        posteriors: Vec::with_capacity(sc.observations.len()),
        metrics: Vec::with_capacity(sc.observations.len()),
    };
    for (i, y) in sc.observations.iter().enumerate() {
        let step = i + 1;
        let start = Instant::now();
        let (next, n_amca) = predict_ground_with(&g, &sc.actions, &limits)?;
        g = next;
        if let Some(y) = y {
            g = update_ground(&g, y).map_err(|e| e.with_step(step))?;
        }
        out.metrics.push(StepMetrics {
            step,
            n_lifted: None,
            n_ground: Some(g.len()),
            n_splits: 0,
            n_amca,
            ms: elapsed_ms(start, sc.options.timing),
        });
        out.posteriors.push(g.clone());
    }
    Ok(out)
}

/// Mean state counts of one run, for sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountSummary {
    pub mean_lifted: f64,
    pub mean_ground: f64,
}

impl CountSummary {
    pub fn ratio(&self) -> f64 {
        self.mean_ground / self.mean_lifted
    }
}

pub fn summarize(metrics: &[StepMetrics]) -> Option<CountSummary> {
    if metrics.is_empty() {
        return None;
    }
    let n = metrics.len() as f64;
    let mean = |f: &dyn Fn(&StepMetrics) -> Option<usize>| -> Option<f64> {
        metrics.iter().map(|m| f(m).map(|x| x as f64)).sum::<Option<f64>>().map(|s| s / n)
    };
    Some(CountSummary {
        mean_lifted: mean(&|m| m.n_lifted)?,
        mean_ground: mean(&|m| m.n_ground)?,
    })
}
