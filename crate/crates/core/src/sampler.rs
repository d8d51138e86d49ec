//! Forward simulation on ground states.
//!
//! Sampling uses the ground semantics: draw an AMCA by its probability, then
//! draw one successor of applying it. Runs are reproducible from a seed; run
//! `i` of a batch uses stream `i` of the same generator.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{Action, Limits};
use crate::error::{Error, Result};
use crate::ground::{apply_ground, ground_amcas, GroundCompound, GroundDistribution};
use crate::lifted::GroundState;

/// Identifies the generator so recorded trajectories can be reproduced.
pub const RNG_ALGORITHM: &str = "chacha8-v1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub seed: u64,
    pub run: u64,
    pub rng: &'static str,
    pub states: Vec<GroundState>,
    pub compounds: Vec<GroundCompound>,
}

pub fn rng_for(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

fn pick<'a, T>(items: &'a [(T, f64)], rng: &mut impl Rng) -> Result<&'a T> {
    let total: f64 = items.iter().map(|(_, p)| p).sum();
    let mut u = rng.random::<f64>() * total;
    for (x, p) in items {
        if u < *p {
            return Ok(x);
        }
        u -= p;
    }
    items
        .iter()
        .rev()
        .find(|(_, p)| *p > 0.0)
        .map(|(x, _)| x)
        .ok_or_else(|| Error::InvalidInput("cannot sample from an empty distribution".into()))
}

/// Draws a state from a ground distribution.
pub fn sample_ground(d: &GroundDistribution, rng: &mut impl Rng) -> Result<GroundState> {
    let items: Vec<(&GroundState, f64)> = d.iter().collect();
    Ok((*pick(&items, rng)?).clone())
}

/// One step: a compound action and the resulting state.
pub fn sample_step(s: &GroundState, actions: &[Action], rng: &mut impl Rng) -> Result<(GroundState, GroundCompound)> {
    let amcas = ground_amcas(s, actions, Limits::default().amca_budget)?;
    let k = pick(&amcas, rng)?.clone();
    let succ = apply_ground(&k, s, actions)?;
    let next = pick(&succ, rng)?.clone();
    Ok((next, k))
}

fn walk(s0: GroundState, actions: &[Action], steps: usize, rng: &mut ChaCha8Rng, seed: u64, run: u64) -> Result<Trajectory> {
    let mut states = vec![s0];
    let mut compounds = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (next, k) = sample_step(states.last().expect("non-empty"), actions, rng)?;
        states.push(next);
        compounds.push(k);
    }
    Ok(Trajectory {
        seed,
        run,
        rng: RNG_ALGORITHM,
        states,
        compounds,
    })
}

pub fn sample_trajectory_with(
    s0: &GroundState,
    actions: &[Action],
    steps: usize,
    seed: u64,
    run: u64,
) -> Result<Trajectory> {
    walk(s0.clone(), actions, steps, &mut rng_for(seed, run), seed, run)
}

/// Draws the initial state from `initial`, then simulates `steps` steps.
pub fn sample_run(initial: &GroundDistribution, actions: &[Action], steps: usize, seed: u64, run: u64) -> Result<Trajectory> {
    let mut rng = rng_for(seed, run);
    let s0 = sample_ground(initial, &mut rng)?;
    walk(s0, actions, steps, &mut rng, seed, run)
}

pub fn sample_trajectory(s0: &GroundState, actions: &[Action], steps: usize, seed: u64) -> Result<Trajectory> {
    sample_trajectory_with(s0, actions, steps, seed, 0)
}
