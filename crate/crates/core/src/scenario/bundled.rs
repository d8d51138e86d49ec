//! Synthetic example scenarios shipped with the tool.
//!
//! `office3` and `office-n` place `n` agents on a ring of `3n` rooms, three
//! rooms apart. Each agent can stay (weight 2) or move to a neighbouring room
//! (weight 1 each); names are unknown and held in one shared urn. Every step
//! reports exact head counts per room, generated from a trajectory in which
//! all agents move forward on odd steps and stay on even steps. The agents'
//! reachable rooms never overlap, so the counts pin down every move while the
//! names stay unknown. `office3` additionally reports at step 10 that the
//! agent in the printer room is Alice. `alicebob-gauss` is a two-person
//! scenario with continuous positions.

use std::collections::BTreeMap;

use crate::distributions::DistributionRep;
use crate::dynamics::{Action, Constraint, EffectOp, Source};
use crate::error::{Error, Result};
use crate::lifted::{EntityStructure, Label, LiftedDistribution, LiftedState};
use crate::multiset::Multiset;
use crate::observation::{Confusion, CountReading, IdentityReading, LocationReading, Observation};
use crate::value::Value;

use super::format::{RunOptions, Scenario};

/// Names of the bundled scenarios accepted by [`builtin`].
pub const BUILTINS: &[&str] = &["office3", "office-n:<agents>", "alicebob-gauss"];

pub const OFFICE_STEPS: usize = 12;
/// Rooms between neighbouring agents.
const SPACING: usize = 3;
pub const IDENTIFY_STEP: usize = 10;
/// Room index of the printer in `office3`.
pub const PRINTER_ROOM: usize = 4;

fn room(i: usize) -> String {
    format!("r{i}")
}

fn ring_actions(rooms: usize) -> Vec<Action> {
    let mut out = Vec::new();
    for i in 0..rooms {
        let here = Constraint::eq("Room", room(i));
        let to = |j: usize| {
            vec![EffectOp::SetProperty {
                slot: 0,
                prop: "Room".into(),
                to: Source::Value(room(j).into()),
            }]
        };
        out.push(Action::new(format!("stay-{}", room(i)), 2.0, vec![here.clone()], vec![]));
        out.push(Action::new(format!("next-{}", room(i)), 1.0, vec![here.clone()], to((i + 1) % rooms)));
        out.push(Action::new(format!("prev-{}", room(i)), 1.0, vec![here], to((i + rooms - 1) % rooms)));
    }
    out
}

/// Agents on a ring of `3n` rooms starting at `(3i + offset) mod 3n`.
fn ring_scenario(name: &str, names: &[String], offset: usize, steps: usize) -> Result<Scenario> {
    let n = names.len();
    if n == 0 {
        return Err(Error::InvalidInput("at least one agent is required".into()));
    }
    let rooms = SPACING * n;
    let start: Vec<usize> = (0..n).map(|i| (SPACING * i + offset) % rooms).collect();

    let mut structure = Multiset::new();
    let mut context = BTreeMap::new();
    context.insert(Label(0), DistributionRep::urn(names.iter().map(String::as_str)));
    for (i, &r) in start.iter().enumerate() {
        let lab = Label(i as u32 + 1);
        context.insert(lab, DistributionRep::dirac(room(r)));
        structure.insert(EntityStructure::new().with("Name", Label(0)).with("Room", lab));
    }
    let initial = LiftedDistribution::singleton(LiftedState::new(structure, context)?);

    let mut observations = Vec::with_capacity(steps);
    let mut pos = start;
    for t in 1..=steps {
        if t % 2 == 1 {
            pos.iter_mut().for_each(|p| *p = (*p + 1) % rooms);
        }
        let counts = (0..rooms)
            .map(|r| {
                Observation::Count(CountReading {
                    region: Constraint::eq("Room", room(r)),
                    count: pos.iter().filter(|&&p| p == r).count(),
                    confusion: Confusion::Identity,
                })
            })
            .collect();
        observations.push(Some(Observation::All(counts)));
    }

    let mut properties = BTreeMap::new();
    properties.insert("Name".to_string(), Some(names.iter().map(Value::sym).collect()));
    properties.insert("Room".to_string(), Some((0..rooms).map(|r| Value::sym(room(r))).collect()));
    Ok(Scenario {
        name: name.into(),
        properties,
        initial,
        actions: ring_actions(rooms),
        observations,
        options: RunOptions::default(),
    })
}

/// `n` anonymous agents, no identifying observation.
pub fn office_n(n: usize) -> Result<Scenario> {
    let names: Vec<String> = (1..=n).map(|i| format!("P{i}")).collect();
    ring_scenario(&format!("office-{n}"), &names, 0, OFFICE_STEPS)
}

/// Three agents; at step 10 the one in the printer room is reported to be Alice.
pub fn office3() -> Result<Scenario> {
    let names = ["Alice", "Bob", "Carol"].map(String::from);
    // Alice starts where she reaches the printer after the five forward moves
    // made by step 10.
    let rooms = SPACING * names.len();
    let moves = IDENTIFY_STEP.div_ceil(2);
    let offset = (PRINTER_ROOM + rooms - moves % rooms) % rooms;
    let mut sc = ring_scenario("office3", &names, offset, OFFICE_STEPS + 3)?;
    let at = &mut sc.observations[IDENTIFY_STEP - 1];
    if let Some(Observation::All(parts)) = at {
        parts.push(Observation::Identity(IdentityReading {
            prop: "Name".into(),
            value: Value::sym("Alice"),
            source: Constraint::eq("Room", room(PRINTER_ROOM)),
            reliability: 0.9,
            support: Some(3),
        }));
    }
    sc.options.oracle = true;
    Ok(sc)
}

/// Two people with unknown names at uncertain continuous positions, walking
/// right and seen by a position sensor.
pub fn alicebob_gauss() -> Result<Scenario> {
    let mut structure = Multiset::new();
    structure.insert(EntityStructure::new().with("N", Label(0)).with("L", Label(1)));
    structure.insert(EntityStructure::new().with("N", Label(0)).with("L", Label(2)));
    let context = [
        (Label(0), DistributionRep::urn(["Alice", "Bob"])),
        (Label(1), DistributionRep::gaussian(1.3, 2.0)),
        (Label(2), DistributionRep::gaussian(2.1, 1.0)),
    ]
    .into_iter()
    .collect();
    let initial = LiftedDistribution::singleton(LiftedState::new(structure, context)?);
    let walk = Action::new(
        "walk",
        1.0,
        vec![Constraint::has("L")],
        vec![EffectOp::ShiftGaussian {
            slot: 0,
            prop: "L".into(),
            delta: 0.5,
            var: 0.1,
        }],
    );
    let loc = |value: f64, source: Option<Constraint>| {
        Some(Observation::Location(LocationReading {
            prop: "L".into(),
            value,
            noise_var: 0.5,
            source,
        }))
    };
    let mut properties = BTreeMap::new();
    properties.insert("N".to_string(), Some(vec![Value::sym("Alice"), Value::sym("Bob")]));
    properties.insert("L".to_string(), None);
    Ok(Scenario {
        name: "alicebob-gauss".into(),
        properties,
        initial,
        actions: vec![walk],
        observations: vec![
            loc(2.0, None),
            loc(3.0, Some(Constraint::eq("N", "Alice"))),
            None,
            loc(3.5, None),
        ],
        options: RunOptions::default(),
    })
}

/// Resolves a bundled scenario by name (`office3`, `office-n:4`, `alicebob-gauss`).
pub fn builtin(name: &str) -> Result<Scenario> {
    match name {
        "office3" => office3(),
        "alicebob-gauss" => alicebob_gauss(),
        _ => {
            if let Some(n) = name.strip_prefix("office-n:").or_else(|| name.strip_prefix("office-")) {
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad agent count in {name:?}")))?;
                if !(1..=7).contains(&n) {
                    return Err(Error::InvalidInput(format!("office-n supports 1 to 7 agents, got {n}")));
                }
                return office_n(n);
            }
            Err(Error::InvalidInput(format!(
                "unknown builtin scenario {name:?}; available: {}",
                BUILTINS.join(", ")
            )))
        }
    }
}
