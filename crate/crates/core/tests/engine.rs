mod common;

use std::collections::BTreeMap;

use common::ground_entity;
use lifted_filter::observation::{IdentityReading, LocationReading};
use lifted_filter::scenario::bundled::{alicebob_gauss, office3, office_n};
use lifted_filter::scenario::{run_compare, run_filter, run_oracle, RunOptions, Scenario};
use lifted_filter::{
    compare, mixture_ground, predict, predict_ground, update, update_ground, Action, Constraint, DistributionRep,
    EffectOp, EntityStructure, Error, Gaussian, GroundDistribution, GroundState, Label, LiftedDistribution,
    LiftedState, Multiset, Observation, Value,
};

fn alice_bob_urn() -> LiftedState {
    let e = EntityStructure::new().with("N", Label(0));
    let ctx = [(Label(0), DistributionRep::urn(["Alice", "Bob"]))].into_iter().collect();
    LiftedState::new(Multiset::singleton(e, 2), ctx).unwrap()
}

fn gaussians(l: &LiftedState) -> Vec<Gaussian> {
    l.context()
        .values()
        .filter_map(|d| match d {
            DistributionRep::Gaussian(g) => Some(*g),
            _ => None,
        })
        .collect()
}

#[test]
fn precondition_on_a_shared_urn_splits_names() {
    let greet = Action::new(
        "greet",
        1.0,
        vec![Constraint::eq("N", "Alice")],
        vec![EffectOp::SetProperty {
            slot: 0,
            prop: "Greeted".into(),
            to: lifted_filter::Source::Value(Value::sym("yes")),
        }],
    );
    let d = LiftedDistribution::singleton(alice_bob_urn());
    let next = predict(&d, &[greet.clone()]).unwrap();
    let ground = predict_ground(&mixture_ground(&d).unwrap(), &[greet]).unwrap();
    let r = compare(&next, &ground).unwrap();
    assert!(r.agrees(1e-12), "{r:?}");
    // Alice is greeted, Bob is not, whoever is which
    assert_eq!(ground.len(), 1);
    let (s, p) = ground.iter().next().unwrap();
    assert!((p - 1.0).abs() < 1e-12);
    assert_eq!(s.iter_copies().filter(|e| e.get("Greeted").is_some()).count(), 1);
}

#[test]
fn gaussian_shift_adds_mean_and_variance() {
    let e = EntityStructure::new().with("L", Label(0));
    let ctx = [(Label(0), DistributionRep::gaussian(1.3, 2.0))].into_iter().collect();
    let d = LiftedDistribution::singleton(LiftedState::new(Multiset::singleton(e, 1), ctx).unwrap());
    let walk = Action::new(
        "walk",
        1.0,
        vec![Constraint::has("L")],
        vec![EffectOp::ShiftGaussian {
            slot: 0,
            prop: "L".into(),
            delta: 1.0,
            var: 0.5,
        }],
    );
    let next = predict(&d, &[walk]).unwrap();
    let (l, w) = next.iter().next().unwrap();
    assert_eq!(next.len(), 1);
    assert!((w - 1.0).abs() < 1e-12);
    let g = gaussians(l);
    assert_eq!(g.len(), 1);
    assert!((g[0].mean - 2.3).abs() < 1e-12 && (g[0].var - 2.5).abs() < 1e-12, "{g:?}");
}

#[test]
fn location_reading_weights_who_is_where() {
    let sc = alicebob_gauss().unwrap();
    let run = run_filter(&sc).unwrap();
    assert_eq!(run.posteriors.len(), sc.observations.len());
    for d in &run.posteriors {
        assert!((d.total_weight() - 1.0).abs() < 1e-9);
    }
    // the reading that names Alice splits the name urn
    assert!(run.posteriors[1].len() >= 2);
    assert!(run.metrics[1].n_splits >= 1);
    // the two positions are distinguishable, so the weights differ
    let w: Vec<f64> = run.posteriors[1].iter().map(|(_, w)| w).collect();
    assert!(w.iter().any(|x| (x - w[0]).abs() > 1e-6), "{w:?}");
}

#[test]
fn identity_reading_matches_ground() {
    let d = LiftedDistribution::singleton(alice_bob_urn());
    let y = Observation::Identity(IdentityReading {
        prop: "N".into(),
        value: Value::sym("Alice"),
        source: Constraint::has("N"),
        reliability: 0.9,
        support: Some(2),
    });
    let lifted = update(&d, &y).unwrap();
    let ground = update_ground(&mixture_ground(&d).unwrap(), &y).unwrap();
    assert!(compare(&lifted, &ground).unwrap().agrees(1e-12));
}

#[test]
fn reading_with_no_target_is_impossible() {
    let s: GroundState = GroundState::singleton(ground_entity(&[("N", Value::sym("Bob"))]), 1);
    let d = LiftedDistribution::singleton(LiftedState::from_ground(&s));
    let y = Observation::Location(LocationReading {
        prop: "L".into(),
        value: 0.0,
        noise_var: 1.0,
        source: None,
    });
    assert!(matches!(update(&d, &y), Err(Error::ImpossibleObservation { .. })));
    let g = GroundDistribution::singleton(s);
    assert!(matches!(update_ground(&g, &y), Err(Error::ImpossibleObservation { .. })));
}

#[test]
fn office_runs_agree_with_the_oracle() {
    for sc in [office_n(3).unwrap(), office3().unwrap()] {
        let run = run_compare(&sc).unwrap();
        assert!(run.reports.iter().all(|r| r.agrees(1e-9)), "{}", sc.name);
        let oracle = run_oracle(&sc).unwrap();
        let counts: Vec<_> = oracle.metrics.iter().map(|m| m.n_ground).collect();
        let lifted: Vec<_> = run.metrics.iter().map(|m| m.n_ground).collect();
        assert_eq!(counts, lifted);
    }
}

#[test]
fn tight_budget_is_a_resource_limit() {
    let mut sc = office3().unwrap();
    sc.options.oracle = false;
    sc.options.budget = 1;
    let e = run_filter(&sc).unwrap_err();
    assert!(matches!(e, Error::ResourceLimit { .. }), "{e}");
    assert_eq!(e.exit_code(), 3);
}

#[test]
fn pruning_drops_light_states() {
    let mut structure = Multiset::new();
    structure.insert(EntityStructure::new().with("N", Label(0)).with("R", Label(1)));
    structure.insert(EntityStructure::new().with("N", Label(0)).with("R", Label(2)));
    let ctx = [
        (Label(0), DistributionRep::urn(["Alice", "Bob"])),
        (Label(1), DistributionRep::dirac("r0")),
        (Label(2), DistributionRep::dirac("r1")),
    ]
    .into_iter()
    .collect();
    let mut properties = BTreeMap::new();
    properties.insert("N".to_string(), Some(vec![Value::sym("Alice"), Value::sym("Bob")]));
    properties.insert("R".to_string(), Some(vec![Value::sym("r0"), Value::sym("r1")]));
    let mut sc = Scenario {
        name: "prune".into(),
        properties,
        initial: LiftedDistribution::singleton(LiftedState::new(structure, ctx).unwrap()),
        actions: vec![],
        observations: vec![Some(Observation::Identity(IdentityReading {
            prop: "N".into(),
            value: Value::sym("Alice"),
            source: Constraint::eq("R", "r0"),
            reliability: 0.9,
            support: Some(2),
        }))],
        options: RunOptions::default(),
    };
    sc.validate().unwrap();
    let exact = run_filter(&sc).unwrap();
    let mut w: Vec<f64> = exact.posteriors[0].iter().map(|(_, w)| w).collect();
    w.sort_by(f64::total_cmp);
    assert_eq!(w.len(), 2);
    assert!((w[0] - 0.1).abs() < 1e-12 && (w[1] - 0.9).abs() < 1e-12, "{w:?}");

    sc.options.prune = 0.2;
    let pruned = run_filter(&sc).unwrap();
    let p = &pruned.posteriors[0];
    assert_eq!(p.len(), 1);
    assert!((p.total_weight() - 1.0).abs() < 1e-12);
}

#[test]
fn empty_state_has_one_empty_compound() {
    let d = LiftedDistribution::singleton(LiftedState::empty());
    let a = Action::new("noop", 1.0, vec![Constraint::has("X")], vec![]);
    let next = predict(&d, &[a]).unwrap();
    assert_eq!(next, d);
}
