use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::DistributionRep;
use crate::dynamics::{Action, EffectOp, Limits, Source};
use crate::error::{Error, Result};
use crate::lifted::{Context, EntityStructure, Label, LiftedDistribution, LiftedState};
use crate::multiset::Multiset;
use crate::observation::Observation;
use crate::value::Value;

pub const SCENARIO_SCHEMA: &str = "lifted-filter/scenario/v1";

/// Tolerance on the total initial weight.
const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Run the ground filter alongside and compare every step.
    #[serde(default)]
    pub oracle: bool,
    /// Posterior states lighter than this are dropped; 0 disables pruning.
    #[serde(default)]
    pub prune: f64,
    /// Budget for splitting and compound-action search, per state and step.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    /// Record wall time per step. Off by default so metrics are reproducible.
    #[serde(default)]
    pub timing: bool,
}

fn default_budget() -> usize {
    Limits::default().split_budget
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            oracle: false,
            prune: 0.0,
            budget: default_budget(),
            seed: 0,
            timing: false,
        }
    }
}

impl RunOptions {
    pub fn limits(&self) -> Limits {
        Limits {
            split_budget: self.budget,
            amca_budget: self.budget,
            prune: self.prune,
        }
    }
}

/// A complete filtering problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Declared properties with their finite domain, or `None` for open
    /// (e.g. continuous) properties.
    pub properties: BTreeMap<String, Option<Vec<Value>>>,
    pub initial: LiftedDistribution,
    pub actions: Vec<Action>,
    /// One entry per time step; `None` means predict only.
    pub observations: Vec<Option<Observation>>,
    pub options: RunOptions,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema: String,
    name: String,
    properties: BTreeMap<String, Option<Vec<Value>>>,
    initial: Vec<WeightedStateFile>,
    actions: Vec<Action>,
    #[serde(default)]
    observations: Vec<Option<Observation>>,
    #[serde(default)]
    options: RunOptions,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightedStateFile {
    weight: f64,
    structure: Vec<EntityFile>,
    context: BTreeMap<String, DistributionRep>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntityFile {
    count: usize,
    props: BTreeMap<String, String>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::ModelValidation(msg.into())
}

fn state_from_file(f: &WeightedStateFile) -> Result<LiftedState> {
    let labels: BTreeMap<&str, Label> = f
        .context
        .keys()
        .enumerate()
        .map(|(i, k)| (k.as_str(), Label(i as u32)))
        .collect();
    let mut structure = Multiset::new();
    for e in &f.structure {
        if e.count == 0 {
            return Err(invalid("entity count must be positive"));
        }
        let mut es = EntityStructure::new();
        for (p, l) in &e.props {
            let label = labels
                .get(l.as_str())
                .ok_or_else(|| invalid(format!("label {l} is not bound in the context")))?;
            es.set(p.clone(), *label);
        }
        structure.insert_n(es, e.count);
    }
    let context: Context = f.context.iter().map(|(k, r)| (labels[k.as_str()], r.clone())).collect();
    LiftedState::new(structure, context).map_err(|e| invalid(e.to_string()))
}

fn state_to_file(l: &LiftedState, weight: f64) -> WeightedStateFile {
    let name = |l: Label| format!("d{}", l.0);
    WeightedStateFile {
        weight,
        structure: l
            .structure()
            .iter()
            .map(|(e, &count)| EntityFile {
                count,
                props: e.iter().map(|(p, l)| (p.to_string(), name(l))).collect(),
            })
            .collect(),
        context: l.context().iter().map(|(&k, r)| (name(k), r.clone())).collect(),
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "scenario".into(),
            source,
        })?;
        if file.schema != SCENARIO_SCHEMA {
            return Err(invalid(format!(
                "unsupported schema {:?}, expected {SCENARIO_SCHEMA:?}",
                file.schema
            )));
        }
        let mut initial = LiftedDistribution::new();
        let mut total = 0.0;
        for w in &file.initial {
            if !(w.weight > 0.0 && w.weight.is_finite()) {
                return Err(invalid(format!("initial weight must be positive, got {}", w.weight)));
            }
            total += w.weight;
            initial.insert(state_from_file(w)?, w.weight);
        }
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(invalid(format!("initial weights sum to {total}, not 1")));
        }
        let mut sc = Scenario {
            name: file.name,
            properties: file.properties,
            initial,
            actions: file.actions,
            observations: file.observations,
            options: file.options,
        };
        sc.resolve_supports();
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ScenarioFile {
            schema: SCENARIO_SCHEMA.into(),
            name: self.name.clone(),
            properties: self.properties.clone(),
            initial: self.initial.iter().map(|(l, w)| state_to_file(l, w)).collect(),
            actions: self.actions.clone(),
            observations: self.observations.clone(),
            options: self.options,
        };
        let mut text = serde_json::to_string_pretty(&file).map_err(|source| Error::Json {
            context: "scenario".into(),
            source,
        })?;
        text.push('\n');
        Ok(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Replaces the observation sequence, e.g. from a separate file.
    pub fn with_observations(mut self, observations: Vec<Option<Observation>>) -> Result<Self> {
        self.observations = observations;
        self.resolve_supports();
        self.validate()?;
        Ok(self)
    }

    fn resolve_supports(&mut self) {
        let props = self.properties.clone();
        let size = move |p: &str| props.get(p).and_then(|d| d.as_ref()).map(Vec::len);
        for y in self.observations.iter_mut().flatten() {
            y.resolve_support(&size);
        }
    }

    /// Checks that every referenced property is declared and that actions,
    /// observations and options are well formed.
    pub fn validate(&self) -> Result<()> {
        let declared = |p: &str, what: &str| {
            if self.properties.contains_key(p) {
                Ok(())
            } else {
                Err(invalid(format!("{what} uses undeclared property {p}")))
            }
        };
        for (l, _) in self.initial.iter() {
            for (e, _) in l.structure().iter() {
                for (p, _) in e.iter() {
                    declared(p, "initial state")?;
                }
            }
        }
        for a in &self.actions {
            a.validate()?;
            let what = format!("action {}", a.name);
            for c in &a.pre {
                for p in c.properties() {
                    declared(p, &what)?;
                }
            }
            for op in &a.eff {
                match op {
                    EffectOp::SetProperty { prop, to, .. } => {
                        declared(prop, &what)?;
                        if let Source::Dist(r) = to {
                            if r.arity().is_some_and(|n| n == 0) {
                                return Err(invalid(format!("{what}: empty distribution")));
                            }
                        }
                    }
                    EffectOp::ShiftGaussian { prop, .. } => declared(prop, &what)?,
                    EffectOp::AddEntity { props } => {
                        for p in props.keys() {
                            declared(p, &what)?;
                        }
                    }
                    EffectOp::RemoveEntity { .. } => {}
                }
            }
        }
        for (t, y) in self.observations.iter().enumerate() {
            let Some(y) = y else { continue };
            y.validate()?;
            for p in y.properties() {
                declared(p, &format!("observation at step {}", t + 1))?;
            }
            check_supports(y, t + 1)?;
        }
        if !(self.options.prune >= 0.0 && self.options.prune < 1.0) {
            return Err(invalid(format!("prune threshold {} is outside [0, 1)", self.options.prune)));
        }
        if self.options.budget == 0 {
            return Err(invalid("budget must be positive"));
        }
        if self.options.oracle && self.options.prune > 0.0 {
            return Err(invalid("oracle comparison requires prune = 0"));
        }
        Ok(())
    }

    pub fn limits(&self) -> Limits {
        self.options.limits()
    }
}

fn check_supports(y: &Observation, step: usize) -> Result<()> {
    match y {
        Observation::Identity(r) if r.support.is_none() => Err(invalid(format!(
            "identity reading on {} at step {step} needs a declared finite domain or an explicit support",
            r.prop
        ))),
        Observation::All(ys) => ys.iter().try_for_each(|y| check_supports(y, step)),
        _ => Ok(()),
    }
}

/// Reads an observation sequence: a JSON array whose entries are observation
/// records or `null` for steps without a reading.
pub fn load_observations(path: &Path) -> Result<Vec<Option<Observation>>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        context: format!("observations in {}", path.display()),
        source,
    })
}
