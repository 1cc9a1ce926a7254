use serde::{Deserialize, Serialize};

use super::{SimError, WorldState};
use crate::kg::{FailureType, FunctionalUnit, ObjectNode};

/// A state change applied to one object during an injected failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    pub object: String,
    /// Replaces all states when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_states: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub add_states: Vec<String>,
}

impl Mutation {
    pub fn set(object: &str, states: &[&str]) -> Self {
        Mutation {
            object: object.to_string(),
            set_states: Some(states.iter().map(|s| s.to_string()).collect()),
            add_states: Vec::new(),
        }
    }

    pub fn add(object: &str, states: &[&str]) -> Self {
        Mutation {
            object: object.to_string(),
            set_states: None,
            add_states: states.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn apply(&self, world: &mut WorldState) -> Result<(), SimError> {
        let node = world
            .get(&self.object)
            .ok_or_else(|| SimError::InjectionTarget(self.object.clone()))?;
        let mut states: Vec<String> = match &self.set_states {
            Some(s) => s.clone(),
            None => node.states.clone(),
        };
        for s in &self.add_states {
            if !states.contains(s) {
                states.push(s.clone());
            }
        }
        let contents: Vec<String> = node.contains.iter().cloned().collect();
        world.put(ObjectNode::new(&self.object, &states).with_contents(&contents));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum InjectionEffect {
    /// Mutations happen instead of the unit's nominal effect.
    Replace { mutations: Vec<Mutation> },
    /// Mutations happen after the nominal effect.
    Augment { mutations: Vec<Mutation> },
}

impl InjectionEffect {
    pub(crate) fn apply(&self, world: &mut WorldState, unit: &FunctionalUnit) -> Result<(), SimError> {
        let mutations = match self {
            InjectionEffect::Replace { mutations } => mutations,
            InjectionEffect::Augment { mutations } => {
                world.apply_nominal(unit);
                mutations
            }
        };
        mutations.iter().try_for_each(|m| m.apply(world))
    }
}

/// A failure forced at one unit of the original tree. It fires on the first
/// execution of that unit only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureInjection {
    pub at_unit: usize,
    pub failure_type: FailureType,
    /// Object the default effect acts on; chosen from the unit when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Overrides the default effect for the failure type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<InjectionEffect>,
}

impl FailureInjection {
    pub fn new(at_unit: usize, failure_type: FailureType) -> Self {
        FailureInjection {
            at_unit,
            failure_type,
            target: None,
            effect: None,
        }
    }

    pub fn with_target(mut self, target: &str) -> Self {
        self.target = Some(target.to_string());
        self
    }

    /// The effect to apply when `unit` runs in `world`.
    ///
    /// Defaults:
    /// overpour and incorrect_mix mark the output (the first output holding
    /// contents, else the first output) after the nominal effect;
    /// slip leaves everything in place and marks the first input;
    /// misplaced_pour produces nothing and marks the first consumed input;
    /// collateral marks the first bystander after the nominal effect.
    pub fn resolve(&self, unit: &FunctionalUnit, world: &WorldState) -> Result<InjectionEffect, SimError> {
        if let Some(e) = &self.effect {
            return Ok(e.clone());
        }
        let marker = self
            .failure_type
            .marker_state()
            .ok_or(SimError::NoDefaultEffect(self.failure_type))?;
        let pick = |default: Option<&str>| -> Result<String, SimError> {
            self.target
                .clone()
                .or(default.map(str::to_string))
                .ok_or(SimError::NoDefaultEffect(self.failure_type))
        };
        Ok(match self.failure_type {
            FailureType::Overpour | FailureType::IncorrectMix => {
                let out = unit
                    .outputs()
                    .iter()
                    .find(|o| !o.contains.is_empty())
                    .or(unit.outputs().first())
                    .map(|o| o.name.as_str());
                InjectionEffect::Augment {
                    mutations: vec![Mutation::set(&pick(out)?, &[marker])],
                }
            }
            FailureType::Slip => InjectionEffect::Replace {
                mutations: vec![Mutation::add(&pick(unit.inputs().first().map(|i| i.name.as_str()))?, &[marker])],
            },
            FailureType::MisplacedPour => InjectionEffect::Replace {
                mutations: vec![Mutation::set(
                    &pick(unit.consumed_inputs().next().map(|i| i.name.as_str()))?,
                    &[marker],
                )],
            },
            FailureType::Collateral => {
                let touched = |n: &str| unit.inputs().iter().chain(unit.outputs()).any(|o| o.name == n);
                let bystander = world
                    .registry()
                    .iter()
                    .find(|n| !touched(n) && world.get(n).is_some())
                    .map(String::as_str);
                InjectionEffect::Augment {
                    mutations: vec![Mutation::set(&pick(bystander)?, &[marker])],
                }
            }
            FailureType::UnsafeAction | FailureType::Other => {
                return Err(SimError::NoDefaultEffect(self.failure_type))
            }
        })
    }
}
