use std::collections::{BTreeMap, BTreeSet};

use super::render::{render_unit, RenderConfig};
use super::world::unmet_flags;
use super::{FailureInjection, SimError, WorldConfig, WorldState};
use crate::kg::FunctionalUnit;
use crate::monitor::Frame;

/// Executes units against a world: safety gate, effects, frames.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Executor {
    pub unsafe_verbs: BTreeMap<String, BTreeSet<String>>,
    pub render: RenderConfig,
}

#[derive(Debug, Clone)]
pub struct UnitExecution {
    pub world: WorldState,
    pub frames: Vec<Frame>,
}

impl Executor {
    pub fn from_config(config: &WorldConfig) -> Self {
        Executor {
            unsafe_verbs: config.unsafe_verbs.clone(),
            render: RenderConfig::default(),
        }
    }

    /// Run `unit` once. The world passed in is never modified; the safety
    /// and precondition checks happen before any effect.
    ///
    /// Motion parameters `hazard_on=<flag>` and `hazard_off=<flag>` set and
    /// clear hazard flags when the unit's nominal effect takes place.
    pub fn execute(
        &self,
        world: &WorldState,
        unit: &FunctionalUnit,
        injection: Option<&FailureInjection>,
    ) -> Result<UnitExecution, SimError> {
        let verb = &unit.motion().verb;
        if let Some(missing) = unmet_flags(&self.unsafe_verbs, verb, world) {
            return Err(SimError::Unsafe {
                verb: verb.clone(),
                missing_flags: missing,
            });
        }
        let missing = world.objects().unsatisfied_inputs(unit);
        if !missing.is_empty() {
            return Err(SimError::Precondition {
                unit_id: unit.unit_id().clone(),
                missing: missing.iter().map(|n| n.canonical_line()).collect(),
            });
        }
        let mut pre = world.clone();
        for o in unit.outputs() {
            pre.register(&o.name);
        }
        let mut post = pre.clone();
        let nominal = match injection {
            None => {
                post.apply_nominal(unit);
                true
            }
            Some(inj) => {
                let effect = inj.resolve(unit, world)?;
                effect.apply(&mut post, unit)?;
                matches!(effect, super::InjectionEffect::Augment { .. })
            }
        };
        if nominal {
            for (key, on) in [("hazard_on", true), ("hazard_off", false)] {
                if let Some(flag) = unit.motion().parameters.get(key) {
                    post.set_hazard(&flag.to_lowercase(), on);
                }
            }
        }
        let frames = render_unit(&pre, &post, &self.render);
        Ok(UnitExecution { world: post, frames })
    }
}

/// [`Executor::execute`] with no unsafe verbs and default rendering.
pub fn execute_unit(
    world: &WorldState,
    unit: &FunctionalUnit,
    injection: Option<&FailureInjection>,
) -> Result<UnitExecution, SimError> {
    Executor::default().execute(world, unit, injection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{parse_subgraph, FailureType, ObjectNode};

    fn world() -> WorldState {
        WorldConfig::parse("water | in-cup\nbowl | flour\ncoffee cup | upright\nstove | off\n").unwrap().world
    }

    fn unit(text: &str) -> FunctionalUnit {
        parse_subgraph(text).unwrap().remove(0)
    }

    const POUR: &str = "U\nI water | in-cup\nI bowl | flour\nM pour\nO bowl | batter | flour;water\n";

    #[test]
    fn nominal_pour() {
        let out = execute_unit(&world(), &unit(POUR), None).unwrap();
        assert!(out.world.satisfies(&ObjectNode::new("bowl", &["batter"])));
        assert!(out.world.get("water").is_none());
        assert_eq!(out.frames.len(), 13);
    }

    #[test]
    fn overpour_and_collateral() {
        let w = world();
        let out = execute_unit(&w, &unit(POUR), Some(&FailureInjection::new(0, FailureType::Overpour))).unwrap();
        assert_eq!(out.world.get("bowl").unwrap().states, vec!["watery"]);
        let inj = FailureInjection::new(0, FailureType::Collateral).with_target("coffee cup");
        let out = execute_unit(&w, &unit(POUR), Some(&inj)).unwrap();
        assert!(out.world.get("coffee cup").unwrap().has_state("knocked-over"));
    }

    #[test]
    fn precondition_names_the_object() {
        let u = unit("U\nI milk | cold\nM pour\nO glass | milk\n");
        match execute_unit(&world(), &u, None) {
            Err(SimError::Precondition { missing, .. }) => assert_eq!(missing, vec!["milk | cold"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unsafe_verb_is_blocked_before_mutation() {
        let cfg = WorldConfig::parse("stove | off\n[unsafe]\nignite: supervised\n").unwrap();
        let ex = Executor::from_config(&cfg);
        let u = unit("U\nI stove | off\nM ignite | hazard_on=stove_on\nO stove | on\n");
        assert!(matches!(ex.execute(&cfg.world, &u, None), Err(SimError::Unsafe { .. })));

        let mut w = cfg.world.clone();
        w.set_hazard("supervised", true);
        let out = ex.execute(&w, &u, None).unwrap();
        assert!(out.world.hazards().contains("stove_on"));
        let off = unit("U\nI stove | on\nM turn-off | hazard_off=stove_on\nO stove | off\n");
        assert!(!ex.execute(&out.world, &off, None).unwrap().world.hazards().contains("stove_on"));
    }
}
