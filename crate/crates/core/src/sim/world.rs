use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::SimError;
use crate::kg::state::StateSet;
use crate::kg::{parse_object_line, FunctionalUnit, ObjectNode};
use crate::retrieval::KitchenState;

/// Symbolic scene: current object nodes, hazard flags and every object that
/// has ever been in view (in drawing order).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WorldState {
    objects: StateSet,
    hazards: BTreeSet<String>,
    registry: Vec<String>,
}

impl WorldState {
    pub fn new(nodes: Vec<ObjectNode>, hazards: BTreeSet<String>) -> Result<Self, SimError> {
        let mut seen = BTreeSet::new();
        for n in &nodes {
            if !seen.insert(n.name.clone()) {
                return Err(SimError::DuplicateObject(n.name.clone()));
            }
        }
        let registry = nodes.iter().map(|n| n.name.clone()).collect();
        Ok(WorldState {
            objects: StateSet::from_nodes(&nodes),
            hazards,
            registry,
        })
    }

    pub fn objects(&self) -> &StateSet {
        &self.objects
    }

    pub fn get(&self, name: &str) -> Option<&ObjectNode> {
        self.objects.get(name)
    }

    pub fn hazards(&self) -> &BTreeSet<String> {
        &self.hazards
    }

    pub fn registry(&self) -> &[String] {
        &self.registry
    }

    pub fn satisfies(&self, required: &ObjectNode) -> bool {
        self.objects.satisfies(required)
    }

    pub fn to_kitchen(&self) -> KitchenState {
        KitchenState::new(self.objects.nodes().cloned().collect()).expect("names are unique in a StateSet")
    }

    pub(crate) fn register(&mut self, name: &str) {
        if !self.registry.iter().any(|n| n == name) {
            self.registry.push(name.to_string());
        }
    }

    /// Replace or insert a node, keeping the registry in step.
    pub(crate) fn put(&mut self, node: ObjectNode) {
        self.register(&node.name);
        let mut nodes: Vec<ObjectNode> = self.objects.nodes().filter(|n| n.name != node.name).cloned().collect();
        nodes.push(node);
        self.objects = StateSet::from_nodes(&nodes);
    }

    #[cfg(test)]
    pub(crate) fn remove(&mut self, name: &str) {
        let nodes: Vec<ObjectNode> = self.objects.nodes().filter(|n| n.name != name).cloned().collect();
        self.objects = StateSet::from_nodes(&nodes);
    }

    pub(crate) fn apply_nominal(&mut self, unit: &FunctionalUnit) {
        for o in unit.outputs() {
            self.register(&o.name);
        }
        self.objects.apply(unit);
    }

    pub(crate) fn set_hazard(&mut self, flag: &str, on: bool) {
        if on {
            self.hazards.insert(flag.to_string());
        } else {
            self.hazards.remove(flag);
        }
    }
}

/// A world file: initial scene plus executor configuration.
///
/// ```text
/// bowl | flour
/// water | in-cup
/// [hazards]
/// stove_on
/// [unsafe]
/// ignite: supervised
/// [capabilities]
/// pour, stir, add
/// ```
/// An `[unsafe]` verb runs only while every listed hazard flag is set; a
/// verb with no flags is never allowed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WorldConfig {
    pub world: WorldState,
    pub unsafe_verbs: BTreeMap<String, BTreeSet<String>>,
    pub capabilities: Option<BTreeSet<String>>,
}

impl WorldConfig {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        #[derive(PartialEq)]
        enum Part {
            Objects,
            Hazards,
            Unsafe,
            Capabilities,
        }
        let mut part = Part::Objects;
        let mut nodes = Vec::new();
        let mut hazards = BTreeSet::new();
        let mut unsafe_verbs = BTreeMap::new();
        let mut capabilities: Option<BTreeSet<String>> = None;
        let bad = |line: usize, message: String| SimError::Config { line, message };
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                part = match line.to_lowercase().as_str() {
                    "[objects]" => Part::Objects,
                    "[hazards]" => Part::Hazards,
                    "[unsafe]" => Part::Unsafe,
                    "[capabilities]" => Part::Capabilities,
                    other => return Err(bad(line_no, format!("unknown section {other}"))),
                };
                if part == Part::Capabilities {
                    capabilities.get_or_insert_with(BTreeSet::new);
                }
                continue;
            }
            match part {
                Part::Objects => {
                    nodes.push(parse_object_line(line, line_no).map_err(|e| bad(line_no, e.to_string()))?);
                }
                Part::Hazards => {
                    hazards.extend(words(line));
                }
                Part::Unsafe => {
                    let (verb, flags) = line.split_once(':').unwrap_or((line, ""));
                    let verb = verb.trim().to_lowercase();
                    if verb.is_empty() || verb.contains(char::is_whitespace) {
                        return Err(bad(line_no, format!("bad unsafe verb {verb:?}")));
                    }
                    unsafe_verbs.insert(verb, words(flags).collect());
                }
                Part::Capabilities => {
                    capabilities.get_or_insert_with(BTreeSet::new).extend(words(line));
                }
            }
        }
        Ok(WorldConfig {
            world: WorldState::new(nodes, hazards)?,
            unsafe_verbs,
            capabilities,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Hazard flags `verb` needs but `world` lacks; `None` if the verb is not restricted.
    pub fn unmet_safety(&self, verb: &str, world: &WorldState) -> Option<BTreeSet<String>> {
        unmet_flags(&self.unsafe_verbs, verb, world)
    }
}

pub(crate) fn unmet_flags(
    unsafe_verbs: &BTreeMap<String, BTreeSet<String>>,
    verb: &str,
    world: &WorldState,
) -> Option<BTreeSet<String>> {
    let required = unsafe_verbs.get(verb)?;
    if required.is_empty() {
        return Some(BTreeSet::from(["never-allowed".to_string()]));
    }
    let missing: BTreeSet<String> = required.difference(world.hazards()).cloned().collect();
    (!missing.is_empty()).then_some(missing)
}

fn words(s: &str) -> impl Iterator<Item = String> + '_ {
    s.split([',', ' ', '\t'])
        .map(|w| w.trim().to_lowercase())
        .filter(|w| !w.is_empty())
}
