//! Set-propagation semantics for task trees.
//!
//! A state maps each object name to its current node. Applying a unit removes
//! the consumed inputs and writes every output (replacing whatever node had
//! that name).

use std::collections::BTreeMap;

use super::{FunctionalUnit, ObjectNode};

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateSet {
    objects: BTreeMap<String, ObjectNode>,
}

impl StateSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Later nodes replace earlier ones with the same name.
    pub fn from_nodes<'a>(nodes: impl IntoIterator<Item = &'a ObjectNode>) -> Self {
        let mut s = Self::new();
        for n in nodes {
            s.objects.insert(n.name.clone(), n.clone());
        }
        s
    }

    pub fn get(&self, name: &str) -> Option<&ObjectNode> {
        self.objects.get(name)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ObjectNode> {
        self.objects.values()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn satisfies(&self, required: &ObjectNode) -> bool {
        self.objects
            .get(&required.name)
            .is_some_and(|n| n.satisfies(required))
    }

    pub fn unsatisfied_inputs<'u>(&self, unit: &'u FunctionalUnit) -> Vec<&'u ObjectNode> {
        unit.inputs().iter().filter(|i| !self.satisfies(i)).collect()
    }

    pub fn can_apply(&self, unit: &FunctionalUnit) -> bool {
        unit.inputs().iter().all(|i| self.satisfies(i))
    }

    /// Apply effects without checking preconditions.
    pub fn apply(&mut self, unit: &FunctionalUnit) {
        for consumed in unit.consumed_inputs() {
            self.objects.remove(&consumed.name);
        }
        for out in unit.outputs() {
            self.objects.insert(out.name.clone(), out.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::parse_subgraph;

    #[test]
    fn apply_consumes_and_writes() {
        let unit = &parse_subgraph("U\nI water | in-cup\nI bowl | empty\nM pour\nO bowl | with-water\n").unwrap()[0];
        let mut s = StateSet::from_nodes(&[
            ObjectNode::new("water", &["in-cup"]),
            ObjectNode::new("bowl", &["empty", "clean"]),
        ]);
        assert!(s.can_apply(unit));
        s.apply(unit);
        assert!(s.get("water").is_none());
        assert_eq!(s.get("bowl").unwrap().states, vec!["with-water"]);
    }
}
