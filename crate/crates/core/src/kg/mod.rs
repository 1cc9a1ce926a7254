//! Functional-unit knowledge graphs.
//!
//! A functional unit is one manipulation action: a set of input objects, a
//! motion, and a set of output objects. Units are content addressed: their
//! identity is the digest of a canonical text form in which inputs, outputs
//! and state labels are sorted, so reordering never creates a new unit.
//!
//! The knowledge store keeps two graphs side by side: the task graph
//! (`[FOON]`) and the failure-recovery graph (`[FAILNET]`).

mod failure;
pub mod state;
mod store;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use failure::{FailureType, ParseFailureTypeError};
pub use store::{KnowledgeStore, MergeReport, Section, SectionIndex, StoreError, Trigger};
pub use text::{
    parse_document, parse_object_line, parse_subgraph, parse_subgraph_at, serialize_subgraph, Document, ParseError,
    ParsedUnit,
};

/// Content-derived identifier of a functional unit: the first 16 hex chars
/// of the SHA-256 of its canonical text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitId(String);

impl UnitId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn of(canonical: &str) -> Self {
        let digest = Sha256::digest(canonical.as_bytes());
        UnitId(hex::encode(digest)[..16].to_string())
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UnitId {
    fn from(s: &str) -> Self {
        UnitId(s.to_string())
    }
}

/// An object together with the state labels it carries.
///
/// Names, states and ingredients are lowercased on construction. States are
/// kept sorted; duplicates are preserved so that validation can report them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectNode {
    pub name: String,
    pub states: Vec<String>,
    #[serde(default)]
    pub contains: BTreeSet<String>,
}

impl ObjectNode {
    pub fn new<S: AsRef<str>>(name: &str, states: &[S]) -> Self {
        let mut states: Vec<String> = states.iter().map(|s| normalize(s.as_ref())).collect();
        states.sort();
        ObjectNode {
            name: normalize(name),
            states,
            contains: BTreeSet::new(),
        }
    }

    pub fn with_contents<S: AsRef<str>>(mut self, contents: &[S]) -> Self {
        self.contains = contents.iter().map(|s| normalize(s.as_ref())).collect();
        self
    }

    /// True iff `self` names the same object and carries every state in `required`.
    pub fn satisfies(&self, required: &ObjectNode) -> bool {
        self.name == required.name && required.states.iter().all(|s| self.states.contains(s))
    }

    pub fn has_state(&self, state: &str) -> bool {
        self.states.iter().any(|s| s == state)
    }

    /// The `name | states | contents` body used in FOON-text object lines.
    pub fn canonical_line(&self) -> String {
        let mut states = self.states.clone();
        states.sort();
        let mut line = self.name.clone();
        if !states.is_empty() || !self.contains.is_empty() {
            line.push_str(" | ");
            line.push_str(&states.join(","));
        }
        if !self.contains.is_empty() {
            line.push_str(" | ");
            line.push_str(&self.contains.iter().cloned().collect::<Vec<_>>().join(";"));
        }
        line
    }

    fn sort_states(&mut self) {
        self.states.sort();
    }
}

impl PartialEq for ObjectNode {
    fn eq(&self, other: &Self) -> bool {
        self.canonical_line() == other.canonical_line()
    }
}

impl Eq for ObjectNode {}

impl Hash for ObjectNode {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical_line().hash(state);
    }
}

impl PartialOrd for ObjectNode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ObjectNode {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.canonical_line().cmp(&other.canonical_line())
    }
}

impl fmt::Display for ObjectNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_line())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotionNode {
    pub verb: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
}

impl MotionNode {
    pub fn new(verb: &str) -> Self {
        MotionNode {
            verb: normalize(verb),
            parameters: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: &str) -> Self {
        self.parameters
            .insert(key.trim().to_lowercase(), value.trim().to_string());
        self
    }

    pub fn canonical_line(&self) -> String {
        if self.parameters.is_empty() {
            return self.verb.clone();
        }
        let params: Vec<String> = self
            .parameters
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("{} | {}", self.verb, params.join(";"))
    }
}

/// One action: inputs, a motion, outputs.
///
/// Construction canonicalizes ordering and fixes the unit id; the value is
/// immutable afterwards. Equality and hashing follow the canonical text.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "RawUnit", into = "RawUnit")]
pub struct FunctionalUnit {
    inputs: Vec<ObjectNode>,
    motion: MotionNode,
    outputs: Vec<ObjectNode>,
    canonical: String,
    id: UnitId,
}

#[derive(Serialize, Deserialize)]
struct RawUnit {
    inputs: Vec<ObjectNode>,
    motion: MotionNode,
    outputs: Vec<ObjectNode>,
}

impl From<RawUnit> for FunctionalUnit {
    fn from(raw: RawUnit) -> Self {
        FunctionalUnit::new(raw.inputs, raw.motion, raw.outputs)
    }
}

impl From<FunctionalUnit> for RawUnit {
    fn from(unit: FunctionalUnit) -> Self {
        RawUnit {
            inputs: unit.inputs,
            motion: unit.motion,
            outputs: unit.outputs,
        }
    }
}

impl FunctionalUnit {
    pub fn new(
        mut inputs: Vec<ObjectNode>,
        motion: MotionNode,
        mut outputs: Vec<ObjectNode>,
    ) -> Self {
        for node in inputs.iter_mut().chain(outputs.iter_mut()) {
            node.sort_states();
        }
        inputs.sort_by_key(|n| n.canonical_line());
        outputs.sort_by_key(|n| n.canonical_line());

        let mut canonical = String::from("U\n");
        for node in &inputs {
            canonical.push_str("I ");
            canonical.push_str(&node.canonical_line());
            canonical.push('\n');
        }
        canonical.push_str("M ");
        canonical.push_str(&motion.canonical_line());
        canonical.push('\n');
        for node in &outputs {
            canonical.push_str("O ");
            canonical.push_str(&node.canonical_line());
            canonical.push('\n');
        }
        let id = UnitId::of(&canonical);
        FunctionalUnit {
            inputs,
            motion,
            outputs,
            canonical,
            id,
        }
    }

    pub fn inputs(&self) -> &[ObjectNode] {
        &self.inputs
    }

    pub fn motion(&self) -> &MotionNode {
        &self.motion
    }

    pub fn outputs(&self) -> &[ObjectNode] {
        &self.outputs
    }

    pub fn unit_id(&self) -> &UnitId {
        &self.id
    }

    /// The canonical FOON-text block (no trailing blank line).
    pub fn canonical_text(&self) -> &str {
        &self.canonical
    }

    /// Inputs that do not reappear (by name) among the outputs.
    pub fn consumed_inputs(&self) -> impl Iterator<Item = &ObjectNode> {
        self.inputs
            .iter()
            .filter(|i| !self.outputs.iter().any(|o| o.name == i.name))
    }

    pub fn produces(&self, required: &ObjectNode) -> bool {
        self.outputs.iter().any(|o| o.satisfies(required))
    }
}

impl PartialEq for FunctionalUnit {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}

impl Eq for FunctionalUnit {}

impl Hash for FunctionalUnit {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical.hash(state);
    }
}

impl fmt::Display for FunctionalUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

/// True iff the canonical serializations are byte-identical.
pub fn unit_equals(a: &FunctionalUnit, b: &FunctionalUnit) -> bool {
    a.canonical_text() == b.canonical_text()
}

/// A single broken invariant found by [`validate_unit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn violation(field: impl Into<String>, rule: impl Into<String>) -> Violation {
    Violation {
        field: field.into(),
        rule: rule.into(),
    }
}

/// Check every structural invariant of a unit. An empty list means valid.
pub fn validate_unit(unit: &FunctionalUnit) -> Vec<Violation> {
    let mut out = Vec::new();
    if unit.inputs.is_empty() {
        out.push(violation("inputs", "non-empty required"));
    }
    if unit.outputs.is_empty() {
        out.push(violation("outputs", "non-empty required"));
    }
    if unit.motion.verb.is_empty() {
        out.push(violation("motion.verb", "non-empty required"));
    } else if !is_clean_token(&unit.motion.verb, &['|', ' ']) {
        out.push(violation("motion.verb", "must be a single identifier"));
    }
    for (k, v) in &unit.motion.parameters {
        if k.is_empty() || !is_clean_token(k, &['|', '=', ';']) {
            out.push(violation("motion.parameters", format!("bad key {k:?}")));
        }
        if !is_clean_token(v, &['|', ';']) {
            out.push(violation("motion.parameters", format!("bad value for {k:?}")));
        }
    }
    for (label, nodes) in [("inputs", &unit.inputs), ("outputs", &unit.outputs)] {
        for (i, node) in nodes.iter().enumerate() {
            let field = format!("{label}[{i}]");
            if node.name.is_empty() {
                out.push(violation(format!("{field}.name"), "non-empty required"));
            } else if !is_clean_token(&node.name, &['|']) {
                out.push(violation(
                    format!("{field}.name"),
                    "no control characters or '|'",
                ));
            }
            let mut seen = BTreeSet::new();
            for s in &node.states {
                if s.is_empty() || !is_clean_token(s, &['|', ',']) {
                    out.push(violation(format!("{field}.states"), format!("bad label {s:?}")));
                }
                if !seen.insert(s) {
                    out.push(violation(
                        format!("{field}.states"),
                        format!("duplicate label {s:?}"),
                    ));
                }
            }
            for c in &node.contains {
                if c.is_empty() || !is_clean_token(c, &['|', ';']) {
                    out.push(violation(format!("{field}.contains"), format!("bad name {c:?}")));
                }
            }
        }
    }
    out
}

fn is_clean_token(s: &str, forbidden: &[char]) -> bool {
    !s.chars().any(|c| c.is_control() || forbidden.contains(&c) || c == '#')
}

pub(crate) fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

/// An ordered sequence of units leading to `goal`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTree {
    pub units: Vec<FunctionalUnit>,
    pub goal: ObjectNode,
}

impl TaskTree {
    pub fn new(units: Vec<FunctionalUnit>, goal: ObjectNode) -> Self {
        TaskTree { units, goal }
    }

    /// Build a tree whose goal is the first output of its last unit.
    pub fn from_units(units: Vec<FunctionalUnit>) -> Option<Self> {
        let goal = units.last()?.outputs().first()?.clone();
        Some(TaskTree { units, goal })
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn unit_ids(&self) -> Vec<UnitId> {
        self.units.iter().map(|u| u.unit_id().clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pour() -> FunctionalUnit {
        FunctionalUnit::new(
            vec![
                ObjectNode::new("water", &["in-cup"]),
                ObjectNode::new("bowl", &["empty"]),
            ],
            MotionNode::new("pour"),
            vec![ObjectNode::new("bowl", &["with-water"]).with_contents(&["water"])],
        )
    }

    #[test]
    fn unit_id_is_sixteen_hex_chars() {
        let id = pour().unit_id().clone();
        assert_eq!(id.as_str().len(), 16);
        assert!(id.as_str().chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn reordered_inputs_are_equal() {
        let a = pour();
        let b = FunctionalUnit::new(
            vec![
                ObjectNode::new("bowl", &["empty"]),
                ObjectNode::new("water", &["in-cup"]),
            ],
            MotionNode::new("pour"),
            vec![ObjectNode::new("bowl", &["with-water"]).with_contents(&["water"])],
        );
        assert!(unit_equals(&a, &b));
        assert_eq!(a.unit_id(), b.unit_id());
    }

    #[test]
    fn different_verbs_differ() {
        let a = pour();
        let b = FunctionalUnit::new(
            a.inputs().to_vec(),
            MotionNode::new("mix"),
            a.outputs().to_vec(),
        );
        assert!(!unit_equals(&a, &b));
    }

    #[test]
    fn case_is_folded() {
        let a = ObjectNode::new("Bowl", &["EMPTY"]);
        assert_eq!(a.name, "bowl");
        assert_eq!(a.states, vec!["empty"]);
    }

    #[test]
    fn validate_well_formed() {
        assert!(validate_unit(&pour()).is_empty());
    }

    #[test]
    fn validate_empty_outputs() {
        let u = FunctionalUnit::new(pour().inputs().to_vec(), MotionNode::new("pour"), vec![]);
        let v = validate_unit(&u);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "outputs: non-empty required");
    }

    #[test]
    fn validate_duplicate_states() {
        let u = FunctionalUnit::new(
            vec![ObjectNode::new("onion", &["whole", "whole"])],
            MotionNode::new("cut"),
            vec![ObjectNode::new("onion", &["sliced"])],
        );
        let v = validate_unit(&u);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "inputs[0].states");
    }

    #[test]
    fn consumed_inputs_follow_names() {
        let u = pour();
        let consumed: Vec<_> = u.consumed_inputs().map(|n| n.name.as_str()).collect();
        assert_eq!(consumed, vec!["water"]);
    }
}
