use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::text::parse_document;
use super::{validate_unit, FailureType, FunctionalUnit, ObjectNode, ParseError, UnitId, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Foon,
    FailNet,
}

impl FromStr for Section {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "foon" => Ok(Section::Foon),
            "failnet" => Ok(Section::FailNet),
            _ => Err(StoreError::UnknownSection(s.to_string())),
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Section::Foon => "foon",
            Section::FailNet => "failnet",
        })
    }
}

/// When a FailNet strategy applies: a failure type plus the objects it concerns.
/// An empty object set matches any affected objects.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Trigger {
    pub failure_type: FailureType,
    pub objects: BTreeSet<String>,
}

impl Trigger {
    pub fn new<S: AsRef<str>>(failure_type: FailureType, objects: &[S]) -> Self {
        Trigger {
            failure_type,
            objects: objects
                .iter()
                .map(|s| super::normalize(s.as_ref()))
                .collect(),
        }
    }

    pub fn matches(&self, failure_type: FailureType, affected: &BTreeSet<String>) -> bool {
        self.failure_type == failure_type
            && (self.objects.is_empty() || self.objects.intersection(affected).next().is_some())
    }

    pub fn line(&self) -> String {
        if self.objects.is_empty() {
            format!("T {}", self.failure_type)
        } else {
            let objs: Vec<&str> = self.objects.iter().map(String::as_str).collect();
            format!("T {} | {}", self.failure_type, objs.join(","))
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown section {0:?} (expected foon or failnet)")]
    UnknownSection(String),
    #[error("unit {id} is invalid: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidUnit { id: UnitId, violations: Vec<Violation> },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    pub added: usize,
    pub skipped_duplicates: usize,
}

impl fmt::Display for MergeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "added={} skipped={}", self.added, self.skipped_duplicates)
    }
}

/// Units of one section plus the index from output object name to producers.
#[derive(Debug, Clone, Default)]
pub struct SectionIndex {
    units: BTreeMap<UnitId, FunctionalUnit>,
    output_index: BTreeMap<String, BTreeSet<UnitId>>,
}

impl SectionIndex {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn get(&self, id: &UnitId) -> Option<&FunctionalUnit> {
        self.units.get(id)
    }

    pub fn contains(&self, id: &UnitId) -> bool {
        self.units.contains_key(id)
    }

    /// Units in ascending id order.
    pub fn units(&self) -> impl Iterator<Item = &FunctionalUnit> {
        self.units.values()
    }

    pub fn output_index(&self) -> &BTreeMap<String, BTreeSet<UnitId>> {
        &self.output_index
    }

    /// Units with an output satisfying `required`, ascending by id.
    pub fn producers<'a>(&'a self, required: &'a ObjectNode) -> impl Iterator<Item = &'a FunctionalUnit> {
        self.output_index
            .get(&required.name)
            .into_iter()
            .flatten()
            .filter_map(|id| self.units.get(id))
            .filter(move |u| u.produces(required))
    }

    fn insert(&mut self, unit: FunctionalUnit) -> bool {
        let id = unit.unit_id().clone();
        if self.units.contains_key(&id) {
            return false;
        }
        for out in unit.outputs() {
            self.output_index
                .entry(out.name.clone())
                .or_default()
                .insert(id.clone());
        }
        self.units.insert(id, unit);
        true
    }
}

/// A task graph and a failure-recovery graph, kept in separate sections.
///
/// Readers may share a store freely; [`KnowledgeStore::merge`] needs `&mut`.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeStore {
    foon: SectionIndex,
    failnet: SectionIndex,
    triggers: BTreeMap<UnitId, BTreeSet<Trigger>>,
}

impl KnowledgeStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn section(&self, section: Section) -> &SectionIndex {
        match section {
            Section::Foon => &self.foon,
            Section::FailNet => &self.failnet,
        }
    }

    pub fn foon(&self) -> &SectionIndex {
        &self.foon
    }

    pub fn failnet(&self) -> &SectionIndex {
        &self.failnet
    }

    pub fn triggers(&self) -> &BTreeMap<UnitId, BTreeSet<Trigger>> {
        &self.triggers
    }

    /// Insert `units` into `section`, skipping any already present.
    /// All units are validated before anything is stored.
    pub fn merge(&mut self, units: &[FunctionalUnit], section: Section) -> Result<MergeReport, StoreError> {
        for u in units {
            let violations = validate_unit(u);
            if !violations.is_empty() {
                return Err(StoreError::InvalidUnit {
                    id: u.unit_id().clone(),
                    violations,
                });
            }
        }
        let target = match section {
            Section::Foon => &mut self.foon,
            Section::FailNet => &mut self.failnet,
        };
        let mut report = MergeReport::default();
        for u in units {
            if target.insert(u.clone()) {
                report.added += 1;
            } else {
                report.skipped_duplicates += 1;
            }
        }
        Ok(report)
    }

    /// Merge a recovery strategy into FailNet, attaching `trigger` to its
    /// last unit (the root of the strategy).
    pub fn merge_recovery(&mut self, units: &[FunctionalUnit], trigger: Trigger) -> Result<MergeReport, StoreError> {
        let report = self.merge(units, Section::FailNet)?;
        if let Some(root) = units.last() {
            self.triggers
                .entry(root.unit_id().clone())
                .or_default()
                .insert(trigger);
        }
        Ok(report)
    }

    /// Add every unit and trigger of `other`. Returns the number of new units.
    pub fn absorb(&mut self, other: &KnowledgeStore) -> usize {
        let mut added = 0;
        for u in other.foon.units() {
            added += usize::from(self.foon.insert(u.clone()));
        }
        for u in other.failnet.units() {
            added += usize::from(self.failnet.insert(u.clone()));
        }
        for (id, ts) in &other.triggers {
            self.triggers.entry(id.clone()).or_default().extend(ts.iter().cloned());
        }
        added
    }

    /// FailNet roots whose triggers match, ascending by unit id.
    pub fn matching_roots(&self, failure_type: FailureType, affected: &BTreeSet<String>) -> Vec<&FunctionalUnit> {
        self.triggers
            .iter()
            .filter(|(_, ts)| ts.iter().any(|t| t.matches(failure_type, affected)))
            .filter_map(|(id, _)| self.failnet.get(id))
            .collect()
    }

    /// Parse a store file. Empty text is an empty store.
    pub fn from_text(text: &str) -> Result<Self, StoreError> {
        let doc = match parse_document(text) {
            Ok(doc) => doc,
            Err(ParseError::EmptyInput) => return Ok(Self::new()),
            Err(e) => return Err(e.into()),
        };
        let mut store = Self::new();
        for (section, parsed) in &doc.entries {
            store.merge(std::slice::from_ref(&parsed.unit), *section)?;
            if *section == Section::FailNet {
                for t in &parsed.triggers {
                    store
                        .triggers
                        .entry(parsed.unit.unit_id().clone())
                        .or_default()
                        .insert(t.clone());
                }
            }
        }
        Ok(store)
    }

    /// Canonical store text: `[FOON]` then `[FAILNET]`, units ascending by id.
    pub fn to_text(&self) -> String {
        let mut out = String::from("[FOON]\n");
        for u in self.foon.units() {
            out.push_str(u.canonical_text());
            out.push('\n');
        }
        out.push_str("[FAILNET]\n");
        for u in self.failnet.units() {
            if let Some(ts) = self.triggers.get(u.unit_id()) {
                for t in ts {
                    out.push_str(&t.line());
                    out.push('\n');
                }
            }
            out.push_str(u.canonical_text());
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let text = std::fs::read_to_string(path).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        std::fs::write(path, self.to_text()).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{parse_subgraph, MotionNode};

    fn chain() -> Vec<FunctionalUnit> {
        parse_subgraph(
            "U\nI onion | raw\nM chop\nO onion | chopped\n\n\
             U\nI onion | chopped\nI pan | hot\nM fry\nO onion | fried\nO pan | hot\n",
        )
        .unwrap()
    }

    #[test]
    fn merge_into_empty_adds_everything() {
        let mut store = KnowledgeStore::new();
        let r = store.merge(&chain(), Section::Foon).unwrap();
        assert_eq!(r, MergeReport { added: 2, skipped_duplicates: 0 });
    }

    #[test]
    fn merge_twice_skips_all() {
        let mut store = KnowledgeStore::new();
        store.merge(&chain(), Section::Foon).unwrap();
        let r = store.merge(&chain(), Section::Foon).unwrap();
        assert_eq!(r, MergeReport { added: 0, skipped_duplicates: 2 });
    }

    #[test]
    fn reordered_duplicate_is_skipped() {
        let mut store = KnowledgeStore::new();
        store.merge(&chain(), Section::Foon).unwrap();
        let reordered = parse_subgraph("U\nI pan | hot\nI onion | chopped\nM fry\nO pan | hot\nO onion | fried\n").unwrap();
        let r = store.merge(&reordered, Section::Foon).unwrap();
        assert_eq!(r.skipped_duplicates, 1);
    }

    #[test]
    fn sections_are_separate() {
        let mut store = KnowledgeStore::new();
        store.merge(&chain(), Section::FailNet).unwrap();
        assert!(store.foon().is_empty());
        assert_eq!(store.failnet().len(), 2);
        let r = store.merge(&chain(), Section::Foon).unwrap();
        assert_eq!(r.added, 2);
    }

    #[test]
    fn index_lists_producers() {
        let mut store = KnowledgeStore::new();
        store.merge(&chain(), Section::Foon).unwrap();
        let idx = store.foon().output_index();
        assert_eq!(idx.keys().cloned().collect::<Vec<_>>(), vec!["onion", "pan"]);
        assert_eq!(idx["onion"].len(), 2);
    }

    #[test]
    fn invalid_units_are_rejected_atomically() {
        let mut store = KnowledgeStore::new();
        let bad = FunctionalUnit::new(vec![], MotionNode::new("m"), vec![ObjectNode::new("x", &[] as &[&str])]);
        let mut units = chain();
        units.push(bad);
        assert!(store.merge(&units, Section::Foon).is_err());
        assert!(store.foon().is_empty());
    }

    #[test]
    fn absorb_unions_sections_and_triggers() {
        let mut a = KnowledgeStore::new();
        a.merge(&chain(), Section::Foon).unwrap();
        let mut b = KnowledgeStore::new();
        let fix = parse_subgraph("U\nI bowl | watery\nM drain\nO bowl | empty\n").unwrap();
        b.merge_recovery(&fix, Trigger::new(FailureType::Overpour, &["bowl"])).unwrap();
        assert_eq!(a.absorb(&b), 1);
        assert_eq!(a.absorb(&b), 0);
        assert_eq!(a.foon().len(), 2);
        let affected = BTreeSet::from(["bowl".to_string()]);
        assert_eq!(a.matching_roots(FailureType::Overpour, &affected).len(), 1);
    }

    #[test]
    fn unknown_section_name() {
        assert!(matches!("kitchen".parse::<Section>(), Err(StoreError::UnknownSection(_))));
    }

    #[test]
    fn text_round_trip_keeps_triggers() {
        let mut store = KnowledgeStore::new();
        store.merge(&chain(), Section::Foon).unwrap();
        let fix = parse_subgraph("U\nI bowl | watery\nI flour | in-bag\nM add\nO bowl | with-flour\n").unwrap();
        store
            .merge_recovery(&fix, Trigger::new(FailureType::Overpour, &["bowl"]))
            .unwrap();
        let text = store.to_text();
        let back = KnowledgeStore::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.triggers().len(), 1);
        assert!(text.contains("T overpour | bowl\nU\n"));
    }

    #[test]
    fn empty_text_is_empty_store() {
        let store = KnowledgeStore::from_text("").unwrap();
        assert!(store.foon().is_empty() && store.failnet().is_empty());
        assert_eq!(store.to_text(), "[FOON]\n[FAILNET]\n");
        assert!(KnowledgeStore::from_text("[FOON]\n[FAILNET]\n").unwrap().foon().is_empty());
    }
}
