//! Knowledge-graph retrieval of task trees.
//!
//! A request ends in one of three cases: an exact tree for the requested
//! goal, a complete tree for another dish in the same class (to be adapted
//! downstream), or no match at all.

mod chain;
mod taxonomy;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kg::state::StateSet;
use crate::kg::{normalize, FunctionalUnit, KnowledgeStore, ObjectNode, SectionIndex, TaskTree};

pub(crate) use chain::Chainer;
pub use chain::SearchLimits;
pub use taxonomy::{DishClass, DishTaxonomy, TaxonomyError, CLASS_COUNT, OTHER_LABEL};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RetrievalError {
    #[error("cycle detected through object {0:?}")]
    Cycle(String),
    #[error("backward chaining exceeded depth {0}")]
    DepthExceeded(usize),
    #[error("search budget of {0} nodes exhausted")]
    BudgetExceeded(usize),
    #[error("empty goal name")]
    EmptyGoal,
    #[error("kitchen lists object {0:?} more than once")]
    DuplicateObject(String),
}

/// Objects observed in the environment. Names are unique.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KitchenState {
    available: Vec<ObjectNode>,
}

impl KitchenState {
    /// Identical duplicates are dropped; two different nodes with one name are an error.
    pub fn new(nodes: Vec<ObjectNode>) -> Result<Self, RetrievalError> {
        let mut available: Vec<ObjectNode> = Vec::with_capacity(nodes.len());
        for node in nodes {
            match available.iter().find(|n| n.name == node.name) {
                Some(existing) if *existing == node => {}
                Some(_) => return Err(RetrievalError::DuplicateObject(node.name)),
                None => available.push(node),
            }
        }
        available.sort();
        Ok(KitchenState { available })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn objects(&self) -> &[ObjectNode] {
        &self.available
    }

    pub fn to_state(&self) -> StateSet {
        StateSet::from_nodes(&self.available)
    }

    pub fn satisfies(&self, required: &ObjectNode) -> bool {
        self.available.iter().any(|n| n.satisfies(required))
    }
}

impl From<&StateSet> for KitchenState {
    fn from(state: &StateSet) -> Self {
        KitchenState {
            available: state.nodes().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RetrievalCase {
    NoMatch,
    CategoryMatch,
    ExactMatch,
}

impl RetrievalCase {
    /// 1 = no match, 2 = same-category approximation, 3 = exact.
    pub fn number(self) -> u8 {
        match self {
            RetrievalCase::NoMatch => 1,
            RetrievalCase::CategoryMatch => 2,
            RetrievalCase::ExactMatch => 3,
        }
    }
}

impl fmt::Display for RetrievalCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Case {}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RetrievalOutcome {
    NoMatch,
    CategoryMatch { tree: TaskTree, partial_source: String },
    ExactMatch { tree: TaskTree },
}

impl RetrievalOutcome {
    pub fn case(&self) -> RetrievalCase {
        match self {
            RetrievalOutcome::NoMatch => RetrievalCase::NoMatch,
            RetrievalOutcome::CategoryMatch { .. } => RetrievalCase::CategoryMatch,
            RetrievalOutcome::ExactMatch { .. } => RetrievalCase::ExactMatch,
        }
    }

    pub fn tree(&self) -> Option<&TaskTree> {
        match self {
            RetrievalOutcome::NoMatch => None,
            RetrievalOutcome::CategoryMatch { tree, .. } | RetrievalOutcome::ExactMatch { tree } => Some(tree),
        }
    }

    pub fn partial_source(&self) -> Option<&str> {
        match self {
            RetrievalOutcome::CategoryMatch { partial_source, .. } => Some(partial_source),
            _ => None,
        }
    }
}

/// Parse `name` or `name | state,state` into a goal node.
pub fn parse_goal(spec: &str) -> Result<ObjectNode, RetrievalError> {
    let (name, states) = match spec.split_once('|') {
        Some((n, s)) => (n, s),
        None => (spec, ""),
    };
    let name = normalize(name);
    if name.is_empty() {
        return Err(RetrievalError::EmptyGoal);
    }
    let states: Vec<&str> = states.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    Ok(ObjectNode::new(&name, &states))
}

pub fn classify_dish(goal_name: &str, taxonomy: &DishTaxonomy) -> Result<DishClass, RetrievalError> {
    if goal_name.trim().is_empty() {
        return Err(RetrievalError::EmptyGoal);
    }
    Ok(taxonomy.classify_name(goal_name))
}

/// Exact task-tree retrieval over the FOON section.
pub fn search_exact(
    store: &KnowledgeStore,
    goal: &ObjectNode,
    kitchen: &KitchenState,
) -> Result<Option<TaskTree>, RetrievalError> {
    search_exact_in(store.foon(), goal, &kitchen.to_state(), SearchLimits::default())
}

pub fn search_exact_in(
    section: &SectionIndex,
    goal: &ObjectNode,
    kitchen: &StateSet,
    limits: SearchLimits,
) -> Result<Option<TaskTree>, RetrievalError> {
    let units = Chainer::new(section, kitchen, limits).for_goal(goal)?;
    Ok(units.map(|units| TaskTree::new(units, goal.clone())))
}

/// Units that make `root` executable from `state`, ending with `root`.
pub(crate) fn chain_to_root(
    section: &SectionIndex,
    root: &FunctionalUnit,
    state: &StateSet,
) -> Result<Option<Vec<FunctionalUnit>>, RetrievalError> {
    Chainer::new(section, state, SearchLimits::default()).for_root(root)
}

/// Three-case retrieval for a goal given as `name` or `name | states`.
pub fn retrieve(
    store: &KnowledgeStore,
    request_goal: &str,
    kitchen: &KitchenState,
    taxonomy: &DishTaxonomy,
) -> Result<RetrievalOutcome, RetrievalError> {
    let goal = parse_goal(request_goal)?;
    if let Some(tree) = search_exact(store, &goal, kitchen)? {
        return Ok(RetrievalOutcome::ExactMatch { tree });
    }
    let class = classify_dish(&goal.name, taxonomy)?;
    if class.is_other() {
        return Ok(RetrievalOutcome::NoMatch);
    }
    let neighbours: BTreeSet<&String> = store
        .foon()
        .output_index()
        .keys()
        .filter(|name| **name != goal.name && taxonomy.classify_name(name) == class)
        .collect();
    for name in neighbours {
        let neighbour_goal = ObjectNode::new(name, &[] as &[&str]);
        if let Some(tree) = search_exact(store, &neighbour_goal, kitchen)? {
            return Ok(RetrievalOutcome::CategoryMatch {
                tree,
                partial_source: name.clone(),
            });
        }
    }
    Ok(RetrievalOutcome::NoMatch)
}
