//! Backward chaining over a section's output index.
//!
//! The search assigns a writer to every open requirement: the kitchen, a unit
//! already in the partial tree, or a new producer. Once every requirement has
//! a writer, the chosen units are ordered by a depth-first walk over their
//! linear extensions, simulated with set propagation. Both levels backtrack,
//! so the search fails only when no tree over the section reaches the goal.

use std::collections::HashSet;

use crate::kg::state::StateSet;
use crate::kg::{FunctionalUnit, ObjectNode, SectionIndex};

use super::RetrievalError;

/// Bounds that keep malformed graphs from hanging the search.
#[derive(Debug, Clone, Copy)]
pub struct SearchLimits {
    pub max_depth: usize,
    pub max_nodes: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_depth: 64,
            max_nodes: 2_000_000,
        }
    }
}

#[derive(Clone)]
struct Req<'a> {
    /// Index of the chosen unit that reads this object; `None` for the goal.
    reader: Option<usize>,
    need: &'a ObjectNode,
    depth: usize,
}

#[derive(Clone, Default)]
struct Partial<'a> {
    chosen: Vec<&'a FunctionalUnit>,
    /// `deps[i]` lists chosen units that must run before unit `i`.
    deps: Vec<Vec<usize>>,
}

impl Partial<'_> {
    fn depends_on(&self, from: usize, target: usize) -> bool {
        let mut stack = vec![from];
        let mut seen = vec![false; self.chosen.len()];
        while let Some(n) = stack.pop() {
            if n == target {
                return true;
            }
            if std::mem::replace(&mut seen[n], true) {
                continue;
            }
            stack.extend(self.deps[n].iter().copied());
        }
        false
    }
}

pub(crate) struct Chainer<'a> {
    section: &'a SectionIndex,
    kitchen: &'a StateSet,
    goal: Option<&'a ObjectNode>,
    limits: SearchLimits,
    nodes: usize,
    cycle: Option<String>,
}

impl<'a> Chainer<'a> {
    pub(crate) fn new(section: &'a SectionIndex, kitchen: &'a StateSet, limits: SearchLimits) -> Self {
        Chainer {
            section,
            kitchen,
            goal: None,
            limits,
            nodes: 0,
            cycle: None,
        }
    }

    /// Units (dependencies first) that take the kitchen to a state satisfying `goal`.
    pub(crate) fn for_goal(mut self, goal: &'a ObjectNode) -> Result<Option<Vec<FunctionalUnit>>, RetrievalError> {
        self.goal = Some(goal);
        let pending = vec![Req {
            reader: None,
            need: goal,
            depth: 0,
        }];
        let found = self.search(pending, Partial::default())?;
        self.finish(found)
    }

    /// Units ending with `root` such that `root` becomes executable.
    pub(crate) fn for_root(mut self, root: &'a FunctionalUnit) -> Result<Option<Vec<FunctionalUnit>>, RetrievalError> {
        let partial = Partial {
            chosen: vec![root],
            deps: vec![Vec::new()],
        };
        let pending = root
            .inputs()
            .iter()
            .rev()
            .map(|need| Req {
                reader: Some(0),
                need,
                depth: 1,
            })
            .collect();
        let found = self.search(pending, partial)?;
        self.finish(found)
    }

    fn finish(self, found: Option<Vec<&FunctionalUnit>>) -> Result<Option<Vec<FunctionalUnit>>, RetrievalError> {
        match found {
            Some(units) => Ok(Some(units.into_iter().cloned().collect())),
            None => match self.cycle {
                Some(object) => Err(RetrievalError::Cycle(object)),
                None => Ok(None),
            },
        }
    }

    fn tick(&mut self) -> Result<(), RetrievalError> {
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes {
            return Err(RetrievalError::BudgetExceeded(self.limits.max_nodes));
        }
        Ok(())
    }

    fn search(
        &mut self,
        mut pending: Vec<Req<'a>>,
        partial: Partial<'a>,
    ) -> Result<Option<Vec<&'a FunctionalUnit>>, RetrievalError> {
        self.tick()?;
        let Some(req) = pending.pop() else {
            return self.linearize(&partial);
        };
        if req.depth > self.limits.max_depth {
            return Err(RetrievalError::DepthExceeded(self.limits.max_depth));
        }

        if self.kitchen.satisfies(req.need) {
            if let Some(found) = self.search(pending.clone(), partial.clone())? {
                return Ok(Some(found));
            }
        }

        for idx in 0..partial.chosen.len() {
            if !partial.chosen[idx].produces(req.need) {
                continue;
            }
            if let Some(reader) = req.reader {
                if reader == idx || partial.depends_on(idx, reader) {
                    self.cycle.get_or_insert_with(|| req.need.name.clone());
                    continue;
                }
            }
            let mut next = partial.clone();
            if let Some(reader) = req.reader {
                next.deps[reader].push(idx);
            }
            if let Some(found) = self.search(pending.clone(), next)? {
                return Ok(Some(found));
            }
        }

        let mut candidates: Vec<&'a FunctionalUnit> = self
            .section
            .producers(req.need)
            .filter(|u| !partial.chosen.iter().any(|c| c.unit_id() == u.unit_id()))
            .collect();
        // Fewest inputs missing from the kitchen first, then ascending unit id.
        candidates.sort_by_cached_key(|u| (self.kitchen.unsatisfied_inputs(u).len(), u.unit_id().clone()));

        for unit in candidates {
            let mut next = partial.clone();
            let idx = next.chosen.len();
            next.chosen.push(unit);
            next.deps.push(Vec::new());
            if let Some(reader) = req.reader {
                next.deps[reader].push(idx);
            }
            let mut next_pending = pending.clone();
            next_pending.extend(unit.inputs().iter().rev().map(|need| Req {
                reader: Some(idx),
                need,
                depth: req.depth + 1,
            }));
            if let Some(found) = self.search(next_pending, next)? {
                return Ok(Some(found));
            }
        }
        Ok(None)
    }

    /// Find an executable order of the chosen units that respects `deps`.
    fn linearize(&mut self, partial: &Partial<'a>) -> Result<Option<Vec<&'a FunctionalUnit>>, RetrievalError> {
        let n = partial.chosen.len();
        let mut rank = vec![usize::MAX; n];
        let mut next_rank = 0;
        for start in 0..n {
            postorder(partial, start, &mut rank, &mut next_rank);
        }
        let mut by_rank: Vec<usize> = (0..n).collect();
        by_rank.sort_by_key(|&i| rank[i]);

        let mut placed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut failed = HashSet::new();
        let found = self.place(partial, &by_rank, self.kitchen.clone(), &mut placed, &mut order, &mut failed)?;
        Ok(found.then(|| order.iter().map(|&i| partial.chosen[i]).collect()))
    }

    fn place(
        &mut self,
        partial: &Partial<'a>,
        by_rank: &[usize],
        state: StateSet,
        placed: &mut Vec<bool>,
        order: &mut Vec<usize>,
        failed: &mut HashSet<(Vec<bool>, StateSet)>,
    ) -> Result<bool, RetrievalError> {
        self.tick()?;
        if order.len() == by_rank.len() {
            return Ok(self.goal.is_none_or(|g| state.satisfies(g)));
        }
        let key = (placed.clone(), state);
        if failed.contains(&key) {
            return Ok(false);
        }
        let state = key.1.clone();
        for &i in by_rank {
            if placed[i] || !partial.deps[i].iter().all(|&d| placed[d]) {
                continue;
            }
            let unit = partial.chosen[i];
            if !state.can_apply(unit) {
                continue;
            }
            let mut next = state.clone();
            next.apply(unit);
            placed[i] = true;
            order.push(i);
            if self.place(partial, by_rank, next, placed, order, failed)? {
                return Ok(true);
            }
            order.pop();
            placed[i] = false;
        }
        failed.insert(key);
        Ok(false)
    }
}

fn postorder(partial: &Partial<'_>, node: usize, rank: &mut [usize], next: &mut usize) {
    if rank[node] != usize::MAX {
        return;
    }
    // Temporary mark; deps form a DAG so this never recurses into itself.
    rank[node] = usize::MAX - 1;
    for &d in &partial.deps[node] {
        postorder(partial, d, rank, next);
    }
    rank[node] = *next;
    *next += 1;
}
