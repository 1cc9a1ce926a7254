//! Greedy best-first search on the FF relaxed-plan heuristic.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet, VecDeque};

use super::task::{validate_plan, FactSet, GroundedPlanningTask, Plan};

pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("task is unsolvable")]
    Unsolvable,
    #[error("node budget of {0} expansions exceeded")]
    BudgetExceeded(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveConfig {
    pub node_budget: usize,
    /// Drop steps whose removal leaves a valid plan.
    pub eliminate_redundant: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            node_budget: DEFAULT_NODE_BUDGET,
            eliminate_redundant: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub plan: Plan,
    pub expanded: usize,
    pub breadth_first: bool,
}

const UNREACHED: usize = usize::MAX;

/// FF heuristic: size of a relaxed plan extracted from the delete-relaxed
/// planning graph. `None` when the goal is relaxed-unreachable.
pub fn h_ff(task: &GroundedPlanningTask, state: &FactSet) -> Option<usize> {
    let n = task.facts.len();
    let m = task.actions.len();
    let mut fact_level = vec![UNREACHED; n];
    for f in state.iter() {
        fact_level[f] = 0;
    }
    let mut act_level = vec![UNREACHED; m];
    let mut layer = 0;
    while !task.goal.iter().all(|&g| fact_level[g] <= layer) {
        let mut grew = false;
        for (ai, a) in task.actions.iter().enumerate() {
            if act_level[ai] == UNREACHED && a.pre.iter().all(|&p| fact_level[p] <= layer) {
                act_level[ai] = layer;
                for &f in &a.add {
                    if fact_level[f] == UNREACHED {
                        fact_level[f] = layer + 1;
                        grew = true;
                    }
                }
            }
        }
        if !grew {
            return None;
        }
        layer += 1;
    }

    let top = layer;
    let mut goals: Vec<Vec<usize>> = vec![Vec::new(); top + 1];
    let mut queued = vec![false; n];
    for &g in &task.goal {
        if fact_level[g] > 0 && !std::mem::replace(&mut queued[g], true) {
            goals[fact_level[g]].push(g);
        }
    }
    let mut true_at: Vec<HashSet<usize>> = vec![HashSet::new(); top + 1];
    let mut selected = vec![false; m];
    let mut count = 0;
    for i in (1..=top).rev() {
        let mut layer_goals = std::mem::take(&mut goals[i]);
        layer_goals.sort_unstable();
        for g in layer_goals {
            if true_at[i].contains(&g) {
                continue;
            }
            let achiever = (0..m)
                .filter(|&a| act_level[a] == i - 1 && task.actions[a].add.contains(&g))
                .min_by_key(|&a| (task.actions[a].pre.iter().map(|&p| fact_level[p]).sum::<usize>(), a))
                .expect("a fact first reached at layer i has an achiever at layer i-1");
            if !std::mem::replace(&mut selected[achiever], true) {
                count += 1;
            }
            for &p in &task.actions[achiever].pre {
                let lp = fact_level[p];
                if lp > 0 && !queued[p] {
                    queued[p] = true;
                    goals[lp].push(p);
                }
            }
            true_at[i].extend(task.actions[achiever].add.iter().copied());
        }
    }
    Some(count)
}

fn trace(nodes: &[(FactSet, usize, usize)], mut node: usize) -> Plan {
    let mut steps = Vec::new();
    while node != 0 {
        let (_, parent, action) = &nodes[node];
        steps.push(*action);
        node = *parent;
    }
    steps.reverse();
    Plan::new(steps)
}

fn gbfs(task: &GroundedPlanningTask, budget: usize) -> Result<Solution, SolveError> {
    let init = task.initial_state();
    let Some(h0) = h_ff(task, &init) else {
        return breadth_first(task, budget);
    };
    let mut nodes: Vec<(FactSet, usize, usize)> = vec![(init.clone(), 0, 0)];
    let mut seen: HashSet<FactSet> = HashSet::from([init]);
    let mut open = BinaryHeap::from([Reverse((h0, 0usize))]);
    let mut expanded = 0;
    while let Some(Reverse((_, id))) = open.pop() {
        expanded += 1;
        if expanded > budget {
            return Err(SolveError::BudgetExceeded(budget));
        }
        let state = nodes[id].0.clone();
        for a in 0..task.actions.len() {
            if !task.applicable(&state, a) {
                continue;
            }
            let next = task.apply(&state, a);
            if seen.contains(&next) {
                continue;
            }
            seen.insert(next.clone());
            let goal = task.is_goal(&next);
            let h = if goal { Some(0) } else { h_ff(task, &next) };
            let Some(h) = h else { continue };
            nodes.push((next, id, a));
            let child = nodes.len() - 1;
            if goal {
                return Ok(Solution {
                    plan: trace(&nodes, child),
                    expanded,
                    breadth_first: false,
                });
            }
            open.push(Reverse((h, child)));
        }
    }
    Err(SolveError::Unsolvable)
}

/// Uninformed breadth-first search; optimal in plan length.
pub fn breadth_first(task: &GroundedPlanningTask, budget: usize) -> Result<Solution, SolveError> {
    let init = task.initial_state();
    let mut nodes: Vec<(FactSet, usize, usize)> = vec![(init.clone(), 0, 0)];
    if task.is_goal(&init) {
        return Ok(Solution {
            plan: Plan::default(),
            expanded: 0,
            breadth_first: true,
        });
    }
    let mut seen: HashSet<FactSet> = HashSet::from([init]);
    let mut queue = VecDeque::from([0usize]);
    let mut expanded = 0;
    while let Some(id) = queue.pop_front() {
        expanded += 1;
        if expanded > budget {
            return Err(SolveError::BudgetExceeded(budget));
        }
        let state = nodes[id].0.clone();
        for a in 0..task.actions.len() {
            if !task.applicable(&state, a) {
                continue;
            }
            let next = task.apply(&state, a);
            if !seen.insert(next.clone()) {
                continue;
            }
            let goal = task.is_goal(&next);
            nodes.push((next, id, a));
            if goal {
                return Ok(Solution {
                    plan: trace(&nodes, nodes.len() - 1),
                    expanded,
                    breadth_first: true,
                });
            }
            queue.push_back(nodes.len() - 1);
        }
    }
    Err(SolveError::Unsolvable)
}

fn eliminate_redundant(task: &GroundedPlanningTask, plan: Plan) -> Plan {
    let mut steps = plan.steps;
    let mut i = 0;
    while i < steps.len() {
        let mut shorter = steps.clone();
        shorter.remove(i);
        if validate_plan(&Plan::new(shorter.clone()), task).valid {
            steps = shorter;
        } else {
            i += 1;
        }
    }
    Plan::new(steps)
}

pub fn solve(task: &GroundedPlanningTask) -> Result<Plan, SolveError> {
    solve_with(task, &SolveConfig::default()).map(|s| s.plan)
}

pub fn solve_with(task: &GroundedPlanningTask, config: &SolveConfig) -> Result<Solution, SolveError> {
    if task.is_goal(&task.initial_state()) {
        return Ok(Solution {
            plan: Plan::default(),
            expanded: 0,
            breadth_first: false,
        });
    }
    let mut sol = gbfs(task, config.node_budget)?;
    if config.eliminate_redundant {
        sol.plan = eliminate_redundant(task, sol.plan);
    }
    debug_assert!(validate_plan(&sol.plan, task).valid);
    Ok(sol)
}
