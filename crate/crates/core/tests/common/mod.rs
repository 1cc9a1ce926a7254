//! Independent oracles and random instance generators for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use star_core::kg::{FunctionalUnit, MotionNode, ObjectNode};
use star_core::pddl::{GroundAction, GroundedPlanningTask};

pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

/// Object name to state labels. Contents are irrelevant to satisfaction.
pub type World = BTreeMap<String, BTreeSet<String>>;

pub fn world_of(nodes: &[ObjectNode]) -> World {
    nodes
        .iter()
        .map(|n| (n.name.clone(), n.states.iter().cloned().collect()))
        .collect()
}

fn holds(world: &World, need: &ObjectNode) -> bool {
    world.get(&need.name).is_some_and(|s| need.states.iter().all(|x| s.contains(x)))
}

/// Apply `unit` if every input holds: inputs whose name is not an output
/// disappear, outputs are written over whatever had their name.
pub fn step(world: &World, unit: &FunctionalUnit) -> Option<World> {
    if !unit.inputs().iter().all(|i| holds(world, i)) {
        return None;
    }
    let mut next = world.clone();
    for i in unit.inputs() {
        if !unit.outputs().iter().any(|o| o.name == i.name) {
            next.remove(&i.name);
        }
    }
    for o in unit.outputs() {
        next.insert(o.name.clone(), o.states.iter().cloned().collect());
    }
    Some(next)
}

/// Run a tree in order; true iff every unit applies and the goal holds at the end.
pub fn simulate(units: &[FunctionalUnit], kitchen: &[ObjectNode], goal: &ObjectNode) -> bool {
    let mut w = world_of(kitchen);
    for u in units {
        match step(&w, u) {
            Some(n) => w = n,
            None => return false,
        }
    }
    holds(&w, goal)
}

/// Whether any sequence of distinct units reaches the goal, by exhaustive
/// search over (used units, world) pairs.
pub fn exhaustive_solvable(units: &[FunctionalUnit], kitchen: &[ObjectNode], goal: &ObjectNode) -> bool {
    let start = world_of(kitchen);
    type Key = (u32, Vec<(String, Vec<String>)>);
    let mut seen: HashSet<Key> = HashSet::new();
    let key = |mask: u32, w: &World| {
        (mask, w.iter().map(|(k, v)| (k.clone(), v.iter().cloned().collect())).collect::<Vec<_>>())
    };
    let mut stack = vec![(0u32, start)];
    while let Some((mask, w)) = stack.pop() {
        if holds(&w, goal) {
            return true;
        }
        if !seen.insert(key(mask, &w)) {
            continue;
        }
        for (i, u) in units.iter().enumerate() {
            if mask & (1 << i) != 0 {
                continue;
            }
            if let Some(n) = step(&w, u) {
                stack.push((mask | (1 << i), n));
            }
        }
    }
    false
}

const STATES: [&str; 3] = ["a", "b", "c"];

fn random_node<R: Rng>(rng: &mut R, name: &str, max_states: usize) -> ObjectNode {
    let k = rng.gen_range(0..=max_states);
    let states: Vec<&str> = STATES.choose_multiple(rng, k).copied().collect();
    ObjectNode::new(name, &states)
}

/// A store of at most `max_units` units over `objects` object names, a
/// kitchen and a goal.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    max_units: usize,
    objects: usize,
) -> (Vec<FunctionalUnit>, Vec<ObjectNode>, ObjectNode) {
    let names: Vec<String> = (0..objects).map(|i| format!("o{i}")).collect();
    let n_units = rng.gen_range(1..=max_units);
    let mut units = Vec::new();
    for _ in 0..n_units {
        let ni = rng.gen_range(1..=3.min(objects));
        let no = rng.gen_range(1..=2.min(objects));
        let ins: Vec<ObjectNode> = names.choose_multiple(rng, ni).map(|n| random_node(rng, n, 2)).collect();
        let outs: Vec<ObjectNode> = names.choose_multiple(rng, no).map(|n| random_node(rng, n, 2)).collect();
        let verb = ["cut", "mix", "pour", "heat"][rng.gen_range(0..4)];
        units.push(FunctionalUnit::new(ins, MotionNode::new(verb), outs));
    }
    let nk = rng.gen_range(1..=objects);
    let kitchen: Vec<ObjectNode> = names.choose_multiple(rng, nk).map(|n| random_node(rng, n, 2)).collect();
    let gname = names.choose(rng).unwrap().clone();
    let goal = ObjectNode::new(&gname, &[STATES[rng.gen_range(0..3)]]);
    (units, kitchen, goal)
}

/// Optimal plan length by breadth-first search over fact bitmasks.
pub fn bfs_optimum(task: &GroundedPlanningTask) -> Option<usize> {
    let bits = |v: &[usize]| v.iter().fold(0u64, |m, &f| m | (1 << f));
    let acts: Vec<(u64, u64, u64)> = task.actions.iter().map(|a| (bits(&a.pre), bits(&a.add), bits(&a.del))).collect();
    let goal = bits(&task.goal);
    let init = bits(&task.init);
    let mut dist = std::collections::HashMap::from([(init, 0usize)]);
    let mut queue = VecDeque::from([init]);
    while let Some(s) = queue.pop_front() {
        let d = dist[&s];
        if s & goal == goal {
            return Some(d);
        }
        for &(pre, add, del) in &acts {
            if s & pre == pre {
                let n = (s & !del) | add;
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(n) {
                    e.insert(d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    None
}

/// A random STRIPS task with at most `max_facts` facts and `max_actions`
/// actions; no delete effects when `delete_free`.
pub fn random_task<R: Rng>(rng: &mut R, max_facts: usize, max_actions: usize, delete_free: bool) -> GroundedPlanningTask {
    let n = rng.gen_range(3..=max_facts);
    let m = rng.gen_range(2..=max_actions);
    let facts: Vec<String> = (0..n).map(|i| format!("f{i}")).collect();
    let all: Vec<usize> = (0..n).collect();
    let pick = |rng: &mut R, lo: usize, hi: usize| -> Vec<usize> {
        let k = rng.gen_range(lo..=hi);
        all.choose_multiple(rng, k).copied().collect()
    };
    let actions = (0..m)
        .map(|i| {
            let pre = pick(rng, 0, 2);
            let add = pick(rng, 1, 2);
            let del = if delete_free { Vec::new() } else { pick(rng, 0, 2) };
            let name = format!("a{i}");
            GroundAction::new(&name, &[], &pre, &add, &del)
        })
        .collect();
    let init = pick(rng, 1, 3);
    let goal = pick(rng, 1, 3);
    GroundedPlanningTask::new(facts, actions, init, goal).expect("indexes in range")
}
