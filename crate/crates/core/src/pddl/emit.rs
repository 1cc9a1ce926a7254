//! Template emission of one functional unit as a STRIPS domain and problem.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use crate::kg::state::StateSet;
use crate::kg::FunctionalUnit;

pub const ITEM_TYPE: &str = "item";
pub const STATE_TYPE: &str = "state";
pub const RESERVED: [&str; 9] = [
    "is-state", "at-hand", "exists", "and", "not", "define", "domain", "problem", "either",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("motion verb {0:?} collides with a reserved name")]
    ReservedVerb(String),
}

/// Lowercase; runs of characters outside `[a-z0-9-]` become `_`; a leading
/// non-letter gets an `x` prefix.
pub fn sanitize(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for c in name.to_lowercase().chars() {
        if c.is_ascii_alphanumeric() || c == '-' {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    if !out.starts_with(|c: char| c.is_ascii_alphabetic()) {
        out.insert(0, 'x');
    }
    out
}

fn predicates() -> Vec<PredicateDecl> {
    vec![
        PredicateDecl {
            name: "is-state".into(),
            params: vec![Typed::new("?o", ITEM_TYPE), Typed::new("?s", STATE_TYPE)],
        },
        PredicateDecl {
            name: "at-hand".into(),
            params: vec![Typed::new("?o", ITEM_TYPE)],
        },
        PredicateDecl {
            name: "exists".into(),
            params: vec![Typed::new("?o", ITEM_TYPE)],
        },
    ]
}

fn object_facts(obj: &str, states: impl IntoIterator<Item = String>) -> Vec<Atom> {
    let mut v = vec![Atom::new("exists", &[obj])];
    v.extend(states.into_iter().map(|s| Atom::new("is-state", &[obj.to_string(), s])));
    v
}

/// Action schema for `unit` as it would run from `state`.
///
/// Besides the consumed inputs, the delete list drops every state an
/// object holds in `state` or in the unit's inputs that its output node
/// does not keep, so the action mirrors set propagation.
pub fn unit_action(unit: &FunctionalUnit, state: &StateSet) -> Result<ActionSchema, EmitError> {
    let verb = sanitize(&unit.motion().verb);
    if RESERVED.contains(&verb.as_str()) {
        return Err(EmitError::ReservedVerb(unit.motion().verb.clone()));
    }
    let names: BTreeSet<&str> = unit
        .inputs()
        .iter()
        .chain(unit.outputs())
        .map(|o| o.name.as_str())
        .collect();
    let var: BTreeMap<&str, String> = names.iter().enumerate().map(|(i, n)| (*n, format!("?o{}", i + 1))).collect();
    let params = names.iter().map(|n| Typed::new(&var[n], ITEM_TYPE)).collect();

    let mut pre = Vec::new();
    for i in unit.inputs() {
        pre.extend(object_facts(&var[i.name.as_str()], i.states.iter().map(|s| sanitize(s))));
    }
    let mut add = Vec::new();
    let mut written: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for o in unit.outputs() {
        let states: BTreeSet<String> = o.states.iter().map(|s| sanitize(s)).collect();
        add.extend(object_facts(&var[o.name.as_str()], states.iter().cloned()));
        written.entry(o.name.as_str()).or_default().extend(states);
    }

    let mut old: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for i in unit.inputs() {
        old.entry(i.name.as_str()).or_default().extend(i.states.iter().map(|s| sanitize(s)));
    }
    for n in &names {
        if let Some(node) = state.get(n) {
            old.entry(n).or_default().extend(node.states.iter().map(|s| sanitize(s)));
        }
    }
    let mut del = Vec::new();
    for (name, states) in &old {
        let v = &var[name];
        match written.get(name) {
            None => del.extend(object_facts(v, states.iter().cloned())),
            Some(kept) => del.extend(
                states
                    .difference(kept)
                    .map(|s| Atom::new("is-state", &[v.clone(), s.clone()])),
            ),
        }
    }
    dedup(&mut pre);
    dedup(&mut add);
    dedup(&mut del);
    Ok(ActionSchema {
        name: verb,
        params,
        precondition: pre,
        add,
        delete: del,
    })
}

fn dedup(v: &mut Vec<Atom>) {
    let mut seen = BTreeSet::new();
    v.retain(|a| seen.insert(a.clone()));
}

fn states_of(atoms: &[Atom]) -> impl Iterator<Item = &String> {
    atoms
        .iter()
        .filter(|a| a.predicate == "is-state")
        .filter_map(|a| a.args.get(1))
}

fn same_signature(a: &ActionSchema, b: &ActionSchema) -> bool {
    a.params == b.params && a.precondition == b.precondition && a.add == b.add && a.delete == b.delete
}

/// Accumulates actions into one domain, suffixing verbs whose signatures differ.
#[derive(Debug, Clone)]
pub struct DomainEmitter {
    name: String,
    actions: Vec<ActionSchema>,
}

impl DomainEmitter {
    pub fn new(name: &str) -> Self {
        DomainEmitter {
            name: sanitize(name),
            actions: Vec::new(),
        }
    }

    /// Adds the unit's action (or finds an identical one) and returns its name.
    pub fn add_unit(&mut self, unit: &FunctionalUnit, state: &StateSet) -> Result<String, EmitError> {
        let mut action = unit_action(unit, state)?;
        let base = action.name.clone();
        let mut n = 1;
        loop {
            let candidate = if n == 1 { base.clone() } else { format!("{base}_{n}") };
            match self.actions.iter().find(|a| a.name == candidate) {
                Some(existing) if same_signature(existing, &action) => return Ok(candidate),
                Some(_) => n += 1,
                None => {
                    action.name = candidate.clone();
                    self.actions.push(action);
                    return Ok(candidate);
                }
            }
        }
    }

    pub fn finish(&self) -> StripsDomain {
        let mut constants: BTreeSet<&String> = BTreeSet::new();
        for a in &self.actions {
            constants.extend(states_of(&a.precondition));
            constants.extend(states_of(&a.add));
            constants.extend(states_of(&a.delete));
        }
        StripsDomain {
            name: self.name.clone(),
            requirements: vec![":strips".into(), ":typing".into()],
            types: vec![Typed::new(ITEM_TYPE, ROOT_TYPE), Typed::new(STATE_TYPE, ROOT_TYPE)],
            constants: constants.into_iter().map(|s| Typed::new(s, STATE_TYPE)).collect(),
            predicates: predicates(),
            actions: self.actions.clone(),
        }
    }
}

/// Problem whose init is `state` and whose goal is the unit's outputs.
pub fn unit_problem(name: &str, domain: &StripsDomain, unit: &FunctionalUnit, state: &StateSet) -> StripsProblem {
    let mut items: BTreeSet<String> = state.nodes().map(|n| sanitize(&n.name)).collect();
    items.extend(unit.inputs().iter().chain(unit.outputs()).map(|o| sanitize(&o.name)));
    let constants: BTreeSet<&String> = domain.constants.iter().map(|c| &c.name).collect();
    let mut extra_states: BTreeSet<String> = BTreeSet::new();
    let mut init = Vec::new();
    for n in state.nodes() {
        let states: Vec<String> = n.states.iter().map(|s| sanitize(s)).collect();
        extra_states.extend(states.iter().filter(|s| !constants.contains(s)).cloned());
        init.extend(object_facts(&sanitize(&n.name), states));
    }
    let mut goal = Vec::new();
    for o in unit.outputs() {
        goal.extend(object_facts(&sanitize(&o.name), o.states.iter().map(|s| sanitize(s))));
    }
    init.sort();
    dedup(&mut init);
    dedup(&mut goal);
    let mut objects: Vec<Typed> = items.iter().map(|i| Typed::new(i, ITEM_TYPE)).collect();
    objects.extend(extra_states.iter().map(|s| Typed::new(s, STATE_TYPE)));
    StripsProblem {
        name: sanitize(name),
        domain: domain.name.clone(),
        objects,
        init,
        goal,
    }
}

/// Domain and problem text for one unit run from `state`.
pub fn emit_domain_problem(unit: &FunctionalUnit, state: &StateSet) -> Result<(StripsDomain, StripsProblem), EmitError> {
    let id = unit.unit_id().as_str();
    let mut emitter = DomainEmitter::new(&format!("unit-{id}"));
    emitter.add_unit(unit, state)?;
    let domain = emitter.finish();
    let problem = unit_problem(&format!("unit-{id}-problem"), &domain, unit, state);
    Ok((domain, problem))
}
