use std::collections::{BTreeSet, HashMap};

use super::ast::*;
use super::parse::{check_problem, PddlError};
use super::task::{GroundAction, GroundedPlanningTask};

pub const DEFAULT_GROUNDING_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroundError {
    #[error(transparent)]
    Invalid(#[from] PddlError),
    #[error("grounding produced more than {0} actions")]
    TooManyActions(usize),
}

fn is_var(term: &str) -> bool {
    term.starts_with('?')
}

/// Whether some action could add a fact matching `atom` (variables in add
/// lists match anything).
fn addable(add_patterns: &[&Atom], atom: &[&str], predicate: &str) -> bool {
    add_patterns.iter().any(|p| {
        p.predicate == predicate
            && p.args.iter().zip(atom).all(|(pa, a)| is_var(pa) || pa == a)
    })
}

struct Binder<'a> {
    schema: &'a ActionSchema,
    candidates: Vec<Vec<&'a str>>,
    /// Precondition indexes checkable once parameter `i` is bound.
    ready: Vec<Vec<usize>>,
    init: &'a BTreeSet<(String, Vec<String>)>,
    adds: &'a [&'a Atom],
    cap: usize,
}

impl<'a> Binder<'a> {
    fn resolve(&self, term: &'a str, binding: &[&'a str]) -> &'a str {
        match self.schema.params.iter().position(|p| p.name == term) {
            Some(i) => binding[i],
            None => term,
        }
    }

    fn possible(&self, atom: &'a Atom, binding: &[&'a str]) -> bool {
        let args: Vec<&str> = atom.args.iter().map(|t| self.resolve(t, binding)).collect();
        let key = (atom.predicate.clone(), args.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        self.init.contains(&key) || addable(self.adds, &args, &atom.predicate)
    }

    fn run(&self, depth: usize, binding: &mut Vec<&'a str>, out: &mut Vec<Vec<&'a str>>) -> Result<(), GroundError> {
        if depth == self.candidates.len() {
            if out.len() >= self.cap {
                return Err(GroundError::TooManyActions(self.cap));
            }
            out.push(binding.clone());
            return Ok(());
        }
        for &c in &self.candidates[depth] {
            binding.push(c);
            if self.ready[depth]
                .iter()
                .all(|&p| self.possible(&self.schema.precondition[p], binding))
            {
                self.run(depth + 1, binding, out)?;
            }
            binding.pop();
        }
        Ok(())
    }
}

fn ground_atom(atom: &Atom, params: &[Typed], binding: &[&str]) -> (String, Vec<String>) {
    let args = atom
        .args
        .iter()
        .map(|t| match params.iter().position(|p| p.name == *t) {
            Some(i) => binding[i].to_string(),
            None => t.clone(),
        })
        .collect();
    (atom.predicate.clone(), args)
}

fn fact_label((pred, args): &(String, Vec<String>)) -> String {
    let mut s = format!("({pred}");
    for a in args {
        s.push(' ');
        s.push_str(a);
    }
    s.push(')');
    s
}

/// Exhaustive typed instantiation, keeping only actions reachable in the
/// delete relaxation from the initial state.
pub fn ground(domain: &StripsDomain, problem: &StripsProblem) -> Result<GroundedPlanningTask, GroundError> {
    ground_with_cap(domain, problem, DEFAULT_GROUNDING_CAP)
}

pub fn ground_with_cap(
    domain: &StripsDomain,
    problem: &StripsProblem,
    cap: usize,
) -> Result<GroundedPlanningTask, GroundError> {
    check_problem(problem, domain)?;
    let terms: Vec<&Typed> = domain.constants.iter().chain(&problem.objects).collect();
    let init: BTreeSet<(String, Vec<String>)> = problem
        .init
        .iter()
        .map(|a| (a.predicate.clone(), a.args.clone()))
        .collect();
    let adds: Vec<&Atom> = domain.actions.iter().flat_map(|a| &a.add).collect();

    type Fact = (String, Vec<String>);
    type Raw = (String, Vec<String>, Vec<Fact>, Vec<Fact>, Vec<Fact>);
    let mut raw: Vec<Raw> = Vec::new();
    for schema in &domain.actions {
        let candidates: Vec<Vec<&str>> = schema
            .params
            .iter()
            .map(|p| {
                let mut seen = BTreeSet::new();
                terms
                    .iter()
                    .filter(|t| domain.is_subtype(&t.ty, &p.ty) && seen.insert(t.name.as_str()))
                    .map(|t| t.name.as_str())
                    .collect()
            })
            .collect();
        let mut ready = vec![Vec::new(); schema.params.len()];
        let mut constant_pre = Vec::new();
        for (pi, atom) in schema.precondition.iter().enumerate() {
            let last = atom
                .args
                .iter()
                .filter_map(|t| schema.params.iter().position(|p| p.name == *t))
                .max();
            match last {
                Some(i) => ready[i].push(pi),
                None => constant_pre.push(pi),
            }
        }
        let binder = Binder {
            schema,
            candidates,
            ready,
            init: &init,
            adds: &adds,
            cap: cap.saturating_sub(raw.len()),
        };
        if !constant_pre.iter().all(|&p| binder.possible(&schema.precondition[p], &[])) {
            continue;
        }
        let mut bindings = Vec::new();
        binder.run(0, &mut Vec::new(), &mut bindings).map_err(|_| GroundError::TooManyActions(cap))?;
        for b in bindings {
            let g = |atoms: &[Atom]| atoms.iter().map(|a| ground_atom(a, &schema.params, &b)).collect::<Vec<_>>();
            raw.push((
                schema.name.clone(),
                b.iter().map(|s| s.to_string()).collect(),
                g(&schema.precondition),
                g(&schema.add),
                g(&schema.delete),
            ));
        }
    }

    // Relaxed reachability fixpoint.
    let mut reached: BTreeSet<&Fact> = init.iter().collect();
    let mut keep = vec![false; raw.len()];
    loop {
        let mut changed = false;
        for (i, (_, _, pre, add, _)) in raw.iter().enumerate() {
            if !keep[i] && pre.iter().all(|f| reached.contains(f)) {
                keep[i] = true;
                changed = true;
                reached.extend(add.iter());
            }
        }
        if !changed {
            break;
        }
    }

    let goal: Vec<Fact> = problem.goal.iter().map(|a| (a.predicate.clone(), a.args.clone())).collect();
    let mut universe: BTreeSet<Fact> = init.iter().cloned().collect();
    universe.extend(goal.iter().cloned());
    for (i, (_, _, pre, add, del)) in raw.iter().enumerate() {
        if keep[i] {
            universe.extend(pre.iter().chain(add).chain(del).cloned());
        }
    }
    let facts: Vec<Fact> = universe.into_iter().collect();
    let index: HashMap<&Fact, usize> = facts.iter().enumerate().map(|(i, f)| (f, i)).collect();
    let idx = |v: &[Fact]| v.iter().map(|f| index[f]).collect::<Vec<_>>();

    let actions = raw
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|((name, args, pre, add, del), _)| {
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            GroundAction::new(name, &args, &idx(pre), &idx(add), &idx(del))
        })
        .collect();
    let init_idx = idx(&init.iter().cloned().collect::<Vec<_>>());
    let goal_idx = idx(&goal);
    Ok(GroundedPlanningTask::new(facts.iter().map(fact_label).collect(), actions, init_idx, goal_idx)
        .expect("indexes come from the universe"))
}
