use super::ast::{StripsDomain, StripsProblem};
use super::emit::{emit_domain_problem, EmitError};
use super::ground::{ground, GroundError};
use super::parse::{parse_domain, parse_problem};
use super::solve::{solve, SolveError};
use super::task::{validate_plan, GroundedPlanningTask, Plan};
use crate::fm::{CompletionProvider, CompletionRequest, PromptText};
use crate::kg::state::StateSet;
use crate::kg::{FunctionalUnit, TaskTree, UnitId};
use crate::retrieval::KitchenState;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileFailure {
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unit {unit_id}: {failure}")]
pub struct CompileError {
    pub unit_id: UnitId,
    pub failure: CompileFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmissionSource {
    Template,
    Provider,
}

#[derive(Debug, Clone)]
pub struct CompiledUnit {
    pub unit_id: UnitId,
    pub domain: StripsDomain,
    pub problem: StripsProblem,
    pub task: GroundedPlanningTask,
    pub plan: Plan,
    pub source: EmissionSource,
}

impl CompiledUnit {
    pub fn plan_text(&self) -> String {
        self.plan.to_text(&self.task)
    }
}

const PDDL_SYSTEM: &str = "Convert the functional unit into a PDDL domain and problem using only \
:strips and :typing. Reply with two ``` fenced blocks: the domain first, then the problem.";

fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(b) => blocks.push(b),
                None => current = Some(String::new()),
            }
        } else if let Some(b) = current.as_mut() {
            b.push_str(line);
            b.push('\n');
        }
    }
    blocks
}

/// Provider emission: accepted only if both files parse and the solved plan validates.
fn provider_emission(
    provider: &dyn CompletionProvider,
    unit: &FunctionalUnit,
    state: &StateSet,
    template: &(StripsDomain, StripsProblem),
) -> Option<(StripsDomain, StripsProblem, GroundedPlanningTask, Plan)> {
    let kitchen: String = state.nodes().map(|n| format!("- {}\n", n.canonical_line())).collect();
    let mut prompt = PromptText::new(
        PDDL_SYSTEM,
        &format!("Kitchen objects:\n{kitchen}Functional unit:\n```\n{}```", unit.canonical_text()),
    );
    prompt
        .few_shot_examples
        .push(("Output format".to_string(), format!("{}\n{}", template.0, template.1)));
    let answer = provider.complete(&CompletionRequest::text(&prompt, 2048)).ok()?;
    let blocks = fenced_blocks(&answer);
    let domain = parse_domain(blocks.first()?).ok()?;
    let problem = parse_problem(blocks.get(1)?, &domain).ok()?;
    let task = ground(&domain, &problem).ok()?;
    let plan = solve(&task).ok()?;
    validate_plan(&plan, &task).valid.then_some((domain, problem, task, plan))
}

/// Compile and solve each unit in order, threading the state forward.
pub fn compile_tree(tree: &TaskTree, kitchen: &KitchenState) -> Result<Vec<CompiledUnit>, CompileError> {
    compile_tree_with(tree, kitchen, None)
}

/// As [`compile_tree`]; with a provider, its emission is tried first and
/// the templates are the fallback.
pub fn compile_tree_with(
    tree: &TaskTree,
    kitchen: &KitchenState,
    provider: Option<&dyn CompletionProvider>,
) -> Result<Vec<CompiledUnit>, CompileError> {
    let mut state = kitchen.to_state();
    let mut out = Vec::with_capacity(tree.len());
    for unit in &tree.units {
        let err = |failure: CompileFailure| CompileError {
            unit_id: unit.unit_id().clone(),
            failure,
        };
        let template = emit_domain_problem(unit, &state).map_err(|e| err(e.into()))?;
        let from_provider = provider.and_then(|p| provider_emission(p, unit, &state, &template));
        let compiled = match from_provider {
            Some((domain, problem, task, plan)) => CompiledUnit {
                unit_id: unit.unit_id().clone(),
                domain,
                problem,
                task,
                plan,
                source: EmissionSource::Provider,
            },
            None => {
                let (domain, problem) = template;
                let task = ground(&domain, &problem).map_err(|e| err(e.into()))?;
                let plan = solve(&task).map_err(|e| err(e.into()))?;
                CompiledUnit {
                    unit_id: unit.unit_id().clone(),
                    domain,
                    problem,
                    task,
                    plan,
                    source: EmissionSource::Template,
                }
            }
        };
        state.apply(unit);
        out.push(compiled);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fm::ScriptedProvider;
    use crate::kg::{parse_subgraph, ObjectNode};

    const CHAIN: &str = "U\nI potato | raw\nI knife | clean\nM chop\nO potato | chopped\nO knife | dirty\n\n\
                         U\nI potato | chopped\nI pot | water\nM boil\nO potato | cooked\nO pot | used\n\n\
                         U\nI potato | cooked\nI plate | clean\nM plate\nO plate | served | potato\n";

    fn kitchen() -> KitchenState {
        KitchenState::new(vec![
            ObjectNode::new("potato", &["raw"]),
            ObjectNode::new("knife", &["clean"]),
            ObjectNode::new("pot", &["water"]),
            ObjectNode::new("plate", &["clean"]),
        ])
        .unwrap()
    }

    #[test]
    fn chain_compiles_to_valid_plans() {
        let tree = TaskTree::from_units(parse_subgraph(CHAIN).unwrap()).unwrap();
        let out = compile_tree(&tree, &kitchen()).unwrap();
        assert_eq!(out.len(), 3);
        for c in &out {
            assert!(validate_plan(&c.plan, &c.task).valid);
            assert_eq!(c.plan.len(), 1);
            assert_eq!(c.source, EmissionSource::Template);
        }
        assert_eq!(out[0].plan_text(), "(chop knife potato)\n");
    }

    #[test]
    fn empty_tree() {
        let tree = TaskTree::new(vec![], ObjectNode::new("x", &[] as &[&str]));
        assert!(compile_tree(&tree, &kitchen()).unwrap().is_empty());
    }

    #[test]
    fn unsolvable_middle_unit_is_named() {
        let mut units = parse_subgraph(CHAIN).unwrap();
        units[1] = parse_subgraph("U\nI potato | chopped\nI kettle | hot\nM boil\nO potato | cooked\n").unwrap().remove(0);
        let middle = units[1].unit_id().clone();
        let tree = TaskTree::from_units(units).unwrap();
        let err = compile_tree(&tree, &kitchen()).unwrap_err();
        assert_eq!(err.unit_id, middle);
        assert_eq!(err.failure, CompileFailure::Solve(SolveError::Unsolvable));
    }

    #[test]
    fn provider_output_falls_back_when_unusable() {
        let tree = TaskTree::from_units(parse_subgraph(CHAIN).unwrap()).unwrap();
        let p = ScriptedProvider::always("```\n(define (domain broken\n```\n```\n```");
        let out = compile_tree_with(&tree, &kitchen(), Some(&p)).unwrap();
        assert!(out.iter().all(|c| c.source == EmissionSource::Template));
        assert_eq!(p.call_count(), 3);
    }

    #[test]
    fn provider_output_is_used_when_it_validates() {
        let unit = parse_subgraph("U\nI potato | raw\nI knife | clean\nM chop\nO potato | chopped\nO knife | dirty\n").unwrap();
        let tree = TaskTree::from_units(unit).unwrap();
        let (d, p) = emit_domain_problem(&tree.units[0], &kitchen().to_state()).unwrap();
        let answer = format!("```\n{d}```\n```\n{p}```\n");
        let provider = ScriptedProvider::always(&answer);
        let out = compile_tree_with(&tree, &kitchen(), Some(&provider)).unwrap();
        assert_eq!(out[0].source, EmissionSource::Provider);
    }
}
