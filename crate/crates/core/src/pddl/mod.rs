//! STRIPS compilation of functional units, a PDDL subset reader, grounding
//! and an FF-style forward planner.

mod ast;
mod compile;
mod emit;
mod ground;
mod parse;
mod solve;
mod task;

pub use ast::{ActionSchema, Atom, PredicateDecl, StripsDomain, StripsProblem, Typed, ROOT_TYPE};
pub use compile::{compile_tree, compile_tree_with, CompileError, CompileFailure, CompiledUnit, EmissionSource};
pub use emit::{emit_domain_problem, sanitize, unit_action, unit_problem, DomainEmitter, EmitError, ITEM_TYPE, STATE_TYPE};
pub use ground::{ground, ground_with_cap, GroundError, DEFAULT_GROUNDING_CAP};
pub use parse::{check_problem, parse_domain, parse_pddl, parse_problem, PddlError, PddlFile, Pos};
pub use solve::{breadth_first, h_ff, solve, solve_with, SolveConfig, SolveError, Solution, DEFAULT_NODE_BUDGET};
pub use task::{validate_plan, FactSet, GroundAction, GroundedPlanningTask, Plan, PlanValidation, TaskError};
