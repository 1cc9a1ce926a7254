use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kg::state::StateSet;
use crate::kg::{validate_unit, ObjectNode, TaskTree};
use crate::retrieval::KitchenState;

/// Outcome of checking a tree by set propagation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub valid: bool,
    pub missing_objects: BTreeSet<String>,
    pub unreachable_goal: bool,
    pub syntax_violations: Vec<String>,
}

impl VerificationReport {
    pub(crate) fn syntax(violation: String) -> Self {
        VerificationReport {
            valid: false,
            syntax_violations: vec![violation],
            ..Self::default()
        }
    }

    /// Multi-line text suitable for feeding back to a model.
    pub fn feedback(&self) -> String {
        let mut s = String::new();
        for v in &self.syntax_violations {
            s.push_str(&format!("syntax: {v}\n"));
        }
        if !self.missing_objects.is_empty() {
            let names: Vec<&str> = self.missing_objects.iter().map(String::as_str).collect();
            s.push_str(&format!(
                "missing objects (not in the kitchen and not produced earlier): {}\n",
                names.join(", ")
            ));
        }
        if self.unreachable_goal {
            s.push_str("the goal is not produced by the last step\n");
        }
        s
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.valid {
            return f.write_str("valid");
        }
        let fb = self.feedback();
        f.write_str(fb.trim_end().replace('\n', "; ").as_str())
    }
}

pub fn verify_tree(tree: &TaskTree, kitchen: &KitchenState, goal: &ObjectNode) -> VerificationReport {
    verify_tree_with(tree, kitchen, goal, None)
}

/// Like [`verify_tree`], also rejecting verbs outside `capabilities`.
///
/// Propagation continues past unsatisfied inputs so that every missing
/// object is reported.
pub fn verify_tree_with(
    tree: &TaskTree,
    kitchen: &KitchenState,
    goal: &ObjectNode,
    capabilities: Option<&BTreeSet<String>>,
) -> VerificationReport {
    let mut report = VerificationReport::default();
    let mut state: StateSet = kitchen.to_state();
    for (i, unit) in tree.units.iter().enumerate() {
        for v in validate_unit(unit) {
            report.syntax_violations.push(format!("unit {}: {v}", i + 1));
        }
        if let Some(caps) = capabilities {
            if !caps.contains(&unit.motion().verb) {
                report
                    .syntax_violations
                    .push(format!("unit {}: motion {:?} is not a robot capability", i + 1, unit.motion().verb));
            }
        }
        for missing in state.unsatisfied_inputs(unit) {
            report.missing_objects.insert(missing.name.clone());
        }
        state.apply(unit);
    }
    report.unreachable_goal = !state.satisfies(goal);
    report.valid = report.missing_objects.is_empty() && !report.unreachable_goal && report.syntax_violations.is_empty();
    report
}
