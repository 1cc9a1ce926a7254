use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ExampleCorpus, FmError};
use crate::kg::{serialize_subgraph, TaskTree};
use crate::retrieval::KitchenState;

pub const DEFAULT_EXAMPLE_COUNT: usize = 5;

pub const FOON_GRAMMAR: &str = "\
A task tree is a list of functional units in FOON-text.
Each unit starts with a line `U`, then one `I` line per input object,
one `M` line for the motion, one `O` line per output object, and ends with a blank line.
Object lines: `I <name> | <state>,<state> | <ingredient>;<ingredient>` (trailing fields optional).
Motion line: `M <verb> | key=value;key=value` (parameters optional).
Use only objects from the kitchen or objects produced by earlier units.
Answer with the task tree inside one ``` fenced block and nothing else.";

/// Text sent to a completion provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub system: String,
    pub user: String,
    /// `(request, FOON-text)` pairs.
    pub few_shot_examples: Vec<(String, String)>,
}

impl PromptText {
    pub fn new(system: &str, user: &str) -> Self {
        PromptText {
            system: system.to_string(),
            user: user.to_string(),
            few_shot_examples: Vec::new(),
        }
    }

    /// Single-string form; also what scripted providers match against.
    pub fn render(&self) -> String {
        let mut s = format!("[system]\n{}\n", self.system);
        for (request, tree) in &self.few_shot_examples {
            let _ = write!(s, "[example request]\n{request}\n[example response]\n```\n{tree}```\n");
        }
        let _ = writeln!(s, "[user]\n{}", self.user);
        s
    }

    /// Copy of this prompt with the rejection notice for a previous answer.
    pub fn with_feedback(&self, feedback: &str) -> Self {
        let mut p = self.clone();
        let _ = write!(
            p.user,
            "\n\nYour previous answer was rejected:\n{}\nReturn a corrected task tree.",
            feedback.trim_end()
        );
        p
    }
}

fn kitchen_block(kitchen: &KitchenState) -> String {
    if kitchen.objects().is_empty() {
        return "(nothing)\n".to_string();
    }
    kitchen
        .objects()
        .iter()
        .map(|o| format!("- {}\n", o.canonical_line()))
        .collect()
}

pub fn build_generation_prompt(
    request_goal: &str,
    kitchen: &KitchenState,
    corpus: &ExampleCorpus,
    examples: usize,
) -> Result<PromptText, FmError> {
    let few_shot = corpus.take(examples)?;
    let user = format!(
        "Kitchen objects:\n{}Goal: {}\nWrite a task tree that produces the goal.",
        kitchen_block(kitchen),
        request_goal.trim()
    );
    Ok(PromptText {
        system: FOON_GRAMMAR.to_string(),
        user,
        few_shot_examples: few_shot.to_vec(),
    })
}

/// Prompt asking the model to adapt `partial`; an empty partial falls back
/// to a generation prompt.
pub fn build_modification_prompt(
    request_goal: &str,
    partial: &TaskTree,
    kitchen: &KitchenState,
    corpus: &ExampleCorpus,
    examples: usize,
) -> Result<PromptText, FmError> {
    if partial.is_empty() {
        return build_generation_prompt(request_goal, kitchen, corpus, examples);
    }
    let user = format!(
        "Kitchen objects:\n{}Known task tree for {}:\n```\n{}```\n\
         Modify this task tree so that it produces: {}\n\
         Replace objects and steps that do not fit; keep the ones that do.",
        kitchen_block(kitchen),
        partial.goal.name,
        serialize_subgraph(&partial.units),
        request_goal.trim()
    );
    Ok(PromptText {
        system: FOON_GRAMMAR.to_string(),
        user,
        few_shot_examples: Vec::new(),
    })
}
