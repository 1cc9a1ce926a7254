use std::sync::OnceLock;

use regex::Regex;

use super::{CompletionProvider, CompletionRequest, FmError, PromptText};
use crate::kg::ObjectNode;
use crate::retrieval::parse_goal;

const GOAL_SYSTEM: &str = "Extract the dish the user wants as one line `name | state,state`. \
Use lowercase. Reply with that line only.";

fn make_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(?:make|cook|prepare)\s+(?:me\s+|us\s+)?(?:an?\s+|some\s+|the\s+)?([a-z][a-z\s-]*?)\s*(?:please)?\s*[.!?]*\s*$")
            .expect("valid regex")
    })
}

/// `make <dish>`, `cook <dish>` or `prepare <dish>` without a model.
pub fn extract_goal_offline(utterance: &str) -> Option<ObjectNode> {
    let caps = make_pattern().captures(utterance.trim())?;
    parse_goal(caps.get(1)?.as_str()).ok()
}

/// Ask `provider` for the goal node; without a provider only the offline
/// pattern is tried.
pub fn extract_goal(provider: Option<&dyn CompletionProvider>, utterance: &str) -> Result<ObjectNode, FmError> {
    let Some(provider) = provider else {
        return extract_goal_offline(utterance).ok_or_else(|| FmError::NoGoal(utterance.to_string()));
    };
    let prompt = PromptText::new(GOAL_SYSTEM, utterance.trim());
    let answer = provider.complete(&CompletionRequest::text(&prompt, 32))?;
    answer
        .lines()
        .map(|l| l.trim().trim_matches('`'))
        .find(|l| !l.is_empty())
        .and_then(|l| parse_goal(l).ok())
        .ok_or_else(|| FmError::NoGoal(utterance.to_string()))
}
