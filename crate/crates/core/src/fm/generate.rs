use super::{
    build_generation_prompt, build_modification_prompt, verify_tree, CompletionProvider, CompletionRequest,
    ExampleCorpus, FmError, PromptText, VerificationReport, DEFAULT_EXAMPLE_COUNT,
};
use crate::kg::{parse_subgraph_at, FunctionalUnit, TaskTree};
use crate::retrieval::{parse_goal, KitchenState, RetrievalOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateConfig {
    pub examples: usize,
    pub retry_limit: usize,
    pub max_tokens: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            examples: DEFAULT_EXAMPLE_COUNT,
            retry_limit: 3,
            max_tokens: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub tree: TaskTree,
    pub attempts: usize,
}

fn is_unit_line(line: &str) -> bool {
    line.trim() == "U"
}

fn is_foon_line(line: &str) -> bool {
    let t = line.trim();
    t.is_empty()
        || t == "U"
        || t.starts_with('#')
        || t.starts_with('[')
        || ["I ", "O ", "M ", "T "].iter().any(|p| t.starts_with(p))
        || matches!(t, "I" | "O" | "M" | "T")
}

/// The first FOON-text block in `text` and the 1-based line it starts on.
fn extract_block(text: &str) -> Option<(String, usize)> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim_start().starts_with("```") {
            let start = i + 1;
            let end = (start..lines.len())
                .find(|&j| lines[j].trim_start().starts_with("```"))
                .unwrap_or(lines.len());
            if lines[start..end].iter().any(|l| is_unit_line(l)) {
                return Some((lines[start..end].join("\n") + "\n", start + 1));
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }
    let start = lines.iter().position(|l| is_unit_line(l))?;
    let end = (start..lines.len()).find(|&j| !is_foon_line(lines[j])).unwrap_or(lines.len());
    Some((lines[start..end].join("\n") + "\n", start + 1))
}

fn parse_units(text: &str) -> Result<Vec<FunctionalUnit>, FmError> {
    let (block, first_line) = extract_block(text).ok_or(FmError::NoBlockFound)?;
    Ok(parse_subgraph_at(&block, first_line)?)
}

/// Parse a model answer. The goal is the first output of the last unit;
/// syntax errors carry line numbers within `text`.
pub fn parse_tree_response(text: &str) -> Result<TaskTree, FmError> {
    let units = parse_units(text)?;
    TaskTree::from_units(units).ok_or(FmError::NoBlockFound)
}

/// Complete, parse and verify until a tree reaches the requested goal.
pub fn generate_or_repair(
    provider: &dyn CompletionProvider,
    outcome: &RetrievalOutcome,
    request_goal: &str,
    kitchen: &KitchenState,
    corpus: &ExampleCorpus,
    config: &GenerateConfig,
) -> Result<Generated, FmError> {
    let goal = parse_goal(request_goal).map_err(|_| FmError::NoGoal(request_goal.to_string()))?;
    let base: PromptText = match outcome {
        RetrievalOutcome::ExactMatch { .. } => return Err(FmError::ExactMatchGiven),
        RetrievalOutcome::NoMatch => build_generation_prompt(request_goal, kitchen, corpus, config.examples)?,
        RetrievalOutcome::CategoryMatch { tree, .. } => {
            build_modification_prompt(request_goal, tree, kitchen, corpus, config.examples)?
        }
    };

    let mut last = VerificationReport::default();
    for attempt in 1..=config.retry_limit {
        let prompt = if attempt == 1 { base.clone() } else { base.with_feedback(&last.feedback()) };
        let answer = provider.complete(&CompletionRequest::text(&prompt, config.max_tokens))?;
        last = match parse_units(&answer) {
            Err(e) => VerificationReport::syntax(e.to_string()),
            Ok(units) => {
                let tree = TaskTree::new(units, goal.clone());
                let report = verify_tree(&tree, kitchen, &goal);
                if report.valid {
                    return Ok(Generated { tree, attempts: attempt });
                }
                report
            }
        };
    }
    Err(FmError::RetriesExhausted {
        attempts: config.retry_limit,
        last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fm::{ScriptEntry, ScriptedProvider};
    use crate::kg::ObjectNode;

    const GOOD: &str = "Here you go:\n```\nU\nI lentil | raw\nI pot | water\nM boil\nO lentil soup | cooked\n```\nEnjoy.";
    const MISSING: &str = "```\nU\nI lentil | raw\nI ham\nM boil\nO lentil soup | cooked\n```";

    fn kitchen() -> KitchenState {
        KitchenState::new(vec![ObjectNode::new("lentil", &["raw"]), ObjectNode::new("pot", &["water"])]).unwrap()
    }

    #[test]
    fn prose_wrapped_block() {
        let text = "Sure.\n```foon\nU\nI a\nM m\nO b\n\nU\nI b\nM n\nO c\n```\nDone";
        let tree = parse_tree_response(text).unwrap();
        assert_eq!(tree.len(), 2);
        assert_eq!(tree.goal.name, "c");
    }

    #[test]
    fn raw_block_stops_at_prose() {
        let tree = parse_tree_response("Plan:\nU\nI a\nM m\nO b\nThat is all.").unwrap();
        assert_eq!(tree.len(), 1);
    }

    #[test]
    fn violation_line_is_relative_to_response() {
        let err = parse_tree_response("prose\n```\nU\nI a\nM\nO b\n```").unwrap_err();
        match err {
            FmError::Parse(p) => assert_eq!(p.line(), Some(5)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn empty_response_has_no_block() {
        assert!(matches!(parse_tree_response(""), Err(FmError::NoBlockFound)));
        assert!(matches!(parse_tree_response("no idea"), Err(FmError::NoBlockFound)));
    }

    #[test]
    fn first_attempt_success() {
        let p = ScriptedProvider::new(vec![ScriptEntry::new("", GOOD)]);
        let out = generate_or_repair(&p, &RetrievalOutcome::NoMatch, "lentil soup", &kitchen(), &ExampleCorpus::default(), &GenerateConfig::default()).unwrap();
        assert_eq!(out.attempts, 1);
        assert_eq!(p.call_count(), 1);
    }

    #[test]
    fn retry_sees_feedback() {
        let p = ScriptedProvider::new(vec![
            ScriptEntry::new("", MISSING),
            ScriptEntry::new("missing objects (not in the kitchen and not produced earlier): ham", GOOD),
        ]);
        let out = generate_or_repair(&p, &RetrievalOutcome::NoMatch, "lentil soup", &kitchen(), &ExampleCorpus::default(), &GenerateConfig::default()).unwrap();
        assert_eq!(out.attempts, 2);
        assert_eq!(p.call_count(), 2);
    }

    #[test]
    fn retries_exhausted() {
        let p = ScriptedProvider::always(MISSING);
        let err = generate_or_repair(&p, &RetrievalOutcome::NoMatch, "lentil soup", &kitchen(), &ExampleCorpus::default(), &GenerateConfig::default()).unwrap_err();
        match err {
            FmError::RetriesExhausted { attempts, last } => {
                assert_eq!(attempts, 3);
                assert!(last.missing_objects.contains("ham"));
            }
            other => panic!("{other}"),
        }
        assert_eq!(p.call_count(), 3);
    }

    #[test]
    fn exact_match_is_refused_without_calls() {
        let p = ScriptedProvider::always(GOOD);
        let tree = TaskTree::new(vec![], ObjectNode::new("x", &[] as &[&str]));
        let err = generate_or_repair(&p, &RetrievalOutcome::ExactMatch { tree }, "x", &kitchen(), &ExampleCorpus::default(), &GenerateConfig::default()).unwrap_err();
        assert!(matches!(err, FmError::ExactMatchGiven));
        assert_eq!(p.call_count(), 0);
    }
}
