//! FOON-text: the line-oriented unit format.
//!
//! ```text
//! [FOON]
//! # comment
//! U
//! I water | in-cup
//! I bowl | empty
//! M pour | amount=half cup
//! O bowl | with-water | water
//!
//! [FAILNET]
//! T overpour | bowl
//! U
//! ...
//! ```
//!
//! A blank line (or EOF) ends a unit. Object lines are
//! `name | state,state | ingredient;ingredient`; trailing fields may be
//! omitted. Everything after `#` is a comment.

use std::collections::BTreeSet;

use super::store::{Section, Trigger};
use super::{normalize, validate_unit, FailureType, FunctionalUnit, MotionNode, ObjectNode, Violation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("empty input")]
    EmptyInput,
    #[error("line {line}: {message} (at {token:?})")]
    Syntax {
        line: usize,
        token: String,
        message: String,
    },
    #[error("line {line}: invalid unit: {}", join_violations(.violations))]
    InvalidUnit {
        line: usize,
        violations: Vec<Violation>,
    },
}

impl ParseError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::EmptyInput => None,
            ParseError::Syntax { line, .. } | ParseError::InvalidUnit { line, .. } => Some(*line),
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// A unit as it appeared in a file, with its FailNet triggers and source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedUnit {
    pub unit: FunctionalUnit,
    pub triggers: Vec<Trigger>,
    pub line: usize,
}

/// Parsed file contents in file order, tagged by section.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    pub entries: Vec<(Section, ParsedUnit)>,
}

impl Document {
    pub fn section(&self, section: Section) -> impl Iterator<Item = &ParsedUnit> {
        self.entries
            .iter()
            .filter(move |(s, _)| *s == section)
            .map(|(_, p)| p)
    }

    pub fn units(&self) -> Vec<FunctionalUnit> {
        self.entries.iter().map(|(_, p)| p.unit.clone()).collect()
    }
}

/// Parse units in file order. Section headers and trigger lines are accepted
/// and ignored here; use [`parse_document`] to keep them.
pub fn parse_subgraph(text: &str) -> Result<Vec<FunctionalUnit>, ParseError> {
    parse_subgraph_at(text, 1)
}

/// Like [`parse_subgraph`], numbering lines from `first_line`.
pub fn parse_subgraph_at(text: &str, first_line: usize) -> Result<Vec<FunctionalUnit>, ParseError> {
    Ok(parse_document_at(text, first_line)?.units())
}

/// Canonical text for `units`: one block per unit, blank-line separated.
pub fn serialize_subgraph(units: &[FunctionalUnit]) -> String {
    units
        .iter()
        .map(|u| u.canonical_text())
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn parse_document(text: &str) -> Result<Document, ParseError> {
    parse_document_at(text, 1)
}

struct Builder {
    line: usize,
    triggers: Vec<Trigger>,
    inputs: Vec<ObjectNode>,
    motion: Option<MotionNode>,
    outputs: Vec<ObjectNode>,
}

impl Builder {
    fn finish(self) -> Result<ParsedUnit, ParseError> {
        let motion = self.motion.ok_or_else(|| ParseError::Syntax {
            line: self.line,
            token: "U".into(),
            message: "unit has no motion line".into(),
        })?;
        let unit = FunctionalUnit::new(self.inputs, motion, self.outputs);
        let violations = validate_unit(&unit);
        if !violations.is_empty() {
            return Err(ParseError::InvalidUnit {
                line: self.line,
                violations,
            });
        }
        Ok(ParsedUnit {
            unit,
            triggers: self.triggers,
            line: self.line,
        })
    }
}

pub(crate) fn parse_document_at(text: &str, first_line: usize) -> Result<Document, ParseError> {
    let mut doc = Document::default();
    let mut section = Section::Foon;
    let mut pending: Vec<(usize, Trigger)> = Vec::new();
    let mut current: Option<Builder> = None;
    let mut saw_content = false;

    let syntax = |line: usize, token: &str, message: &str| ParseError::Syntax {
        line,
        token: token.to_string(),
        message: message.to_string(),
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = first_line + idx;
        if raw.trim().is_empty() {
            if let Some(b) = current.take() {
                doc.entries.push((section, b.finish()?));
            }
            continue;
        }
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        saw_content = true;
        let (tag, rest) = match line.find(char::is_whitespace) {
            Some(pos) => (&line[..pos], line[pos..].trim()),
            None => (line, ""),
        };

        match tag {
            "[FOON]" | "[FAILNET]" => {
                if let Some(b) = current.take() {
                    doc.entries.push((section, b.finish()?));
                }
                if let Some((l, _)) = pending.first() {
                    return Err(syntax(*l, "T", "trigger not followed by a unit"));
                }
                if !rest.is_empty() {
                    return Err(syntax(line_no, rest, "unexpected text after section header"));
                }
                section = if tag == "[FOON]" {
                    Section::Foon
                } else {
                    Section::FailNet
                };
            }
            t if t.starts_with('[') => {
                return Err(syntax(line_no, t, "unknown section"));
            }
            "T" => {
                if current.is_some() {
                    return Err(syntax(line_no, "T", "trigger must precede its unit"));
                }
                pending.push((line_no, parse_trigger(rest, line_no)?));
            }
            "U" => {
                if let Some(b) = current.take() {
                    doc.entries.push((section, b.finish()?));
                }
                if !rest.is_empty() {
                    return Err(syntax(line_no, rest, "unexpected text after U"));
                }
                current = Some(Builder {
                    line: line_no,
                    triggers: pending.drain(..).map(|(_, t)| t).collect(),
                    inputs: Vec::new(),
                    motion: None,
                    outputs: Vec::new(),
                });
            }
            "I" | "O" | "M" => {
                let Some(b) = current.as_mut() else {
                    return Err(syntax(line_no, tag, "line outside a unit (missing U)"));
                };
                match tag {
                    "I" => b.inputs.push(parse_object(rest, line_no)?),
                    "O" => b.outputs.push(parse_object(rest, line_no)?),
                    _ => {
                        if b.motion.is_some() {
                            return Err(syntax(line_no, "M", "second motion line in unit"));
                        }
                        b.motion = Some(parse_motion(rest, line_no)?);
                    }
                }
            }
            other => return Err(syntax(line_no, other, "unknown line tag")),
        }
    }
    if let Some(b) = current.take() {
        doc.entries.push((section, b.finish()?));
    }
    if let Some((l, _)) = pending.first() {
        return Err(syntax(*l, "T", "trigger not followed by a unit"));
    }
    if !saw_content {
        return Err(ParseError::EmptyInput);
    }
    Ok(doc)
}

/// Parse a `name | states | contents` object line body.
pub fn parse_object_line(text: &str, line: usize) -> Result<ObjectNode, ParseError> {
    parse_object(text, line)
}

fn parse_object(rest: &str, line: usize) -> Result<ObjectNode, ParseError> {
    let parts: Vec<&str> = rest.split('|').collect();
    if parts.len() > 3 {
        return Err(ParseError::Syntax {
            line,
            token: rest.to_string(),
            message: "object line has more than three fields".into(),
        });
    }
    let name = normalize(parts[0]);
    if name.is_empty() {
        return Err(ParseError::Syntax {
            line,
            token: rest.to_string(),
            message: "missing object name".into(),
        });
    }
    let states: Vec<String> = parts
        .get(1)
        .map(|s| split_list(s, ','))
        .unwrap_or_default();
    let contains: Vec<String> = parts
        .get(2)
        .map(|s| split_list(s, ';'))
        .unwrap_or_default();
    Ok(ObjectNode::new(&name, &states).with_contents(&contains))
}

fn parse_motion(rest: &str, line: usize) -> Result<MotionNode, ParseError> {
    let (verb, params) = match rest.split_once('|') {
        Some((v, p)) => (v, Some(p)),
        None => (rest, None),
    };
    let verb = verb.trim();
    if verb.is_empty() || verb.contains(char::is_whitespace) {
        return Err(ParseError::Syntax {
            line,
            token: verb.to_string(),
            message: "motion verb must be a single identifier".into(),
        });
    }
    let mut motion = MotionNode::new(verb);
    if let Some(params) = params {
        for pair in params.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let Some((k, v)) = pair.split_once('=') else {
                return Err(ParseError::Syntax {
                    line,
                    token: pair.to_string(),
                    message: "motion parameter must be key=value".into(),
                });
            };
            motion = motion.with_param(k, v);
        }
    }
    Ok(motion)
}

fn parse_trigger(rest: &str, line: usize) -> Result<Trigger, ParseError> {
    let (kind, objects) = match rest.split_once('|') {
        Some((k, o)) => (k, o),
        None => (rest, ""),
    };
    let failure_type: FailureType = kind.trim().parse().map_err(|_| ParseError::Syntax {
        line,
        token: kind.trim().to_string(),
        message: "unknown failure type".into(),
    })?;
    let objects: BTreeSet<String> = split_list(objects, ',').into_iter().collect();
    Ok(Trigger {
        failure_type,
        objects,
    })
}

fn split_list(s: &str, sep: char) -> Vec<String> {
    s.split(sep)
        .map(normalize)
        .filter(|s| !s.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const POUR: &str = "U\nI water | in-cup\nI bowl | empty\nM pour\nO bowl | with-water | water\n";

    #[test]
    fn parses_one_unit() {
        let units = parse_subgraph(POUR).unwrap();
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].inputs().len(), 2);
        assert_eq!(units[0].motion().verb, "pour");
        assert_eq!(units[0].outputs()[0].contains.len(), 1);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(parse_subgraph(""), Err(ParseError::EmptyInput));
        assert_eq!(parse_subgraph("# only a comment\n"), Err(ParseError::EmptyInput));
    }

    #[test]
    fn serializes_states_sorted() {
        let text = "U\nI onion | whole,raw\nM cut\nO onion | sliced,raw\n";
        let units = parse_subgraph(text).unwrap();
        assert_eq!(
            serialize_subgraph(&units),
            "U\nI onion | raw,whole\nM cut\nO onion | raw,sliced\n"
        );
    }

    #[test]
    fn empty_list_serializes_to_empty_string() {
        assert_eq!(serialize_subgraph(&[]), "");
    }

    #[test]
    fn malformed_motion_reports_line() {
        let text = "U\nI a\nM pour | amount\nO b\n";
        let err = parse_subgraph(text).unwrap_err();
        assert_eq!(err.line(), Some(3));
    }

    #[test]
    fn unknown_tag_reports_token() {
        let err = parse_subgraph("U\nI a\nX b\n").unwrap_err();
        match err {
            ParseError::Syntax { line, token, .. } => {
                assert_eq!(line, 3);
                assert_eq!(token, "X");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_motion_is_rejected() {
        let err = parse_subgraph("U\nI a\nO b\n").unwrap_err();
        assert_eq!(err.line(), Some(1));
    }

    #[test]
    fn duplicate_states_are_invalid() {
        let err = parse_subgraph("U\nI a | x,x\nM m\nO b\n").unwrap_err();
        assert!(matches!(err, ParseError::InvalidUnit { line: 1, .. }));
    }

    #[test]
    fn sections_and_triggers() {
        let text = "[FOON]\nU\nI a\nM m\nO b\n\n[FAILNET]\nT overpour | bowl, batter\nU\nI b\nM fix\nO c\n";
        let doc = parse_document(text).unwrap();
        assert_eq!(doc.section(Section::Foon).count(), 1);
        let fail: Vec<_> = doc.section(Section::FailNet).collect();
        assert_eq!(fail.len(), 1);
        assert_eq!(fail[0].triggers[0].failure_type, FailureType::Overpour);
        assert_eq!(fail[0].triggers[0].objects.len(), 2);
    }

    #[test]
    fn dangling_trigger_is_rejected() {
        assert!(parse_document("[FAILNET]\nT slip | block\n").is_err());
    }

    #[test]
    fn comments_do_not_end_units() {
        let text = "U\nI a # raw\n# note\nM m\nO b\n";
        assert_eq!(parse_subgraph(text).unwrap().len(), 1);
    }

    #[test]
    fn line_offset_is_applied() {
        let err = parse_subgraph_at("U\nI a\nM\nO b\n", 10).unwrap_err();
        assert_eq!(err.line(), Some(12));
    }
}
