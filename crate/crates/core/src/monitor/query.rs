use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Frame, ImageGrid};
use crate::fm::{ImagePayload, PromptText};
use crate::kg::{FailureType, FunctionalUnit, UnitId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DetectionMode {
    #[default]
    Grid,
    Frames,
}

impl std::str::FromStr for DetectionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid" => Ok(DetectionMode::Grid),
            "frames" => Ok(DetectionMode::Frames),
            other => Err(format!("unknown detection mode {other:?} (grid|frames)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureReport {
    pub failed: bool,
    pub failure_type: Option<FailureType>,
    pub explanation: String,
    pub affected_objects: BTreeSet<String>,
    pub unit_id: Option<UnitId>,
}

impl FailureReport {
    pub fn failure(failure_type: FailureType, explanation: &str, objects: &[&str]) -> Self {
        FailureReport {
            failed: true,
            failure_type: Some(failure_type),
            explanation: explanation.to_string(),
            affected_objects: objects.iter().map(|o| o.to_string()).collect(),
            unit_id: None,
        }
    }

    pub fn none() -> Self {
        FailureReport {
            failed: false,
            failure_type: None,
            explanation: String::new(),
            affected_objects: BTreeSet::new(),
            unit_id: None,
        }
    }

    /// Labeled block in the format [`parse_detection_response`] reads.
    pub fn to_block(&self) -> String {
        if !self.failed {
            return "FAILED: no\n".to_string();
        }
        let objects: Vec<&str> = self.affected_objects.iter().map(String::as_str).collect();
        format!(
            "FAILED: yes\nTYPE: {}\nEXPLANATION: {}\nOBJECTS: {}\n",
            self.failure_type.unwrap_or(FailureType::Other),
            self.explanation,
            objects.join(", ")
        )
    }
}

impl fmt::Display for FailureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.failed, self.failure_type) {
            (false, _) => f.write_str("no failure"),
            (true, t) => write!(
                f,
                "{} ({})",
                t.unwrap_or(FailureType::Other),
                self.explanation
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DetectionParseError {
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("FAILED must be yes or no, got {0:?}")]
    BadFlag(String),
}

const DETECTION_SYSTEM: &str = "You monitor a robot executing one step of a cooking task. \
Decide from the images whether the step failed. Answer with exactly these labeled lines:
FAILED: yes|no
TYPE: overpour|slip|incorrect_mix|misplaced_pour|collateral|unsafe_action|other
EXPLANATION: one sentence
OBJECTS: comma-separated object names";

/// What the model is told about the step under observation.
#[derive(Debug, Clone, Copy)]
pub struct DetectionContext<'a> {
    pub unit: &'a FunctionalUnit,
    /// Scene objects in the order they are drawn.
    pub scene: &'a [String],
}

pub enum Visual<'a> {
    Grid(&'a ImageGrid),
    Frames(&'a [Frame]),
}

pub fn build_detection_query(visual: Visual<'_>, ctx: DetectionContext<'_>) -> (PromptText, Vec<ImagePayload>) {
    let (how, images) = match visual {
        Visual::Grid(g) => (
            format!(
                "One image: a {}x{} grid of {} frames in row-major time order.",
                g.spec.rows, g.spec.cols, g.placed
            ),
            vec![g.payload()],
        ),
        Visual::Frames(fs) => (
            format!("{} images in time order.", fs.len()),
            fs.iter().map(Frame::payload).collect(),
        ),
    };
    let user = format!(
        "Step being executed:\n```\n{}```\nScene objects: {}\n{how}",
        ctx.unit.canonical_text(),
        ctx.scene.join(", ")
    );
    (PromptText::new(DETECTION_SYSTEM, &user), images)
}

fn labels() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(FAILED|TYPE|EXPLANATION|OBJECTS)\s*:").expect("valid regex"))
}

fn no_failure() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bno\s+failure").expect("valid regex"))
}

/// Read the labeled `FAILED/TYPE/EXPLANATION/OBJECTS` block. Fields may sit
/// on separate lines or be separated by ` / `.
pub fn parse_detection_response(text: &str) -> Result<FailureReport, DetectionParseError> {
    let marks: Vec<(usize, usize, String)> = labels()
        .captures_iter(text)
        .map(|c| {
            let m = c.get(0).expect("match");
            (m.start(), m.end(), c[1].to_uppercase())
        })
        .collect();
    let field = |name: &str| -> Option<String> {
        let i = marks.iter().position(|(_, _, l)| l == name)?;
        let end = marks.get(i + 1).map_or(text.len(), |m| m.0);
        let raw = text[marks[i].1..end].trim();
        Some(raw.trim_end_matches('/').trim().to_string())
    };

    let failed = match field("FAILED") {
        Some(v) => match v.to_lowercase().split_whitespace().next().unwrap_or("") {
            "yes" | "true" | "y" => true,
            "no" | "false" | "n" | "none" => false,
            _ => return Err(DetectionParseError::BadFlag(v)),
        },
        None if no_failure().is_match(text) => false,
        None => return Err(DetectionParseError::MissingField("FAILED")),
    };
    if !failed {
        return Ok(FailureReport::none());
    }
    let failure_type = field("TYPE")
        .filter(|t| !t.is_empty())
        .ok_or(DetectionParseError::MissingField("TYPE"))?;
    let affected_objects = field("OBJECTS")
        .unwrap_or_default()
        .split([',', ';'])
        .map(|o| o.trim().to_lowercase())
        .filter(|o| !o.is_empty() && o != "none")
        .collect();
    Ok(FailureReport {
        failed: true,
        failure_type: Some(FailureType::parse_lenient(&failure_type)),
        explanation: field("EXPLANATION").unwrap_or_default(),
        affected_objects,
        unit_id: None,
    })
}
