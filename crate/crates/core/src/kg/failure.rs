use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Failure taxonomy shared by detection reports, injections and FailNet triggers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureType {
    Overpour,
    Slip,
    IncorrectMix,
    MisplacedPour,
    Collateral,
    UnsafeAction,
    Other,
}

impl FailureType {
    pub const ALL: [FailureType; 7] = [
        FailureType::Overpour,
        FailureType::Slip,
        FailureType::IncorrectMix,
        FailureType::MisplacedPour,
        FailureType::Collateral,
        FailureType::UnsafeAction,
        FailureType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureType::Overpour => "overpour",
            FailureType::Slip => "slip",
            FailureType::IncorrectMix => "incorrect_mix",
            FailureType::MisplacedPour => "misplaced_pour",
            FailureType::Collateral => "collateral",
            FailureType::UnsafeAction => "unsafe_action",
            FailureType::Other => "other",
        }
    }

    /// The object state that marks this failure in a world, if it has one.
    pub fn marker_state(self) -> Option<&'static str> {
        match self {
            FailureType::Overpour => Some("watery"),
            FailureType::Slip => Some("dropped"),
            FailureType::IncorrectMix => Some("unevenly-mixed"),
            FailureType::MisplacedPour => Some("spilled"),
            FailureType::Collateral => Some("knocked-over"),
            FailureType::UnsafeAction | FailureType::Other => None,
        }
    }

    pub fn from_marker_state(state: &str) -> Option<FailureType> {
        FailureType::ALL.into_iter().find(|t| t.marker_state() == Some(state))
    }

    /// Lenient parse: unknown labels become `Other`.
    pub fn parse_lenient(s: &str) -> FailureType {
        s.parse().unwrap_or(FailureType::Other)
    }
}

impl fmt::Display for FailureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown failure type {0:?}")]
pub struct ParseFailureTypeError(pub String);

impl FromStr for FailureType {
    type Err = ParseFailureTypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .to_lowercase()
            .chars()
            .map(|c| if c == '-' || c == ' ' { '_' } else { c })
            .collect();
        Ok(match key.as_str() {
            "overpour" | "overpouring" => FailureType::Overpour,
            "slip" | "slipping" => FailureType::Slip,
            "incorrect_mix" | "incorrect_mixing" => FailureType::IncorrectMix,
            "misplaced_pour" | "misplaced_pouring" => FailureType::MisplacedPour,
            "collateral" | "collateral_event" => FailureType::Collateral,
            "unsafe_action" | "unsafe" => FailureType::UnsafeAction,
            "other" => FailureType::Other,
            _ => return Err(ParseFailureTypeError(s.to_string())),
        })
    }
}
