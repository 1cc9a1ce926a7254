use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::TaskCategory;
use crate::kg::FailureType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: usize,
    pub denominator: usize,
}

impl Ratio {
    pub fn new(numerator: usize, denominator: usize) -> Self {
        debug_assert!(numerator <= denominator);
        Ratio { numerator, denominator }
    }

    /// `None` when the denominator is zero.
    pub fn percent(&self) -> Option<f64> {
        (self.denominator > 0).then(|| 100.0 * self.numerator as f64 / self.denominator as f64)
    }

    fn cell(&self) -> String {
        match self.percent() {
            Some(p) => format!("{p:.1}% ({}/{})", self.numerator, self.denominator),
            None => format!("n/a ({}/{})", self.numerator, self.denominator),
        }
    }
}

impl Serialize for RatioJson {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Ratio", 3)?;
        st.serialize_field("numerator", &self.0.numerator)?;
        st.serialize_field("denominator", &self.0.denominator)?;
        st.serialize_field("percent", &self.0.percent().map(round1))?;
        st.end()
    }
}

struct RatioJson(Ratio);

fn round1(p: f64) -> f64 {
    (p * 10.0).round() / 10.0
}

/// Provider calls by pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FmCalls {
    pub planning: usize,
    pub detection: usize,
    pub recovery: usize,
}

impl FmCalls {
    pub fn total(&self) -> usize {
        self.planning + self.detection + self.recovery
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DishResult {
    pub date: String,
    pub dish: String,
    /// 1, 2 or 3; 0 when retrieval itself failed.
    pub case: u8,
    pub calls: usize,
    pub progress: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub name: String,
    pub category: TaskCategory,
    pub expected: Option<FailureType>,
    pub detected: Option<FailureType>,
    pub explanation: Option<String>,
    pub explanation_match: Option<bool>,
    pub success: bool,
    pub recoveries: usize,
    pub detector_calls: usize,
    pub generator_calls: usize,
    pub error: Option<String>,
}

/// Aggregate numbers of one eval run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub planning: Option<Ratio>,
    pub detection: Option<Ratio>,
    pub explanation: Option<Ratio>,
    pub recovery: Option<Ratio>,
    pub fm_calls: FmCalls,
    /// Case 1, Case 2, Case 3 counts.
    pub cases: [usize; 3],
    pub distribution: Vec<(TaskCategory, usize)>,
    pub dishes: Vec<DishResult>,
    pub episodes: Vec<EpisodeResult>,
}

impl MetricsReport {
    pub fn from_dishes(dishes: Vec<DishResult>) -> Self {
        let mut cases = [0; 3];
        for d in &dishes {
            if (1..=3).contains(&d.case) {
                cases[d.case as usize - 1] += 1;
            }
        }
        let solved = dishes.iter().filter(|d| d.error.is_none() && d.progress == 1.0).count();
        MetricsReport {
            planning: Some(Ratio::new(solved, dishes.len())),
            fm_calls: FmCalls {
                planning: dishes.iter().map(|d| d.calls).sum(),
                ..FmCalls::default()
            },
            cases,
            dishes,
            ..Self::default()
        }
    }

    pub fn from_episodes(episodes: Vec<EpisodeResult>, distribution: Vec<(TaskCategory, usize)>) -> Self {
        let detected = episodes.iter().filter(|e| e.detected == e.expected).count();
        let with_failure: Vec<&EpisodeResult> = episodes.iter().filter(|e| e.expected.is_some()).collect();
        let explained = with_failure.iter().filter(|e| e.explanation_match == Some(true)).count();
        let recovered = with_failure.iter().filter(|e| e.success).count();
        MetricsReport {
            detection: Some(Ratio::new(detected, episodes.len())),
            explanation: Some(Ratio::new(explained, with_failure.len())),
            recovery: Some(Ratio::new(recovered, with_failure.len())),
            fm_calls: FmCalls {
                planning: 0,
                detection: episodes.iter().map(|e| e.detector_calls).sum(),
                recovery: episodes.iter().map(|e| e.generator_calls).sum(),
            },
            distribution,
            episodes,
            ..Self::default()
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let ratio = |r: &Option<Ratio>| r.map(|r| serde_json::to_value(RatioJson(r)).expect("ratio serializes"));
        serde_json::json!({
            "planning_accuracy": ratio(&self.planning),
            "detection": ratio(&self.detection),
            "explanation": ratio(&self.explanation),
            "recovery_accuracy": ratio(&self.recovery),
            "fm_calls": {
                "planning": self.fm_calls.planning,
                "detection": self.fm_calls.detection,
                "recovery": self.fm_calls.recovery,
                "total": self.fm_calls.total(),
            },
            "cases": self.planning.map(|_| serde_json::json!({
                "case1": self.cases[0], "case2": self.cases[1], "case3": self.cases[2],
            })),
            "distribution": self.distribution.iter()
                .map(|(c, n)| serde_json::json!({"category": c.to_string(), "count": n}))
                .collect::<Vec<_>>(),
            "dishes": self.dishes,
            "episodes": self.episodes,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("report serializes") + "\n"
    }

    /// `Pouring 36, Mixing 19, ...`
    pub fn distribution_line(&self) -> String {
        self.distribution
            .iter()
            .map(|(c, n)| format!("{c} {n}"))
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = Vec::new();
        let named = [
            ("Planning accuracy", &self.planning),
            ("Detection", &self.detection),
            ("Explanation", &self.explanation),
            ("Recovery accuracy", &self.recovery),
        ];
        for (name, r) in named {
            if let Some(r) = r {
                rows.push((name.to_string(), r.cell()));
            }
        }
        if self.planning.is_some() {
            for (i, n) in self.cases.iter().enumerate() {
                rows.push((format!("Case {}", i + 1), n.to_string()));
            }
        }
        rows.push(("FM calls (planning)".into(), self.fm_calls.planning.to_string()));
        rows.push(("FM calls (detection)".into(), self.fm_calls.detection.to_string()));
        rows.push(("FM calls (recovery)".into(), self.fm_calls.recovery.to_string()));
        rows.push(("FM calls (total)".into(), self.fm_calls.total().to_string()));
        if !self.distribution.is_empty() {
            rows.push(("Distribution".into(), self.distribution_line()));
        }
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}
