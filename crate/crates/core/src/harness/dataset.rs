use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::kg::FailureType;
use crate::sim::FailureInjection;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MenuEntry {
    pub date: NaiveDate,
    pub dish: String,
}

/// `date,dish` rows, ISO dates, with a header line.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MenuDataset {
    pub entries: Vec<MenuEntry>,
}

impl MenuDataset {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        #[derive(Deserialize)]
        struct Row {
            date: String,
            dish: String,
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| HarnessError::input(format!("menu line {line}"), e))?;
            let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d")
                .map_err(|e| HarnessError::input(format!("menu line {line}: date {:?}", row.date), e))?;
            if row.dish.is_empty() {
                return Err(HarnessError::Input(format!("menu line {line}: empty dish name")));
            }
            entries.push(MenuEntry { date, dish: row.dish });
        }
        if entries.is_empty() {
            return Err(HarnessError::Input("menu is empty".into()));
        }
        Ok(MenuDataset { entries })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&read(path)?)
    }
}

/// File name stem for a dish's gold tree: lowercase, spaces to dashes.
pub fn dish_slug(dish: &str) -> String {
    dish.trim()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("-")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TaskCategory {
    Pouring,
    Mixing,
    PickAndPlace,
    #[default]
    Others,
}

impl TaskCategory {
    pub const ALL: [TaskCategory; 4] =
        [TaskCategory::Pouring, TaskCategory::Mixing, TaskCategory::PickAndPlace, TaskCategory::Others];
}

impl fmt::Display for TaskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskCategory::Pouring => "Pouring",
            TaskCategory::Mixing => "Mixing",
            TaskCategory::PickAndPlace => "Pick and Place",
            TaskCategory::Others => "Others",
        })
    }
}

/// Ground truth for one episode.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Annotation {
    #[serde(default)]
    pub task_category: TaskCategory,
    #[serde(default)]
    pub true_failure_type: Option<FailureType>,
    #[serde(default)]
    pub explanation_keyphrases: Vec<String>,
    #[serde(default)]
    pub gold_recovery: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorSpec {
    /// Reads failure markers back from the rendered frames.
    #[default]
    Oracle,
    None,
    Script(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeManifest {
    pub name: String,
    pub tree: PathBuf,
    pub world: PathBuf,
    #[serde(default)]
    pub store: Option<PathBuf>,
    #[serde(default)]
    pub injections: Vec<FailureInjection>,
    #[serde(default)]
    pub detector: DetectorSpec,
    /// Scripted recovery generator.
    #[serde(default)]
    pub generator: Option<PathBuf>,
    #[serde(default)]
    pub annotation: Annotation,
}

impl EpisodeManifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self, HarnessError> {
        let m: EpisodeManifest = serde_json::from_str(text).map_err(|e| HarnessError::input("manifest", e))?;
        m.resolved(base)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&read(path)?, path.parent().unwrap_or(Path::new(".")))
    }

    /// Paths made relative to `base`, files checked, annotation checked.
    fn resolved(mut self, base: &Path) -> Result<Self, HarnessError> {
        let fix = |p: &mut PathBuf| -> Result<(), HarnessError> {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.is_file() {
                return Err(HarnessError::Input(format!("missing file {}", p.display())));
            }
            Ok(())
        };
        fix(&mut self.tree)?;
        fix(&mut self.world)?;
        if let Some(p) = self.store.as_mut() {
            fix(p)?;
        }
        if let Some(p) = self.generator.as_mut() {
            fix(p)?;
        }
        if let DetectorSpec::Script(p) = &mut self.detector {
            fix(p)?;
        }
        if let Some(p) = self.annotation.gold_recovery.as_mut() {
            fix(p)?;
        }
        let a = &self.annotation;
        if a.true_failure_type.is_some() && (a.explanation_keyphrases.is_empty() || a.gold_recovery.is_none()) {
            return Err(HarnessError::Input(format!(
                "episode {}: failure annotations need explanation_keyphrases and gold_recovery",
                self.name
            )));
        }
        Ok(self)
    }
}

/// `{"episodes": [manifest, ...]}` with paths relative to the dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EpisodeDataset {
    pub episodes: Vec<EpisodeManifest>,
}

impl EpisodeDataset {
    pub fn parse(text: &str, base: &Path) -> Result<Self, HarnessError> {
        #[derive(Deserialize)]
        struct Raw {
            episodes: Vec<EpisodeManifest>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| HarnessError::input("episode dataset", e))?;
        if raw.episodes.is_empty() {
            return Err(HarnessError::Input("episode dataset is empty".into()));
        }
        let episodes = raw
            .episodes
            .into_iter()
            .map(|m| m.resolved(base))
            .collect::<Result<_, _>>()?;
        Ok(EpisodeDataset { episodes })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&read(path)?, path.parent().unwrap_or(Path::new(".")))
    }

    /// Episodes per category, in the fixed category order.
    pub fn distribution(&self) -> Vec<(TaskCategory, usize)> {
        TaskCategory::ALL
            .iter()
            .map(|c| (*c, self.episodes.iter().filter(|e| e.annotation.task_category == *c).count()))
            .collect()
    }
}

pub(crate) fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::input(path.display(), e))
}
