use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Number of named dish classes a taxonomy must declare.
pub const CLASS_COUNT: usize = 30;

pub const OTHER_LABEL: &str = "other";

const DEFAULT_TAXONOMY: &str = include_str!("../../data/taxonomy.txt");

/// A dish category. `class_id` is `None` for the implicit fallback class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DishClass {
    pub class_id: Option<u8>,
    pub label: String,
}

impl DishClass {
    pub fn other() -> Self {
        DishClass {
            class_id: None,
            label: OTHER_LABEL.to_string(),
        }
    }

    pub fn is_other(&self) -> bool {
        self.class_id.is_none()
    }
}

impl fmt::Display for DishClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("line {line}: expected `label: keyword, ...`")]
    Malformed { line: usize },
    #[error("line {line}: duplicate class label {label:?}")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: {label:?} is reserved for the fallback class")]
    ReservedLabel { line: usize, label: String },
    #[error("expected {CLASS_COUNT} classes, found {0}")]
    WrongCount(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
struct Keyword {
    words: Vec<String>,
    len: usize,
}

/// Keyword → class mapping used for approximate retrieval.
#[derive(Debug, Clone)]
pub struct DishTaxonomy {
    classes: Vec<(String, Vec<Keyword>)>,
}

impl DishTaxonomy {
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut classes: Vec<(String, Vec<Keyword>)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (label, keywords) = line
                .split_once(':')
                .ok_or(TaxonomyError::Malformed { line: line_no })?;
            let label = label.trim().to_lowercase();
            if label.is_empty() {
                return Err(TaxonomyError::Malformed { line: line_no });
            }
            if label == OTHER_LABEL {
                return Err(TaxonomyError::ReservedLabel { line: line_no, label });
            }
            if classes.iter().any(|(l, _)| *l == label) {
                return Err(TaxonomyError::DuplicateLabel { line: line_no, label });
            }
            let keywords = keywords
                .split(',')
                .map(|k| k.trim().to_lowercase())
                .filter(|k| !k.is_empty())
                .map(|k| Keyword {
                    words: words(&k),
                    len: k.len(),
                })
                .filter(|k| !k.words.is_empty())
                .collect();
            classes.push((label, keywords));
        }
        if classes.len() != CLASS_COUNT {
            return Err(TaxonomyError::WrongCount(classes.len()));
        }
        Ok(DishTaxonomy { classes })
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn classes(&self) -> impl Iterator<Item = DishClass> + '_ {
        self.classes.iter().enumerate().map(|(i, (label, _))| DishClass {
            class_id: Some(i as u8),
            label: label.clone(),
        })
    }

    /// Longest matching keyword wins; ties go to the lower class id.
    pub(crate) fn classify_name(&self, goal_name: &str) -> DishClass {
        let tokens = words(goal_name);
        let mut best: Option<(usize, usize)> = None;
        for (class_idx, (_, keywords)) in self.classes.iter().enumerate() {
            for kw in keywords {
                if kw.len > best.map_or(0, |(l, _)| l) && contains_phrase(&tokens, &kw.words) {
                    best = Some((kw.len, class_idx));
                }
            }
        }
        match best {
            Some((_, idx)) => DishClass {
                class_id: Some(idx as u8),
                label: self.classes[idx].0.clone(),
            },
            None => DishClass::other(),
        }
    }
}

impl Default for DishTaxonomy {
    fn default() -> Self {
        Self::parse(DEFAULT_TAXONOMY).expect("bundled taxonomy is valid")
    }
}

fn words(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn word_matches(token: &str, keyword: &str) -> bool {
    token == keyword
        || token
            .strip_prefix(keyword)
            .is_some_and(|rest| rest == "s" || rest == "es")
}

fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    tokens.windows(phrase.len()).any(|w| {
        w.iter()
            .zip(phrase)
            .all(|(t, k)| word_matches(t, k))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_taxonomy_has_thirty_unique_classes() {
        let t = DishTaxonomy::default();
        let labels: std::collections::BTreeSet<_> = t.classes().map(|c| c.label).collect();
        assert_eq!(labels.len(), CLASS_COUNT);
    }

    #[test]
    fn soups_share_a_class() {
        let t = DishTaxonomy::default();
        assert_eq!(t.classify_name("corn soup").label, "soup");
        assert_eq!(t.classify_name("lentil soup").label, "soup");
    }

    #[test]
    fn unknown_falls_back_to_other() {
        let t = DishTaxonomy::default();
        assert!(t.classify_name("xyzzy").is_other());
    }

    #[test]
    fn longest_keyword_wins() {
        let t = DishTaxonomy::default();
        assert_eq!(t.classify_name("french toast").label, "pancake");
        assert_eq!(t.classify_name("cheese toast").label, "sandwich");
        assert_eq!(t.classify_name("chicken fried rice").label, "rice");
    }

    #[test]
    fn plural_and_word_boundaries() {
        let t = DishTaxonomy::default();
        assert_eq!(t.classify_name("blueberry pancakes").label, "pancake");
        assert!(t.classify_name("piece of string").is_other());
    }

    #[test]
    fn wrong_class_count_is_rejected() {
        assert!(matches!(
            DishTaxonomy::parse("soup: soup\n"),
            Err(TaxonomyError::WrongCount(1))
        ));
    }
}
