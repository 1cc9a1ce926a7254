use std::path::Path;

use super::FmError;
use crate::kg::{parse_subgraph_at, serialize_subgraph, ParseError};

const DEFAULT_CORPUS: &str = include_str!("../../data/corpus.foon");

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: text before the first `===` header")]
    Orphan { line: usize },
    #[error("line {line}: header without a request")]
    EmptyRequest { line: usize },
    #[error("example {request:?}: {source}")]
    Example {
        request: String,
        #[source]
        source: ParseError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Few-shot examples: FOON-text blocks under `=== <request>` headers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExampleCorpus {
    examples: Vec<(String, String)>,
}

impl ExampleCorpus {
    /// Every block is parsed and stored in canonical form.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut examples = Vec::new();
        let mut current: Option<(String, usize, String)> = None;
        let flush = |cur: Option<(String, usize, String)>, out: &mut Vec<(String, String)>| {
            if let Some((request, first, body)) = cur {
                let units = parse_subgraph_at(&body, first)
                    .map_err(|source| CorpusError::Example { request: request.clone(), source })?;
                out.push((request, serialize_subgraph(&units)));
            }
            Ok::<_, CorpusError>(())
        };
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if let Some(rest) = line.strip_prefix("===") {
                flush(current.take(), &mut examples)?;
                let request = rest.trim();
                if request.is_empty() {
                    return Err(CorpusError::EmptyRequest { line: line_no });
                }
                current = Some((request.to_string(), line_no + 1, String::new()));
            } else if let Some((_, _, body)) = current.as_mut() {
                body.push_str(line);
                body.push('\n');
            } else if !line.trim().is_empty() && !line.trim_start().starts_with('#') {
                return Err(CorpusError::Orphan { line: line_no });
            }
        }
        flush(current, &mut examples)?;
        Ok(ExampleCorpus { examples })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[(String, String)] {
        &self.examples
    }

    /// The first `n` examples.
    pub fn take(&self, n: usize) -> Result<&[(String, String)], FmError> {
        self.examples.get(..n).ok_or(FmError::CorpusTooSmall {
            required: n,
            available: self.examples.len(),
        })
    }
}

impl Default for ExampleCorpus {
    fn default() -> Self {
        Self::parse(DEFAULT_CORPUS).expect("bundled corpus is valid")
    }
}
