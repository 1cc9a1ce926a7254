use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::PromptText;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("script exhausted: no entry matches call {call}")]
    ScriptExhausted { call: usize },
    #[error("bad script: {0}")]
    Script(String),
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed provider response: {0}")]
    Response(String),
}

/// A PNG image attached to a request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePayload {
    pub png: Vec<u8>,
    pub width: u32,
    pub height: u32,
    /// SHA-256 of the raw RGB pixels, hex-encoded.
    pub checksum: String,
}

impl ImagePayload {
    pub fn descriptor(&self) -> String {
        format!("[image sha256={} {}x{}]", self.checksum, self.width, self.height)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a PromptText,
    pub images: &'a [ImagePayload],
    pub max_tokens: usize,
}

impl<'a> CompletionRequest<'a> {
    pub fn text(prompt: &'a PromptText, max_tokens: usize) -> Self {
        CompletionRequest {
            prompt,
            images: &[],
            max_tokens,
        }
    }

    /// Rendered prompt followed by one descriptor line per image.
    pub fn match_text(&self) -> String {
        let mut s = self.prompt.render();
        for img in self.images {
            s.push_str(&img.descriptor());
            s.push('\n');
        }
        s
    }
}

pub trait CompletionProvider: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError>;

    /// Calls made so far, failed ones included.
    fn call_count(&self) -> usize;
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for std::sync::Arc<P> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        (**self).complete(request)
    }

    fn call_count(&self) -> usize {
        (**self).call_count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    /// Substring of the request text; empty matches anything.
    #[serde(rename = "match", default)]
    pub matcher: String,
    pub response: String,
    /// Keep the entry after it has answered.
    #[serde(default)]
    pub repeat: bool,
}

impl ScriptEntry {
    pub fn new(matcher: &str, response: &str) -> Self {
        ScriptEntry {
            matcher: matcher.to_string(),
            response: response.to_string(),
            repeat: false,
        }
    }

    pub fn repeating(mut self) -> Self {
        self.repeat = true;
        self
    }
}

/// Deterministic provider answering from an ordered script.
///
/// Each call takes the first unused entry whose matcher occurs in the
/// request text. Non-repeating entries are used up by answering.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    entries: Mutex<Vec<(ScriptEntry, bool)>>,
    calls: AtomicUsize,
}

impl ScriptedProvider {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        ScriptedProvider {
            entries: Mutex::new(entries.into_iter().map(|e| (e, false)).collect()),
            calls: AtomicUsize::new(0),
        }
    }

    /// A provider that answers every call with `response`.
    pub fn always(response: &str) -> Self {
        Self::new(vec![ScriptEntry::new("", response).repeating()])
    }

    pub fn from_json(text: &str) -> Result<Self, ProviderError> {
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(text).map_err(|e| ProviderError::Script(e.to_string()))?;
        Ok(Self::new(entries))
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Script(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Entries that can still answer.
    pub fn remaining(&self) -> usize {
        let entries = self.entries.lock().unwrap_or_else(|p| p.into_inner());
        entries.iter().filter(|(_, used)| !used).count()
    }
}

impl CompletionProvider for ScriptedProvider {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        let text = request.match_text();
        let mut entries = self.entries.lock().unwrap_or_else(|p| p.into_inner());
        let hit = entries
            .iter_mut()
            .find(|(e, used)| !*used && text.contains(&e.matcher))
            .ok_or(ProviderError::ScriptExhausted { call })?;
        if !hit.0.repeat {
            hit.1 = true;
        }
        Ok(hit.0.response.clone())
    }

    fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}
