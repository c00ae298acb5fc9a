use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A prompt as seen by coefficient providers. Multi-turn conversations are
/// flattened into `text` by the caller.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Prompt {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_path: Option<Vec<String>>,
}

impl Prompt {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(Error::InvalidParameter("prompt text is empty".into()));
        }
        Ok(Self {
            id: None,
            text,
            category_path: None,
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn with_categories<I, S>(mut self, path: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.category_path = Some(path.into_iter().map(Into::into).collect());
        self
    }

    pub fn category(&self, level: usize) -> Option<&str> {
        self.category_path.as_ref()?.get(level).map(String::as_str)
    }

    /// Hex SHA-256 of the text.
    pub fn text_hash(&self) -> String {
        hex_digest(self.text.as_bytes())
    }

    /// Cache key: the id when present, the text hash otherwise.
    pub fn cache_key(&self) -> String {
        match &self.id {
            Some(id) => format!("id:{id}"),
            None => format!("sha256:{}", self.text_hash()),
        }
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
