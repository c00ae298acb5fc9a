use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::Mutex;
use std::time::Duration;

use lru::LruCache;
use serde::Deserialize;

use super::CoefficientProvider;
use crate::error::{RemoteError, Result};
use crate::feedback::{FeedbackKind, Leaderboard};
use crate::formats::build_leaderboard;
use crate::prompt::Prompt;

/// Response body of `POST /v1/coefficients`.
#[derive(Clone, Debug, Deserialize)]
pub struct RemoteResponse {
    pub kind: FeedbackKind,
    pub models: Vec<String>,
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
}

impl RemoteResponse {
    /// Decodes a response body and re-orders it to `models` order.
    pub fn decode(
        body: &str,
        models: &[String],
        kind: FeedbackKind,
    ) -> Result<Leaderboard, RemoteError> {
        let resp: RemoteResponse =
            serde_json::from_str(body).map_err(|e| RemoteError::Malformed(e.to_string()))?;
        let index: HashMap<&str, usize> = models
            .iter()
            .enumerate()
            .map(|(i, m)| (m.as_str(), i))
            .collect();
        resp.into_leaderboard(&index, kind)
    }

    fn into_leaderboard(
        self,
        index: &HashMap<&str, usize>,
        kind: FeedbackKind,
    ) -> Result<Leaderboard, RemoteError> {
        if self.kind != kind {
            return Err(RemoteError::Malformed(format!(
                "expected a {kind} leaderboard, got {}",
                self.kind
            )));
        }
        if self.models.len() != self.coefficients.len() {
            return Err(RemoteError::Malformed(format!(
                "{} model names but {} coefficients",
                self.models.len(),
                self.coefficients.len()
            )));
        }
        if self.coefficients.len() != index.len() {
            return Err(RemoteError::DimensionMismatch {
                expected: index.len(),
                found: self.coefficients.len(),
            });
        }
        let mut ordered = vec![None; index.len()];
        for (name, &c) in self.models.iter().zip(&self.coefficients) {
            let i = *index
                .get(name.as_str())
                .ok_or_else(|| RemoteError::UnknownModel(name.clone()))?;
            if ordered[i].replace(c).is_some() {
                return Err(RemoteError::Malformed(format!(
                    "model `{name}` listed twice"
                )));
            }
        }
        let coefs = ordered
            .into_iter()
            .map(|c| c.expect("every slot filled"))
            .collect();
        build_leaderboard(kind, coefs, self.eta, self.lambda)
            .map_err(|e| RemoteError::Malformed(e.to_string()))
    }
}

/// Client for a served coefficient model. Responses are cached by prompt id,
/// or by text hash when the prompt has no id; failures are never cached and
/// never replaced by a fallback.
pub struct RemoteProvider {
    url: String,
    agent: ureq::Agent,
    models: Vec<String>,
    kind: FeedbackKind,
    cache: Option<Mutex<LruCache<String, Leaderboard>>>,
}

impl std::fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProvider")
            .field("url", &self.url)
            .field("kind", &self.kind)
            .field("models", &self.models.len())
            .finish()
    }
}

impl RemoteProvider {
    /// `endpoint` is the server base URL, e.g. `http://127.0.0.1:8080`.
    pub fn new(
        endpoint: &str,
        models: Vec<String>,
        kind: FeedbackKind,
        timeout: Duration,
        cache_size: usize,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: format!("{}/v1/coefficients", endpoint.trim_end_matches('/')),
            agent,
            models,
            kind,
            cache: NonZeroUsize::new(cache_size).map(|n| Mutex::new(LruCache::new(n))),
        }
    }

    fn fetch(&self, prompt: &Prompt) -> Result<Leaderboard, RemoteError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(serde_json::json!({ "prompt": prompt.text }))
            .map_err(map_transport)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(RemoteError::Status(status));
        }
        let body = resp.body_mut().read_to_string().map_err(map_transport)?;
        RemoteResponse::decode(&body, &self.models, self.kind)
    }
}

fn map_transport(e: ureq::Error) -> RemoteError {
    match e {
        ureq::Error::Timeout(_) => RemoteError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => RemoteError::Timeout,
        other => RemoteError::Transport(other.to_string()),
    }
}

impl CoefficientProvider for RemoteProvider {
    fn kind(&self) -> FeedbackKind {
        self.kind
    }

    fn num_models(&self) -> usize {
        self.models.len()
    }

    fn evaluate(&self, prompt: &Prompt) -> Result<Leaderboard> {
        let key = prompt.cache_key();
        if let Some(cache) = &self.cache {
            if let Some(lb) = cache.lock().expect("cache lock").get(&key) {
                return Ok(lb.clone());
            }
        }
        let lb = self.fetch(prompt)?;
        if let Some(cache) = &self.cache {
            cache.lock().expect("cache lock").put(key, lb.clone());
        }
        Ok(lb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn models() -> Vec<String> {
        vec!["a".into(), "b".into(), "c".into()]
    }

    #[test]
    fn decode_reorders_by_name() {
        let lb = RemoteResponse::decode(
            r#"{"kind":"bt","models":["c","a","b"],"coefficients":[3,1,2]}"#,
            &models(),
            FeedbackKind::Bt,
        )
        .unwrap();
        assert_eq!(lb, Leaderboard::bt(vec![1.0, 2.0, 3.0]));
    }

    #[test]
    fn decode_error_kinds() {
        let m = models();
        let dim = RemoteResponse::decode(
            r#"{"kind":"bt","models":["a","b"],"coefficients":[1,2]}"#,
            &m,
            FeedbackKind::Bt,
        );
        assert_eq!(
            dim,
            Err(RemoteError::DimensionMismatch {
                expected: 3,
                found: 2
            })
        );
        let unknown = RemoteResponse::decode(
            r#"{"kind":"bt","models":["a","b","z"],"coefficients":[1,2,3]}"#,
            &m,
            FeedbackKind::Bt,
        );
        assert_eq!(unknown, Err(RemoteError::UnknownModel("z".into())));
        let kind = RemoteResponse::decode(
            r#"{"kind":"rk","models":["a","b","c"],"coefficients":[1,2,3],"eta":1}"#,
            &m,
            FeedbackKind::Bt,
        );
        assert!(matches!(kind, Err(RemoteError::Malformed(_))));
        assert!(matches!(
            RemoteResponse::decode("not json", &m, FeedbackKind::Bt),
            Err(RemoteError::Malformed(_))
        ));
        let dup = RemoteResponse::decode(
            r#"{"kind":"bt","models":["a","a","b"],"coefficients":[1,2,3]}"#,
            &m,
            FeedbackKind::Bt,
        );
        assert!(matches!(dup, Err(RemoteError::Malformed(_))));
        let lam = RemoteResponse::decode(
            r#"{"kind":"grounded_rk","models":["a","b","c"],"coefficients":[1,2,3],"lambda":0.5}"#,
            &m,
            FeedbackKind::GroundedRk,
        );
        assert!(matches!(lam, Err(RemoteError::Malformed(_))));
    }
}
