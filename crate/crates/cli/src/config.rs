use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use rankroute::{FeedbackKind, ModelCatalog};

use crate::api::Engine;
use crate::provider_spec::{ProviderSpec, RemoteOptions};

/// Service settings, read from a JSON file. Relative paths inside the file
/// are resolved against the file's directory.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub catalog: PathBuf,
    pub provider: String,
    /// `None` (or `null`) routes without a budget.
    pub default_budget: Option<f64>,
    pub request_timeout_ms: u64,
    pub max_concurrent_requests: usize,
    pub remote_kind: FeedbackKind,
    pub remote_timeout_ms: u64,
    pub remote_cache_size: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            catalog: PathBuf::from("catalog.json"),
            provider: "constant".into(),
            default_budget: None,
            request_timeout_ms: 30_000,
            max_concurrent_requests: 64,
            remote_kind: FeedbackKind::Bt,
            remote_timeout_ms: 5_000,
            remote_cache_size: 4096,
        }
    }
}

impl ServiceConfig {
    pub fn from_json_str(text: &str, base: &Path) -> rankroute::Result<Self> {
        let mut cfg: ServiceConfig = serde_json::from_str(text)?;
        if cfg.catalog.is_relative() {
            cfg.catalog = base.join(&cfg.catalog);
        }
        if let Ok(spec) = cfg.provider.parse::<ProviderSpec>() {
            cfg.provider = spec.relative_to(base).to_string();
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> rankroute::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_millis(self.request_timeout_ms)
    }

    /// Loads the catalog and provider and checks the default budget.
    pub fn build_engine(&self) -> Result<Engine, String> {
        if self.max_concurrent_requests == 0 {
            return Err("max_concurrent_requests must be positive".into());
        }
        let spec: ProviderSpec = self.provider.parse()?;
        let catalog = ModelCatalog::load(&self.catalog)
            .map_err(|e| format!("catalog {}: {e}", self.catalog.display()))?;
        let remote = RemoteOptions {
            kind: self.remote_kind,
            timeout: Duration::from_millis(self.remote_timeout_ms),
            cache_size: self.remote_cache_size,
        };
        let provider = spec
            .load(&catalog, &remote)
            .map_err(|e| format!("provider {spec}: {e}"))?;
        let default_budget = self.default_budget.unwrap_or(f64::INFINITY);
        if !(default_budget >= catalog.min_cost()) {
            return Err(format!(
                "default budget {default_budget} is below the cheapest model cost {}",
                catalog.min_cost()
            ));
        }
        Ok(Engine {
            catalog,
            provider,
            default_budget,
        })
    }
}
