//! Model registry: names, per-query costs and the opponent distribution.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accepted deviation of the opponent weights from a unit sum. The extra
/// 1e-15 absorbs decimal-to-binary rounding of values written at the limit.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
const ROUNDING_SLACK: f64 = 1e-15;

/// Inputs of the per-query cost estimate `O_i * E[T_i]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostInputs {
    pub output_cost_per_token: f64,
    pub mean_output_tokens: f64,
}

impl CostInputs {
    pub fn new(output_cost_per_token: f64, mean_output_tokens: f64) -> Result<Self> {
        for (what, v) in [
            ("output cost per token", output_cost_per_token),
            ("mean output tokens", mean_output_tokens),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{what} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Self {
            output_cost_per_token,
            mean_output_tokens,
        })
    }

    /// Expected cost of one query.
    pub fn expected_cost(&self) -> f64 {
        self.output_cost_per_token * self.mean_output_tokens
    }
}

/// Immutable after construction; vector index `i` always refers to
/// `models()[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCatalog {
    models: Vec<String>,
    costs: Vec<f64>,
    opponent_dist: Vec<f64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    models: Vec<CatalogEntry>,
}

#[derive(Serialize, Deserialize)]
struct CatalogEntry {
    name: String,
    cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    opponent_weight: Option<f64>,
}

impl ModelCatalog {
    /// Builds a catalog; `opponent_dist = None` means uniform.
    pub fn new(
        models: Vec<String>,
        costs: Vec<f64>,
        opponent_dist: Option<Vec<f64>>,
    ) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Catalog("catalog lists no models".into()));
        }
        if costs.len() != models.len() {
            return Err(Error::Catalog(format!(
                "{} models but {} costs",
                models.len(),
                costs.len()
            )));
        }
        let mut index = HashMap::with_capacity(models.len());
        for (i, name) in models.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Catalog(format!("duplicate model name `{name}`")));
            }
        }
        if let Some((name, c)) = models
            .iter()
            .zip(&costs)
            .find(|(_, c)| !c.is_finite() || **c < 0.0)
        {
            return Err(Error::Catalog(format!(
                "model `{name}` has invalid cost {c}"
            )));
        }
        let m = models.len();
        let opponent_dist = match opponent_dist {
            None => vec![1.0 / m as f64; m],
            Some(q) => normalize_distribution(q, m).map_err(Error::Catalog)?,
        };
        Ok(Self {
            models,
            costs,
            opponent_dist,
            index,
        })
    }

    /// Same models and costs with a different opponent distribution.
    pub fn with_opponents(&self, q: Vec<f64>) -> Result<Self> {
        Self::new(self.models.clone(), self.costs.clone(), Some(q))
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn opponent_dist(&self) -> &[f64] {
        &self.opponent_dist
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownModel(name.to_string()))
    }

    pub fn min_cost(&self) -> f64 {
        self.costs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: CatalogFile = serde_json::from_str(text)?;
        let weights: Vec<Option<f64>> = file.models.iter().map(|e| e.opponent_weight).collect();
        let q = if weights.iter().all(Option::is_none) {
            None
        } else if weights.iter().all(Option::is_some) {
            Some(weights.into_iter().flatten().collect())
        } else {
            return Err(Error::Catalog(
                "opponent_weight must be given for every model or for none".into(),
            ));
        };
        let (models, costs) = file.models.into_iter().map(|e| (e.name, e.cost)).unzip();
        Self::new(models, costs, q)
    }

    pub fn to_json_string(&self) -> String {
        let file = CatalogFile {
            models: self
                .models
                .iter()
                .zip(&self.costs)
                .zip(&self.opponent_dist)
                .map(|((name, &cost), &q)| CatalogEntry {
                    name: name.clone(),
                    cost,
                    opponent_weight: Some(q),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

/// Validates a probability vector of length `m`, renormalizing when its sum
/// is off by more than rounding noise but within [`NORMALIZATION_TOLERANCE`].
pub(crate) fn normalize_distribution(
    q: Vec<f64>,
    m: usize,
) -> std::result::Result<Vec<f64>, String> {
    if q.len() != m {
        return Err(format!(
            "distribution has {} entries, expected {m}",
            q.len()
        ));
    }
    if let Some(v) = q.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(format!("distribution entry {v} is negative or not finite"));
    }
    let sum: f64 = q.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE + ROUNDING_SLACK {
        return Err(format!("distribution sums to {sum}, expected 1"));
    }
    if (sum - 1.0).abs() > 1e-12 {
        Ok(q.into_iter().map(|v| v / sum).collect())
    } else {
        Ok(q)
    }
}
