use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use super::CoefficientProvider;
use crate::error::{Error, Result};
use crate::feedback::{FeedbackKind, Leaderboard};
use crate::numeric::{sigmoid, softplus};
use crate::prompt::Prompt;

pub const DEFAULT_FEATURE_DIM: usize = 1 << 16;
/// Largest weight matrix a provider may hold (features x outputs).
pub const MAX_WEIGHTS: usize = 1 << 26;

/// Sparse feature vector, sorted by index with no duplicate indices.
pub type SparseFeatures = Vec<(u32, f64)>;

/// Bag-of-words featurizer: lowercase, split on non-alphanumeric characters,
/// hash each token into one of `dim - 1` buckets with a hash-derived sign.
/// Index 0 is a constant bias feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashingFeaturizer {
    dim: usize,
}

impl Default for HashingFeaturizer {
    fn default() -> Self {
        Self {
            dim: DEFAULT_FEATURE_DIM,
        }
    }
}

impl HashingFeaturizer {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 || dim > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "feature dimension {dim} out of range"
            )));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Bucket and sign of one already-normalized token.
    pub fn token_bucket(&self, token: &str) -> (u32, f64) {
        let mut h = FnvHasher::default();
        h.write(token.as_bytes());
        let h = h.finish();
        let bucket = 1 + (h % (self.dim as u64 - 1)) as u32;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        (bucket, sign)
    }

    pub fn featurize(&self, text: &str) -> SparseFeatures {
        let lower = text.to_lowercase();
        let mut feats: SparseFeatures = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| self.token_bucket(t))
            .collect();
        feats.push((0, 1.0));
        feats.sort_by_key(|&(i, _)| i);
        let mut merged: SparseFeatures = Vec::with_capacity(feats.len());
        for (i, v) in feats {
            match merged.last_mut() {
                Some((j, w)) if *j == i => *w += v,
                _ => merged.push((i, v)),
            }
        }
        merged
    }
}

/// Linear map from hashed prompt features to leaderboard coefficients,
/// `theta(z) = W^T phi(z)`.
///
/// The weight matrix has one row per feature and one column per output:
/// the M model coefficients, then a raw value `u` mapped to
/// `eta = softplus(u)` (Rao-Kupper) or `lambda = 1 + softplus(u)` (grounded).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureLinearProvider {
    featurizer: HashingFeaturizer,
    kind: FeedbackKind,
    num_models: usize,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LinearFile {
    kind: FeedbackKind,
    models: Vec<String>,
    dim: usize,
    weights: Vec<WeightRow>,
}

#[derive(Serialize, Deserialize)]
struct WeightRow {
    feature: u32,
    values: Vec<f64>,
}

impl FeatureLinearProvider {
    /// All-zero weights: a BT provider that predicts 0.5 for every pair.
    pub fn zeros(
        featurizer: HashingFeaturizer,
        kind: FeedbackKind,
        num_models: usize,
    ) -> Result<Self> {
        if num_models < 2 {
            return Err(Error::InvalidParameter("need at least two models".into()));
        }
        let outputs = num_models + kind.extra_params();
        let size = featurizer
            .dim()
            .checked_mul(outputs)
            .filter(|&n| n <= MAX_WEIGHTS);
        let Some(size) = size else {
            return Err(Error::InvalidParameter(format!(
                "{} features x {outputs} outputs exceeds {MAX_WEIGHTS} weights",
                featurizer.dim()
            )));
        };
        Ok(Self {
            featurizer,
            kind,
            num_models,
            weights: vec![0.0; size],
        })
    }

    pub fn featurizer(&self) -> &HashingFeaturizer {
        &self.featurizer
    }

    pub fn outputs(&self) -> usize {
        self.num_models + self.kind.extra_params()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Raw linear outputs `W^T phi` before any link function.
    pub fn raw_outputs(&self, features: &[(u32, f64)]) -> Vec<f64> {
        let k = self.outputs();
        let mut out = vec![0.0; k];
        for &(f, v) in features {
            let row = &self.weights[f as usize * k..(f as usize + 1) * k];
            for (o, w) in out.iter_mut().zip(row) {
                *o += v * w;
            }
        }
        out
    }

    pub(crate) fn leaderboard_from_raw(&self, raw: &[f64]) -> Leaderboard {
        let m = self.num_models;
        let coefs = raw[..m].to_vec();
        match self.kind {
            FeedbackKind::Bt => Leaderboard::bt(coefs),
            FeedbackKind::Rk => Leaderboard::rk(coefs, softplus(raw[m])),
            FeedbackKind::GroundedRk => Leaderboard::grounded_rk(coefs, 1.0 + softplus(raw[m])),
        }
    }

    /// Derivative of the extra leaderboard parameter with respect to its raw
    /// output.
    pub(crate) fn extra_link_derivative(&self, raw_extra: f64) -> f64 {
        match self.kind {
            FeedbackKind::Bt => 0.0,
            _ => sigmoid(raw_extra),
        }
    }

    pub fn evaluate_features(&self, features: &[(u32, f64)]) -> Result<Leaderboard> {
        if let Some(&(f, _)) = features
            .iter()
            .find(|(f, _)| *f as usize >= self.featurizer.dim())
        {
            return Err(Error::IndexOutOfRange {
                index: f as usize,
                models: self.featurizer.dim(),
            });
        }
        let lb = self.leaderboard_from_raw(&self.raw_outputs(features));
        lb.validate()?;
        Ok(lb)
    }

    pub fn to_json_string(&self, models: &[String]) -> Result<String> {
        if models.len() != self.num_models {
            return Err(Error::DimensionMismatch {
                expected: self.num_models,
                found: models.len(),
            });
        }
        let k = self.outputs();
        let weights = self
            .weights
            .chunks(k)
            .enumerate()
            .filter(|(_, row)| row.iter().any(|w| *w != 0.0))
            .map(|(f, row)| WeightRow {
                feature: f as u32,
                values: row.to_vec(),
            })
            .collect();
        let file = LinearFile {
            kind: self.kind,
            models: models.to_vec(),
            dim: self.featurizer.dim(),
            weights,
        };
        Ok(serde_json::to_string(&file)?)
    }

    /// Parses a provider file; returns the provider and its model names.
    pub fn from_json_str(text: &str) -> Result<(Self, Vec<String>)> {
        let file: LinearFile = serde_json::from_str(text)?;
        let featurizer = HashingFeaturizer::new(file.dim)?;
        let mut provider = Self::zeros(featurizer, file.kind, file.models.len())?;
        let k = provider.outputs();
        for row in file.weights {
            let f = row.feature as usize;
            if f >= file.dim {
                return Err(Error::IndexOutOfRange {
                    index: f,
                    models: file.dim,
                });
            }
            if row.values.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: row.values.len(),
                });
            }
            if row.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "non-finite weight in row {f}"
                )));
            }
            provider.weights[f * k..(f + 1) * k].copy_from_slice(&row.values);
        }
        Ok((provider, file.models))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Vec<String>)> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>, models: &[String]) -> Result<()> {
        std::fs::write(path, self.to_json_string(models)?)?;
        Ok(())
    }
}

impl CoefficientProvider for FeatureLinearProvider {
    fn kind(&self) -> FeedbackKind {
        self.kind
    }

    fn num_models(&self) -> usize {
        self.num_models
    }

    fn evaluate(&self, prompt: &Prompt) -> Result<Leaderboard> {
        self.evaluate_features(&self.featurizer.featurize(&prompt.text))
    }
}
