//! Coefficient providers: mappings from a prompt to a leaderboard.
//!
//! Every provider is deterministic, reports a fixed [`FeedbackKind`] and
//! always emits leaderboards over the same `num_models()` models, in catalog
//! index order.

use std::collections::HashMap;
use std::sync::Arc;

use crate::catalog::ModelCatalog;
use crate::error::{Error, Result};
use crate::feedback::{FeedbackKind, Leaderboard};
use crate::formats::{CategoryFile, TableFile};
use crate::prompt::Prompt;

mod linear;
mod remote;

pub use linear::{FeatureLinearProvider, HashingFeaturizer, SparseFeatures, DEFAULT_FEATURE_DIM};
pub use remote::{RemoteProvider, RemoteResponse};

/// Maps prompts to leaderboards. Implementations must be safe to call from
/// many threads at once.
pub trait CoefficientProvider: Send + Sync {
    fn kind(&self) -> FeedbackKind;

    fn num_models(&self) -> usize;

    fn evaluate(&self, prompt: &Prompt) -> Result<Leaderboard>;
}

impl<P: CoefficientProvider + ?Sized> CoefficientProvider for Arc<P> {
    fn kind(&self) -> FeedbackKind {
        (**self).kind()
    }

    fn num_models(&self) -> usize {
        (**self).num_models()
    }

    fn evaluate(&self, prompt: &Prompt) -> Result<Leaderboard> {
        (**self).evaluate(prompt)
    }
}

impl<P: CoefficientProvider + ?Sized> CoefficientProvider for Box<P> {
    fn kind(&self) -> FeedbackKind {
        (**self).kind()
    }

    fn num_models(&self) -> usize {
        (**self).num_models()
    }

    fn evaluate(&self, prompt: &Prompt) -> Result<Leaderboard> {
        (**self).evaluate(prompt)
    }
}

fn check_same_shape<'a>(
    mut lbs: impl Iterator<Item = &'a Leaderboard>,
) -> Result<Option<(FeedbackKind, usize)>> {
    let Some(first) = lbs.next() else {
        return Ok(None);
    };
    first.validate()?;
    let (kind, m) = (first.kind(), first.num_models());
    for lb in lbs {
        lb.validate()?;
        if lb.num_models() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: lb.num_models(),
            });
        }
        if lb.kind() != kind {
            return Err(Error::InvalidParameter(format!(
                "mixed leaderboard kinds: {kind} and {}",
                lb.kind()
            )));
        }
    }
    Ok(Some((kind, m)))
}

/// The same leaderboard for every prompt: marginal regression embedded as a
/// prompt-conditional provider.
#[derive(Clone, Debug)]
pub struct ConstantProvider {
    leaderboard: Leaderboard,
}

impl ConstantProvider {
    pub fn new(leaderboard: Leaderboard) -> Result<Self> {
        leaderboard.validate()?;
        Ok(Self { leaderboard })
    }

    pub fn leaderboard(&self) -> &Leaderboard {
        &self.leaderboard
    }
}

impl CoefficientProvider for ConstantProvider {
    fn kind(&self) -> FeedbackKind {
        self.leaderboard.kind()
    }

    fn num_models(&self) -> usize {
        self.leaderboard.num_models()
    }

    fn evaluate(&self, _prompt: &Prompt) -> Result<Leaderboard> {
        Ok(self.leaderboard.clone())
    }
}

/// Precomputed leaderboards keyed by prompt id.
#[derive(Clone, Debug)]
pub struct TableProvider {
    entries: HashMap<String, Leaderboard>,
    fallback: Option<Leaderboard>,
    kind: FeedbackKind,
    num_models: usize,
}

impl TableProvider {
    pub fn new(
        entries: HashMap<String, Leaderboard>,
        fallback: Option<Leaderboard>,
    ) -> Result<Self> {
        let (kind, num_models) = check_same_shape(entries.values().chain(fallback.iter()))?
            .ok_or(Error::EmptyInput("table provider has no leaderboards"))?;
        Ok(Self {
            entries,
            fallback,
            kind,
            num_models,
        })
    }

    pub fn from_table(table: TableFile) -> Result<Self> {
        Self::new(table.entries.into_iter().collect(), table.fallback)
    }

    pub fn get(&self, id: &str) -> Option<&Leaderboard> {
        self.entries.get(id)
    }
}

impl CoefficientProvider for TableProvider {
    fn kind(&self) -> FeedbackKind {
        self.kind
    }

    fn num_models(&self) -> usize {
        self.num_models
    }

    fn evaluate(&self, prompt: &Prompt) -> Result<Leaderboard> {
        prompt
            .id
            .as_deref()
            .and_then(|id| self.entries.get(id))
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| {
                Error::MissingLeaderboard(match &prompt.id {
                    Some(id) => format!("id `{id}` not in table and no fallback"),
                    None => "prompt has no id and the table has no fallback".into(),
                })
            })
    }
}

/// One leaderboard per category label at a fixed level of the prompt's
/// category path.
#[derive(Clone, Debug)]
pub struct CategoryProvider {
    per_category: HashMap<String, Leaderboard>,
    level: usize,
    fallback: Option<Leaderboard>,
    kind: FeedbackKind,
    num_models: usize,
}

impl CategoryProvider {
    pub fn new(
        per_category: HashMap<String, Leaderboard>,
        level: usize,
        fallback: Option<Leaderboard>,
    ) -> Result<Self> {
        let (kind, num_models) = check_same_shape(per_category.values().chain(fallback.iter()))?
            .ok_or(Error::EmptyInput("category provider has no leaderboards"))?;
        Ok(Self {
            per_category,
            level,
            fallback,
            kind,
            num_models,
        })
    }

    /// Loads a category file against `catalog`.
    pub fn from_file(file: &CategoryFile, catalog: &ModelCatalog) -> Result<Self> {
        let (per, fallback) = file.resolve(catalog)?;
        Self::new(per.into_iter().collect(), file.level, fallback)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn categories(&self) -> impl Iterator<Item = (&str, &Leaderboard)> {
        self.per_category.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn get(&self, label: &str) -> Option<&Leaderboard> {
        self.per_category.get(label)
    }
}

impl CoefficientProvider for CategoryProvider {
    fn kind(&self) -> FeedbackKind {
        self.kind
    }

    fn num_models(&self) -> usize {
        self.num_models
    }

    fn evaluate(&self, prompt: &Prompt) -> Result<Leaderboard> {
        prompt
            .category(self.level)
            .and_then(|c| self.per_category.get(c))
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| {
                Error::MissingLeaderboard(match prompt.category(self.level) {
                    Some(c) => format!("category `{c}` at level {} has no leaderboard", self.level),
                    None => format!("prompt has no category at level {}", self.level),
                })
            })
    }
}
