//! Prompt-conditional leaderboards built from pairwise votes, and
//! cost-constrained routing on top of them.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod analysis;
pub mod catalog;
pub mod error;
pub mod estimation;
pub mod feedback;
pub mod formats;
pub mod numeric;
mod optim;
pub mod prompt;
pub mod providers;
pub mod rootfind;
pub mod routing;
pub mod simulation;

pub use catalog::{CostInputs, ModelCatalog};
pub use error::{Error, RemoteError, Result};
pub use feedback::{FeedbackKind, Leaderboard, ModelPair, Outcome, OutcomeProbs};
pub use prompt::Prompt;
