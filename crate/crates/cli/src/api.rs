//! Request and response bodies shared by the command line and the HTTP
//! service. Both paths render through [`render`], so identical inputs give
//! byte-identical output.

use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};

use rankroute::aggregation::{aggregate_report, PairDistribution, PromptDistribution};
use rankroute::estimation::FitConfig;
use rankroute::formats::LeaderboardDoc;
use rankroute::providers::CoefficientProvider;
use rankroute::routing::route;
use rankroute::{Error, ModelCatalog, Prompt, Result};

/// Most prompts one aggregate request may carry.
pub const MAX_AGGREGATE_PROMPTS: usize = 10_000;

/// Pretty JSON plus a trailing newline.
pub fn render<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("response serializes");
    s.push('\n');
    s
}

/// Immutable state behind every request.
pub struct Engine {
    pub catalog: ModelCatalog,
    pub provider: Arc<dyn CoefficientProvider>,
    pub default_budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptInput {
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_path: Option<Vec<String>>,
}

impl PromptInput {
    pub fn to_prompt(&self) -> Result<Prompt> {
        let mut p = Prompt::new(self.prompt.clone())?;
        p.id = self.prompt_id.clone();
        p.category_path = self.category_path.clone();
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteRequest {
    #[serde(flatten)]
    pub prompt: PromptInput,
    /// Absent: the configured default. `null`: unconstrained.
    #[serde(
        default,
        deserialize_with = "present",
        skip_serializing_if = "Option::is_none"
    )]
    pub budget: Option<Option<f64>>,
    /// Sample the model from the policy instead of taking its argmax.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn present<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Option<f64>>, D::Error> {
    Option::<f64>::deserialize(d).map(Some)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub model: String,
    pub probability: f64,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteResponse {
    pub model: String,
    pub model_index: usize,
    pub budget: Option<f64>,
    pub policy: Vec<PolicyEntry>,
    pub expected_cost: f64,
    pub predicted_win_rate: f64,
    pub predicted_coefficient: f64,
    pub leaderboard: LeaderboardDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRequest {
    pub prompts: Vec<PromptInput>,
}

impl Engine {
    pub fn route(&self, req: &RouteRequest) -> Result<RouteResponse> {
        let prompt = req.prompt.to_prompt()?;
        let budget = match req.budget {
            None => self.default_budget,
            Some(None) => f64::INFINITY,
            Some(Some(b)) => b,
        };
        let decision = route(
            self.provider.as_ref(),
            &prompt,
            &self.catalog,
            budget,
            req.seed,
        )?;
        let models = self.catalog.models();
        let policy = &decision.policy;
        Ok(RouteResponse {
            model: models[decision.model].clone(),
            model_index: decision.model,
            budget: budget.is_finite().then_some(budget),
            policy: models
                .iter()
                .zip(&policy.pi)
                .zip(self.catalog.costs())
                .map(|((m, &p), &c)| PolicyEntry {
                    model: m.clone(),
                    probability: p,
                    cost: c,
                })
                .collect(),
            expected_cost: policy.expected_cost,
            predicted_win_rate: policy.predicted_win_rate,
            predicted_coefficient: policy.predicted_coefficient,
            leaderboard: LeaderboardDoc::new(&decision.leaderboard, models, None),
        })
    }

    /// The provider's leaderboard for one prompt.
    pub fn leaderboard(&self, prompt: &PromptInput) -> Result<LeaderboardDoc> {
        let lb = self.provider.evaluate(&prompt.to_prompt()?)?;
        Ok(LeaderboardDoc::new(&lb, self.catalog.models(), None))
    }

    /// Soft-label aggregate over the uniform distribution on `prompts`,
    /// with uniform pair weights.
    pub fn aggregate(&self, prompts: &[PromptInput]) -> Result<LeaderboardDoc> {
        if prompts.is_empty() {
            return Err(Error::EmptyInput("no prompts to aggregate"));
        }
        if prompts.len() > MAX_AGGREGATE_PROMPTS {
            return Err(Error::InvalidParameter(format!(
                "at most {MAX_AGGREGATE_PROMPTS} prompts per request, got {}",
                prompts.len()
            )));
        }
        let prompts = prompts
            .iter()
            .map(PromptInput::to_prompt)
            .collect::<Result<Vec<_>>>()?;
        let config = FitConfig::default();
        let report = aggregate_report(
            self.provider.as_ref(),
            self.catalog.models(),
            &PromptDistribution::uniform(prompts)?,
            &PairDistribution::uniform(self.catalog.len())?,
            &config,
        )?;
        Ok(LeaderboardDoc::new(
            &report.leaderboard,
            self.catalog.models(),
            Some(&report.anchor),
        ))
    }
}
