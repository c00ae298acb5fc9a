//! Synthetic ground-truth worlds for checking estimation, aggregation and
//! routing end to end.
//!
//! A world has category-structured true leaderboards: every model has a base
//! strength and each category perturbs it. Prompt texts carry their category
//! token so featurized providers can learn the structure. Optional per-prompt
//! jitter makes every prompt's leaderboard distinct.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::catalog::ModelCatalog;
use crate::error::{Error, Result};
use crate::estimation::PreferenceRecord;
use crate::feedback::{FeedbackKind, Leaderboard, ModelPair, Outcome};
use crate::numeric::{dot, sigmoid};
use crate::prompt::Prompt;
use crate::providers::{CategoryProvider, CoefficientProvider, TableProvider};
use crate::rootfind::solve_increasing;
use crate::routing::{coefficient_for_win_rate, optimal_policy, RoutingProblem, WinMatrix};

const FILLER: &[&str] = &[
    "please", "explain", "how", "why", "the", "a", "best", "way", "to", "write", "quick", "short",
    "example", "about", "with", "detail", "simple", "list", "steps", "compare", "idea", "review",
    "fix", "draft",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub seed: u64,
    pub num_models: usize,
    pub num_categories: usize,
    pub prompts_per_category: usize,
    /// Standard deviation of the per-category perturbation.
    pub effect_scale: f64,
    /// Standard deviation of an extra per-prompt perturbation.
    pub prompt_jitter: f64,
    pub kind: FeedbackKind,
    /// `eta` (Rao-Kupper) or `lambda` (grounded); ignored for BT.
    pub extra: Option<f64>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_models: 4,
            num_categories: 2,
            prompts_per_category: 50,
            effect_scale: 1.0,
            prompt_jitter: 0.0,
            kind: FeedbackKind::Bt,
            extra: None,
        }
    }
}

impl WorldConfig {
    pub fn new(
        seed: u64,
        num_models: usize,
        num_categories: usize,
        prompts_per_category: usize,
        effect_scale: f64,
    ) -> Self {
        Self {
            seed,
            num_models,
            num_categories,
            prompts_per_category,
            effect_scale,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
enum Truth {
    Category(CategoryProvider),
    Table(TableProvider),
}

/// Known ground truth plus the prompt pool it is evaluated on.
#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    config: WorldConfig,
    models: Vec<String>,
    categories: Vec<String>,
    category_leaderboards: Vec<Leaderboard>,
    prompts: Vec<Prompt>,
    truth: Truth,
}

pub fn make_world(config: WorldConfig) -> Result<SyntheticWorld> {
    let m = config.num_models;
    if m < 2 {
        return Err(Error::InvalidParameter(
            "a world needs at least two models".into(),
        ));
    }
    if config.num_categories == 0 || config.prompts_per_category == 0 {
        return Err(Error::InvalidParameter(
            "a world needs categories and prompts".into(),
        ));
    }
    for (what, v) in [
        ("effect scale", config.effect_scale),
        ("prompt jitter", config.prompt_jitter),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{what} must be finite and nonnegative"
            )));
        }
    }
    let extra = match config.kind {
        FeedbackKind::Bt => 0.0,
        FeedbackKind::Rk => config.extra.unwrap_or(0.3),
        FeedbackKind::GroundedRk => config.extra.unwrap_or(1.5),
    };
    let build = |coefs: Vec<f64>| -> Result<Leaderboard> {
        let lb = match config.kind {
            FeedbackKind::Bt => Leaderboard::bt(coefs),
            FeedbackKind::Rk => Leaderboard::rk(coefs, extra),
            FeedbackKind::GroundedRk => Leaderboard::grounded_rk(coefs, extra),
        };
        lb.validate()?;
        Ok(lb)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let base: Vec<f64> = (0..m).map(|_| normal()).collect();
    let categories: Vec<String> = (0..config.num_categories)
        .map(|k| format!("cat{k}"))
        .collect();
    let mut category_leaderboards = Vec::new();
    for _ in &categories {
        let coefs = base
            .iter()
            .map(|b| b + config.effect_scale * normal())
            .collect();
        category_leaderboards.push(build(coefs)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut prompts = Vec::new();
    let mut table = HashMap::new();
    for (k, label) in categories.iter().enumerate() {
        for i in 0..config.prompts_per_category {
            let words = rng.random_range(3..7);
            let mut text = label.to_string();
            for _ in 0..words {
                text.push(' ');
                text.push_str(FILLER[rng.random_range(0..FILLER.len())]);
            }
            let id = format!("{label}-{i}");
            if config.prompt_jitter > 0.0 {
                let coefs = category_leaderboards[k]
                    .strengths()
                    .iter()
                    .map(|t| t + config.prompt_jitter * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                table.insert(id.clone(), build(coefs)?);
            }
            prompts.push(
                Prompt::new(text)?
                    .with_id(id)
                    .with_categories([label.clone()]),
            );
        }
    }
    let truth = if config.prompt_jitter > 0.0 {
        Truth::Table(TableProvider::new(table, None)?)
    } else {
        Truth::Category(CategoryProvider::new(
            categories
                .iter()
                .cloned()
                .zip(category_leaderboards.iter().cloned())
                .collect(),
            0,
            None,
        )?)
    };
    Ok(SyntheticWorld {
        models: (0..m).map(|i| format!("model-{i}")).collect(),
        config,
        categories,
        category_leaderboards,
        prompts,
        truth,
    })
}

impl SyntheticWorld {
    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    /// True leaderboard of each category before per-prompt jitter.
    pub fn category_leaderboards(&self) -> &[Leaderboard] {
        &self.category_leaderboards
    }

    pub fn prompts(&self) -> &[Prompt] {
        &self.prompts
    }

    /// Prompts of one category.
    pub fn prompts_in(&self, category: &str) -> Vec<Prompt> {
        self.prompts
            .iter()
            .filter(|p| p.category(0) == Some(category))
            .cloned()
            .collect()
    }

    /// The exact provider: per-category, or per-prompt when jittered.
    pub fn truth(&self) -> &dyn CoefficientProvider {
        match &self.truth {
            Truth::Category(p) => p,
            Truth::Table(p) => p,
        }
    }

    /// A fresh prompt of category `k` outside the pool, for held-out data.
    /// Its truth is the category leaderboard.
    pub fn fresh_prompt<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Prompt> {
        let label = self
            .categories
            .get(k)
            .ok_or_else(|| Error::InvalidParameter(format!("no category {k}")))?;
        let mut text = label.clone();
        for _ in 0..rng.random_range(3..7) {
            text.push(' ');
            text.push_str(FILLER[rng.random_range(0..FILLER.len())]);
        }
        Ok(Prompt::new(text)?.with_categories([label.clone()]))
    }

    /// Truth for any prompt carrying a category label, falling back from
    /// prompt id to category.
    pub fn leaderboard_for(&self, prompt: &Prompt) -> Result<Leaderboard> {
        match self.truth().evaluate(prompt) {
            Ok(lb) => Ok(lb),
            Err(_) => {
                let label = prompt
                    .category(0)
                    .ok_or_else(|| Error::MissingLeaderboard("prompt has no category".into()))?;
                let k = self
                    .categories
                    .iter()
                    .position(|c| c == label)
                    .ok_or_else(|| {
                        Error::MissingLeaderboard(format!("unknown category `{label}`"))
                    })?;
                Ok(self.category_leaderboards[k].clone())
            }
        }
    }

    /// One outcome for `pair` on `prompt` under the world's feedback model.
    pub fn sample_vote<R: Rng + ?Sized>(
        &self,
        prompt: &Prompt,
        pair: ModelPair,
        rng: &mut R,
    ) -> Result<Outcome> {
        sample_outcome(&self.leaderboard_for(prompt)?, pair, rng)
    }

    /// `n` votes with prompts uniform over the pool and ordered pairs
    /// uniform over distinct models.
    pub fn sample_votes(&self, n: usize, seed: u64) -> Result<Vec<PreferenceRecord>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truths: Vec<Leaderboard> = self
            .prompts
            .iter()
            .map(|p| self.leaderboard_for(p))
            .collect::<Result<_>>()?;
        let m = self.models.len();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let z = rng.random_range(0..self.prompts.len());
            let a = rng.random_range(0..m);
            let b = (a + rng.random_range(1..m)) % m;
            let pair = ModelPair::new(a, b)?;
            let outcome = sample_outcome(&truths[z], pair, &mut rng)?;
            out.push(PreferenceRecord::new(
                self.prompts[z].clone(),
                self.models[a].clone(),
                self.models[b].clone(),
                outcome,
            )?);
        }
        Ok(out)
    }
}

impl SyntheticWorld {
    /// `n` votes, each on a newly generated prompt of a uniformly drawn
    /// category, judged by that category's leaderboard. Useful as held-out
    /// data for featurized providers.
    pub fn sample_fresh_votes(&self, n: usize, seed: u64) -> Result<Vec<PreferenceRecord>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.models.len();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let k = rng.random_range(0..self.categories.len());
            let prompt = self.fresh_prompt(k, &mut rng)?;
            let a = rng.random_range(0..m);
            let b = (a + rng.random_range(1..m)) % m;
            let outcome = sample_outcome(
                &self.category_leaderboards[k],
                ModelPair::new(a, b)?,
                &mut rng,
            )?;
            out.push(PreferenceRecord::new(
                prompt,
                self.models[a].clone(),
                self.models[b].clone(),
                outcome,
            )?);
        }
        Ok(out)
    }
}

/// Draws an outcome from the leaderboard's exact probabilities.
pub fn sample_outcome<R: Rng + ?Sized>(
    lb: &Leaderboard,
    pair: ModelPair,
    rng: &mut R,
) -> Result<Outcome> {
    let p = lb.probs(pair)?;
    Ok(outcome_from_uniform(
        &[p.win_a, p.win_b, p.tie, p.both_bad],
        rng.random(),
    ))
}

fn outcome_from_uniform(p: &[f64; 4], u: f64) -> Outcome {
    let mut acc = 0.0;
    for (o, &w) in Outcome::ALL.into_iter().zip(p) {
        acc += w;
        if u < acc {
            return o;
        }
    }
    // rounding left u above the total; return the last outcome with mass
    Outcome::ALL
        .into_iter()
        .zip(p)
        .rfind(|(_, w)| **w > 0.0)
        .map(|(o, _)| o)
        .unwrap_or(Outcome::WinA)
}

/// How the deployed router picks models.
#[derive(Clone)]
pub enum RouterSpec {
    /// Always the same model.
    Fixed(usize),
    /// The same policy for every prompt.
    Policy(Vec<f64>),
    /// Optimal per-prompt policy on the world's exact leaderboards.
    Optimal { budget: f64 },
    /// Optimal per-prompt policy on another provider's leaderboards.
    Provider {
        provider: Arc<dyn CoefficientProvider>,
        budget: f64,
    },
}

impl std::fmt::Debug for RouterSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RouterSpec::Fixed(m) => write!(f, "Fixed({m})"),
            RouterSpec::Policy(pi) => write!(f, "Policy({pi:?})"),
            RouterSpec::Optimal { budget } => write!(f, "Optimal {{ budget: {budget} }}"),
            RouterSpec::Provider { budget, .. } => write!(f, "Provider {{ budget: {budget} }}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeploymentResult {
    /// Router-vs-opponent votes; the router appears as model `router` on
    /// side B.
    pub records: Vec<PreferenceRecord>,
    pub n_votes: usize,
    /// One-parameter BT fit of the router against frozen opponent strengths.
    pub fitted_coefficient: f64,
    pub standard_error: f64,
    /// Coefficient predicted before deployment from the routing policies.
    pub predicted_coefficient: f64,
    pub empirical_win_rate: f64,
    pub win_rate_se: f64,
    /// Exact expected win rate of the router against the opponents.
    pub expected_win_rate: f64,
    pub mean_cost: f64,
    pub expected_cost: f64,
}

pub const ROUTER_NAME: &str = "router";

/// Per-prompt state shared by deployments on one world.
struct Frozen {
    theta: Vec<Vec<f64>>,
}

impl Frozen {
    fn new(world: &SyntheticWorld) -> Result<Self> {
        let theta = world
            .prompts
            .iter()
            .map(|p| Ok(world.leaderboard_for(p)?.strengths().to_vec()))
            .collect::<Result<_>>()?;
        Ok(Self { theta })
    }
}

fn policies(
    world: &SyntheticWorld,
    frozen: &Frozen,
    router: &RouterSpec,
    catalog: &ModelCatalog,
) -> Result<Vec<Vec<f64>>> {
    let m = world.models.len();
    let n = world.prompts.len();
    match router {
        RouterSpec::Fixed(k) => {
            if *k >= m {
                return Err(Error::IndexOutOfRange {
                    index: *k,
                    models: m,
                });
            }
            let mut pi = vec![0.0; m];
            pi[*k] = 1.0;
            Ok(vec![pi; n])
        }
        RouterSpec::Policy(pi) => {
            let pi = crate::catalog::normalize_distribution(pi.clone(), m)
                .map_err(Error::InvalidParameter)?;
            Ok(vec![pi; n])
        }
        RouterSpec::Optimal { budget } => frozen
            .theta
            .iter()
            .map(|t| {
                let problem = RoutingProblem::new(
                    t.clone(),
                    catalog.costs().to_vec(),
                    catalog.opponent_dist().to_vec(),
                    *budget,
                )?;
                Ok(optimal_policy(&problem)?.pi)
            })
            .collect(),
        RouterSpec::Provider { provider, budget } => world
            .prompts
            .iter()
            .map(|p| {
                let lb = provider.evaluate(p)?;
                let problem = RoutingProblem::from_catalog(&lb, catalog, *budget)?;
                Ok(optimal_policy(&problem)?.pi)
            })
            .collect(),
    }
}

fn pick(pi: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in pi.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Deploys `router` against opponents drawn from the catalog's opponent
/// distribution on prompts drawn uniformly from the pool. Outcomes follow
/// the BT projection of the true leaderboards. Every vote consumes exactly
/// four uniforms, so runs with equal seeds share random numbers.
pub fn deploy_router(
    world: &SyntheticWorld,
    router: &RouterSpec,
    catalog: &ModelCatalog,
    n_votes: usize,
    seed: u64,
) -> Result<DeploymentResult> {
    let frozen = Frozen::new(world)?;
    deploy_frozen(world, &frozen, router, catalog, n_votes, seed)
}

fn deploy_frozen(
    world: &SyntheticWorld,
    frozen: &Frozen,
    router: &RouterSpec,
    catalog: &ModelCatalog,
    n_votes: usize,
    seed: u64,
) -> Result<DeploymentResult> {
    let m = world.models.len();
    if catalog.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: catalog.len(),
        });
    }
    if n_votes == 0 {
        return Err(Error::EmptyInput("deployment needs at least one vote"));
    }
    let q = catalog.opponent_dist();
    let costs = catalog.costs();
    let pis = policies(world, frozen, router, catalog)?;
    let n_prompts = world.prompts.len();

    // exact quantities averaged over the uniform prompt pool
    let mut expected_win_rate = 0.0;
    let mut expected_cost = 0.0;
    for (theta, pi) in frozen.theta.iter().zip(&pis) {
        expected_win_rate += dot(pi, &WinMatrix::new(theta).against(q));
        expected_cost += dot(pi, costs);
    }
    expected_win_rate /= n_prompts as f64;
    expected_cost /= n_prompts as f64;
    let pooled = |t: f64| -> f64 {
        frozen
            .theta
            .iter()
            .map(|theta| {
                q.iter()
                    .zip(theta)
                    .map(|(qa, ta)| qa * sigmoid(t - ta))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / n_prompts as f64
    };
    let (lo, hi) = coefficient_bracket(&frozen.theta);
    let predicted_coefficient = solve_increasing(pooled, expected_win_rate, lo, hi, 1e-12)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n_votes);
    let mut opponents = Vec::with_capacity(n_votes);
    let mut wins = 0usize;
    let mut cost_sum = 0.0;
    for _ in 0..n_votes {
        let (u_prompt, u_opp, u_router, u_outcome): (f64, f64, f64, f64) =
            (rng.random(), rng.random(), rng.random(), rng.random());
        let z = ((u_prompt * n_prompts as f64) as usize).min(n_prompts - 1);
        let a = pick(q, u_opp);
        let b = pick(&pis[z], u_router);
        let theta = &frozen.theta[z];
        let router_wins = u_outcome < sigmoid(theta[b] - theta[a]);
        wins += router_wins as usize;
        cost_sum += costs[b];
        opponents.push(theta[a]);
        records.push(PreferenceRecord::new(
            world.prompts[z].clone(),
            world.models[a].clone(),
            ROUTER_NAME,
            if router_wins {
                Outcome::WinB
            } else {
                Outcome::WinA
            },
        )?);
    }

    let n = n_votes as f64;
    let empirical_win_rate = wins as f64 / n;
    let (fitted_coefficient, standard_error) = fit_router_coefficient(&opponents, wins)?;
    Ok(DeploymentResult {
        records,
        n_votes,
        fitted_coefficient,
        standard_error,
        predicted_coefficient,
        empirical_win_rate,
        win_rate_se: (empirical_win_rate * (1.0 - empirical_win_rate) / n).sqrt(),
        expected_win_rate,
        mean_cost: cost_sum / n,
        expected_cost,
    })
}

fn coefficient_bracket(thetas: &[Vec<f64>]) -> (f64, f64) {
    let all = thetas.iter().flatten().copied();
    let lo = all.clone().fold(f64::INFINITY, f64::min);
    let hi = all.fold(f64::NEG_INFINITY, f64::max);
    (lo - 40.0, hi + 40.0)
}

/// MLE and observed-information standard error of a single BT coefficient
/// given the opponents' fixed coefficients and the number of wins.
pub fn fit_router_coefficient(opponents: &[f64], wins: usize) -> Result<(f64, f64)> {
    let n = opponents.len();
    if n == 0 {
        return Err(Error::EmptyInput("no votes"));
    }
    if wins == 0 || wins == n {
        return Err(Error::InvalidParameter(format!(
            "router won {wins} of {n} votes; the coefficient is at infinity"
        )));
    }
    // score equation: mean sigmoid(t - theta_a) = win rate
    let mean = |t: f64| opponents.iter().map(|ta| sigmoid(t - ta)).sum::<f64>() / n as f64;
    let lo = opponents.iter().copied().fold(f64::INFINITY, f64::min) - 40.0;
    let hi = opponents.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 40.0;
    let t = solve_increasing(mean, wins as f64 / n as f64, lo, hi, 1e-13)?;
    let info: f64 = opponents
        .iter()
        .map(|ta| {
            let s = sigmoid(t - ta);
            s * (1.0 - s)
        })
        .sum();
    Ok((t, 1.0 / info.sqrt()))
}

/// Exact win rate of each single model against the catalog's opponents,
/// averaged over the prompt pool.
pub fn static_win_rates(world: &SyntheticWorld, catalog: &ModelCatalog) -> Result<Vec<f64>> {
    let frozen = Frozen::new(world)?;
    let m = world.models.len();
    let mut rates = vec![0.0; m];
    for theta in &frozen.theta {
        for (r, v) in rates
            .iter_mut()
            .zip(WinMatrix::new(theta).against(catalog.opponent_dist()))
        {
            *r += v;
        }
    }
    let n = frozen.theta.len() as f64;
    rates.iter_mut().for_each(|r| *r /= n);
    Ok(rates)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParetoPoint {
    pub budget: f64,
    /// `None` when the budget is below the cheapest model.
    pub deployment: Option<DeploymentResult>,
    /// Best single model within budget and its exact win rate.
    pub best_static: Option<(usize, f64)>,
}

/// Deploys the exact-provider optimal router at each budget, reusing the
/// same random numbers for every budget.
pub fn pareto_sweep(
    world: &SyntheticWorld,
    catalog: &ModelCatalog,
    budgets: &[f64],
    n_votes_per_budget: usize,
    seed: u64,
) -> Result<Vec<ParetoPoint>> {
    if budgets.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidParameter(
            "budgets must be sorted ascending".into(),
        ));
    }
    let frozen = Frozen::new(world)?;
    let statics = static_win_rates(world, catalog)?;
    budgets
        .iter()
        .map(|&budget| {
            let best_static = (0..statics.len())
                .filter(|&i| catalog.costs()[i] <= budget)
                .fold(None, |best: Option<(usize, f64)>, i| match best {
                    Some((_, r)) if r >= statics[i] => best,
                    _ => Some((i, statics[i])),
                });
            let deployment = if budget < catalog.min_cost() {
                None
            } else {
                Some(deploy_frozen(
                    world,
                    &frozen,
                    &RouterSpec::Optimal { budget },
                    catalog,
                    n_votes_per_budget,
                    seed,
                )?)
            };
            Ok(ParetoPoint {
                budget,
                deployment,
                best_static,
            })
        })
        .collect()
}

/// Input of the `simulate` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub world: WorldConfig,
    /// Per-model query costs; defaults to `1, 2, …, M`.
    #[serde(default)]
    pub costs: Option<Vec<f64>>,
    /// Opponent distribution; defaults to uniform.
    #[serde(default)]
    pub opponents: Option<Vec<f64>>,
    /// Budgets to sweep; `null` is unconstrained.
    pub budgets: Vec<Option<f64>>,
    pub n_votes: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPoint {
    pub budget: Option<f64>,
    pub feasible: bool,
    pub best_static_model: Option<String>,
    pub best_static_win_rate: Option<f64>,
    pub empirical_win_rate: Option<f64>,
    pub win_rate_se: Option<f64>,
    pub expected_win_rate: Option<f64>,
    pub fitted_coefficient: Option<f64>,
    pub standard_error: Option<f64>,
    pub predicted_coefficient: Option<f64>,
    pub mean_cost: Option<f64>,
    pub expected_cost: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub models: Vec<String>,
    pub costs: Vec<f64>,
    pub static_win_rates: Vec<f64>,
    pub points: Vec<ScenarioPoint>,
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn run(&self) -> Result<ScenarioResult> {
        let world = make_world(self.world.clone())?;
        let m = world.models().len();
        let costs = self
            .costs
            .clone()
            .unwrap_or_else(|| (1..=m).map(|c| c as f64).collect());
        let catalog = ModelCatalog::new(world.models().to_vec(), costs, self.opponents.clone())?;
        let budgets: Vec<f64> = self
            .budgets
            .iter()
            .map(|b| b.unwrap_or(f64::INFINITY))
            .collect();
        let sweep = pareto_sweep(&world, &catalog, &budgets, self.n_votes, self.seed)?;
        let statics = static_win_rates(&world, &catalog)?;
        let points = sweep
            .into_iter()
            .map(|p| {
                let d = p.deployment.as_ref();
                ScenarioPoint {
                    budget: p.budget.is_finite().then_some(p.budget),
                    feasible: d.is_some(),
                    best_static_model: p.best_static.map(|(i, _)| world.models()[i].clone()),
                    best_static_win_rate: p.best_static.map(|(_, r)| r),
                    empirical_win_rate: d.map(|d| d.empirical_win_rate),
                    win_rate_se: d.map(|d| d.win_rate_se),
                    expected_win_rate: d.map(|d| d.expected_win_rate),
                    fitted_coefficient: d.map(|d| d.fitted_coefficient),
                    standard_error: d.map(|d| d.standard_error),
                    predicted_coefficient: d.map(|d| d.predicted_coefficient),
                    mean_cost: d.map(|d| d.mean_cost),
                    expected_cost: d.map(|d| d.expected_cost),
                }
            })
            .collect();
        Ok(ScenarioResult {
            models: world.models().to_vec(),
            costs: catalog.costs().to_vec(),
            static_win_rates: statics,
            points,
        })
    }
}

/// Router coefficient predicted for a single prompt: the per-prompt root
/// of `G(θ′) = R*`.
pub fn predicted_coefficient_for(theta: &[f64], q: &[f64], pi: &[f64]) -> Result<f64> {
    coefficient_for_win_rate(dot(pi, &WinMatrix::new(theta).against(q)), q, theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worlds_are_reproducible() {
        let a = make_world(WorldConfig::new(7, 3, 2, 5, 1.0)).unwrap();
        let b = make_world(WorldConfig::new(7, 3, 2, 5, 1.0)).unwrap();
        assert_eq!(a.category_leaderboards(), b.category_leaderboards());
        assert_eq!(a.prompts(), b.prompts());
        assert_ne!(a.category_leaderboards()[0], a.category_leaderboards()[1]);
        let flat = make_world(WorldConfig::new(7, 3, 2, 5, 0.0)).unwrap();
        assert_eq!(
            flat.category_leaderboards()[0],
            flat.category_leaderboards()[1]
        );
    }

    #[test]
    fn prompts_carry_category_token() {
        let w = make_world(WorldConfig::new(1, 2, 3, 4, 1.0)).unwrap();
        for p in w.prompts() {
            let label = p.category(0).unwrap();
            assert!(p.text.starts_with(label));
            assert_eq!(
                w.truth().evaluate(p).unwrap(),
                w.leaderboard_for(p).unwrap()
            );
        }
    }

    #[test]
    fn outcome_sampling_frequency() {
        let lb = Leaderboard::bt(vec![3f64.ln(), 0.0]);
        let pair = ModelPair::new(0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let wins = (0..n)
            .filter(|_| sample_outcome(&lb, pair, &mut rng).unwrap() == Outcome::WinA)
            .count();
        assert!((wins as f64 / n as f64 - 0.75).abs() < 0.005);
    }

    #[test]
    fn router_fit_matches_closed_form() {
        // two opponents at 0, 3 wins of 4: t = ln 3
        let (t, se) = fit_router_coefficient(&[0.0; 4], 3).unwrap();
        assert!((t - 3f64.ln()).abs() < 1e-10);
        assert!((se - 1.0 / (4.0 * 0.75 * 0.25f64).sqrt()).abs() < 1e-9);
        assert!(fit_router_coefficient(&[0.0; 4], 4).is_err());
    }
}
