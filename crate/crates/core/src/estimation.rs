//! Maximum-likelihood fitting: marginal leaderboards from votes and
//! minibatch training of featurized linear providers.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::feedback::{FeedbackKind, Leaderboard, ModelPair, Outcome};
use crate::formats::Anchor;
use crate::numeric::{sigmoid, softplus, softplus_inv};
use crate::optim::bfgs;
use crate::prompt::Prompt;
use crate::providers::{CoefficientProvider, FeatureLinearProvider, SparseFeatures};

/// L2 strength used when the comparison graph is connected but some model
/// is never beaten (or never beats anyone), where the MLE is at infinity.
pub const DEFAULT_L2: f64 = 1e-6;

/// One pairwise vote on a prompt.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceRecord {
    pub prompt: Prompt,
    pub model_a: String,
    pub model_b: String,
    pub outcome: Outcome,
    pub weight: f64,
}

impl PreferenceRecord {
    pub fn new(
        prompt: Prompt,
        model_a: impl Into<String>,
        model_b: impl Into<String>,
        outcome: Outcome,
    ) -> Result<Self> {
        let (model_a, model_b) = (model_a.into(), model_b.into());
        if model_a == model_b {
            return Err(Error::InvalidParameter(format!(
                "model `{model_a}` compared with itself"
            )));
        }
        Ok(Self {
            prompt,
            model_a,
            model_b,
            outcome,
            weight: 1.0,
        })
    }

    pub fn with_weight(mut self, weight: f64) -> Result<Self> {
        if !weight.is_finite() || weight <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "record weight must be positive, got {weight}"
            )));
        }
        self.weight = weight;
        Ok(self)
    }

    /// Resolves the two model names against a name → index map.
    pub fn pair(&self, index: &ModelIndex) -> Result<ModelPair> {
        ModelPair::new(index.get(&self.model_a)?, index.get(&self.model_b)?)
    }
}

/// Name → position lookup for a model list.
#[derive(Clone, Debug)]
pub struct ModelIndex {
    map: HashMap<String, usize>,
}

impl ModelIndex {
    pub fn new(models: &[String]) -> Self {
        Self {
            map: models
                .iter()
                .enumerate()
                .map(|(i, m)| (m.clone(), i))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<usize> {
        self.map
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownModel(name.to_string()))
    }
}

/// Model names in order of first appearance.
pub fn models_in_records(records: &[PreferenceRecord]) -> Vec<String> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for r in records {
        for name in [&r.model_a, &r.model_b] {
            if seen.insert(name.as_str(), ()).is_none() {
                out.push(name.clone());
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub max_iters: usize,
    /// Bound on the infinity norm of the gradient of the mean objective.
    pub grad_tolerance: f64,
    pub l2_regularization: f64,
    pub anchor: Anchor,
    /// `None` starts from zero coefficients; `Some` from a seeded random point.
    pub seed: Option<u64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            grad_tolerance: 1e-8,
            l2_regularization: 0.0,
            anchor: Anchor::SumZero,
            seed: None,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if !(self.grad_tolerance > 0.0) {
            return Err(Error::InvalidParameter(
                "gradient tolerance must be positive".into(),
            ));
        }
        if !(self.l2_regularization >= 0.0) || !self.l2_regularization.is_finite() {
            return Err(Error::InvalidParameter(
                "l2 regularization must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub leaderboard: Leaderboard,
    pub models: Vec<String>,
    /// Weighted negative log-likelihood summed over the fitted votes.
    pub final_nll: f64,
    pub mean_nll: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub l2_applied: f64,
    pub anchor: Anchor,
    /// Votes dropped because the model kind cannot express their outcome.
    pub excluded: usize,
}

/// Weighted outcome totals per unordered model pair. Votes are stored with
/// the lower index on the left, flipping the outcome when swapped.
#[derive(Clone, Debug, PartialEq)]
pub struct VoteCounts {
    models: Vec<String>,
    counts: Vec<[f64; 4]>,
    total: f64,
}

impl VoteCounts {
    pub fn new(models: Vec<String>) -> Self {
        let m = models.len();
        Self {
            models,
            counts: vec![[0.0; 4]; m * m],
            total: 0.0,
        }
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    pub fn add(&mut self, pair: ModelPair, outcome: Outcome, weight: f64) -> Result<()> {
        let m = self.models.len();
        pair.check(m)?;
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidParameter(format!("vote weight {weight}")));
        }
        let (pair, outcome) = if pair.a() < pair.b() {
            (pair, outcome)
        } else {
            (pair.swapped(), outcome.flipped())
        };
        self.counts[pair.a() * m + pair.b()][outcome.index()] += weight;
        self.total += weight;
        Ok(())
    }

    /// Weighted counts in `Outcome::ALL` order, oriented as `pair`.
    pub fn get(&self, pair: ModelPair) -> [f64; 4] {
        let m = self.models.len();
        if pair.a() < pair.b() {
            self.counts[pair.a() * m + pair.b()]
        } else {
            let c = self.counts[pair.b() * m + pair.a()];
            let mut out = [0.0; 4];
            for o in Outcome::ALL {
                out[o.flipped().index()] = c[o.index()];
            }
            out
        }
    }

    fn nonzero(&self) -> impl Iterator<Item = (ModelPair, &[f64; 4])> {
        let m = self.models.len();
        self.counts.iter().enumerate().filter_map(move |(i, c)| {
            let (a, b) = (i / m, i % m);
            (a < b && c.iter().any(|&w| w > 0.0)).then(|| (ModelPair::new(a, b).expect("a < b"), c))
        })
    }
}

/// Maximum-likelihood constant leaderboard for `records` over `models`.
/// Outcomes the kind cannot express (ties under BT, both-bad under RK) are
/// dropped and counted in the report.
pub fn fit_marginal(
    records: &[PreferenceRecord],
    models: &[String],
    kind: FeedbackKind,
    config: &FitConfig,
) -> Result<FitReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no votes to fit"));
    }
    let index = ModelIndex::new(models);
    let mut counts = VoteCounts::new(models.to_vec());
    let mut excluded = 0;
    for r in records {
        let pair = r.pair(&index)?;
        if !kind.supports(r.outcome) {
            excluded += 1;
            continue;
        }
        counts.add(pair, r.outcome, r.weight)?;
    }
    if excluded > 0 {
        log::warn!("{excluded} votes with outcomes unsupported by the {kind} model were excluded");
    }
    let mut report = fit_counts(&counts, kind, config)?;
    report.excluded = excluded;
    Ok(report)
}

/// Fits a constant leaderboard to (possibly fractional) vote counts.
pub fn fit_counts(
    counts: &VoteCounts,
    kind: FeedbackKind,
    config: &FitConfig,
) -> Result<FitReport> {
    config.validate()?;
    let m = counts.models.len();
    if m < 2 {
        return Err(Error::InvalidParameter("need at least two models".into()));
    }
    if counts.total <= 0.0 {
        return Err(Error::EmptyInput("no votes to fit"));
    }
    for (_, c) in counts.nonzero() {
        if let Some(o) = Outcome::ALL
            .into_iter()
            .find(|o| c[o.index()] > 0.0 && !kind.supports(*o))
        {
            return Err(Error::UnsupportedOutcome { kind, outcome: o });
        }
    }

    let graph = ComparisonGraph::new(counts, kind);
    let components = graph.weak_components();
    let mut l2 = config.l2_regularization;
    if components.len() > 1 && l2 == 0.0 {
        return Err(Error::NonIdentifiable {
            components: components
                .into_iter()
                .map(|c| {
                    c.into_iter()
                        .filter(|&i| i < m)
                        .map(|i| counts.models[i].clone())
                        .collect()
                })
                .collect(),
        });
    }
    if l2 == 0.0 && !graph.strongly_connected() {
        log::warn!("some model is undefeated or never wins; applying l2 = {DEFAULT_L2}");
        l2 = DEFAULT_L2;
    }

    let x0 = initial_point(kind, m, config.seed);
    let total = counts.total;
    let eval = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let lb = internal_to_leaderboard(kind, x);
        let mut nll = 0.0;
        let mut grad = vec![0.0; x.len()];
        for (pair, c) in counts.nonzero() {
            for o in Outcome::ALL {
                let w = c[o.index()];
                if w == 0.0 {
                    continue;
                }
                let g = lb.local_grad(pair, o).ok()?;
                nll -= w * g.log_lik;
                grad[pair.a()] -= w * g.d_a;
                grad[pair.b()] -= w * g.d_b;
                if kind.extra_params() > 0 {
                    grad[m] -= w * g.d_extra;
                }
            }
        }
        let mut value = nll / total;
        grad.iter_mut().for_each(|v| *v /= total);
        if kind.extra_params() > 0 {
            grad[m] *= sigmoid(x[m]);
        }
        for i in 0..m {
            value += 0.5 * l2 * x[i] * x[i];
            grad[i] += l2 * x[i];
        }
        value.is_finite().then_some((value, grad))
    };
    let min = bfgs(eval, x0, config.max_iters, config.grad_tolerance);

    let mut leaderboard = internal_to_leaderboard(kind, &min.x);
    let mean_nll = {
        let penalty: f64 = min.x[..m].iter().map(|v| 0.5 * l2 * v * v).sum();
        min.value - penalty
    };
    let anchor = if kind == FeedbackKind::GroundedRk {
        Anchor::None
    } else {
        apply_anchor(&mut leaderboard, &counts.models, &config.anchor)?;
        config.anchor.clone()
    };
    Ok(FitReport {
        leaderboard,
        models: counts.models.clone(),
        final_nll: mean_nll * total,
        mean_nll,
        iterations: min.iterations,
        converged: min.converged,
        gradient_norm: min.grad_norm,
        l2_applied: l2,
        anchor,
        excluded: 0,
    })
}

/// Shifts the strengths so the anchor condition holds.
pub fn apply_anchor(lb: &mut Leaderboard, models: &[String], anchor: &Anchor) -> Result<()> {
    let shift = match anchor {
        Anchor::SumZero => lb.strengths().iter().sum::<f64>() / lb.num_models() as f64,
        Anchor::FixModel(name) => lb.strengths()[ModelIndex::new(models).get(name)?],
        Anchor::None => 0.0,
    };
    lb.strengths_mut().iter_mut().for_each(|v| *v -= shift);
    Ok(())
}

// Internal coordinates: strengths, then u with eta = softplus(u) (RK) or
// lambda = 1 + softplus(u) (grounded), so every point is a valid model.
fn internal_to_leaderboard(kind: FeedbackKind, x: &[f64]) -> Leaderboard {
    let m = x.len() - kind.extra_params();
    let coefs = x[..m].to_vec();
    match kind {
        FeedbackKind::Bt => Leaderboard::bt(coefs),
        FeedbackKind::Rk => Leaderboard::rk(coefs, softplus(x[m])),
        FeedbackKind::GroundedRk => Leaderboard::grounded_rk(coefs, 1.0 + softplus(x[m])),
    }
}

fn initial_point(kind: FeedbackKind, m: usize, seed: Option<u64>) -> Vec<f64> {
    let mut x = vec![0.0; m];
    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        x.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    }
    if kind.extra_params() > 0 {
        x.push(softplus_inv(0.5));
    }
    x
}

/// Who-beat-whom digraph used for identifiability checks. Grounded models
/// get an extra node for the fictitious bad model.
struct ComparisonGraph {
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
}

impl ComparisonGraph {
    fn new(counts: &VoteCounts, kind: FeedbackKind) -> Self {
        let m = counts.models.len();
        let n = if kind == FeedbackKind::GroundedRk {
            m + 1
        } else {
            m
        };
        let bad = m;
        let mut g = Self {
            out: vec![Vec::new(); n],
            inc: vec![Vec::new(); n],
        };
        for (pair, c) in counts.nonzero() {
            let (a, b) = (pair.a(), pair.b());
            let has = |o: Outcome| c[o.index()] > 0.0;
            if has(Outcome::WinA) {
                g.edge(a, b);
            }
            if has(Outcome::WinB) {
                g.edge(b, a);
            }
            if has(Outcome::Tie) {
                g.edge(a, b);
                g.edge(b, a);
            }
            if kind == FeedbackKind::GroundedRk {
                if has(Outcome::WinA) || has(Outcome::Tie) {
                    g.edge(a, bad);
                }
                if has(Outcome::WinB) || has(Outcome::Tie) {
                    g.edge(b, bad);
                }
                if has(Outcome::BothBad) {
                    g.edge(bad, a);
                    g.edge(bad, b);
                }
            }
        }
        g
    }

    fn edge(&mut self, from: usize, to: usize) {
        self.out[from].push(to);
        self.inc[to].push(from);
    }

    fn reach(adj: &[&[Vec<usize>]], start: usize) -> Vec<bool> {
        let n = adj[0].len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            for list in adj {
                for &w in &list[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        seen
    }

    fn weak_components(&self) -> Vec<Vec<usize>> {
        let n = self.out.len();
        let mut assigned = vec![false; n];
        let mut comps = Vec::new();
        for s in 0..n {
            if assigned[s] {
                continue;
            }
            let seen = Self::reach(&[&self.out, &self.inc], s);
            let comp: Vec<usize> = (0..n).filter(|&i| seen[i]).collect();
            comp.iter().for_each(|&i| assigned[i] = true);
            comps.push(comp);
        }
        comps
    }

    fn strongly_connected(&self) -> bool {
        Self::reach(&[&self.out], 0).iter().all(|&v| v)
            && Self::reach(&[&self.inc], 0).iter().all(|&v| v)
    }
}

/// Weighted mean negative log-likelihood of `records` under the
/// leaderboards `provider` produces for their prompts.
pub fn nll_on_dataset<P: CoefficientProvider + ?Sized>(
    provider: &P,
    records: &[PreferenceRecord],
    models: &[String],
) -> Result<f64> {
    let losses = per_record_nll(provider, records, models)?;
    let total: f64 = records.iter().map(|r| r.weight).sum();
    Ok(losses
        .iter()
        .zip(records)
        .map(|(l, r)| l * r.weight)
        .sum::<f64>()
        / total)
}

/// Unweighted `-ln g` of every record.
pub fn per_record_nll<P: CoefficientProvider + ?Sized>(
    provider: &P,
    records: &[PreferenceRecord],
    models: &[String],
) -> Result<Vec<f64>> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no votes to score"));
    }
    if provider.num_models() != models.len() {
        return Err(Error::DimensionMismatch {
            expected: models.len(),
            found: provider.num_models(),
        });
    }
    let index = ModelIndex::new(models);
    records
        .iter()
        .map(|r| {
            let lb = provider.evaluate(&r.prompt)?;
            Ok(-lb.log_likelihood(r.pair(&index)?, r.outcome)?)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 64,
            learning_rate: 0.1,
            l2: 0.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedProvider {
    pub provider: FeatureLinearProvider,
    /// Mean loss of each minibatch, measured before its update.
    pub loss_history: Vec<f64>,
}

/// Adagrad minibatch descent on the summed negative log-likelihood.
pub fn train_provider(
    records: &[PreferenceRecord],
    mut provider: FeatureLinearProvider,
    models: &[String],
    config: &TrainConfig,
) -> Result<TrainedProvider> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no votes to train on"));
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0) || !(config.l2 >= 0.0) {
        return Err(Error::InvalidParameter(
            "invalid training configuration".into(),
        ));
    }
    let m = provider.num_models();
    if m != models.len() {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: models.len(),
        });
    }
    let kind = provider.kind();
    let index = ModelIndex::new(models);
    let data: Vec<(SparseFeatures, ModelPair, Outcome, f64)> = records
        .iter()
        .map(|r| {
            if !kind.supports(r.outcome) {
                return Err(Error::UnsupportedOutcome {
                    kind,
                    outcome: r.outcome,
                });
            }
            let feats = provider.featurizer().featurize(&r.prompt.text);
            Ok((feats, r.pair(&index)?, r.outcome, r.weight))
        })
        .collect::<Result<_>>()?;

    let k = provider.outputs();
    let mut accum = vec![0.0; provider.weights().len()];
    let mut grad = vec![0.0; provider.weights().len()];
    let mut touched: Vec<usize> = Vec::new();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::new();

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let step = history.len();
            let bw: f64 = batch.iter().map(|&i| data[i].3).sum();
            let mut loss = 0.0;
            touched.clear();
            for &i in batch {
                let (feats, pair, outcome, w) = &data[i];
                let raw = provider.raw_outputs(feats);
                let lb = provider.leaderboard_from_raw(&raw);
                let g = lb
                    .local_grad(*pair, *outcome)
                    .map_err(|e| Error::Diverged {
                        step,
                        message: e.to_string(),
                    })?;
                loss -= w * g.log_lik;
                let scale = w / bw;
                let mut douts = [
                    (pair.a(), -g.d_a * scale),
                    (pair.b(), -g.d_b * scale),
                    (m, 0.0),
                ];
                if k > m {
                    douts[2].1 = -g.d_extra * provider.extra_link_derivative(raw[m]) * scale;
                }
                for &(f, v) in feats {
                    let row = f as usize * k;
                    for &(o, d) in &douts[..if k > m { 3 } else { 2 }] {
                        grad[row + o] += v * d;
                    }
                    touched.push(f as usize);
                }
            }
            loss /= bw;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    step,
                    message: format!("batch loss is {loss}"),
                });
            }
            history.push(loss);

            touched.sort_unstable();
            touched.dedup();
            let weights = provider.weights_mut();
            for &f in &touched {
                for idx in f * k..(f + 1) * k {
                    let g = grad[idx] + config.l2 * weights[idx];
                    grad[idx] = 0.0;
                    if g == 0.0 {
                        continue;
                    }
                    accum[idx] += g * g;
                    weights[idx] -= config.learning_rate * g / (accum[idx].sqrt() + 1e-10);
                    if !weights[idx].is_finite() {
                        return Err(Error::Diverged {
                            step,
                            message: format!("weight {idx} became {}", weights[idx]),
                        });
                    }
                }
            }
        }
    }
    Ok(TrainedProvider {
        provider,
        loss_history: history,
    })
}

/// Presentation-only affine map `scale * theta + offset` to Arena-style
/// scores.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisplayScale {
    pub scale: f64,
    pub offset: f64,
}

impl Default for DisplayScale {
    fn default() -> Self {
        Self {
            scale: 400.0 / std::f64::consts::LN_10,
            offset: 1000.0,
        }
    }
}

impl DisplayScale {
    pub fn apply(&self, coefficients: &[f64]) -> Vec<f64> {
        coefficients
            .iter()
            .map(|t| self.scale * t + self.offset)
            .collect()
    }
}
