use std::collections::HashMap;

use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankroute::aggregation::{
    aggregate, average_leaderboard, l1_pred_distance, mean_soft_labels, PairDistribution,
    PromptDistribution,
};
use rankroute::estimation::{fit_counts, FitConfig, VoteCounts};
use rankroute::numeric::sigmoid;
use rankroute::providers::{ConstantProvider, TableProvider};
use rankroute::simulation::{make_world, sample_outcome, WorldConfig};
use rankroute::{FeedbackKind, Leaderboard, ModelPair, Prompt};

fn names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("m{i}")).collect()
}

fn prompt(i: usize) -> Prompt {
    Prompt::new(format!("prompt {i}"))
        .unwrap()
        .with_id(format!("p{i}"))
}

fn random_table(m: usize, n: usize, kind: FeedbackKind, seed: u64) -> (TableProvider, Vec<Prompt>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = HashMap::new();
    let mut prompts = Vec::new();
    for i in 0..n {
        let theta: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lb = match kind {
            FeedbackKind::Bt => Leaderboard::bt(theta),
            FeedbackKind::Rk => Leaderboard::rk(theta, 0.4),
            FeedbackKind::GroundedRk => Leaderboard::grounded_rk(theta, 1.7),
        };
        entries.insert(format!("p{i}"), lb);
        prompts.push(prompt(i));
    }
    (TableProvider::new(entries, None).unwrap(), prompts)
}

fn normalized(w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Votes drawn from the provider with prompts from `q` and pairs from `px`,
/// in random side order, then fit as an ordinary marginal leaderboard.
fn fit_on_simulated_votes(
    provider: &TableProvider,
    q: &PromptDistribution,
    px: &PairDistribution,
    n: usize,
    seed: u64,
) -> Leaderboard {
    let m = px.num_models();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prompt_cdf = cumulative(q.weights());
    let pairs: Vec<(ModelPair, f64)> = px.iter().collect();
    let pair_cdf = cumulative(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let leaderboards: Vec<Leaderboard> = q
        .prompts()
        .iter()
        .map(|p| rankroute::providers::CoefficientProvider::evaluate(provider, p).unwrap())
        .collect();
    let mut counts = VoteCounts::new(names(m));
    for _ in 0..n {
        let z = draw(&prompt_cdf, rng.random());
        let mut pair = pairs[draw(&pair_cdf, rng.random())].0;
        if rng.random::<bool>() {
            pair = pair.swapped();
        }
        let outcome = sample_outcome(&leaderboards[z], pair, &mut rng).unwrap();
        if FeedbackKind::Bt.supports(outcome) {
            counts.add(pair, outcome, 1.0).unwrap();
        }
    }
    fit_counts(&counts, FeedbackKind::Bt, &FitConfig::default())
        .unwrap()
        .leaderboard
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    w.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|c| u < *c).unwrap_or(cdf.len() - 1)
}

#[test]
fn aggregate_matches_a_fit_on_simulated_votes() {
    for seed in [1, 2] {
        let (provider, prompts) = random_table(4, 6, FeedbackKind::Bt, seed);
        let q = PromptDistribution::new(
            prompts,
            Some(normalized(vec![3.0, 1.0, 1.0, 2.0, 0.5, 0.5])),
        )
        .unwrap();
        let px = PairDistribution::new(4, normalized(vec![2.0, 1.0, 1.0, 1.0, 1.0, 2.0])).unwrap();
        let exact = aggregate(&provider, &names(4), &q, &px, &FitConfig::default()).unwrap();
        let fitted = fit_on_simulated_votes(&provider, &q, &px, 300_000, seed + 100);
        let gap = max_gap(exact.strengths(), fitted.strengths());
        assert!(gap < 0.02, "seed {seed}: {gap}");
    }
}

#[test]
fn two_models_invert_the_mean_win_probability() {
    let (provider, prompts) = random_table(2, 7, FeedbackKind::Bt, 5);
    let q = PromptDistribution::uniform(prompts.clone()).unwrap();
    let px = PairDistribution::uniform(2).unwrap();
    let lb = aggregate(&provider, &names(2), &q, &px, &FitConfig::default()).unwrap();
    let mean: f64 = prompts
        .iter()
        .map(|p| {
            let t = provider
                .get(p.id.as_deref().unwrap())
                .unwrap()
                .strengths()
                .to_vec();
            sigmoid(t[1] - t[0])
        })
        .sum::<f64>()
        / 7.0;
    let gap = lb.strengths()[1] - lb.strengths()[0];
    assert!((gap - (mean / (1.0 - mean)).ln()).abs() < 1e-8);
    assert!((lb.strengths()[0] + lb.strengths()[1]).abs() < 1e-12);
}

#[test]
fn duplicating_a_prompt_with_split_weight_changes_nothing() {
    let (provider, prompts) = random_table(4, 5, FeedbackKind::GroundedRk, 9);
    let px = PairDistribution::uniform(4).unwrap();
    let q = PromptDistribution::new(prompts.clone(), Some(vec![0.1, 0.2, 0.3, 0.2, 0.2])).unwrap();
    let mut dup = prompts.clone();
    dup.push(prompts[2].clone());
    let q2 = PromptDistribution::new(dup, Some(vec![0.1, 0.2, 0.15, 0.2, 0.2, 0.15])).unwrap();
    let a = aggregate(&provider, &names(4), &q, &px, &FitConfig::default()).unwrap();
    let b = aggregate(&provider, &names(4), &q2, &px, &FitConfig::default()).unwrap();
    assert!(max_gap(a.strengths(), b.strengths()) < 1e-8);
}

#[test]
fn averaging_and_aggregating_can_disagree() {
    // one lopsided prompt for m1 against three mild ones for m0
    let mut entries = HashMap::new();
    entries.insert("p0".to_string(), Leaderboard::bt(vec![0.0, 10.0]));
    for i in 1..4 {
        entries.insert(format!("p{i}"), Leaderboard::bt(vec![0.0, -1.0]));
    }
    let provider = TableProvider::new(entries, None).unwrap();
    let q = PromptDistribution::uniform((0..4).map(prompt).collect()).unwrap();
    let avg = average_leaderboard(&provider, &q).unwrap();
    let agg = aggregate(
        &provider,
        &names(2),
        &q,
        &PairDistribution::uniform(2).unwrap(),
        &FitConfig::default(),
    )
    .unwrap();
    assert!(avg.strengths()[1] > avg.strengths()[0]);
    assert!(agg.strengths()[1] < agg.strengths()[0]);
    // the aggregate agrees with the actual mean win probability
    let labels = mean_soft_labels(&provider, &q).unwrap();
    assert!(labels[0] < 0.5);
}

#[test]
fn pair_weights_only_matter_when_the_bt_fit_is_misspecified() {
    let provider = ConstantProvider::new(Leaderboard::bt(vec![0.3, -0.1, 0.9, -1.1])).unwrap();
    let q = PromptDistribution::uniform(vec![Prompt::new("x").unwrap()]).unwrap();
    let uniform = aggregate(
        &provider,
        &names(4),
        &q,
        &PairDistribution::uniform(4).unwrap(),
        &FitConfig::default(),
    )
    .unwrap();
    let skewed = PairDistribution::new(4, normalized(vec![5.0, 1.0, 0.2, 1.0, 3.0, 0.7])).unwrap();
    let other = aggregate(&provider, &names(4), &q, &skewed, &FitConfig::default()).unwrap();
    assert!(max_gap(uniform.strengths(), other.strengths()) < 1e-7);
    let (table, prompts) = random_table(4, 3, FeedbackKind::Bt, 4);
    let q = PromptDistribution::uniform(prompts).unwrap();
    let a = aggregate(
        &table,
        &names(4),
        &q,
        &PairDistribution::uniform(4).unwrap(),
        &FitConfig::default(),
    )
    .unwrap();
    let b = aggregate(&table, &names(4), &q, &skewed, &FitConfig::default()).unwrap();
    assert!(max_gap(a.strengths(), b.strengths()) > 1e-3);
}

#[test]
fn l1_distance_shrinks_with_subset_size() {
    let world = make_world(WorldConfig {
        prompt_jitter: 0.8,
        ..WorldConfig::new(11, 5, 1, 600, 1.0)
    })
    .unwrap();
    let provider = world.truth();
    let pool = world.prompts().to_vec();
    let px = PairDistribution::uniform(5).unwrap();
    let cfg = FitConfig::default();
    let full = aggregate(
        provider,
        world.models(),
        &PromptDistribution::uniform(pool.clone()).unwrap(),
        &px,
        &cfg,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut medians = Vec::new();
    for size in [10, 40, 160, 600] {
        let mut d: Vec<f64> = (0..15)
            .map(|_| {
                let sub = sample(&mut rng, pool.len(), size)
                    .into_iter()
                    .map(|i| pool[i].clone())
                    .collect();
                let lb = aggregate(
                    provider,
                    world.models(),
                    &PromptDistribution::uniform(sub).unwrap(),
                    &px,
                    &cfg,
                )
                .unwrap();
                l1_pred_distance(&lb, &full, &px).unwrap()
            })
            .collect();
        d.sort_by(f64::total_cmp);
        medians.push(d[d.len() / 2]);
    }
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
    assert!(medians[3] < 1e-8);
}

fn leaderboard_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0..4.0f64, 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn l1_distance_is_a_pseudometric(
        a in leaderboard_strategy(),
        b in leaderboard_strategy(),
        c in leaderboard_strategy(),
        w in prop::collection::vec(0.0..1.0f64, 6),
        shift in -5.0..5.0f64,
    ) {
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let px = PairDistribution::new(4, normalized(w)).unwrap();
        let (la, lb, lc) = (Leaderboard::bt(a.clone()), Leaderboard::bt(b), Leaderboard::bt(c));
        let ab = l1_pred_distance(&la, &lb, &px).unwrap();
        let ba = l1_pred_distance(&lb, &la, &px).unwrap();
        let ac = l1_pred_distance(&la, &lc, &px).unwrap();
        let cb = l1_pred_distance(&lc, &lb, &px).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, ba);
        prop_assert!(ab <= ac + cb + 1e-15);
        prop_assert_eq!(l1_pred_distance(&la, &la, &px).unwrap(), 0.0);
        let moved = Leaderboard::bt(a.iter().map(|t| t + shift).collect());
        prop_assert!(l1_pred_distance(&la, &moved, &px).unwrap() < 1e-12);
    }

    #[test]
    fn aggregated_field_win_rates_match_the_prompt_average(seed in 0u64..1000) {
        let (provider, prompts) = random_table(3, 4, FeedbackKind::Bt, seed);
        let q = PromptDistribution::uniform(prompts.clone()).unwrap();
        let lb = aggregate(&provider, &names(3), &q, &PairDistribution::uniform(3).unwrap(), &FitConfig::default()).unwrap();
        // with uniform pair weights the score equations pin each model's
        // mean win probability against the field to its prompt average
        let field = |t: &[f64], i: usize| (0..3).filter(|&j| j != i).map(|j| sigmoid(t[i] - t[j])).sum::<f64>() / 2.0;
        for i in 0..3 {
            let per: Vec<f64> = prompts.iter().map(|p| field(provider.get(p.id.as_deref().unwrap()).unwrap().strengths(), i)).collect();
            let mean = per.iter().sum::<f64>() / per.len() as f64;
            let got = field(lb.strengths(), i);
            prop_assert!((got - mean).abs() < 1e-7, "{got} vs {mean}");
        }
    }

    #[test]
    fn two_model_aggregates_lie_between_prompt_extremes(seed in 0u64..1000, kind_pick in 0usize..3, n in 1usize..8) {
        let kind = [FeedbackKind::Bt, FeedbackKind::Rk, FeedbackKind::GroundedRk][kind_pick];
        let (provider, prompts) = random_table(2, n, kind, seed);
        let q = PromptDistribution::uniform(prompts.clone()).unwrap();
        let lb = aggregate(&provider, &names(2), &q, &PairDistribution::uniform(2).unwrap(), &FitConfig::default()).unwrap();
        let pair = ModelPair::new(0, 1).unwrap();
        let per: Vec<f64> = prompts
            .iter()
            .map(|p| provider.get(p.id.as_deref().unwrap()).unwrap().decisive_win_prob(pair).unwrap())
            .collect();
        let lo = per.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = per.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let got = lb.decisive_win_prob(pair).unwrap();
        prop_assert!(got >= lo - 1e-7 && got <= hi + 1e-7, "{got} not in [{lo}, {hi}]");
    }
}

// With more than two models the fit only pins each model's win rate against
// the whole field, so a single pair can land outside its per-prompt range.
#[test]
fn pair_predictions_can_leave_the_prompt_range_with_more_models() {
    let (provider, prompts) = random_table(4, 5, FeedbackKind::Bt, 488);
    let q = PromptDistribution::uniform(prompts.clone()).unwrap();
    let lb = aggregate(
        &provider,
        &names(4),
        &q,
        &PairDistribution::uniform(4).unwrap(),
        &FitConfig::default(),
    )
    .unwrap();
    let pair = ModelPair::new(0, 3).unwrap();
    let lo = prompts
        .iter()
        .map(|p| {
            provider
                .get(p.id.as_deref().unwrap())
                .unwrap()
                .decisive_win_prob(pair)
                .unwrap()
        })
        .fold(f64::INFINITY, f64::min);
    assert!(lb.decisive_win_prob(pair).unwrap() < lo - 0.01);
}
