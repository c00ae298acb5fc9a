//! Collapsing prompt-conditional leaderboards into one leaderboard for a
//! distribution over prompts.
//!
//! The primary method refits a BT leaderboard against the soft labels the
//! provider implies, averaged over prompts. Because the cross-entropy is
//! linear in the label, the refit only needs the mean label of every pair,
//! which is fed to the marginal fitter as fractional vote counts.

use crate::catalog::normalize_distribution;
use crate::error::{Error, Result};
use crate::estimation::{fit_counts, FitConfig, FitReport, VoteCounts};
use crate::feedback::{FeedbackKind, Leaderboard, ModelPair, Outcome};
use crate::numeric::sigmoid;
use crate::prompt::Prompt;
use crate::providers::CoefficientProvider;

/// Discrete distribution over prompts.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptDistribution {
    prompts: Vec<Prompt>,
    weights: Vec<f64>,
}

impl PromptDistribution {
    /// `weights = None` means uniform.
    pub fn new(prompts: Vec<Prompt>, weights: Option<Vec<f64>>) -> Result<Self> {
        if prompts.is_empty() {
            return Err(Error::EmptyInput("prompt distribution has no prompts"));
        }
        let n = prompts.len();
        let weights = match weights {
            None => vec![1.0 / n as f64; n],
            Some(w) => normalize_distribution(w, n).map_err(Error::InvalidParameter)?,
        };
        Ok(Self { prompts, weights })
    }

    pub fn uniform(prompts: Vec<Prompt>) -> Result<Self> {
        Self::new(prompts, None)
    }

    pub fn prompts(&self) -> &[Prompt] {
        &self.prompts
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Prompt, f64)> {
        self.prompts.iter().zip(self.weights.iter().copied())
    }
}

/// Distribution over unordered model pairs `{a, b}`, stored for `a < b` in
/// lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDistribution {
    num_models: usize,
    weights: Vec<f64>,
}

impl PairDistribution {
    pub fn uniform(num_models: usize) -> Result<Self> {
        let n = num_pairs(num_models)?;
        Ok(Self {
            num_models,
            weights: vec![1.0 / n as f64; n],
        })
    }

    /// Weights in the order `(0,1), (0,2), …, (0,M-1), (1,2), …`.
    pub fn new(num_models: usize, weights: Vec<f64>) -> Result<Self> {
        let n = num_pairs(num_models)?;
        let weights = normalize_distribution(weights, n).map_err(Error::InvalidParameter)?;
        Ok(Self {
            num_models,
            weights,
        })
    }

    /// All mass on one pair.
    pub fn single(num_models: usize, a: usize, b: usize) -> Result<Self> {
        let pair = ModelPair::new(a, b)?.check(num_models)?;
        let mut weights = vec![0.0; num_pairs(num_models)?];
        let (lo, hi) = (pair.a().min(pair.b()), pair.a().max(pair.b()));
        weights[pair_position(num_models, lo, hi)] = 1.0;
        Ok(Self {
            num_models,
            weights,
        })
    }

    pub fn num_models(&self) -> usize {
        self.num_models
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        if a == b || a >= self.num_models || b >= self.num_models {
            return 0.0;
        }
        self.weights[pair_position(self.num_models, a.min(b), a.max(b))]
    }

    /// `(pair with a < b, weight)` for every pair.
    pub fn iter(&self) -> impl Iterator<Item = (ModelPair, f64)> + '_ {
        let m = self.num_models;
        (0..m)
            .flat_map(move |a| (a + 1..m).map(move |b| (a, b)))
            .zip(self.weights.iter().copied())
            .map(|((a, b), w)| (ModelPair::new(a, b).expect("a < b"), w))
    }
}

fn num_pairs(m: usize) -> Result<usize> {
    if m < 2 {
        return Err(Error::InvalidParameter("need at least two models".into()));
    }
    Ok(m * (m - 1) / 2)
}

fn pair_position(m: usize, a: usize, b: usize) -> usize {
    // pairs before row a: sum_{i<a} (m - 1 - i)
    a * (2 * m - a - 1) / 2 + (b - a - 1)
}

/// Mean over `q` of P(b beats a | decisive) for every pair `a < b`, in
/// [`PairDistribution`] order.
pub fn mean_soft_labels<P: CoefficientProvider + ?Sized>(
    provider: &P,
    q: &PromptDistribution,
) -> Result<Vec<f64>> {
    let m = provider.num_models();
    let n = num_pairs(m)?;
    let mut labels = vec![0.0; n];
    for (prompt, w) in q.iter() {
        let lb = provider.evaluate(prompt)?;
        if lb.num_models() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: lb.num_models(),
            });
        }
        let mut k = 0;
        for a in 0..m {
            for b in a + 1..m {
                labels[k] += w * lb.decisive_win_prob(ModelPair::new(a, b)?)?;
                k += 1;
            }
        }
    }
    Ok(labels)
}

/// Soft-label BT refit over `q` and `px`; see [`aggregate`].
pub fn aggregate_report<P: CoefficientProvider + ?Sized>(
    provider: &P,
    models: &[String],
    q: &PromptDistribution,
    px: &PairDistribution,
    config: &FitConfig,
) -> Result<FitReport> {
    let m = provider.num_models();
    for found in [models.len(), px.num_models()] {
        if found != m {
            return Err(Error::DimensionMismatch { expected: m, found });
        }
    }
    let labels = mean_soft_labels(provider, q)?;
    let mut counts = VoteCounts::new(models.to_vec());
    for ((pair, w), p) in px.iter().zip(labels) {
        if w > 0.0 {
            counts.add(pair, Outcome::WinB, w * p)?;
            counts.add(pair, Outcome::WinA, w * (1.0 - p))?;
        }
    }
    fit_counts(&counts, FeedbackKind::Bt, config)
}

/// The BT leaderboard minimizing the expected cross-entropy against the
/// provider's win probabilities, with prompts drawn from `q` and pairs from
/// `px`. Rao-Kupper style providers contribute their win probability given
/// a decisive vote.
pub fn aggregate<P: CoefficientProvider + ?Sized>(
    provider: &P,
    models: &[String],
    q: &PromptDistribution,
    px: &PairDistribution,
    config: &FitConfig,
) -> Result<Leaderboard> {
    aggregate_report(provider, models, q, px, config).map(|r| r.leaderboard)
}

/// `sum_z Q(z) theta(z)` over the first M coefficients.
///
/// Comparison baseline only: averaging log-odds does not average win
/// probabilities, so raising one model's average coefficient need not make
/// it more likely to win.
pub fn average_leaderboard<P: CoefficientProvider + ?Sized>(
    provider: &P,
    q: &PromptDistribution,
) -> Result<Leaderboard> {
    let m = provider.num_models();
    let mut theta = vec![0.0; m];
    for (prompt, w) in q.iter() {
        let lb = provider.evaluate(prompt)?;
        if lb.num_models() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: lb.num_models(),
            });
        }
        for (t, s) in theta.iter_mut().zip(lb.strengths()) {
            *t += w * s;
        }
    }
    Ok(Leaderboard::bt(theta))
}

/// `sum_x P_X(x) |sigmoid(x'theta1) - sigmoid(x'theta2)|` over the first M
/// coefficients of each leaderboard.
pub fn l1_pred_distance(
    lb1: &Leaderboard,
    lb2: &Leaderboard,
    px: &PairDistribution,
) -> Result<f64> {
    let m = lb1.num_models();
    for found in [lb2.num_models(), px.num_models()] {
        if found != m {
            return Err(Error::DimensionMismatch { expected: m, found });
        }
    }
    let (t1, t2) = (lb1.strengths(), lb2.strengths());
    Ok(px
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(pair, w)| {
            let (a, b) = (pair.a(), pair.b());
            w * (sigmoid(t1[b] - t1[a]) - sigmoid(t2[b] - t2[a])).abs()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{ConstantProvider, TableProvider};
    use std::collections::HashMap;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("m{i}")).collect()
    }

    #[test]
    fn pair_positions_are_lexicographic() {
        let m = 5;
        let mut k = 0;
        for a in 0..m {
            for b in a + 1..m {
                assert_eq!(pair_position(m, a, b), k);
                k += 1;
            }
        }
        let px = PairDistribution::single(4, 3, 1).unwrap();
        assert_eq!(px.weight(1, 3), 1.0);
        assert_eq!(px.weight(3, 1), 1.0);
        assert_eq!(px.iter().map(|(_, w)| w).sum::<f64>(), 1.0);
    }

    #[test]
    fn opposite_prompts_cancel() {
        let a = 1.7;
        let table = TableProvider::new(
            HashMap::from([
                ("z1".to_string(), Leaderboard::bt(vec![a, 0.0])),
                ("z2".to_string(), Leaderboard::bt(vec![-a, 0.0])),
            ]),
            None,
        )
        .unwrap();
        let q = PromptDistribution::uniform(vec![
            Prompt::new("x").unwrap().with_id("z1"),
            Prompt::new("y").unwrap().with_id("z2"),
        ])
        .unwrap();
        let px = PairDistribution::uniform(2).unwrap();
        let agg = aggregate(&table, &names(2), &q, &px, &FitConfig::default()).unwrap();
        assert!(agg.strengths().iter().all(|t| t.abs() < 1e-9));
        let avg = average_leaderboard(&table, &q).unwrap();
        assert_eq!(avg, Leaderboard::bt(vec![0.0, 0.0]));
    }

    #[test]
    fn constant_provider_is_a_fixed_point() {
        let lb = Leaderboard::bt(vec![0.3, -1.2, 0.9]);
        let p = ConstantProvider::new(lb.clone()).unwrap();
        let q =
            PromptDistribution::uniform(vec![Prompt::new("a").unwrap(), Prompt::new("b").unwrap()])
                .unwrap();
        let agg = aggregate(
            &p,
            &names(3),
            &q,
            &PairDistribution::uniform(3).unwrap(),
            &FitConfig::default(),
        )
        .unwrap();
        let mean = lb.strengths().iter().sum::<f64>() / 3.0;
        for (x, y) in agg.strengths().iter().zip(lb.strengths()) {
            assert!((x - (y - mean)).abs() < 1e-7);
        }
    }

    #[test]
    fn l1_distance_examples() {
        let px = PairDistribution::uniform(2).unwrap();
        let a = Leaderboard::bt(vec![0.0, 0.0]);
        let b = Leaderboard::bt(vec![3f64.ln(), 0.0]);
        assert!((l1_pred_distance(&a, &b, &px).unwrap() - 0.25).abs() < 1e-15);
        let shifted = Leaderboard::bt(vec![3f64.ln() + 2.0, 2.0]);
        assert!(l1_pred_distance(&b, &shifted, &px).unwrap() < 1e-15);
        assert!(l1_pred_distance(&a, &Leaderboard::bt(vec![0.0; 3]), &px).is_err());
    }
}
