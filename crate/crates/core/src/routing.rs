//! Cost-constrained routing for a single prompt.
//!
//! For a leaderboard θ, opponent distribution q, costs c and budget C the
//! router solves
//!
//! ```text
//! maximize  πᵀ W q   subject to  πᵀ c ≤ C,  π ≥ 0,  Σπ = 1
//! ```
//!
//! where `W[b][a] = σ(θ_b − θ_a)`. Only the simplex and the budget can bind,
//! so the optimum sits at a vertex made of one model, or two models mixed so
//! that the budget holds with equality. Maximizing the win rate also
//! maximizes the router's implied BT coefficient, the root θ′ of
//! `Σ_a q_a σ(θ′ − θ_a) = R*`, because that map is increasing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::catalog::{normalize_distribution, ModelCatalog};
use crate::error::{Error, Result};
use crate::feedback::Leaderboard;
use crate::numeric::{dot, sigmoid};
use crate::prompt::Prompt;
use crate::providers::CoefficientProvider;
use crate::rootfind::solve_increasing;

/// Residual required of the router coefficient root.
pub const ROOT_TOLERANCE: f64 = 1e-14;
const ROOT_BRACKET: f64 = 40.0;

/// Pairwise win probabilities, `get(b, a) = σ(θ_b − θ_a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WinMatrix {
    m: usize,
    entries: Vec<f64>,
}

impl WinMatrix {
    pub fn new(theta: &[f64]) -> Self {
        let m = theta.len();
        let mut entries = vec![0.5; m * m];
        for b in 0..m {
            for a in 0..m {
                if a != b {
                    entries[b * m + a] = sigmoid(theta[b] - theta[a]);
                }
            }
        }
        Self { m, entries }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn get(&self, b: usize, a: usize) -> f64 {
        self.entries[b * self.m + a]
    }

    /// `W q`: each model's win rate against an opponent drawn from `q`.
    pub fn against(&self, q: &[f64]) -> Vec<f64> {
        self.entries.chunks(self.m).map(|row| dot(row, q)).collect()
    }
}

/// Win matrix of the leaderboard's first M coefficients.
pub fn win_matrix(lb: &Leaderboard) -> WinMatrix {
    WinMatrix::new(lb.strengths())
}

/// One prompt's routing instance.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutingProblem {
    theta: Vec<f64>,
    costs: Vec<f64>,
    opponents: Vec<f64>,
    budget: f64,
}

impl RoutingProblem {
    /// `budget = f64::INFINITY` removes the cost constraint.
    pub fn new(theta: Vec<f64>, costs: Vec<f64>, opponents: Vec<f64>, budget: f64) -> Result<Self> {
        let m = theta.len();
        if m == 0 {
            return Err(Error::EmptyInput("routing problem has no models"));
        }
        for found in [costs.len(), opponents.len()] {
            if found != m {
                return Err(Error::DimensionMismatch { expected: m, found });
            }
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidParameter(
                "costs must be finite and nonnegative".into(),
            ));
        }
        let opponents = normalize_distribution(opponents, m).map_err(Error::InvalidParameter)?;
        if budget.is_nan() {
            return Err(Error::InvalidParameter("budget is NaN".into()));
        }
        let min_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
        if budget < min_cost {
            return Err(Error::Infeasible { budget, min_cost });
        }
        Ok(Self {
            theta,
            costs,
            opponents,
            budget,
        })
    }

    /// Routes on the leaderboard's first M coefficients with the catalog's
    /// costs and opponent distribution.
    pub fn from_catalog(lb: &Leaderboard, catalog: &ModelCatalog, budget: f64) -> Result<Self> {
        Self::new(
            lb.strengths().to_vec(),
            catalog.costs().to_vec(),
            catalog.opponent_dist().to_vec(),
            budget,
        )
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn opponents(&self) -> &[f64] {
        &self.opponents
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn win_matrix(&self) -> WinMatrix {
        WinMatrix::new(&self.theta)
    }

    /// Expected win rate of `pi` against the opponent distribution.
    pub fn win_rate(&self, pi: &[f64]) -> f64 {
        dot(pi, &self.win_matrix().against(&self.opponents))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoutingPolicy {
    pub pi: Vec<f64>,
    pub expected_cost: f64,
    pub predicted_win_rate: f64,
    pub predicted_coefficient: f64,
}

impl RoutingPolicy {
    /// Models with positive probability.
    pub fn support(&self) -> Vec<usize> {
        (0..self.pi.len()).filter(|&i| self.pi[i] > 0.0).collect()
    }

    /// Most likely model, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.pi.iter().enumerate() {
            if p > self.pi[best] {
                best = i;
            }
        }
        best
    }

    /// Draws a model from `pi`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in self.pi.iter().enumerate() {
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
}

/// Vertex maximizing `valuesᵀπ` over the simplex with `πᵀc ≤ budget`.
/// Single models are preferred to mixtures and lower indices to higher ones
/// when objectives tie exactly.
pub fn solve_lp(values: &[f64], costs: &[f64], budget: f64) -> Result<Vec<f64>> {
    let m = values.len();
    if costs.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: costs.len(),
        });
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |value: f64, pi: Vec<f64>| {
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, pi));
        }
    };
    for i in 0..m {
        if costs[i] <= budget {
            let mut pi = vec![0.0; m];
            pi[i] = 1.0;
            consider(values[i], pi);
        }
    }
    for i in 0..m {
        for j in i + 1..m {
            let (ci, cj) = (costs[i], costs[j]);
            if ci.min(cj) < budget && budget < ci.max(cj) {
                let wi = (cj - budget) / (cj - ci);
                let wj = 1.0 - wi;
                let mut pi = vec![0.0; m];
                pi[i] = wi;
                pi[j] = wj;
                consider(wi * values[i] + wj * values[j], pi);
            }
        }
    }
    best.map(|(_, pi)| pi).ok_or_else(|| Error::Infeasible {
        budget,
        min_cost: costs.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Win-rate-maximizing policy within budget, with its predicted coefficient.
pub fn optimal_policy(problem: &RoutingProblem) -> Result<RoutingPolicy> {
    let w = problem.win_matrix();
    let values = w.against(&problem.opponents);
    let pi = solve_lp(&values, &problem.costs, problem.budget)?;
    policy_summary(problem, &w, pi)
}

/// Cost, win rate and implied coefficient of an arbitrary policy.
pub fn evaluate_policy(problem: &RoutingProblem, pi: Vec<f64>) -> Result<RoutingPolicy> {
    if pi.len() != problem.theta.len() {
        return Err(Error::DimensionMismatch {
            expected: problem.theta.len(),
            found: pi.len(),
        });
    }
    policy_summary(problem, &problem.win_matrix(), pi)
}

fn policy_summary(problem: &RoutingProblem, w: &WinMatrix, pi: Vec<f64>) -> Result<RoutingPolicy> {
    let predicted_coefficient = router_coefficient(&pi, w, &problem.opponents, &problem.theta)?;
    Ok(RoutingPolicy {
        expected_cost: dot(&pi, &problem.costs),
        predicted_win_rate: dot(&pi, &w.against(&problem.opponents)),
        predicted_coefficient,
        pi,
    })
}

/// `R* = πᵀWq`, then the θ′ solving `Σ_a q_a σ(θ′ − θ_a) = R*`.
pub fn router_coefficient(pi: &[f64], w: &WinMatrix, q: &[f64], theta: &[f64]) -> Result<f64> {
    let m = theta.len();
    for found in [pi.len(), w.len(), q.len()] {
        if found != m {
            return Err(Error::DimensionMismatch { expected: m, found });
        }
    }
    coefficient_for_win_rate(dot(pi, &w.against(q)), q, theta)
}

/// The BT coefficient whose expected win rate against `q` is `win_rate`.
pub fn coefficient_for_win_rate(win_rate: f64, q: &[f64], theta: &[f64]) -> Result<f64> {
    if !(win_rate > 0.0 && win_rate < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "win rate {win_rate} outside (0, 1)"
        )));
    }
    let lo = theta.iter().copied().fold(f64::INFINITY, f64::min) - ROOT_BRACKET;
    let hi = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max) + ROOT_BRACKET;
    solve_increasing(
        |t| opponent_win_rate(t, q, theta),
        win_rate,
        lo,
        hi,
        ROOT_TOLERANCE,
    )
}

/// `G(t) = Σ_a q_a σ(t − θ_a)`.
pub fn opponent_win_rate(t: f64, q: &[f64], theta: &[f64]) -> f64 {
    q.iter()
        .zip(theta)
        .map(|(qa, ta)| qa * sigmoid(t - ta))
        .sum()
}

/// Outcome of comparing the LP solution with an exhaustive grid search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub lp_win_rate: f64,
    pub lp_coefficient: f64,
    pub lp_support: usize,
    pub grid_points: usize,
    pub grid_best_win_rate: f64,
    pub grid_best_coefficient: f64,
    /// `grid_best_win_rate − lp_win_rate`.
    pub win_rate_gap: f64,
    /// `grid_best_coefficient − lp_coefficient`.
    pub coefficient_gap: f64,
    pub passed: bool,
}

/// Grid-searches feasible policies and checks that none beats the LP
/// solution, in win rate (tolerance 1e−4) or implied coefficient (1e−6),
/// and that the LP solution mixes at most two models.
///
/// The grid is the simplex lattice of the finest resolution with at most
/// `grid_size` points. Lattice points over budget are moved along the
/// segment toward each affordable single model until the budget binds, so
/// the grid covers the budget boundary too.
pub fn grid_equivalence_check(
    problem: &RoutingProblem,
    grid_size: usize,
) -> Result<EquivalenceReport> {
    let lp = optimal_policy(problem)?;
    let m = problem.theta.len();
    let w = problem.win_matrix();
    let values = w.against(&problem.opponents);
    let c = &problem.costs;
    let budget = problem.budget;
    let affordable: Vec<usize> = (0..m).filter(|&k| c[k] <= budget).collect();

    let resolution = lattice_resolution(m, grid_size.max(m));
    let mut best_rate = f64::NEG_INFINITY;
    let mut best_coef = f64::NEG_INFINITY;
    let mut count = 0;
    let mut visit = |pi: &[f64]| -> Result<()> {
        let rate = dot(pi, &values);
        let coef = coefficient_for_win_rate(rate, &problem.opponents, &problem.theta)?;
        best_rate = best_rate.max(rate);
        best_coef = best_coef.max(coef);
        count += 1;
        Ok(())
    };
    let mut point = vec![0usize; m];
    let mut pi = vec![0.0; m];
    let mut moved = vec![0.0; m];
    let mut result = Ok(());
    for_each_composition(&mut point, resolution, &mut |p| {
        if result.is_err() {
            return;
        }
        for (x, &k) in pi.iter_mut().zip(p.iter()) {
            *x = k as f64 / resolution as f64;
        }
        let cost = dot(&pi, c);
        if cost <= budget {
            result = visit(&pi);
            return;
        }
        for &k in &affordable {
            let t = (cost - budget) / (cost - c[k]);
            moved
                .iter_mut()
                .zip(&pi)
                .for_each(|(y, x)| *y = (1.0 - t) * x);
            moved[k] += t;
            if let Err(e) = visit(&moved) {
                result = Err(e);
                return;
            }
        }
    });
    result?;

    let win_rate_gap = best_rate - lp.predicted_win_rate;
    let coefficient_gap = best_coef - lp.predicted_coefficient;
    let lp_support = lp.support().len();
    Ok(EquivalenceReport {
        lp_win_rate: lp.predicted_win_rate,
        lp_coefficient: lp.predicted_coefficient,
        lp_support,
        grid_points: count,
        grid_best_win_rate: best_rate,
        grid_best_coefficient: best_coef,
        win_rate_gap,
        coefficient_gap,
        passed: win_rate_gap.abs() <= 1e-4 && coefficient_gap <= 1e-6 && lp_support <= 2,
    })
}

/// Largest r with C(r + m − 1, m − 1) ≤ max_points.
fn lattice_resolution(m: usize, max_points: usize) -> usize {
    let points = |r: usize| -> f64 { (1..m).map(|i| (r + i) as f64 / i as f64).product() };
    let mut r = 1;
    while points(r + 1) <= max_points as f64 {
        r += 1;
    }
    r
}

fn for_each_composition(point: &mut [usize], total: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(point: &mut [usize], i: usize, left: usize, f: &mut impl FnMut(&[usize])) {
        if i + 1 == point.len() {
            point[i] = left;
            f(point);
            return;
        }
        for k in 0..=left {
            point[i] = k;
            rec(point, i + 1, left - k, f);
        }
    }
    rec(point, 0, total, f);
}

/// A routing decision for one prompt.
#[derive(Clone, Debug, PartialEq)]
pub struct RouteDecision {
    pub model: usize,
    pub policy: RoutingPolicy,
    pub leaderboard: Leaderboard,
}

/// Evaluates the provider on `prompt`, solves the routing problem and picks
/// a model: sampled from π when `seed` is given, otherwise π's argmax.
pub fn route<P: CoefficientProvider + ?Sized>(
    provider: &P,
    prompt: &Prompt,
    catalog: &ModelCatalog,
    budget: f64,
    seed: Option<u64>,
) -> Result<RouteDecision> {
    if provider.num_models() != catalog.len() {
        return Err(Error::DimensionMismatch {
            expected: catalog.len(),
            found: provider.num_models(),
        });
    }
    let leaderboard = provider.evaluate(prompt)?;
    let problem = RoutingProblem::from_catalog(&leaderboard, catalog, budget)?;
    let policy = optimal_policy(&problem)?;
    let model = match seed {
        Some(s) => policy.sample(&mut ChaCha8Rng::seed_from_u64(s)),
        None => policy.argmax(),
    };
    Ok(RouteDecision {
        model,
        policy,
        leaderboard,
    })
}
