//! Parametric preference likelihoods.
//!
//! Three families relate a model pair to a vote outcome:
//!
//! * Bradley-Terry: `P(B wins) = sigmoid(theta_B - theta_A)`, two outcomes.
//! * Rao-Kupper: Bradley-Terry with a tie coefficient `eta`, three outcomes.
//! * Grounded Rao-Kupper: four outcomes, anchored by a fictitious "bad"
//!   model of strength zero so that raw coefficients carry absolute meaning.
//!
//! Every probability is evaluated in a form that stays finite for
//! coefficients of magnitude 50 and beyond. Tie mass is the residual
//! `1 - sum(other outcomes)` so that each distribution sums to one.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log_sigmoid, log_sum_exp, sigmoid, softplus};

/// A single vote result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    WinA,
    WinB,
    Tie,
    BothBad,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::WinA, Outcome::WinB, Outcome::Tie, Outcome::BothBad];

    /// The same vote seen with the two sides exchanged.
    pub fn flipped(self) -> Self {
        match self {
            Outcome::WinA => Outcome::WinB,
            Outcome::WinB => Outcome::WinA,
            other => other,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Outcome::WinA => 0,
            Outcome::WinB => 1,
            Outcome::Tie => 2,
            Outcome::BothBad => 3,
        }
    }

    /// Votes-file spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::WinA => "model_a",
            Outcome::WinB => "model_b",
            Outcome::Tie => "tie",
            Outcome::BothBad => "tie_both_bad",
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model_a" => Ok(Outcome::WinA),
            "model_b" => Ok(Outcome::WinB),
            "tie" => Ok(Outcome::Tie),
            "tie_both_bad" => Ok(Outcome::BothBad),
            other => Err(Error::parse(None, format!("unknown outcome `{other}`"))),
        }
    }
}

/// Which likelihood family a leaderboard belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    Bt,
    Rk,
    GroundedRk,
}

impl FeedbackKind {
    pub fn supports(self, outcome: Outcome) -> bool {
        match self {
            FeedbackKind::Bt => matches!(outcome, Outcome::WinA | Outcome::WinB),
            FeedbackKind::Rk => !matches!(outcome, Outcome::BothBad),
            FeedbackKind::GroundedRk => true,
        }
    }

    /// Number of parameters beyond the per-model coefficients.
    pub fn extra_params(self) -> usize {
        match self {
            FeedbackKind::Bt => 0,
            FeedbackKind::Rk | FeedbackKind::GroundedRk => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackKind::Bt => "bt",
            FeedbackKind::Rk => "rk",
            FeedbackKind::GroundedRk => "grounded_rk",
        }
    }
}

impl fmt::Display for FeedbackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeedbackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bt" => Ok(FeedbackKind::Bt),
            "rk" => Ok(FeedbackKind::Rk),
            "grounded_rk" => Ok(FeedbackKind::GroundedRk),
            other => Err(Error::parse(
                None,
                format!("unknown leaderboard kind `{other}`"),
            )),
        }
    }
}

/// Ordered pair of distinct model indices: `a` is shown on the left, `b` on
/// the right. As a two-hot vector it is `-1` at `a` and `+1` at `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModelPair {
    a: usize,
    b: usize,
}

impl ModelPair {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::SameModel(a));
        }
        Ok(Self { a, b })
    }

    pub fn a(self) -> usize {
        self.a
    }

    pub fn b(self) -> usize {
        self.b
    }

    pub fn swapped(self) -> Self {
        Self {
            a: self.b,
            b: self.a,
        }
    }

    pub fn check(self, models: usize) -> Result<Self> {
        for index in [self.a, self.b] {
            if index >= models {
                return Err(Error::IndexOutOfRange { index, models });
            }
        }
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BtParams {
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RkParams {
    pub theta: Vec<f64>,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundedRkParams {
    pub beta: Vec<f64>,
    pub lambda: f64,
}

impl GroundedRkParams {
    pub fn new(beta: Vec<f64>, lambda: f64) -> Result<Self> {
        let params = Self { beta, lambda };
        params.check()?;
        Ok(params)
    }

    fn check(&self) -> Result<()> {
        // NaN fails this comparison too.
        if !(self.lambda >= 1.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grounded Rao-Kupper lambda must be a finite value >= 1, got {}",
                self.lambda
            )));
        }
        check_finite(&self.beta)
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidParameter(format!(
            "coefficient {i} is not finite ({})",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// Probability of each outcome; unsupported outcomes carry zero mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutcomeProbs {
    pub win_a: f64,
    pub win_b: f64,
    pub tie: f64,
    pub both_bad: f64,
}

impl OutcomeProbs {
    pub fn get(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::WinA => self.win_a,
            Outcome::WinB => self.win_b,
            Outcome::Tie => self.tie,
            Outcome::BothBad => self.both_bad,
        }
    }

    pub fn total(&self) -> f64 {
        self.win_a + self.win_b + self.tie + self.both_bad
    }
}

/// `P(B beats A)` under Bradley-Terry.
pub fn bt_prob(params: &BtParams, pair: ModelPair) -> Result<f64> {
    pair.check(params.theta.len())?;
    Ok(sigmoid(params.theta[pair.b] - params.theta[pair.a]))
}

/// `(P(A), P(B), P(tie))` under Rao-Kupper, returned as [`OutcomeProbs`].
///
/// A negative `eta` implies negative tie mass for every pair and is rejected
/// here rather than at construction.
pub fn rk_probs(params: &RkParams, pair: ModelPair) -> Result<OutcomeProbs> {
    pair.check(params.theta.len())?;
    check_rk_eta(params.eta)?;
    let d = params.theta[pair.b] - params.theta[pair.a];
    let win_b = sigmoid(d - params.eta);
    let win_a = sigmoid(-d - params.eta);
    let tie = rk_log_tie(params.eta, d).exp();
    Ok(OutcomeProbs {
        win_a,
        win_b,
        tie,
        both_bad: 0.0,
    })
}

/// `ln P(tie)` for `d = theta_B - theta_A`, free of the cancellation in
/// `1 - P(A) - P(B)`:
/// `sigmoid(eta - d) - sigmoid(-eta - d) = 2 sinh(eta) e^-d / ((1 + e^(eta - d)) (1 + e^(-eta - d)))`.
fn rk_log_tie(eta: f64, d: f64) -> f64 {
    eta + (-(-2.0 * eta).exp_m1()).ln() - d - softplus(eta - d) - softplus(-eta - d)
}

fn check_rk_eta(eta: f64) -> Result<()> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Rao-Kupper tie coefficient {eta} implies negative tie probability"
        )));
    }
    Ok(())
}

/// Intermediate log-denominators of the grounded model for one pair.
struct GroundedTerms {
    beta_a: f64,
    beta_b: f64,
    ln_lambda: f64,
    /// ln(phi_A + lambda phi_B + 1)
    log_den_a: f64,
    /// ln(phi_B + lambda phi_A + 1)
    log_den_b: f64,
    /// ln(1 + phi_A + phi_B)
    log_den_bad: f64,
}

impl GroundedTerms {
    fn new(params: &GroundedRkParams, pair: ModelPair) -> Self {
        let beta_a = params.beta[pair.a];
        let beta_b = params.beta[pair.b];
        let ln_lambda = params.lambda.ln();
        Self {
            beta_a,
            beta_b,
            ln_lambda,
            log_den_a: log_sum_exp(&[beta_a, ln_lambda + beta_b, 0.0]),
            log_den_b: log_sum_exp(&[beta_b, ln_lambda + beta_a, 0.0]),
            log_den_bad: log_sum_exp(&[0.0, beta_a, beta_b]),
        }
    }

    fn log_win_a(&self) -> f64 {
        self.beta_a - self.log_den_a
    }

    fn log_win_b(&self) -> f64 {
        self.beta_b - self.log_den_b
    }

    fn log_bad(&self) -> f64 {
        -self.log_den_bad
    }

    /// ln(D_A + D_B) where D_A + D_B = (1 + lambda)(phi_A + phi_B) + 2.
    fn log_den_sum(&self) -> f64 {
        let l1 = self.ln_lambda.exp().ln_1p();
        log_sum_exp(&[l1 + self.beta_a, l1 + self.beta_b, std::f64::consts::LN_2])
    }

    /// Closed form of the residual tie mass:
    /// `(lambda - 1) phi_A phi_B (D_A + D_B) / (S D_A D_B)`.
    fn log_tie(&self, lambda: f64) -> f64 {
        (lambda - 1.0).ln() + self.beta_a + self.beta_b - self.log_den_bad + self.log_den_sum()
            - self.log_den_a
            - self.log_den_b
    }
}

/// `(P(A), P(B), P(both bad), P(tie))` under grounded Rao-Kupper.
pub fn grk_probs(params: &GroundedRkParams, pair: ModelPair) -> Result<OutcomeProbs> {
    pair.check(params.beta.len())?;
    params.check()?;
    let t = GroundedTerms::new(params, pair);
    let win_a = t.log_win_a().exp();
    let win_b = t.log_win_b().exp();
    let both_bad = t.log_bad().exp();
    let tie = t.log_tie(params.lambda).exp();
    Ok(OutcomeProbs {
        win_a,
        win_b,
        tie,
        both_bad,
    })
}

/// A leaderboard: per-model coefficients plus any tie/grounding parameter.
#[derive(Clone, Debug, PartialEq)]
pub enum Leaderboard {
    Bt(BtParams),
    Rk(RkParams),
    GroundedRk(GroundedRkParams),
}

/// Log-likelihood of one vote and its partial derivatives with respect to
/// the two involved coefficients and the extra parameter.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LocalGrad {
    pub log_lik: f64,
    pub d_a: f64,
    pub d_b: f64,
    pub d_extra: f64,
}

impl Leaderboard {
    pub fn bt(theta: Vec<f64>) -> Self {
        Leaderboard::Bt(BtParams { theta })
    }

    pub fn rk(theta: Vec<f64>, eta: f64) -> Self {
        Leaderboard::Rk(RkParams { theta, eta })
    }

    pub fn grounded_rk(beta: Vec<f64>, lambda: f64) -> Self {
        Leaderboard::GroundedRk(GroundedRkParams { beta, lambda })
    }

    pub fn kind(&self) -> FeedbackKind {
        match self {
            Leaderboard::Bt(_) => FeedbackKind::Bt,
            Leaderboard::Rk(_) => FeedbackKind::Rk,
            Leaderboard::GroundedRk(_) => FeedbackKind::GroundedRk,
        }
    }

    pub fn num_models(&self) -> usize {
        self.strengths().len()
    }

    /// The first M coefficients: the ranking part of the leaderboard.
    pub fn strengths(&self) -> &[f64] {
        match self {
            Leaderboard::Bt(p) => &p.theta,
            Leaderboard::Rk(p) => &p.theta,
            Leaderboard::GroundedRk(p) => &p.beta,
        }
    }

    pub fn strengths_mut(&mut self) -> &mut [f64] {
        match self {
            Leaderboard::Bt(p) => &mut p.theta,
            Leaderboard::Rk(p) => &mut p.theta,
            Leaderboard::GroundedRk(p) => &mut p.beta,
        }
    }

    /// `eta` for Rao-Kupper, `lambda` for grounded Rao-Kupper.
    pub fn extra(&self) -> Option<f64> {
        match self {
            Leaderboard::Bt(_) => None,
            Leaderboard::Rk(p) => Some(p.eta),
            Leaderboard::GroundedRk(p) => Some(p.lambda),
        }
    }

    /// Structural validity: finite coefficients and `lambda >= 1`.
    /// Rao-Kupper tie mass is checked at evaluation time instead.
    pub fn validate(&self) -> Result<()> {
        match self {
            Leaderboard::Bt(p) => check_finite(&p.theta),
            Leaderboard::Rk(p) => {
                check_finite(&p.theta)?;
                check_finite(&[p.eta])
            }
            Leaderboard::GroundedRk(p) => p.check(),
        }
    }

    /// Flat parameter vector: coefficients followed by the extra parameter.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.strengths().to_vec();
        v.extend(self.extra());
        v
    }

    pub fn from_flat(kind: FeedbackKind, flat: &[f64]) -> Result<Self> {
        let extra = kind.extra_params();
        if flat.len() < extra + 1 {
            return Err(Error::DimensionMismatch {
                expected: extra + 1,
                found: flat.len(),
            });
        }
        let m = flat.len() - extra;
        let coefs = flat[..m].to_vec();
        Ok(match kind {
            FeedbackKind::Bt => Leaderboard::bt(coefs),
            FeedbackKind::Rk => Leaderboard::rk(coefs, flat[m]),
            FeedbackKind::GroundedRk => Leaderboard::grounded_rk(coefs, flat[m]),
        })
    }

    /// The Bradley-Terry projection used for ranking and routing.
    pub fn to_bt(&self) -> BtParams {
        BtParams {
            theta: self.strengths().to_vec(),
        }
    }

    /// Probability of every outcome for `pair`.
    pub fn probs(&self, pair: ModelPair) -> Result<OutcomeProbs> {
        match self {
            Leaderboard::Bt(p) => {
                let win_b = bt_prob(p, pair)?;
                Ok(OutcomeProbs {
                    win_a: sigmoid(p.theta[pair.a] - p.theta[pair.b]),
                    win_b,
                    tie: 0.0,
                    both_bad: 0.0,
                })
            }
            Leaderboard::Rk(p) => rk_probs(p, pair),
            Leaderboard::GroundedRk(p) => grk_probs(p, pair),
        }
    }

    /// Probability that B wins given that the vote was decisive.
    pub fn decisive_win_prob(&self, pair: ModelPair) -> Result<f64> {
        match self {
            Leaderboard::Bt(p) => bt_prob(p, pair),
            _ => {
                let p = self.probs(pair)?;
                Ok(p.win_b / (p.win_a + p.win_b))
            }
        }
    }

    /// `ln g(outcome; pair)`.
    pub fn log_likelihood(&self, pair: ModelPair, outcome: Outcome) -> Result<f64> {
        self.local_grad(pair, outcome).map(|g| g.log_lik)
    }

    /// Gradient of [`Self::log_likelihood`] with respect to the flat
    /// parameter vector (see [`Self::to_flat`]).
    pub fn log_likelihood_gradient(&self, pair: ModelPair, outcome: Outcome) -> Result<Vec<f64>> {
        let g = self.local_grad(pair, outcome)?;
        let m = self.num_models();
        let mut grad = vec![0.0; m + self.kind().extra_params()];
        grad[pair.a] += g.d_a;
        grad[pair.b] += g.d_b;
        if self.kind().extra_params() > 0 {
            grad[m] = g.d_extra;
        }
        Ok(grad)
    }

    pub(crate) fn check_pair(&self, pair: ModelPair, outcome: Outcome) -> Result<()> {
        pair.check(self.num_models())?;
        if !self.kind().supports(outcome) {
            return Err(Error::UnsupportedOutcome {
                kind: self.kind(),
                outcome,
            });
        }
        Ok(())
    }

    pub(crate) fn local_grad(&self, pair: ModelPair, outcome: Outcome) -> Result<LocalGrad> {
        self.check_pair(pair, outcome)?;
        Ok(match self {
            Leaderboard::Bt(p) => bt_local(&p.theta, pair, outcome),
            Leaderboard::Rk(p) => {
                check_rk_eta(p.eta)?;
                rk_local(p, pair, outcome)
            }
            Leaderboard::GroundedRk(p) => {
                p.check()?;
                grk_local(p, pair, outcome)
            }
        })
    }
}

fn bt_local(theta: &[f64], pair: ModelPair, outcome: Outcome) -> LocalGrad {
    let d = theta[pair.b] - theta[pair.a];
    match outcome {
        Outcome::WinB => {
            let s = sigmoid(-d);
            LocalGrad {
                log_lik: log_sigmoid(d),
                d_a: -s,
                d_b: s,
                d_extra: 0.0,
            }
        }
        _ => {
            let s = sigmoid(d);
            LocalGrad {
                log_lik: log_sigmoid(-d),
                d_a: s,
                d_b: -s,
                d_extra: 0.0,
            }
        }
    }
}

fn rk_local(p: &RkParams, pair: ModelPair, outcome: Outcome) -> LocalGrad {
    let d = p.theta[pair.b] - p.theta[pair.a];
    let eta = p.eta;
    match outcome {
        Outcome::WinB => {
            let a = d - eta;
            let s = sigmoid(-a);
            LocalGrad {
                log_lik: log_sigmoid(a),
                d_a: -s,
                d_b: s,
                d_extra: -s,
            }
        }
        Outcome::WinA => {
            let b = -d - eta;
            let s = sigmoid(-b);
            LocalGrad {
                log_lik: log_sigmoid(b),
                d_a: s,
                d_b: -s,
                d_extra: -s,
            }
        }
        _ => {
            let log_lik = rk_log_tie(eta, d);
            let dd = -1.0 + sigmoid(eta - d) + sigmoid(-eta - d);
            let d_eta = 1.0 + 2.0 / (2.0 * eta).exp_m1() - sigmoid(eta - d) + sigmoid(-eta - d);
            LocalGrad {
                log_lik,
                d_a: -dd,
                d_b: dd,
                d_extra: d_eta,
            }
        }
    }
}

fn grk_local(p: &GroundedRkParams, pair: ModelPair, outcome: Outcome) -> LocalGrad {
    let t = GroundedTerms::new(p, pair);
    let lambda = p.lambda;
    // ratio(x, log_den) = e^x / den
    let ratio = |x: f64, log_den: f64| (x - log_den).exp();
    match outcome {
        Outcome::WinA => LocalGrad {
            log_lik: t.log_win_a(),
            d_a: 1.0 - ratio(t.beta_a, t.log_den_a),
            d_b: -ratio(t.ln_lambda + t.beta_b, t.log_den_a),
            d_extra: -ratio(t.beta_b, t.log_den_a),
        },
        Outcome::WinB => LocalGrad {
            log_lik: t.log_win_b(),
            d_a: -ratio(t.ln_lambda + t.beta_a, t.log_den_b),
            d_b: 1.0 - ratio(t.beta_b, t.log_den_b),
            d_extra: -ratio(t.beta_a, t.log_den_b),
        },
        Outcome::BothBad => LocalGrad {
            log_lik: t.log_bad(),
            d_a: -ratio(t.beta_a, t.log_den_bad),
            d_b: -ratio(t.beta_b, t.log_den_bad),
            d_extra: 0.0,
        },
        Outcome::Tie => {
            let log_sum = t.log_den_sum();
            let l1 = lambda.ln_1p();
            let d_a = 1.0 - ratio(t.beta_a, t.log_den_bad) + ratio(l1 + t.beta_a, log_sum)
                - ratio(t.beta_a, t.log_den_a)
                - ratio(t.ln_lambda + t.beta_a, t.log_den_b);
            let d_b = 1.0 - ratio(t.beta_b, t.log_den_bad) + ratio(l1 + t.beta_b, log_sum)
                - ratio(t.ln_lambda + t.beta_b, t.log_den_a)
                - ratio(t.beta_b, t.log_den_b);
            let d_extra = 1.0 / (lambda - 1.0) + ratio(log_sum_exp(&[t.beta_a, t.beta_b]), log_sum)
                - ratio(t.beta_b, t.log_den_a)
                - ratio(t.beta_a, t.log_den_b);
            LocalGrad {
                log_lik: t.log_tie(lambda),
                d_a,
                d_b,
                d_extra,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pair(a: usize, b: usize) -> ModelPair {
        ModelPair::new(a, b).unwrap()
    }

    #[test]
    fn bt_examples() {
        let p = BtParams {
            theta: vec![0.3, 0.3],
        };
        assert_eq!(bt_prob(&p, pair(0, 1)).unwrap(), 0.5);
        let p = BtParams {
            theta: vec![0.0, 3f64.ln()],
        };
        assert_abs_diff_eq!(bt_prob(&p, pair(0, 1)).unwrap(), 0.75, epsilon = 1e-15);
        // Frozen from a 40-digit evaluation of 1 / (1 + e^1.4).
        let p = BtParams {
            theta: vec![0.7, -0.7],
        };
        assert_abs_diff_eq!(
            bt_prob(&p, pair(0, 1)).unwrap(),
            0.197_816_111_441_418_25,
            epsilon = 1e-15
        );
    }

    #[test]
    fn bt_rejects_bad_pairs() {
        assert!(matches!(ModelPair::new(1, 1), Err(Error::SameModel(1))));
        let p = BtParams {
            theta: vec![0.0, 0.0],
        };
        assert!(matches!(
            bt_prob(&p, pair(0, 2)),
            Err(Error::IndexOutOfRange {
                index: 2,
                models: 2
            })
        ));
    }

    #[test]
    fn rk_examples() {
        let p = RkParams {
            theta: vec![0.0, 0.0],
            eta: 0.0,
        };
        let r = rk_probs(&p, pair(0, 1)).unwrap();
        assert_eq!((r.win_a, r.win_b, r.tie), (0.5, 0.5, 0.0));

        let p = RkParams {
            theta: vec![0.0, 0.0],
            eta: 3f64.ln(),
        };
        let r = rk_probs(&p, pair(0, 1)).unwrap();
        assert_abs_diff_eq!(r.win_a, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(r.win_b, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(r.tie, 0.5, epsilon = 1e-15);

        let p = RkParams {
            theta: vec![1.0, 0.0],
            eta: 1.0,
        };
        let r = rk_probs(&p, pair(0, 1)).unwrap();
        assert_abs_diff_eq!(r.win_b, 0.119_202_922_022_117_56, epsilon = 1e-15);
        assert_abs_diff_eq!(r.win_a, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.tie, 0.380_797_077_977_882_4, epsilon = 1e-15);
    }

    #[test]
    fn rk_negative_tie_mass_is_rejected() {
        let p = RkParams {
            theta: vec![0.0, 0.0],
            eta: -0.1,
        };
        assert!(matches!(
            rk_probs(&p, pair(0, 1)),
            Err(Error::InvalidParameter(_))
        ));
        let lb = Leaderboard::Rk(p);
        assert!(lb.validate().is_ok());
        assert!(lb.log_likelihood(pair(0, 1), Outcome::WinA).is_err());
    }

    #[test]
    fn grk_examples() {
        let p = GroundedRkParams::new(vec![0.0, 0.0], 1.0).unwrap();
        let r = grk_probs(&p, pair(0, 1)).unwrap();
        for v in [r.win_a, r.win_b, r.both_bad] {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(r.tie, 0.0, epsilon = 1e-15);

        let p = GroundedRkParams::new(vec![50.0, -50.0], 1.0).unwrap();
        let r = grk_probs(&p, pair(0, 1)).unwrap();
        assert_abs_diff_eq!(r.win_a, 1.0, epsilon = 1e-15);
        assert!(r.win_b < 1e-40 && r.both_bad < 1e-20 && r.tie < 1e-15);

        let p = GroundedRkParams::new(vec![2f64.ln(), 0.0], 2.0).unwrap();
        let r = grk_probs(&p, pair(0, 1)).unwrap();
        assert_abs_diff_eq!(r.win_a, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(r.win_b, 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.both_bad, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(r.tie, 11.0 / 60.0, epsilon = 1e-15);
    }

    #[test]
    fn grk_rejects_small_lambda() {
        assert!(GroundedRkParams::new(vec![0.0, 0.0], 0.99).is_err());
        assert!(GroundedRkParams::new(vec![0.0, 0.0], f64::NAN).is_err());
        let p = GroundedRkParams {
            beta: vec![0.0, 0.0],
            lambda: 0.5,
        };
        assert!(grk_probs(&p, pair(0, 1)).is_err());
    }

    #[test]
    fn log_likelihood_examples() {
        let lb = Leaderboard::bt(vec![1.0, 1.0]);
        assert_abs_diff_eq!(
            lb.log_likelihood(pair(0, 1), Outcome::WinB).unwrap(),
            0.5f64.ln(),
            epsilon = 1e-15
        );
        let lb = Leaderboard::grounded_rk(vec![0.0, 0.0], 1.0);
        assert_abs_diff_eq!(
            lb.log_likelihood(pair(0, 1), Outcome::BothBad).unwrap(),
            (1.0f64 / 3.0).ln(),
            epsilon = 1e-15
        );
        let lb = Leaderboard::grounded_rk(vec![2f64.ln(), 0.0], 2.0);
        assert_abs_diff_eq!(
            lb.log_likelihood(pair(0, 1), Outcome::Tie).unwrap(),
            -1.696_449_289_423_730_1,
            epsilon = 1e-14
        );
    }

    #[test]
    fn unsupported_outcomes_error() {
        let lb = Leaderboard::bt(vec![0.0, 0.0]);
        assert!(matches!(
            lb.log_likelihood(pair(0, 1), Outcome::Tie),
            Err(Error::UnsupportedOutcome { .. })
        ));
        let lb = Leaderboard::rk(vec![0.0, 0.0], 1.0);
        assert!(lb.log_likelihood(pair(0, 1), Outcome::BothBad).is_err());
    }

    #[test]
    fn bt_gradient_examples() {
        let lb = Leaderboard::bt(vec![0.2, 0.2, 5.0]);
        let g = lb
            .log_likelihood_gradient(pair(0, 1), Outcome::WinB)
            .unwrap();
        assert_eq!(g, vec![-0.5, 0.5, 0.0]);
        let lb = Leaderboard::bt(vec![-1.3, 0.4, 2.0]);
        for o in [Outcome::WinA, Outcome::WinB] {
            let g = lb.log_likelihood_gradient(pair(2, 0), o).unwrap();
            assert_abs_diff_eq!(g.iter().sum::<f64>(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn grk_gradient_matches_finite_differences() {
        let lb = Leaderboard::grounded_rk(vec![2f64.ln(), 0.0], 2.0);
        let g = lb
            .log_likelihood_gradient(pair(0, 1), Outcome::WinA)
            .unwrap();
        let flat = lb.to_flat();
        let h = 1e-6;
        for (i, gi) in g.iter().enumerate() {
            let mut up = flat.clone();
            let mut dn = flat.clone();
            up[i] += h;
            dn[i] -= h;
            let f = |v: &[f64]| {
                Leaderboard::from_flat(FeedbackKind::GroundedRk, v)
                    .unwrap()
                    .log_likelihood(pair(0, 1), Outcome::WinA)
                    .unwrap()
            };
            let fd = (f(&up) - f(&dn)) / (2.0 * h);
            assert_abs_diff_eq!(*gi, fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn grounded_probs_are_not_shift_invariant() {
        let lb = Leaderboard::grounded_rk(vec![0.5, -0.2], 1.5);
        let shifted = Leaderboard::grounded_rk(vec![1.5, 0.8], 1.5);
        let p = lb.probs(pair(0, 1)).unwrap();
        let q = shifted.probs(pair(0, 1)).unwrap();
        assert!((p.both_bad - q.both_bad).abs() > 1e-3);
    }

    #[test]
    fn decisive_probability_reduces_to_bt() {
        let lb = Leaderboard::rk(vec![0.4, -0.1], 0.7);
        let p = lb.probs(pair(0, 1)).unwrap();
        let d = lb.decisive_win_prob(pair(0, 1)).unwrap();
        assert_abs_diff_eq!(d, p.win_b / (p.win_a + p.win_b), epsilon = 1e-15);
    }

    #[test]
    fn flat_round_trip() {
        let lb = Leaderboard::rk(vec![0.1, 0.2, 0.3], 0.4);
        assert_eq!(lb.to_flat(), vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(
            Leaderboard::from_flat(FeedbackKind::Rk, &lb.to_flat()).unwrap(),
            lb
        );
    }
}
