//! Per-category leaderboards and model-swap regression reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::aggregation::{aggregate, average_leaderboard, PairDistribution, PromptDistribution};
use crate::error::{Error, Result};
use crate::estimation::{FitConfig, ModelIndex};
use crate::feedback::{FeedbackKind, Leaderboard};
use crate::numeric::sigmoid;
use crate::prompt::Prompt;
use crate::providers::CoefficientProvider;

/// Aggregate leaderboard of one category.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoryLeaderboard {
    pub leaderboard: Leaderboard,
    pub prompt_count: usize,
}

/// Groups prompts by their label at `level`, keeping a stable order inside
/// each group. Prompts without a label at that level are dropped.
pub fn group_by_category(
    prompts: &[Prompt],
    level: usize,
) -> (BTreeMap<String, Vec<Prompt>>, usize) {
    let mut groups: BTreeMap<String, Vec<Prompt>> = BTreeMap::new();
    let mut skipped = 0;
    for p in prompts {
        match p.category(level) {
            Some(c) => groups.entry(c.to_string()).or_default().push(p.clone()),
            None => skipped += 1,
        }
    }
    for group in groups.values_mut() {
        group.sort_by_cached_key(|p| (p.cache_key(), p.text.clone()));
    }
    (groups, skipped)
}

/// Aggregates the provider over the uniform distribution on each category's
/// prompts.
pub fn category_leaderboards<P: CoefficientProvider + ?Sized>(
    provider: &P,
    models: &[String],
    prompts: &[Prompt],
    level: usize,
    px: &PairDistribution,
    config: &FitConfig,
) -> Result<BTreeMap<String, CategoryLeaderboard>> {
    let (groups, skipped) = group_by_category(prompts, level);
    if skipped > 0 {
        log::warn!("{skipped} prompts have no category at level {level} and were skipped");
    }
    let mut out = BTreeMap::new();
    for (label, group) in groups {
        let prompt_count = group.len();
        let q = PromptDistribution::uniform(group)?;
        let leaderboard = aggregate(provider, models, &q, px, config)?;
        out.insert(
            label,
            CategoryLeaderboard {
                leaderboard,
                prompt_count,
            },
        );
    }
    Ok(out)
}

/// `σ(θ_m − θ_ref)` for every model; the reference's own entry is 0.5.
pub fn win_rate_vs_reference(
    lb: &Leaderboard,
    models: &[String],
    reference: &str,
) -> Result<Vec<f64>> {
    if models.len() != lb.num_models() {
        return Err(Error::DimensionMismatch {
            expected: lb.num_models(),
            found: models.len(),
        });
    }
    let r = ModelIndex::new(models).get(reference)?;
    let theta = lb.strengths();
    Ok(theta.iter().map(|t| sigmoid(t - theta[r])).collect())
}

/// `σ(β_m)`: the probability a model's answer is not judged bad against the
/// fictitious bad model of a grounded leaderboard.
pub fn reliability_scores(lb: &Leaderboard) -> Result<Vec<f64>> {
    match lb {
        Leaderboard::GroundedRk(p) => Ok(p.beta.iter().map(|b| sigmoid(*b)).collect()),
        other => Err(Error::InvalidParameter(format!(
            "reliability needs a grounded leaderboard, got {}",
            other.kind()
        ))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CategoryReport {
    pub category: String,
    pub prompt_count: usize,
    #[serde(serialize_with = "serialize_leaderboard")]
    pub leaderboard: Leaderboard,
    /// Win rate of every model against the reference.
    pub win_rates: Vec<f64>,
    /// `σ(β_m)` of the category-averaged coefficients, for grounded
    /// providers.
    pub reliability: Option<Vec<f64>>,
}

fn serialize_leaderboard<S: serde::Serializer>(
    lb: &Leaderboard,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    lb.strengths().serialize(s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegressionFlag {
    pub category: String,
    pub model: String,
    pub win_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegressionReport {
    pub level: usize,
    pub reference: String,
    pub models: Vec<String>,
    pub candidates: Vec<String>,
    pub categories: Vec<CategoryReport>,
    /// Cells where a candidate loses to the reference more often than not.
    pub flags: Vec<RegressionFlag>,
}

/// Per-category win rates of `candidates` against `reference`, flagging
/// categories where a candidate's win rate is below one half.
pub fn regression_report<P: CoefficientProvider + ?Sized>(
    provider: &P,
    models: &[String],
    prompts: &[Prompt],
    candidates: &[String],
    reference: &str,
    level: usize,
    config: &FitConfig,
) -> Result<RegressionReport> {
    let index = ModelIndex::new(models);
    index.get(reference)?;
    let cand_idx: Vec<usize> = candidates
        .iter()
        .map(|c| index.get(c))
        .collect::<Result<_>>()?;
    let px = PairDistribution::uniform(models.len())?;
    let (groups, skipped) = group_by_category(prompts, level);
    if skipped > 0 {
        log::warn!("{skipped} prompts have no category at level {level} and were skipped");
    }
    if groups.is_empty() {
        return Err(Error::EmptyInput(
            "no prompt has a category at the requested level",
        ));
    }
    let mut categories = Vec::new();
    let mut flags = Vec::new();
    for (label, group) in groups {
        let prompt_count = group.len();
        let q = PromptDistribution::uniform(group)?;
        let leaderboard = aggregate(provider, models, &q, &px, config)?;
        let win_rates = win_rate_vs_reference(&leaderboard, models, reference)?;
        let reliability = if provider.kind() == FeedbackKind::GroundedRk {
            let avg = average_leaderboard(provider, &q)?;
            Some(avg.strengths().iter().map(|b| sigmoid(*b)).collect())
        } else {
            None
        };
        for (&i, name) in cand_idx.iter().zip(candidates) {
            if name != reference && win_rates[i] < 0.5 {
                flags.push(RegressionFlag {
                    category: label.clone(),
                    model: name.clone(),
                    win_rate: win_rates[i],
                });
            }
        }
        categories.push(CategoryReport {
            category: label,
            prompt_count,
            leaderboard,
            win_rates,
            reliability,
        });
    }
    Ok(RegressionReport {
        level,
        reference: reference.to_string(),
        models: models.to_vec(),
        candidates: candidates.to_vec(),
        categories,
        flags,
    })
}

impl RegressionReport {
    /// Plain-text table of candidate win rates in percent; flagged cells
    /// carry a trailing `*`.
    pub fn render_text(&self) -> String {
        let index = ModelIndex::new(&self.models);
        let cand: Vec<usize> = self
            .candidates
            .iter()
            .map(|c| index.get(c).expect("validated at construction"))
            .collect();
        let mut header = vec!["category".to_string(), "prompts".to_string()];
        header.extend(self.candidates.iter().cloned());
        let mut rows = vec![header];
        for c in &self.categories {
            let mut row = vec![c.category.clone(), c.prompt_count.to_string()];
            for (&i, name) in cand.iter().zip(&self.candidates) {
                let flagged = self
                    .flags
                    .iter()
                    .any(|f| f.category == c.category && &f.model == name);
                row.push(format!(
                    "{:.1}%{}",
                    100.0 * c.win_rates[i],
                    if flagged { "*" } else { "" }
                ));
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = format!("win rate vs {} (level {})\n", self.reference, self.level);
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (cell, w))| {
                    if j == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        if !self.flags.is_empty() {
            let _ = writeln!(out, "* win rate below 50%: possible regression");
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
