//! On-disk and wire formats.
//!
//! * Leaderboard JSON, shared by fit/aggregate output, provider files and
//!   the remote coefficient protocol:
//!   `{"kind":"bt"|"rk"|"grounded_rk","models":[..],"coefficients":[..],"eta":x?,"lambda":x?,"anchor":s?}`
//! * Votes JSONL, one record per line:
//!   `{"prompt":s,"prompt_id":s?,"category_path":[s]?,"model_a":s,"model_b":s,"outcome":"model_a"|"model_b"|"tie"|"tie_both_bad","weight":x?}`
//! * Prompts JSONL: the prompt fields of a vote record.
//! * Table-provider JSONL: `{"id":s,"kind":..,"coefficients":[..],"eta":x?,"lambda":x?}`
//!   in catalog order; a line with `"fallback":true` supplies the default.
//! * Category-provider JSON:
//!   `{"level":k,"categories":{label: leaderboard, ..},"fallback":leaderboard?}`
//!   with leaderboards in the shared schema, re-ordered to catalog order on load.
//!
//! All parsers take untrusted text and never panic.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::ModelCatalog;
use crate::error::{Error, Result};
use crate::estimation::PreferenceRecord;
use crate::feedback::{FeedbackKind, Leaderboard, Outcome};
use crate::prompt::Prompt;

/// How a fitted leaderboard was pinned down along its unidentified shift.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Anchor {
    #[default]
    SumZero,
    FixModel(String),
    /// Grounded models need no anchor.
    None,
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anchor::SumZero => f.write_str("sum_zero"),
            Anchor::FixModel(name) => write!(f, "fix:{name}"),
            Anchor::None => f.write_str("none"),
        }
    }
}

impl std::str::FromStr for Anchor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum_zero" => Ok(Anchor::SumZero),
            "none" => Ok(Anchor::None),
            _ => match s.strip_prefix("fix:") {
                Some(name) if !name.is_empty() => Ok(Anchor::FixModel(name.to_string())),
                _ => Err(Error::parse(None, format!("unknown anchor `{s}`"))),
            },
        }
    }
}

/// Serialized leaderboard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardDoc {
    pub kind: FeedbackKind,
    pub models: Vec<String>,
    pub coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
}

impl LeaderboardDoc {
    pub fn new(lb: &Leaderboard, models: &[String], anchor: Option<&Anchor>) -> Self {
        let (eta, lambda) = match lb {
            Leaderboard::Bt(_) => (None, None),
            Leaderboard::Rk(p) => (Some(p.eta), None),
            Leaderboard::GroundedRk(p) => (None, Some(p.lambda)),
        };
        Self {
            kind: lb.kind(),
            models: models.to_vec(),
            coefficients: lb.strengths().to_vec(),
            eta,
            lambda,
            anchor: anchor.map(ToString::to_string),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("leaderboard serializes")
    }

    /// The leaderboard in the doc's own model order.
    pub fn leaderboard(&self) -> Result<Leaderboard> {
        if self.models.len() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.models.len(),
                found: self.coefficients.len(),
            });
        }
        build_leaderboard(self.kind, self.coefficients.clone(), self.eta, self.lambda)
    }

    /// The leaderboard re-ordered to catalog index order. Every catalog
    /// model must be present exactly once.
    pub fn to_catalog_order(&self, catalog: &ModelCatalog) -> Result<Leaderboard> {
        let lb = self.leaderboard()?;
        if self.models.len() != catalog.len() {
            return Err(Error::DimensionMismatch {
                expected: catalog.len(),
                found: self.models.len(),
            });
        }
        let mut coefs = vec![f64::NAN; catalog.len()];
        for (name, &c) in self.models.iter().zip(lb.strengths()) {
            let i = catalog.index_of(name)?;
            if !coefs[i].is_nan() {
                return Err(Error::parse(None, format!("model `{name}` listed twice")));
            }
            coefs[i] = c;
        }
        let mut out = lb;
        out.strengths_mut().copy_from_slice(&coefs);
        Ok(out)
    }

    pub fn anchor(&self) -> Result<Option<Anchor>> {
        self.anchor.as_deref().map(str::parse).transpose()
    }
}

pub(crate) fn build_leaderboard(
    kind: FeedbackKind,
    coefficients: Vec<f64>,
    eta: Option<f64>,
    lambda: Option<f64>,
) -> Result<Leaderboard> {
    if coefficients.is_empty() {
        return Err(Error::EmptyInput("coefficients"));
    }
    let missing = |what: &str| Error::parse(None, format!("{kind} leaderboard requires `{what}`"));
    let lb = match kind {
        FeedbackKind::Bt => Leaderboard::bt(coefficients),
        FeedbackKind::Rk => Leaderboard::rk(coefficients, eta.ok_or_else(|| missing("eta"))?),
        FeedbackKind::GroundedRk => {
            Leaderboard::grounded_rk(coefficients, lambda.ok_or_else(|| missing("lambda"))?)
        }
    };
    lb.validate()?;
    Ok(lb)
}

#[derive(Deserialize)]
struct PromptLine {
    prompt: String,
    #[serde(default)]
    prompt_id: Option<String>,
    #[serde(default)]
    category_path: Option<Vec<String>>,
}

impl PromptLine {
    fn into_prompt(self) -> Result<Prompt> {
        let mut p = Prompt::new(self.prompt)?;
        p.id = self.prompt_id;
        p.category_path = self.category_path;
        Ok(p)
    }
}

#[derive(Deserialize)]
struct VoteLine {
    #[serde(flatten)]
    prompt: PromptLine,
    model_a: String,
    model_b: String,
    outcome: String,
    #[serde(default)]
    weight: Option<f64>,
}

#[derive(Serialize)]
struct VoteLineOut<'a> {
    prompt: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    prompt_id: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    category_path: Option<&'a [String]>,
    model_a: &'a str,
    model_b: &'a str,
    outcome: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

fn nonblank_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parses a votes JSONL document. Errors carry the 1-based line number.
pub fn parse_votes(text: &str) -> Result<Vec<PreferenceRecord>> {
    nonblank_lines(text)
        .map(|(n, line)| parse_vote_line(line).map_err(|e| with_line(e, n)))
        .collect()
}

fn parse_vote_line(line: &str) -> Result<PreferenceRecord> {
    let v: VoteLine = serde_json::from_str(line)?;
    let outcome: Outcome = v.outcome.parse()?;
    let weight = v.weight.unwrap_or(1.0);
    PreferenceRecord::new(v.prompt.into_prompt()?, v.model_a, v.model_b, outcome)?
        .with_weight(weight)
}

pub fn votes_to_jsonl(records: &[PreferenceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let line = VoteLineOut {
            prompt: &r.prompt.text,
            prompt_id: r.prompt.id.as_deref(),
            category_path: r.prompt.category_path.as_deref(),
            model_a: &r.model_a,
            model_b: &r.model_b,
            outcome: r.outcome.as_str(),
            weight: (r.weight != 1.0).then_some(r.weight),
        };
        out.push_str(&serde_json::to_string(&line).expect("vote serializes"));
        out.push('\n');
    }
    out
}

/// Parses prompts JSONL. Vote lines are accepted too; the extra fields are
/// ignored.
pub fn parse_prompts(text: &str) -> Result<Vec<Prompt>> {
    nonblank_lines(text)
        .map(|(n, line)| {
            serde_json::from_str::<PromptLine>(line)
                .map_err(Error::from)
                .and_then(PromptLine::into_prompt)
                .map_err(|e| with_line(e, n))
        })
        .collect()
}

pub fn prompts_to_jsonl(prompts: &[Prompt]) -> String {
    let mut out = String::new();
    for p in prompts {
        let line = serde_json::json!({
            "prompt": p.text,
            "prompt_id": p.id,
            "category_path": p.category_path,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

#[derive(Serialize, Deserialize)]
struct TableLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    kind: FeedbackKind,
    coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    fallback: bool,
}

/// Parsed table-provider file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableFile {
    pub entries: Vec<(String, Leaderboard)>,
    pub fallback: Option<Leaderboard>,
}

pub fn parse_table(text: &str) -> Result<TableFile> {
    let mut table = TableFile::default();
    for (n, line) in nonblank_lines(text) {
        let parsed = (|| {
            let t: TableLine = serde_json::from_str(line)?;
            let lb = build_leaderboard(t.kind, t.coefficients, t.eta, t.lambda)?;
            Ok::<_, Error>((t.id, t.fallback, lb))
        })()
        .map_err(|e| with_line(e, n))?;
        match parsed {
            (_, true, lb) => table.fallback = Some(lb),
            (Some(id), false, lb) => table.entries.push((id, lb)),
            (None, false, _) => {
                return Err(Error::parse(
                    Some(n),
                    "entry has neither id nor fallback flag",
                ))
            }
        }
    }
    Ok(table)
}

pub fn table_to_jsonl(table: &TableFile) -> String {
    let line = |id: Option<&str>, lb: &Leaderboard, fallback: bool| {
        let doc = LeaderboardDoc::new(lb, &[], None);
        serde_json::to_string(&TableLine {
            id: id.map(str::to_string),
            kind: doc.kind,
            coefficients: doc.coefficients,
            eta: doc.eta,
            lambda: doc.lambda,
            fallback,
        })
        .expect("table line serializes")
    };
    let mut out = String::new();
    for (id, lb) in &table.entries {
        out.push_str(&line(Some(id), lb, false));
        out.push('\n');
    }
    if let Some(lb) = &table.fallback {
        out.push_str(&line(None, lb, true));
        out.push('\n');
    }
    out
}

/// Per-label leaderboards in catalog order, plus the fallback.
pub type ResolvedCategories = (Vec<(String, Leaderboard)>, Option<Leaderboard>);

/// Parsed category-provider file, leaderboards still in file model order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryFile {
    #[serde(default)]
    pub level: usize,
    pub categories: BTreeMap<String, LeaderboardDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<LeaderboardDoc>,
}

impl CategoryFile {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("category file serializes")
    }

    /// Category leaderboards and fallback in catalog order.
    pub fn resolve(&self, catalog: &ModelCatalog) -> Result<ResolvedCategories> {
        let per = self
            .categories
            .iter()
            .map(|(label, doc)| Ok((label.clone(), doc.to_catalog_order(catalog)?)))
            .collect::<Result<_>>()?;
        let fallback = self
            .fallback
            .as_ref()
            .map(|d| d.to_catalog_order(catalog))
            .transpose()?;
        Ok((per, fallback))
    }
}

fn with_line(e: Error, line: usize) -> Error {
    match e {
        Error::Parse {
            line: None,
            message,
        } => Error::Parse {
            line: Some(line),
            message,
        },
        Error::Parse { .. } => e,
        other => Error::Parse {
            line: Some(line),
            message: other.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_votes_and_reports_line_numbers() {
        let text = r#"{"prompt":"hi","model_a":"x","model_b":"y","outcome":"model_b"}

{"prompt":"2+2","prompt_id":"p2","category_path":["math"],"model_a":"y","model_b":"x","outcome":"tie_both_bad","weight":2}
"#;
        let votes = parse_votes(text).unwrap();
        assert_eq!(votes.len(), 2);
        assert_eq!(votes[1].outcome, Outcome::BothBad);
        assert_eq!(votes[1].weight, 2.0);
        assert_eq!(votes[1].prompt.category(0), Some("math"));

        let bad = "{\"prompt\":\"a\",\"model_a\":\"x\",\"model_b\":\"y\",\"outcome\":\"model_a\"}\n{\"prompt\":\"a\",\"model_a\":\"x\"}\n";
        match parse_votes(bad) {
            Err(Error::Parse { line: Some(2), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let bad = "{\"prompt\":\"a\",\"model_a\":\"x\",\"model_b\":\"x\",\"outcome\":\"model_a\"}";
        assert!(matches!(
            parse_votes(bad),
            Err(Error::Parse { line: Some(1), .. })
        ));
        let bad = "{\"prompt\":\"a\",\"model_a\":\"x\",\"model_b\":\"y\",\"outcome\":\"draw\"}";
        assert!(matches!(
            parse_votes(bad),
            Err(Error::Parse { line: Some(1), .. })
        ));
    }

    #[test]
    fn votes_round_trip() {
        let text = "{\"prompt\":\"q\",\"prompt_id\":\"1\",\"model_a\":\"a\",\"model_b\":\"b\",\"outcome\":\"tie\"}\n";
        let votes = parse_votes(text).unwrap();
        assert_eq!(votes_to_jsonl(&votes), text);
    }

    #[test]
    fn leaderboard_doc_reorders_to_catalog() {
        let cat = ModelCatalog::new(vec!["a".into(), "b".into()], vec![1.0, 1.0], None).unwrap();
        let doc = LeaderboardDoc::from_json_str(
            r#"{"kind":"grounded_rk","models":["b","a"],"coefficients":[2.0,1.0],"lambda":1.5}"#,
        )
        .unwrap();
        let lb = doc.to_catalog_order(&cat).unwrap();
        assert_eq!(lb, Leaderboard::grounded_rk(vec![1.0, 2.0], 1.5));

        let short =
            LeaderboardDoc::from_json_str(r#"{"kind":"bt","models":["a"],"coefficients":[0]}"#)
                .unwrap();
        assert!(matches!(
            short.to_catalog_order(&cat),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
        let no_lambda = LeaderboardDoc::from_json_str(
            r#"{"kind":"grounded_rk","models":["a","b"],"coefficients":[0,0]}"#,
        )
        .unwrap();
        assert!(no_lambda.leaderboard().is_err());
    }

    #[test]
    fn anchor_spelling() {
        for s in ["sum_zero", "none", "fix:gpt"] {
            assert_eq!(s.parse::<Anchor>().unwrap().to_string(), s);
        }
        assert!("fix:".parse::<Anchor>().is_err());
    }

    #[test]
    fn table_round_trip_preserves_bits() {
        let mut table = TableFile::default();
        for i in 0..1000 {
            let x = (i as f64 * 0.7311).sin() * 3.0 + 1e-17 * i as f64;
            table
                .entries
                .push((format!("p{i}"), Leaderboard::bt(vec![x, -x / 3.0, x.exp()])));
        }
        table.fallback = Some(Leaderboard::rk(vec![0.1, 0.2, 0.3], 0.25));
        let text = table_to_jsonl(&table);
        let back = parse_table(&text).unwrap();
        assert_eq!(back, table);
        for ((_, a), (_, b)) in back.entries.iter().zip(&table.entries) {
            for (x, y) in a.strengths().iter().zip(b.strengths()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn prompts_accept_vote_lines() {
        let text = "{\"prompt\":\"a\",\"model_a\":\"x\",\"model_b\":\"y\",\"outcome\":\"tie\"}\n{\"prompt\":\"b\",\"prompt_id\":\"7\"}\n";
        let ps = parse_prompts(text).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[1].id.as_deref(), Some("7"));
        assert!(parse_prompts("{\"prompt\":\"\"}").is_err());
        assert_eq!(parse_prompts(&prompts_to_jsonl(&ps)).unwrap(), ps);
    }

    #[test]
    fn category_file_reorders_to_catalog() {
        let cat = ModelCatalog::new(vec!["a".into(), "b".into()], vec![1.0, 2.0], None).unwrap();
        let file = CategoryFile::from_json_str(
            r#"{"level":1,"categories":{"math":{"kind":"bt","models":["b","a"],"coefficients":[2,1]}},
                "fallback":{"kind":"bt","models":["a","b"],"coefficients":[0,0]}}"#,
        )
        .unwrap();
        let (per, fallback) = file.resolve(&cat).unwrap();
        assert_eq!(
            per,
            vec![("math".to_string(), Leaderboard::bt(vec![1.0, 2.0]))]
        );
        assert_eq!(fallback, Some(Leaderboard::bt(vec![0.0, 0.0])));
        assert_eq!(
            CategoryFile::from_json_str(&file.to_json_string()).unwrap(),
            file
        );
        let missing = CategoryFile::from_json_str(
            r#"{"categories":{"x":{"kind":"bt","models":["a","z"],"coefficients":[0,1]}}}"#,
        )
        .unwrap();
        assert!(missing.resolve(&cat).is_err());
    }
}
