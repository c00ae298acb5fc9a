use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use rankroute::formats::{parse_table, CategoryFile, LeaderboardDoc};
use rankroute::providers::{
    CategoryProvider, CoefficientProvider, ConstantProvider, FeatureLinearProvider, RemoteProvider,
    TableProvider,
};
use rankroute::{Error, FeedbackKind, Leaderboard, ModelCatalog, Result};

/// Where per-prompt leaderboards come from.
///
/// * `constant`: every model tied (zero BT coefficients)
/// * `constant:<leaderboard.json>`
/// * `table:<table.jsonl>`
/// * `category:<categories.json>`
/// * `linear:<linear.json>`
/// * `remote:<http://host:port>`
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProviderSpec {
    Constant(Option<PathBuf>),
    Table(PathBuf),
    Category(PathBuf),
    Linear(PathBuf),
    Remote(String),
}

#[derive(Clone, Debug)]
pub struct RemoteOptions {
    pub kind: FeedbackKind,
    pub timeout: Duration,
    pub cache_size: usize,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        Self {
            kind: FeedbackKind::Bt,
            timeout: Duration::from_secs(5),
            cache_size: 4096,
        }
    }
}

impl FromStr for ProviderSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "constant" {
            return Ok(ProviderSpec::Constant(None));
        }
        let (scheme, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("unknown provider `{s}`"))?;
        if rest.is_empty() {
            return Err(format!("provider `{scheme}` needs a location"));
        }
        match scheme {
            "constant" => Ok(ProviderSpec::Constant(Some(rest.into()))),
            "table" => Ok(ProviderSpec::Table(rest.into())),
            "category" => Ok(ProviderSpec::Category(rest.into())),
            "linear" => Ok(ProviderSpec::Linear(rest.into())),
            "remote" => Ok(ProviderSpec::Remote(rest.to_string())),
            _ => Err(format!("unknown provider kind `{scheme}`")),
        }
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderSpec::Constant(None) => f.write_str("constant"),
            ProviderSpec::Constant(Some(p)) => write!(f, "constant:{}", p.display()),
            ProviderSpec::Table(p) => write!(f, "table:{}", p.display()),
            ProviderSpec::Category(p) => write!(f, "category:{}", p.display()),
            ProviderSpec::Linear(p) => write!(f, "linear:{}", p.display()),
            ProviderSpec::Remote(url) => write!(f, "remote:{url}"),
        }
    }
}

impl ProviderSpec {
    /// Resolves relative file paths against `base`.
    pub fn relative_to(self, base: &Path) -> Self {
        let fix = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        match self {
            ProviderSpec::Constant(p) => ProviderSpec::Constant(p.map(fix)),
            ProviderSpec::Table(p) => ProviderSpec::Table(fix(p)),
            ProviderSpec::Category(p) => ProviderSpec::Category(fix(p)),
            ProviderSpec::Linear(p) => ProviderSpec::Linear(fix(p)),
            remote => remote,
        }
    }

    /// Builds the provider over the catalog's models, in catalog order.
    pub fn load(
        &self,
        catalog: &ModelCatalog,
        remote: &RemoteOptions,
    ) -> Result<Arc<dyn CoefficientProvider>> {
        let provider: Arc<dyn CoefficientProvider> = match self {
            ProviderSpec::Constant(None) => {
                Arc::new(ConstantProvider::new(Leaderboard::bt(vec![
                    0.0;
                    catalog.len()
                ]))?)
            }
            ProviderSpec::Constant(Some(path)) => {
                let doc = LeaderboardDoc::from_json_str(&read(path)?)?;
                Arc::new(ConstantProvider::new(doc.to_catalog_order(catalog)?)?)
            }
            ProviderSpec::Table(path) => {
                Arc::new(TableProvider::from_table(parse_table(&read(path)?)?)?)
            }
            ProviderSpec::Category(path) => {
                let file = CategoryFile::from_json_str(&read(path)?)?;
                Arc::new(CategoryProvider::from_file(&file, catalog)?)
            }
            ProviderSpec::Linear(path) => {
                let (provider, models) = FeatureLinearProvider::from_json_str(&read(path)?)?;
                if models != catalog.models() {
                    return Err(Error::Catalog(format!(
                        "linear provider models {models:?} differ from the catalog"
                    )));
                }
                Arc::new(provider)
            }
            ProviderSpec::Remote(url) => Arc::new(RemoteProvider::new(
                url,
                catalog.models().to_vec(),
                remote.kind,
                remote.timeout,
                remote.cache_size,
            )),
        };
        if provider.num_models() != catalog.len() {
            return Err(Error::DimensionMismatch {
                expected: catalog.len(),
                found: provider.num_models(),
            });
        }
        Ok(provider)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_round_trip() {
        for s in [
            "constant",
            "constant:lb.json",
            "table:t.jsonl",
            "category:c.json",
            "linear:l.json",
            "remote:http://127.0.0.1:9000",
        ] {
            assert_eq!(s.parse::<ProviderSpec>().unwrap().to_string(), s);
        }
        assert!("table:".parse::<ProviderSpec>().is_err());
        assert!("bogus:x".parse::<ProviderSpec>().is_err());
        assert!("tablefile".parse::<ProviderSpec>().is_err());
    }

    #[test]
    fn relative_paths_follow_the_base() {
        let spec: ProviderSpec = "table:t.jsonl".parse().unwrap();
        assert_eq!(
            spec.relative_to(Path::new("/etc/rr")),
            ProviderSpec::Table("/etc/rr/t.jsonl".into())
        );
        let abs: ProviderSpec = "linear:/x/l.json".parse().unwrap();
        assert_eq!(abs.clone().relative_to(Path::new("/etc")), abs);
    }
}
