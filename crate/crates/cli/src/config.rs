//! TOML run configuration: verifier fields at top level plus problem selection.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ncbf_core::verifier::VerifierConfig;

#[derive(Debug, Default, Clone)]
pub struct RunConfig {
    pub system: Option<String>,
    pub network: Option<PathBuf>,
    pub safe_set: Option<PathBuf>,
    pub params: BTreeMap<String, f64>,
    pub verifier: VerifierConfig,
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut table: toml::Table = text.parse()?;
        let path_of = |v: toml::Value| -> Result<PathBuf> {
            let s = v.as_str().context("expected a string path")?;
            Ok(base.join(s))
        };
        let system = match table.remove("system") {
            Some(v) => Some(v.as_str().context("`system` must be a string")?.to_string()),
            None => None,
        };
        let network = table.remove("network").map(path_of).transpose()?;
        let safe_set = table.remove("safe_set").map(path_of).transpose()?;
        let params = match table.remove("params") {
            Some(v) => v.try_into().context("`params` must be a table of numbers")?,
            None => BTreeMap::new(),
        };
        let verifier: VerifierConfig = toml::Value::Table(table).try_into()?;
        Ok(RunConfig {
            system,
            network,
            safe_set,
            params,
            verifier,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_fields_and_problem_keys() {
        let c = RunConfig::parse(
            "system = \"cartpole\"\nnetwork = \"net.json\"\neta = 0.25\nmax_depth = 12\ninitial_grid = [2, 2, 1, 1]\n[params]\nm_c = 2.0\n",
            Path::new("/cfg"),
        )
        .unwrap();
        assert_eq!(c.system.as_deref(), Some("cartpole"));
        assert_eq!(c.network, Some(PathBuf::from("/cfg/net.json")));
        assert_eq!(c.verifier.eta, 0.25);
        assert_eq!(c.verifier.max_depth, 12);
        assert_eq!(c.verifier.alpha, 1.0);
        assert_eq!(c.params["m_c"], 2.0);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(RunConfig::parse("etaa = 0.5\n", Path::new(".")).is_err());
    }
}
