//! Merged run configuration: defaults, then a config file, then flags.

use std::path::{Path, PathBuf};

use prism_core::assignment::PolicyConfig;
use prism_core::redaction::RuleSet;
use prism_core::simulator::{Policy, Scenario};
use prism_core::vault::{KeyRing, ENC_KEY_ENV, TOKEN_KEY_ENV};
use serde::Deserialize;

use crate::error::{invalid, CliError};

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub policy: Option<PolicyConfig>,
    pub engagement_alphas: Option<Vec<f64>>,
    pub rules: Option<PathBuf>,
    pub key_file: Option<PathBuf>,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let raw = read(path)?;
        serde_json::from_str(&raw).map_err(|e| invalid(format!("config {}: {e}", path.display())))
    }

    /// Applies file overrides to a scenario. Flag overrides follow in the caller.
    pub fn apply(&self, scenario: &mut Scenario) {
        if let Some(p) = &self.policy {
            scenario.policy_config = p.clone();
        }
        if let Some(a) = &self.engagement_alphas {
            scenario.engagement_alphas = a.clone();
        }
    }

    /// `--rules` beats the config file, which beats the built-in rules.
    pub fn rules(&self, flag: Option<&Path>) -> Result<(RuleSet, String), CliError> {
        match flag.or(self.rules.as_deref()) {
            Some(p) => Ok((RuleSet::load(p)?, p.display().to_string())),
            None => Ok((RuleSet::default_rules(), "built-in".to_string())),
        }
    }

    /// Key file if configured, else both environment variables if set.
    pub fn keys(&self) -> Result<Option<KeyRing>, CliError> {
        if let Some(p) = &self.key_file {
            return Ok(Some(KeyRing::from_file(p).map_err(|e| invalid(e.to_string()))?));
        }
        let tk = std::env::var_os(TOKEN_KEY_ENV).is_some();
        let ek = std::env::var_os(ENC_KEY_ENV).is_some();
        match (tk, ek) {
            (false, false) => Ok(None),
            _ => Ok(Some(KeyRing::from_env().map_err(|e| invalid(e.to_string()))?)),
        }
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))
}

pub fn load_scenario(path: Option<&Path>) -> Result<Scenario, CliError> {
    match path {
        Some(p) => Ok(Scenario::from_json(&read(p)?)?),
        None => Ok(Scenario::default()),
    }
}

pub fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse::<Policy>().map_err(|e| e.to_string())
}

/// Seeds of a `--seeds` sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedRange(pub Vec<u64>);

/// `a..b` (half-open) or `a..=b`.
pub fn parse_seeds(s: &str) -> Result<SeedRange, String> {
    let bad = || format!("expected a seed range like 0..20 or 0..=19, got {s:?}");
    let (lo, hi, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        return Err(bad());
    };
    let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
    let seeds: Vec<u64> = if inclusive { (lo..=hi).collect() } else { (lo..hi).collect() };
    if seeds.is_empty() {
        return Err(format!("seed range {s:?} is empty"));
    }
    Ok(SeedRange(seeds))
}
