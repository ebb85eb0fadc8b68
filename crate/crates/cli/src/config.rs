//! TOML configuration and the resolved settings a run actually uses.
//! Precedence everywhere: command-line flag, then environment (output
//! directory only), then config file, then default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub run: Option<RunSection>,
    pub bound: Option<BoundSection>,
    pub reduce: Option<ReduceSection>,
    pub validate: Option<ValidateSection>,
    #[serde(default)]
    pub input: Vec<InputOverride>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub model: Option<String>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<String>,
    pub beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSection {
    pub form: Option<String>,
    pub k: Option<usize>,
    pub lipschitz_l: Option<f64>,
    pub lipschitz_c: Option<f64>,
    pub lipschitz_g0: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceSection {
    pub threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    pub n: Option<usize>,
    pub bins: Option<usize>,
    pub max_rel_err_std: Option<f64>,
    pub min_p_value: Option<f64>,
    pub eps: Option<f64>,
    pub trials: Option<usize>,
    pub delta_input: Option<String>,
}

/// Per-input distribution override, `[[input]]` in the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputOverride {
    pub name: String,
    /// "uniform" (lo, hi) or "normal" (mean, variance).
    pub dist: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(p) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(p)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", p.display())))
}

/// Everything a pipeline run needs, fully resolved. The serialized form
/// is the canonical input to the config hash; the output directory is
/// excluded so a report does not depend on where it was written.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub model: String,
    pub n: usize,
    pub seed: u64,
    pub beta: f64,
    pub threshold: f64,
    pub validate_n: usize,
    pub bins: usize,
    pub max_rel_err_std: f64,
    pub min_p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_input: Option<String>,
    pub inputs: Vec<InputOverride>,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl Settings {
    pub fn config_hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("settings serialize");
        format!("{:016x}", fnv1a64(canon.as_bytes()))
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_matches_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = toml::from_str::<FileConfig>("[run]\nmodle = \"reaction\"\n");
        assert!(err.is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let mk = |dir: &str| Settings {
            model: "reaction".into(),
            n: 64,
            seed: 1,
            beta: 0.3,
            threshold: 0.1,
            validate_n: 64,
            bins: 40,
            max_rel_err_std: 0.05,
            min_p_value: 0.05,
            eps: None,
            trials: None,
            delta_input: None,
            inputs: Vec::new(),
            output_dir: PathBuf::from(dir),
        };
        assert_eq!(mk("a").config_hash(), mk("b").config_hash());
        let mut other = mk("a");
        other.seed = 2;
        assert_ne!(mk("a").config_hash(), other.config_hash());
    }
}
