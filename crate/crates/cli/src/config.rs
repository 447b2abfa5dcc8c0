use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use memwalk::montecarlo::TheoremTag;
use memwalk::{InitialSpec, ModelParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

/// Model parameters as they appear in a config file. `d` defaults to 1;
/// `p` and `theta` may be left out for phase diagrams, which scan them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default)]
    pub lazy: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

fn one() -> usize {
    1
}

/// Everything a run needs. Every field is optional in the file; flags given
/// on the command line take precedence over file values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<TheoremTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn model(&self) -> anyhow::Result<ModelParams> {
        let params = self.params.unwrap_or_default();
        let (Some(p), Some(theta)) = (params.p, params.theta) else {
            bail!("model parameters missing: pass --p and --theta or a config with \"params\"");
        };
        Ok(ModelParams::new(self.dims().0, params.lazy, p, theta)?)
    }

    /// `(d, lazy)`, defaulting to `(1, false)`.
    pub fn dims(&self) -> (usize, bool) {
        self.params.map_or((1, false), |p| (p.d, p.lazy))
    }

    pub fn init(&self) -> InitialSpec {
        self.init.clone().unwrap_or_default()
    }
}

/// `--init` value: `uniform`, `fixed:IDX` or `custom:FILE` with a JSON array
/// of `K` probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct InitArg(pub InitialSpec);

impl FromStr for InitArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "uniform" {
            return Ok(InitArg(InitialSpec::Uniform));
        }
        if let Some(idx) = s.strip_prefix("fixed:") {
            let idx = idx.parse().map_err(|e| format!("bad direction index {idx:?}: {e}"))?;
            return Ok(InitArg(InitialSpec::Fixed(idx)));
        }
        if let Some(file) = s.strip_prefix("custom:") {
            let text = std::fs::read_to_string(file).map_err(|e| format!("reading {file}: {e}"))?;
            let law: Vec<f64> = serde_json::from_str(&text).map_err(|e| format!("parsing {file}: {e}"))?;
            return Ok(InitArg(InitialSpec::Custom(law)));
        }
        Err(format!("expected uniform, fixed:IDX or custom:FILE, got {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let cfg = RunConfig {
            subcommand: Some("simulate".into()),
            params: Some(ParamsConfig {
                d: 2,
                lazy: true,
                p: Some(0.1 + 0.2),
                theta: Some(1.0 / 3.0),
            }),
            init: Some(InitialSpec::Custom(vec![0.2, 0.2, 0.2, 0.2, 0.2])),
            n_steps: Some(1000),
            checkpoints: Some(vec![10, 100, 1000]),
            replicas: Some(64),
            seed: Some(u64::MAX),
            workers: Some(3),
            out: Some("out.csv".into()),
            format: Some(Format::Csv),
            tag: Some(TheoremTag::CltDiffusive),
            p_grid: Some(vec![0.5, 0.75]),
            theta_grid: Some(vec![1.0]),
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        assert_eq!(serde_json::from_str::<RunConfig>("{}").unwrap(), RunConfig::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn init_arguments() {
        assert_eq!("uniform".parse::<InitArg>().unwrap().0, InitialSpec::Uniform);
        assert_eq!("fixed:3".parse::<InitArg>().unwrap().0, InitialSpec::Fixed(3));
        assert!("fixed:x".parse::<InitArg>().is_err());
        assert!("random".parse::<InitArg>().is_err());
    }
}
