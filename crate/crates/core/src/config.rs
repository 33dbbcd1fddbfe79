//! Flat `key=value` experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! suite=table1
//! sigma=2
//! seeds=1,2,3
//! train.learning_rate=0.01
//! ```
//!
//! Unknown keys are errors. Anything left out keeps its default, and the
//! defaults are the synthetic-data protocol (σ = 2, η = λ = 0.01, momentum
//! 0.9, 5000 epochs of 1000 balanced samples).

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::TrainConfig;
use crate::detectors::{ScoreFunction, ScoreKind};
use crate::error::{invalid, LabError, Result};
use crate::gaussians::{canonical_id_means, ScenarioSpec};
use crate::linalg::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Table1,
    Table2,
    Scrambled,
    Verify,
    Custom,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Table1 => "table1",
            Suite::Table2 => "table2",
            Suite::Scrambled => "scrambled",
            Suite::Verify => "verify",
            Suite::Custom => "custom",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "table1" => Ok(Suite::Table1),
            "table2" => Ok(Suite::Table2),
            "scrambled" => Ok(Suite::Scrambled),
            "verify" => Ok(Suite::Verify),
            "custom" => Ok(Suite::Custom),
            other => Err(invalid(format!("unknown suite `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub sigma: f64,
    /// `train.seed` is overwritten by each entry of `seeds`.
    pub train: TrainConfig,
    pub eval_samples_per_distribution: usize,
    pub seeds: Vec<u64>,
    pub detectors: Vec<ScoreFunction>,
    pub output_dir: PathBuf,
    /// Epochs for the coupled-training check in the verify suite.
    pub lemma1_epochs: usize,
    /// OOD scenario for the custom suite; ID means default to the canonical
    /// four classes.
    pub custom_scenario: Option<ScenarioSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            suite: Suite::Table1,
            sigma: 2.0,
            train: TrainConfig::default(),
            eval_samples_per_distribution: 10_000,
            seeds: vec![1, 2, 3],
            detectors: ScoreFunction::standard_set(),
            output_dir: PathBuf::from("results"),
            lemma1_epochs: 500,
            custom_scenario: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.trim().parse().map_err(|_| LabError::Config {
        line,
        message: format!("`{key}` expects a number, got `{value}`"),
    })
}

fn parse_vector(value: &str) -> std::result::Result<Vector, String> {
    value
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number `{}`", t.trim())))
        .collect()
}

fn join_vector(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    value
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| invalid(format!("bad seed `{}`", t.trim())))
        })
        .collect()
}

#[derive(Default)]
struct ScenarioKeys {
    label: Option<String>,
    id_means: Option<Vec<Vector>>,
    ood_semantic: Option<Vector>,
    ood_covariate: Option<Vector>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut scenario = ScenarioKeys::default();
        let mut temperature = None;
        let mut saw_scenario = false;

        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(LabError::Config {
                    line,
                    message: format!("expected key=value, got `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let config_err = |message: String| LabError::Config { line, message };

            match key {
                "suite" => cfg.suite = value.parse().map_err(|e: LabError| config_err(e.to_string()))?,
                "sigma" => cfg.sigma = parse_num(key, value, line)?,
                "seeds" => cfg.seeds = parse_seeds(value).map_err(|e| config_err(e.to_string()))?,
                "eval_samples_per_distribution" => cfg.eval_samples_per_distribution = parse_num(key, value, line)?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "detectors" => {
                    cfg.detectors = value
                        .split(',')
                        .map(|d| d.parse::<ScoreKind>().map(ScoreFunction::new))
                        .collect::<Result<_>>()
                        .map_err(|e| config_err(e.to_string()))?;
                }
                "ebo.temperature" => temperature = Some(parse_num::<f64>(key, value, line)?),
                "train.learning_rate" => cfg.train.learning_rate = parse_num(key, value, line)?,
                "train.weight_decay" => cfg.train.weight_decay = parse_num(key, value, line)?,
                "train.momentum" => cfg.train.momentum = parse_num(key, value, line)?,
                "train.epochs" => cfg.train.epochs = parse_num(key, value, line)?,
                "train.samples_per_class_per_epoch" => {
                    cfg.train.samples_per_class_per_epoch = parse_num(key, value, line)?
                }
                "train.snapshot_every" => cfg.train.snapshot_every = parse_num(key, value, line)?,
                "verify.lemma1_epochs" => cfg.lemma1_epochs = parse_num(key, value, line)?,
                "scenario.label" => {
                    saw_scenario = true;
                    scenario.label = Some(value.to_string());
                }
                "scenario.id_means" => {
                    saw_scenario = true;
                    let means = value
                        .split(';')
                        .map(parse_vector)
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(config_err)?;
                    scenario.id_means = Some(means);
                }
                "scenario.ood_semantic" => {
                    saw_scenario = true;
                    scenario.ood_semantic = Some(parse_vector(value).map_err(config_err)?);
                }
                "scenario.ood_covariate" => {
                    saw_scenario = true;
                    scenario.ood_covariate = Some(parse_vector(value).map_err(config_err)?);
                }
                _ => return Err(config_err(format!("unknown key `{key}`"))),
            }
        }

        if let Some(t) = temperature {
            for det in &mut cfg.detectors {
                if det.kind == ScoreKind::Ebo {
                    *det = ScoreFunction::with_temperature(ScoreKind::Ebo, t)?;
                }
            }
        }
        if saw_scenario {
            let (Some(ood_semantic), Some(ood_covariate)) = (scenario.ood_semantic, scenario.ood_covariate) else {
                return Err(invalid("custom scenario needs scenario.ood_semantic and scenario.ood_covariate"));
            };
            cfg.custom_scenario = Some(ScenarioSpec {
                label: scenario.label.unwrap_or_else(|| "custom".to_string()),
                sigma: cfg.sigma,
                id_means: scenario.id_means.unwrap_or_else(|| canonical_id_means(cfg.sigma)),
                ood_semantic,
                ood_covariate,
                scramble: None,
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| LabError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        if self.eval_samples_per_distribution < 100 {
            return Err(invalid("eval_samples_per_distribution must be at least 100"));
        }
        if self.detectors.is_empty() {
            return Err(invalid("at least one detector is required"));
        }
        if !(self.sigma > 0.0) {
            return Err(invalid("sigma must be positive"));
        }
        if let Some(s) = &self.custom_scenario {
            s.validate()?;
        }
        if self.suite == Suite::Custom && self.custom_scenario.is_none() {
            return Err(invalid("the custom suite needs scenario.* keys"));
        }
        self.train.validate()
    }

    /// Canonical text form; [`ExperimentConfig::parse`] reads it back.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let t = &self.train;
        let detectors: Vec<&str> = self.detectors.iter().map(|d| d.kind.name()).collect();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "suite={}", self.suite);
        let _ = writeln!(out, "sigma={}", self.sigma);
        let _ = writeln!(out, "seeds={}", seeds.join(","));
        let _ = writeln!(out, "eval_samples_per_distribution={}", self.eval_samples_per_distribution);
        let _ = writeln!(out, "detectors={}", detectors.join(","));
        if let Some(ebo) = self.detectors.iter().find(|d| d.kind == ScoreKind::Ebo) {
            let _ = writeln!(out, "ebo.temperature={}", ebo.temperature);
        }
        let _ = writeln!(out, "output_dir={}", self.output_dir.display());
        let _ = writeln!(out, "train.learning_rate={}", t.learning_rate);
        let _ = writeln!(out, "train.weight_decay={}", t.weight_decay);
        let _ = writeln!(out, "train.momentum={}", t.momentum);
        let _ = writeln!(out, "train.epochs={}", t.epochs);
        let _ = writeln!(out, "train.samples_per_class_per_epoch={}", t.samples_per_class_per_epoch);
        let _ = writeln!(out, "train.snapshot_every={}", t.snapshot_every);
        let _ = writeln!(out, "verify.lemma1_epochs={}", self.lemma1_epochs);
        if let Some(s) = &self.custom_scenario {
            out.push_str(&scenario_to_config(s));
        }
        out
    }
}

/// `scenario.*` lines describing `s`. The scramble matrix is not part of
/// the format; it is derived from the seed at run time.
pub fn scenario_to_config(s: &ScenarioSpec) -> String {
    let means: Vec<String> = s.id_means.iter().map(|m| join_vector(m)).collect();
    format!(
        "scenario.label={}\nscenario.id_means={}\nscenario.ood_semantic={}\nscenario.ood_covariate={}\n",
        s.label,
        means.join(";"),
        join_vector(&s.ood_semantic),
        join_vector(&s.ood_covariate)
    )
}
