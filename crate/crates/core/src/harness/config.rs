//! Run configuration as flat `key = value` text.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::directions::DirectionKind;
use crate::error::{Error, Result};
use crate::goals::InitialGuess;
use crate::network::Precision;
use crate::strategy::{strategy_registry, StrategyParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// The `784-1000-500-250-10` network on MNIST.
    MnistN2,
    /// Scalar noisy quadratic.
    SyntheticQuadratic,
    /// Noisy bowl in `synthetic_dim` dimensions.
    SyntheticBowl,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::MnistN2 => "mnist-n2",
            ProblemKind::SyntheticQuadratic => "synthetic-quadratic",
            ProblemKind::SyntheticBowl => "synthetic-bowl",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist-n2" => Ok(ProblemKind::MnistN2),
            "synthetic-quadratic" => Ok(ProblemKind::SyntheticQuadratic),
            "synthetic-bowl" => Ok(ProblemKind::SyntheticBowl),
            _ => Err(Error::UnknownName {
                kind: "problem",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub direction: DirectionKind,
    pub strategy: String,
    pub batch_size: usize,
    pub eval_budget: u64,
    pub seed: u64,
    pub params: StrategyParams,
    pub output: Option<PathBuf>,
    pub data_dir: PathBuf,
    pub train_subset: Option<usize>,
    pub subset_seed: u64,
    pub precision: Precision,
    /// Evaluations between metric passes; `None` means `ceil(budget / 200)`.
    pub metric_every: Option<u64>,
    pub synthetic_dim: usize,
    pub synthetic_mu: f64,
    pub synthetic_sigma: f64,
    pub synthetic_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::MnistN2,
            direction: DirectionKind::Sgd,
            strategy: "goals-1".into(),
            batch_size: 100,
            eval_budget: 40_000,
            seed: 0,
            params: StrategyParams::default(),
            output: None,
            data_dir: PathBuf::from("data/mnist"),
            train_subset: None,
            subset_seed: 0,
            precision: Precision::F64,
            metric_every: None,
            synthetic_dim: 10,
            synthetic_mu: 1.0,
            synthetic_sigma: 0.5,
            synthetic_samples: 1000,
        }
    }
}

pub const KEYS: &[&str] = &[
    "problem",
    "direction",
    "strategy",
    "batch_size",
    "eval_budget",
    "seed",
    "gamma",
    "c",
    "c1",
    "c2",
    "alpha_min",
    "alpha_max",
    "epsilon",
    "eta_max",
    "eta_min",
    "t0",
    "tmult",
    "initial_guess",
    "carry_alpha",
    "output",
    "data_dir",
    "train_subset",
    "subset_seed",
    "precision",
    "metric_every",
    "synthetic_dim",
    "synthetic_mu",
    "synthetic_sigma",
    "synthetic_samples",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl RunConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse_text(text: &str) -> Result<Self> {
        let cfg = Self::parse_unchecked(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without the cross-field checks, for callers that still
    /// override fields (sweeps set the batch size per run).
    pub fn parse_unchecked(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.params;
        match key {
            "problem" => self.problem = value.parse().map_err(config_err)?,
            "direction" => self.direction = value.parse().map_err(config_err)?,
            "strategy" => self.strategy = value.to_string(),
            "batch_size" => self.batch_size = parse(key, value)?,
            "eval_budget" => self.eval_budget = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "gamma" => p.gamma = optional(key, value)?,
            "c" => p.c = parse(key, value)?,
            "c1" => p.c1 = optional(key, value)?,
            "c2" => p.c2 = optional(key, value)?,
            "alpha_min" => p.alpha_min = parse(key, value)?,
            "alpha_max" => p.alpha_max = parse(key, value)?,
            "epsilon" => p.epsilon = parse(key, value)?,
            "eta_max" => p.eta_max = optional(key, value)?,
            "eta_min" => p.eta_min = parse(key, value)?,
            "t0" => p.t0 = parse(key, value)?,
            "tmult" => p.tmult = parse(key, value)?,
            "initial_guess" => {
                p.initial_guess = match value {
                    "gamma" => InitialGuess::FixedGamma,
                    "inverse-norm" => InitialGuess::InverseDirectionNorm,
                    _ => {
                        return Err(Error::Config(format!(
                            "initial_guess: `{value}` is not gamma or inverse-norm"
                        )))
                    }
                }
            }
            "carry_alpha" => p.carry_previous_alpha = parse(key, value)?,
            "output" => self.output = optional::<String>(key, value)?.map(PathBuf::from),
            "data_dir" => self.data_dir = PathBuf::from(value),
            "train_subset" => self.train_subset = optional(key, value)?,
            "subset_seed" => self.subset_seed = parse(key, value)?,
            "precision" => self.precision = value.parse().map_err(config_err)?,
            "metric_every" => self.metric_every = optional(key, value)?,
            "synthetic_dim" => self.synthetic_dim = parse(key, value)?,
            "synthetic_mu" => self.synthetic_mu = parse(key, value)?,
            "synthetic_sigma" => self.synthetic_sigma = parse(key, value)?,
            "synthetic_samples" => self.synthetic_samples = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_budget == 0 {
            return Err(Error::Config("eval_budget must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.metric_every == Some(0) {
            return Err(Error::Config("metric_every must be at least 1".into()));
        }
        if !strategy_registry().contains(&self.strategy) {
            return Err(Error::Config(format!("unknown strategy `{}`", self.strategy)));
        }
        match self.problem {
            ProblemKind::MnistN2 => {
                if let Some(n) = self.train_subset {
                    if self.batch_size > n {
                        return Err(Error::Config(format!(
                            "batch_size {} exceeds train_subset {n}",
                            self.batch_size
                        )));
                    }
                }
            }
            _ => {
                if self.batch_size > self.synthetic_samples {
                    return Err(Error::Config(format!(
                        "batch_size {} exceeds synthetic_samples {}",
                        self.batch_size, self.synthetic_samples
                    )));
                }
                if self.synthetic_dim == 0 {
                    return Err(Error::Config("synthetic_dim must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Evaluations between metric passes.
    pub fn metric_interval(&self) -> u64 {
        self.metric_every
            .unwrap_or_else(|| self.eval_budget.div_ceil(200))
            .max(1)
    }

    /// The configuration as `key = value` lines that parse back to the same value.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
        let mut lines = vec![
            format!("problem = {}", self.problem),
            format!("direction = {}", self.direction),
            format!("strategy = {}", self.strategy),
            format!("batch_size = {}", self.batch_size),
            format!("eval_budget = {}", self.eval_budget),
            format!("seed = {}", self.seed),
            format!("gamma = {}", opt(p.gamma)),
            format!("c = {}", p.c),
            format!("c1 = {}", opt(p.c1)),
            format!("c2 = {}", opt(p.c2)),
            format!("alpha_min = {}", p.alpha_min),
            format!("alpha_max = {}", p.alpha_max),
            format!("epsilon = {}", p.epsilon),
            format!("eta_max = {}", opt(p.eta_max)),
            format!("eta_min = {}", p.eta_min),
            format!("t0 = {}", p.t0),
            format!("tmult = {}", p.tmult),
            format!(
                "initial_guess = {}",
                match p.initial_guess {
                    InitialGuess::FixedGamma => "gamma",
                    InitialGuess::InverseDirectionNorm => "inverse-norm",
                }
            ),
            format!("carry_alpha = {}", p.carry_previous_alpha),
            format!(
                "output = {}",
                self.output
                    .as_ref()
                    .map_or_else(|| "none".to_string(), |o| o.display().to_string())
            ),
            format!("data_dir = {}", self.data_dir.display()),
            format!(
                "train_subset = {}",
                self.train_subset.map_or_else(|| "none".to_string(), |n| n.to_string())
            ),
            format!("subset_seed = {}", self.subset_seed),
            format!(
                "precision = {}",
                match self.precision {
                    Precision::F32 => "f32",
                    Precision::F64 => "f64",
                }
            ),
            format!(
                "metric_every = {}",
                self.metric_every.map_or_else(|| "none".to_string(), |n| n.to_string())
            ),
            format!("synthetic_dim = {}", self.synthetic_dim),
            format!("synthetic_mu = {}", self.synthetic_mu),
            format!("synthetic_sigma = {}", self.synthetic_sigma),
            format!("synthetic_samples = {}", self.synthetic_samples),
        ];
        lines.push(String::new());
        lines.join("\n")
    }
}

fn config_err(e: Error) -> Error {
    Error::Config(e.to_string())
}
