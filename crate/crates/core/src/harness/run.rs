//! The budgeted training loop and its per-iteration log.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ProblemKind, RunConfig};
use crate::data::{load_mnist, make_noisy_bowl, make_noisy_quadratic, NoisyBowl, NoisyQuadratic};
use crate::directions::build_direction;
use crate::error::{Error, Result};
use crate::goals::degenerate_restart;
use crate::network::{xavier_init, MlpArchitecture, MlpProblem};
use crate::oracle::{BatchSpec, Oracle, SampledLoss, StochasticOracle};
use crate::strategy::{build_strategy, StepContext, StepOutcome};
use crate::surrogate::Termination;

pub const CSV_HEADER: [&str; 9] = [
    "iter",
    "evals",
    "train_loss",
    "test_loss",
    "train_acc",
    "test_acc",
    "alpha",
    "evals_iter",
    "termination",
];

/// Full-pass quality of one parameter vector. Synthetic problems have no
/// test split and no accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
}

impl Metrics {
    pub fn is_finite(&self) -> bool {
        self.train_loss.is_finite() && self.test_loss.is_none_or(f64::is_finite)
    }
}

/// A loss the harness can train on and report metrics for.
pub trait TrainProblem: SampledLoss {
    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// Full-pass metrics; never charged to the evaluation budget.
    fn metrics(&self, x: &[f64]) -> Result<Metrics>;
}

impl TrainProblem for MlpProblem {
    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        xavier_init(self.architecture(), rng)
    }

    fn metrics(&self, x: &[f64]) -> Result<Metrics> {
        let train = self.metrics(x, self.train_set())?;
        let test = self.test_set().map(|t| self.metrics(x, t)).transpose()?;
        Ok(Metrics {
            train_loss: train.loss,
            test_loss: test.map(|t| t.loss),
            train_acc: Some(train.accuracy),
            test_acc: test.map(|t| t.accuracy),
        })
    }
}

fn full_batch_loss<P: SampledLoss + ?Sized>(p: &P, x: &[f64]) -> Result<Metrics> {
    let loss = p.loss(x, &BatchSpec::full(p.num_samples()))?;
    Ok(Metrics {
        train_loss: loss,
        test_loss: None,
        train_acc: None,
        test_acc: None,
    })
}

impl TrainProblem for NoisyQuadratic {
    fn initial_point(&self, _: &mut ChaCha8Rng) -> Vec<f64> {
        vec![0.0]
    }

    fn metrics(&self, x: &[f64]) -> Result<Metrics> {
        full_batch_loss(self, x)
    }
}

impl TrainProblem for NoisyBowl {
    fn initial_point(&self, _: &mut ChaCha8Rng) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn metrics(&self, x: &[f64]) -> Result<Metrics> {
        full_batch_loss(self, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: u64,
    /// Cumulative evaluations after this iteration.
    pub evals: u64,
    pub metrics: Option<Metrics>,
    pub alpha: f64,
    pub evals_iter: u64,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub records: Vec<IterRecord>,
    /// Set when a non-finite loss, gradient or iterate stopped the run.
    pub diverged: bool,
    pub final_point: Vec<f64>,
    pub bracket_violations: u64,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn parse_cell(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::InvalidArgument(format!("bad number `{s}` in run log")))
}

impl RunLog {
    pub fn total_evals(&self) -> u64 {
        self.records.last().map_or(0, |r| r.evals)
    }

    /// Most recent metrics with a finite loss.
    pub fn last_finite_metrics(&self) -> Option<Metrics> {
        self.records
            .iter()
            .rev()
            .filter_map(|r| r.metrics)
            .find(Metrics::is_finite)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(CSV_HEADER).map_err(err)?;
        for r in &self.records {
            let m = r.metrics;
            w.write_record([
                r.iter.to_string(),
                r.evals.to_string(),
                cell(m.map(|m| m.train_loss)),
                cell(m.and_then(|m| m.test_loss)),
                cell(m.and_then(|m| m.train_acc)),
                cell(m.and_then(|m| m.test_acc)),
                r.alpha.to_string(),
                r.evals_iter.to_string(),
                r.termination.as_str().to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads the records of a CSV written by [`RunLog::write_csv`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut log = RunLog::default();
        for row in reader.records() {
            let row = row.map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
            if row.len() != CSV_HEADER.len() {
                return Err(Error::InvalidArgument(format!(
                    "{}: expected 9 columns",
                    path.display()
                )));
            }
            let int = |i: usize| -> Result<u64> {
                row[i]
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad integer `{}`", &row[i])))
            };
            let metrics = match parse_cell(&row[2])? {
                Some(train_loss) => Some(Metrics {
                    train_loss,
                    test_loss: parse_cell(&row[3])?,
                    train_acc: parse_cell(&row[4])?,
                    test_acc: parse_cell(&row[5])?,
                }),
                None => None,
            };
            log.records.push(IterRecord {
                iter: int(0)?,
                evals: int(1)?,
                metrics,
                alpha: parse_cell(&row[6])?.unwrap_or(f64::NAN),
                evals_iter: int(7)?,
                termination: row[8].parse()?,
            });
        }
        Ok(log)
    }
}

/// What an observer sees after every completed iteration.
#[derive(Debug)]
pub struct IterationView<'a> {
    pub iteration: u64,
    pub x: &'a [f64],
    pub alpha: f64,
    pub evals: u64,
    pub termination: Termination,
}

const ORACLE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Loads the configured problem and trains on it.
pub fn train_run(config: &RunConfig) -> Result<RunLog> {
    config.validate()?;
    match config.problem {
        ProblemKind::MnistN2 => {
            let (mut train, test) = load_mnist(&config.data_dir)?;
            if let Some(n) = config.train_subset {
                train = train.subsample(n, config.subset_seed)?;
            }
            let problem = MlpProblem::new(
                MlpArchitecture::n2(train.n_features(), 10),
                Arc::new(train),
                Some(Arc::new(test)),
                config.precision,
            )?;
            train_with(&problem, config, &mut |_| {})
        }
        ProblemKind::SyntheticQuadratic => {
            let p = make_noisy_quadratic(
                config.synthetic_mu,
                config.synthetic_sigma,
                config.synthetic_samples,
                config.subset_seed,
            )?;
            train_with(&p, config, &mut |_| {})
        }
        ProblemKind::SyntheticBowl => {
            let center = vec![config.synthetic_mu; config.synthetic_dim];
            let p = make_noisy_bowl(
                &center,
                config.synthetic_sigma,
                config.synthetic_samples,
                config.subset_seed,
            )?;
            train_with(&p, config, &mut |_| {})
        }
    }
}

enum Stop {
    Budget,
    Diverged,
}

fn classify(e: Error) -> Result<Stop> {
    match e {
        Error::BudgetExhausted(_) => Ok(Stop::Budget),
        Error::NumericOverflow { .. } => Ok(Stop::Diverged),
        other => Err(other),
    }
}

/// Metrics at `x`, or `None` when the full-batch loss overflows.
fn metrics_or_overflow<P: TrainProblem>(problem: &P, x: &[f64]) -> Result<Option<Metrics>> {
    match problem.metrics(x) {
        Ok(m) => Ok(Some(m)),
        Err(Error::NumericOverflow { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Trains `problem` until the evaluation budget runs out or the run diverges.
///
/// Each iteration reuses the gradient the strategy accepted last time, or
/// spends one evaluation for a fresh one when none is held.
pub fn train_with<P: TrainProblem>(
    problem: &P,
    config: &RunConfig,
    observer: &mut dyn FnMut(&IterationView<'_>),
) -> Result<RunLog> {
    config.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = problem.initial_point(&mut init_rng);
    let mut oracle =
        StochasticOracle::new(problem, config.batch_size, config.seed ^ ORACLE_STREAM)?.with_budget(config.eval_budget);
    let mut directions = build_direction(config.direction.as_str(), problem.dim())?;
    let mut params = config.params.clone();
    params.iterations_per_epoch = (problem.num_samples() as u64).div_ceil(config.batch_size as u64);
    let mut strategy = build_strategy(&config.strategy, &params, config.direction)?;

    let interval = config.metric_interval();
    let mut next_metric_at = 0u64;
    let mut log = RunLog::default();
    let mut held: Option<Vec<f64>> = None;

    for iteration in 0u64.. {
        let before = oracle.evaluations();
        let g = match held.take() {
            Some(g) => g,
            None => match oracle.evaluate(&x) {
                Ok(e) => e.gradient,
                Err(e) => {
                    log.diverged = matches!(classify(e)?, Stop::Diverged);
                    break;
                }
            },
        };
        let d = directions.direction(&g);
        let outcome = if d.iter().all(|&v| v == 0.0) {
            degenerate_restart(&mut oracle, &x).map(StepOutcome::from)
        } else {
            let ctx = StepContext {
                x: &x,
                d: &d,
                g: &g,
                iteration,
            };
            strategy.step(&ctx, &mut oracle)
        };
        let outcome = match outcome {
            Ok(o) => o,
            Err(e) => {
                log.diverged = matches!(classify(e)?, Stop::Diverged);
                break;
            }
        };
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += outcome.alpha * di;
        }
        let evals = oracle.evaluations();
        log.bracket_violations += outcome.bracket_violations as u64;
        held = outcome.gradient;

        let mut finite = x.iter().all(|v| v.is_finite());
        let metrics = if finite && evals >= next_metric_at {
            while next_metric_at <= evals {
                next_metric_at += interval;
            }
            let m = metrics_or_overflow(problem, &x)?;
            finite = m.is_some();
            m
        } else {
            None
        };
        log.records.push(IterRecord {
            iter: iteration,
            evals,
            metrics,
            alpha: outcome.alpha,
            evals_iter: evals - before,
            termination: outcome.termination,
        });
        observer(&IterationView {
            iteration,
            x: &x,
            alpha: outcome.alpha,
            evals,
            termination: outcome.termination,
        });
        if !finite || metrics.is_some_and(|m| !m.is_finite()) {
            log.diverged = true;
            break;
        }
    }

    if !log.diverged {
        if let Some(last) = log.records.last_mut() {
            if last.metrics.is_none() {
                let m = metrics_or_overflow(problem, &x)?;
                log.diverged = !m.is_some_and(|m| m.is_finite());
                last.metrics = m;
            }
        }
    }
    log.final_point = x;
    Ok(log)
}
