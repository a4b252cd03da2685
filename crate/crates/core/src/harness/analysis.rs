//! Post-processing: sign-change histograms, relative robustness and smoothing.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::oracle::{DirectionalSlice, Oracle};

/// Counts of negative-to-non-negative directional-derivative crossings per grid interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SignChangeHistogram {
    pub grid: Vec<f64>,
    /// `counts[i]` covers `[grid[i], grid[i + 1]]`.
    pub counts: Vec<u64>,
    pub trials: u64,
}

impl SignChangeHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.grid[i] + self.grid[i + 1])
    }

    /// Location of the `q`-quantile of crossings, each placed at its interval midpoint.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let target = (q.clamp(0.0, 1.0) * total as f64).ceil().max(1.0) as u64;
        let mut seen = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            seen += c;
            if seen >= target {
                return Some(self.midpoint(i));
            }
        }
        None
    }

    pub fn median(&self) -> Option<f64> {
        self.quantile(0.5)
    }

    pub fn interquartile_width(&self) -> Option<f64> {
        Some(self.quantile(0.75)? - self.quantile(0.25)?)
    }

    pub fn mean(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| {
            self.counts
                .iter()
                .enumerate()
                .map(|(i, &c)| c as f64 * self.midpoint(i))
                .sum::<f64>()
                / total as f64
        })
    }

    pub fn std_dev(&self) -> Option<f64> {
        let total = self.total();
        let mean = self.mean()?;
        (total > 1).then(|| {
            let ss: f64 = self
                .counts
                .iter()
                .enumerate()
                .map(|(i, &c)| c as f64 * (self.midpoint(i) - mean).powi(2))
                .sum();
            (ss / (total - 1) as f64).sqrt()
        })
    }
}

/// Evaluates the directional derivative at every grid point on fresh batches,
/// `trials` times, and counts the intervals where it goes from negative to
/// non-negative.
pub fn snngpp_histogram<O: Oracle + ?Sized>(
    oracle: &mut O,
    x: &[f64],
    d: &[f64],
    grid: &[f64],
    trials: u64,
) -> Result<SignChangeHistogram> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "grid needs at least two increasing points".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut counts = vec![0u64; grid.len() - 1];
    let mut values = vec![0.0; grid.len()];
    for _ in 0..trials {
        for (v, &alpha) in values.iter_mut().zip(grid) {
            *v = oracle.evaluate_fresh(&DirectionalSlice::new(x, d, alpha))?.dderiv;
        }
        for (i, w) in values.windows(2).enumerate() {
            if w[0] < 0.0 && w[1] >= 0.0 {
                counts[i] += 1;
            }
        }
    }
    Ok(SignChangeHistogram {
        grid: grid.to_vec(),
        counts,
        trials,
    })
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + h * i as f64).collect()
}

/// One accuracy cell of a robustness table.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyEntry {
    pub strategy: String,
    pub problem: String,
    pub optimizer: String,
    pub accuracy: f64,
}

impl AccuracyEntry {
    pub fn new(strategy: &str, problem: &str, optimizer: &str, accuracy: f64) -> Self {
        Self {
            strategy: strategy.into(),
            problem: problem.into(),
            optimizer: optimizer.into(),
            accuracy,
        }
    }
}

type Cell = (String, String, String);

/// Accuracy gaps to the best strategy of every problem and optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessTable {
    /// In first-seen order.
    pub strategies: Vec<String>,
    pub problems: Vec<String>,
    pub optimizers: Vec<String>,
    accuracy: BTreeMap<Cell, f64>,
    psi: BTreeMap<Cell, f64>,
}

fn key(s: &str, p: &str, o: &str) -> Cell {
    (s.to_string(), p.to_string(), o.to_string())
}

impl RobustnessTable {
    pub fn accuracy(&self, strategy: &str, problem: &str, optimizer: &str) -> Option<f64> {
        self.accuracy.get(&key(strategy, problem, optimizer)).copied()
    }

    pub fn psi(&self, strategy: &str, problem: &str, optimizer: &str) -> Option<f64> {
        self.psi.get(&key(strategy, problem, optimizer)).copied()
    }

    /// Sum of gaps over optimizers for one problem.
    pub fn r_problem(&self, strategy: &str, problem: &str) -> f64 {
        self.optimizers
            .iter()
            .filter_map(|o| self.psi(strategy, problem, o))
            .sum()
    }

    /// Sum of gaps over problems and optimizers.
    pub fn r_overall(&self, strategy: &str) -> f64 {
        self.problems.iter().map(|p| self.r_problem(strategy, p)).sum()
    }

    /// `strategy,problem,optimizer,accuracy,psi` rows, then `strategy,R` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,problem,optimizer,accuracy,psi\n");
        for s in &self.strategies {
            for p in &self.problems {
                for o in &self.optimizers {
                    let k = key(s, p, o);
                    out.push_str(&format!("{s},{p},{o},{},{}\n", self.accuracy[&k], self.psi[&k]));
                }
            }
        }
        out.push_str("strategy,R\n");
        for s in &self.strategies {
            out.push_str(&format!("{s},{}\n", self.r_overall(s)));
        }
        out
    }
}

fn push_unique(list: &mut Vec<String>, v: &str) {
    if !list.iter().any(|x| x == v) {
        list.push(v.to_string());
    }
}

/// Relative robustness of each strategy: the summed distance of its
/// accuracies from the best accuracy of every (problem, optimizer) pair.
pub fn relative_robustness(entries: &[AccuracyEntry]) -> Result<RobustnessTable> {
    let mut strategies = Vec::new();
    let mut problems = Vec::new();
    let mut optimizers = Vec::new();
    let mut accuracy = BTreeMap::new();
    for e in entries {
        if !e.accuracy.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "accuracy for {}/{}/{} is not finite",
                e.strategy, e.problem, e.optimizer
            )));
        }
        push_unique(&mut strategies, &e.strategy);
        push_unique(&mut problems, &e.problem);
        push_unique(&mut optimizers, &e.optimizer);
        if accuracy
            .insert(key(&e.strategy, &e.problem, &e.optimizer), e.accuracy)
            .is_some()
        {
            return Err(Error::InvalidArgument(format!(
                "duplicate cell {}/{}/{}",
                e.strategy, e.problem, e.optimizer
            )));
        }
    }

    let mut best: BTreeMap<(String, String), f64> = BTreeMap::new();
    for s in &strategies {
        for p in &problems {
            for o in &optimizers {
                let a = *accuracy.get(&key(s, p, o)).ok_or_else(|| Error::IncompleteTable {
                    strategy: s.clone(),
                    problem: p.clone(),
                    optimizer: o.clone(),
                })?;
                let b = best.entry((p.clone(), o.clone())).or_insert(f64::NEG_INFINITY);
                *b = b.max(a);
            }
        }
    }
    let psi = accuracy
        .iter()
        .map(|(k, &a)| (k.clone(), best[&(k.1.clone(), k.2.clone())] - a))
        .collect();
    Ok(RobustnessTable {
        strategies,
        problems,
        optimizers,
        accuracy,
        psi,
    })
}

/// Trailing mean over `window` points; the first points average what is available.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, &v) in series.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    Ok(out)
}
