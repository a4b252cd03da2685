//! Stochastic loss oracles with dynamic mini-batch sub-sampling.
//!
//! Every evaluation draws a fresh mini-batch, so the loss seen along a search
//! direction is point-wise discontinuous. Line searches only ever talk to the
//! [`Oracle`] trait; [`StochasticOracle`] is the production implementation
//! backed by any [`SampledLoss`].

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Sorted, duplicate-free sample indices of one mini-batch.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BatchSpec {
    indices: Vec<usize>,
}

impl BatchSpec {
    /// Builds a batch from explicit indices, validating them against `dataset_size`.
    pub fn new(mut indices: Vec<usize>, dataset_size: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("batch must not be empty".into()));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("batch indices must be unique".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= dataset_size {
                return Err(Error::InvalidArgument(format!(
                    "batch index {last} out of range for dataset of {dataset_size}"
                )));
            }
        }
        Ok(Self { indices })
    }

    /// The whole dataset as one batch.
    pub fn full(dataset_size: usize) -> Self {
        Self {
            indices: (0..dataset_size).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Draws `batch_size` distinct indices uniformly from `0..dataset_size`.
///
/// Indices are returned sorted so that a full batch always sums in the same
/// order and is therefore bitwise reproducible.
pub fn sample_batch<R: rand::Rng + ?Sized>(dataset_size: usize, batch_size: usize, rng: &mut R) -> Result<BatchSpec> {
    if batch_size == 0 || batch_size > dataset_size {
        return Err(Error::InvalidArgument(format!(
            "batch size {batch_size} must lie in 1..={dataset_size}"
        )));
    }
    if batch_size == dataset_size {
        return Ok(BatchSpec::full(dataset_size));
    }
    let mut indices = index::sample(rng, dataset_size, batch_size).into_vec();
    indices.sort_unstable();
    Ok(BatchSpec { indices })
}

/// A finite-sum loss `L(x) = mean_b l(x; t_b)` over a fixed dataset.
pub trait SampledLoss {
    /// Number of parameters `p`.
    fn dim(&self) -> usize;

    /// Number of samples the batches index into.
    fn num_samples(&self) -> usize;

    /// Batch-mean loss and gradient. Implementations report the first sample
    /// whose loss is non-finite as [`Error::NumericOverflow`].
    fn loss_grad(&self, x: &[f64], batch: &BatchSpec) -> Result<(f64, Vec<f64>)>;

    /// Batch-mean loss only.
    fn loss(&self, x: &[f64], batch: &BatchSpec) -> Result<f64> {
        self.loss_grad(x, batch).map(|(l, _)| l)
    }
}

impl<T: SampledLoss + ?Sized> SampledLoss for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_samples(&self) -> usize {
        (**self).num_samples()
    }
    fn loss_grad(&self, x: &[f64], batch: &BatchSpec) -> Result<(f64, Vec<f64>)> {
        (**self).loss_grad(x, batch)
    }
    fn loss(&self, x: &[f64], batch: &BatchSpec) -> Result<f64> {
        (**self).loss(x, batch)
    }
}

impl<T: SampledLoss + ?Sized> SampledLoss for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_samples(&self) -> usize {
        (**self).num_samples()
    }
    fn loss_grad(&self, x: &[f64], batch: &BatchSpec) -> Result<(f64, Vec<f64>)> {
        (**self).loss_grad(x, batch)
    }
    fn loss(&self, x: &[f64], batch: &BatchSpec) -> Result<f64> {
        (**self).loss(x, batch)
    }
}

/// One counted evaluation of loss and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub gradient: Vec<f64>,
    pub eval_id: u64,
}

/// A point `x + alpha * d` on a search ray.
#[derive(Debug, Clone, Copy)]
pub struct DirectionalSlice<'a> {
    pub origin: &'a [f64],
    pub direction: &'a [f64],
    pub alpha: f64,
}

impl<'a> DirectionalSlice<'a> {
    pub fn new(origin: &'a [f64], direction: &'a [f64], alpha: f64) -> Self {
        Self {
            origin,
            direction,
            alpha,
        }
    }

    pub fn point(&self) -> Vec<f64> {
        step_point(self.origin, self.direction, self.alpha)
    }
}

/// Loss, gradient and directional derivative from a single batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub loss: f64,
    pub gradient: Vec<f64>,
    pub dderiv: f64,
}

/// Anything a line search can query for fresh-batch evaluations.
pub trait Oracle {
    fn dim(&self) -> usize;

    /// Loss and gradient at `x` on a freshly drawn batch. Costs one evaluation.
    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation>;

    /// Evaluations charged so far.
    fn evaluations(&self) -> u64;

    /// Evaluates at a point on the ray and projects the gradient onto the direction.
    fn evaluate_fresh(&mut self, slice: &DirectionalSlice<'_>) -> Result<Probe> {
        let eval = self.evaluate(&slice.point())?;
        let dderiv = dot(slice.direction, &eval.gradient);
        Ok(Probe {
            loss: eval.loss,
            gradient: eval.gradient,
            dderiv,
        })
    }
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation> {
        (**self).evaluate(x)
    }
    fn evaluations(&self) -> u64 {
        (**self).evaluations()
    }
}

/// Dynamic mini-batch oracle over a [`SampledLoss`].
///
/// Owns the sampling RNG and the evaluation counter; an optional budget makes
/// evaluation fail with [`Error::BudgetExhausted`] once spent.
#[derive(Debug, Clone)]
pub struct StochasticOracle<P> {
    problem: P,
    batch_size: usize,
    rng: ChaCha8Rng,
    count: u64,
    budget: Option<u64>,
}

impl<P: SampledLoss> StochasticOracle<P> {
    pub fn new(problem: P, batch_size: usize, seed: u64) -> Result<Self> {
        let n = problem.num_samples();
        if batch_size == 0 || batch_size > n {
            return Err(Error::InvalidArgument(format!(
                "batch size {batch_size} must lie in 1..={n}"
            )));
        }
        Ok(Self {
            problem,
            batch_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
            count: 0,
            budget: None,
        })
    }

    /// Full-batch oracle: every evaluation sees the whole dataset.
    pub fn full_batch(problem: P) -> Self {
        let n = problem.num_samples();
        Self {
            problem,
            batch_size: n,
            rng: ChaCha8Rng::seed_from_u64(0),
            count: 0,
            budget: None,
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn problem(&self) -> &P {
        &self.problem
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn is_deterministic(&self) -> bool {
        self.batch_size == self.problem.num_samples()
    }

    pub fn sample_batch(&mut self) -> BatchSpec {
        sample_batch(self.problem.num_samples(), self.batch_size, &mut self.rng)
            .expect("batch size validated at construction")
    }

    fn charge(&mut self) -> Result<u64> {
        if let Some(budget) = self.budget {
            if self.count >= budget {
                return Err(Error::BudgetExhausted(budget));
            }
        }
        self.count += 1;
        Ok(self.count)
    }

    /// Batch-mean loss on a given batch. Counts one evaluation.
    pub fn loss_at(&mut self, x: &[f64], batch: &BatchSpec) -> Result<f64> {
        self.charge()?;
        self.problem.loss(x, batch)
    }

    /// Batch-mean gradient on a given batch. Counts one evaluation.
    pub fn grad_at(&mut self, x: &[f64], batch: &BatchSpec) -> Result<Vec<f64>> {
        self.charge()?;
        self.problem.loss_grad(x, batch).map(|(_, g)| g)
    }

    /// `d^T g(x + alpha d)` on a given batch.
    pub fn dderiv_along(&mut self, slice: &DirectionalSlice<'_>, batch: &BatchSpec) -> Result<f64> {
        if slice.direction.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidDirection);
        }
        let g = self.grad_at(&slice.point(), batch)?;
        Ok(dot(slice.direction, &g))
    }
}

impl<P: SampledLoss> Oracle for StochasticOracle<P> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation> {
        let eval_id = self.charge()?;
        let batch = self.sample_batch();
        let (loss, gradient) = self.problem.loss_grad(x, &batch)?;
        Ok(Evaluation {
            loss,
            gradient,
            eval_id,
        })
    }

    fn evaluations(&self) -> u64 {
        self.count
    }
}

/// Deterministic one-dimensional oracle defined by `f'` (and optionally `f`).
///
/// The parameter is the scalar position itself, so with origin `0` and
/// direction `1` the learning rate equals the position on the slice.
pub struct SliceOracle {
    loss: Box<dyn Fn(f64) -> f64>,
    deriv: Box<dyn Fn(f64) -> f64>,
    count: u64,
}

impl SliceOracle {
    pub fn new(deriv: impl Fn(f64) -> f64 + 'static) -> Self {
        Self {
            loss: Box::new(|_| 0.0),
            deriv: Box::new(deriv),
            count: 0,
        }
    }

    pub fn with_loss(loss: impl Fn(f64) -> f64 + 'static, deriv: impl Fn(f64) -> f64 + 'static) -> Self {
        Self {
            loss: Box::new(loss),
            deriv: Box::new(deriv),
            count: 0,
        }
    }
}

impl Oracle for SliceOracle {
    fn dim(&self) -> usize {
        1
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation> {
        self.count += 1;
        let g = (self.deriv)(x[0]);
        let loss = (self.loss)(x[0]);
        if !g.is_finite() || !loss.is_finite() {
            return Err(Error::NumericOverflow { sample: 0 });
        }
        Ok(Evaluation {
            loss,
            gradient: vec![g],
            eval_id: self.count,
        })
    }

    fn evaluations(&self) -> u64 {
        self.count
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `x + alpha * d`.
pub fn step_point(x: &[f64], d: &[f64], alpha: f64) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect()
}
