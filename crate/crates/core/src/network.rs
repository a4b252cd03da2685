//! Fully connected tanh network with an affine output layer and mean squared
//! error against one-hot targets.
//!
//! Parameters live in one flat vector. Each layer contributes a row-major
//! `fan_in x fan_out` weight block followed by `fan_out` biases, in layer order.

use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::oracle::{BatchSpec, SampledLoss};

/// Floating-point type the network computes in.
pub trait Real: ndarray::LinalgScalar + std::ops::AddAssign + PartialOrd + Send + Sync + std::fmt::Debug {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn tanh(self) -> Self;
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn tanh(self) -> Self {
        f32::tanh(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(Error::UnknownName {
                kind: "precision",
                name: s.to_string(),
            }),
        }
    }
}

/// Where one layer's weights and biases sit in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Range<usize>,
    pub biases: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpArchitecture {
    layer_sizes: Vec<usize>,
    layout: Vec<LayerLayout>,
}

impl MlpArchitecture {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(Error::InvalidArgument(
                "an MLP needs input, at least one hidden and an output layer".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument("layer sizes must be at least 1".into()));
        }
        let mut layout = Vec::with_capacity(layer_sizes.len() - 1);
        let mut offset = 0;
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let weights = offset..offset + fan_in * fan_out;
            let biases = weights.end..weights.end + fan_out;
            offset = biases.end;
            layout.push(LayerLayout {
                fan_in,
                fan_out,
                weights,
                biases,
            });
        }
        Ok(Self { layer_sizes, layout })
    }

    /// `n_input-1000-500-250-n_output`.
    pub fn n2(n_input: usize, n_output: usize) -> Self {
        Self::new(vec![n_input, 1000, 500, 250, n_output]).expect("valid sizes")
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layout(&self) -> &[LayerLayout] {
        &self.layout
    }

    pub fn n_input(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_output(&self) -> usize {
        *self.layer_sizes.last().expect("non-empty")
    }

    pub fn num_params(&self) -> usize {
        self.layout.last().map_or(0, |l| l.biases.end)
    }
}

/// Uniform Glorot initialization; biases are zero.
pub fn xavier_init<R: Rng + ?Sized>(arch: &MlpArchitecture, rng: &mut R) -> Vec<f64> {
    let mut params = vec![0.0; arch.num_params()];
    for layer in arch.layout() {
        let bound = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        for w in &mut params[layer.weights.clone()] {
            *w = dist.sample(rng);
        }
    }
    params
}

fn layer_views<'a, T>(layer: &LayerLayout, params: &'a [T]) -> (ArrayView2<'a, T>, ndarray::ArrayView1<'a, T>) {
    let w = ArrayView2::from_shape((layer.fan_in, layer.fan_out), &params[layer.weights.clone()])
        .expect("layout matches parameter length");
    let b = ndarray::ArrayView1::from(&params[layer.biases.clone()]);
    (w, b)
}

fn check_shapes<T>(arch: &MlpArchitecture, params: &[T], inputs: &ArrayView2<'_, T>) -> Result<()> {
    if params.len() != arch.num_params() {
        return Err(Error::InvalidArgument(format!(
            "expected {} parameters, got {}",
            arch.num_params(),
            params.len()
        )));
    }
    if inputs.ncols() != arch.n_input() {
        return Err(Error::InvalidArgument(format!(
            "expected inputs of width {}, got {}",
            arch.n_input(),
            inputs.ncols()
        )));
    }
    Ok(())
}

/// Activations of every layer, input first, output last.
fn activations<T: Real>(arch: &MlpArchitecture, params: &[T], inputs: ArrayView2<'_, T>) -> Vec<Array2<T>> {
    let last = arch.layout().len() - 1;
    let mut acts = Vec::with_capacity(arch.layout().len() + 1);
    acts.push(inputs.to_owned());
    for (i, layer) in arch.layout().iter().enumerate() {
        let (w, b) = layer_views(layer, params);
        let mut z = acts[i].dot(&w);
        z += &b;
        if i < last {
            z.mapv_inplace(Real::tanh);
        }
        acts.push(z);
    }
    acts
}

pub fn forward<T: Real>(arch: &MlpArchitecture, params: &[T], inputs: ArrayView2<'_, T>) -> Result<Array2<T>> {
    check_shapes(arch, params, &inputs)?;
    Ok(activations(arch, params, inputs).pop().expect("output layer"))
}

/// Mean squared error over batch and outputs, with its exact gradient.
///
/// A non-finite per-row loss is reported with the row index.
pub fn loss_and_grad<T: Real>(
    arch: &MlpArchitecture,
    params: &[T],
    inputs: ArrayView2<'_, T>,
    targets: ArrayView2<'_, T>,
) -> Result<(f64, Vec<T>)> {
    check_shapes(arch, params, &inputs)?;
    if targets.dim() != (inputs.nrows(), arch.n_output()) {
        return Err(Error::InvalidArgument(format!(
            "targets have shape {:?}, expected ({}, {})",
            targets.dim(),
            inputs.nrows(),
            arch.n_output()
        )));
    }
    let batch = inputs.nrows();
    let k = arch.n_output();
    let acts = activations(arch, params, inputs);
    let output = acts.last().expect("output layer");
    let residual = output - &targets;

    let mut total = 0.0;
    for (row, r) in residual.axis_iter(Axis(0)).enumerate() {
        let sample: f64 = r.iter().map(|&v| v.to_f64() * v.to_f64()).sum::<f64>() / k as f64;
        if !sample.is_finite() {
            return Err(Error::NumericOverflow { sample: row });
        }
        total += sample;
    }
    let loss = total / batch as f64;

    let scale = T::from_f64(2.0 / (batch * k) as f64);
    let mut delta = residual.mapv(|v| v * scale);
    let mut grad = vec![T::zero(); arch.num_params()];
    for (i, layer) in arch.layout().iter().enumerate().rev() {
        let input = &acts[i];
        let gw = input.t().dot(&delta);
        let gb: Array1<T> = delta.sum_axis(Axis(0));
        for (dst, &src) in grad[layer.weights.clone()].iter_mut().zip(gw.iter()) {
            *dst = src;
        }
        for (dst, &src) in grad[layer.biases.clone()].iter_mut().zip(gb.iter()) {
            *dst = src;
        }
        if i > 0 {
            let (w, _) = layer_views(layer, params);
            let mut back = delta.dot(&w.t());
            back.zip_mut_with(input, |d, &h| *d = *d * (T::one() - h * h));
            delta = back;
        }
    }
    Ok((loss, grad))
}

/// Fraction of rows whose arg-max (lowest index on ties) equals the label.
pub fn accuracy<T: Real>(outputs: ArrayView2<'_, T>, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = outputs
        .axis_iter(Axis(0))
        .zip(labels)
        .filter(|(row, &label)| argmax(row.iter().copied()) == label)
        .count();
    hits as f64 / labels.len() as f64
}

fn argmax<T: Real>(values: impl Iterator<Item = T>) -> usize {
    let mut best = 0;
    let mut best_val: Option<T> = None;
    for (i, v) in values.enumerate() {
        if best_val.is_none_or(|b| v > b) {
            best = i;
            best_val = Some(v);
        }
    }
    best
}

/// Full-dataset loss and accuracy of one parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetMetrics {
    pub loss: f64,
    pub accuracy: f64,
}

/// The network trained on a labelled dataset, as a [`SampledLoss`].
#[derive(Debug, Clone)]
pub struct MlpProblem {
    arch: MlpArchitecture,
    train: Arc<Dataset>,
    test: Option<Arc<Dataset>>,
    precision: Precision,
}

impl MlpProblem {
    pub fn new(
        arch: MlpArchitecture,
        train: Arc<Dataset>,
        test: Option<Arc<Dataset>>,
        precision: Precision,
    ) -> Result<Self> {
        for ds in std::iter::once(&train).chain(test.iter()) {
            if ds.n_features() != arch.n_input() {
                return Err(Error::InvalidArgument(format!(
                    "dataset has {} features, network expects {}",
                    ds.n_features(),
                    arch.n_input()
                )));
            }
            if ds.classes() > arch.n_output() {
                return Err(Error::InvalidArgument(format!(
                    "dataset has {} classes, network has {} outputs",
                    ds.classes(),
                    arch.n_output()
                )));
            }
        }
        Ok(Self {
            arch,
            train,
            test,
            precision,
        })
    }

    pub fn architecture(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn train_set(&self) -> &Dataset {
        &self.train
    }

    pub fn test_set(&self) -> Option<&Dataset> {
        self.test.as_deref()
    }

    fn gather<T: Real>(&self, ds: &Dataset, rows: &[usize]) -> (Array2<T>, Array2<T>) {
        let nf = ds.n_features();
        let k = self.arch.n_output();
        let mut inputs = Array2::<T>::zeros((rows.len(), nf));
        let mut targets = Array2::<T>::zeros((rows.len(), k));
        for (r, &idx) in rows.iter().enumerate() {
            for (dst, &src) in inputs.row_mut(r).iter_mut().zip(ds.row(idx)) {
                *dst = T::from_f64(src as f64);
            }
            targets[[r, ds.label(idx)]] = T::one();
        }
        (inputs, targets)
    }

    fn loss_grad_in<T: Real>(&self, x: &[f64], batch: &BatchSpec) -> Result<(f64, Vec<f64>)> {
        let params: Vec<T> = x.iter().map(|&v| T::from_f64(v)).collect();
        let (inputs, targets) = self.gather::<T>(&self.train, batch.indices());
        let (loss, grad) = loss_and_grad(&self.arch, &params, inputs.view(), targets.view()).map_err(|e| match e {
            Error::NumericOverflow { sample } => Error::NumericOverflow {
                sample: batch.indices()[sample],
            },
            other => other,
        })?;
        Ok((loss, grad.into_iter().map(Real::to_f64).collect()))
    }

    fn metrics_in<T: Real>(&self, x: &[f64], ds: &Dataset) -> Result<DatasetMetrics> {
        const CHUNK: usize = 1000;
        let params: Vec<T> = x.iter().map(|&v| T::from_f64(v)).collect();
        let k = self.arch.n_output() as f64;
        let mut loss = 0.0;
        let mut hits = 0.0;
        let all: Vec<usize> = (0..ds.len()).collect();
        for rows in all.chunks(CHUNK) {
            let (inputs, targets) = self.gather::<T>(ds, rows);
            let out = forward(&self.arch, &params, inputs.view())?;
            let resid = &out - &targets;
            loss += resid.iter().map(|&v| v.to_f64() * v.to_f64()).sum::<f64>() / k;
            let labels: Vec<usize> = rows.iter().map(|&i| ds.label(i)).collect();
            hits += accuracy(out.view(), &labels) * rows.len() as f64;
        }
        let n = ds.len().max(1) as f64;
        Ok(DatasetMetrics {
            loss: loss / n,
            accuracy: hits / n,
        })
    }

    /// Loss and accuracy over a whole dataset; never charged to any budget.
    pub fn metrics(&self, x: &[f64], ds: &Dataset) -> Result<DatasetMetrics> {
        match self.precision {
            Precision::F32 => self.metrics_in::<f32>(x, ds),
            Precision::F64 => self.metrics_in::<f64>(x, ds),
        }
    }
}

impl SampledLoss for MlpProblem {
    fn dim(&self) -> usize {
        self.arch.num_params()
    }

    fn num_samples(&self) -> usize {
        self.train.len()
    }

    fn loss_grad(&self, x: &[f64], batch: &BatchSpec) -> Result<(f64, Vec<f64>)> {
        match self.precision {
            Precision::F32 => self.loss_grad_in::<f32>(x, batch),
            Precision::F64 => self.loss_grad_in::<f64>(x, batch),
        }
    }
}

/// Worst disagreement between backpropagation and central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub coordinates: Vec<usize>,
    pub max_relative_error: f64,
}

/// Compares backpropagated and central-difference gradients on `coords`
/// random coordinates of a random network, batch and one-hot targets.
pub fn gradient_check(arch: &MlpArchitecture, coords: usize, step: f64, seed: u64) -> Result<GradientCheck> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut params = xavier_init(arch, &mut rng);
    for layer in arch.layout() {
        for b in &mut params[layer.biases.clone()] {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let batch = 5;
    let inputs = Array2::from_shape_fn((batch, arch.n_input()), |_| rng.random_range(-1.0..1.0));
    let mut targets = Array2::zeros((batch, arch.n_output()));
    for r in 0..batch {
        targets[[r, rng.random_range(0..arch.n_output())]] = 1.0;
    }
    let (_, grad) = loss_and_grad(arch, &params, inputs.view(), targets.view())?;
    let coordinates: Vec<usize> =
        rand::seq::index::sample(&mut rng, arch.num_params(), coords.min(arch.num_params())).into_vec();
    let mut worst = 0.0f64;
    for &i in &coordinates {
        let orig = params[i];
        params[i] = orig + step;
        let (up, _) = loss_and_grad(arch, &params, inputs.view(), targets.view())?;
        params[i] = orig - step;
        let (down, _) = loss_and_grad(arch, &params, inputs.view(), targets.view())?;
        params[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let scale = grad[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((grad[i] - numeric).abs() / scale);
    }
    Ok(GradientCheck {
        coordinates,
        max_relative_error: worst,
    })
}
