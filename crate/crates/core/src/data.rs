//! Labelled datasets in the IDX container format, and synthetic stochastic
//! problems whose full-batch optimum is known exactly.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::oracle::{BatchSpec, SampledLoss};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Row-major inputs with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f32>,
    n_features: usize,
    labels: Vec<usize>,
    classes: usize,
    split: Split,
}

impl Dataset {
    pub fn new(inputs: Vec<f32>, n_features: usize, labels: Vec<usize>, classes: usize, split: Split) -> Result<Self> {
        if n_features == 0 || inputs.len() != labels.len() * n_features {
            return Err(Error::InvalidArgument(format!(
                "{} inputs do not form {} rows of width {}",
                inputs.len(),
                labels.len(),
                n_features
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidArgument(format!("label {bad} outside [0, {classes})")));
        }
        Ok(Self {
            inputs,
            n_features,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.inputs[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Rows `indices`, in the order given.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            inputs.extend_from_slice(self.row(i));
        }
        Dataset {
            inputs,
            n_features: self.n_features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            split: self.split,
        }
    }

    /// A reproducible random subset of `n` rows, kept in their original order.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidArgument(format!(
                "subset size {n} must lie in [1, {}]",
                self.len()
            )));
        }
        if n == self.len() {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, self.len(), n).into_vec();
        idx.sort_unstable();
        Ok(self.select(&idx))
    }
}

fn read_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            expected: at + 4,
            found: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], path: &Path, expected: u32) -> Result<()> {
    let found = read_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found,
            expected,
        });
    }
    Ok(())
}

fn check_len(bytes: &[u8], path: &Path, expected: usize) -> Result<()> {
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    Ok(())
}

/// Reads an IDX image/label pair. Pixels are scaled by 1/255; labels must be below 10.
pub fn load_idx(path_images: impl AsRef<Path>, path_labels: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    let (pi, pl) = (path_images.as_ref(), path_labels.as_ref());
    let images = fs::read(pi).map_err(|e| Error::io(pi, e))?;
    let labels = fs::read(pl).map_err(|e| Error::io(pl, e))?;

    check_magic(&images, pi, IMAGE_MAGIC)?;
    let n = read_u32(&images, 4, pi)? as usize;
    let rows = read_u32(&images, 8, pi)? as usize;
    let cols = read_u32(&images, 12, pi)? as usize;
    let n_features = rows * cols;
    check_len(&images, pi, 16 + n * n_features)?;

    check_magic(&labels, pl, LABEL_MAGIC)?;
    let n_labels = read_u32(&labels, 4, pl)? as usize;
    check_len(&labels, pl, 8 + n_labels)?;
    if n_labels != n {
        return Err(Error::CountMismatch {
            images: n,
            labels: n_labels,
        });
    }

    let inputs = images[16..16 + n * n_features]
        .iter()
        .map(|&b| b as f32 / 255.0)
        .collect();
    let labels: Vec<usize> = labels[8..8 + n].iter().map(|&b| b as usize).collect();
    Dataset::new(inputs, n_features, labels, 10, split)
}

/// Writes an IDX image/label pair; `pixels` holds `n * rows * cols` bytes.
pub fn write_idx(
    path_images: impl AsRef<Path>,
    path_labels: impl AsRef<Path>,
    rows: u32,
    cols: u32,
    pixels: &[u8],
    labels: &[u8],
) -> Result<()> {
    let n = labels.len() as u32;
    if pixels.len() != labels.len() * (rows * cols) as usize {
        return Err(Error::InvalidArgument("pixel count does not match labels".into()));
    }
    let mut img = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, n, rows, cols] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + labels.len());
    for v in [LABEL_MAGIC, n] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend_from_slice(labels);
    let (pi, pl) = (path_images.as_ref(), path_labels.as_ref());
    fs::write(pi, img).map_err(|e| Error::io(pi, e))?;
    fs::write(pl, lab).map_err(|e| Error::io(pl, e))
}

/// Standard MNIST file names inside `dir`: train images, train labels, test images, test labels.
pub fn mnist_paths(dir: impl AsRef<Path>) -> [std::path::PathBuf; 4] {
    let d = dir.as_ref();
    [
        d.join("train-images-idx3-ubyte"),
        d.join("train-labels-idx1-ubyte"),
        d.join("t10k-images-idx3-ubyte"),
        d.join("t10k-labels-idx1-ubyte"),
    ]
}

pub fn load_mnist(dir: impl AsRef<Path>) -> Result<(Dataset, Dataset)> {
    let [ti, tl, vi, vl] = mnist_paths(dir);
    Ok((load_idx(ti, tl, Split::Train)?, load_idx(vi, vl, Split::Test)?))
}

/// Mean taken relative to the first value, so identical values average exactly.
fn shifted_mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    let mut values = values.peekable();
    let first = values.peek().copied().unwrap_or(0.0);
    first + values.map(|v| v - first).sum::<f64>() / n as f64
}

fn normal_targets(mu: f64, sigma: f64, n: usize, rng: &mut ChaCha8Rng) -> impl Iterator<Item = f64> + '_ {
    (0..n).map(move |_| {
        let z: f64 = StandardNormal.sample(rng);
        mu + sigma * z
    })
}

/// Per-sample loss `(x - t_b)^2` on a scalar, with `t_b ~ Normal(mu, sigma)` drawn once.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyQuadratic {
    targets: Vec<f64>,
    optimum: f64,
    sigma: f64,
}

pub fn make_noisy_quadratic(mu: f64, sigma: f64, n: usize, seed: u64) -> Result<NoisyQuadratic> {
    if !(sigma >= 0.0) || n == 0 || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need finite mu, sigma >= 0 and n >= 1 (got mu={mu}, sigma={sigma}, n={n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets: Vec<f64> = normal_targets(mu, sigma, n, &mut rng).collect();
    let optimum = shifted_mean(targets.iter().copied(), n);
    Ok(NoisyQuadratic {
        targets,
        optimum,
        sigma,
    })
}

impl NoisyQuadratic {
    /// Minimizer of the full-batch loss: the mean of all targets.
    pub fn full_batch_optimum(&self) -> f64 {
        self.optimum
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

impl SampledLoss for NoisyQuadratic {
    fn dim(&self) -> usize {
        1
    }

    fn num_samples(&self) -> usize {
        self.targets.len()
    }

    fn loss_grad(&self, x: &[f64], batch: &BatchSpec) -> Result<(f64, Vec<f64>)> {
        let b = batch.len() as f64;
        let mut loss = 0.0;
        let mut resid = 0.0;
        for &i in batch.indices() {
            let r = x[0] - self.targets[i];
            if !r.is_finite() {
                return Err(Error::NumericOverflow { sample: i });
            }
            loss += r * r;
            resid += r;
        }
        Ok((loss / b, vec![2.0 * resid / b]))
    }
}

/// Per-sample loss `0.5 * |x - t_b|^2` in `dim` dimensions, with
/// `t_b ~ Normal(center, sigma^2 I)` drawn once.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyBowl {
    dim: usize,
    targets: Vec<f64>,
    optimum: Vec<f64>,
}

pub fn make_noisy_bowl(center: &[f64], sigma: f64, n: usize, seed: u64) -> Result<NoisyBowl> {
    if !(sigma >= 0.0) || n == 0 || center.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "need sigma >= 0, n >= 1 and a non-empty center (got sigma={sigma}, n={n})"
        )));
    }
    let dim = center.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets = Vec::with_capacity(n * dim);
    for _ in 0..n {
        for &c in center {
            let z: f64 = StandardNormal.sample(&mut rng);
            targets.push(c + sigma * z);
        }
    }
    let optimum = (0..dim)
        .map(|j| shifted_mean(targets.iter().skip(j).step_by(dim).copied(), n))
        .collect();
    Ok(NoisyBowl { dim, targets, optimum })
}

impl NoisyBowl {
    pub fn full_batch_optimum(&self) -> &[f64] {
        &self.optimum
    }

    fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.dim..(i + 1) * self.dim]
    }
}

impl SampledLoss for NoisyBowl {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_samples(&self) -> usize {
        self.targets.len() / self.dim
    }

    fn loss_grad(&self, x: &[f64], batch: &BatchSpec) -> Result<(f64, Vec<f64>)> {
        let b = batch.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.dim];
        for &i in batch.indices() {
            let mut sample = 0.0;
            for ((g, xi), ti) in grad.iter_mut().zip(x).zip(self.target(i)) {
                let r = xi - ti;
                sample += 0.5 * r * r;
                *g += r;
            }
            if !sample.is_finite() {
                return Err(Error::NumericOverflow { sample: i });
            }
            loss += sample;
        }
        grad.iter_mut().for_each(|g| *g /= b);
        Ok((loss / b, grad))
    }
}
