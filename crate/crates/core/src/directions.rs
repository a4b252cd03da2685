//! Descent-direction generators: SGD, RMSprop and Adam.
//!
//! Moments update once per iteration from the gradient at the line-search
//! origin; the line search then resolves how far to move along the result.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectionKind {
    Sgd,
    RmsProp,
    Adam,
}

impl DirectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DirectionKind::Sgd => "sgd",
            DirectionKind::RmsProp => "rmsprop",
            DirectionKind::Adam => "adam",
        }
    }

    /// Recommended learning rate for this kind.
    pub fn gamma_default(self) -> f64 {
        match self {
            DirectionKind::Sgd | DirectionKind::RmsProp => 0.01,
            DirectionKind::Adam => 0.001,
        }
    }
}

impl fmt::Display for DirectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DirectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(DirectionKind::Sgd),
            "rmsprop" => Ok(DirectionKind::RmsProp),
            "adam" => Ok(DirectionKind::Adam),
            _ => Err(Error::UnknownName {
                kind: "direction",
                name: s.to_string(),
            }),
        }
    }
}

/// Turns gradients into search directions, keeping whatever running state it needs.
pub trait DirectionGenerator: Send {
    fn kind(&self) -> DirectionKind;

    fn gamma_default(&self) -> f64 {
        self.kind().gamma_default()
    }

    /// Direction for gradient `g`; advances the step counter by one.
    fn direction(&mut self, g: &[f64]) -> Vec<f64>;

    fn step_count(&self) -> u64;
}

pub fn sgd_direction(g: &[f64]) -> Vec<f64> {
    g.iter().map(|v| -v).collect()
}

#[derive(Debug, Clone, Default)]
pub struct Sgd {
    steps: u64,
}

impl DirectionGenerator for Sgd {
    fn kind(&self) -> DirectionKind {
        DirectionKind::Sgd
    }

    fn direction(&mut self, g: &[f64]) -> Vec<f64> {
        self.steps += 1;
        sgd_direction(g)
    }

    fn step_count(&self) -> u64 {
        self.steps
    }
}

#[derive(Debug, Clone)]
pub struct RmsProp {
    pub rho: f64,
    pub eps_stab: f64,
    second_moment: Vec<f64>,
    steps: u64,
}

impl RmsProp {
    pub fn new(dim: usize) -> Self {
        Self {
            rho: 0.99,
            eps_stab: 1e-8,
            second_moment: vec![0.0; dim],
            steps: 0,
        }
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }
}

impl DirectionGenerator for RmsProp {
    fn kind(&self) -> DirectionKind {
        DirectionKind::RmsProp
    }

    fn direction(&mut self, g: &[f64]) -> Vec<f64> {
        self.steps += 1;
        self.second_moment
            .iter_mut()
            .zip(g)
            .map(|(v, &gi)| {
                *v = self.rho * *v + (1.0 - self.rho) * gi * gi;
                -gi / (v.sqrt() + self.eps_stab)
            })
            .collect()
    }

    fn step_count(&self) -> u64 {
        self.steps
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps_stab: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    steps: u64,
}

impl Adam {
    pub fn new(dim: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps_stab: 1e-8,
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            steps: 0,
        }
    }
}

impl DirectionGenerator for Adam {
    fn kind(&self) -> DirectionKind {
        DirectionKind::Adam
    }

    fn direction(&mut self, g: &[f64]) -> Vec<f64> {
        self.steps += 1;
        let t = self.steps as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps_stab);
        self.first_moment
            .iter_mut()
            .zip(self.second_moment.iter_mut())
            .zip(g)
            .map(|((m, v), &gi)| {
                *m = b1 * *m + (1.0 - b1) * gi;
                *v = b2 * *v + (1.0 - b2) * gi * gi;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                -m_hat / (v_hat.sqrt() + eps)
            })
            .collect()
    }

    fn step_count(&self) -> u64 {
        self.steps
    }
}

pub type DirectionFactory = fn(usize) -> Box<dyn DirectionGenerator>;

/// Direction generators selectable by their config name.
pub fn direction_registry() -> Registry<DirectionFactory> {
    let mut r: Registry<DirectionFactory> = Registry::new("direction");
    r.register("sgd", |_| Box::new(Sgd::default()));
    r.register("rmsprop", |dim| Box::new(RmsProp::new(dim)));
    r.register("adam", |dim| Box::new(Adam::new(dim)));
    r
}

pub fn build_direction(name: &str, dim: usize) -> Result<Box<dyn DirectionGenerator>> {
    direction_registry().get(name).map(|f| f(dim))
}
