//! Competitor learning-rate strategies.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::goals::degenerate_restart;
use crate::oracle::{dot, DirectionalSlice, Oracle};
use crate::surrogate::{LineSearchResult, Termination};

pub fn fixed_step(gamma: f64) -> f64 {
    gamma
}

/// Cosine annealing with warm restarts, counted in iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineSchedule {
    pub eta_max: f64,
    pub eta_min: f64,
    pub t0: u64,
    pub tmult: u64,
    /// Iterations since the last restart.
    pub t: u64,
    /// Length of the current period.
    pub ti: u64,
}

impl CosineSchedule {
    pub fn new(eta_max: f64, eta_min: f64, t0: u64, tmult: u64) -> Result<Self> {
        if !(eta_max > 0.0) || !(eta_min >= 0.0) || eta_min > eta_max {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= eta_min ({eta_min}) <= eta_max ({eta_max}), eta_max > 0"
            )));
        }
        if t0 == 0 || tmult == 0 {
            return Err(Error::InvalidArgument("t0 and tmult must be at least 1".into()));
        }
        Ok(Self {
            eta_max,
            eta_min,
            t0,
            tmult,
            t: 0,
            ti: t0,
        })
    }

    pub fn lr(&self) -> f64 {
        cosine_lr(self)
    }

    /// Moves one iteration forward, restarting at the end of a period.
    pub fn advance(&mut self) {
        self.t += 1;
        if self.t >= self.ti {
            self.t = 0;
            self.ti = self.ti.saturating_mul(self.tmult);
        }
    }
}

pub fn cosine_lr(s: &CosineSchedule) -> f64 {
    s.eta_min + 0.5 * (s.eta_max - s.eta_min) * (1.0 + (PI * s.t as f64 / s.ti as f64).cos())
}

/// Persistent step of the GOLS-I search.
#[derive(Debug, Clone, PartialEq)]
pub struct GolsiState {
    pub alpha: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub epsilon: f64,
}

impl GolsiState {
    pub fn new(alpha: f64, alpha_min: f64, alpha_max: f64) -> Result<Self> {
        if !(alpha_min > 0.0 && alpha_min < alpha_max) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < alpha_min ({alpha_min}) < alpha_max ({alpha_max})"
            )));
        }
        Ok(Self {
            alpha: alpha.clamp(alpha_min, alpha_max),
            alpha_min,
            alpha_max,
            epsilon: 1e-8,
        })
    }
}

/// Inexact gradient-only line search: double while the directional derivative
/// is negative, halve while it is positive, and accept the point on the
/// non-negative side of the sign change.
pub fn golsi_step<O: Oracle + ?Sized>(
    oracle: &mut O,
    x: &[f64],
    d: &[f64],
    origin_gradient: &[f64],
    state: &mut GolsiState,
) -> Result<LineSearchResult> {
    let f0p = dot(d, origin_gradient);
    if !(f0p < 0.0) || f0p.abs() < state.epsilon {
        return degenerate_restart(oracle, x);
    }

    let mut evals = 0u64;
    let mut alpha = state.alpha;
    let mut probe = oracle.evaluate_fresh(&DirectionalSlice::new(x, d, alpha))?;
    evals += 1;

    let (accepted, gradient, termination) = if probe.dderiv < 0.0 {
        loop {
            if 2.0 * alpha > state.alpha_max {
                break (alpha, probe.gradient, Termination::BracketCapped);
            }
            alpha *= 2.0;
            probe = oracle.evaluate_fresh(&DirectionalSlice::new(x, d, alpha))?;
            evals += 1;
            if probe.dderiv >= 0.0 {
                break (alpha, probe.gradient, Termination::BracketConverged);
            }
        }
    } else if probe.dderiv > 0.0 {
        loop {
            if alpha / 2.0 < state.alpha_min {
                break (alpha, probe.gradient, Termination::BracketCapped);
            }
            let upper = (alpha, probe.gradient);
            alpha /= 2.0;
            probe = oracle.evaluate_fresh(&DirectionalSlice::new(x, d, alpha))?;
            evals += 1;
            if probe.dderiv < 0.0 {
                break (upper.0, upper.1, Termination::BracketConverged);
            }
        }
    } else {
        (alpha, probe.gradient, Termination::BracketConverged)
    };

    state.alpha = accepted;
    Ok(LineSearchResult::new(accepted, gradient, evals, termination))
}
