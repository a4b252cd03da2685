//! Gradient-only approximation line search (GOALS).
//!
//! An initial guess is accepted outright when its directional derivative
//! satisfies the strong Wolfe condition. Otherwise a bracketing phase doubles
//! the upper bound until the derivative is no longer steeply negative, then
//! shrinks a sign-change bracket with Regula-Falsi steps until the overshoot
//! side of the condition holds.

use crate::error::{Error, Result};
use crate::oracle::{dot, norm, DirectionalSlice, Oracle};
use crate::surrogate::{LineSearchResult, Termination};

/// How the first trial step `alpha_1` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialGuess {
    /// The direction generator's recommended learning rate.
    FixedGamma,
    /// `1 / ||d||`.
    InverseDirectionNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalsConfig {
    /// Symmetric curvature constant.
    pub c: f64,
    /// Optional `(c1, c2)` undershoot/overshoot split; overrides `c` when set.
    pub split: Option<(f64, f64)>,
    pub gamma: f64,
    pub initial_guess: InitialGuess,
    /// Start each search from the previously accepted learning rate.
    pub carry_previous_alpha: bool,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Magnitude tolerance on directional derivatives.
    pub epsilon: f64,
    /// Armijo constant; only used by [`check_armijo`].
    pub omega: f64,
}

impl Default for GoalsConfig {
    fn default() -> Self {
        Self {
            c: 0.9,
            split: None,
            gamma: 0.01,
            initial_guess: InitialGuess::FixedGamma,
            carry_previous_alpha: false,
            alpha_min: 1e-8,
            alpha_max: 1e7,
            epsilon: 1e-8,
            omega: 1e-4,
        }
    }
}

impl GoalsConfig {
    /// The four named settings: GOALS-1 to GOALS-4.
    pub fn preset(setting: u8, gamma: f64) -> Result<Self> {
        let (initial_guess, carry_previous_alpha) = match setting {
            1 => (InitialGuess::FixedGamma, false),
            2 => (InitialGuess::FixedGamma, true),
            3 => (InitialGuess::InverseDirectionNorm, true),
            4 => (InitialGuess::InverseDirectionNorm, false),
            other => {
                return Err(Error::InvalidArgument(format!("no GOALS setting {other}")));
            }
        };
        Ok(Self {
            gamma,
            initial_guess,
            carry_previous_alpha,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::InvalidArgument(format!("c = {} must lie in (0, 1)", self.c)));
        }
        if let Some((c1, c2)) = self.split {
            if !(0.0..1.0).contains(&c1) || !(0.0..1.0).contains(&c2) {
                return Err(Error::InvalidArgument(format!(
                    "split constants ({c1}, {c2}) must lie in [0, 1)"
                )));
            }
        }
        if !(self.alpha_min > 0.0 && self.alpha_min < self.alpha_max) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < alpha_min ({}) < alpha_max ({})",
                self.alpha_min, self.alpha_max
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidArgument("gamma must be positive".into()));
        }
        Ok(())
    }

    /// `(c1, c2)`: undershoot and overshoot constants.
    pub fn curvature_pair(&self) -> (f64, f64) {
        self.split.unwrap_or((self.c, self.c))
    }

    fn accepts(&self, f0p: f64, f1p: f64) -> bool {
        match self.split {
            Some((c1, c2)) => check_iac_split(f0p, f1p, c1, c2),
            None => check_iac(f0p, f1p, self.c),
        }
    }

    fn first_guess(&self, d: &[f64], alpha_prev: Option<f64>) -> f64 {
        let fresh = match self.initial_guess {
            InitialGuess::FixedGamma => self.gamma,
            InitialGuess::InverseDirectionNorm => 1.0 / norm(d),
        };
        let guess = match alpha_prev {
            Some(prev) if self.carry_previous_alpha && prev > 0.0 => prev,
            _ => fresh,
        };
        guess.clamp(self.alpha_min, self.alpha_max)
    }
}

/// Sufficient decrease: `f1 <= f0 + omega * alpha1 * f0p`.
pub fn check_armijo(f0: f64, f1: f64, alpha1: f64, f0p: f64, omega: f64) -> bool {
    f1 <= f0 + omega * alpha1 * f0p
}

/// Wolfe curvature: `-f1p <= -c f0p`.
pub fn check_curvature(f0p: f64, f1p: f64, c: f64) -> bool {
    -f1p <= -c * f0p
}

/// Strong Wolfe: `|f1p| <= c |f0p|`.
pub fn check_iac(f0p: f64, f1p: f64, c: f64) -> bool {
    f1p.abs() <= c * f0p.abs()
}

/// Split strong Wolfe: `c1 f0p <= f1p <= -c2 f0p`.
pub fn check_iac_split(f0p: f64, f1p: f64, c1: f64, c2: f64) -> bool {
    c1 * f0p <= f1p && f1p <= -c2 * f0p
}

/// Re-evaluates the gradient at `x` on a new batch and reports a zero step.
pub fn degenerate_restart<O: Oracle + ?Sized>(oracle: &mut O, x: &[f64]) -> Result<LineSearchResult> {
    let eval = oracle.evaluate(x)?;
    Ok(LineSearchResult::new(
        0.0,
        eval.gradient,
        1,
        Termination::DegenerateRestart,
    ))
}

/// One GOALS line search from `x` along `d`.
///
/// `g_prev` is the gradient already known at `x`, normally the accepted
/// gradient of the previous iteration, so the origin costs no evaluation.
/// `alpha_prev` is the previously accepted learning rate, if any.
pub fn goals_step<O: Oracle + ?Sized>(
    oracle: &mut O,
    x: &[f64],
    d: &[f64],
    g_prev: &[f64],
    config: &GoalsConfig,
    alpha_prev: Option<f64>,
) -> Result<LineSearchResult> {
    if d.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidDirection);
    }
    let f0p = dot(d, g_prev);
    if !f0p.is_finite() {
        return Err(Error::NumericOverflow { sample: 0 });
    }
    // Tiny or non-descending slopes restart from a fresh batch.
    if f0p.abs() < config.epsilon || f0p >= 0.0 {
        return degenerate_restart(oracle, x);
    }

    let alpha1 = config.first_guess(d, alpha_prev);
    let probe = oracle.evaluate_fresh(&DirectionalSlice::new(x, d, alpha1))?;
    if config.accepts(f0p, probe.dderiv) {
        return Ok(LineSearchResult::new(
            alpha1,
            probe.gradient,
            1,
            Termination::ImmediateAccept,
        ));
    }

    let mut result = bracket(oracle, x, d, 0.0, alpha1, f0p, probe.dderiv, config)?;
    result.evals_used += 1;
    Ok(result)
}

/// Current bounds of the bracketing phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketState {
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    pub f_lower: f64,
    pub f_upper: f64,
    pub f0p: f64,
}

/// Grow-then-shrink bracketing. Counts only its own evaluations.
#[allow(clippy::too_many_arguments)]
pub fn bracket<O: Oracle + ?Sized>(
    oracle: &mut O,
    x: &[f64],
    d: &[f64],
    alpha0: f64,
    alpha1: f64,
    f0p: f64,
    f1p: f64,
    config: &GoalsConfig,
) -> Result<LineSearchResult> {
    if !(f0p < 0.0) {
        return Err(Error::NotDescent(f0p));
    }
    if !(alpha1 > alpha0) {
        return Err(Error::InvalidArgument(format!(
            "bracket needs alpha1 ({alpha1}) > alpha0 ({alpha0})"
        )));
    }
    let (c1, c2) = config.curvature_pair();
    let mut s = BracketState {
        alpha_lower: alpha0,
        alpha_upper: alpha1,
        f_lower: f0p,
        f_upper: f1p,
        f0p,
    };
    let mut evals = 0u64;
    let mut growth_steps = 0u32;
    let mut regula_falsi_steps = 0u32;
    let mut bracket_violations = 0u32;

    // Shift the interval towards larger learning rates.
    while s.f_upper < c1 * f0p && 2.0 * s.alpha_upper < config.alpha_max {
        s.alpha_lower = s.alpha_upper;
        s.f_lower = s.f_upper;
        s.alpha_upper *= 2.0;
        s.f_upper = oracle
            .evaluate_fresh(&DirectionalSlice::new(x, d, s.alpha_upper))?
            .dderiv;
        evals += 1;
        growth_steps += 1;
    }
    let capped = s.f_upper < c1 * f0p;

    let mut f_temp = s.f_upper;
    let mut alpha_temp = s.alpha_upper;

    // Shrink with Regula-Falsi while the trial overshoots.
    while f_temp > -c2 * f0p && s.f_upper * s.f_lower < 0.0 && (s.f_upper - s.f_lower).abs() > config.epsilon {
        if !(s.f_lower * s.f_upper < 0.0) {
            bracket_violations += 1;
        }
        debug_assert!(s.alpha_lower <= s.alpha_upper);
        alpha_temp = (s.alpha_lower * s.f_upper - s.alpha_upper * s.f_lower) / (s.f_upper - s.f_lower);
        alpha_temp = alpha_temp.clamp(s.alpha_lower, s.alpha_upper);
        f_temp = oracle.evaluate_fresh(&DirectionalSlice::new(x, d, alpha_temp))?.dderiv;
        evals += 1;
        regula_falsi_steps += 1;
        if f_temp * s.f_lower < 0.0 {
            s.f_upper = f_temp;
            s.alpha_upper = alpha_temp;
        } else {
            s.f_lower = f_temp;
            s.alpha_lower = alpha_temp;
        }
    }

    let alpha_star = alpha_temp.max(config.alpha_min);
    let at_star = oracle.evaluate_fresh(&DirectionalSlice::new(x, d, alpha_star))?;
    evals += 1;
    let termination = if capped {
        Termination::BracketCapped
    } else {
        Termination::BracketConverged
    };
    Ok(LineSearchResult {
        alpha_star,
        gradient_star: at_star.gradient,
        evals_used: evals,
        termination,
        growth_steps,
        regula_falsi_steps,
        bracket_violations,
    })
}
