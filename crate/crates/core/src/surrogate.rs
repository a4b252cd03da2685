//! Gradient-only surrogate: a linear model of the directional derivative
//! fitted at two points and rooted to estimate where its sign changes.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::oracle::{dot, DirectionalSlice, Oracle};

/// How a learning-rate resolution ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    ImmediateAccept,
    Interpolated,
    ExtrapolationGuess,
    BracketConverged,
    BracketCapped,
    DegenerateRestart,
    /// Learning rate came from a schedule, no search was run.
    Scheduled,
}

impl Termination {
    pub const ALL: [Termination; 7] = [
        Termination::ImmediateAccept,
        Termination::Interpolated,
        Termination::ExtrapolationGuess,
        Termination::BracketConverged,
        Termination::BracketCapped,
        Termination::DegenerateRestart,
        Termination::Scheduled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ImmediateAccept => "immediate-accept",
            Termination::Interpolated => "interpolated",
            Termination::ExtrapolationGuess => "extrapolation-guess",
            Termination::BracketConverged => "bracket-converged",
            Termination::BracketCapped => "bracket-capped",
            Termination::DegenerateRestart => "degenerate-restart",
            Termination::Scheduled => "scheduled",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Termination::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "termination",
                name: s.to_string(),
            })
    }
}

/// Outcome of one line search along a descent direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub alpha_star: f64,
    /// Gradient at `x + alpha_star * d`, from the batch that produced it.
    pub gradient_star: Vec<f64>,
    pub evals_used: u64,
    pub termination: Termination,
    pub growth_steps: u32,
    pub regula_falsi_steps: u32,
    /// Regula-Falsi steps entered without a sign change between the bounds.
    pub bracket_violations: u32,
}

impl LineSearchResult {
    pub(crate) fn new(alpha_star: f64, gradient_star: Vec<f64>, evals_used: u64, termination: Termination) -> Self {
        Self {
            alpha_star,
            gradient_star,
            evals_used,
            termination,
            growth_steps: 0,
            regula_falsi_steps: 0,
            bracket_violations: 0,
        }
    }
}

/// `f'(alpha) ~ 2 k1 alpha + k2` through two derivative samples.
///
/// The constant term of the underlying quadratic is not identifiable from
/// derivatives and is not stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearDerivativeModel {
    pub k1: f64,
    pub k2: f64,
    pub anchors: [(f64, f64); 2],
}

impl LinearDerivativeModel {
    pub fn derivative(&self, alpha: f64) -> f64 {
        2.0 * self.k1 * alpha + self.k2
    }

    /// Stationary point `-k2 / (2 k1)`, if the model is not flat.
    pub fn root(&self) -> Option<f64> {
        (self.k1 != 0.0).then(|| -self.k2 / (2.0 * self.k1))
    }
}

pub fn fit_linear_derivative(a0: f64, f0p: f64, a1: f64, f1p: f64) -> Result<LinearDerivativeModel> {
    if a0 == a1 {
        return Err(Error::DegenerateAbscissae(a0));
    }
    let k1 = (f1p - f0p) / (2.0 * (a1 - a0));
    let k2 = f0p - 2.0 * k1 * a0;
    Ok(LinearDerivativeModel {
        k1,
        k2,
        anchors: [(a0, f0p), (a1, f1p)],
    })
}

/// Zero of the line through `(a0, f0p)` and `(a1, f1p)`.
pub fn interpolate_sign_change(a0: f64, f0p: f64, a1: f64, f1p: f64) -> Result<f64> {
    if f1p == f0p {
        return Err(Error::ZeroSlope(f0p));
    }
    Ok(a0 - f0p * (a1 - a0) / (f1p - f0p))
}

/// Vanilla GOS line search: probe once at `alpha1`, interpolate when the
/// derivative turned non-negative, otherwise accept `alpha1`.
///
/// `origin_gradient` is the gradient already known at `x` (the one `d` was
/// built from); when `None` a fresh evaluation is spent at the origin.
pub fn gos_step<O: Oracle + ?Sized>(
    oracle: &mut O,
    x: &[f64],
    d: &[f64],
    origin_gradient: Option<&[f64]>,
    alpha1: f64,
    alpha_min: f64,
) -> Result<LineSearchResult> {
    if !(alpha1 > 0.0) || !alpha1.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "initial guess {alpha1} must be positive"
        )));
    }
    let mut evals = 0;
    let f0p = match origin_gradient {
        Some(g) => dot(d, g),
        None => {
            evals += 1;
            oracle.evaluate_fresh(&DirectionalSlice::new(x, d, 0.0))?.dderiv
        }
    };
    if !(f0p < 0.0) {
        return Err(Error::NotDescent(f0p));
    }

    let probe = oracle.evaluate_fresh(&DirectionalSlice::new(x, d, alpha1))?;
    evals += 1;
    let f1p = probe.dderiv;

    if f1p >= 0.0 {
        let raw = interpolate_sign_change(0.0, f0p, alpha1, f1p)?;
        let alpha_star = raw.clamp(alpha_min.min(alpha1), alpha1);
        if alpha_star == alpha1 {
            return Ok(LineSearchResult::new(
                alpha1,
                probe.gradient,
                evals,
                Termination::Interpolated,
            ));
        }
        let at_star = oracle.evaluate_fresh(&DirectionalSlice::new(x, d, alpha_star))?;
        evals += 1;
        return Ok(LineSearchResult::new(
            alpha_star,
            at_star.gradient,
            evals,
            Termination::Interpolated,
        ));
    }

    // Both extrapolation cases accept the initial guess.
    Ok(LineSearchResult::new(
        alpha1,
        probe.gradient,
        evals,
        Termination::ExtrapolationGuess,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::SliceOracle;
    use proptest::prelude::*;

    #[test]
    fn fit_examples() {
        let m = fit_linear_derivative(0.0, -2.0, 1.0, 2.0).unwrap();
        assert_eq!((m.k1, m.k2), (2.0, -2.0));
        let m = fit_linear_derivative(0.0, -1.0, 1.0, -1.0).unwrap();
        assert_eq!((m.k1, m.k2), (0.0, -1.0));
        assert_eq!(m.root(), None);
        let m = fit_linear_derivative(1.0, 0.0, 3.0, 4.0).unwrap();
        assert_eq!((m.k1, m.k2), (1.0, -2.0));
        assert_eq!(m.derivative(1.0), 0.0);
        assert_eq!(m.derivative(3.0), 4.0);
        assert_eq!(
            fit_linear_derivative(2.0, 1.0, 2.0, 3.0),
            Err(Error::DegenerateAbscissae(2.0))
        );
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(interpolate_sign_change(0.0, -2.0, 1.0, 2.0).unwrap(), 0.5);
        assert_eq!(interpolate_sign_change(0.0, -1.0, 1.0, -0.5).unwrap(), 2.0);
        assert_eq!(interpolate_sign_change(0.0, -3.0, 6.0, 3.0).unwrap(), 3.0);
        assert_eq!(
            interpolate_sign_change(0.0, -1.0, 1.0, -1.0),
            Err(Error::ZeroSlope(-1.0))
        );
    }

    #[test]
    fn termination_names_round_trip() {
        for t in Termination::ALL {
            assert_eq!(t.as_str().parse::<Termination>().unwrap(), t);
        }
    }

    #[test]
    fn gos_interpolates_exact_minimizer() {
        // f(a) = (a - 2)^2
        let mut oracle = SliceOracle::new(|a| 2.0 * (a - 2.0));
        let r = gos_step(&mut oracle, &[0.0], &[1.0], None, 4.0, 1e-8).unwrap();
        assert_eq!(r.alpha_star, 2.0);
        assert_eq!(r.termination, Termination::Interpolated);
        assert_eq!(r.gradient_star, vec![0.0]);
        assert_eq!(r.evals_used, 3);
    }

    #[test]
    fn gos_linear_loss_accepts_guess() {
        let mut oracle = SliceOracle::new(|_| -1.0);
        let r = gos_step(&mut oracle, &[0.0], &[1.0], None, 1.0, 1e-8).unwrap();
        assert_eq!(r.alpha_star, 1.0);
        assert_eq!(r.termination, Termination::ExtrapolationGuess);
    }

    #[test]
    fn gos_bounded_extrapolation_accepts_guess() {
        // f(a) = (a - 10)^2: f'0 = -20, f'1 = -18
        let mut oracle = SliceOracle::new(|a| 2.0 * (a - 10.0));
        let r = gos_step(&mut oracle, &[0.0], &[1.0], None, 1.0, 1e-8).unwrap();
        assert_eq!(r.alpha_star, 1.0);
        assert_eq!(r.termination, Termination::ExtrapolationGuess);
        assert_eq!(r.evals_used, 2);
    }

    #[test]
    fn gos_zero_derivative_at_guess() {
        let mut oracle = SliceOracle::new(|a| a - 1.0);
        let r = gos_step(&mut oracle, &[0.0], &[1.0], Some(&[-1.0]), 1.0, 1e-8).unwrap();
        assert_eq!(r.alpha_star, 1.0);
        assert_eq!(r.termination, Termination::Interpolated);
        assert_eq!(r.evals_used, 1);
    }

    #[test]
    fn gos_rejects_ascent() {
        let mut oracle = SliceOracle::new(|a| a + 1.0);
        assert_eq!(
            gos_step(&mut oracle, &[0.0], &[1.0], None, 1.0, 1e-8),
            Err(Error::NotDescent(1.0))
        );
    }

    proptest! {
        #[test]
        fn interpolation_exact_on_affine(root in -100.0f64..100.0, slope in 0.01f64..100.0,
                                         a0 in -50.0f64..50.0, gap in 0.01f64..50.0) {
            let a1 = a0 + gap;
            let f = |a: f64| slope * (a - root);
            let est = interpolate_sign_change(a0, f(a0), a1, f(a1)).unwrap();
            prop_assert!((est - root).abs() <= 1e-12 * root.abs().max(1.0), "est {} root {}", est, root);
            let model = fit_linear_derivative(a0, f(a0), a1, f(a1)).unwrap();
            let via_model = model.root().unwrap();
            prop_assert!((via_model - est).abs() <= 1e-12 * est.abs().max(1.0));
        }

        #[test]
        fn opposite_signs_interpolate_inside(a0 in -10.0f64..10.0, gap in 0.01f64..10.0,
                                             f0 in -10.0f64..-0.01, f1 in 0.01f64..10.0) {
            let a1 = a0 + gap;
            let est = interpolate_sign_change(a0, f0, a1, f1).unwrap();
            prop_assert!(est > a0 && est < a1);
        }

        #[test]
        fn gos_never_exceeds_guess(root in 0.01f64..20.0, slope in 0.1f64..5.0, alpha1 in 0.01f64..20.0) {
            let mut oracle = SliceOracle::new(move |a| slope * (a - root));
            let r = gos_step(&mut oracle, &[0.0], &[1.0], None, alpha1, 1e-8).unwrap();
            prop_assert!(r.alpha_star <= alpha1);
            prop_assert!(r.alpha_star >= 0.0);
        }
    }
}
