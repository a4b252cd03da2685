//! Learning-rate strategies behind one trait, selectable by name.

use crate::baselines::{golsi_step, CosineSchedule, GolsiState};
use crate::directions::DirectionKind;
use crate::error::{Error, Result};
use crate::goals::{degenerate_restart, goals_step, GoalsConfig, InitialGuess};
use crate::oracle::{dot, norm, Oracle};
use crate::registry::Registry;
use crate::surrogate::{gos_step, LineSearchResult, Termination};

/// Everything a strategy sees at the start of an iteration.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub x: &'a [f64],
    pub d: &'a [f64],
    /// Gradient at `x` that `d` was built from.
    pub g: &'a [f64],
    pub iteration: u64,
}

/// Accepted learning rate and, when the strategy produced one, the gradient there.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub alpha: f64,
    pub gradient: Option<Vec<f64>>,
    pub evals_used: u64,
    pub termination: Termination,
    pub regula_falsi_steps: u32,
    pub bracket_violations: u32,
}

impl StepOutcome {
    fn scheduled(alpha: f64) -> Self {
        Self {
            alpha,
            gradient: None,
            evals_used: 0,
            termination: Termination::Scheduled,
            regula_falsi_steps: 0,
            bracket_violations: 0,
        }
    }
}

impl From<LineSearchResult> for StepOutcome {
    fn from(r: LineSearchResult) -> Self {
        Self {
            alpha: r.alpha_star,
            gradient: Some(r.gradient_star),
            evals_used: r.evals_used,
            termination: r.termination,
            regula_falsi_steps: r.regula_falsi_steps,
            bracket_violations: r.bracket_violations,
        }
    }
}

pub trait StepStrategy: Send {
    fn name(&self) -> &str;

    fn step(&mut self, ctx: &StepContext<'_>, oracle: &mut dyn Oracle) -> Result<StepOutcome>;
}

/// Tunables shared by all strategies; each reads the ones it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyParams {
    /// Learning rate or initial guess; `None` uses the direction's default.
    pub gamma: Option<f64>,
    pub c: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub epsilon: f64,
    /// Cosine peak; `None` uses `gamma`.
    pub eta_max: Option<f64>,
    pub eta_min: f64,
    /// First cosine period, in epochs.
    pub t0: u64,
    pub tmult: u64,
    pub iterations_per_epoch: u64,
    /// Only read by `goals-custom`.
    pub initial_guess: InitialGuess,
    /// Only read by `goals-custom`.
    pub carry_previous_alpha: bool,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            gamma: None,
            c: 0.9,
            c1: None,
            c2: None,
            alpha_min: 1e-8,
            alpha_max: 1e7,
            epsilon: 1e-8,
            eta_max: None,
            eta_min: 0.0,
            t0: 1,
            tmult: 2,
            iterations_per_epoch: 1,
            initial_guess: InitialGuess::FixedGamma,
            carry_previous_alpha: false,
        }
    }
}

impl StrategyParams {
    pub fn gamma_for(&self, kind: DirectionKind) -> f64 {
        self.gamma.unwrap_or_else(|| kind.gamma_default())
    }

    fn goals_config(&self, kind: DirectionKind, preset: Option<u8>) -> Result<GoalsConfig> {
        let gamma = self.gamma_for(kind);
        let mut cfg = match preset {
            Some(p) => GoalsConfig::preset(p, gamma)?,
            None => GoalsConfig {
                gamma,
                initial_guess: self.initial_guess,
                carry_previous_alpha: self.carry_previous_alpha,
                ..GoalsConfig::default()
            },
        };
        cfg.c = self.c;
        cfg.split = match (self.c1, self.c2) {
            (None, None) => None,
            (c1, c2) => Some((c1.unwrap_or(self.c), c2.unwrap_or(self.c))),
        };
        cfg.alpha_min = self.alpha_min;
        cfg.alpha_max = self.alpha_max;
        cfg.epsilon = self.epsilon;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub struct Fixed {
    gamma: f64,
}

impl StepStrategy for Fixed {
    fn name(&self) -> &str {
        "fixed"
    }

    fn step(&mut self, _: &StepContext<'_>, _: &mut dyn Oracle) -> Result<StepOutcome> {
        Ok(StepOutcome::scheduled(crate::baselines::fixed_step(self.gamma)))
    }
}

pub struct Cosine {
    schedule: CosineSchedule,
}

impl StepStrategy for Cosine {
    fn name(&self) -> &str {
        "cosine"
    }

    fn step(&mut self, _: &StepContext<'_>, _: &mut dyn Oracle) -> Result<StepOutcome> {
        let lr = self.schedule.lr();
        self.schedule.advance();
        Ok(StepOutcome::scheduled(lr))
    }
}

pub struct GolsI {
    state: GolsiState,
}

impl StepStrategy for GolsI {
    fn name(&self) -> &str {
        "gols-i"
    }

    fn step(&mut self, ctx: &StepContext<'_>, oracle: &mut dyn Oracle) -> Result<StepOutcome> {
        golsi_step(oracle, ctx.x, ctx.d, ctx.g, &mut self.state).map(Into::into)
    }
}

/// Vanilla GOS with initial guess `1 / ||d||`.
pub struct Gos {
    alpha_min: f64,
    alpha_max: f64,
    epsilon: f64,
}

impl StepStrategy for Gos {
    fn name(&self) -> &str {
        "gos"
    }

    fn step(&mut self, ctx: &StepContext<'_>, oracle: &mut dyn Oracle) -> Result<StepOutcome> {
        let f0p = dot(ctx.d, ctx.g);
        if !(f0p < 0.0) || f0p.abs() < self.epsilon {
            return degenerate_restart(oracle, ctx.x).map(Into::into);
        }
        let alpha1 = (1.0 / norm(ctx.d)).clamp(self.alpha_min, self.alpha_max);
        gos_step(oracle, ctx.x, ctx.d, Some(ctx.g), alpha1, self.alpha_min).map(Into::into)
    }
}

pub struct Goals {
    name: String,
    config: GoalsConfig,
    alpha_prev: Option<f64>,
}

impl Goals {
    pub fn new(name: impl Into<String>, config: GoalsConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            name: name.into(),
            config,
            alpha_prev: None,
        })
    }

    pub fn config(&self) -> &GoalsConfig {
        &self.config
    }
}

impl StepStrategy for Goals {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, ctx: &StepContext<'_>, oracle: &mut dyn Oracle) -> Result<StepOutcome> {
        let r = goals_step(oracle, ctx.x, ctx.d, ctx.g, &self.config, self.alpha_prev)?;
        if r.termination != Termination::DegenerateRestart {
            self.alpha_prev = Some(r.alpha_star);
        }
        Ok(r.into())
    }
}

pub type StrategyFactory = fn(&StrategyParams, DirectionKind) -> Result<Box<dyn StepStrategy>>;

fn goals_preset(p: &StrategyParams, kind: DirectionKind, preset: u8) -> Result<Box<dyn StepStrategy>> {
    let name = format!("goals-{preset}");
    Ok(Box::new(Goals::new(name, p.goals_config(kind, Some(preset))?)?))
}

/// All strategies selectable by their config name.
pub fn strategy_registry() -> Registry<StrategyFactory> {
    let mut r: Registry<StrategyFactory> = Registry::new("strategy");
    r.register("fixed", |p, kind| {
        let gamma = p.gamma_for(kind);
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {gamma} must be positive"
            )));
        }
        Ok(Box::new(Fixed { gamma }))
    });
    r.register("cosine", |p, kind| {
        let eta_max = p.eta_max.unwrap_or_else(|| p.gamma_for(kind));
        let t0 = p.t0.saturating_mul(p.iterations_per_epoch.max(1));
        Ok(Box::new(Cosine {
            schedule: CosineSchedule::new(eta_max, p.eta_min, t0, p.tmult)?,
        }))
    });
    r.register("gols-i", |p, kind| {
        let mut state = GolsiState::new(p.gamma_for(kind), p.alpha_min, p.alpha_max)?;
        state.epsilon = p.epsilon;
        Ok(Box::new(GolsI { state }))
    });
    r.register("gos", |p, _| {
        if !(p.alpha_min > 0.0 && p.alpha_min < p.alpha_max) {
            return Err(Error::InvalidArgument("need 0 < alpha_min < alpha_max".into()));
        }
        Ok(Box::new(Gos {
            alpha_min: p.alpha_min,
            alpha_max: p.alpha_max,
            epsilon: p.epsilon,
        }))
    });
    r.register("goals-1", |p, k| goals_preset(p, k, 1));
    r.register("goals-2", |p, k| goals_preset(p, k, 2));
    r.register("goals-3", |p, k| goals_preset(p, k, 3));
    r.register("goals-4", |p, k| goals_preset(p, k, 4));
    r.register("goals-custom", |p, kind| {
        Ok(Box::new(Goals::new("goals-custom", p.goals_config(kind, None)?)?))
    });
    r
}

pub fn build_strategy(name: &str, params: &StrategyParams, kind: DirectionKind) -> Result<Box<dyn StepStrategy>> {
    strategy_registry().get(name).and_then(|f| f(params, kind))
}
