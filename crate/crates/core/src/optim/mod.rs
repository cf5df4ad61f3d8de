//! Derivative-free minimizers over box-constrained points.
//!
//! Three strategies share one budgeted evaluation harness:
//!
//! * [`nelder_mead_restart`]: Nelder–Mead simplex search run in cycles, each
//!   cycle restarting from the incumbent with a fresh simplex;
//! * [`gp_optimize`]: Bayesian optimization with a Gaussian-process prior and
//!   a lower-confidence-bound acquisition, restarted over many random states;
//! * [`rbf_optimize`]: a cubic radial-basis-function surrogate alternating
//!   exploitation (surrogate minimization) and exploration (max-min
//!   distance).
//!
//! One iteration is one objective evaluation. Every evaluated point is
//! clamped into the search space first, and the best-so-far trace is
//! nonincreasing by construction.

mod design;
pub mod gp;
pub mod rbf;
mod simplex;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use design::{latin_hypercube, maximin_index, uniform_points};
pub use gp::{gp_optimize, GaussianProcess, GpSettings};
pub use rbf::{rbf_optimize, RbfSettings, RbfSurrogate};
pub use simplex::{local_minimize, nelder_mead_restart, NelderMeadSettings};

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("budget allows no evaluation")]
    BudgetExhaustedBeforeFirstEval,
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("kernel matrix not positive definite after jitter {jitter:e}")]
    SingularKernel { jitter: f64 },
    #[error("interpolation system is singular (residual {residual:e})")]
    SingularInterpolation { residual: f64 },
}

/// Axis-aligned box. Coordinates flagged `integer` are snapped to whole
/// numbers by the surrogate strategies before evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub integer: Vec<bool>,
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, OptimError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(OptimError::InvalidSpace(format!(
                "need matching nonempty bounds, got {} lower and {} upper",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(OptimError::InvalidSpace(format!(
                    "coordinate {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        let integer = vec![false; lower.len()];
        Ok(Self { lower, upper, integer })
    }

    pub fn with_integers(mut self, integer: Vec<bool>) -> Result<Self, OptimError> {
        if integer.len() != self.dim() {
            return Err(OptimError::InvalidSpace("integer mask length mismatch".into()));
        }
        self.integer = integer;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| if v.is_nan() { self.lower[i] } else { v.clamp(self.lower[i], self.upper[i]) })
            .collect()
    }

    /// Clamps, then rounds the integer coordinates.
    pub fn snap(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.clamp(x);
        for (i, v) in y.iter_mut().enumerate() {
            if self.integer.get(i).copied().unwrap_or(false) {
                *v = v.round().clamp(self.lower[i].ceil(), self.upper[i].floor());
            }
        }
        y
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| (v - self.lower[i]) / self.width(i)).collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().enumerate().map(|(i, v)| self.lower[i] + v * self.width(i)).collect()
    }
}

/// Limits of one optimizer run. Evaluation and wall-time limits apply to
/// every strategy; the cycle structure applies to the restart strategies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_evaluations: usize,
    pub max_wall_time: Duration,
    pub cycles: usize,
    pub iterations_per_cycle: usize,
}

impl Budget {
    pub fn evaluations(max_evaluations: usize) -> Self {
        Self {
            max_evaluations,
            max_wall_time: Duration::from_secs(24 * 3600),
            cycles: usize::MAX,
            iterations_per_cycle: max_evaluations.max(1),
        }
    }

    fn check(&self) -> Result<(), OptimError> {
        if self.max_evaluations == 0 || self.max_wall_time.is_zero() {
            return Err(OptimError::BudgetExhaustedBeforeFirstEval);
        }
        if self.cycles == 0 || self.iterations_per_cycle == 0 {
            return Err(OptimError::InvalidBudget(
                "cycles and iterations_per_cycle must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum Strategy {
    NelderMead(NelderMeadSettings),
    Gp(GpSettings),
    Rbf(RbfSettings),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::NelderMead(_) => "nelder-mead",
            Strategy::Gp(_) => "gp",
            Strategy::Rbf(_) => "rbf",
        }
    }
}

/// One objective evaluation as seen by observers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRecord {
    /// Zero-based evaluation index.
    pub index: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub best_so_far: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizerRun {
    pub strategy: Strategy,
    pub budget: Budget,
    pub seed: u64,
    pub best_point: Vec<f64>,
    pub best_value: f64,
    /// Best value after each evaluation.
    pub best_so_far: Vec<f64>,
    pub evaluations: usize,
    pub wall_time: Duration,
    pub cycles_completed: usize,
    /// Cycles ended before their iteration allowance because the simplex
    /// collapsed.
    pub early_restarts: usize,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

/// Signals that the budget ran out; strategies unwind with `?`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Exhausted;

pub(crate) struct Evaluator<'a> {
    objective: &'a mut dyn FnMut(&[f64]) -> f64,
    observer: &'a mut dyn FnMut(&EvalRecord),
    pub(crate) space: &'a SearchSpace,
    budget: &'a Budget,
    start: Instant,
    pub(crate) points: Vec<Vec<f64>>,
    pub(crate) values: Vec<f64>,
    best: Option<usize>,
    trace: Vec<f64>,
    pub(crate) cycles_completed: usize,
    pub(crate) early_restarts: usize,
}

impl<'a> Evaluator<'a> {
    fn new(
        objective: &'a mut dyn FnMut(&[f64]) -> f64,
        observer: &'a mut dyn FnMut(&EvalRecord),
        space: &'a SearchSpace,
        budget: &'a Budget,
    ) -> Self {
        Self {
            objective,
            observer,
            space,
            budget,
            start: Instant::now(),
            points: Vec::new(),
            values: Vec::new(),
            best: None,
            trace: Vec::new(),
            cycles_completed: 0,
            early_restarts: 0,
        }
    }

    pub(crate) fn exhausted(&self) -> bool {
        self.values.len() >= self.budget.max_evaluations || self.start.elapsed() >= self.budget.max_wall_time
    }

    pub(crate) fn eval(&mut self, x: &[f64]) -> Result<f64, Exhausted> {
        if self.exhausted() {
            return Err(Exhausted);
        }
        let x = self.space.clamp(x);
        let raw = (self.objective)(&x);
        let value = if raw.is_nan() { f64::INFINITY } else { raw };
        let index = self.values.len();
        if self.best.is_none_or(|b| value < self.values[b]) {
            self.best = Some(index);
        }
        self.points.push(x);
        self.values.push(value);
        let best_so_far = self.values[self.best.unwrap()];
        self.trace.push(best_so_far);
        (self.observer)(&EvalRecord {
            index,
            point: self.points[index].clone(),
            value,
            best_so_far,
        });
        Ok(value)
    }

    pub(crate) fn best(&self) -> Option<(&[f64], f64)> {
        self.best.map(|b| (self.points[b].as_slice(), self.values[b]))
    }

    fn finish(self, strategy: &Strategy, seed: u64) -> Result<OptimizerRun, OptimError> {
        let best = self.best.ok_or(OptimError::BudgetExhaustedBeforeFirstEval)?;
        Ok(OptimizerRun {
            strategy: strategy.clone(),
            budget: self.budget.clone(),
            seed,
            best_point: self.points[best].clone(),
            best_value: self.values[best],
            evaluations: self.values.len(),
            best_so_far: self.trace,
            wall_time: self.start.elapsed(),
            cycles_completed: self.cycles_completed,
            early_restarts: self.early_restarts,
            points: self.points,
            values: self.values,
        })
    }
}

/// Minimizes `objective` over `space` with the chosen strategy.
pub fn minimize<F>(
    objective: F,
    space: &SearchSpace,
    budget: &Budget,
    strategy: &Strategy,
    seed: u64,
) -> Result<OptimizerRun, OptimError>
where
    F: FnMut(&[f64]) -> f64,
{
    minimize_observed(objective, space, budget, strategy, seed, |_| {})
}

/// Like [`minimize`], calling `observer` after every evaluation.
pub fn minimize_observed<F, O>(
    mut objective: F,
    space: &SearchSpace,
    budget: &Budget,
    strategy: &Strategy,
    seed: u64,
    mut observer: O,
) -> Result<OptimizerRun, OptimError>
where
    F: FnMut(&[f64]) -> f64,
    O: FnMut(&EvalRecord),
{
    budget.check()?;
    let mut ev = Evaluator::new(&mut objective, &mut observer, space, budget);
    let outcome = match strategy {
        Strategy::NelderMead(s) => simplex::run(&mut ev, budget, s),
        Strategy::Gp(s) => gp::run(&mut ev, budget, s, seed),
        Strategy::Rbf(s) => rbf::run(&mut ev, s, seed),
    };
    match outcome {
        Ok(()) | Err(StrategyError::Exhausted) => ev.finish(strategy, seed),
        Err(StrategyError::Fatal(e)) => Err(e),
    }
}

pub(crate) enum StrategyError {
    Exhausted,
    Fatal(OptimError),
}

impl From<Exhausted> for StrategyError {
    fn from(_: Exhausted) -> Self {
        StrategyError::Exhausted
    }
}

impl From<OptimError> for StrategyError {
    fn from(e: OptimError) -> Self {
        StrategyError::Fatal(e)
    }
}

pub(crate) fn check_initial(space: &SearchSpace, initial: &Option<Vec<f64>>) -> Result<(), OptimError> {
    match initial {
        Some(x) if !space.contains(x) => Err(OptimError::InvalidSettings(
            "initial point must lie inside the search space".into(),
        )),
        _ => Ok(()),
    }
}

fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_validation() {
        assert!(SearchSpace::new(vec![0.0], vec![0.0]).is_err());
        assert!(SearchSpace::new(vec![], vec![]).is_err());
        assert!(SearchSpace::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let s = SearchSpace::new(vec![0.0, -1.0], vec![10.0, 1.0]).unwrap();
        assert_eq!(s.clamp(&[11.0, -3.0]), vec![10.0, -1.0]);
        assert_eq!(s.from_unit(&s.to_unit(&[2.5, 0.5])), vec![2.5, 0.5]);
        let s = s.with_integers(vec![true, false]).unwrap();
        assert_eq!(s.snap(&[2.6, 0.3]), vec![3.0, 0.3]);
    }

    #[test]
    fn zero_budget_is_rejected() {
        let s = SearchSpace::new(vec![0.0], vec![1.0]).unwrap();
        let b = Budget::evaluations(0);
        let err = minimize(|x| x[0], &s, &b, &Strategy::Rbf(RbfSettings::default()), 1);
        assert_eq!(err.unwrap_err(), OptimError::BudgetExhaustedBeforeFirstEval);
    }
}
