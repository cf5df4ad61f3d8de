//! Bayesian optimization with a Gaussian-process surrogate.
//!
//! The prior is a zero-mean GP on standardized objective values with a
//! squared-exponential kernel and one length-scale per coordinate. Length
//! scales maximize the marginal likelihood (signal variance profiled out);
//! a small diagonal jitter keeps the kernel matrix positive definite and is
//! escalated tenfold until the Cholesky factorization succeeds.
//!
//! The search runs in cycles. Each cycle reseeds its random state, evaluates
//! a Latin-hypercube batch and then spends its remaining iterations on points
//! minimizing the lower confidence bound `mu(x) - kappa * sigma(x)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::design::{latin_hypercube, min_distance, uniform_points};
use super::simplex::local_minimize;
use super::{check_initial, Budget, Evaluator, OptimError, StrategyError};
use crate::sampling::seeded_stream;

const INITIAL_JITTER: f64 = 1e-8;
const MAX_JITTER: f64 = 1e-2;
const LOG_SCALE_RANGE: (f64, f64) = (-4.0, 3.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpSettings {
    /// Exploration weight of the lower confidence bound.
    pub kappa: f64,
    /// Space-filling evaluations at the start of every cycle.
    pub n_random_starts: usize,
    /// Random state of the first cycle; cycle `c` uses `random_state_start + c`.
    pub random_state_start: u64,
    /// Point evaluated first in the first cycle.
    pub initial: Option<Vec<f64>>,
    /// Seed every cycle's model with the best point found so far (without
    /// re-evaluating it).
    pub carry_incumbent: bool,
    /// Fit the surrogate on values clipped at their median.
    pub clip_at_median: bool,
}

impl Default for GpSettings {
    fn default() -> Self {
        Self {
            kappa: 50.0,
            n_random_starts: 10,
            random_state_start: 0,
            initial: None,
            carry_incumbent: false,
            clip_at_median: false,
        }
    }
}

fn sq_exp(a: &[f64], b: &[f64], length_scales: &[f64]) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(length_scales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    (-0.5 * r2).exp()
}

fn kernel_matrix(x: &[Vec<f64>], length_scales: &[f64], jitter: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        sq_exp(&x[i], &x[j], length_scales) + if i == j { jitter } else { 0.0 }
    })
}

/// Fitted Gaussian-process regression model.
#[derive(Clone, Debug)]
pub struct GaussianProcess {
    inputs: Vec<Vec<f64>>,
    length_scales: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
    signal_variance: f64,
    jitter: f64,
}

fn standardize(y: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    (y.iter().map(|v| (v - mean) / scale).collect(), mean, scale)
}

impl GaussianProcess {
    /// Fits length scales by maximum likelihood, then conditions on the data.
    pub fn fit(inputs: &[Vec<f64>], values: &[f64]) -> Result<Self, OptimError> {
        let d = inputs.first().map_or(0, Vec::len);
        let (y, _, _) = standardize(values);
        let start = vec![(0.3f64).ln(); d];
        let lower = vec![LOG_SCALE_RANGE.0; d];
        let upper = vec![LOG_SCALE_RANGE.1; d];
        let nll = |theta: &[f64]| {
            let ls: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
            concentrated_nll(inputs, &y, &ls)
        };
        let (theta, _) = local_minimize(nll, &start, &lower, &upper, 0.15, 30 * (d + 1));
        let ls: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
        Self::with_length_scales(inputs, values, &ls)
    }

    pub fn with_length_scales(inputs: &[Vec<f64>], values: &[f64], length_scales: &[f64]) -> Result<Self, OptimError> {
        assert_eq!(inputs.len(), values.len());
        let (y, y_mean, y_scale) = standardize(values);
        let y = DVector::from_vec(y);
        let mut jitter = INITIAL_JITTER;
        let chol = loop {
            if let Some(c) = Cholesky::new(kernel_matrix(inputs, length_scales, jitter)) {
                break c;
            }
            jitter *= 10.0;
            if jitter > MAX_JITTER {
                return Err(OptimError::SingularKernel { jitter: jitter / 10.0 });
            }
        };
        let alpha = chol.solve(&y);
        let signal_variance = (y.dot(&alpha) / y.len() as f64).max(1e-12);
        Ok(Self {
            inputs: inputs.to_vec(),
            length_scales: length_scales.to_vec(),
            chol,
            alpha,
            y_mean,
            y_scale,
            signal_variance,
            jitter,
        })
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    /// Diagonal jitter that made the kernel matrix factorizable.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Weights `(K + jI)^-1 y` of the standardized training values. The
    /// posterior mean at training input `i` misses its value by
    /// `jitter * alpha_i` in standardized units.
    pub fn dual_coefficients(&self) -> &[f64] {
        self.alpha.as_slice()
    }

    /// Standard deviation used to standardize the training values.
    pub fn value_scale(&self) -> f64 {
        self.y_scale
    }

    fn cross(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.inputs.len(),
            self.inputs.iter().map(|p| sq_exp(x, p, &self.length_scales)),
        )
    }

    /// Posterior variance of the unit-amplitude standardized process;
    /// bounded by the jitter at training inputs.
    pub fn standardized_variance(&self, x: &[f64]) -> f64 {
        let k = self.cross(x);
        let v = self.chol.l().solve_lower_triangular(&k).expect("triangular factor is nonsingular");
        (1.0 - v.norm_squared()).max(0.0)
    }

    /// Posterior mean and standard deviation in the original value units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let k = self.cross(x);
        let mean = self.y_mean + self.y_scale * k.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&k).expect("triangular factor is nonsingular");
        let var = (1.0 - v.norm_squared()).max(0.0) * self.signal_variance;
        (mean, self.y_scale * var.sqrt())
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.y_mean + self.y_scale * self.cross(x).dot(&self.alpha)
    }
}

/// Negative log marginal likelihood with the signal variance profiled out,
/// up to constants.
fn concentrated_nll(inputs: &[Vec<f64>], y: &[f64], length_scales: &[f64]) -> f64 {
    let n = y.len();
    let Some(chol) = Cholesky::new(kernel_matrix(inputs, length_scales, 1e-6)) else {
        return f64::INFINITY;
    };
    let y = DVector::from_column_slice(y);
    let alpha = chol.solve(&y);
    let sigma2 = (y.dot(&alpha) / n as f64).max(1e-300);
    let log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
    0.5 * n as f64 * sigma2.ln() + log_det
}

/// `mu(x) - kappa * sigma(x)`.
pub fn lower_confidence_bound(gp: &GaussianProcess, x: &[f64], kappa: f64) -> f64 {
    let (mu, sigma) = gp.predict(x);
    mu - kappa * sigma
}

/// Replaces non-finite values by the largest finite one and optionally clips
/// everything above the median down to it.
pub(crate) fn surrogate_values(values: &[f64], clip_at_median: bool) -> Vec<f64> {
    let finite_max = values.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let fill = if finite_max.is_finite() { finite_max } else { 0.0 };
    let mut out: Vec<f64> = values.iter().map(|&v| if v.is_finite() { v } else { fill }).collect();
    if clip_at_median && out.len() > 2 {
        let mut sorted = out.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        for v in &mut out {
            *v = v.min(median);
        }
    }
    out
}

/// Picks the next unit-cube point by minimizing the LCB with multi-start
/// local search; starts are the best random candidates and the incumbent.
fn acquire<R: Rng + ?Sized>(
    gp: &GaussianProcess,
    kappa: f64,
    incumbent: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let d = incumbent.len();
    let lower = vec![0.0; d];
    let upper = vec![1.0; d];
    let acquisition = |u: &[f64]| lower_confidence_bound(gp, u, kappa);
    let mut candidates: Vec<(f64, Vec<f64>)> = uniform_points(250 * d.min(4), d, rng)
        .into_iter()
        .map(|u| (acquisition(&u), u))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut starts: Vec<Vec<f64>> = candidates.into_iter().take(3).map(|(_, u)| u).collect();
    starts.push(incumbent.to_vec());
    starts
        .iter()
        .map(|s| local_minimize(acquisition, s, &lower, &upper, 0.1, 60 * (d + 1)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(u, _)| u)
        .expect("at least one start")
}

pub(crate) fn run(ev: &mut Evaluator<'_>, budget: &Budget, settings: &GpSettings, seed: u64) -> Result<(), StrategyError> {
    let space = ev.space.clone();
    check_initial(&space, &settings.initial)?;
    if !(settings.kappa >= 0.0 && settings.kappa.is_finite()) {
        return Err(OptimError::InvalidSettings("kappa must be finite and nonnegative".into()).into());
    }
    let d = space.dim();
    let duplicate_tol = 1e-9;

    for cycle in 0..budget.cycles {
        let mut rng = seeded_stream(seed, settings.random_state_start.wrapping_add(cycle as u64));
        let mut xs: Vec<Vec<f64>> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        if settings.carry_incumbent {
            if let Some((x, v)) = ev.best() {
                xs.push(space.to_unit(x));
                ys.push(v);
            }
        }
        let mut used = 0usize;
        let allowance = budget.iterations_per_cycle;

        if cycle == 0 {
            if let Some(x0) = &settings.initial {
                let v = ev.eval(x0)?;
                xs.push(space.to_unit(x0));
                ys.push(v);
                used += 1;
            }
        }
        for u in latin_hypercube(settings.n_random_starts, d, &mut rng) {
            if used >= allowance {
                break;
            }
            let x = space.snap(&space.from_unit(&u));
            let v = ev.eval(&x)?;
            xs.push(space.to_unit(&x));
            ys.push(v);
            used += 1;
        }

        let mut length_scales: Option<Vec<f64>> = None;
        let mut since_refit = 0usize;
        while used < allowance {
            let fit_values = surrogate_values(&ys, settings.clip_at_median);
            // Refit hyperparameters every step while data is scarce, then
            // every tenth step.
            let model = match &length_scales {
                Some(ls) if xs.len() > 60 && since_refit < 10 => {
                    since_refit += 1;
                    GaussianProcess::with_length_scales(&xs, &fit_values, ls)
                }
                _ => {
                    since_refit = 0;
                    GaussianProcess::fit(&xs, &fit_values)
                }
            };
            let next = match model {
                Ok(gp) => {
                    length_scales = Some(gp.length_scales().to_vec());
                    let best = ys
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.total_cmp(b.1))
                        .map(|(i, _)| xs[i].clone())
                        .unwrap_or_else(|| vec![0.5; d]);
                    let u = acquire(&gp, settings.kappa, &best, &mut rng);
                    space.snap(&space.from_unit(&u))
                }
                Err(_) => space.snap(&space.from_unit(&uniform_points(1, d, &mut rng)[0])),
            };
            let mut u = space.to_unit(&next);
            if min_distance(&u, &xs) < duplicate_tol {
                u = space.to_unit(&space.snap(&space.from_unit(&uniform_points(1, d, &mut rng)[0])));
            }
            let x = space.from_unit(&u);
            let v = ev.eval(&x)?;
            xs.push(space.to_unit(&x));
            ys.push(v);
            used += 1;
        }
        ev.cycles_completed += 1;
    }
    Ok(())
}

/// Cycle-restarted GP minimization; see the module documentation.
pub fn gp_optimize<F>(
    objective: F,
    space: &super::SearchSpace,
    budget: &Budget,
    settings: GpSettings,
    seed: u64,
) -> Result<super::OptimizerRun, OptimError>
where
    F: FnMut(&[f64]) -> f64,
{
    super::minimize(objective, space, budget, &super::Strategy::Gp(settings), seed)
}
