//! Cubic radial-basis-function surrogate search.
//!
//! The surrogate is `s(x) = sum_i lambda_i |x - x_i|^3 + c^T x + c_0`, fitted
//! by solving the interpolation system augmented with the linear tail
//! conditions. The loop starts from a design of `2(d + 1)` points and then
//! alternates an exploitation step (a local minimizer of the surrogate) with
//! an exploration step (the candidate farthest from every evaluated point).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::design::{latin_hypercube, maximin_index, min_distance, uniform_points};
use super::gp::surrogate_values;
use super::simplex::local_minimize;
use super::{check_initial, Evaluator, OptimError, StrategyError};
use crate::sampling::seeded_stream;

/// A fit is rejected when the system residual exceeds this multiple of the
/// norm of the fitted values.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbfSettings {
    /// First point of the initial design.
    pub initial: Option<Vec<f64>>,
    /// Initial design size; `None` means `2(d + 1)`.
    pub initial_design: Option<usize>,
    /// Fit the surrogate on values clipped at their median, which keeps large
    /// penalty jumps from dominating the interpolant.
    pub clip_at_median: bool,
    /// Fit `ln(1 + f - f_min)` instead of `f`.
    pub log_values: bool,
    /// Random candidates scored by the exploration step.
    pub exploration_candidates: usize,
}

impl Default for RbfSettings {
    fn default() -> Self {
        Self {
            initial: None,
            initial_design: None,
            clip_at_median: true,
            log_values: true,
            exploration_candidates: 2000,
        }
    }
}

fn cubic(r: f64) -> f64 {
    r * r * r
}

/// Fitted cubic RBF interpolant with a linear tail.
#[derive(Clone, Debug)]
pub struct RbfSurrogate {
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// `[c_0, c_1, ..., c_d]`.
    tail: Vec<f64>,
    residual: f64,
}

impl RbfSurrogate {
    /// Solves the augmented interpolation system. Needs at least `d + 1`
    /// affinely independent centers.
    pub fn fit(centers: &[Vec<f64>], values: &[f64]) -> Result<Self, OptimError> {
        assert_eq!(centers.len(), values.len());
        let n = centers.len();
        let d = centers.first().map_or(0, Vec::len);
        let m = n + d + 1;
        let mut a = DMatrix::<f64>::zeros(m, m);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = cubic(super::distance_sq(&centers[i], &centers[j]).sqrt());
            }
            a[(i, n)] = 1.0;
            a[(n, i)] = 1.0;
            for k in 0..d {
                a[(i, n + 1 + k)] = centers[i][k];
                a[(n + 1 + k, i)] = centers[i][k];
            }
        }
        let mut rhs = DVector::<f64>::zeros(m);
        rhs.rows_mut(0, n).copy_from_slice(values);
        let Some(sol) = a.clone().lu().solve(&rhs) else {
            return Err(OptimError::SingularInterpolation { residual: f64::INFINITY });
        };
        let residual = (&a * &sol - &rhs).norm();
        if residual.is_nan() || residual > RESIDUAL_TOLERANCE * rhs.norm() {
            return Err(OptimError::SingularInterpolation { residual });
        }
        Ok(Self {
            centers: centers.to_vec(),
            weights: sol.rows(0, n).iter().copied().collect(),
            tail: sol.rows(n, d + 1).iter().copied().collect(),
            residual,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let radial: f64 = self
            .centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * cubic(super::distance_sq(x, c).sqrt()))
            .sum();
        let linear: f64 = x.iter().zip(&self.tail[1..]).map(|(v, c)| v * c).sum();
        radial + self.tail[0] + linear
    }

    /// Euclidean residual of the solved linear system.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Local minimizers of the surrogate from the best point and a few
/// promising random starts, ordered by surrogate value.
fn exploit<R: Rng + ?Sized>(surrogate: &RbfSurrogate, best: &[f64], rng: &mut R) -> Vec<Vec<f64>> {
    let d = best.len();
    let lower = vec![0.0; d];
    let upper = vec![1.0; d];
    let f = |u: &[f64]| surrogate.eval(u);
    let mut starts = vec![best.to_vec()];
    let mut candidates: Vec<(f64, Vec<f64>)> = uniform_points(200, d, rng).into_iter().map(|u| (f(&u), u)).collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    starts.extend(candidates.into_iter().take(2).map(|(_, u)| u));
    let mut minima: Vec<(Vec<f64>, f64)> = starts
        .iter()
        .map(|s| local_minimize(f, s, &lower, &upper, 0.1, 80 * (d + 1)))
        .collect();
    minima.sort_by(|a, b| a.1.total_cmp(&b.1));
    minima.into_iter().map(|(u, _)| u).collect()
}

fn explore<R: Rng + ?Sized>(existing: &[Vec<f64>], count: usize, d: usize, rng: &mut R) -> Vec<f64> {
    let candidates = uniform_points(count.max(1), d, rng);
    let (i, _) = maximin_index(&candidates, existing).expect("nonempty candidates");
    candidates[i].clone()
}

pub(crate) fn run(ev: &mut Evaluator<'_>, settings: &RbfSettings, seed: u64) -> Result<(), StrategyError> {
    let space = ev.space.clone();
    check_initial(&space, &settings.initial)?;
    let d = space.dim();
    let design_size = settings.initial_design.unwrap_or(2 * (d + 1)).max(d + 1);
    let mut rng = seeded_stream(seed, 0);
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();

    let mut design: Vec<Vec<f64>> = Vec::new();
    if let Some(x0) = &settings.initial {
        design.push(x0.clone());
    }
    for u in latin_hypercube(design_size - design.len(), d, &mut rng) {
        design.push(space.snap(&space.from_unit(&u)));
    }
    for x in design {
        let v = ev.eval(&x)?;
        xs.push(space.to_unit(&x));
        ys.push(v);
    }

    // Snapped coordinates sit on a lattice; anything closer than this is a
    // repeat.
    let duplicate_tol = 1e-9;
    let mut exploit_next = true;
    loop {
        let next_unit = if exploit_next {
            let mut fit_values = surrogate_values(&ys, settings.clip_at_median);
            if settings.log_values {
                let min = fit_values.iter().copied().fold(f64::INFINITY, f64::min);
                fit_values.iter_mut().for_each(|v| *v = (1.0 + *v - min).ln());
            }
            let proposal = match RbfSurrogate::fit(&xs, &fit_values) {
                Ok(s) => {
                    let best = ys
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.total_cmp(b.1))
                        .map(|(i, _)| xs[i].clone())
                        .expect("design evaluated");
                    exploit(&s, &best, &mut rng)
                        .into_iter()
                        .map(|u| space.to_unit(&space.snap(&space.from_unit(&u))))
                        .find(|u| min_distance(u, &xs) > duplicate_tol)
                }
                Err(_) => None,
            };
            match proposal {
                Some(u) => u,
                None => explore(&xs, settings.exploration_candidates, d, &mut rng),
            }
        } else {
            explore(&xs, settings.exploration_candidates, d, &mut rng)
        };
        let mut x = space.snap(&space.from_unit(&next_unit));
        if min_distance(&space.to_unit(&x), &xs) <= duplicate_tol {
            // Snapping collapsed an exploration point onto an old one.
            x = space.snap(&space.from_unit(&explore(&xs, settings.exploration_candidates, d, &mut rng)));
        }
        let v = ev.eval(&x)?;
        xs.push(space.to_unit(&x));
        ys.push(v);
        exploit_next = !exploit_next;
    }
}

/// Cubic RBF minimization; see the module documentation.
pub fn rbf_optimize<F>(
    objective: F,
    space: &super::SearchSpace,
    budget: &super::Budget,
    settings: RbfSettings,
    seed: u64,
) -> Result<super::OptimizerRun, OptimError>
where
    F: FnMut(&[f64]) -> f64,
{
    super::minimize(objective, space, budget, &super::Strategy::Rbf(settings), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{minimize, Budget, SearchSpace, Strategy};

    #[test]
    fn reproduces_linear_functions_exactly() {
        let mut rng = seeded_stream(2, 0);
        let xs = latin_hypercube(12, 3, &mut rng);
        let f = |x: &[f64]| 2.0 - x[0] + 3.0 * x[1] + 0.5 * x[2];
        let ys: Vec<f64> = xs.iter().map(|x| f(x)).collect();
        let s = RbfSurrogate::fit(&xs, &ys).unwrap();
        for u in uniform_points(20, 3, &mut rng) {
            assert!((s.eval(&u) - f(&u)).abs() < 1e-8);
        }
    }

    #[test]
    fn interpolates() {
        let mut rng = seeded_stream(9, 0);
        let xs = latin_hypercube(30, 4, &mut rng);
        let ys: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| (5.0 * v).sin()).sum()).collect();
        let s = RbfSurrogate::fit(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((s.eval(x) - y).abs() < 1e-8);
        }
    }

    #[test]
    fn repeated_center_is_singular() {
        let xs = vec![vec![0.0], vec![1.0], vec![1.0]];
        let err = RbfSurrogate::fit(&xs, &[0.0, 1.0, 2.0]).unwrap_err();
        assert!(matches!(err, OptimError::SingularInterpolation { .. }));
    }

    #[test]
    fn deterministic_and_alternating() {
        let space = SearchSpace::new(vec![-2.0; 2], vec![2.0; 2]).unwrap();
        let f = |x: &[f64]| (x[0] - 0.7).powi(2) + (x[1] + 0.4).powi(2);
        let strategy = Strategy::Rbf(RbfSettings::default());
        let a = minimize(f, &space, &Budget::evaluations(40), &strategy, 707).unwrap();
        let b = minimize(f, &space, &Budget::evaluations(40), &strategy, 707).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.evaluations, 40);
        assert!(a.best_value < 1e-3, "{}", a.best_value);
    }
}
