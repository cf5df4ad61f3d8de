//! Nelder–Mead simplex search with restart cycles.
//!
//! Coefficients are the canonical reflection 1, expansion 2, contraction 0.5
//! and shrink 0.5. Trial points are clamped into the box. A cycle ends after
//! its iteration allowance or as soon as the simplex collapses below the size
//! tolerance; the next cycle rebuilds the simplex around the incumbent.

use serde::{Deserialize, Serialize};

use super::{check_initial, Budget, Evaluator, OptimError, StrategyError};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadSettings {
    /// Starting point; the box center when absent.
    pub initial: Option<Vec<f64>>,
    /// Initial simplex edge as a fraction of each coordinate's magnitude
    /// (of the box width for zero coordinates).
    pub initial_step: f64,
    /// Collapse tolerance as a fraction of the box width.
    pub size_tolerance: f64,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        Self {
            initial: None,
            initial_step: 0.05,
            size_tolerance: 1e-5,
        }
    }
}

pub(crate) struct CycleOutcome {
    pub best: Vec<f64>,
    pub value: f64,
    pub collapsed: bool,
}

pub(crate) struct Bounds<'a> {
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

impl Bounds<'_> {
    fn clamp(&self, x: Vec<f64>) -> Vec<f64> {
        x.into_iter()
            .enumerate()
            .map(|(i, v)| v.clamp(self.lower[i], self.upper[i]))
            .collect()
    }
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t * (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// One simplex run of at most `max_iter` iterations.
pub(crate) fn nelder_mead_cycle<E>(
    f: &mut dyn FnMut(&[f64]) -> Result<f64, E>,
    x0: &[f64],
    f0: Option<f64>,
    steps: &[f64],
    bounds: &Bounds<'_>,
    max_iter: usize,
    tolerance: &[f64],
) -> Result<CycleOutcome, E> {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    values.push(match f0 {
        Some(v) => v,
        None => f(x0)?,
    });
    for j in 0..n {
        let mut v = x0.to_vec();
        v[j] = if x0[j] + steps[j] <= bounds.upper[j] {
            x0[j] + steps[j]
        } else {
            x0[j] - steps[j]
        };
        let v = bounds.clamp(v);
        values.push(f(&v)?);
        simplex.push(v);
    }

    let mut collapsed = false;
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let size_ok = simplex[1..]
            .iter()
            .all(|v| v.iter().zip(&simplex[0]).zip(tolerance).all(|((a, b), t)| (a - b).abs() <= *t));
        if size_ok {
            collapsed = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let reflected = bounds.clamp(affine(&centroid, &worst, -REFLECT));
        let fr = f(&reflected)?;

        if fr < values[0] {
            let expanded = bounds.clamp(affine(&centroid, &worst, -REFLECT * EXPAND));
            let fe = f(&expanded)?;
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (candidate, fc, accept) = if fr < values[n] {
            let outside = bounds.clamp(affine(&centroid, &reflected, CONTRACT));
            let fc = f(&outside)?;
            (outside, fc, fc <= fr)
        } else {
            let inside = bounds.clamp(affine(&centroid, &worst, CONTRACT));
            let fc = f(&inside)?;
            (inside, fc, fc < values[n])
        };
        if accept {
            simplex[n] = candidate;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            simplex[i] = affine(&simplex[0], &simplex[i], SHRINK);
            values[i] = f(&simplex[i])?;
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    Ok(CycleOutcome {
        best: simplex[best].clone(),
        value: values[best],
        collapsed,
    })
}

fn initial_steps(x0: &[f64], lower: &[f64], upper: &[f64], fraction: f64) -> Vec<f64> {
    x0.iter()
        .enumerate()
        .map(|(i, &x)| {
            let width = upper[i] - lower[i];
            let step = fraction * x.abs();
            if step > 1e-3 * fraction * width {
                step
            } else {
                fraction * width
            }
        })
        .collect()
}

pub(crate) fn run(ev: &mut Evaluator<'_>, budget: &Budget, settings: &NelderMeadSettings) -> Result<(), StrategyError> {
    let space = ev.space.clone();
    check_initial(&space, &settings.initial)?;
    if !(settings.initial_step > 0.0 && settings.size_tolerance >= 0.0) {
        return Err(OptimError::InvalidSettings("initial_step must be positive".into()).into());
    }
    let tolerance: Vec<f64> = (0..space.dim()).map(|i| settings.size_tolerance * space.width(i)).collect();
    let bounds = Bounds {
        lower: &space.lower,
        upper: &space.upper,
    };
    let mut incumbent = settings.initial.clone().unwrap_or_else(|| space.center());
    let mut incumbent_value = None;
    for _ in 0..budget.cycles {
        let steps = initial_steps(&incumbent, &space.lower, &space.upper, settings.initial_step);
        let outcome = nelder_mead_cycle(
            &mut |x| ev.eval(x),
            &incumbent,
            incumbent_value,
            &steps,
            &bounds,
            budget.iterations_per_cycle,
            &tolerance,
        )?;
        ev.cycles_completed += 1;
        if outcome.collapsed {
            ev.early_restarts += 1;
        }
        let (x, v) = ev.best().expect("a finished cycle evaluated at least one point");
        incumbent = x.to_vec();
        incumbent_value = Some(v);
    }
    Ok(())
}

/// Restart-cycle Nelder–Mead; the evaluation budget and wall time are taken
/// from `budget`, the cycle structure from its `cycles` and
/// `iterations_per_cycle`.
pub fn nelder_mead_restart<F>(
    objective: F,
    space: &super::SearchSpace,
    budget: &Budget,
    settings: NelderMeadSettings,
    seed: u64,
) -> Result<super::OptimizerRun, OptimError>
where
    F: FnMut(&[f64]) -> f64,
{
    super::minimize(objective, space, budget, &super::Strategy::NelderMead(settings), seed)
}

/// Bounded local search used on cheap surrogate functions: restarted
/// Nelder–Mead limited to `max_evals` calls. Returns the best point seen.
pub fn local_minimize<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    step: f64,
    max_evals: usize,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let bounds = Bounds { lower, upper };
    let mut best = (x0.to_vec(), f64::INFINITY);
    let mut used = 0usize;
    let mut wrapped = |x: &[f64]| -> Result<f64, ()> {
        if used >= max_evals {
            return Err(());
        }
        used += 1;
        let v = f(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < best.1 {
            best = (x.to_vec(), v);
        }
        Ok(v)
    };
    let tol: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| 1e-9 * (u - l)).collect();
    let mut start = x0.to_vec();
    let mut start_value = None;
    let mut step = step;
    loop {
        let steps: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| step * (u - l)).collect();
        match nelder_mead_cycle(&mut wrapped, &start, start_value, &steps, &bounds, 200 * x0.len().max(1), &tol) {
            Ok(out) => {
                start = out.best;
                start_value = Some(out.value);
                step *= 0.5;
            }
            Err(()) => break,
        }
        if step < 1e-6 {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::super::{minimize, SearchSpace, Strategy};
    use super::*;

    fn settings(initial: Vec<f64>) -> Strategy {
        Strategy::NelderMead(NelderMeadSettings {
            initial: Some(initial),
            ..Default::default()
        })
    }

    #[test]
    fn v_shaped_minimum() {
        let space = SearchSpace::new(vec![0.0], vec![10.0]).unwrap();
        let budget = Budget {
            cycles: 100,
            iterations_per_cycle: 50,
            ..Budget::evaluations(2000)
        };
        let run = minimize(|x| (x[0] - 5.0).abs(), &space, &budget, &settings(vec![1.0]), 0).unwrap();
        assert!((run.best_point[0] - 5.0).abs() <= 1e-3, "{:?}", run.best_point);
    }

    #[test]
    fn collapse_triggers_early_restart() {
        let space = SearchSpace::new(vec![0.0], vec![10.0]).unwrap();
        let budget = Budget {
            cycles: 5,
            iterations_per_cycle: 1000,
            ..Budget::evaluations(100_000)
        };
        let run = minimize(|x| (x[0] - 5.0).abs(), &space, &budget, &settings(vec![1.0]), 0).unwrap();
        assert_eq!(run.cycles_completed, 5);
        assert_eq!(run.early_restarts, 5);
        assert!(run.evaluations < 5 * 1000);
    }

    #[test]
    fn single_evaluation_budget_returns_initial_point() {
        let space = SearchSpace::new(vec![0.0, 0.0], vec![10.0, 10.0]).unwrap();
        let run = minimize(|x| x[0] + x[1], &space, &Budget::evaluations(1), &settings(vec![2.0, 3.0]), 0).unwrap();
        assert_eq!(run.evaluations, 1);
        assert_eq!(run.best_point, vec![2.0, 3.0]);
        assert_eq!(run.best_value, 5.0);
    }

    #[test]
    fn stays_inside_box() {
        let space = SearchSpace::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let run = minimize(|x| -x[0] - 2.0 * x[1], &space, &Budget::evaluations(300), &settings(vec![0.5, 0.5]), 0).unwrap();
        assert!(run.points.iter().all(|p| space.contains(p)));
        assert!((run.best_value + 3.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock_2d() {
        let space = SearchSpace::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let rosen = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let run = minimize(rosen, &space, &Budget::evaluations(2000), &settings(vec![-1.2, 1.0]), 0).unwrap();
        assert!(run.best_value < 1e-6, "{}", run.best_value);
    }

    #[test]
    fn local_minimize_quadratic() {
        let (x, v) = local_minimize(
            |x| (x[0] - 0.3).powi(2) + (x[1] - 0.7).powi(2),
            &[0.5, 0.5],
            &[0.0, 0.0],
            &[1.0, 1.0],
            0.1,
            2000,
        );
        assert!(v < 1e-10 && (x[0] - 0.3).abs() < 1e-4);
    }
}
