//! Randomized checks of the minimizers and their surrogates.

use echelon_core::optim::{
    latin_hypercube, minimize, uniform_points, Budget, GaussianProcess, GpSettings, NelderMeadSettings,
    RbfSettings, RbfSurrogate, SearchSpace, Strategy,
};
use echelon_core::sampling::seeded_stream;
use proptest::prelude::*;

fn strategies() -> Vec<Strategy> {
    vec![
        Strategy::NelderMead(NelderMeadSettings::default()),
        Strategy::Gp(GpSettings {
            n_random_starts: 5,
            ..GpSettings::default()
        }),
        Strategy::Rbf(RbfSettings::default()),
    ]
}

fn bumpy(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(i, v)| (v - i as f64).powi(2) + (3.0 * v).sin()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn best_so_far_is_nonincreasing_and_in_bounds(
        d in 1usize..4,
        seed in 0u64..1000,
        pick in 0usize..3,
        evals in 5usize..40,
    ) {
        let space = SearchSpace::new(vec![-3.0; d], vec![4.0; d]).unwrap();
        let strategy = strategies().swap_remove(pick);
        let run = minimize(bumpy, &space, &Budget::evaluations(evals), &strategy, seed).unwrap();
        prop_assert_eq!(run.evaluations, evals);
        prop_assert_eq!(run.best_so_far.len(), evals);
        prop_assert!(run.best_so_far.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(run.points.iter().all(|p| space.contains(p)));
        let min = run.values.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(run.best_value, min);
        prop_assert_eq!(*run.best_so_far.last().unwrap(), min);
    }

    #[test]
    fn rbf_interpolates_random_designs(n in 8usize..40, d in 1usize..6, seed in any::<u64>()) {
        let mut rng = seeded_stream(seed, 0);
        let xs = latin_hypercube(n.max(d + 1), d, &mut rng);
        let ys: Vec<f64> = xs.iter().map(|x| bumpy(x) * 10.0).collect();
        let s = RbfSurrogate::fit(&xs, &ys).unwrap();
        let norm = ys.iter().map(|y| y * y).sum::<f64>().sqrt();
        prop_assert!(s.residual() <= 1e-8 * norm);
        for (x, y) in xs.iter().zip(&ys) {
            prop_assert!((s.eval(x) - y).abs() <= 1e-8 * y.abs().max(1.0));
        }
    }

    #[test]
    fn gp_reproduces_training_values(n in 4usize..30, d in 1usize..5, seed in any::<u64>()) {
        let mut rng = seeded_stream(seed, 1);
        let xs = latin_hypercube(n, d, &mut rng);
        let ys: Vec<f64> = xs.iter().map(|x| bumpy(x)).collect();
        let gp = GaussianProcess::fit(&xs, &ys).unwrap();
        let scale = gp.value_scale();
        for ((x, y), a) in xs.iter().zip(&ys).zip(gp.dual_coefficients()) {
            let (mean, std) = gp.predict(x);
            let shift = scale * gp.jitter() * a;
            prop_assert!((mean - (y - shift)).abs() <= 1e-9 * scale, "{} vs {}", mean, y);
            prop_assert!(std.is_finite());
            prop_assert!(gp.standardized_variance(x) <= gp.jitter() + 1e-12);
        }
    }
}

/// Nelder-Mead moves continuously and leaves rounding to the objective; the
/// surrogate searches propose lattice points only.
#[test]
fn surrogate_searches_propose_integer_coordinates() {
    let space = SearchSpace::new(vec![0.0; 3], vec![20.0; 3])
        .unwrap()
        .with_integers(vec![true, false, true])
        .unwrap();
    for strategy in strategies().into_iter().skip(1) {
        let run = minimize(bumpy, &space, &Budget::evaluations(30), &strategy, 3).unwrap();
        for p in &run.points {
            assert_eq!(p[0], p[0].round(), "{}", strategy.name());
            assert_eq!(p[2], p[2].round(), "{}", strategy.name());
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let space = SearchSpace::new(vec![-3.0; 2], vec![4.0; 2]).unwrap();
    for strategy in strategies() {
        let a = minimize(bumpy, &space, &Budget::evaluations(30), &strategy, 11).unwrap();
        let b = minimize(bumpy, &space, &Budget::evaluations(30), &strategy, 11).unwrap();
        assert_eq!(a.points, b.points, "{}", strategy.name());
    }
}

#[test]
fn surrogates_predict_smooth_functions_between_samples() {
    let mut rng = seeded_stream(5, 0);
    let xs = latin_hypercube(40, 2, &mut rng);
    let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 0.5 * (x[1] - 0.6).powi(2);
    let ys: Vec<f64> = xs.iter().map(|x| f(x)).collect();
    let rbf = RbfSurrogate::fit(&xs, &ys).unwrap();
    let gp = GaussianProcess::fit(&xs, &ys).unwrap();
    // Interior points only; both interpolants extrapolate near the corners.
    for u in uniform_points(50, 2, &mut rng) {
        let u: Vec<f64> = u.iter().map(|v| 0.15 + 0.7 * v).collect();
        assert!((rbf.eval(&u) - f(&u)).abs() < 1e-2);
        assert!((gp.mean(&u) - f(&u)).abs() < 1e-3);
    }
}
