//! Space-filling designs in the unit cube.

use rand::seq::SliceRandom;
use rand::Rng;

use super::distance_sq;

/// Latin hypercube sample of `n` points in `[0, 1]^d`, one point per stratum
/// along every axis, jittered within the stratum.
#[allow(clippy::needless_range_loop)]
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(rng);
        for (i, &s) in strata.iter().enumerate() {
            points[i][j] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    points
}

pub fn uniform_points<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Index of the candidate whose nearest existing point is farthest away,
/// together with that distance. `None` when there are no candidates.
pub fn maximin_index(candidates: &[Vec<f64>], existing: &[Vec<f64>]) -> Option<(usize, f64)> {
    candidates
        .iter()
        .enumerate()
        .map(|(i, c)| (i, min_distance(c, existing)))
        .fold(None, |acc: Option<(usize, f64)>, (i, d)| match acc {
            Some((_, best)) if best >= d => acc,
            _ => Some((i, d)),
        })
}

pub(crate) fn min_distance(x: &[f64], existing: &[Vec<f64>]) -> f64 {
    existing
        .iter()
        .map(|p| distance_sq(x, p))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::seeded_stream;

    #[test]
    fn latin_hypercube_hits_every_stratum() {
        let mut rng = seeded_stream(3, 0);
        let n = 17;
        let pts = latin_hypercube(n, 4, &mut rng);
        for j in 0..4 {
            let mut seen = vec![false; n];
            for p in &pts {
                assert!((0.0..1.0).contains(&p[j]));
                seen[(p[j] * n as f64) as usize] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn maximin_picks_farthest() {
        let existing = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let cands = vec![vec![0.5, 0.1], vec![0.5, 1.0], vec![0.1, 0.1]];
        let (i, d) = maximin_index(&cands, &existing).unwrap();
        assert_eq!(i, 1);
        assert!((d - 1.25f64.sqrt()).abs() < 1e-12);
        assert!(maximin_index(&[], &existing).is_none());
    }
}
