//! Two-cluster Lloyd's k-means, used as the relation-blind baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::PointSet;
use crate::error::{Error, Result};
use crate::rng::Seed;

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: [Vec<f64>; 2],
    /// Sum of squared distances to the assigned centroid.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after each assignment step of the winning restart.
    pub history: Vec<f64>,
}

impl KMeansModel {
    /// Nearest centroid; ties go to cluster 0.
    pub fn assign(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, x).0
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>; 2], x: &[f64]) -> (usize, f64) {
    let d0 = sq_dist(&centroids[0], x);
    let d1 = sq_dist(&centroids[1], x);
    if d1 < d0 {
        (1, d1)
    } else {
        (0, d0)
    }
}

/// Best of [`DEFAULT_RESTARTS`] seeded runs.
pub fn kmeans_fit(points: &PointSet, seed: Seed) -> Result<(KMeansModel, Vec<usize>)> {
    kmeans_fit_with(points, seed, DEFAULT_RESTARTS, DEFAULT_MAX_ITER)
}

/// Each restart picks a random first centroid and takes the point farthest
/// from it as the second, then runs Lloyd's iterations until the assignment
/// stops changing or `max_iter` is reached.
pub fn kmeans_fit_with(
    points: &PointSet,
    seed: Seed,
    restarts: usize,
    max_iter: usize,
) -> Result<(KMeansModel, Vec<usize>)> {
    let n = points.len();
    if n == 0 || !points.rows().any(|r| r != points.row(0)) {
        return Err(Error::DegenerateData(
            "k-means needs at least two distinct points".into(),
        ));
    }
    let mut best: Option<(KMeansModel, Vec<usize>)> = None;
    for r in 0..restarts.max(1) {
        let first = seed.stream(r as u64).random_range(0..n);
        let anchor = points.row(first);
        let mut second = first;
        let mut far = -1.0;
        for (i, x) in points.rows().enumerate() {
            let d = sq_dist(anchor, x);
            if d > far {
                far = d;
                second = i;
            }
        }
        let init = [anchor.to_vec(), points.row(second).to_vec()];
        let run = lloyd(points, init, max_iter);
        if best.as_ref().is_none_or(|(b, _)| run.0.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn lloyd(points: &PointSet, mut centroids: [Vec<f64>; 2], max_iter: usize) -> (KMeansModel, Vec<usize>) {
    let n = points.len();
    let d = points.dim();
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut objective = 0.0;
        for (i, x) in points.rows().enumerate() {
            let (c, dist) = nearest(&centroids, x);
            objective += dist;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        history.push(objective);
        if !changed || iterations >= max_iter {
            break;
        }
        iterations += 1;
        let mut sums = [vec![0.0; d], vec![0.0; d]];
        let mut counts = [0usize; 2];
        for (x, &c) in points.rows().zip(&assignments) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(x) {
                *s += v;
            }
        }
        for c in 0..2 {
            // an emptied cluster keeps its previous centroid
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let objective = *history.last().expect("one assignment pass");
    (
        KMeansModel {
            centroids,
            objective,
            iterations,
            history,
        },
        assignments,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_gaussian, GaussianSpec};

    fn blobs() -> PointSet {
        let spec = GaussianSpec::new(vec![10.0, 10.0], vec![-10.0, -10.0], 0.5, 0.5).unwrap();
        let ex = sample_gaussian(&spec, 200, Seed::new(2)).unwrap();
        PointSet::from_rows(2, ex.iter().map(|e| &e.x)).unwrap()
    }

    #[test]
    fn separated_blobs() {
        let pts = blobs();
        let (m, assign) = kmeans_fit(&pts, Seed::new(1)).unwrap();
        let mut corners: Vec<f64> = m.centroids.iter().map(|c| c[0]).collect();
        corners.sort_by(f64::total_cmp);
        assert!(corners[0] > -12.0 && corners[0] < -8.0);
        assert!(corners[1] > 8.0 && corners[1] < 12.0);
        for (x, a) in pts.rows().zip(&assign) {
            assert_eq!(m.assign(x), *a);
        }
    }

    #[test]
    fn objective_never_increases() {
        let spec = GaussianSpec::new(vec![1.0, 0.0], vec![-1.0, 0.0], 1.5, 0.6).unwrap();
        let ex = sample_gaussian(&spec, 500, Seed::new(8)).unwrap();
        let pts = PointSet::from_rows(2, ex.iter().map(|e| &e.x)).unwrap();
        for restarts in [1, 10] {
            let (m, _) = kmeans_fit_with(&pts, Seed::new(3), restarts, DEFAULT_MAX_ITER).unwrap();
            assert!(m.history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
            assert!(m.iterations < DEFAULT_MAX_ITER);
        }
    }

    #[test]
    fn scaling_preserves_assignments() {
        let pts = blobs();
        let scaled =
            PointSet::from_rows(2, pts.rows().map(|r| r.iter().map(|v| v * 2.0).collect::<Vec<_>>()))
                .unwrap();
        let (_, a) = kmeans_fit(&pts, Seed::new(4)).unwrap();
        let (_, b) = kmeans_fit(&scaled, Seed::new(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_inputs() {
        let same = PointSet::from_rows(2, [[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(kmeans_fit(&same, Seed::new(0)).is_err());
        assert!(kmeans_fit(&PointSet::new(2), Seed::new(0)).is_err());
        let two = PointSet::from_rows(1, [[0.0], [1.0]]).unwrap();
        let (m, a) = kmeans_fit(&two, Seed::new(0)).unwrap();
        assert_ne!(a[0], a[1]);
        assert_eq!(m.objective, 0.0);
    }
}
