use crate::error::{Error, Result};
use crate::numerics::{Array, RngState};

/// Result of a k-means run.
#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Array,
    pub inertia: f64,
    pub iterations: usize,
}

/// Lloyd's algorithm with k-means++ initialization. Empty clusters are
/// re-seeded to the point farthest from its centroid.
pub fn kmeans(points: &Array, k: usize, seed: u64, max_iter: usize) -> Result<KmeansResult> {
    if points.shape().len() != 2 {
        return Err(Error::Dimension(format!(
            "kmeans expects [n × f] points, got {:?}",
            points.shape()
        )));
    }
    let (n, f) = (points.shape()[0], points.shape()[1]);
    if k == 0 || n < k {
        return Err(Error::Usage(format!("kmeans requires n >= k >= 1, got n={n}, k={k}")));
    }
    let mut rng = RngState::new(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut iterations = 0;

    for iter in 0..max_iter {
        iterations = iter + 1;
        // Assignment step.
        let mut changed = false;
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(points, i, &centroids, c, f);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        // Update step.
        let mut sums = vec![0.0; k * f];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assignments[i];
            counts[c] += 1;
            for j in 0..f {
                sums[c * f + j] += points.at2(i, j);
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed to the point farthest from its assigned centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(points, a, &centroids, assignments[a], f);
                        let db = sq_dist(points, b, &centroids, assignments[b], f);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                for j in 0..f {
                    centroids.set2(c, j, points.at2(far, j));
                }
                changed = true;
            } else {
                for j in 0..f {
                    centroids.set2(c, j, sums[c * f + j] / counts[c] as f64);
                }
            }
        }
        if !changed && iter > 0 {
            break;
        }
    }

    let inertia = (0..n)
        .map(|i| sq_dist(points, i, &centroids, assignments[i], f))
        .sum();
    Ok(KmeansResult {
        assignments,
        centroids,
        inertia,
        iterations,
    })
}

fn sq_dist(points: &Array, i: usize, centroids: &Array, c: usize, f: usize) -> f64 {
    let mut d = 0.0;
    for j in 0..f {
        let diff = points.at2(i, j) - centroids.at2(c, j);
        d += diff * diff;
    }
    d
}

fn plus_plus_init(points: &Array, k: usize, rng: &mut RngState) -> Array {
    let (n, f) = (points.shape()[0], points.shape()[1]);
    let mut centroids = Array::zeros(&[k, f]);
    let first = rng.below(n);
    for j in 0..f {
        centroids.set2(0, j, points.at2(first, j));
    }
    let mut min_d: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centroids, 0, f)).collect();
    for c in 1..k {
        let total: f64 = min_d.iter().sum();
        let pick = if total <= 0.0 {
            rng.below(n)
        } else {
            let mut target = rng.uniform() * total;
            let mut chosen = n - 1;
            for (i, &d) in min_d.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        for j in 0..f {
            centroids.set2(c, j, points.at2(pick, j));
        }
        for i in 0..n {
            let d = sq_dist(points, i, &centroids, c, f);
            if d < min_d[i] {
                min_d[i] = d;
            }
        }
    }
    centroids
}
