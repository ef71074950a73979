//! Seeded k-means (k-means++ initialization, Lloyd iterations, restarts).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, Prng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { restarts: 10, max_iter: 300, tol: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Cluster index in `0..k` per point.
    pub labels: Vec<usize>,
    /// Row-major `k x dim` centroids.
    pub centroids: Vec<f64>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
}

/// Clusters `n` row-major points of dimension `dim` into `k` groups.
///
/// Every restart draws from one generator seeded with `params.seed`; the
/// restart with the lowest inertia wins (earliest on ties).
pub fn kmeans(points: &[f64], dim: usize, k: usize, params: &KMeansParams) -> Result<KMeansResult> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::Dimension(format!("{} values do not form rows of {dim}", points.len())));
    }
    let n = points.len() / dim;
    if k < 1 || k > n {
        return Err(Error::Config(format!("k={k} must lie in 1..={n} (point count)")));
    }
    if params.restarts < 1 {
        return Err(Error::Config("k-means needs at least one restart".into()));
    }
    let data = Points { values: points, dim };
    let mut rng = seeded(params.seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..params.restarts {
        let run = lloyd(&data, k, params, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

struct Points<'a> {
    values: &'a [f64],
    dim: usize,
}

impl Points<'_> {
    fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus(data: &Points, k: usize, rng: &mut Prng) -> Vec<f64> {
    let n = data.len();
    let mut centroids = Vec::with_capacity(k * data.dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(data.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(first))).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = data.row(pick);
        centroids.extend_from_slice(c);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), c));
        }
    }
    centroids
}

fn assign(data: &Points, centroids: &[f64], labels: &mut [usize]) -> f64 {
    let dim = data.dim;
    let mut inertia = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let p = data.row(i);
        let (mut best, mut best_d) = (0, f64::INFINITY);
        for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
            let d = sq_dist(p, centroid);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        *label = best;
        inertia += best_d;
    }
    inertia
}

fn lloyd(data: &Points, k: usize, params: &KMeansParams, rng: &mut Prng) -> KMeansResult {
    let (n, dim) = (data.len(), data.dim);
    let mut centroids = plus_plus(data, k, rng);
    let mut labels = vec![0usize; n];
    let mut inertia = assign(data, &centroids, &mut labels);
    for _ in 0..params.max_iter {
        let mut next = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            next[l * dim..(l + 1) * dim].iter_mut().zip(data.row(i)).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                next[c * dim..(c + 1) * dim].iter_mut().for_each(|s| *s /= counts[c] as f64);
            }
        }
        repair_empty(data, &mut labels, &mut counts, &mut next);
        let shift = centroids
            .chunks_exact(dim)
            .zip(next.chunks_exact(dim))
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        inertia = assign(data, &centroids, &mut labels);
        if shift < params.tol {
            break;
        }
    }
    // nearest-centroid ties can empty a cluster again; fix labels directly
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    if counts.contains(&0) {
        repair_empty(data, &mut labels, &mut counts, &mut centroids);
        inertia = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| sq_dist(data.row(i), &centroids[l * dim..(l + 1) * dim]))
            .sum();
    }
    KMeansResult { labels, centroids, inertia }
}

/// Refills each empty cluster with the point farthest from the centroid of
/// the currently largest cluster.
fn repair_empty(data: &Points, labels: &mut [usize], counts: &mut [usize], centroids: &mut [f64]) {
    let dim = data.dim;
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let largest = (0..counts.len()).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).unwrap();
        if counts[largest] < 2 {
            return;
        }
        let center = centroids[largest * dim..(largest + 1) * dim].to_vec();
        let far = (0..labels.len())
            .filter(|&i| labels[i] == largest)
            .max_by(|&a, &b| {
                sq_dist(data.row(a), &center).total_cmp(&sq_dist(data.row(b), &center)).then(b.cmp(&a))
            })
            .unwrap();
        labels[far] = empty;
        counts[largest] -= 1;
        counts[empty] = 1;
        centroids[empty * dim..(empty + 1) * dim].copy_from_slice(data.row(far));
        // recompute the donor centroid without the moved point
        let mut sum = vec![0.0; dim];
        for i in (0..labels.len()).filter(|&i| labels[i] == largest) {
            sum.iter_mut().zip(data.row(i)).for_each(|(s, x)| *s += x);
        }
        for (c, s) in centroids[largest * dim..(largest + 1) * dim].iter_mut().zip(sum) {
            *c = s / counts[largest] as f64;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64) -> (Vec<f64>, Vec<usize>) {
        let mut rng = seeded(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (label, (cx, cy)) in [(0.0, 0.0), (10.0, 10.0)].into_iter().enumerate() {
            for _ in 0..40 {
                pts.push(cx + noise.sample(&mut rng));
                pts.push(cy + noise.sample(&mut rng));
                truth.push(label);
            }
        }
        (pts, truth)
    }

    #[test]
    fn separates_two_blobs() {
        let (pts, truth) = blobs(3);
        let res = kmeans(&pts, 2, 2, &KMeansParams::default()).unwrap();
        let flip = res.labels[0] != truth[0];
        for (l, t) in res.labels.iter().zip(&truth) {
            assert_eq!(*l != *t, flip);
        }
    }

    #[test]
    fn k_equals_n_is_exact() {
        let pts = [0.0, 0.0, 1.0, 0.0, 0.0, 5.0, 3.0, 3.0];
        let res = kmeans(&pts, 2, 4, &KMeansParams::default()).unwrap();
        assert_eq!(res.inertia, 0.0);
        let mut ls = res.labels.clone();
        ls.sort_unstable();
        assert_eq!(ls, vec![0, 1, 2, 3]);
    }

    #[test]
    fn same_seed_same_labels() {
        let (pts, _) = blobs(9);
        let p = KMeansParams { seed: 42, ..KMeansParams::default() };
        let a = kmeans(&pts, 2, 3, &p).unwrap();
        let b = kmeans(&pts, 2, 3, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_points_do_not_leave_empty_clusters() {
        let pts = [1.0, 1.0, 1.0, 1.0, 2.0, 2.0];
        let res = kmeans(&pts, 1, 3, &KMeansParams::default()).unwrap();
        let mut ls = res.labels.clone();
        ls.sort_unstable();
        ls.dedup();
        assert_eq!(ls.len(), 3);
    }

    #[test]
    fn k_larger_than_n() {
        assert!(matches!(kmeans(&[1.0, 2.0], 1, 3, &KMeansParams::default()), Err(Error::Config(_))));
        assert!(matches!(kmeans(&[1.0, 2.0], 1, 0, &KMeansParams::default()), Err(Error::Config(_))));
    }
}
