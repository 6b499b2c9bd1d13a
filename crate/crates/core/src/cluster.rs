//! Lloyd's k-means with k-means++ seeding and best-of-restarts selection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::LabelVector;
use crate::par::{self, Execution};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KmeansParams {
    pub k: usize,
    pub restarts: usize,
    pub max_iters: usize,
    /// Convergence threshold on the summed squared centroid shift.
    pub tol: f64,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for KmeansParams {
    fn default() -> Self {
        KmeansParams {
            k: 2,
            restarts: 10,
            max_iters: 300,
            tol: 1e-6,
            seed: 0,
            exec: Execution::Parallel,
        }
    }
}

impl KmeansParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::param("k, restarts and max_iters must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub labels: LabelVector,
    /// Row-major `k x dim`.
    pub centroids: Vec<f64>,
    pub dim: usize,
    /// Within-cluster sum of squared distances of the chosen restart.
    pub sse: f64,
    /// Final SSE of every restart, in order.
    pub restart_sse: Vec<f64>,
    /// SSE after each assignment step of the chosen restart.
    pub history: Vec<f64>,
}

impl KmeansResult {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid (lowest index on ties).
#[inline]
fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    centroids
        .chunks_exact(dim)
        .enumerate()
        .map(|(c, z)| (c, sq_dist(point, z)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn assign(points: &[f64], dim: usize, centroids: &[f64], exec: Execution) -> Vec<(usize, f64)> {
    let n = points.len() / dim;
    par::map_range(exec, n, |i| nearest(&points[i * dim..(i + 1) * dim], centroids, dim))
}

fn plus_plus<R: Rng>(points: &[f64], dim: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centroids[..dim])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), &centroids[start..]));
        }
    }
    centroids
}

struct Run {
    labels: Vec<usize>,
    centroids: Vec<f64>,
    sse: f64,
    history: Vec<f64>,
}

fn lloyd(points: &[f64], dim: usize, params: &KmeansParams, restart: usize) -> Run {
    let k = params.k;
    let mut rng = rng::stream(params.seed, &[restart as u64]);
    let mut centroids = plus_plus(points, dim, k, &mut rng);
    let mut history = Vec::new();

    let mut iter = 0;
    loop {
        let mut assigned = assign(points, dim, &centroids, params.exec);
        repair_empty(points, dim, &mut assigned, &mut centroids, k);
        history.push(assigned.iter().map(|a| a.1).sum());
        if iter == params.max_iters {
            let labels = assigned.iter().map(|a| a.0).collect();
            let sse = *history.last().unwrap();
            return Run { labels, centroids, sse, history };
        }

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &(c, _)) in assigned.iter().enumerate() {
            counts[c] += 1;
            for (s, &x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(&points[i * dim..(i + 1) * dim]) {
                *s += x;
            }
        }
        let mut shift = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            for (z, s) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                let new = s * inv;
                shift += (new - *z) * (new - *z);
                *z = new;
            }
        }
        iter += 1;
        if shift < params.tol {
            // One more assignment against the final centroids.
            iter = params.max_iters;
        }
    }
}

/// Reseeds each empty cluster with the point farthest from its centroid,
/// taken from a cluster that keeps at least one other member. Clusters stay
/// empty when every point already sits on its centroid.
fn repair_empty(
    points: &[f64],
    dim: usize,
    assigned: &mut [(usize, f64)],
    centroids: &mut [f64],
    k: usize,
) {
    let mut counts = vec![0usize; k];
    for a in assigned.iter() {
        counts[a.0] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let far = assigned
            .iter()
            .enumerate()
            .filter(|(_, a)| counts[a.0] > 1 && a.1 > 0.0)
            .fold(None, |best: Option<(usize, f64)>, (i, a)| match best {
                Some((_, d)) if d >= a.1 => best,
                _ => Some((i, a.1)),
            });
        let Some((i, _)) = far else { return };
        counts[assigned[i].0] -= 1;
        counts[c] = 1;
        assigned[i] = (c, 0.0);
        centroids[c * dim..(c + 1) * dim].copy_from_slice(&points[i * dim..(i + 1) * dim]);
    }
}

/// Clusters row-major `points` (`dim` columns) into `params.k` groups.
pub fn kmeans_points(points: &[f64], dim: usize, params: &KmeansParams) -> Result<KmeansResult> {
    params.validate()?;
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::param("point buffer is not a whole number of rows"));
    }
    let n = points.len() / dim;
    if n < params.k {
        return Err(Error::TooFewPoints { points: n, k: params.k });
    }
    let runs: Vec<Run> = (0..params.restarts)
        .map(|r| lloyd(points, dim, params, r))
        .collect();
    let restart_sse: Vec<f64> = runs.iter().map(|r| r.sse).collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.sse.total_cmp(&b.1.sse).then(a.0.cmp(&b.0)))
        .map(|(_, r)| r)
        .expect("at least one restart");
    Ok(KmeansResult {
        labels: LabelVector(best.labels),
        centroids: best.centroids,
        dim,
        sse: best.sse,
        restart_sse,
        history: best.history,
    })
}

/// K-means over the trained rows of `emb`. Untrained rows take no part in
/// fitting and are afterwards labeled with their nearest centroid, so the
/// label vector covers every node.
pub fn kmeans(emb: &EmbeddingMatrix, params: &KmeansParams) -> Result<KmeansResult> {
    let dim = emb.dim();
    let trained: Vec<usize> = (0..emb.n()).filter(|&i| emb.is_trained(i)).collect();
    let mut points = Vec::with_capacity(trained.len() * dim);
    for &i in &trained {
        points.extend(emb.row(i).iter().map(|&x| x as f64));
    }
    let fit = kmeans_points(&points, dim, params)?;

    let mut labels = vec![0usize; emb.n()];
    for (&i, &l) in trained.iter().zip(&fit.labels.0) {
        labels[i] = l;
    }
    let mut row = vec![0.0; dim];
    for i in (0..emb.n()).filter(|&i| !emb.is_trained(i)) {
        for (r, &x) in row.iter_mut().zip(emb.row(i)) {
            *r = x as f64;
        }
        labels[i] = nearest(&row, &fit.centroids, dim).0;
    }
    Ok(KmeansResult {
        labels: LabelVector(labels),
        ..fit
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ccr;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(per: usize, seed: u64) -> (Vec<f64>, Vec<usize>) {
        let mut rng = rng::stream(seed, &[]);
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (label, center) in [(0usize, 0.0), (1, 100.0)] {
            for _ in 0..per {
                for _ in 0..2 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    pts.push(center + z);
                }
                truth.push(label);
            }
        }
        (pts, truth)
    }

    #[test]
    fn separated_blobs() {
        let (pts, truth) = blobs(50, 1);
        let res = kmeans_points(&pts, 2, &KmeansParams { k: 2, ..Default::default() }).unwrap();
        let (rate, _) = ccr(&LabelVector(truth), &res.labels).unwrap();
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = vec![0.0, 0.0, 2.0, 4.0, 4.0, 2.0];
        let res = kmeans_points(&pts, 2, &KmeansParams { k: 1, ..Default::default() }).unwrap();
        assert!(res.labels.0.iter().all(|&l| l == 0));
        assert!((res.centroid(0)[0] - 2.0).abs() < 1e-12);
        assert!((res.centroid(0)[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn distinct_values_have_zero_sse() {
        let pts = vec![1.0, 1.0, 5.0, 5.0, 9.0, 1.0, 9.0];
        let res = kmeans_points(&pts, 1, &KmeansParams { k: 3, ..Default::default() }).unwrap();
        assert_eq!(res.sse, 0.0);
        let l = &res.labels.0;
        assert!(l[0] == l[1] && l[1] == l[5] && l[2] == l[3] && l[4] == l[6]);
        assert!(l[0] != l[2] && l[2] != l[4] && l[0] != l[4]);
    }

    #[test]
    fn identical_points_degenerate() {
        let pts = vec![3.0; 10];
        let res = kmeans_points(&pts, 2, &KmeansParams { k: 3, ..Default::default() }).unwrap();
        assert_eq!(res.sse, 0.0);
        let used: std::collections::BTreeSet<_> = res.labels.0.iter().collect();
        assert_eq!(used.len(), 1);
    }

    #[test]
    fn too_few_points() {
        let res = kmeans_points(&[1.0, 2.0], 1, &KmeansParams { k: 3, ..Default::default() });
        assert!(matches!(res, Err(Error::TooFewPoints { points: 2, k: 3 })));
    }

    #[test]
    fn untrained_rows_get_nearest_centroid() {
        let mut emb = EmbeddingMatrix::new(5, 1);
        for (i, x) in [(0, -10.0), (1, -11.0), (2, 10.0), (3, 11.0)] {
            emb.set_row(i, &[x]);
        }
        let res = kmeans(&emb, &KmeansParams { k: 2, ..Default::default() }).unwrap();
        assert_eq!(res.labels.len(), 5);
        // Row 4 is the zero vector, equidistant; it lands on a valid label.
        assert!(res.labels.0[4] < 2);
        assert_eq!(res.labels.0[0], res.labels.0[1]);
        assert_ne!(res.labels.0[0], res.labels.0[2]);
    }

    #[test]
    fn deterministic_and_execution_independent() {
        let (pts, _) = blobs(40, 2);
        let p = KmeansParams { k: 3, seed: 9, ..Default::default() };
        let a = kmeans_points(&pts, 2, &p).unwrap();
        let b = kmeans_points(&pts, 2, &KmeansParams { exec: Execution::Sequential, ..p }).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn sse_monotone_and_best_of_restarts(
            pts in prop::collection::vec(-50.0f64..50.0, 20..120),
            k in 1usize..5,
            seed in any::<u64>(),
        ) {
            let dim = 2;
            let pts = &pts[..pts.len() / dim * dim];
            prop_assume!(pts.len() / dim >= k);
            let p = KmeansParams { k, restarts: 4, seed, ..Default::default() };
            let res = kmeans_points(pts, dim, &p).unwrap();
            for w in res.history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{:?}", res.history);
            }
            let min = res.restart_sse.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(res.sse, min);
            // Labels are consistent with the returned SSE.
            let sse: f64 = res.labels.0.iter().enumerate()
                .map(|(i, &c)| sq_dist(&pts[i * dim..(i + 1) * dim], res.centroid(c)))
                .sum();
            prop_assert!((sse - res.sse).abs() <= 1e-9 * sse.max(1.0));
        }
    }
}
