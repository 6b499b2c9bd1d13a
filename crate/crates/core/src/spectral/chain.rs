//! Ergodicity and stationary distributions of finite Markov chains.

use std::collections::VecDeque;

use super::sparse::{CsrMatrix, LeftMultiplier};
use crate::error::{Error, Result};
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ergodicity {
    pub irreducible: bool,
    pub aperiodic: bool,
    /// Period of the class containing state 0 (1 means aperiodic).
    pub period: usize,
}

impl Ergodicity {
    pub fn is_ergodic(&self) -> bool {
        self.irreducible && self.aperiodic
    }
}

fn bfs_levels(m: &CsrMatrix, root: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; m.rows()];
    level[root] = Some(0);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let next = level[u].unwrap() + 1;
        let (idx, val) = m.row(u);
        for (&v, &p) in idx.iter().zip(val) {
            if p > 0.0 && level[v].is_none() {
                level[v] = Some(next);
                queue.push_back(v);
            }
        }
    }
    level
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Irreducibility from strong connectivity of the positive-entry digraph;
/// the period is the gcd of `level(u) + 1 - level(v)` over its arcs, with
/// levels taken from a BFS rooted at state 0.
pub fn check_ergodicity(m: &CsrMatrix) -> Ergodicity {
    let n = m.rows();
    if n == 0 || m.cols() != n {
        return Ergodicity { irreducible: false, aperiodic: false, period: 0 };
    }
    let forward = bfs_levels(m, 0);
    let backward = bfs_levels(&m.transpose(), 0);
    let irreducible = forward.iter().all(Option::is_some) && backward.iter().all(Option::is_some);

    let mut period = 0;
    for u in 0..n {
        let Some(lu) = forward[u] else { continue };
        let (idx, val) = m.row(u);
        for (&v, &p) in idx.iter().zip(val) {
            if p <= 0.0 {
                continue;
            }
            if let Some(lv) = forward[v] {
                period = gcd(period, (lu + 1).abs_diff(lv));
            }
        }
    }
    Ergodicity {
        irreducible,
        aperiodic: period == 1,
        period,
    }
}

/// `|| x M - x ||_1`.
pub fn stationarity_residual(m: &CsrMatrix, x: &[f64]) -> f64 {
    let left = LeftMultiplier::new(m);
    let mut y = vec![0.0; x.len()];
    left.apply(x, &mut y, Execution::Sequential);
    y.iter().zip(x).map(|(a, b)| (a - b).abs()).sum()
}

/// Left eigenvector for eigenvalue 1, normalized to sum 1, by power
/// iteration on the lazy chain `(I + M) / 2` until `||x M - x||_1 < 1e-10`.
pub fn stationary_distribution(m: &CsrMatrix, exec: Execution) -> Result<Vec<f64>> {
    let erg = check_ergodicity(m);
    if !erg.is_ergodic() {
        return Err(Error::NotErgodic {
            irreducible: erg.irreducible,
            aperiodic: erg.aperiodic,
        });
    }
    const MAX_ITERS: usize = 1_000_000;
    let start = vec![1.0 / m.rows() as f64; m.rows()];
    let (x, residual) = power_stationary(m, start, 1e-10, MAX_ITERS, exec);
    if residual < 1e-10 {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            what: "stationary distribution",
            iterations: MAX_ITERS,
            residual,
        })
    }
}

/// Lazy power iteration from `x` until the residual drops below `tol` or
/// `max_iters` is spent. Returns the last iterate and its residual.
pub(crate) fn power_stationary(
    m: &CsrMatrix,
    mut x: Vec<f64>,
    tol: f64,
    max_iters: usize,
    exec: Execution,
) -> (Vec<f64>, f64) {
    let left = LeftMultiplier::new(m);
    let mut y = vec![0.0; x.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        left.apply(&x, &mut y, exec);
        residual = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        if residual < tol {
            break;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = 0.5 * (*xi + yi);
        }
        let total: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= total);
    }
    (x, residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::spectral::transition::build_vertex_transition;

    fn cycle(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn ergodicity_examples() {
        let even = check_ergodicity(&build_vertex_transition(&cycle(6)).matrix);
        assert!(even.irreducible && !even.aperiodic);
        assert_eq!(even.period, 2);
        let tri = check_ergodicity(&build_vertex_transition(&cycle(3)).matrix);
        assert!(tri.is_ergodic());
        let two = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        assert!(!check_ergodicity(&build_vertex_transition(&two).matrix).irreducible);
    }

    #[test]
    fn triangle_is_uniform() {
        let pi = stationary_distribution(&build_vertex_transition(&cycle(3)).matrix, Execution::Sequential).unwrap();
        assert!(pi.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-10));
    }

    #[test]
    fn degree_proportional() {
        // Star with three leaves and an extra leaf-leaf edge.
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap();
        let p = build_vertex_transition(&g).matrix;
        let pi = stationary_distribution(&p, Execution::Parallel).unwrap();
        let vol = g.volume() as f64;
        for v in 0..4 {
            assert!((pi[v] - g.neighbors(v).len() as f64 / vol).abs() < 1e-9);
        }
        assert!(stationarity_residual(&p, &pi) < 1e-10);
    }

    #[test]
    fn bipartite_chain_is_rejected() {
        let p = build_vertex_transition(&cycle(4)).matrix;
        assert!(matches!(
            stationary_distribution(&p, Execution::Sequential),
            Err(Error::NotErgodic { irreducible: true, aperiodic: false })
        ));
    }
}
