//! Undirected graphs and planted-partition stochastic block models.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Undirected, unweighted simple graph over dense node ids `0..n`.
///
/// Adjacency lists are sorted and free of self-loops and duplicates; the
/// structure is immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    m: usize,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Duplicate edges (in
    /// either orientation) collapse into one.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            for node in [u, v] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node, n });
                }
            }
            if u == v {
                return Err(Error::param(format!("self-loop at node {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let m = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        Ok(Graph { adjacency, m })
    }

    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n],
            m: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Degree of `u`.
    pub fn degree(&self, u: usize) -> Result<usize> {
        self.adjacency
            .get(u)
            .map(Vec::len)
            .ok_or(Error::NodeOutOfRange { node: u, n: self.n() })
    }

    #[inline]
    pub(crate) fn deg(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// Sum of all degrees, `2m`.
    pub fn volume(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn min_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `Some(d)` when every node has degree `d`.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.adjacency.first()?.len();
        self.adjacency.iter().all(|a| a.len() == d).then_some(d)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency
            .get(u)
            .is_some_and(|a| a.binary_search(&v).is_ok())
    }

    /// Undirected edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, a)| a.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Maximal connected node sets, each sorted, ordered by smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut components = Vec::new();
        let mut stack = Vec::new();
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            stack.push(root);
            let mut comp = Vec::new();
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &v in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() <= 1
    }

    /// Subgraph induced by `nodes`, renumbered `0..nodes.len()` in the given
    /// order.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let mut index = vec![usize::MAX; self.n()];
        for (new, &old) in nodes.iter().enumerate() {
            if old >= self.n() {
                return Err(Error::NodeOutOfRange { node: old, n: self.n() });
            }
            index[old] = new;
        }
        let edges = self
            .edges()
            .filter(|&(u, v)| index[u] != usize::MAX && index[v] != usize::MAX)
            .map(|(u, v)| (index[u], index[v]));
        Graph::from_edges(nodes.len(), edges)
    }

    /// Largest connected component (first one on ties) and its node ids.
    pub fn largest_component(&self) -> (Graph, Vec<usize>) {
        let nodes = self
            .connected_components()
            .into_iter()
            .fold(Vec::new(), |best, c| if c.len() > best.len() { c } else { best });
        let g = self
            .induced_subgraph(&nodes)
            .expect("component nodes are in range");
        (g, nodes)
    }

    /// Nodes that survive repeatedly deleting nodes of degree below `k`.
    pub fn k_core_nodes(&self, k: usize) -> Vec<usize> {
        let mut deg = self.degrees();
        let mut removed = vec![false; self.n()];
        let mut queue: Vec<usize> = (0..self.n()).filter(|&u| deg[u] < k).collect();
        for &u in &queue {
            removed[u] = true;
        }
        while let Some(u) = queue.pop() {
            for &v in &self.adjacency[u] {
                if !removed[v] {
                    deg[v] -= 1;
                    if deg[v] < k {
                        removed[v] = true;
                        queue.push(v);
                    }
                }
            }
        }
        (0..self.n()).filter(|&u| !removed[u]).collect()
    }

    /// The same graph with node `u` renamed to `perm[u]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n() {
            return Err(Error::LengthMismatch {
                left: perm.len(),
                right: self.n(),
            });
        }
        Graph::from_edges(self.n(), self.edges().map(|(u, v)| (perm[u], perm[v])))
    }
}

/// Cluster assignment, one id per node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector(pub Vec<usize>);

impl LabelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// One more than the largest label (0 for an empty vector).
    pub fn num_classes(&self) -> usize {
        self.0.iter().max().map_or(0, |&x| x + 1)
    }

    /// Keeps the entries where `keep` is true.
    pub fn select(&self, keep: &[bool]) -> LabelVector {
        LabelVector(
            self.0
                .iter()
                .zip(keep)
                .filter_map(|(&l, &k)| k.then_some(l))
                .collect(),
        )
    }
}

impl From<Vec<usize>> for LabelVector {
    fn from(v: Vec<usize>) -> Self {
        LabelVector(v)
    }
}

/// Planted-partition model `G(n, k, c, lambda)`.
///
/// Intra-cluster pairs connect with probability `c / n`, inter-cluster
/// pairs with `c (1 - lambda) / n`. `lambda = 1` gives disjoint clusters,
/// `lambda = 0` an Erdős–Rényi graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n: usize,
    pub k: usize,
    pub c: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl SbmParams {
    pub fn intra_probability(&self) -> f64 {
        self.c / self.n as f64
    }

    pub fn inter_probability(&self) -> f64 {
        self.c * (1.0 - self.lambda) / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n must be positive"));
        }
        if self.k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::param(format!("c must be positive, got {}", self.c)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::param(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.intra_probability() > 1.0 {
            return Err(Error::param(format!(
                "intra-cluster probability c/n = {} exceeds 1",
                self.intra_probability()
            )));
        }
        Ok(())
    }
}

/// Samples a planted-partition graph and its ground-truth labels.
///
/// Every node joins one of the `k` clusters uniformly at random, then each
/// unordered pair is kept independently with its block probability. Pairs
/// are visited with geometric skipping, so the cost is linear in the
/// number of sampled edges.
pub fn generate_sbm(params: &SbmParams) -> Result<(Graph, LabelVector)> {
    params.validate()?;
    let SbmParams { n, k, seed, .. } = *params;

    let mut label_rng = rng::stream(seed, &[0]);
    let labels: Vec<usize> = (0..n).map(|_| label_rng.random_range(0..k)).collect();

    let mut members = vec![Vec::new(); k];
    for (u, &l) in labels.iter().enumerate() {
        members[l].push(u);
    }

    let intra = params.intra_probability();
    let inter = params.inter_probability();
    let mut edge_rng = rng::stream(seed, &[1]);
    let mut edges = Vec::new();
    for a in 0..k {
        sample_within(&members[a], intra, &mut edge_rng, &mut edges);
        for b in a + 1..k {
            sample_between(&members[a], &members[b], inter, &mut edge_rng, &mut edges);
        }
    }

    let graph = Graph::from_edges(n, edges)?;
    Ok((graph, LabelVector(labels)))
}

/// Number of failures before the next success of a Bernoulli(p) sequence.
#[inline]
fn geometric_skip<R: Rng>(rng: &mut R, log_q: f64) -> u64 {
    let u: f64 = rng.random();
    let skip = (1.0 - u).ln() / log_q;
    if skip >= u64::MAX as f64 {
        u64::MAX
    } else {
        skip as u64
    }
}

fn sample_within<R: Rng>(nodes: &[usize], p: f64, rng: &mut R, out: &mut Vec<(usize, usize)>) {
    let s = nodes.len() as u64;
    if p <= 0.0 || s < 2 {
        return;
    }
    if p >= 1.0 {
        for (i, &u) in nodes.iter().enumerate() {
            out.extend(nodes[..i].iter().map(|&v| (u, v)));
        }
        return;
    }
    // Batagelj–Brandes walk over the strict lower triangle.
    let log_q = (1.0 - p).ln();
    let s = s as i64;
    let (mut row, mut col) = (1i64, -1i64);
    while row < s {
        let skip = geometric_skip(rng, log_q).min((s * s) as u64) as i64;
        col += 1 + skip;
        while row < s && col >= row {
            col -= row;
            row += 1;
        }
        if row < s {
            out.push((nodes[row as usize], nodes[col as usize]));
        }
    }
}

fn sample_between<R: Rng>(
    left: &[usize],
    right: &[usize],
    p: f64,
    rng: &mut R,
    out: &mut Vec<(usize, usize)>,
) {
    let total = left.len() as u64 * right.len() as u64;
    if p <= 0.0 || total == 0 {
        return;
    }
    let width = right.len() as u64;
    if p >= 1.0 {
        for idx in 0..total {
            out.push((left[(idx / width) as usize], right[(idx % width) as usize]));
        }
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut idx: u64 = 0;
    loop {
        idx = idx.saturating_add(geometric_skip(rng, log_q));
        if idx >= total {
            break;
        }
        out.push((left[(idx / width) as usize], right[(idx % width) as usize]));
        idx += 1;
    }
}

/// Random `d`-regular simple graph on `n` nodes.
///
/// Stubs are paired at random, rejecting pairs that would create a loop or
/// a repeated edge; a pairing that gets stuck restarts from scratch. The
/// result is close to, but not exactly, uniform over `d`-regular graphs.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if d >= n || (n * d) % 2 != 0 {
        return Err(Error::param(format!(
            "no simple {d}-regular graph on {n} nodes"
        )));
    }
    let mut rng = rng::stream(seed, &[0x7265_6775]);
    'restart: for _ in 0..10_000 {
        let mut stubs: Vec<usize> = (0..n).flat_map(|u| std::iter::repeat_n(u, d)).collect();
        stubs.shuffle(&mut rng);
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::with_capacity(d); n];
        while !stubs.is_empty() {
            let mut placed = false;
            for _ in 0..100 {
                let len = stubs.len();
                let i = rng.random_range(0..len);
                let j = rng.random_range(0..len);
                let (u, v) = (stubs[i], stubs[j]);
                if i == j || u == v || adjacency[u].contains(&v) {
                    continue;
                }
                adjacency[u].push(v);
                adjacency[v].push(u);
                let (hi, lo) = if i > j { (i, j) } else { (j, i) };
                stubs.swap_remove(hi);
                stubs.swap_remove(lo);
                placed = true;
                break;
            }
            if !placed {
                continue 'restart;
            }
        }
        let edges = adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, a)| a.iter().map(move |&v| (u, v)));
        return Graph::from_edges(n, edges);
    }
    Err(Error::NoConvergence {
        what: "random regular pairing",
        iterations: 10_000,
        residual: f64::NAN,
    })
}
