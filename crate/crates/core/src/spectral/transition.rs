//! Vertex and directed-edge transition matrices, and graph Laplacians.

use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Simple random walk `P = D^-1 A`. Rows of isolated nodes are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexTransitionMatrix {
    pub matrix: CsrMatrix,
    /// Nodes of degree 0, whose rows are all zero.
    pub zero_rows: Vec<usize>,
}

impl AsRef<CsrMatrix> for VertexTransitionMatrix {
    fn as_ref(&self) -> &CsrMatrix {
        &self.matrix
    }
}

pub fn build_vertex_transition(g: &Graph) -> VertexTransitionMatrix {
    let mut triplets = Vec::with_capacity(g.volume());
    let mut zero_rows = Vec::new();
    for u in 0..g.n() {
        let nbrs = g.neighbors(u);
        if nbrs.is_empty() {
            zero_rows.push(u);
            continue;
        }
        let p = 1.0 / nbrs.len() as f64;
        triplets.extend(nbrs.iter().map(|&v| (u, v, p)));
    }
    VertexTransitionMatrix {
        matrix: CsrMatrix::from_triplets(g.n(), g.n(), triplets),
        zero_rows,
    }
}

/// Directed-edge numbering: the undirected edge of rank `e` (in sorted
/// `(u, v)`, `u < v` order) yields id `2e` for `u -> v` and `2e + 1` for
/// `v -> u`, so the reverse of id `i` is `i ^ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedEdges {
    endpoints: Vec<(usize, usize)>,
    /// `slot_ids[offsets[u] + k]` is the id of `u -> neighbors(u)[k]`.
    offsets: Vec<usize>,
    slot_ids: Vec<usize>,
}

impl DirectedEdges {
    pub fn new(g: &Graph) -> Self {
        let mut offsets = Vec::with_capacity(g.n() + 1);
        offsets.push(0);
        for u in 0..g.n() {
            offsets.push(offsets[u] + g.neighbors(u).len());
        }
        let mut slot_ids = vec![usize::MAX; g.volume()];
        let mut endpoints = vec![(0, 0); g.volume()];
        for (e, (u, v)) in g.edges().enumerate() {
            let ku = g.neighbors(u).binary_search(&v).expect("symmetric adjacency");
            let kv = g.neighbors(v).binary_search(&u).expect("symmetric adjacency");
            slot_ids[offsets[u] + ku] = 2 * e;
            slot_ids[offsets[v] + kv] = 2 * e + 1;
            endpoints[2 * e] = (u, v);
            endpoints[2 * e + 1] = (v, u);
        }
        DirectedEdges { endpoints, offsets, slot_ids }
    }

    /// Number of directed edges, `2m`.
    pub fn len(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }

    pub fn endpoints(&self, id: usize) -> (usize, usize) {
        self.endpoints[id]
    }

    /// Id of `u -> neighbors(u)[k]`.
    #[inline]
    pub fn id_by_slot(&self, u: usize, k: usize) -> usize {
        self.slot_ids[self.offsets[u] + k]
    }

    pub fn id(&self, g: &Graph, u: usize, v: usize) -> Option<usize> {
        let k = g.neighbors(u).binary_search(&v).ok()?;
        Some(self.id_by_slot(u, k))
    }

    #[inline]
    pub fn reverse(id: usize) -> usize {
        id ^ 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeWalk {
    /// `P~`: never steps back; needs minimum degree 2.
    NonBacktracking,
    /// `P^`: steps back only out of a degree-1 node; needs minimum degree 1.
    Begrudging,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTransitionMatrix {
    pub matrix: CsrMatrix,
    pub edges: DirectedEdges,
    pub mode: EdgeWalk,
}

impl AsRef<CsrMatrix> for EdgeTransitionMatrix {
    fn as_ref(&self) -> &CsrMatrix {
        &self.matrix
    }
}

/// `2m x 2m` transition matrix over directed edges. From `u -> v` the walk
/// moves to each `v -> y`, `y != u`, with probability `1 / (d_v - 1)`; in
/// begrudging mode a degree-1 `v` sends it back along `v -> u`.
pub fn build_edge_transition(g: &Graph, mode: EdgeWalk) -> Result<EdgeTransitionMatrix> {
    let required = match mode {
        EdgeWalk::NonBacktracking => 2,
        EdgeWalk::Begrudging => 1,
    };
    if let Some(node) = (0..g.n()).find(|&u| g.neighbors(u).len() < required) {
        return Err(Error::DegreeTooLow {
            node,
            degree: g.neighbors(node).len(),
            required,
        });
    }
    let edges = DirectedEdges::new(g);
    let mut triplets = Vec::new();
    for id in 0..edges.len() {
        let (u, v) = edges.endpoints(id);
        let nbrs = g.neighbors(v);
        if nbrs.len() == 1 {
            // Only reachable in begrudging mode.
            triplets.push((id, DirectedEdges::reverse(id), 1.0));
            continue;
        }
        let p = 1.0 / (nbrs.len() - 1) as f64;
        for (k, &y) in nbrs.iter().enumerate() {
            if y != u {
                triplets.push((id, edges.id_by_slot(v, k), p));
            }
        }
    }
    let n = edges.len();
    Ok(EdgeTransitionMatrix {
        matrix: CsrMatrix::from_triplets(n, n, triplets),
        edges,
        mode,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticityCheck {
    pub doubly_stochastic: bool,
    /// Largest `|sum - 1|` over all rows and columns.
    pub max_deviation: f64,
}

/// Whether every row and column of `m` sums to 1 within `1e-12`.
pub fn check_doubly_stochastic(m: &CsrMatrix) -> StochasticityCheck {
    let max_deviation = m
        .row_sums()
        .into_iter()
        .chain(m.col_sums())
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max);
    StochasticityCheck {
        doubly_stochastic: max_deviation <= 1e-12 && m.rows() == m.cols() && m.rows() > 0,
        max_deviation,
    }
}

/// `L = D - A`, `L_sym = I - D^-1/2 A D^-1/2`, `L_rw = I - D^-1 A`.
/// Isolated nodes contribute a zero row to `D^-1/2 A D^-1/2` and `D^-1 A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianSet {
    pub combinatorial: CsrMatrix,
    pub symmetric: CsrMatrix,
    pub random_walk: CsrMatrix,
}

pub fn adjacency_matrix(g: &Graph) -> CsrMatrix {
    let t = (0..g.n())
        .flat_map(|u| g.neighbors(u).iter().map(move |&v| (u, v, 1.0)))
        .collect();
    CsrMatrix::from_triplets(g.n(), g.n(), t)
}

pub fn laplacians(g: &Graph) -> LaplacianSet {
    let n = g.n();
    let deg = g.degrees();
    let degree = CsrMatrix::from_triplets(n, n, (0..n).map(|u| (u, u, deg[u] as f64)).collect());
    let combinatorial = degree.sub(&adjacency_matrix(g));
    let inv_sqrt: Vec<f64> = deg
        .iter()
        .map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
        .collect();
    let normalized = CsrMatrix::from_triplets(
        n,
        n,
        g.edges()
            .flat_map(|(u, v)| {
                let w = inv_sqrt[u] * inv_sqrt[v];
                [(u, v, w), (v, u, w)]
            })
            .collect(),
    );
    let identity = CsrMatrix::identity(n);
    LaplacianSet {
        combinatorial,
        symmetric: identity.sub(&normalized),
        random_walk: identity.sub(&build_vertex_transition(g).matrix),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn vertex_transition_examples() {
        let p = build_vertex_transition(&path3()).matrix;
        assert_eq!(p.get(0, 1), 1.0);
        assert_eq!((p.get(1, 0), p.get(1, 2)), (0.5, 0.5));
        assert_eq!(p.get(2, 1), 1.0);
        let t = build_vertex_transition(&triangle()).matrix;
        for u in 0..3 {
            for v in 0..3 {
                assert_eq!(t.get(u, v), if u == v { 0.0 } else { 0.5 });
            }
        }
        let star = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let s = build_vertex_transition(&star).matrix;
        assert!((1..4).all(|v| (s.get(0, v) - 1.0 / 3.0).abs() < 1e-15));
        assert!((1..4).all(|v| s.get(v, 0) == 1.0 && s.row(v).0.len() == 1));
        let iso = build_vertex_transition(&Graph::from_edges(3, [(0, 1)]).unwrap());
        assert_eq!(iso.zero_rows, vec![2]);
    }

    #[test]
    fn edge_ids() {
        let g = triangle();
        let e = DirectedEdges::new(&g);
        assert_eq!(e.len(), 6);
        assert_eq!(e.endpoints(0), (0, 1));
        assert_eq!(e.endpoints(1), (1, 0));
        for id in 0..6 {
            let (u, v) = e.endpoints(id);
            assert_eq!(e.id(&g, u, v), Some(id));
            assert_eq!(e.endpoints(DirectedEdges::reverse(id)), (v, u));
        }
    }

    #[test]
    fn single_edge_begrudging() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let m = build_edge_transition(&g, EdgeWalk::Begrudging).unwrap().matrix;
        let d = m.to_dense();
        assert_eq!(d.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            build_edge_transition(&g, EdgeWalk::NonBacktracking),
            Err(Error::DegreeTooLow { node: 0, degree: 1, required: 2 })
        ));
        let iso = Graph::from_edges(3, [(0, 1)]).unwrap();
        assert!(matches!(
            build_edge_transition(&iso, EdgeWalk::Begrudging),
            Err(Error::DegreeTooLow { node: 2, .. })
        ));
    }

    #[test]
    fn triangle_nonbacktracking_is_forced() {
        let g = triangle();
        let t = build_edge_transition(&g, EdgeWalk::NonBacktracking).unwrap();
        let ab = t.edges.id(&g, 0, 1).unwrap();
        let bc = t.edges.id(&g, 1, 2).unwrap();
        let (idx, val) = t.matrix.row(ab);
        assert_eq!(idx, &[bc]);
        assert_eq!(val, &[1.0]);
    }

    #[test]
    fn doubly_stochastic_detects_corruption() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap();
        let m = build_edge_transition(&g, EdgeWalk::Begrudging).unwrap().matrix;
        let ok = check_doubly_stochastic(&m);
        assert!(ok.doubly_stochastic, "{ok:?}");
        let mut t: Vec<_> = m.triplets().collect();
        t[0].2 = 0.0;
        let bad = CsrMatrix::from_triplets(m.rows(), m.cols(), t);
        let check = check_doubly_stochastic(&bad);
        assert!(!check.doubly_stochastic);
        assert!(check.max_deviation > 0.1);
    }

    #[test]
    fn laplacian_relations() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap();
        let l = laplacians(&g);
        assert_eq!(l.combinatorial.get(2, 2), 3.0);
        assert_eq!(l.combinatorial.get(2, 3), -1.0);
        let p = build_vertex_transition(&g).matrix;
        for u in 0..5 {
            for v in 0..5 {
                let id = if u == v { 1.0 } else { 0.0 };
                assert_eq!(l.random_walk.get(u, v), id - p.get(u, v));
                assert!((l.symmetric.get(u, v) - l.symmetric.get(v, u)).abs() < 1e-12);
            }
        }
    }
}
