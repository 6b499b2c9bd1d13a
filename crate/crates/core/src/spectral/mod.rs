//! Transition matrices of the three walks, their stationary distributions
//! and mixing rates.

pub mod chain;
pub mod eigen;
pub mod mixing;
pub mod sparse;
pub mod transition;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;
use crate::walks::step_begrudging;

pub use chain::{check_ergodicity, stationarity_residual, stationary_distribution, Ergodicity};
pub use eigen::{second_eigenvalue, EigenOptions, Operator, SecondEigenvalue};
pub use mixing::{measure_mixing_empirical, mixing_rates, DecayCurve, DecayOptions, MixingReport, Regime};
pub use sparse::CsrMatrix;
pub use transition::{
    adjacency_matrix, build_edge_transition, build_vertex_transition, check_doubly_stochastic, laplacians,
    DirectedEdges, EdgeTransitionMatrix, EdgeWalk, LaplacianSet, StochasticityCheck, VertexTransitionMatrix,
};

/// Directed-edge traversal counts of one begrudging walk of `steps` steps,
/// split into `batches` consecutive batches (`counts[batch][edge id]`).
/// The walk starts on a uniformly chosen directed edge.
pub fn begrudging_edge_visits(g: &Graph, steps: usize, batches: usize, seed: u64) -> Result<Vec<Vec<u64>>> {
    if g.min_degree() == 0 || g.m() == 0 {
        return Err(Error::param("begrudging walk needs every node to have an edge"));
    }
    let batches = batches.max(1);
    let edges = DirectedEdges::new(g);
    let mut rng = rng::stream(seed, &[0x6564_6765]);
    let (mut prev, mut cur) = edges.endpoints(rng.random_range(0..edges.len()));
    let mut counts = vec![vec![0u64; edges.len()]; batches];
    let per_batch = steps.div_ceil(batches);
    for step in 0..steps {
        let next = step_begrudging(g, cur, Some(prev), &mut rng).expect("positive degree");
        let id = edges.id(g, cur, next).expect("walk follows edges");
        counts[step / per_batch][id] += 1;
        prev = cur;
        cur = next;
    }
    Ok(counts)
}
