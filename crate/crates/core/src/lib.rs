//! Graph clustering with random-walk node embeddings.
//!
//! The pipeline follows VEC and its non-backtracking variant VEC-NBT:
//! generate walk "sentences" over a graph, embed the nodes with skip-gram
//! negative sampling, then cluster the embedding rows with k-means. The
//! [`spectral`] module builds the vertex and directed-edge transition
//! matrices behind the walks and measures their mixing rates.
//!
//! Data-parallel inner loops (walk generation, k-means assignment, sparse
//! matrix-vector products, sweep cells) run on rayon when the `parallel`
//! feature is enabled and fall back to sequential loops otherwise. Results
//! are identical in both modes except for hogwild SGNS training.

pub mod cluster;
pub mod embed;
pub mod error;
pub mod graph;
pub mod io;
pub mod lsap;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod plot;
pub mod rng;
pub mod spectral;
pub mod sweep;
pub mod walks;











pub use cluster::{kmeans, KmeansParams, KmeansResult};
pub use embed::{sigmoid, train_sgns, EmbeddingMatrix, SgnsParams, TrainMode};
pub use error::{Error, Result};
pub use graph::{generate_sbm, Graph, LabelVector, SbmParams};
pub use metrics::{ccr, nmi, MetricsReport};
pub use par::Execution;
pub use pipeline::{run_pipeline, PipelineOutput, PipelineParams};
pub use walks::{build_corpus, build_cooccurrence, WalkCorpus, WalkParams, WalkPolicy};
pub use plot::{emit_plot, PlotSpec};
pub use sweep::{run_sweep, ExperimentConfig, ResultRow};
