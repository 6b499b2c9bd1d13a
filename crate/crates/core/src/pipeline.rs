//! Walks, SGNS embedding and k-means composed into one clustering call.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, KmeansParams};
use crate::embed::{train_sgns, SgnsParams};
use crate::error::{Error, Result};
use crate::graph::{Graph, LabelVector};
use crate::metrics::{report, MetricsReport};
use crate::par::Execution;
use crate::walks::{build_corpus, WalkParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub walk: WalkParams,
    pub embed: SgnsParams,
    pub cluster: KmeansParams,
    /// Score only nodes with at least one neighbor.
    pub mask_isolated: bool,
    /// Used for walk generation and k-means.
    #[serde(skip)]
    pub exec: Execution,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub walks: f64,
    pub embed: f64,
    pub cluster: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.walks + self.embed + self.cluster
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub labels: LabelVector,
    pub metrics: Option<MetricsReport>,
    pub timings: StageTimings,
    /// Nodes that never appeared in the corpus.
    pub untrained: usize,
}

/// Clusters `g` into `k` groups. When `truth` is given the labels are scored
/// against it.
pub fn run_pipeline(
    g: &Graph,
    k: usize,
    params: &PipelineParams,
    truth: Option<&LabelVector>,
) -> Result<PipelineOutput> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if let Some(t) = truth {
        if t.len() != g.n() {
            return Err(Error::LengthMismatch {
                left: t.len(),
                right: g.n(),
            });
        }
    }
    let mut timings = StageTimings::default();

    let t0 = Instant::now();
    let corpus = build_corpus(g, &params.walk, params.exec)?;
    timings.walks = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let emb = train_sgns(&corpus, g.n(), &params.embed)?;
    timings.embed = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let cluster = KmeansParams {
        k,
        exec: params.exec,
        ..params.cluster
    };
    let fit = kmeans(&emb, &cluster)?;
    timings.cluster = t0.elapsed().as_secs_f64();

    let metrics = truth
        .map(|t| {
            if params.mask_isolated {
                let keep: Vec<bool> = (0..g.n()).map(|u| g.deg(u) > 0).collect();
                report(&t.select(&keep), &fit.labels.select(&keep))
            } else {
                report(t, &fit.labels)
            }
        })
        .transpose()?;

    Ok(PipelineOutput {
        labels: fit.labels,
        metrics,
        timings,
        untrained: emb.trained_mask().iter().filter(|&&t| !t).count(),
    })
}
