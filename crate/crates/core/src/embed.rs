//! Skip-gram with negative sampling over a walk corpus.
//!
//! Training follows the word2vec recipe with a fixed window: every center
//! position is paired with every context position at most `window` away,
//! and each positive pair is contrasted with `negatives` nodes drawn from
//! the unigram distribution raised to the 3/4 power. Node ids are mapped
//! to vocabulary slots in order of first appearance, so relabeling the
//! corpus permutes the output rows and changes nothing else.

use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};

use rand::distr::Distribution;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rng;
use crate::walks::WalkCorpus;

/// Sigmoid inputs are clamped to `[-MAX_EXP, MAX_EXP]`.
pub const MAX_EXP: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// Single-threaded and bit-reproducible for a fixed seed.
    #[default]
    Sequential,
    /// Lock-free updates from several threads over sentence shards. Racing
    /// writes may drop updates.
    Hogwild,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgnsParams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub seed: u64,
    pub mode: TrainMode,
}

impl Default for SgnsParams {
    fn default() -> Self {
        SgnsParams {
            dim: 50,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr_initial: 0.025,
            lr_final: 0.0001,
            seed: 0,
            mode: TrainMode::Sequential,
        }
    }
}

impl SgnsParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 || self.epochs == 0 {
            return Err(Error::param(
                "dim, window, negatives and epochs must all be at least 1",
            ));
        }
        if !(self.lr_final > 0.0 && self.lr_initial >= self.lr_final) {
            return Err(Error::param(format!(
                "learning rates must satisfy lr_initial >= lr_final > 0, got {} and {}",
                self.lr_initial, self.lr_final
            )));
        }
        Ok(())
    }

    fn lr_at(&self, progress: f64) -> f32 {
        let p = progress.clamp(0.0, 1.0);
        (self.lr_initial - (self.lr_initial - self.lr_final) * p) as f32
    }
}

/// Row-major `n x dim` node vectors. Rows of nodes that never occurred in
/// the training corpus are zero and flagged untrained.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    trained: Vec<bool>,
}

impl EmbeddingMatrix {
    pub fn new(n: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            dim,
            data: vec![0.0; n * dim],
            trained: vec![false; n],
        }
    }

    pub fn n(&self) -> usize {
        self.trained.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Overwrites row `i` and marks it trained.
    pub fn set_row(&mut self, i: usize, values: &[f32]) {
        self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(values);
        self.trained[i] = true;
    }

    pub fn is_trained(&self, i: usize) -> bool {
        self.trained[i]
    }

    pub fn trained_mask(&self) -> &[bool] {
        &self.trained
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn cosine(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row(i), self.row(j));
        let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
        let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }
}

/// Per-epoch mean loss over positive pairs (positive term plus its
/// negatives).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainStats {
    pub epoch_loss: Vec<f64>,
}

/// Logistic function with the input clamped to `[-6, 6]`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x.clamp(-MAX_EXP, MAX_EXP)).exp())
}

#[inline]
fn sigmoid_f32(x: f32) -> f32 {
    1.0 / (1.0 + (-x.clamp(-MAX_EXP as f32, MAX_EXP as f32)).exp())
}

/// `ln σ(x)` without clamping, stable for large `|x|`.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// SGNS objective for one positive pair and its negatives:
/// `ln σ(c·o) + Σ ln σ(−c·n)`.
pub fn pair_objective(center: &[f64], context: &[f64], negatives: &[Vec<f64>]) -> f64 {
    log_sigmoid(dot(center, context))
        + negatives
            .iter()
            .map(|n| log_sigmoid(-dot(center, n)))
            .sum::<f64>()
}

/// Gradient of [`pair_objective`] with respect to each vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn pair_gradient(center: &[f64], context: &[f64], negatives: &[Vec<f64>]) -> PairGradient {
    let g_pos = 1.0 - sigmoid(dot(center, context));
    let mut g_center: Vec<f64> = context.iter().map(|&v| g_pos * v).collect();
    let g_context: Vec<f64> = center.iter().map(|&u| g_pos * u).collect();
    let mut g_negs = Vec::with_capacity(negatives.len());
    for n in negatives {
        let g = -sigmoid(dot(center, n));
        for (gc, &v) in g_center.iter_mut().zip(n) {
            *gc += g * v;
        }
        g_negs.push(center.iter().map(|&u| g * u).collect());
    }
    PairGradient {
        center: g_center,
        context: g_context,
        negatives: g_negs,
    }
}

/// Eight independent partial sums so the loop vectorizes.
#[inline]
fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let (ac, bc) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ac.remainder().iter().zip(bc.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ac.zip(bc) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f32>() + tail
}

/// One logistic term of the objective: moves `output` along its gradient
/// and accumulates the center-vector gradient (scaled by `lr`) into `grad`.
/// Returns the term's loss when `TRACK` is set.
#[inline(always)]
fn logistic_term<const TRACK: bool>(
    center: &[f32],
    output: &mut [f32],
    label: f32,
    lr: f32,
    grad: &mut [f32],
) -> f64 {
    let s = sigmoid_f32(dot_f32(center, output));
    let g = (label - s) * lr;
    for ((acc, o), &c) in grad.iter_mut().zip(output.iter_mut()).zip(center) {
        *acc += g * *o;
        *o += g * c;
    }
    if TRACK {
        let p = if label > 0.5 { s } else { 1.0 - s };
        -(p.max(f32::MIN_POSITIVE) as f64).ln()
    } else {
        0.0
    }
}

/// Applies one SGD step for a positive pair and explicit negatives to
/// `center` and `outputs` (`outputs[0]` is the context). Exposed for
/// gradient checks; training uses the same kernel.
pub fn sgd_step(center: &mut [f32], outputs: &mut [Vec<f32>], lr: f32) {
    let mut grad = vec![0.0f32; center.len()];
    for (k, out) in outputs.iter_mut().enumerate() {
        let label = if k == 0 { 1.0 } else { 0.0 };
        logistic_term::<false>(center, out, label, lr, &mut grad);
    }
    for (c, g) in center.iter_mut().zip(&grad) {
        *c += g;
    }
}

/// Corpus re-indexed by first appearance, plus the noise distribution.
struct Vocab {
    /// vocabulary slot -> node id
    nodes: Vec<usize>,
    sentences: Vec<Vec<u32>>,
    noise: WeightedAliasIndex<f64>,
    tokens: usize,
}

impl Vocab {
    fn build(corpus: &WalkCorpus, n: usize) -> Result<Self> {
        let mut slot = vec![u32::MAX; n];
        let mut nodes = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        let mut sentences = Vec::with_capacity(corpus.len());
        for s in &corpus.sentences {
            let mut out = Vec::with_capacity(s.len());
            for &t in s {
                if t >= n {
                    return Err(Error::NodeOutOfRange { node: t, n });
                }
                if slot[t] == u32::MAX {
                    slot[t] = nodes.len() as u32;
                    nodes.push(t);
                    counts.push(0);
                }
                counts[slot[t] as usize] += 1;
                out.push(slot[t]);
            }
            if !out.is_empty() {
                sentences.push(out);
            }
        }
        if nodes.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let noise = WeightedAliasIndex::new(weights)
            .map_err(|e| Error::param(format!("noise distribution: {e}")))?;
        let tokens = sentences.iter().map(Vec::len).sum();
        Ok(Vocab {
            nodes,
            sentences,
            noise,
            tokens,
        })
    }
}

/// Trains node vectors on `corpus`; see [`train_sgns_with_stats`].
pub fn train_sgns(corpus: &WalkCorpus, n: usize, params: &SgnsParams) -> Result<EmbeddingMatrix> {
    Ok(train_impl::<false>(corpus, n, params)?.0)
}

/// Trains node vectors and records the mean loss of every epoch.
///
/// Input vectors start uniform in `[-0.5/dim, 0.5/dim]`, context vectors at
/// zero, and the learning rate decays linearly from `lr_initial` to
/// `lr_final` over all epochs. The returned matrix holds the input vectors.
pub fn train_sgns_with_stats(
    corpus: &WalkCorpus,
    n: usize,
    params: &SgnsParams,
) -> Result<(EmbeddingMatrix, TrainStats)> {
    train_impl::<true>(corpus, n, params)
}

fn train_impl<const TRACK: bool>(
    corpus: &WalkCorpus,
    n: usize,
    params: &SgnsParams,
) -> Result<(EmbeddingMatrix, TrainStats)> {
    params.validate()?;
    if let Some(max) = corpus.max_node() {
        if max >= n {
            return Err(Error::NodeOutOfRange { node: max, n });
        }
    }
    let vocab = Vocab::build(corpus, n)?;
    let dim = params.dim;
    let v = vocab.nodes.len();

    let mut init_rng = rng::stream(params.seed, &[0x696e_6974]);
    let half = 0.5 / dim as f32;
    let mut input: Vec<f32> = (0..v * dim)
        .map(|_| init_rng.random_range(-half..half))
        .collect();
    let mut output = vec![0.0f32; v * dim];

    let threads = par::num_threads(Execution::Parallel);
    let stats = if params.mode == TrainMode::Hogwild && threads > 1 {
        train_hogwild::<TRACK>(&vocab, params, &mut input, &mut output, threads)
    } else {
        train_sequential::<TRACK>(&vocab, params, &mut input, &mut output)
    };

    let mut emb = EmbeddingMatrix::new(n, dim);
    for (s, &node) in vocab.nodes.iter().enumerate() {
        emb.set_row(node, &input[s * dim..(s + 1) * dim]);
    }
    Ok((emb, stats))
}

fn train_sequential<const TRACK: bool>(
    vocab: &Vocab,
    params: &SgnsParams,
    input: &mut [f32],
    output: &mut [f32],
) -> TrainStats {
    let dim = params.dim;
    let w = params.window;
    let total = (params.epochs * vocab.tokens) as f64;
    let mut grad = vec![0.0f32; dim];
    let mut stats = TrainStats::default();
    let mut processed = 0usize;
    for epoch in 0..params.epochs {
        let mut rng = rng::stream(params.seed, &[0x6570_6f63, epoch as u64]);
        let (mut loss, mut pairs) = (0.0f64, 0u64);
        for s in &vocab.sentences {
            let lr = params.lr_at(processed as f64 / total);
            processed += s.len();
            for (p, &ci) in s.iter().enumerate() {
                let lo = p.saturating_sub(w);
                let hi = (p + w + 1).min(s.len());
                let ci = ci as usize;
                for (q, &cj) in s[lo..hi].iter().enumerate() {
                    if lo + q == p {
                        continue;
                    }
                    grad.fill(0.0);
                    let center = &input[ci * dim..(ci + 1) * dim];
                    let cj = cj as usize;
                    loss += logistic_term::<TRACK>(
                        center,
                        &mut output[cj * dim..(cj + 1) * dim],
                        1.0,
                        lr,
                        &mut grad,
                    );
                    for _ in 0..params.negatives {
                        let neg = vocab.noise.sample(&mut rng);
                        if neg == cj {
                            continue;
                        }
                        loss += logistic_term::<TRACK>(
                            center,
                            &mut output[neg * dim..(neg + 1) * dim],
                            0.0,
                            lr,
                            &mut grad,
                        );
                    }
                    for (c, g) in input[ci * dim..(ci + 1) * dim].iter_mut().zip(&grad) {
                        *c += g;
                    }
                    pairs += 1;
                }
            }
        }
        if TRACK {
            stats.epoch_loss.push(loss / pairs.max(1) as f64);
        }
    }
    stats
}

#[inline]
fn load(src: &[AtomicU32], row: usize, buf: &mut [f32]) {
    let d = buf.len();
    for (b, a) in buf.iter_mut().zip(&src[row * d..(row + 1) * d]) {
        *b = f32::from_bits(a.load(Ordering::Relaxed));
    }
}

#[inline]
fn store(dst: &[AtomicU32], row: usize, buf: &[f32]) {
    let d = buf.len();
    for (b, a) in buf.iter().zip(&dst[row * d..(row + 1) * d]) {
        a.store(b.to_bits(), Ordering::Relaxed);
    }
}

fn train_hogwild<const TRACK: bool>(
    vocab: &Vocab,
    params: &SgnsParams,
    input: &mut [f32],
    output: &mut [f32],
    threads: usize,
) -> TrainStats {
    let dim = params.dim;
    let w = params.window;
    let total = (params.epochs * vocab.tokens) as f64;
    let shared_in: Vec<AtomicU32> = input.iter().map(|x| AtomicU32::new(x.to_bits())).collect();
    let shared_out: Vec<AtomicU32> = output.iter().map(|x| AtomicU32::new(x.to_bits())).collect();
    let processed = AtomicUsize::new(0);
    let shard = vocab.sentences.len().div_ceil(threads);

    let mut stats = TrainStats::default();
    for epoch in 0..params.epochs {
        let per_shard = par::map_range(Execution::Parallel, threads, |t| {
            let mut rng = rng::stream(params.seed, &[0x686f_6777, epoch as u64, t as u64]);
            let mut center = vec![0.0f32; dim];
            let mut out = vec![0.0f32; dim];
            let mut grad = vec![0.0f32; dim];
            let (mut loss, mut pairs) = (0.0f64, 0u64);
            let begin = (t * shard).min(vocab.sentences.len());
            let end = ((t + 1) * shard).min(vocab.sentences.len());
            for s in &vocab.sentences[begin..end] {
                let done = processed.fetch_add(s.len(), Ordering::Relaxed);
                let lr = params.lr_at(done as f64 / total);
                for (p, &ci) in s.iter().enumerate() {
                    let lo = p.saturating_sub(w);
                    let hi = (p + w + 1).min(s.len());
                    let ci = ci as usize;
                    for (q, &cj) in s[lo..hi].iter().enumerate() {
                        if lo + q == p {
                            continue;
                        }
                        load(&shared_in, ci, &mut center);
                        grad.fill(0.0);
                        let cj = cj as usize;
                        load(&shared_out, cj, &mut out);
                        loss += logistic_term::<TRACK>(&center, &mut out, 1.0, lr, &mut grad);
                        store(&shared_out, cj, &out);
                        for _ in 0..params.negatives {
                            let neg = vocab.noise.sample(&mut rng);
                            if neg == cj {
                                continue;
                            }
                            load(&shared_out, neg, &mut out);
                            loss += logistic_term::<TRACK>(&center, &mut out, 0.0, lr, &mut grad);
                            store(&shared_out, neg, &out);
                        }
                        for (c, g) in center.iter_mut().zip(&grad) {
                            *c += g;
                        }
                        store(&shared_in, ci, &center);
                        pairs += 1;
                    }
                }
            }
            (loss, pairs)
        });
        if TRACK {
            let (loss, pairs) = per_shard
                .iter()
                .fold((0.0, 0u64), |(l, p), &(dl, dp)| (l + dl, p + dp));
            stats.epoch_loss.push(loss / pairs.max(1) as f64);
        }
    }
    for (x, a) in input.iter_mut().zip(&shared_in) {
        *x = f32::from_bits(a.load(Ordering::Relaxed));
    }
    for (x, a) in output.iter_mut().zip(&shared_out) {
        *x = f32::from_bits(a.load(Ordering::Relaxed));
    }
    stats
}
