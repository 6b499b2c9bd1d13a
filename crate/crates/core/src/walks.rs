//! Walk corpora under the simple, non-backtracking and begrudgingly
//! backtracking policies, plus skip-gram co-occurrence counts.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::par::{self, Execution};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkPolicy {
    /// Uniform over all neighbors.
    Simple,
    /// Uniform over neighbors other than the previous node; stops at a
    /// node whose only neighbor is the previous one.
    #[serde(alias = "nbt")]
    NonBacktracking,
    /// Non-backtracking, except that it steps back when there is no other
    /// choice.
    Begrudging,
}

impl std::str::FromStr for WalkPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simple" | "bt" => Ok(WalkPolicy::Simple),
            "nonbacktracking" | "non-backtracking" | "nbt" => Ok(WalkPolicy::NonBacktracking),
            "begrudging" => Ok(WalkPolicy::Begrudging),
            other => Err(Error::param(format!("unknown walk policy `{other}`"))),
        }
    }
}

impl std::fmt::Display for WalkPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WalkPolicy::Simple => "simple",
            WalkPolicy::NonBacktracking => "nonbacktracking",
            WalkPolicy::Begrudging => "begrudging",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    /// Walks started from every node of positive degree.
    pub r: usize,
    /// Steps per walk; a full walk visits `l + 1` nodes.
    pub l: usize,
    pub policy: WalkPolicy,
    pub seed: u64,
}

impl WalkParams {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.l == 0 {
            return Err(Error::param("walk count r and length l must be at least 1"));
        }
        Ok(())
    }
}

/// Next node of a simple random walk, or `None` at an isolated node.
#[inline]
pub fn step_simple<R: Rng + ?Sized>(g: &Graph, current: usize, rng: &mut R) -> Option<usize> {
    let nbrs = g.neighbors(current);
    if nbrs.is_empty() {
        return None;
    }
    Some(nbrs[rng.random_range(0..nbrs.len())])
}

/// Uniform draw from the neighbors of `current` other than `previous`, by
/// rejection. `None` when no such neighbor exists.
#[inline]
fn step_excluding<R: Rng + ?Sized>(
    nbrs: &[usize],
    previous: Option<usize>,
    rng: &mut R,
) -> Option<usize> {
    match (nbrs.len(), previous) {
        (0, _) => None,
        (1, Some(p)) if nbrs[0] == p => None,
        (len, _) => loop {
            let next = nbrs[rng.random_range(0..len)];
            if Some(next) != previous {
                return Some(next);
            }
        },
    }
}

/// Next node of a non-backtracking walk. `None` means the walk ends here.
#[inline]
pub fn step_nonbacktracking<R: Rng + ?Sized>(
    g: &Graph,
    current: usize,
    previous: Option<usize>,
    rng: &mut R,
) -> Option<usize> {
    step_excluding(g.neighbors(current), previous, rng)
}

/// Next node of a begrudgingly-backtracking walk: non-backtracking while
/// possible, otherwise back to `previous`. `None` only at isolated nodes.
#[inline]
pub fn step_begrudging<R: Rng + ?Sized>(
    g: &Graph,
    current: usize,
    previous: Option<usize>,
    rng: &mut R,
) -> Option<usize> {
    let nbrs = g.neighbors(current);
    if nbrs.is_empty() {
        return None;
    }
    step_excluding(nbrs, previous, rng).or(previous)
}

/// A walk of at most `l` steps from `start` (at most `l + 1` nodes).
pub fn walk<R: Rng + ?Sized>(
    g: &Graph,
    start: usize,
    l: usize,
    policy: WalkPolicy,
    rng: &mut R,
) -> Vec<usize> {
    let mut out = Vec::with_capacity(l + 1);
    out.push(start);
    let mut previous = None;
    let mut current = start;
    for _ in 0..l {
        let next = match policy {
            WalkPolicy::Simple => step_simple(g, current, rng),
            WalkPolicy::NonBacktracking => step_nonbacktracking(g, current, previous, rng),
            WalkPolicy::Begrudging => step_begrudging(g, current, previous, rng),
        };
        let Some(next) = next else { break };
        out.push(next);
        previous = Some(current);
        current = next;
    }
    out
}

/// Walk "sentences" in `(start node, repetition)` order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WalkCorpus {
    pub sentences: Vec<Vec<usize>>,
}

impl WalkCorpus {
    pub fn new(sentences: Vec<Vec<usize>>) -> Self {
        WalkCorpus { sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.iter().all(Vec::is_empty)
    }

    pub fn total_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn max_node(&self) -> Option<usize> {
        self.sentences.iter().flatten().copied().max()
    }

    /// Occurrences of each node id below `n`.
    pub fn token_counts(&self, n: usize) -> Vec<u64> {
        let mut counts = vec![0u64; n];
        for &t in self.sentences.iter().flatten() {
            if t < n {
                counts[t] += 1;
            }
        }
        counts
    }

    /// Renames every token `t` to `perm[t]`.
    pub fn relabel(&self, perm: &[usize]) -> WalkCorpus {
        WalkCorpus::new(
            self.sentences
                .iter()
                .map(|s| s.iter().map(|&t| perm[t]).collect())
                .collect(),
        )
    }
}

/// Runs `r` walks of `l` steps from every node of positive degree.
///
/// Each walk draws from its own stream keyed by `(seed, node, repetition)`,
/// so the corpus is identical under sequential and parallel execution.
pub fn build_corpus(g: &Graph, params: &WalkParams, exec: Execution) -> Result<WalkCorpus> {
    params.validate()?;
    let WalkParams { r, l, policy, seed } = *params;
    let per_node = par::map_range(exec, g.n(), |v| {
        if g.deg(v) == 0 {
            return Vec::new();
        }
        (0..r)
            .map(|t| {
                let mut rng = rng::stream(seed, &[v as u64, t as u64]);
                walk(g, v, l, policy, &mut rng)
            })
            .collect::<Vec<_>>()
    });
    Ok(WalkCorpus::new(per_node.into_iter().flatten().collect()))
}

/// Symmetric skip-gram co-occurrence counts within a fixed window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceMatrix {
    counts: HashMap<(usize, usize), u64>,
    pub window: usize,
}

impl CooccurrenceMatrix {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts.get(&(i, j)).copied().unwrap_or(0)
    }

    /// Number of nonzero `(i, j)` entries.
    pub fn nnz(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Nonzero entries sorted by `(i, j)`.
    pub fn entries(&self) -> Vec<((usize, usize), u64)> {
        let mut e: Vec<_> = self.counts.iter().map(|(&k, &v)| (k, v)).collect();
        e.sort_unstable();
        e
    }
}

/// Counts ordered position pairs `(p, q)`, `0 < |p - q| <= w`, within each
/// sentence.
pub fn build_cooccurrence(corpus: &WalkCorpus, w: usize) -> Result<CooccurrenceMatrix> {
    if w == 0 {
        return Err(Error::param("window must be at least 1"));
    }
    let mut counts: HashMap<(usize, usize), u64> = HashMap::new();
    for s in &corpus.sentences {
        for (p, &i) in s.iter().enumerate() {
            for &j in &s[p + 1..s.len().min(p + w + 1)] {
                *counts.entry((i, j)).or_default() += 1;
                *counts.entry((j, i)).or_default() += 1;
            }
        }
    }
    Ok(CooccurrenceMatrix { counts, window: w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, SbmParams};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    fn edge() -> Graph {
        Graph::from_edges(2, [(0, 1)]).unwrap()
    }

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn star(leaves: usize) -> Graph {
        Graph::from_edges(leaves + 1, (1..=leaves).map(|i| (0, i))).unwrap()
    }

    #[test]
    fn simple_step_forced_and_isolated() {
        let mut r = rng();
        assert_eq!(step_simple(&edge(), 0, &mut r), Some(1));
        assert_eq!(step_simple(&Graph::empty(1), 0, &mut r), None);
    }

    #[test]
    fn simple_step_uniform_on_star() {
        let g = star(4);
        let mut r = rng();
        let draws = 100_000;
        let mut counts = [0f64; 5];
        for _ in 0..draws {
            counts[step_simple(&g, 0, &mut r).unwrap()] += 1.0;
        }
        assert_eq!(counts[0], 0.0);
        // Chi-square with 3 degrees of freedom; 16.27 is the 0.999 quantile.
        let expected = draws as f64 / 4.0;
        let chi2: f64 = counts[1..].iter().map(|c| (c - expected).powi(2) / expected).sum();
        assert!(chi2 < 16.27, "chi2 = {chi2}");
        let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
        for c in &counts[1..] {
            assert!((c - expected).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn nonbacktracking_steps() {
        let mut r = rng();
        assert_eq!(step_nonbacktracking(&edge(), 1, Some(0), &mut r), None);
        for _ in 0..100 {
            assert_eq!(step_nonbacktracking(&triangle(), 1, Some(0), &mut r), Some(2));
        }
        let g = star(4);
        let mut seen = [false; 5];
        for _ in 0..1000 {
            seen[step_nonbacktracking(&g, 0, None, &mut r).unwrap()] = true;
        }
        assert_eq!(seen, [false, true, true, true, true]);
    }

    #[test]
    fn begrudging_steps() {
        let mut r = rng();
        assert_eq!(step_begrudging(&edge(), 1, Some(0), &mut r), Some(0));
        assert_eq!(step_begrudging(&triangle(), 1, Some(0), &mut r), Some(2));
        assert_eq!(step_begrudging(&Graph::empty(2), 0, None, &mut r), None);
        assert_eq!(walk(&edge(), 0, 5, WalkPolicy::Begrudging, &mut r), vec![0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn corpus_on_single_edge() {
        let p = WalkParams { r: 2, l: 3, policy: WalkPolicy::Begrudging, seed: 0 };
        let c = build_corpus(&edge(), &p, Execution::Sequential).unwrap();
        assert_eq!(
            c.sentences,
            vec![vec![0, 1, 0, 1], vec![0, 1, 0, 1], vec![1, 0, 1, 0], vec![1, 0, 1, 0]]
        );
    }

    #[test]
    fn isolated_node_never_appears() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2)]).unwrap();
        for policy in [WalkPolicy::Simple, WalkPolicy::NonBacktracking, WalkPolicy::Begrudging] {
            let p = WalkParams { r: 5, l: 8, policy, seed: 3 };
            let c = build_corpus(&g, &p, Execution::Sequential).unwrap();
            assert_eq!(c.len(), 15);
            assert!(c.sentences.iter().flatten().all(|&t| t != 3));
        }
    }

    #[test]
    fn corpus_counts() {
        let g = crate::graph::random_regular(100, 3, 1).unwrap();
        let p = WalkParams { r: 10, l: 5, policy: WalkPolicy::Simple, seed: 0 };
        let c = build_corpus(&g, &p, Execution::Sequential).unwrap();
        assert_eq!(c.len(), 1000);
        assert!(c.sentences.iter().all(|s| s.len() == 6));
    }

    #[test]
    fn corpus_independent_of_execution() {
        let (g, _) = generate_sbm(&SbmParams { n: 300, k: 2, c: 4.0, lambda: 0.5, seed: 2 }).unwrap();
        let p = WalkParams { r: 3, l: 12, policy: WalkPolicy::Begrudging, seed: 8 };
        let a = build_corpus(&g, &p, Execution::Sequential).unwrap();
        let b = build_corpus(&g, &p, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_nonbacktracking_walks_are_kept() {
        // Path 0-1-2: walks from 0 must stop at 2.
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let p = WalkParams { r: 1, l: 10, policy: WalkPolicy::NonBacktracking, seed: 0 };
        let c = build_corpus(&g, &p, Execution::Sequential).unwrap();
        assert_eq!(c.sentences[0], vec![0, 1, 2]);
        assert!(c.sentences.iter().all(|s| s.len() >= 2));
    }

    #[test]
    fn cooccurrence_windows() {
        let corpus = WalkCorpus::new(vec![vec![0, 1, 2]]);
        let w1 = build_cooccurrence(&corpus, 1).unwrap();
        assert_eq!((w1.get(0, 1), w1.get(1, 0), w1.get(1, 2), w1.get(2, 1)), (1, 1, 1, 1));
        assert_eq!(w1.get(0, 2), 0);
        let w2 = build_cooccurrence(&corpus, 2).unwrap();
        assert_eq!((w2.get(0, 2), w2.get(2, 0)), (1, 1));
        assert!(build_cooccurrence(&corpus, 0).is_err());
    }

    #[test]
    fn simple_walk_visits_follow_stationary_distribution() {
        // Triangle with a pendant path: connected, non-bipartite, uneven degrees.
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)]).unwrap();
        let mut r = rng();
        let steps = 400_000;
        let w = walk(&g, 0, steps, WalkPolicy::Simple, &mut r);
        let mut freq = vec![0f64; 5];
        for &v in &w[1..] {
            freq[v] += 1.0 / steps as f64;
        }
        let vol = g.volume() as f64;
        for v in 0..5 {
            let pi = g.neighbors(v).len() as f64 / vol;
            assert!((freq[v] - pi).abs() < 0.01, "node {v}: {} vs {pi}", freq[v]);
        }
    }

    fn brute_cooccurrence(corpus: &WalkCorpus, w: usize) -> HashMap<(usize, usize), u64> {
        let mut m = HashMap::new();
        for s in &corpus.sentences {
            for p in 0..s.len() {
                for q in 0..s.len() {
                    if p != q && p.abs_diff(q) <= w {
                        *m.entry((s[p], s[q])).or_insert(0) += 1;
                    }
                }
            }
        }
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn cooccurrence_matches_brute_force(
            sentences in prop::collection::vec(prop::collection::vec(0usize..6, 0..12), 0..6),
            w in 1usize..5,
        ) {
            let corpus = WalkCorpus::new(sentences);
            let fast = build_cooccurrence(&corpus, w).unwrap();
            let brute = brute_cooccurrence(&corpus, w);
            prop_assert_eq!(fast.nnz(), brute.len());
            for (&(i, j), &c) in &brute {
                prop_assert_eq!(fast.get(i, j), c);
                prop_assert_eq!(fast.get(j, i), c);
            }
        }

        #[test]
        fn walks_respect_policy(n in 5usize..120, c in 1.0f64..6.0, seed in any::<u64>(),
                                l in 1usize..30) {
            prop_assume!(c <= n as f64);
            let (g, _) = generate_sbm(&SbmParams { n, k: 2, c, lambda: 0.5, seed }).unwrap();
            for policy in [WalkPolicy::Simple, WalkPolicy::NonBacktracking, WalkPolicy::Begrudging] {
                let p = WalkParams { r: 2, l, policy, seed };
                let corpus = build_corpus(&g, &p, Execution::Sequential).unwrap();
                for s in &corpus.sentences {
                    prop_assert!(s.len() <= l + 1);
                    prop_assert!(s.len() >= 2);
                    for w in s.windows(2) {
                        prop_assert!(g.has_edge(w[0], w[1]));
                    }
                    for w in s.windows(3) {
                        if w[0] == w[2] {
                            match policy {
                                WalkPolicy::NonBacktracking => prop_assert!(false, "backtrack in NBT walk"),
                                WalkPolicy::Begrudging => prop_assert_eq!(g.neighbors(w[1]).len(), 1),
                                WalkPolicy::Simple => {}
                            }
                        }
                    }
                    if policy == WalkPolicy::Begrudging {
                        prop_assert_eq!(s.len(), l + 1);
                    }
                }
            }
        }
    }
}
