//! Clustering scores against ground truth: correct classification rate
//! under the best one-to-one label matching, and normalized mutual
//! information.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::LabelVector;
use crate::lsap;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub ccr: f64,
    pub nmi: f64,
    /// `assignment[predicted] = true` label.
    pub assignment: Vec<usize>,
    /// `confusion[t][p]`: nodes with true label `t` predicted as `p`,
    /// padded square.
    pub confusion: Vec<Vec<u64>>,
}

/// Square contingency table, `k = max(K_true, K_pred)`.
pub fn confusion_matrix(truth: &LabelVector, pred: &LabelVector) -> Result<Vec<Vec<u64>>> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    let k = truth.num_classes().max(pred.num_classes());
    let mut m = vec![vec![0u64; k]; k];
    for (&t, &p) in truth.0.iter().zip(&pred.0) {
        m[t][p] += 1;
    }
    Ok(m)
}

/// Fraction of nodes whose predicted cluster maps to their true cluster
/// under the count-maximizing matching, plus that matching
/// (`assignment[predicted] = true`).
pub fn ccr(truth: &LabelVector, pred: &LabelVector) -> Result<(f64, Vec<usize>)> {
    let conf = confusion_matrix(truth, pred)?;
    let k = conf.len();
    if k == 0 {
        return Ok((0.0, Vec::new()));
    }
    // Rows are predicted labels, columns true labels.
    let weight: Vec<f64> = (0..k)
        .flat_map(|p| conf.iter().map(move |row| row[p] as f64))
        .collect();
    let assignment = lsap::solve_max(&weight, k);
    let correct: u64 = assignment.iter().enumerate().map(|(p, &t)| conf[t][p]).sum();
    Ok((correct as f64 / truth.len() as f64, assignment))
}

fn entropy(counts: impl Iterator<Item = u64>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// `(H(X) + H(Y) - H(X,Y)) / sqrt(H(X) H(Y))` from the empirical label
/// distributions. If either labeling has zero entropy the result is 1 when
/// both induce the same partition and 0 otherwise.
pub fn nmi(truth: &LabelVector, pred: &LabelVector) -> Result<f64> {
    let conf = confusion_matrix(truth, pred)?;
    let total = truth.len() as f64;
    if truth.is_empty() {
        return Ok(1.0);
    }
    let hx = entropy(conf.iter().map(|r| r.iter().sum()), total);
    let hy = entropy(
        (0..conf.len()).map(|p| conf.iter().map(|r| r[p]).sum()),
        total,
    );
    let hxy = entropy(conf.iter().flatten().copied(), total);
    if hx == 0.0 || hy == 0.0 {
        let same = hx == 0.0 && hy == 0.0;
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok(((hx + hy - hxy) / (hx * hy).sqrt()).clamp(0.0, 1.0))
}

pub fn report(truth: &LabelVector, pred: &LabelVector) -> Result<MetricsReport> {
    let (ccr, assignment) = ccr(truth, pred)?;
    Ok(MetricsReport {
        ccr,
        nmi: nmi(truth, pred)?,
        assignment,
        confusion: confusion_matrix(truth, pred)?,
    })
}
