//! Second eigenvalues of adjacency and transition matrices.
//!
//! Below `dense_cutoff` rows the full spectrum comes from a dense solver.
//! Larger matrices use block subspace iteration with Rayleigh–Ritz
//! extraction, deflating the known leading eigenvector.

use nalgebra::{Complex, DMatrix, Schur, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    /// Symmetric adjacency matrix; the leading eigenvalue is the largest.
    Adjacency,
    /// Row-stochastic matrix; the leading eigenvalue is 1.
    Transition,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub dense_cutoff: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub block: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            dense_cutoff: 2000,
            tol: 1e-8,
            max_iter: 50_000,
            block: 8,
            seed: 0,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondEigenvalue {
    /// Adjacency: the second-largest eigenvalue. Transition: the
    /// second-largest-modulus eigenvalue when it is real.
    pub signed: Option<f64>,
    /// Largest modulus over the spectrum with the leading eigenvalue removed.
    pub modulus: f64,
}

/// Full spectrum of a small matrix. Symmetric input yields real values in
/// descending order; otherwise the values are sorted by decreasing modulus.
pub fn dense_spectrum(m: &CsrMatrix, symmetric: bool) -> Result<Vec<Complex<f64>>> {
    let d = m.to_dense();
    if symmetric {
        let mut ev: Vec<f64> = SymmetricEigen::new(d).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        Ok(ev.into_iter().map(|x| Complex::new(x, 0.0)).collect())
    } else {
        let mut ev = general_eigenvalues(d)?;
        ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        Ok(ev)
    }
}

/// Eigenvalues of a general square matrix via the real Schur form.
///
/// QR iteration at machine precision can stall on some stochastic
/// matrices, so each attempt is capped and the tolerance loosened.
pub fn general_eigenvalues(d: DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let cap = 1000 + 100 * d.nrows();
    for eps in [f64::EPSILON, 1e-14, 1e-12] {
        if let Some(schur) = Schur::try_new(d.clone(), eps, cap) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(Error::NoConvergence {
        what: "Schur decomposition",
        iterations: cap,
        residual: 1e-12,
    })
}

fn real_if_close(z: Complex<f64>) -> Option<f64> {
    (z.im.abs() <= 1e-9 * z.norm().max(1.0)).then_some(z.re)
}

pub fn second_eigenvalue(m: &CsrMatrix, which: Operator, opts: &EigenOptions) -> Result<SecondEigenvalue> {
    let n = m.rows();
    if n < 2 || m.cols() != n {
        return Err(Error::param("second eigenvalue needs a square matrix of dimension >= 2"));
    }
    match (which, n < opts.dense_cutoff) {
        (Operator::Adjacency, true) => {
            let ev: Vec<f64> = dense_spectrum(m, true)?.iter().map(|z| z.re).collect();
            Ok(SecondEigenvalue {
                signed: Some(ev[1]),
                modulus: ev[1].abs().max(ev[n - 1].abs()),
            })
        }
        (Operator::Transition, true) => {
            let mut ev = dense_spectrum(m, false)?;
            let lead = ev
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - 1.0).norm().total_cmp(&(b.1 - 1.0).norm()))
                .map(|(i, _)| i)
                .unwrap();
            ev.remove(lead);
            let second = ev[0];
            Ok(SecondEigenvalue {
                signed: real_if_close(second),
                modulus: second.norm(),
            })
        }
        (Operator::Adjacency, false) => {
            let shift = m
                .row_sums()
                .iter()
                .map(|s| s.abs())
                .fold(0.0, f64::max);
            let top = subspace_ritz(m, shift, 1.0, None, true, opts)?;
            let bottom = subspace_ritz(m, shift, -1.0, None, true, opts)?;
            let lambda2 = top[1].re - shift;
            let lambda_min = shift - bottom[0].re;
            Ok(SecondEigenvalue {
                signed: Some(lambda2),
                modulus: lambda2.abs().max(lambda_min.abs()),
            })
        }
        (Operator::Transition, false) => {
            let unit = vec![1.0 / (n as f64).sqrt(); n];
            let t = m.transpose();
            let ritz = subspace_ritz(&t, 0.0, 1.0, Some(&unit), false, opts)?;
            Ok(SecondEigenvalue {
                signed: real_if_close(ritz[0]),
                modulus: ritz[0].norm(),
            })
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram–Schmidt, twice, against `deflate` and then each other.
fn orthonormalize<R: Rng>(block: &mut [Vec<f64>], deflate: Option<&[f64]>, rng: &mut R) {
    for i in 0..block.len() {
        for _pass in 0..2 {
            if let Some(d) = deflate {
                let c = dot(&block[i], d);
                block[i].iter_mut().zip(d).for_each(|(x, y)| *x -= c * y);
            }
            for j in 0..i {
                let (head, tail) = block.split_at_mut(i);
                let c = dot(&tail[0], &head[j]);
                tail[0].iter_mut().zip(&head[j]).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&block[i], &block[i]).sqrt();
        if norm < 1e-300 {
            block[i].iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
            // Start over with the refreshed column.
            return orthonormalize(block, deflate, rng);
        }
        block[i].iter_mut().for_each(|x| *x /= norm);
    }
}

/// Ritz values of `sign * M + shift * I` on a block Krylov-free subspace,
/// sorted by decreasing modulus.
fn subspace_ritz(
    m: &CsrMatrix,
    shift: f64,
    sign: f64,
    deflate: Option<&[f64]>,
    symmetric: bool,
    opts: &EigenOptions,
) -> Result<Vec<Complex<f64>>> {
    let n = m.rows();
    let b = opts.block.clamp(2, n.saturating_sub(deflate.is_some() as usize).max(2));
    let mut rng = rng::stream(opts.seed, &[0x7273_7a]);
    let mut q: Vec<Vec<f64>> = (0..b)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    orthonormalize(&mut q, deflate, &mut rng);
    let mut z = vec![vec![0.0; n]; b];

    let mut prev = f64::NAN;
    let mut stable = 0;
    let mut change = f64::INFINITY;
    for _ in 0..opts.max_iter {
        for (qi, zi) in q.iter().zip(z.iter_mut()) {
            m.mul_vec(qi, zi, opts.exec);
            zi.iter_mut().zip(qi).for_each(|(y, x)| *y = sign * *y + shift * x);
        }
        let h = DMatrix::from_fn(b, b, |i, j| dot(&q[i], &z[j]));
        let mut ritz: Vec<Complex<f64>> = if symmetric {
            let hs = (&h + h.transpose()) * 0.5;
            SymmetricEigen::new(hs)
                .eigenvalues
                .iter()
                .map(|&x| Complex::new(x, 0.0))
                .collect()
        } else {
            general_eigenvalues(h)?
        };
        ritz.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        // The quantity of interest is the leading value, or the second one
        // for undeflated symmetric runs.
        let target = if symmetric && deflate.is_none() && sign > 0.0 { ritz[1] } else { ritz[0] }.norm();
        change = (target - prev).abs();
        prev = target;
        if change <= opts.tol * target.abs().max(1.0) {
            stable += 1;
            if stable >= 5 {
                return Ok(ritz);
            }
        } else {
            stable = 0;
        }
        std::mem::swap(&mut q, &mut z);
        orthonormalize(&mut q, deflate, &mut rng);
    }
    Err(Error::NoConvergence {
        what: "subspace iteration",
        iterations: opts.max_iter,
        residual: change,
    })
}
