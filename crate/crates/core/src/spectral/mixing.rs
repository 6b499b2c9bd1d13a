//! Analytic and measured mixing rates of backtracking and non-backtracking
//! walks.

use serde::Serialize;

use super::chain::{power_stationary, stationary_distribution};
use super::eigen::{second_eigenvalue, EigenOptions, Operator};
use super::sparse::{CsrMatrix, LeftMultiplier};
use super::transition::{adjacency_matrix, build_edge_transition, build_vertex_transition, EdgeWalk};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `2 sqrt(d-1) <= lambda2 <= d`: the ratio is bounded below by
    /// `d / (2(d-1))`.
    AboveThreshold,
    /// `lambda2 < 2 sqrt(d-1)`: the non-backtracking root is complex and
    /// its modulus is `1 / sqrt(d-1)`.
    BelowThreshold,
    /// Non-regular graph: both rates are measured from decay curves.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingReport {
    /// Backtracking (simple walk) rate.
    pub rho: f64,
    /// Non-backtracking rate.
    pub rho_nbt: f64,
    /// Second-largest adjacency eigenvalue (regular graphs) or second
    /// transition eigenvalue modulus (empirical mode).
    pub lambda2: f64,
    /// Largest non-leading eigenvalue modulus of the same operator.
    pub lambda2_modulus: f64,
    /// Common degree, or the mean degree for non-regular graphs.
    pub degree: f64,
    pub regime: Regime,
    /// `rho_nbt / rho`.
    pub ratio: f64,
    /// `d / (2(d-1))`.
    pub ratio_lower_bound: f64,
}

/// `lambda2 / d`.
pub fn backtracking_rate(lambda2: f64, d: f64) -> f64 {
    lambda2 / d
}

/// `(lambda2 + sqrt(lambda2^2 - 4(d-1))) / (2(d-1))`, taking the modulus
/// of the complex root when the discriminant is negative.
pub fn nonbacktracking_rate(lambda2: f64, d: f64) -> f64 {
    let mut disc = lambda2 * lambda2 - 4.0 * (d - 1.0);
    if disc.abs() <= 1e-12 * 4.0 * (d - 1.0) {
        disc = 0.0;
    }
    if disc >= 0.0 {
        (lambda2 + disc.sqrt()) / (2.0 * (d - 1.0))
    } else {
        (d - 1.0).sqrt() / (d - 1.0)
    }
}

pub fn ratio_lower_bound(d: f64) -> f64 {
    d / (2.0 * (d - 1.0))
}

/// Mixing rates of the simple and non-backtracking walks on `g`.
///
/// On a `d`-regular graph the rates come from the second adjacency
/// eigenvalue. Otherwise, unless `require_regular` is set, they are the
/// fitted decay rates of the vertex chain and the begrudging edge chain.
pub fn mixing_rates(g: &Graph, require_regular: bool, opts: &EigenOptions) -> Result<MixingReport> {
    match g.regular_degree() {
        Some(d) if d >= 2 => {
            let ev = second_eigenvalue(&adjacency_matrix(g), Operator::Adjacency, opts)?;
            let lambda2 = ev.signed.expect("adjacency spectrum is real");
            let d = d as f64;
            let rho = backtracking_rate(lambda2, d);
            let rho_nbt = nonbacktracking_rate(lambda2, d);
            let regime = if lambda2 >= 2.0 * (d - 1.0).sqrt() {
                Regime::AboveThreshold
            } else {
                Regime::BelowThreshold
            };
            Ok(MixingReport {
                rho,
                rho_nbt,
                lambda2,
                lambda2_modulus: ev.modulus,
                degree: d,
                regime,
                ratio: rho_nbt / rho,
                ratio_lower_bound: ratio_lower_bound(d),
            })
        }
        _ if require_regular => Err(Error::NotRegular {
            min: g.min_degree(),
            max: g.max_degree(),
        }),
        _ => {
            let p = build_vertex_transition(g).matrix;
            let ev = second_eigenvalue(&p, Operator::Transition, opts)?;
            let edge = build_edge_transition(g, EdgeWalk::Begrudging)?;
            let horizon = 400;
            let rho = measure_mixing_empirical(&p, horizon, &DecayOptions::default())?.rate;
            let rho_nbt = measure_mixing_empirical(&edge.matrix, horizon, &DecayOptions::default())?.rate;
            let degree = g.volume() as f64 / g.n() as f64;
            Ok(MixingReport {
                rho,
                rho_nbt,
                lambda2: ev.signed.unwrap_or(ev.modulus),
                lambda2_modulus: ev.modulus,
                degree,
                regime: Regime::Empirical,
                ratio: rho_nbt / rho,
                ratio_lower_bound: ratio_lower_bound(degree),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayOptions {
    /// Start states used; all states when the chain is no larger.
    pub max_starts: usize,
    /// Deviations below this are treated as round-off and excluded from
    /// the fit.
    pub floor: f64,
    pub exec: Execution,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions {
            max_starts: 256,
            floor: 1e-9,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCurve {
    /// `deviation[t-1] = max_{u,v} |P^t(u,v) - pi(v)|` for `t = 1..=horizon`.
    pub deviation: Vec<f64>,
    /// `deviation[t-1]^(1/t)`.
    pub root: Vec<f64>,
    /// Geometric decay factor fitted over the final window.
    pub rate: f64,
    /// Inclusive step range `(first, last)` used by the fit.
    pub window: (usize, usize),
}

/// Measures how fast the rows of `M^t` approach the stationary
/// distribution, for `t = 1..=horizon`.
///
/// The rate is `exp(slope)` of a least-squares line through
/// `ln deviation(t)` over the second half of the steps whose deviation is
/// still above `opts.floor`.
pub fn measure_mixing_empirical(m: &CsrMatrix, horizon: usize, opts: &DecayOptions) -> Result<DecayCurve> {
    if horizon < 2 {
        return Err(Error::param("horizon must be at least 2"));
    }
    // The fit needs deviations well below the default stationary tolerance.
    let pi = stationary_distribution(m, opts.exec)?;
    let (pi, _) = power_stationary(m, pi, 1e-14, 20_000, opts.exec);
    let n = m.rows();
    let starts: Vec<usize> = if n <= opts.max_starts {
        (0..n).collect()
    } else {
        (0..opts.max_starts).map(|i| i * n / opts.max_starts).collect()
    };
    let left = LeftMultiplier::new(m);
    let per_start = par::map_range(opts.exec, starts.len(), |s| {
        let mut x = vec![0.0; n];
        x[starts[s]] = 1.0;
        let mut y = vec![0.0; n];
        let mut dev = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            left.apply(&x, &mut y, Execution::Sequential);
            std::mem::swap(&mut x, &mut y);
            dev.push(x.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        dev
    });
    let deviation: Vec<f64> = (0..horizon)
        .map(|t| per_start.iter().map(|d| d[t]).fold(0.0, f64::max))
        .collect();
    let root: Vec<f64> = deviation
        .iter()
        .enumerate()
        .map(|(t, d)| d.powf(1.0 / (t + 1) as f64))
        .collect();

    let last = deviation
        .iter()
        .rposition(|&d| d > opts.floor)
        .map_or(0, |i| i + 1);
    let (rate, window) = if last < 4 {
        // Converged almost immediately: fall back to the root at the last
        // resolvable step.
        let t = last.max(1);
        (root[t - 1], (t, t))
    } else {
        let first = last / 2 + 1;
        (fit_rate(&deviation, first, last), (first, last))
    };
    Ok(DecayCurve {
        deviation,
        root,
        rate,
        window,
    })
}

/// `exp` of the least-squares slope of `ln dev[t-1]` for `t in first..=last`.
fn fit_rate(dev: &[f64], first: usize, last: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (first..=last).map(|t| (t as f64, dev[t - 1].ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxy / sxx).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_regular;

    fn complete(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)))).unwrap()
    }

    fn cycle(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn threshold_case_ratio() {
        // lambda2 = 2 sqrt(d-1) for d = 3.
        let lambda2 = 2.0 * 2f64.sqrt();
        let ratio = nonbacktracking_rate(lambda2, 3.0) / backtracking_rate(lambda2, 3.0);
        assert!((ratio - 0.75).abs() < 1e-12);
        assert_eq!(ratio_lower_bound(3.0), 0.75);
    }

    #[test]
    fn cycle_never_mixes_without_backtracking() {
        let r = mixing_rates(&cycle(9), true, &EigenOptions::default()).unwrap();
        assert!((r.rho_nbt - 1.0).abs() < 1e-12);
        assert_eq!(r.regime, Regime::BelowThreshold);
    }

    #[test]
    fn regular_ratio_in_bounds() {
        for seed in 0..5 {
            let g = random_regular(100, 3, seed).unwrap();
            let r = mixing_rates(&g, true, &EigenOptions::default()).unwrap();
            if r.regime == Regime::AboveThreshold {
                assert!(r.ratio >= 0.75 - 1e-12 && r.ratio <= 1.0 + 1e-12, "{r:?}");
            } else {
                assert!(r.ratio > 0.75);
            }
        }
    }

    #[test]
    fn non_regular_requires_flag() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap();
        assert!(matches!(
            mixing_rates(&g, true, &EigenOptions::default()),
            Err(Error::NotRegular { min: 1, max: 3 })
        ));
        let r = mixing_rates(&g, false, &EigenOptions::default()).unwrap();
        assert_eq!(r.regime, Regime::Empirical);
        assert!(r.rho > 0.0 && r.rho < 1.0, "{r:?}");
    }

    #[test]
    fn decay_rates_of_small_chains() {
        let tri = build_vertex_transition(&cycle(3)).matrix;
        let c = measure_mixing_empirical(&tri, 50, &DecayOptions::default()).unwrap();
        assert!((c.rate - 0.5).abs() < 0.02, "{}", c.rate);
        let k4 = build_vertex_transition(&complete(4)).matrix;
        let c = measure_mixing_empirical(&k4, 50, &DecayOptions::default()).unwrap();
        assert!((c.rate - 1.0 / 3.0).abs() < 0.02, "{}", c.rate);
    }

    #[test]
    fn decay_requires_ergodic_chain() {
        let p = build_vertex_transition(&cycle(4)).matrix;
        assert!(matches!(
            measure_mixing_empirical(&p, 10, &DecayOptions::default()),
            Err(Error::NotErgodic { .. })
        ));
    }
}
