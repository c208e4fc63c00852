//! EM over the fixed-component mixtures behind the interpolating leaves. Only
//! the mixing weights are estimated, so the log-likelihood is concave in them
//! and the uniform start converges to the global optimum.

use serde::{Deserialize, Serialize};

use super::hat;
use super::Probe;
use crate::region::Region;
use crate::rng::subsample;

/// Smallest weight kept after fitting; the weights are renormalized afterwards.
pub const WEIGHT_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmFitConfig {
    pub max_iters: usize,
    /// Stop once an iteration improves the log-likelihood by less than this
    /// fraction of its magnitude.
    pub rel_tol: f64,
    /// Points per mixture component: multilinear fits use at most
    /// `points_per_component * 2^d` points, linear fits
    /// `points_per_component * 2 * d`.
    pub points_per_component: usize,
    pub seed: u64,
}

impl Default for EmFitConfig {
    fn default() -> Self {
        EmFitConfig {
            max_iters: 10,
            rel_tol: 1e-6,
            points_per_component: 25,
            seed: 0,
        }
    }
}

impl EmFitConfig {
    pub fn multilinear_cap(&self, d: usize) -> usize {
        self.points_per_component << d
    }

    pub fn linear_cap(&self, d: usize) -> usize {
        self.points_per_component * 2 * d
    }
}

/// Log-likelihood after initialization and after every iteration, plus the
/// number of points EM actually used.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmTrace {
    pub log_likelihoods: Vec<f64>,
    pub used_points: usize,
}

fn floor_and_normalize(w: &mut [f64]) {
    for x in w.iter_mut() {
        *x = x.max(WEIGHT_FLOOR);
    }
    let s: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= s;
    }
}

/// Runs weight-only EM on a precomputed `n x k` table of component densities.
fn run_em(basis: &[Vec<f64>], k: usize, config: &EmFitConfig, trace: &mut EmTrace) -> Vec<f64> {
    let mut w = vec![1.0 / k as f64; k];
    if basis.is_empty() {
        return w;
    }
    let ll = |w: &[f64]| -> f64 {
        basis
            .iter()
            .map(|g| g.iter().zip(w).map(|(a, b)| a * b).sum::<f64>().ln())
            .sum()
    };
    let mut current = ll(&w);
    trace.log_likelihoods.push(current);
    let n = basis.len() as f64;
    for _ in 0..config.max_iters {
        let mut next = vec![0.0; k];
        for g in basis {
            let total: f64 = g.iter().zip(&w).map(|(a, b)| a * b).sum();
            if total > 0.0 {
                for c in 0..k {
                    next[c] += w[c] * g[c] / total;
                }
            }
        }
        for x in &mut next {
            *x /= n;
        }
        let updated = ll(&next);
        w = next;
        trace.log_likelihoods.push(updated);
        let gain = updated - current;
        current = updated;
        if gain <= config.rel_tol * current.abs() {
            break;
        }
    }
    w
}

fn capped<'a>(points: &[&'a [f64]], cap: usize, seed: u64) -> Vec<&'a [f64]> {
    subsample(seed, points.len(), cap)
        .into_iter()
        .map(|i| points[i])
        .collect()
}

/// Fits the corner weights of a multilinear density over `dims` of `region`.
pub fn fit_multilinear_em(points: &[&[f64]], dims: &[usize], region: &Region, config: &EmFitConfig) -> (Vec<f64>, EmTrace) {
    let d = dims.len();
    let k = 1usize << d;
    let used = capped(points, config.multilinear_cap(d), config.seed);
    let mut trace = EmTrace {
        used_points: used.len(),
        ..EmTrace::default()
    };
    let basis: Vec<Vec<f64>> = used
        .iter()
        .map(|p| {
            let factors: Vec<[f64; 2]> = dims
                .iter()
                .map(|&j| {
                    let (a, b) = region.dims[j].interval();
                    [hat(0, a, b, Probe::At(p[j])), hat(1, a, b, Probe::At(p[j]))]
                })
                .collect();
            (0..k)
                .map(|c| (0..d).map(|bit| factors[bit][(c >> bit) & 1]).product())
                .collect()
        })
        .collect();
    let mut w = run_em(&basis, k, config, &mut trace);
    floor_and_normalize(&mut w);
    (w, trace)
}

/// Fits one two-component linear density per dimension. The trace holds the
/// summed log-likelihood over all dimensions.
pub fn fit_linear_interp_em(
    points: &[&[f64]],
    dims: &[usize],
    region: &Region,
    config: &EmFitConfig,
) -> (Vec<[f64; 2]>, EmTrace) {
    let used = capped(points, config.linear_cap(dims.len()), config.seed);
    let mut traces = Vec::with_capacity(dims.len());
    let weights = dims
        .iter()
        .map(|&j| {
            let (a, b) = region.dims[j].interval();
            let basis: Vec<Vec<f64>> = used
                .iter()
                .map(|p| vec![hat(0, a, b, Probe::At(p[j])), hat(1, a, b, Probe::At(p[j]))])
                .collect();
            let mut t = EmTrace::default();
            let mut w = run_em(&basis, 2, config, &mut t);
            floor_and_normalize(&mut w);
            traces.push(t.log_likelihoods);
            [w[0], w[1]]
        })
        .collect();
    // per-dimension runs may stop at different iterations; a finished
    // dimension keeps contributing its final value
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    let log_likelihoods = (0..len)
        .map(|i| traces.iter().map(|t| t[i.min(t.len() - 1)]).sum())
        .collect();
    (
        weights,
        EmTrace {
            log_likelihoods,
            used_points: used.len(),
        },
    )
}
