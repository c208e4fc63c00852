use serde::{Deserialize, Serialize};

use super::em::{fit_linear_interp_em, fit_multilinear_em, EmFitConfig};
use super::{ContinuousLeaf, DiscreteFactor, LeafDist};
use crate::error::{Error, Result};
use crate::region::{Extent, Region};
use crate::rng::mix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafFamily {
    Uniform,
    Gaussian,
    LinRegGaussian,
    /// Independent linear interpolation.
    LinearInterp,
    /// Multilinear interpolation.
    Multilinear,
}

impl LeafFamily {
    pub fn label(self) -> &'static str {
        match self {
            LeafFamily::Uniform => "uniform",
            LeafFamily::Gaussian => "gauss",
            LeafFamily::LinRegGaussian => "linreg",
            LeafFamily::LinearInterp => "ili",
            LeafFamily::Multilinear => "mli",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "uniform" | "unif" => LeafFamily::Uniform,
            "gauss" | "gaussian" => LeafFamily::Gaussian,
            "linreg" => LeafFamily::LinRegGaussian,
            "ili" | "linear" => LeafFamily::LinearInterp,
            "mli" | "multilinear" => LeafFamily::Multilinear,
            _ => return None,
        })
    }
}

/// `p_v = (count_v + pseudo) / (n + pseudo * |values|)`.
pub fn fit_multinomial(observed: &[u32], values: &[u32], pseudo_count: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Fit {
            what: "multinomial",
            reason: "empty admissible value set".into(),
        });
    }
    let mut counts = vec![0.0; values.len()];
    for v in observed {
        match values.binary_search(v) {
            Ok(i) => counts[i] += 1.0,
            Err(_) => {
                return Err(Error::Fit {
                    what: "multinomial",
                    reason: format!("value {v} is not admissible"),
                })
            }
        }
    }
    let denom = observed.len() as f64 + pseudo_count * values.len() as f64;
    if denom <= 0.0 {
        return Ok(vec![1.0 / values.len() as f64; values.len()]);
    }
    Ok(counts.iter().map(|c| (c + pseudo_count) / denom).collect())
}

/// Per-dimension mean and (floored, maximum-likelihood) variance, truncated to
/// the box when evaluated.
pub fn fit_diag_gaussian(points: &[&[f64]], dims: &[usize], floors: &[f64]) -> Result<ContinuousLeaf> {
    if points.len() < 2 {
        return Err(Error::Fit {
            what: "diagonal Gaussian",
            reason: format!("needs at least 2 points, got {}", points.len()),
        });
    }
    let n = points.len() as f64;
    let mut mean = Vec::with_capacity(dims.len());
    let mut var = Vec::with_capacity(dims.len());
    for &d in dims {
        let m = points.iter().map(|p| p[d]).sum::<f64>() / n;
        let v = points.iter().map(|p| (p[d] - m).powi(2)).sum::<f64>() / n;
        mean.push(m);
        var.push(v.max(floors[d]));
    }
    Ok(ContinuousLeaf::Gaussian {
        dims: dims.to_vec(),
        mean,
        var,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinRegFit {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub var: f64,
    pub constant_fallback: bool,
}

/// Least-squares fit of `child` on `regressors` (an intercept is added). A
/// rank-deficient design falls back to a constant mean.
pub fn fit_linreg_gaussian(points: &[&[f64]], child: usize, regressors: &[usize], floor: f64) -> Result<LinRegFit> {
    let p = regressors.len();
    let n = points.len();
    if n < p + 2 {
        return Err(Error::Fit {
            what: "linear-regression Gaussian",
            reason: format!("needs at least {} points, got {n}", p + 2),
        });
    }
    let nf = n as f64;
    let y_mean = points.iter().map(|r| r[child]).sum::<f64>() / nf;
    let x_mean: Vec<f64> = regressors
        .iter()
        .map(|&d| points.iter().map(|r| r[d]).sum::<f64>() / nf)
        .collect();
    // centered normal equations
    let mut a = vec![vec![0.0; p + 1]; p];
    for r in points {
        let y = r[child] - y_mean;
        for i in 0..p {
            let xi = r[regressors[i]] - x_mean[i];
            for j in 0..p {
                a[i][j] += xi * (r[regressors[j]] - x_mean[j]);
            }
            a[i][p] += xi * y;
        }
    }
    let raw_scale: f64 = points
        .iter()
        .map(|r| regressors.iter().map(|&d| r[d] * r[d]).sum::<f64>())
        .sum();
    let coef = solve(a, raw_scale);
    let (coef, constant_fallback) = match coef {
        Some(c) => (c, false),
        None => (vec![0.0; p], true),
    };
    let intercept = y_mean - coef.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
    let sse: f64 = points
        .iter()
        .map(|r| {
            let pred = intercept + regressors.iter().zip(&coef).map(|(&d, c)| c * r[d]).sum::<f64>();
            (r[child] - pred).powi(2)
        })
        .sum();
    Ok(LinRegFit {
        coef,
        intercept,
        var: (sse / nf).max(floor),
        constant_fallback,
    })
}

/// Gauss-Jordan with partial pivoting on an augmented `p x (p+1)` system.
/// Returns `None` when a pivot is negligible relative to `scale`, the
/// uncentered sum of squares of the regressors.
fn solve(mut a: Vec<Vec<f64>>, scale: f64) -> Option<Vec<f64>> {
    let p = a.len();
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale || a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..p {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..=p {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    Some((0..p).map(|i| a[i][p] / a[i][i]).collect())
}

/// Fits leaf distributions over a fixed set of target dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafBuilder {
    pub family: LeafFamily,
    /// Local dimensions the leaf models.
    pub targets: Vec<usize>,
    /// Continuous conditioning dimensions for linear-regression leaves.
    pub regressors: Vec<usize>,
    pub em: EmFitConfig,
    pub pseudo_count: f64,
    /// Per-dimension variance floor for Gaussian families.
    pub var_floor: Vec<f64>,
}

impl LeafBuilder {
    /// A builder whose Gaussian variance floor is `(1e-3 * range)^2` of each
    /// continuous dimension of `root`.
    pub fn new(family: LeafFamily, targets: Vec<usize>, root: &Region) -> Self {
        let var_floor = root
            .dims
            .iter()
            .map(|e| match e {
                Extent::Interval { lo, hi } => (1e-3 * (hi - lo)).powi(2),
                Extent::Values(_) => 0.0,
            })
            .collect();
        LeafBuilder {
            family,
            targets,
            regressors: Vec::new(),
            em: EmFitConfig::default(),
            pseudo_count: 0.5,
            var_floor,
        }
    }

    pub fn with_regressors(mut self, regressors: Vec<usize>) -> Self {
        self.regressors = regressors;
        self
    }

    /// Fits a leaf on `points` (all inside `region`). Never fails: families
    /// that need more data than available degrade to simpler fits.
    pub fn fit(&self, points: &[&[f64]], region: &Region, seed: u64) -> LeafDist {
        let mut discrete = Vec::new();
        let mut cont = Vec::new();
        for &d in &self.targets {
            match &region.dims[d] {
                Extent::Interval { .. } => cont.push(d),
                Extent::Values(vs) => {
                    let observed: Vec<u32> = points.iter().map(|p| p[d] as u32).collect();
                    let probs = fit_multinomial(&observed, vs, self.pseudo_count).expect("points lie in the region");
                    discrete.push(DiscreteFactor {
                        dim: d,
                        values: vs.clone(),
                        probs,
                    });
                }
            }
        }
        let continuous = if cont.is_empty() {
            ContinuousLeaf::None
        } else {
            self.fit_continuous(points, region, &cont, seed)
        };
        LeafDist { discrete, continuous }
    }

    fn fit_continuous(&self, points: &[&[f64]], region: &Region, cont: &[usize], seed: u64) -> ContinuousLeaf {
        let em = EmFitConfig {
            seed: mix(self.em.seed, seed),
            ..self.em.clone()
        };
        match self.family {
            LeafFamily::Uniform => ContinuousLeaf::Uniform { dims: cont.to_vec() },
            LeafFamily::Gaussian => self.gaussian(points, region, cont),
            LeafFamily::LinRegGaussian => {
                let regressors: Vec<usize> = self
                    .regressors
                    .iter()
                    .copied()
                    .filter(|&d| region.dims[d].is_continuous())
                    .collect();
                if cont.len() != 1 {
                    return self.gaussian(points, region, cont);
                }
                match fit_linreg_gaussian(points, cont[0], &regressors, self.var_floor[cont[0]]) {
                    Ok(fit) => ContinuousLeaf::LinReg {
                        child: cont[0],
                        regressors,
                        coef: fit.coef,
                        intercept: fit.intercept,
                        var: fit.var,
                        constant_fallback: fit.constant_fallback,
                    },
                    Err(_) => self.gaussian(points, region, cont),
                }
            }
            LeafFamily::LinearInterp => {
                let (weights, _) = fit_linear_interp_em(points, cont, region, &em);
                ContinuousLeaf::Linear {
                    dims: cont.to_vec(),
                    weights,
                }
            }
            LeafFamily::Multilinear => {
                let (weights, _) = fit_multilinear_em(points, cont, region, &em);
                ContinuousLeaf::Multilinear {
                    dims: cont.to_vec(),
                    weights,
                }
            }
        }
    }

    fn gaussian(&self, points: &[&[f64]], region: &Region, cont: &[usize]) -> ContinuousLeaf {
        fit_diag_gaussian(points, cont, &self.var_floor).unwrap_or_else(|_| {
            // zero or one point: centre on it (or the box) with the variance of
            // a uniform over the box
            let mean = cont
                .iter()
                .map(|&d| points.first().map_or(region.dims[d].midpoint(), |p| p[d]))
                .collect();
            let var = cont
                .iter()
                .map(|&d| (region.dims[d].measure().powi(2) / 12.0).max(self.var_floor[d]))
                .collect();
            ContinuousLeaf::Gaussian {
                dims: cont.to_vec(),
                mean,
                var,
            }
        })
    }
}
