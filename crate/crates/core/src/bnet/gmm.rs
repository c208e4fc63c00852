//! Global mixture baseline: diagonal Gaussians over the continuous variables
//! times independent multinomials over the discrete ones, fitted by EM.
//!
//! This is a plain maximum-likelihood stand-in for a Bayesian mixture
//! classifier, not a reimplementation of one.

use serde::{Deserialize, Serialize};

use crate::data::{holdout_indices, Dataset, VarId, VarKind};
use crate::error::{Error, Result};
use crate::rng::{mix, subsample};
use crate::stats::{log_sum_exp, normal_log_pdf};

const MAX_ITERS: usize = 300;
const REL_TOL: f64 = 1e-8;
const VAR_FLOOR: f64 = 1e-6;
/// Dirichlet pseudo-count added to every discrete value in the M step.
const PSEUDO_COUNT: f64 = 0.5;
const KEY_SELECT: u64 = 0x6A55;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub continuous: Vec<VarId>,
    /// Discrete variables with their arities.
    pub discrete: Vec<(VarId, u32)>,
    pub weights: Vec<f64>,
    /// Per component, one entry per continuous variable.
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    /// Per component, per discrete variable, value probabilities.
    pub probs: Vec<Vec<Vec<f64>>>,
}

impl GaussianMixture {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    fn component_log(&self, c: usize, row: &[f64]) -> f64 {
        let mut l = self.weights[c].ln();
        for (j, &v) in self.continuous.iter().enumerate() {
            l += normal_log_pdf(row[v], self.means[c][j], self.variances[c][j]);
        }
        for (j, &(v, _)) in self.discrete.iter().enumerate() {
            l += self.probs[c][j][row[v] as usize].ln();
        }
        l
    }

    pub fn log_density_row(&self, row: &[f64]) -> f64 {
        let parts: Vec<f64> = (0..self.k()).map(|c| self.component_log(c, row)).collect();
        log_sum_exp(&parts)
    }

    pub fn log_likelihood(&self, data: &Dataset) -> f64 {
        data.rows.iter().map(|r| self.log_density_row(r)).sum()
    }

    /// Log of the Dirichlet prior terms the M step maximizes alongside the
    /// likelihood (zero without discrete variables).
    fn log_prior(&self) -> f64 {
        self.probs
            .iter()
            .flatten()
            .flatten()
            .map(|p| PSEUDO_COUNT * p.ln())
            .sum()
    }
}

/// EM for a `k`-component mixture. Returns the model and the objective after
/// every iteration: the log-likelihood plus the Dirichlet prior terms of the
/// discrete factors (plain log-likelihood for all-continuous data).
pub fn fit_gaussian_mixture(data: &Dataset, k: usize, seed: u64) -> Result<(GaussianMixture, Vec<f64>)> {
    if k == 0 {
        return Err(Error::Config("mixture needs at least one component".into()));
    }
    if data.is_empty() {
        return Err(Error::Data("cannot fit a mixture to an empty dataset".into()));
    }
    if k > data.len() {
        return Err(Error::Fit {
            what: "gaussian mixture",
            reason: format!("{k} components but only {} rows", data.len()),
        });
    }
    let schema = &data.schema;
    let mut continuous = Vec::new();
    let mut discrete = Vec::new();
    for (v, var) in schema.variables.iter().enumerate() {
        match var.kind {
            VarKind::Continuous { .. } => continuous.push(v),
            VarKind::Discrete { arity, .. } => discrete.push((v, arity)),
        }
    }
    let n = data.len();
    let rows = &data.rows;

    // initial components: k distinct rows as means, global variances
    let global_var: Vec<f64> = continuous
        .iter()
        .map(|&v| {
            let m = rows.iter().map(|r| r[v]).sum::<f64>() / n as f64;
            (rows.iter().map(|r| (r[v] - m).powi(2)).sum::<f64>() / n as f64).max(VAR_FLOOR)
        })
        .collect();
    let seeds = subsample(seed, n, k);
    let mut model = GaussianMixture {
        continuous: continuous.clone(),
        discrete: discrete.clone(),
        weights: vec![1.0 / k as f64; k],
        means: (0..k)
            .map(|c| {
                let r = &rows[seeds[c]];
                continuous.iter().map(|&v| r[v]).collect()
            })
            .collect(),
        variances: vec![global_var; k],
        probs: Vec::new(),
    };
    let uniform_resp = vec![1.0 / k as f64; n * k];
    model.probs = vec![discrete_m_step(rows, &discrete, &uniform_resp, k, 0); k];

    let mut resp = vec![0.0; n * k];
    let mut trace = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..MAX_ITERS {
        // E step
        for (i, r) in rows.iter().enumerate() {
            let logs: Vec<f64> = (0..k).map(|c| model.component_log(c, r)).collect();
            let z = log_sum_exp(&logs);
            for c in 0..k {
                resp[i * k + c] = (logs[c] - z).exp();
            }
        }
        // M step
        for c in 0..k {
            let nc: f64 = (0..n).map(|i| resp[i * k + c]).sum();
            model.weights[c] = (nc / n as f64).max(f64::MIN_POSITIVE);
            if nc <= 0.0 {
                continue;
            }
            for (j, &v) in continuous.iter().enumerate() {
                let m = (0..n).map(|i| resp[i * k + c] * rows[i][v]).sum::<f64>() / nc;
                let var = (0..n).map(|i| resp[i * k + c] * (rows[i][v] - m).powi(2)).sum::<f64>() / nc;
                model.means[c][j] = m;
                model.variances[c][j] = var.max(VAR_FLOOR);
            }
            model.probs[c] = discrete_m_step(rows, &discrete, &resp, k, c);
        }
        let obj = model.log_likelihood(data) + model.log_prior();
        trace.push(obj);
        if obj - prev <= REL_TOL * obj.abs() {
            break;
        }
        prev = obj;
    }
    Ok((model, trace))
}

fn discrete_m_step(rows: &[Vec<f64>], discrete: &[(VarId, u32)], resp: &[f64], k: usize, c: usize) -> Vec<Vec<f64>> {
    discrete
        .iter()
        .map(|&(v, arity)| {
            let mut counts = vec![PSEUDO_COUNT; arity as usize];
            for (i, r) in rows.iter().enumerate() {
                counts[r[v] as usize] += resp[i * k + c];
            }
            let total: f64 = counts.iter().sum();
            counts.iter().map(|x| x / total).collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSelection {
    pub k: usize,
    pub validation_ll: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    /// Refitted on all of the data with the selected k.
    pub model: GaussianMixture,
    pub k: usize,
    pub selection: Vec<MixtureSelection>,
}

/// Picks k from `grid` by validation log-likelihood on a held-out fraction,
/// then refits on all rows.
pub fn fit_gaussian_mixture_baseline(data: &Dataset, grid: &[usize], seed: u64, validation_fraction: f64) -> Result<MixtureFit> {
    if grid.is_empty() {
        return Err(Error::Config("empty k grid".into()));
    }
    let (train, valid) = holdout_indices(data.len(), mix(seed, KEY_SELECT), validation_fraction)?;
    let (train, valid) = (data.subset(&train), data.subset(&valid));
    let mut selection = Vec::with_capacity(grid.len());
    for &k in grid {
        let (m, _) = fit_gaussian_mixture(&train, k, mix(seed, k as u64))?;
        selection.push(MixtureSelection {
            k,
            validation_ll: m.log_likelihood(&valid),
        });
    }
    let best = selection
        .iter()
        .fold(&selection[0], |b, s| if s.validation_ll > b.validation_ll { s } else { b })
        .k;
    let (model, _) = fit_gaussian_mixture(data, best, mix(seed, best as u64))?;
    Ok(MixtureFit {
        model,
        k: best,
        selection,
    })
}
