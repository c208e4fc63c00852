//! Synthetic datasets: the two-dimensional "Connected" mixture and
//! schema-compatible stand-ins for the bio and astro datasets, each sampled
//! from a known ground-truth network.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Schema, VarId, VarKind, Variable};
use crate::error::{Error, Result};
use crate::rng::{mix, rng_for, Rng};
use crate::stats::{log_sum_exp, normal_interval_mass, normal_log_pdf, sample_truncated_normal, standard_normal};

pub const CONNECTED_FULL_ROWS: usize = 80_000;
pub const CONNECTED_DESK_ROWS: usize = 8_000;
pub const BIO_ROWS: usize = 12_671;
pub const ASTRO_DESK_ROWS: usize = 10_000;

/// Diagonal Gaussian component of the Connected mixture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: [f64; 2],
    pub sd: [f64; 2],
}

/// The fixed Connected mixture. Two elongated clusters cross the middle of
/// the square at different heights, so `P(x2 | x1)` is bimodal for x1 in
/// roughly [0.3, 0.7]; a small third cluster sits in a corner.
pub const CONNECTED: [Component; 3] = [
    Component {
        weight: 0.42,
        mean: [0.38, 0.28],
        sd: [0.16, 0.06],
    },
    Component {
        weight: 0.42,
        mean: [0.62, 0.72],
        sd: [0.16, 0.06],
    },
    Component {
        weight: 0.16,
        mean: [0.15, 0.82],
        sd: [0.06, 0.05],
    },
];

fn connected_schema() -> Schema {
    Schema::new(vec![Variable::continuous("x1", 0.0, 1.0), Variable::continuous("x2", 0.0, 1.0)])
        .expect("valid schema")
}

/// Density of the Connected mixture restricted to the unit square.
pub fn connected_log_density(x: &[f64]) -> f64 {
    if !(0.0..=1.0).contains(&x[0]) || !(0.0..=1.0).contains(&x[1]) {
        return f64::NEG_INFINITY;
    }
    let inside: f64 = CONNECTED
        .iter()
        .map(|c| {
            c.weight
                * (0..2)
                    .map(|d| normal_interval_mass((0.0 - c.mean[d]) / c.sd[d], (1.0 - c.mean[d]) / c.sd[d]))
                    .product::<f64>()
        })
        .sum();
    let parts: Vec<f64> = CONNECTED
        .iter()
        .map(|c| {
            c.weight.ln()
                + normal_log_pdf(x[0], c.mean[0], c.sd[0] * c.sd[0])
                + normal_log_pdf(x[1], c.mean[1], c.sd[1] * c.sd[1])
        })
        .collect();
    log_sum_exp(&parts) - inside.ln()
}

/// `n` rows from the Connected mixture; draws outside the unit square are
/// rejected, so rows follow [`connected_log_density`].
pub fn generate_connected(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("row count must be at least 1".into()));
    }
    let mut rng = rng_for(seed);
    let mut rows = Vec::with_capacity(n);
    while rows.len() < n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut comp = &CONNECTED[CONNECTED.len() - 1];
        for c in &CONNECTED {
            acc += c.weight;
            if u < acc {
                comp = c;
                break;
            }
        }
        let x = [
            comp.mean[0] + comp.sd[0] * standard_normal(&mut rng),
            comp.mean[1] + comp.sd[1] * standard_normal(&mut rng),
        ];
        if x.iter().all(|v| (0.0..=1.0).contains(v)) {
            rows.push(x.to_vec());
        }
    }
    Ok(Dataset::new(Arc::new(connected_schema()), rows))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Bio,
    Astro,
}

impl Profile {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bio" => Some(Profile::Bio),
            "astro" => Some(Profile::Astro),
            _ => None,
        }
    }

    pub fn default_rows(self) -> usize {
        match self {
            Profile::Bio => BIO_ROWS,
            Profile::Astro => ASTRO_DESK_ROWS,
        }
    }

    /// Positions and arities of the discrete variables.
    fn discrete(self) -> &'static [(usize, u32)] {
        match self {
            Profile::Bio => &[(3, 2), (9, 3), (15, 2), (21, 3), (27, 2)],
            Profile::Astro => &[(5, 3), (30, 81), (55, 12)],
        }
    }

    fn width(self) -> usize {
        match self {
            Profile::Bio => 31,
            Profile::Astro => 68,
        }
    }

    pub fn schema(self) -> Schema {
        let discrete = self.discrete();
        let mut c = 0;
        let vars = (0..self.width())
            .map(|i| match discrete.iter().find(|d| d.0 == i) {
                Some(&(_, arity)) => Variable::discrete(format!("q{i:02}"), arity),
                None => {
                    c += 1;
                    Variable::continuous(format!("c{:02}", c - 1), 0.0, 1.0)
                }
            })
            .collect();
        Schema::new(vars).expect("valid schema")
    }
}

/// Conditional of one ground-truth variable. Parents enter through their
/// values mapped to [0, 1] (discrete values as `v / (arity - 1)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthCpd {
    /// Two truncated Gaussians on [0, 1] with means
    /// `0.5 + 0.38 sin(phase_c + pi * sum_j gain_cj f_j)`.
    Continuous {
        weight: f64,
        phase: [f64; 2],
        gain: [Vec<f64>; 2],
        sd: [f64; 2],
    },
    /// Softmax over `base_v + sum_j gain_vj f_j`.
    Discrete { base: Vec<f64>, gain: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthVar {
    pub parents: Vec<VarId>,
    pub cpd: TruthCpd,
}

/// A randomly parameterized network over a profile's schema, used both to
/// sample stand-in data and as the oracle density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub profile: Profile,
    pub schema: Schema,
    pub vars: Vec<TruthVar>,
}

const MAX_TRUTH_PARENTS: usize = 2;
const KEY_TRUTH: u64 = 0x7247;
const KEY_SAMPLE: u64 = 0x5A4E;

impl GroundTruth {
    pub fn random(profile: Profile, seed: u64) -> Self {
        let schema = profile.schema();
        let mut rng = rng_for(mix(seed, KEY_TRUTH));
        let vars = (0..schema.len())
            .map(|v| {
                let k = if v == 0 { 0 } else { rng.random_range(0..=MAX_TRUTH_PARENTS.min(v)) };
                let mut parents: Vec<VarId> = Vec::with_capacity(k);
                while parents.len() < k {
                    // mostly recent variables, so chains form
                    let back = rng.random_range(1..=v.min(6));
                    let p = if rng.random::<f64>() < 0.7 { v - back } else { rng.random_range(0..v) };
                    if !parents.contains(&p) {
                        parents.push(p);
                    }
                }
                parents.sort_unstable();
                let cpd = match schema.kind(v) {
                    VarKind::Continuous { .. } => TruthCpd::Continuous {
                        weight: rng.random_range(0.3..0.7),
                        phase: [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)],
                        gain: [
                            parents.iter().map(|_| rng.random_range(-1.5..1.5)).collect(),
                            parents.iter().map(|_| rng.random_range(-1.5..1.5)).collect(),
                        ],
                        sd: [rng.random_range(0.03..0.1), rng.random_range(0.03..0.1)],
                    },
                    VarKind::Discrete { arity, .. } => TruthCpd::Discrete {
                        base: (0..*arity).map(|_| rng.random_range(-1.0..1.0)).collect(),
                        gain: (0..*arity)
                            .map(|_| parents.iter().map(|_| rng.random_range(-3.0..3.0)).collect())
                            .collect(),
                    },
                };
                TruthVar { parents, cpd }
            })
            .collect();
        GroundTruth { profile, schema, vars }
    }

    fn feature(&self, p: VarId, x: f64) -> f64 {
        match self.schema.kind(p) {
            VarKind::Continuous { .. } => x,
            VarKind::Discrete { arity, .. } => x / f64::from(arity - 1),
        }
    }

    fn means(&self, v: VarId, row: &[f64], phase: &[f64; 2], gain: &[Vec<f64>; 2]) -> [f64; 2] {
        let tv = &self.vars[v];
        let mut out = [0.0; 2];
        for c in 0..2 {
            let s: f64 = tv
                .parents
                .iter()
                .zip(&gain[c])
                .map(|(&p, g)| g * self.feature(p, row[p]))
                .sum();
            out[c] = 0.5 + 0.38 * (phase[c] + PI * s).sin();
        }
        out
    }

    fn discrete_logits(&self, v: VarId, row: &[f64], base: &[f64], gain: &[Vec<f64>]) -> Vec<f64> {
        let tv = &self.vars[v];
        let logits: Vec<f64> = base
            .iter()
            .zip(gain)
            .map(|(b, g)| {
                b + tv
                    .parents
                    .iter()
                    .zip(g)
                    .map(|(&p, w)| w * self.feature(p, row[p]))
                    .sum::<f64>()
            })
            .collect();
        let z = log_sum_exp(&logits);
        logits.iter().map(|l| l - z).collect()
    }

    /// Exact log conditional density of variable `v` in a full row.
    pub fn log_conditional(&self, v: VarId, row: &[f64]) -> f64 {
        let x = row[v];
        match &self.vars[v].cpd {
            TruthCpd::Continuous { weight, phase, gain, sd } => {
                let mu = self.means(v, row, phase, gain);
                let w = [*weight, 1.0 - weight];
                let parts: Vec<f64> = (0..2)
                    .map(|c| {
                        let mass = normal_interval_mass(-mu[c] / sd[c], (1.0 - mu[c]) / sd[c]);
                        w[c].ln() + normal_log_pdf(x, mu[c], sd[c] * sd[c]) - mass.ln()
                    })
                    .collect();
                log_sum_exp(&parts)
            }
            TruthCpd::Discrete { base, gain } => self.discrete_logits(v, row, base, gain)[x as usize],
        }
    }

    pub fn log_density_row(&self, row: &[f64]) -> f64 {
        (0..self.vars.len()).map(|v| self.log_conditional(v, row)).sum()
    }

    pub fn log_likelihood(&self, data: &Dataset) -> f64 {
        data.rows.iter().map(|r| self.log_density_row(r)).sum()
    }

    /// Ancestral sampling; parents always precede children.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Dataset {
        let rows = (0..n)
            .map(|_| {
                let mut row = vec![0.0; self.vars.len()];
                for v in 0..self.vars.len() {
                    row[v] = match &self.vars[v].cpd {
                        TruthCpd::Continuous { weight, phase, gain, sd } => {
                            let mu = self.means(v, &row, phase, gain);
                            let c = usize::from(rng.random::<f64>() >= *weight);
                            sample_truncated_normal(mu[c], sd[c], 0.0, 1.0, rng)
                        }
                        TruthCpd::Discrete { base, gain } => {
                            let logp = self.discrete_logits(v, &row, base, gain);
                            let mut u: f64 = rng.random();
                            let mut pick = logp.len() - 1;
                            for (i, l) in logp.iter().enumerate() {
                                let p = l.exp();
                                if u < p {
                                    pick = i;
                                    break;
                                }
                                u -= p;
                            }
                            pick as f64
                        }
                    };
                }
                row
            })
            .collect();
        Dataset::new(Arc::new(self.schema.clone()), rows)
    }
}

/// A stand-in dataset with the ground truth it was sampled from.
#[derive(Clone, Debug, PartialEq)]
pub struct Standin {
    pub data: Dataset,
    pub truth: GroundTruth,
}

pub fn generate_standin(profile: Profile, n: usize, seed: u64) -> Result<Standin> {
    if n == 0 {
        return Err(Error::Config("row count must be at least 1".into()));
    }
    let truth = GroundTruth::random(profile, seed);
    let data = truth.sample(n, &mut rng_for(mix(seed, KEY_SAMPLE)));
    Ok(Standin { data, truth })
}
