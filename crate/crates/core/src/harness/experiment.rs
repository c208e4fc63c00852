//! k-fold cross-validated test log-likelihood of several algorithms on one
//! dataset, with per-fold timings and visited-leaf counters.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bnet::{fit_gaussian_mixture_baseline, learn_structure, parameterize, FactoredModel, NetworkStructure, SearchConfig};
use crate::cond::{CondConfig, ConditionalModel, ConditionalSpec, Mode};
use crate::data::{add_noise, kfold_indices, scale_to_unit, NoiseKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::leaf::LeafFamily;
use crate::rng::mix;
use crate::stats::{ci_half_width, mean, paired_t_significant};

const KEY_NOISE: u64 = 0x4015;
const KEY_FOLDS: u64 = 0xF01D;
pub const DEFAULT_MIXTURE_GRID: [usize; 16] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// One conditional tree, or one tree per family of a fixed network.
    Tree(CondConfig),
    /// Tiered structure search, then the final tier on the learned structure.
    Bnet(SearchConfig),
    /// Diagonal Gaussian mixture with k picked on a validation split.
    GmmBaseline { grid: Vec<usize>, validation_fraction: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Algorithm {
    pub label: String,
    pub method: Method,
}

impl Algorithm {
    pub fn tree(mode: Mode, family: LeafFamily) -> Self {
        Algorithm {
            label: format!("{}-{}", mode.label(), family.label()),
            method: Method::Tree(CondConfig::new(mode, family)),
        }
    }

    pub fn bnet() -> Self {
        Algorithm {
            label: "bnet".into(),
            method: Method::Bnet(SearchConfig::default()),
        }
    }

    pub fn gmm_baseline() -> Self {
        Algorithm {
            label: "gmm-baseline".into(),
            method: Method::GmmBaseline {
                grid: DEFAULT_MIXTURE_GRID.to_vec(),
                validation_fraction: 0.2,
            },
        }
    }

    /// `mode-leaf` (e.g. `stratified-ili`), `bnet` or `gmm-baseline`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bnet" => return Ok(Algorithm::bnet()),
            "gmm-baseline" | "gmm" => return Ok(Algorithm::gmm_baseline()),
            _ => {}
        }
        let (mode, leaf) = s
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("algorithm `{s}` is not of the form mode-leaf")))?;
        let mode = Mode::parse(mode).ok_or_else(|| Error::Config(format!("unknown mode `{mode}`")))?;
        let family = LeafFamily::parse(leaf).ok_or_else(|| Error::Config(format!("unknown leaf family `{leaf}`")))?;
        Ok(Algorithm::tree(mode, family))
    }

    fn check(&self, task: &Task) -> Result<()> {
        match (&self.method, task) {
            (Method::Tree(cfg), _) => cfg.check(),
            (Method::Bnet(cfg), Task::Joint(_)) => cfg.check(),
            (Method::GmmBaseline { grid, .. }, Task::Joint(_)) if grid.iter().all(|&k| k > 0) && !grid.is_empty() => Ok(()),
            (Method::GmmBaseline { .. }, Task::Joint(_)) => Err(Error::Config("mixture k grid must be non-empty and positive".into())),
            (_, Task::Conditional(_)) => Err(Error::Config(format!(
                "algorithm `{}` models a joint distribution, but the task is a single conditional",
                self.label
            ))),
        }
    }
}

/// What is being modelled and scored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// `P(child | parents)`; test LL is the sum of conditional log densities.
    Conditional(ConditionalSpec),
    /// The joint over all variables. Tree methods use the given structure;
    /// structure-learning and mixture methods ignore it.
    Joint(NetworkStructure),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    /// Map every continuous column onto [0, 1] before splitting.
    pub scale: bool,
    pub noise: Option<(NoiseKind, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub task: Task,
    pub folds: usize,
    pub preprocess: Preprocess,
    pub seed: u64,
    /// Record wall-times. Off, the times are 0 and reports are byte-stable.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(algorithms: Vec<Algorithm>, task: Task) -> Self {
        ExperimentConfig {
            algorithms,
            task,
            folds: 10,
            preprocess: Preprocess::default(),
            seed: 0,
            timing: false,
        }
    }

    pub fn check(&self, data: &Dataset) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms to run".into()));
        }
        match &self.task {
            Task::Conditional(spec) => spec.check(&data.schema)?,
            Task::Joint(s) if s.len() != data.schema.len() => {
                return Err(Error::Config(format!(
                    "structure has {} variables, schema has {}",
                    s.len(),
                    data.schema.len()
                )))
            }
            Task::Joint(_) => {}
        }
        for a in &self.algorithms {
            a.check(&self.task)?;
        }
        if let Some((_, mag)) = self.preprocess.noise {
            if !(mag > 0.0 && mag.is_finite()) {
                return Err(Error::NoiseMagnitude(mag));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    /// Mean over folds of the total test-set log-likelihood.
    pub mean_ll: f64,
    pub ci95: f64,
    /// Mean learning seconds per fold.
    pub learn_s: f64,
    /// Mean evaluation seconds per fold.
    pub eval_s: f64,
    /// Best mean LL, or not worse than the best at 95% by a paired t-test.
    pub best: bool,
    pub fold_ll: Vec<f64>,
    /// Mean leaves visited per conditional query (0 for mixtures).
    pub mean_visited: f64,
}

/// Scale, then noise (clamped into the bounds), as configured.
pub fn preprocess(data: &Dataset, cfg: &Preprocess, seed: u64) -> Result<Dataset> {
    let mut out = if cfg.scale { scale_to_unit(data)?.0 } else { data.clone() };
    if let Some((kind, mag)) = cfg.noise {
        out = add_noise(&out, kind, mag, mix(seed, KEY_NOISE))?;
    }
    Ok(out)
}

enum Learned {
    Conditional(ConditionalModel),
    Network(FactoredModel),
    Mixture(crate::bnet::GaussianMixture),
}

struct FoldScore {
    ll: f64,
    visited: usize,
    queries: usize,
}

fn learn(alg: &Algorithm, task: &Task, train: &Dataset, seed: u64) -> Result<Learned> {
    Ok(match (&alg.method, task) {
        (Method::Tree(cfg), Task::Conditional(spec)) => {
            Learned::Conditional(ConditionalModel::learn(train, spec, &cfg.clone().with_seed(seed))?)
        }
        (Method::Tree(cfg), Task::Joint(s)) => Learned::Network(FactoredModel::learn(train, s, &cfg.clone().with_seed(seed))?),
        (Method::Bnet(cfg), _) => {
            let cfg = cfg.clone().with_seed(seed);
            let outcome = learn_structure(train, &cfg)?;
            Learned::Network(parameterize(&outcome.structure, train, &cfg)?)
        }
        (Method::GmmBaseline { grid, validation_fraction }, _) => {
            Learned::Mixture(fit_gaussian_mixture_baseline(train, grid, seed, *validation_fraction)?.model)
        }
    })
}

fn score(model: &Learned, test: &Dataset) -> FoldScore {
    let mut s = FoldScore {
        ll: 0.0,
        visited: 0,
        queries: 0,
    };
    let mut add = |c: &ConditionalModel, row: &[f64]| {
        let e = c.eval(&c.spec.project(row));
        s.ll += e.log;
        s.visited += e.visited;
        s.queries += 1;
    };
    match model {
        Learned::Conditional(c) => test.rows.iter().for_each(|r| add(c, r)),
        Learned::Network(m) => {
            for r in &test.rows {
                for c in &m.conditionals {
                    add(c, r);
                }
            }
        }
        Learned::Mixture(m) => s.ll = m.log_likelihood(test),
    }
    s
}

/// Runs every algorithm on every fold. Folds and algorithms run in index
/// order and every fold learns with the same derived seed for all
/// algorithms, so the report depends only on (data, config).
pub fn run_experiment(data: &Dataset, cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    cfg.check(data)?;
    let data = preprocess(data, &cfg.preprocess, cfg.seed)?;
    let tests = kfold_indices(data.len(), cfg.folds, mix(cfg.seed, KEY_FOLDS))?;
    let k = cfg.algorithms.len();
    let mut fold_ll = vec![Vec::with_capacity(cfg.folds); k];
    let mut learn_s = vec![0.0; k];
    let mut eval_s = vec![0.0; k];
    let mut visited = vec![(0usize, 0usize); k];

    for (fold, test_idx) in tests.iter().enumerate() {
        let mut in_test = vec![false; data.len()];
        test_idx.iter().for_each(|&i| in_test[i] = true);
        let train_idx: Vec<usize> = (0..data.len()).filter(|&i| !in_test[i]).collect();
        let (train, test) = (data.subset(&train_idx), data.subset(test_idx));
        let seed = mix(cfg.seed, fold as u64);
        for (a, alg) in cfg.algorithms.iter().enumerate() {
            let t0 = Instant::now();
            let model = learn(alg, &cfg.task, &train, seed).map_err(|e| Error::Fold {
                fold,
                source: Box::new(e),
            })?;
            let t1 = Instant::now();
            let s = score(&model, &test);
            let t2 = Instant::now();
            if cfg.timing {
                learn_s[a] += (t1 - t0).as_secs_f64();
                eval_s[a] += (t2 - t1).as_secs_f64();
            }
            fold_ll[a].push(s.ll);
            visited[a].0 += s.visited;
            visited[a].1 += s.queries;
        }
    }

    let folds = cfg.folds as f64;
    let means: Vec<f64> = fold_ll.iter().map(|f| mean(f)).collect();
    let best = (0..k).fold(0, |b, a| if means[a] > means[b] { a } else { b });
    Ok(cfg
        .algorithms
        .iter()
        .enumerate()
        .map(|(a, alg)| ReportRow {
            label: alg.label.clone(),
            mean_ll: means[a],
            ci95: ci_half_width(&fold_ll[a], 0.95),
            learn_s: learn_s[a] / folds,
            eval_s: eval_s[a] / folds,
            best: a == best || !(means[a] < means[best] && paired_t_significant(&fold_ll[best], &fold_ll[a], 0.05)),
            fold_ll: fold_ll[a].clone(),
            mean_visited: if visited[a].1 == 0 { 0.0 } else { visited[a].0 as f64 / visited[a].1 as f64 },
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Json,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tsv" => Some(ReportFormat::Tsv),
            "json" => Some(ReportFormat::Json),
            _ => None,
        }
    }
}

pub const TSV_HEADER: &str = "label\tmean_ll\tci95\tlearn_s\teval_s\tbest_flag";

/// Reals print as shortest round-trip decimals.
pub fn format_report(rows: &[ReportRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Tsv => {
            let mut out = String::from(TSV_HEADER);
            out.push('\n');
            for r in rows {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    r.label,
                    r.mean_ll,
                    r.ci95,
                    r.learn_s,
                    r.eval_s,
                    u8::from(r.best)
                );
            }
            out
        }
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(rows).expect("report rows serialize");
            s.push('\n');
            s
        }
    }
}

pub fn parse_report_json(text: &str) -> Result<Vec<ReportRow>> {
    super::codec::from_json_str(text)
}
