//! Tiered structure search: cheap trees rank candidate moves, medium trees
//! decide acceptance on a validation split, and the final tier parameterizes
//! the chosen structure.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cond::{CondConfig, ConditionalModel, ConditionalSpec, Mode};
use crate::data::{holdout_indices, Dataset, VarId};
use crate::error::{Error, Result};
use crate::leaf::LeafFamily;
use crate::rng::mix;

use super::{family_seed, FactoredModel, Move, NetworkStructure};

const KEY_VALIDATION: u64 = 0x7A11;
const KEY_CHEAP: u64 = 0xC4EA;
const KEY_MEDIUM: u64 = 0x3ED1;
const KEY_FINAL: u64 = 0xF1A1;
/// Exhaustive enumeration is only offered for tiny networks.
const MAX_EXHAUSTIVE_VARS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Ranks candidate moves.
    pub cheap: CondConfig,
    /// Compares a candidate structure with the current one.
    pub medium: CondConfig,
    /// Parameterizes the final structure.
    pub final_tier: CondConfig,
    pub max_parents: usize,
    /// Ranked moves tried per iteration before moving on.
    pub moves_per_iteration: usize,
    pub max_iterations: usize,
    /// Accepted moves between re-rankings with the cheap tier.
    pub rescore_period: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            cheap: CondConfig::new(Mode::Cart, LeafFamily::Gaussian),
            medium: CondConfig::new(Mode::Approx, LeafFamily::LinearInterp),
            final_tier: CondConfig::new(Mode::Approx, LeafFamily::Multilinear),
            max_parents: 3,
            moves_per_iteration: 8,
            max_iterations: 100,
            rescore_period: 5,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn check(&self) -> Result<()> {
        for tier in [&self.cheap, &self.medium, &self.final_tier] {
            tier.check()?;
        }
        if self.max_parents == 0 || self.moves_per_iteration == 0 || self.max_iterations == 0 || self.rescore_period == 0 {
            return Err(Error::Config("search budgets must be positive".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation fraction {} outside (0, 1)",
                self.validation_fraction
            )));
        }
        Ok(())
    }

    fn tier(&self, tier: &CondConfig, key: u64) -> CondConfig {
        tier.clone().with_seed(mix(self.seed, key))
    }
}

/// Validation log-likelihood of conditional families under one tier, learned
/// on a training split and cached per `(child, parents)`.
pub struct FamilyScorer {
    cfg: CondConfig,
    train: Dataset,
    valid: Dataset,
    cache: HashMap<ConditionalSpec, f64>,
    learned: usize,
}

impl FamilyScorer {
    pub fn new(train: Dataset, valid: Dataset, cfg: CondConfig) -> Self {
        FamilyScorer {
            cfg,
            train,
            valid,
            cache: HashMap::new(),
            learned: 0,
        }
    }

    /// Splits `data` into training and validation parts.
    pub fn split(data: &Dataset, fraction: f64, seed: u64, cfg: CondConfig) -> Result<Self> {
        let (train, valid) = holdout_indices(data.len(), seed, fraction)?;
        Ok(Self::new(data.subset(&train), data.subset(&valid), cfg))
    }

    pub fn config(&self) -> &CondConfig {
        &self.cfg
    }

    /// Conditionals learned so far (cache misses).
    pub fn learned(&self) -> usize {
        self.learned
    }

    /// Smoothed validation log-likelihood of `P(child | parents)`.
    pub fn score(&mut self, child: VarId, parents: &[VarId]) -> Result<f64> {
        let mut ps = parents.to_vec();
        ps.sort_unstable();
        let spec = ConditionalSpec::new(child, ps);
        if let Some(&s) = self.cache.get(&spec) {
            return Ok(s);
        }
        let cfg = self.cfg.clone().with_seed(family_seed(self.cfg.seed, &spec));
        let model = ConditionalModel::learn(&self.train, &spec, &cfg)?;
        let s = self.valid.rows.iter().map(|r| model.log_density_row(r)).sum();
        self.learned += 1;
        self.cache.insert(spec, s);
        Ok(s)
    }

    /// Validation log-likelihood of a whole structure (sum over families).
    pub fn score_structure(&mut self, s: &NetworkStructure) -> Result<f64> {
        (0..s.len()).map(|v| self.score(v, s.parents(v))).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredMove {
    pub mv: Move,
    /// Estimated change of the child's validation log-likelihood.
    pub delta: f64,
}

/// Every legal addition and removal with its estimated gain, best first.
pub fn score_arc_candidates(scorer: &mut FamilyScorer, structure: &NetworkStructure) -> Result<Vec<ScoredMove>> {
    let mut out = Vec::new();
    for mv in structure.legal_moves() {
        let child = mv.child();
        let before = scorer.score(child, structure.parents(child))?;
        let next = structure.apply(mv)?;
        let after = scorer.score(child, next.parents(child))?;
        out.push(ScoredMove { mv, delta: after - before });
    }
    out.sort_by(|a, b| b.delta.total_cmp(&a.delta).then(a.mv.cmp(&b.mv)));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptedMove {
    pub mv: Move,
    /// The cheap tier's estimate when the move was ranked.
    pub estimate: f64,
    /// Validation log-likelihood of the structure after the move.
    pub validation_ll: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub structure: NetworkStructure,
    pub initial_validation_ll: f64,
    pub accepted: Vec<AcceptedMove>,
    pub iterations: usize,
    pub rescores: usize,
    /// Conditionals learned by the cheap and medium tiers.
    pub cheap_learned: usize,
    pub medium_learned: usize,
    pub validation_rows: usize,
}

impl SearchOutcome {
    pub fn final_validation_ll(&self) -> f64 {
        self.accepted.last().map_or(self.initial_validation_ll, |a| a.validation_ll)
    }
}

/// Hill climbing from the empty graph.
///
/// Each iteration walks the current ranking and evaluates up to
/// `moves_per_iteration` promising moves not yet tried against the current
/// family of their child; the first one whose medium-tier family improves
/// the validation log-likelihood is accepted. The ranking is refreshed after
/// every `rescore_period` accepted moves, and also when it runs dry. The
/// search stops when a fresh ranking offers nothing that improves.
pub fn learn_structure(data: &Dataset, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.check()?;
    let n_vars = data.schema.len();
    if n_vars < 2 {
        return Err(Error::Config("structure search needs at least two variables".into()));
    }
    let (train, valid) = holdout_indices(data.len(), mix(cfg.seed, KEY_VALIDATION), cfg.validation_fraction)?;
    let (train, valid) = (data.subset(&train), data.subset(&valid));
    let validation_rows = valid.len();
    let mut cheap = FamilyScorer::new(train.clone(), valid.clone(), cfg.tier(&cfg.cheap, KEY_CHEAP));
    let mut medium = FamilyScorer::new(train, valid, cfg.tier(&cfg.medium, KEY_MEDIUM));

    let mut structure = NetworkStructure::empty(n_vars, cfg.max_parents);
    let mut family: Vec<f64> = (0..n_vars).map(|v| medium.score(v, &[])).collect::<Result<_>>()?;
    let initial_validation_ll = family.iter().sum();

    let mut ranking = score_arc_candidates(&mut cheap, &structure)?;
    let mut rescores = 1;
    let mut since_rescore = 0;
    let mut fresh = true;
    let mut tried: HashSet<(Move, Vec<VarId>)> = HashSet::new();
    let mut accepted = Vec::new();
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        if since_rescore >= cfg.rescore_period || !fresh && pending(&ranking, &structure, &tried).next().is_none() {
            ranking = score_arc_candidates(&mut cheap, &structure)?;
            rescores += 1;
            since_rescore = 0;
            fresh = true;
        }
        let batch: Vec<ScoredMove> = pending(&ranking, &structure, &tried)
            .take(cfg.moves_per_iteration)
            .collect();
        if batch.is_empty() {
            break;
        }
        iterations += 1;
        let mut took = None;
        for c in batch {
            let child = c.mv.child();
            tried.insert((c.mv, structure.parents(child).to_vec()));
            let next = structure.apply(c.mv)?;
            let s = medium.score(child, next.parents(child))?;
            if s > family[child] {
                took = Some((c, next, s));
                break;
            }
        }
        if let Some((c, next, s)) = took {
            family[c.mv.child()] = s;
            structure = next;
            accepted.push(AcceptedMove {
                mv: c.mv,
                estimate: c.delta,
                validation_ll: family.iter().sum(),
            });
            since_rescore += 1;
            fresh = false;
        }
    }
    Ok(SearchOutcome {
        structure,
        initial_validation_ll,
        accepted,
        iterations,
        rescores,
        cheap_learned: cheap.learned(),
        medium_learned: medium.learned(),
        validation_rows,
    })
}

/// Ranked moves that look promising, are legal now and were not yet tried
/// against the child's current parents.
fn pending<'a>(
    ranking: &'a [ScoredMove],
    structure: &'a NetworkStructure,
    tried: &'a HashSet<(Move, Vec<VarId>)>,
) -> impl Iterator<Item = ScoredMove> + 'a {
    ranking.iter().copied().filter(move |c| {
        c.delta > 0.0
            && structure.is_legal(c.mv)
            && !tried.contains(&(c.mv, structure.parents(c.mv.child()).to_vec()))
    })
}

/// Learns the final-tier conditionals of `structure` on all of `data`.
pub fn parameterize(structure: &NetworkStructure, data: &Dataset, cfg: &SearchConfig) -> Result<FactoredModel> {
    FactoredModel::learn(data, structure, &cfg.tier(&cfg.final_tier, KEY_FINAL))
}

/// The structure with the best medium-tier validation log-likelihood among
/// all DAGs over the (at most five) variables, using the same validation
/// split as [`learn_structure`]. Returns the structure and its score.
pub fn exhaustive_best_structure(data: &Dataset, cfg: &SearchConfig) -> Result<(NetworkStructure, f64)> {
    cfg.check()?;
    let n = data.schema.len();
    if n > MAX_EXHAUSTIVE_VARS {
        return Err(Error::Config(format!(
            "exhaustive enumeration is limited to {MAX_EXHAUSTIVE_VARS} variables, got {n}"
        )));
    }
    let mut medium = FamilyScorer::split(
        data,
        cfg.validation_fraction,
        mix(cfg.seed, KEY_VALIDATION),
        cfg.tier(&cfg.medium, KEY_MEDIUM),
    )?;
    // every admissible parent set per variable, with its family score
    let mut options: Vec<Vec<(Vec<VarId>, f64)>> = Vec::with_capacity(n);
    for v in 0..n {
        let others: Vec<VarId> = (0..n).filter(|&u| u != v).collect();
        let mut sets = Vec::new();
        for mask in 0u32..(1 << others.len()) {
            if mask.count_ones() as usize > cfg.max_parents {
                continue;
            }
            let ps: Vec<VarId> = others
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &u)| u)
                .collect();
            let s = medium.score(v, &ps)?;
            sets.push((ps, s));
        }
        options.push(sets);
    }
    let mut best: Option<(NetworkStructure, f64)> = None;
    let mut choice = vec![0usize; n];
    loop {
        let score: f64 = choice.iter().enumerate().map(|(v, &i)| options[v][i].1).sum();
        if best.as_ref().is_none_or(|b| score > b.1) {
            let parents = choice.iter().enumerate().map(|(v, &i)| options[v][i].0.clone()).collect();
            if let Ok(s) = NetworkStructure::from_parents(parents, cfg.max_parents) {
                best = Some((s, score));
            }
        }
        // odometer over the per-variable choices
        let mut v = 0;
        while v < n {
            choice[v] += 1;
            if choice[v] < options[v].len() {
                break;
            }
            choice[v] = 0;
            v += 1;
        }
        if v == n {
            break;
        }
    }
    best.ok_or_else(|| Error::Internal("no acyclic structure enumerated".into()))
}
