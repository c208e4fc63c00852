//! Bayesian networks whose conditionals are density trees, and a tiered
//! hill-climbing structure search.

mod gmm;
mod search;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cond::{CondConfig, ConditionalModel, ConditionalSpec};
use crate::data::{Dataset, Schema, VarId};
use crate::error::{Error, Result};
use crate::rng::{mix, Rng};

pub use gmm::{fit_gaussian_mixture, fit_gaussian_mixture_baseline, GaussianMixture, MixtureFit, MixtureSelection};
pub use search::{
    exhaustive_best_structure, learn_structure, parameterize, score_arc_candidates, AcceptedMove, FamilyScorer,
    ScoredMove, SearchConfig, SearchOutcome,
};

/// Directed acyclic graph over the schema's variables, stored as sorted
/// parent lists.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkStructure {
    parents: Vec<Vec<VarId>>,
    max_parents: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    Add { from: VarId, to: VarId },
    Remove { from: VarId, to: VarId },
}

impl Move {
    /// The variable whose parent set the move changes.
    pub fn child(self) -> VarId {
        match self {
            Move::Add { to, .. } | Move::Remove { to, .. } => to,
        }
    }
}

impl std::fmt::Display for Move {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Move::Add { from, to } => write!(f, "+{from}->{to}"),
            Move::Remove { from, to } => write!(f, "-{from}->{to}"),
        }
    }
}

impl NetworkStructure {
    pub fn empty(n: usize, max_parents: usize) -> Self {
        NetworkStructure {
            parents: vec![Vec::new(); n],
            max_parents,
        }
    }

    pub fn from_parents(mut parents: Vec<Vec<VarId>>, max_parents: usize) -> Result<Self> {
        let n = parents.len();
        for (v, ps) in parents.iter_mut().enumerate() {
            ps.sort_unstable();
            ps.dedup();
            if ps.iter().any(|&p| p >= n || p == v) {
                return Err(Error::Config(format!("bad parent list for variable {v}: {ps:?}")));
            }
            if ps.len() > max_parents {
                return Err(Error::Config(format!(
                    "variable {v} has {} parents, more than the limit {max_parents}",
                    ps.len()
                )));
            }
        }
        let s = NetworkStructure { parents, max_parents };
        if s.topo_order().is_none() {
            return Err(Error::Config("parent lists contain a directed cycle".into()));
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn max_parents(&self) -> usize {
        self.max_parents
    }

    pub fn parents(&self, v: VarId) -> &[VarId] {
        &self.parents[v]
    }

    pub fn arc_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Arcs as `(from, to)` pairs, ordered by child then parent.
    pub fn arcs(&self) -> Vec<(VarId, VarId)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(to, ps)| ps.iter().map(move |&from| (from, to)))
            .collect()
    }

    pub fn has_arc(&self, from: VarId, to: VarId) -> bool {
        self.parents[to].binary_search(&from).is_ok()
    }

    /// Kahn's algorithm with the smallest ready variable first; `None` when
    /// the graph has a cycle.
    pub fn topo_order(&self) -> Option<Vec<VarId>> {
        let n = self.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (to, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(to);
            }
        }
        let mut ready: std::collections::BTreeSet<VarId> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Whether `to` is reachable from `from` along arcs.
    pub fn reaches(&self, from: VarId, to: VarId) -> bool {
        let n = self.len();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(c);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if !std::mem::replace(&mut seen[v], true) {
                stack.extend(&children[v]);
            }
        }
        false
    }

    pub fn is_legal(&self, mv: Move) -> bool {
        match mv {
            Move::Add { from, to } => {
                from != to
                    && !self.has_arc(from, to)
                    && self.parents[to].len() < self.max_parents
                    && !self.reaches(to, from)
            }
            Move::Remove { from, to } => self.has_arc(from, to),
        }
    }

    /// All legal additions and removals, in a fixed order.
    pub fn legal_moves(&self) -> Vec<Move> {
        let n = self.len();
        let mut out = Vec::new();
        for to in 0..n {
            for from in 0..n {
                if from == to {
                    continue;
                }
                let mv = if self.has_arc(from, to) {
                    Move::Remove { from, to }
                } else {
                    Move::Add { from, to }
                };
                if self.is_legal(mv) {
                    out.push(mv);
                }
            }
        }
        out
    }

    pub fn apply(&self, mv: Move) -> Result<Self> {
        if !self.is_legal(mv) {
            return Err(Error::Config(format!("illegal move {mv}")));
        }
        let mut next = self.clone();
        match mv {
            Move::Add { from, to } => {
                let ps = &mut next.parents[to];
                let at = ps.binary_search(&from).unwrap_err();
                ps.insert(at, from);
            }
            Move::Remove { from, to } => next.parents[to].retain(|&p| p != from),
        }
        Ok(next)
    }

    pub fn spec(&self, v: VarId) -> ConditionalSpec {
        ConditionalSpec::new(v, self.parents[v].clone())
    }
}

/// `P(X) = prod_i P(X_i | parents_i)` with one conditional per variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactoredModel {
    pub schema: Arc<Schema>,
    pub structure: NetworkStructure,
    pub conditionals: Vec<ConditionalModel>,
}

/// Joint log-likelihood of a dataset, with its per-variable decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct LogLikelihood {
    pub total: f64,
    pub per_variable: Vec<f64>,
    /// Rows whose log density is not finite (only possible with epsilon 0).
    pub non_finite_rows: usize,
}

impl LogLikelihood {
    pub fn per_row(&self, rows: usize) -> f64 {
        self.total / rows as f64
    }
}

impl FactoredModel {
    /// Learns every conditional of `structure` with one configuration.
    pub fn learn(data: &Dataset, structure: &NetworkStructure, cfg: &CondConfig) -> Result<Self> {
        if structure.len() != data.schema.len() {
            return Err(Error::Config(format!(
                "structure has {} variables, schema has {}",
                structure.len(),
                data.schema.len()
            )));
        }
        let conditionals = (0..structure.len())
            .map(|v| {
                let spec = structure.spec(v);
                let c = cfg.clone().with_seed(family_seed(cfg.seed, &spec));
                ConditionalModel::learn(data, &spec, &c)
            })
            .collect::<Result<_>>()?;
        Ok(FactoredModel {
            schema: data.schema.clone(),
            structure: structure.clone(),
            conditionals,
        })
    }

    /// Smoothed log density of one full row.
    pub fn log_density_row(&self, row: &[f64]) -> f64 {
        self.conditionals.iter().map(|c| c.log_density_row(row)).sum()
    }

    pub fn joint_log_likelihood(&self, data: &Dataset) -> LogLikelihood {
        let mut per_variable = vec![0.0; self.conditionals.len()];
        let mut non_finite_rows = 0;
        for row in &data.rows {
            let mut row_total = 0.0;
            for (acc, c) in per_variable.iter_mut().zip(&self.conditionals) {
                let l = c.log_density_row(row);
                *acc += l;
                row_total += l;
            }
            if !row_total.is_finite() {
                non_finite_rows += 1;
            }
        }
        LogLikelihood {
            total: per_variable.iter().sum(),
            per_variable,
            non_finite_rows,
        }
    }

    /// Ancestral sampling in topological order.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Dataset {
        let order = self.structure.topo_order().expect("structure is acyclic");
        let width = self.conditionals.len();
        let rows = (0..n)
            .map(|_| {
                let mut row = vec![0.0; width];
                for &v in &order {
                    let c = &self.conditionals[v];
                    let local = c.spec.project(&row);
                    row[v] = c.sample_child(&local, rng);
                }
                row
            })
            .collect();
        Dataset::new(self.schema.clone(), rows)
    }

    /// Total leaves across all conditional trees.
    pub fn leaf_count(&self) -> usize {
        self.conditionals.iter().map(|c| c.tree().leaf_count()).sum()
    }
}

/// Free-function form of [`FactoredModel::joint_log_likelihood`].
pub fn joint_log_likelihood(model: &FactoredModel, data: &Dataset) -> LogLikelihood {
    model.joint_log_likelihood(data)
}

/// Free-function form of [`FactoredModel::sample`].
pub fn sample_network(model: &FactoredModel, n: usize, rng: &mut Rng) -> Dataset {
    model.sample(n, rng)
}

/// Seed for learning a family of `spec.child`. It ignores the parents, so
/// competing parent sets of one child see the same grow/prune splits and a
/// family pruned back to its root reproduces the parentless model exactly.
pub fn family_seed(seed: u64, spec: &ConditionalSpec) -> u64 {
    mix(seed, spec.child as u64)
}
