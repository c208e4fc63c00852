//! Conditional density models `P(child | parents)`.
//!
//! Every model works in local coordinates: dimension 0 is the child and
//! dimensions `1..` are the parents in the order of the spec.

mod aux;
mod shape;

use std::sync::OnceLock;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Schema, VarId};
use crate::error::{Error, Result};
use crate::leaf::{EmFitConfig, LeafBuilder, LeafFamily, Probe};
use crate::region::{Extent, Region};
use crate::rng::{mix, Rng};
use crate::stats::log_sum_exp;
use crate::tree::{smooth, DensityTree, GrowConfig, Leaf, LeafFitter, TreeLearner};

pub use aux::{
    estimate_alphas, leaf_index, leaf_log_marginal, marginalize_structure, refine_to_aux, AuxGroup, AuxLeaf, AuxTree,
    MarginalLeaf,
};
pub use shape::{sweep_tree, Shape};

const CHILD: usize = 0;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConditionalSpec {
    pub child: VarId,
    pub parents: Vec<VarId>,
}

impl ConditionalSpec {
    pub fn new(child: VarId, parents: Vec<VarId>) -> Self {
        ConditionalSpec { child, parents }
    }

    /// Schema variables in local order: child first.
    pub fn vars(&self) -> Vec<VarId> {
        std::iter::once(self.child).chain(self.parents.iter().copied()).collect()
    }

    pub fn check(&self, schema: &Schema) -> Result<()> {
        let n = schema.len();
        if self.child >= n || self.parents.iter().any(|&p| p >= n) {
            return Err(Error::Config(format!("conditional spec {self:?} names a variable outside the schema")));
        }
        if self.parents.contains(&self.child) {
            return Err(Error::Config(format!("variable {} cannot be its own parent", self.child)));
        }
        let mut sorted = self.parents.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.parents.len() {
            return Err(Error::Config(format!("repeated parent in {:?}", self.parents)));
        }
        Ok(())
    }

    /// A row restricted to the spec's variables, in local order.
    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        std::iter::once(row[self.child])
            .chain(self.parents.iter().map(|&p| row[p]))
            .collect()
    }

    pub fn region(&self, schema: &Schema) -> Region {
        Region::from_schema(schema, &self.vars())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Cart,
    Stratified,
    Joint,
    Approx,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Cart => "cart",
            Mode::Stratified => "stratified",
            Mode::Joint => "joint",
            Mode::Approx => "approx",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cart" => Some(Mode::Cart),
            "stratified" => Some(Mode::Stratified),
            "joint" => Some(Mode::Joint),
            "approx" => Some(Mode::Approx),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondConfig {
    pub mode: Mode,
    pub family: LeafFamily,
    pub min_points: usize,
    pub holdout_fraction: f64,
    pub max_depth: usize,
    pub em: EmFitConfig,
    pub epsilon: f64,
    /// Average exact leaf posteriors instead of leaf marginals for alphas.
    pub direct_alpha: bool,
    pub seed: u64,
}

impl CondConfig {
    pub fn new(mode: Mode, family: LeafFamily) -> Self {
        CondConfig {
            mode,
            family,
            min_points: 10,
            holdout_fraction: 0.3,
            max_depth: 40,
            em: EmFitConfig::default(),
            epsilon: 1e-3,
            direct_alpha: false,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.family == LeafFamily::LinRegGaussian && matches!(self.mode, Mode::Joint | Mode::Approx) {
            return Err(Error::Config(format!(
                "{} leaves model only the child and cannot be used in {} trees",
                self.family.label(),
                self.mode.label()
            )));
        }
        if self.min_points < 2 {
            return Err(Error::Config(format!("min_points must be at least 2, got {}", self.min_points)));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::Config(format!("holdout fraction {} outside (0, 1)", self.holdout_fraction)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("smoothing epsilon {} outside [0, 1)", self.epsilon)));
        }
        Ok(())
    }

    fn grow(&self, branch_dims: Vec<usize>, target_dims: Vec<usize>, seed: u64) -> GrowConfig {
        GrowConfig {
            branch_dims,
            target_dims,
            min_points: self.min_points,
            holdout_fraction: self.holdout_fraction,
            max_depth: self.max_depth,
            seed,
        }
    }

    fn builder(&self, targets: Vec<usize>, region: &Region) -> LeafBuilder {
        let mut b = LeafBuilder::new(self.family, targets, region);
        b.em = EmFitConfig {
            seed: mix(self.em.seed, self.seed),
            ..self.em.clone()
        };
        if self.family == LeafFamily::LinRegGaussian {
            b = b.with_regressors((1..region.len()).collect());
        }
        b
    }

    /// The tree learner for this mode over a region with `dims` local dimensions.
    pub fn learner(&self, region: &Region) -> TreeLearner {
        let dims = region.len();
        let parents: Vec<usize> = (1..dims).collect();
        let all: Vec<usize> = (0..dims).collect();
        match self.mode {
            Mode::Cart => TreeLearner::new(
                self.grow(parents, vec![CHILD], self.seed),
                LeafFitter::Dist(self.builder(vec![CHILD], region)),
            ),
            Mode::Stratified => {
                let inner = TreeLearner::new(
                    self.grow(vec![CHILD], vec![CHILD], mix(self.seed, 1)),
                    LeafFitter::Dist(self.builder(vec![CHILD], region)),
                );
                TreeLearner::new(self.grow(parents, vec![CHILD], self.seed), LeafFitter::Subtree(Box::new(inner)))
            }
            Mode::Joint | Mode::Approx => TreeLearner::new(
                self.grow(all.clone(), all.clone(), self.seed),
                LeafFitter::Dist(self.builder(all, region)),
            ),
        }
    }
}

/// The approximately conditionalized joint tree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApproxModel {
    pub joint: DensityTree,
    pub aux: AuxTree,
    #[serde(skip)]
    index: OnceLock<Vec<Leaf>>,
}

impl PartialEq for ApproxModel {
    fn eq(&self, other: &Self) -> bool {
        self.joint == other.joint && self.aux == other.aux
    }
}

impl ApproxModel {
    pub fn new(joint: DensityTree, aux: AuxTree) -> Self {
        ApproxModel {
            joint,
            aux,
            index: OnceLock::new(),
        }
    }

    /// Builds the auxiliary tree of `joint` and estimates its alphas on `points`.
    pub fn build(joint: DensityTree, points: &[&[f64]], direct_alpha: bool) -> Result<Self> {
        let marginal = marginalize_structure(&joint);
        let mut aux = refine_to_aux(&marginal, &joint)?;
        estimate_alphas(&mut aux, &joint, points, direct_alpha);
        Ok(ApproxModel::new(joint, aux))
    }

    pub fn leaf(&self, id: usize) -> &Leaf {
        &self.index.get_or_init(|| self.joint.leaves().into_iter().cloned().collect())[id]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CondKind {
    /// Branches on parents only; leaves model the child.
    Cart(DensityTree),
    /// Parent branches above child branches; leaf masses are conditional.
    Stratified(DensityTree),
    /// Joint tree over child and parents, conditionalized exactly.
    Joint(DensityTree),
    Approx(ApproxModel),
}

/// One conditional evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CondEval {
    pub log: f64,
    /// Leaves whose distributions were evaluated.
    pub visited: usize,
    /// The model gave no density and the uniform conditional was used.
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalModel {
    pub spec: ConditionalSpec,
    pub region: Region,
    pub kind: CondKind,
    pub epsilon: f64,
}

/// Log density of the uniform conditional over the child's extent.
fn log_uniform_child(region: &Region) -> f64 {
    -region.dims[CHILD].measure().ln()
}

/// Exact conditional from a joint tree: the leaf holding the point, weighted
/// by its mass, over the mass-weighted parent marginals of every leaf
/// consistent with the parents.
pub fn cond_log_density_exact(tree: &DensityTree, point: &[f64]) -> CondEval {
    if !tree.region.contains(point) {
        return CondEval {
            log: f64::NEG_INFINITY,
            visited: 0,
            fallback: false,
        };
    }
    let Some(own) = tree.root.leaf_at(point) else {
        return CondEval {
            log: f64::NEG_INFINITY,
            visited: 0,
            fallback: false,
        };
    };
    let numer = own.mass.ln() + own.dist.log_density(point, &own.region);
    if tree.region.len() == 1 {
        return CondEval {
            log: numer,
            visited: 1,
            fallback: false,
        };
    }
    let mut terms = Vec::new();
    sweep_tree(&tree.root, point, CHILD, &mut |l| {
        terms.push(l.mass.ln() + leaf_log_marginal(l, point));
    });
    let denom = log_sum_exp(&terms);
    if denom == f64::NEG_INFINITY {
        return CondEval {
            log: log_uniform_child(&tree.region),
            visited: terms.len(),
            fallback: true,
        };
    }
    CondEval {
        log: numer - denom,
        visited: terms.len(),
        fallback: false,
    }
}

/// Approximate conditional: one auxiliary-tree descent to a joint leaf,
/// `ln alpha + ln P(x | pi, leaf)`.
pub fn cond_log_density_approx(model: &ApproxModel, point: &[f64]) -> CondEval {
    if !model.joint.region.contains(point) {
        return CondEval {
            log: f64::NEG_INFINITY,
            visited: 0,
            fallback: false,
        };
    }
    let Some(a) = model.aux.root.leaf_at(point) else {
        return CondEval {
            log: f64::NEG_INFINITY,
            visited: 0,
            fallback: false,
        };
    };
    let leaf = model.leaf(a.target);
    let (lc, fallback) = leaf.dist.log_conditional(point, &leaf.region, CHILD);
    CondEval {
        log: a.alpha.ln() + lc,
        visited: 1,
        fallback,
    }
}

/// Probes a leaf at the parent coordinates of `point` and over `span` for the child.
fn leaf_log_span(leaf: &Leaf, point: &[f64], span: &Extent) -> f64 {
    let probes: Vec<Probe> = point
        .iter()
        .enumerate()
        .map(|(d, &x)| {
            if d != CHILD {
                Probe::At(x)
            } else {
                match span {
                    Extent::Interval { lo, hi } => Probe::Span(*lo, *hi),
                    Extent::Values(vs) => Probe::Among(vs),
                }
            }
        })
        .collect();
    leaf.dist.log_probe(&leaf.region, &probes)
}

fn intersect(a: &Extent, b: &Extent) -> Option<Extent> {
    match (a, b) {
        (Extent::Interval { lo: a0, hi: a1 }, Extent::Interval { lo: b0, hi: b1 }) => {
            let (lo, hi) = (a0.max(*b0), a1.min(*b1));
            (lo < hi).then_some(Extent::Interval { lo, hi })
        }
        (Extent::Values(x), Extent::Values(y)) => {
            let vs: Vec<u32> = x.iter().copied().filter(|v| y.binary_search(v).is_ok()).collect();
            (!vs.is_empty()).then_some(Extent::Values(vs))
        }
        _ => None,
    }
}

impl ConditionalModel {
    pub fn learn(data: &Dataset, spec: &ConditionalSpec, cfg: &CondConfig) -> Result<Self> {
        cfg.check()?;
        spec.check(&data.schema)?;
        let region = spec.region(&data.schema);
        let points: Vec<Vec<f64>> = data.rows.iter().map(|r| spec.project(r)).collect();
        let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
        Self::learn_local(&refs, region, spec.clone(), cfg)
    }

    /// Learns from points already in local coordinates.
    pub fn learn_local(points: &[&[f64]], region: Region, spec: ConditionalSpec, cfg: &CondConfig) -> Result<Self> {
        cfg.check()?;
        if points.is_empty() {
            return Err(Error::Data(format!("no training rows for variable {}", spec.child)));
        }
        let tree = cfg.learner(&region).learn(points, &region);
        let kind = match cfg.mode {
            Mode::Cart => CondKind::Cart(tree),
            Mode::Stratified => CondKind::Stratified(tree),
            Mode::Joint => CondKind::Joint(tree),
            Mode::Approx => CondKind::Approx(ApproxModel::build(tree, points, cfg.direct_alpha)?),
        };
        Ok(ConditionalModel {
            spec,
            region,
            kind,
            epsilon: cfg.epsilon,
        })
    }

    pub fn mode(&self) -> Mode {
        match self.kind {
            CondKind::Cart(_) => Mode::Cart,
            CondKind::Stratified(_) => Mode::Stratified,
            CondKind::Joint(_) => Mode::Joint,
            CondKind::Approx(_) => Mode::Approx,
        }
    }

    /// The underlying density tree (the joint tree for approximate models).
    pub fn tree(&self) -> &DensityTree {
        match &self.kind {
            CondKind::Cart(t) | CondKind::Stratified(t) | CondKind::Joint(t) => t,
            CondKind::Approx(m) => &m.joint,
        }
    }

    /// Unsmoothed conditional log density at a local point.
    pub fn eval_raw(&self, point: &[f64]) -> CondEval {
        match &self.kind {
            CondKind::Cart(t) | CondKind::Stratified(t) => CondEval {
                log: t.log_density(point),
                visited: 1,
                fallback: false,
            },
            CondKind::Joint(t) => cond_log_density_exact(t, point),
            CondKind::Approx(m) => cond_log_density_approx(m, point),
        }
    }

    /// Smoothed conditional log density at a local point.
    pub fn eval(&self, point: &[f64]) -> CondEval {
        let raw = self.eval_raw(point);
        if !self.region.contains(point) {
            return raw;
        }
        CondEval {
            log: smooth(raw.log, self.epsilon, log_uniform_child(&self.region)),
            ..raw
        }
    }

    pub fn log_density(&self, point: &[f64]) -> f64 {
        self.eval(point).log
    }

    /// Smoothed conditional log density of a full dataset row.
    pub fn log_density_row(&self, row: &[f64]) -> f64 {
        self.log_density(&self.spec.project(row))
    }

    /// Analytic conditional mass of the child over `span` given the parent
    /// coordinates of `point` (its child coordinate is ignored). Unsmoothed.
    pub fn cond_mass(&self, point: &[f64], span: &Extent) -> f64 {
        match &self.kind {
            CondKind::Cart(t) | CondKind::Stratified(t) => {
                let mut total = 0.0;
                sweep_tree(&t.root, point, CHILD, &mut |l| {
                    total += l.mass * l.dist.conditional_mass(point, &l.region, CHILD, span);
                });
                total
            }
            CondKind::Joint(t) => {
                let (mut num, mut den) = (Vec::new(), Vec::new());
                sweep_tree(&t.root, point, CHILD, &mut |l| {
                    num.push(l.mass.ln() + leaf_log_span(l, point, span));
                    den.push(l.mass.ln() + leaf_log_marginal(l, point));
                });
                (log_sum_exp(&num) - log_sum_exp(&den)).exp()
            }
            CondKind::Approx(m) => {
                let mut total = 0.0;
                m.aux.root.sweep(point, CHILD, &mut |a| {
                    let leaf = m.leaf(a.target);
                    if let Some(s) = intersect(span, &a.region.dims[CHILD]) {
                        total += a.alpha * leaf.dist.conditional_mass(point, &leaf.region, CHILD, &s);
                    }
                });
                total
            }
        }
    }

    /// Draws the child given the parent coordinates of `point` (its child
    /// coordinate is ignored). Smoothing is honored: with probability
    /// epsilon the draw is uniform over the child's range.
    pub fn sample_child(&self, point: &[f64], rng: &mut Rng) -> f64 {
        let full = &self.region.dims[CHILD];
        if rng.random::<f64>() < self.epsilon {
            return uniform_in(full, rng);
        }
        let mut local = point.to_vec();
        local[CHILD] = match full {
            Extent::Interval { lo, hi } => 0.5 * (lo + hi),
            Extent::Values(vs) => f64::from(vs[0]),
        };
        match &self.kind {
            CondKind::Cart(t) | CondKind::Stratified(t) => {
                let mut cands: Vec<(&Leaf, f64)> = Vec::new();
                sweep_tree(&t.root, &local, CHILD, &mut |l| cands.push((l, l.mass)));
                match pick(&cands, rng) {
                    Some(l) => l.dist.sample_child(&local, &l.region, CHILD, rng),
                    None => uniform_in(full, rng),
                }
            }
            CondKind::Joint(t) => {
                let mut logs: Vec<(&Leaf, f64)> = Vec::new();
                sweep_tree(&t.root, &local, CHILD, &mut |l| logs.push((l, l.mass.ln() + leaf_log_marginal(l, &local))));
                let m = logs.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
                let cands: Vec<(&Leaf, f64)> = logs.iter().map(|&(l, w)| (l, (w - m).exp())).collect();
                match pick(&cands, rng) {
                    Some(l) => l.dist.sample_child(&local, &l.region, CHILD, rng),
                    None => uniform_in(full, rng),
                }
            }
            CondKind::Approx(am) => {
                let mut cands: Vec<(&AuxLeaf, f64)> = Vec::new();
                am.aux.root.sweep(&local, CHILD, &mut |a| {
                    let leaf = am.leaf(a.target);
                    let w = a.alpha * leaf.dist.conditional_mass(&local, &leaf.region, CHILD, &a.region.dims[CHILD]);
                    cands.push((a, w));
                });
                let Some(a) = pick(&cands, rng) else {
                    return uniform_in(full, rng);
                };
                let leaf = am.leaf(a.target);
                let slice = &a.region.dims[CHILD];
                // the slice usually is the whole leaf; otherwise draw from the
                // leaf conditional until the value lands inside it
                for _ in 0..1000 {
                    let x = leaf.dist.sample_child(&local, &leaf.region, CHILD, rng);
                    if slice.contains(x) {
                        return x;
                    }
                }
                uniform_in(slice, rng)
            }
        }
    }
}

fn pick<'a, T>(cands: &[(&'a T, f64)], rng: &mut Rng) -> Option<&'a T> {
    let total: f64 = cands.iter().map(|c| c.1).sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    for (item, w) in cands {
        if u < *w {
            return Some(item);
        }
        u -= w;
    }
    cands.iter().rev().find(|c| c.1 > 0.0).map(|c| c.0)
}

fn uniform_in(e: &Extent, rng: &mut Rng) -> f64 {
    match e {
        Extent::Interval { lo, hi } => lo + rng.random::<f64>() * (hi - lo),
        Extent::Values(vs) => f64::from(vs[rng.random_range(0..vs.len())]),
    }
}

/// Learns a CART-like conditional.
pub fn learn_cart(data: &Dataset, spec: &ConditionalSpec, cfg: &CondConfig) -> Result<ConditionalModel> {
    ConditionalModel::learn(data, spec, &CondConfig { mode: Mode::Cart, ..cfg.clone() })
}

/// Learns a stratified conditional.
pub fn learn_stratified(data: &Dataset, spec: &ConditionalSpec, cfg: &CondConfig) -> Result<ConditionalModel> {
    ConditionalModel::learn(
        data,
        spec,
        &CondConfig {
            mode: Mode::Stratified,
            ..cfg.clone()
        },
    )
}

/// Learns a joint tree used conditionally (exact evaluation).
pub fn learn_joint(data: &Dataset, spec: &ConditionalSpec, cfg: &CondConfig) -> Result<ConditionalModel> {
    ConditionalModel::learn(data, spec, &CondConfig { mode: Mode::Joint, ..cfg.clone() })
}

/// Learns an approximately conditionalized joint tree.
pub fn learn_approx(data: &Dataset, spec: &ConditionalSpec, cfg: &CondConfig) -> Result<ConditionalModel> {
    ConditionalModel::learn(data, spec, &CondConfig { mode: Mode::Approx, ..cfg.clone() })
}
