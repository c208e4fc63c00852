//! Greedy growth and holdout pruning.

use serde::{Deserialize, Serialize};

use crate::data::holdout_indices;
use crate::leaf::LeafBuilder;
use crate::region::{Extent, Region};
use crate::rng::{child_seed, mix};

use super::{DensityTree, Node};

const KEY_SCORE: u64 = 0x5C0E;
const KEY_PRUNE: u64 = 0x9E7E;
const KEY_INNER: u64 = 0x1A7E;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowConfig {
    /// Local dimensions the grower may branch on.
    pub branch_dims: Vec<usize>,
    /// Local dimensions whose likelihood is modeled. Branches on these split
    /// the mass between children; branches on other dimensions do not.
    pub target_dims: Vec<usize>,
    pub min_points: usize,
    pub holdout_fraction: f64,
    pub max_depth: usize,
    pub seed: u64,
}

impl GrowConfig {
    pub fn new(branch_dims: Vec<usize>, target_dims: Vec<usize>) -> Self {
        GrowConfig {
            branch_dims,
            target_dims,
            min_points: 10,
            holdout_fraction: 0.3,
            max_depth: 40,
            seed: 0,
        }
    }
}

/// What a learner puts where growth stops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafFitter {
    Dist(LeafBuilder),
    /// A whole subtree from another learner (stratified trees).
    Subtree(Box<TreeLearner>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeLearner {
    pub grow: GrowConfig,
    pub leaves: LeafFitter,
}

/// Result of pruning.
#[derive(Clone, Debug)]
pub struct Pruned {
    pub tree: DensityTree,
    /// Set when the holdout was empty and the tree came back unchanged.
    pub empty_holdout: bool,
}

/// Grows a tree on all of `points` without pruning.
pub fn grow_tree(points: &[&[f64]], region: &Region, learner: &TreeLearner) -> DensityTree {
    DensityTree::new(region.clone(), learner.grow_node(points, region, learner.grow.seed, 0))
}

/// Bottom-up pruning: every internal node is replaced by a leaf refitted on
/// the `grow` points reaching it when that does not lower the log-likelihood
/// of the `holdout` points reaching it.
pub fn prune_tree(tree: DensityTree, grow: &[&[f64]], holdout: &[&[f64]], learner: &TreeLearner) -> Pruned {
    if holdout.is_empty() {
        return Pruned {
            tree,
            empty_holdout: true,
        };
    }
    let DensityTree { region, root } = tree;
    let root = learner.prune_node(root, grow, holdout, &region, learner.grow.seed);
    Pruned {
        tree: DensityTree::new(region, root),
        empty_holdout: false,
    }
}

/// Points grouped by the child of `node` they descend into.
fn route_all<'a>(node: &Node, points: &[&'a [f64]]) -> Vec<Vec<&'a [f64]>> {
    let mut out = vec![Vec::new(); node.children().len()];
    for p in points {
        if let Some((i, _)) = node.route(p) {
            out[i].push(*p);
        }
    }
    out
}

fn holdout_ll(node: &Node, points: &[&[f64]]) -> f64 {
    points.iter().map(|p| node.path_log_density(p)).sum()
}

impl TreeLearner {
    pub fn new(grow: GrowConfig, leaves: LeafFitter) -> Self {
        TreeLearner { grow, leaves }
    }

    /// Grows on a share of `points` and prunes with the rest. Too few points
    /// for a split means growing on everything without pruning.
    pub fn learn(&self, points: &[&[f64]], region: &Region) -> DensityTree {
        match holdout_indices(points.len(), mix(self.grow.seed, KEY_PRUNE), self.grow.holdout_fraction) {
            Ok((grow_idx, hold_idx)) => {
                let grow: Vec<&[f64]> = grow_idx.iter().map(|&i| points[i]).collect();
                let hold: Vec<&[f64]> = hold_idx.iter().map(|&i| points[i]).collect();
                let tree = grow_tree(&grow, region, self);
                prune_tree(tree, &grow, &hold, self).tree
            }
            Err(_) => grow_tree(points, region, self),
        }
    }

    fn is_target(&self, dim: usize) -> bool {
        self.grow.target_dims.contains(&dim)
    }

    fn fit_leaf(&self, points: &[&[f64]], region: &Region, seed: u64) -> Node {
        match &self.leaves {
            LeafFitter::Dist(b) => Node::leaf(region.clone(), points.len(), b.fit(points, region, seed)),
            LeafFitter::Subtree(inner) => inner.grow_node(points, region, mix(seed, KEY_INNER), 0),
        }
    }

    /// The leaf used when pruning collapses a node: subtrees are pruned too.
    fn refit(&self, grow: &[&[f64]], hold: &[&[f64]], region: &Region, seed: u64) -> Node {
        match &self.leaves {
            LeafFitter::Dist(_) => self.fit_leaf(grow, region, seed),
            LeafFitter::Subtree(inner) => {
                let s = mix(seed, KEY_INNER);
                let node = inner.grow_node(grow, region, s, 0);
                inner.prune_node(node, grow, hold, region, s)
            }
        }
    }

    fn grow_node(&self, points: &[&[f64]], region: &Region, seed: u64, depth: usize) -> Node {
        let cfg = &self.grow;
        let candidates: Vec<usize> = cfg
            .branch_dims
            .iter()
            .copied()
            .filter(|&d| region.splittable(d))
            .collect();
        if points.len() < cfg.min_points || depth >= cfg.max_depth || candidates.is_empty() {
            return self.fit_leaf(points, region, seed);
        }
        let Ok((build_idx, score_idx)) = holdout_indices(points.len(), mix(seed, KEY_SCORE), cfg.holdout_fraction) else {
            return self.fit_leaf(points, region, seed);
        };
        let build: Vec<&[f64]> = build_idx.iter().map(|&i| points[i]).collect();
        let score: Vec<&[f64]> = score_idx.iter().map(|&i| points[i]).collect();

        let mut best = holdout_ll(&self.fit_leaf(&build, region, seed), &score);
        let mut choice = None;
        let mut sorted = candidates;
        sorted.sort_unstable();
        for d in sorted {
            let stump = self.branch(&build, region, d, seed, &mut |pts, r, s| self.fit_leaf(pts, r, s));
            let ll = holdout_ll(&stump, &score);
            if ll > best {
                best = ll;
                choice = Some(d);
            }
        }
        match choice {
            None => self.fit_leaf(points, region, seed),
            Some(d) => self.branch(points, region, d, seed, &mut |pts, r, s| self.grow_node(pts, r, s, depth + 1)),
        }
    }

    /// A branch on `dim` whose children are built by `child`.
    fn branch(
        &self,
        points: &[&[f64]],
        region: &Region,
        dim: usize,
        seed: u64,
        child: &mut dyn FnMut(&[&[f64]], &Region, u64) -> Node,
    ) -> Node {
        let n = points.len() as f64;
        let target = self.is_target(dim);
        match &region.dims[dim] {
            Extent::Interval { .. } => {
                let (at, low_r, high_r) = region.halves(dim);
                let (low, high): (Vec<&[f64]>, Vec<&[f64]>) = points.iter().partition(|p| p[dim] <= at);
                let weights = if !target {
                    [1.0, 1.0]
                } else if points.is_empty() {
                    [0.5, 0.5]
                } else {
                    [low.len() as f64 / n, high.len() as f64 / n]
                };
                Node::Split {
                    dim,
                    at,
                    weights,
                    low: Box::new(child(&low, &low_r, child_seed(seed, 0))),
                    high: Box::new(child(&high, &high_r, child_seed(seed, 1))),
                }
            }
            Extent::Values(vs) => {
                let k = vs.len() as f64;
                let mut weights = Vec::with_capacity(vs.len());
                let mut children = Vec::with_capacity(vs.len());
                for (i, &v) in vs.iter().enumerate() {
                    let part: Vec<&[f64]> = points.iter().copied().filter(|p| p[dim] == f64::from(v)).collect();
                    // one pseudo-count per value keeps unseen values reachable
                    weights.push(if target { (part.len() as f64 + 1.0) / (n + k) } else { 1.0 });
                    children.push(child(&part, &region.with_value(dim, v), child_seed(seed, i as u64)));
                }
                Node::Categorical {
                    dim,
                    values: vs.clone(),
                    weights,
                    children,
                }
            }
        }
    }

    fn prune_node(&self, node: Node, grow: &[&[f64]], hold: &[&[f64]], region: &Region, seed: u64) -> Node {
        let Some(dim) = node.dim() else {
            return node;
        };
        if !self.grow.branch_dims.contains(&dim) {
            // below this level: the node belongs to an inner learner
            return match &self.leaves {
                LeafFitter::Subtree(inner) => inner.prune_node(node, grow, hold, region, mix(seed, KEY_INNER)),
                LeafFitter::Dist(_) => node,
            };
        }
        let grow_parts = route_all(&node, grow);
        let hold_parts = route_all(&node, hold);
        let subtree = match node {
            Node::Split {
                dim,
                at,
                weights,
                low,
                high,
            } => {
                let (_, low_r, high_r) = region.halves(dim);
                Node::Split {
                    dim,
                    at,
                    weights,
                    low: Box::new(self.prune_node(*low, &grow_parts[0], &hold_parts[0], &low_r, child_seed(seed, 0))),
                    high: Box::new(self.prune_node(*high, &grow_parts[1], &hold_parts[1], &high_r, child_seed(seed, 1))),
                }
            }
            Node::Categorical {
                dim,
                values,
                weights,
                children,
            } => {
                let children = children
                    .into_iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let r = region.with_value(dim, values[i]);
                        self.prune_node(c, &grow_parts[i], &hold_parts[i], &r, child_seed(seed, i as u64))
                    })
                    .collect();
                Node::Categorical {
                    dim,
                    values,
                    weights,
                    children,
                }
            }
            Node::Leaf(_) => unreachable!(),
        };
        let replacement = self.refit(grow, hold, region, seed);
        if holdout_ll(&replacement, hold) >= holdout_ll(&subtree, hold) {
            replacement
        } else {
            subtree
        }
    }
}
