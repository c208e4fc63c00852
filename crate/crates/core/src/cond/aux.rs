//! Marginal structure trees, auxiliary trees and soft-branch coefficients.
//!
//! Local dimension 0 is the child; every other local dimension is a parent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leaf::Probe;
use crate::region::{Extent, Region};
use crate::stats::log_sum_exp;
use crate::tree::{DensityTree, Leaf, Node};

use super::shape::Shape;

const CHILD: usize = 0;
/// Refinement deeper than this means the joint tree is not a midpoint tree.
const MAX_REFINE_DEPTH: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalLeaf {
    /// Parent-space box; the child dimension spans the whole root range.
    pub region: Region,
    /// Ids of the joint-tree leaves whose parent extents cover `region`.
    pub leaves: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxLeaf {
    pub region: Region,
    /// The single joint-tree leaf this box intersects.
    pub target: usize,
    /// Index of the child-only subtree (marginal leaf) the box belongs to.
    pub group: usize,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxGroup {
    pub region: Region,
    pub members: Vec<usize>,
    /// No training point fell in the group; its marginals were taken at the
    /// centre of the parent box.
    pub center_fallback: bool,
    /// Every member had zero weight; alphas were spread evenly.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxTree {
    pub root: Shape<AuxLeaf>,
    pub groups: Vec<AuxGroup>,
}

/// The joint tree with every child branch removed: one leaf per cell of the
/// overlay of all parent-space boxes, listing the joint leaves covering it.
pub fn marginalize_structure(tree: &DensityTree) -> Shape<MarginalLeaf> {
    overlay(vec![&tree.root], tree.region.clone())
}

fn overlay(frontier: Vec<&Node>, region: Region) -> Shape<MarginalLeaf> {
    let mut queue = frontier;
    let mut kept: Vec<&Node> = Vec::new();
    let mut pending: Option<&Node> = None;
    while let Some(node) = queue.pop() {
        match node {
            Node::Leaf(_) => kept.push(node),
            _ if node.dim() == Some(CHILD) => queue.extend(node.children()),
            Node::Split { dim, at, low, high, .. } => {
                let (lo, hi) = region.dims[*dim].interval();
                if hi <= *at {
                    queue.push(low);
                } else if lo >= *at {
                    queue.push(high);
                } else {
                    if pending.is_none() {
                        pending = Some(node);
                    }
                    kept.push(node);
                }
            }
            Node::Categorical { dim, values, children, .. } => {
                let own = region.dims[*dim].values();
                if own.len() == 1 {
                    let i = values.binary_search(&own[0]).expect("value admissible at the node");
                    queue.push(&children[i]);
                } else {
                    if pending.is_none() {
                        pending = Some(node);
                    }
                    kept.push(node);
                }
            }
        }
    }
    match pending {
        None => {
            let mut leaves: Vec<usize> = kept
                .iter()
                .map(|n| match n {
                    Node::Leaf(l) => l.id,
                    _ => unreachable!(),
                })
                .collect();
            leaves.sort_unstable();
            Shape::Leaf(MarginalLeaf { region, leaves })
        }
        Some(Node::Split { dim, at, .. }) => {
            let (lo, hi) = region.dims[*dim].interval();
            let mut low_r = region.clone();
            let mut high_r = region;
            low_r.dims[*dim] = Extent::Interval { lo, hi: *at };
            high_r.dims[*dim] = Extent::Interval { lo: *at, hi };
            Shape::Split {
                dim: *dim,
                at: *at,
                low: Box::new(overlay(kept.clone(), low_r)),
                high: Box::new(overlay(kept, high_r)),
            }
        }
        Some(Node::Categorical { dim, .. }) => {
            let values = region.dims[*dim].values().to_vec();
            let children = values
                .iter()
                .map(|&v| overlay(kept.clone(), region.with_value(*dim, v)))
                .collect();
            Shape::Categorical {
                dim: *dim,
                values,
                children,
            }
        }
        Some(Node::Leaf(_)) => unreachable!(),
    }
}

/// Leaves of `tree` indexed by id.
pub fn leaf_index(tree: &DensityTree) -> Vec<&Leaf> {
    let leaves = tree.leaves();
    debug_assert!(leaves.iter().enumerate().all(|(i, l)| l.id == i));
    leaves
}

/// Branches each marginal leaf on the child until every box meets exactly
/// one joint leaf. Alphas start at 1.
pub fn refine_to_aux(marginal: &Shape<MarginalLeaf>, tree: &DensityTree) -> Result<AuxTree> {
    let leaves = leaf_index(tree);
    let mut groups = Vec::new();
    let root = refine_shape(marginal, &leaves, &mut groups)?;
    Ok(AuxTree { root, groups })
}

fn refine_shape(node: &Shape<MarginalLeaf>, leaves: &[&Leaf], groups: &mut Vec<AuxGroup>) -> Result<Shape<AuxLeaf>> {
    Ok(match node {
        Shape::Leaf(m) => {
            let group = groups.len();
            groups.push(AuxGroup {
                region: m.region.clone(),
                members: m.leaves.clone(),
                center_fallback: false,
                degenerate: false,
            });
            refine_child(m.region.clone(), &m.leaves, leaves, group, 0)?
        }
        Shape::Split { dim, at, low, high } => Shape::Split {
            dim: *dim,
            at: *at,
            low: Box::new(refine_shape(low, leaves, groups)?),
            high: Box::new(refine_shape(high, leaves, groups)?),
        },
        Shape::Categorical { dim, values, children } => Shape::Categorical {
            dim: *dim,
            values: values.clone(),
            children: children
                .iter()
                .map(|c| refine_shape(c, leaves, groups))
                .collect::<Result<_>>()?,
        },
    })
}

fn refine_child(region: Region, candidates: &[usize], leaves: &[&Leaf], group: usize, depth: usize) -> Result<Shape<AuxLeaf>> {
    let hits: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&id| leaves[id].region.overlaps(&region))
        .collect();
    match hits.len() {
        0 => Err(Error::Internal(format!("auxiliary box meets no joint leaf (group {group})"))),
        1 => Ok(Shape::Leaf(AuxLeaf {
            region,
            target: hits[0],
            group,
            alpha: 1.0,
        })),
        _ if depth >= MAX_REFINE_DEPTH => Err(Error::Internal(format!(
            "auxiliary refinement exceeded {MAX_REFINE_DEPTH} levels (group {group})"
        ))),
        _ => match &region.dims[CHILD] {
            Extent::Interval { .. } => {
                let (at, low_r, high_r) = region.halves(CHILD);
                Ok(Shape::Split {
                    dim: CHILD,
                    at,
                    low: Box::new(refine_child(low_r, &hits, leaves, group, depth + 1)?),
                    high: Box::new(refine_child(high_r, &hits, leaves, group, depth + 1)?),
                })
            }
            Extent::Values(vs) => {
                if vs.len() == 1 {
                    return Err(Error::Internal(format!("joint leaves overlap (group {group})")));
                }
                Ok(Shape::Categorical {
                    dim: CHILD,
                    values: vs.clone(),
                    children: vs
                        .iter()
                        .map(|&v| refine_child(region.with_value(CHILD, v), &hits, leaves, group, depth + 1))
                        .collect::<Result<_>>()?,
                })
            }
        },
    }
}

/// Log marginal density of the parent coordinates of `point` under `leaf`.
pub fn leaf_log_marginal(leaf: &Leaf, point: &[f64]) -> f64 {
    let probes: Vec<Probe> = point
        .iter()
        .enumerate()
        .map(|(d, &x)| if d == CHILD { Probe::Free } else { Probe::At(x) })
        .collect();
    leaf.dist.log_probe(&leaf.region, &probes)
}

/// Fills in the soft-branch coefficients from the training points.
///
/// Within group `s` every member leaf `l` gets `P_s(pi | l)`, the mean of its
/// parent marginal over the training points routed to the group, and
/// `alpha = P(l) P_s(l) / sum_l' P(l') P_s(l')`. With `direct` set, alpha is
/// instead the mean over the group's points of the exact posterior
/// `P(l | pi)`.
pub fn estimate_alphas(aux: &mut AuxTree, tree: &DensityTree, points: &[&[f64]], direct: bool) {
    let leaves = leaf_index(tree);
    let mut routed: Vec<Vec<&[f64]>> = vec![Vec::new(); aux.groups.len()];
    for p in points {
        if let Some(l) = aux.root.leaf_at(p) {
            routed[l.group].push(p);
        }
    }
    let mut alphas: Vec<Vec<f64>> = Vec::with_capacity(aux.groups.len());
    for (g, pts) in aux.groups.iter_mut().zip(&routed) {
        let center;
        let pts: Vec<&[f64]> = if pts.is_empty() {
            g.center_fallback = true;
            center = g.region.center();
            vec![center.as_slice()]
        } else {
            pts.clone()
        };
        let log_mass: Vec<f64> = g.members.iter().map(|&id| leaves[id].mass.ln()).collect();
        let weights: Vec<f64> = if direct {
            let mut acc = vec![Vec::with_capacity(pts.len()); g.members.len()];
            for p in &pts {
                let joint: Vec<f64> = g
                    .members
                    .iter()
                    .zip(&log_mass)
                    .map(|(&id, m)| m + leaf_log_marginal(leaves[id], p))
                    .collect();
                let z = log_sum_exp(&joint);
                for (a, j) in acc.iter_mut().zip(&joint) {
                    a.push(if z == f64::NEG_INFINITY { f64::NEG_INFINITY } else { j - z });
                }
            }
            acc.iter().map(|a| log_sum_exp(a) - (pts.len() as f64).ln()).collect()
        } else {
            g.members
                .iter()
                .zip(&log_mass)
                .map(|(&id, m)| {
                    let logs: Vec<f64> = pts.iter().map(|p| leaf_log_marginal(leaves[id], p)).collect();
                    m + log_sum_exp(&logs) - (pts.len() as f64).ln()
                })
                .collect()
        };
        let z = log_sum_exp(&weights);
        g.degenerate = z == f64::NEG_INFINITY;
        alphas.push(
            weights
                .iter()
                .map(|w| {
                    if g.degenerate {
                        1.0 / g.members.len() as f64
                    } else {
                        (w - z).exp().max(f64::MIN_POSITIVE)
                    }
                })
                .collect(),
        );
    }
    let groups = &aux.groups;
    aux.root.for_each_leaf_mut(&mut |l: &mut AuxLeaf| {
        let k = groups[l.group]
            .members
            .iter()
            .position(|&id| id == l.target)
            .expect("target is a member of its group");
        l.alpha = alphas[l.group][k];
    });
}
