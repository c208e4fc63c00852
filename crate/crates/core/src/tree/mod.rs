//! Density trees.
//!
//! Continuous branches split the node's current interval at its midpoint
//! (values equal to the split go low); discrete branches get one child per
//! admissible value. Each branch edge carries a weight: the share of the
//! parent's mass given to that child when the branch dimension is one the tree
//! models, and 1 otherwise. A leaf's mass is the product of the weights on its
//! path, so a tree evaluates `mass(leaf) * leaf density` with the leaf density
//! normalized over the leaf's own box.

mod grow;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::leaf::LeafDist;
use crate::region::Region;
use crate::rng::Rng;

pub use grow::{grow_tree, prune_tree, GrowConfig, LeafFitter, Pruned, TreeLearner};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub id: usize,
    pub region: Region,
    pub mass: f64,
    /// Training points that reached the leaf.
    pub count: usize,
    pub dist: LeafDist,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf(Leaf),
    Split {
        dim: usize,
        at: f64,
        weights: [f64; 2],
        low: Box<Node>,
        high: Box<Node>,
    },
    Categorical {
        dim: usize,
        values: Vec<u32>,
        weights: Vec<f64>,
        children: Vec<Node>,
    },
}

impl Node {
    pub fn leaf(region: Region, count: usize, dist: LeafDist) -> Node {
        Node::Leaf(Leaf {
            id: 0,
            region,
            mass: 1.0,
            count,
            dist,
        })
    }

    /// Branch dimension, `None` for a leaf.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Node::Leaf(_) => None,
            Node::Split { dim, .. } | Node::Categorical { dim, .. } => Some(*dim),
        }
    }

    /// Index of the child that `point` descends into, with its edge weight.
    pub fn route(&self, point: &[f64]) -> Option<(usize, f64)> {
        match self {
            Node::Leaf(_) => None,
            Node::Split { dim, at, weights, .. } => {
                let side = usize::from(point[*dim] > *at);
                Some((side, weights[side]))
            }
            Node::Categorical { dim, values, weights, .. } => {
                let v = point[*dim];
                if v < 0.0 || v.fract() != 0.0 {
                    return None;
                }
                let i = values.binary_search(&(v as u32)).ok()?;
                Some((i, weights[i]))
            }
        }
    }

    pub fn children(&self) -> Vec<&Node> {
        match self {
            Node::Leaf(_) => Vec::new(),
            Node::Split { low, high, .. } => vec![low, high],
            Node::Categorical { children, .. } => children.iter().collect(),
        }
    }

    pub fn child(&self, i: usize) -> &Node {
        match self {
            Node::Leaf(_) => panic!("leaf has no children"),
            Node::Split { low, high, .. } => {
                if i == 0 {
                    low
                } else {
                    high
                }
            }
            Node::Categorical { children, .. } => &children[i],
        }
    }

    pub fn edge_weights(&self) -> Vec<f64> {
        match self {
            Node::Leaf(_) => Vec::new(),
            Node::Split { weights, .. } => weights.to_vec(),
            Node::Categorical { weights, .. } => weights.clone(),
        }
    }

    /// The leaf whose box contains `point`; `None` off the tree's domain.
    pub fn leaf_at(&self, point: &[f64]) -> Option<&Leaf> {
        let mut node = self;
        loop {
            match node {
                Node::Leaf(l) => return Some(l),
                _ => node = node.child(node.route(point)?.0),
            }
        }
    }

    /// Log density below this node, multiplying edge weights on the way down
    /// instead of reading leaf masses. Used while masses are not yet final.
    pub fn path_log_density(&self, point: &[f64]) -> f64 {
        let mut node = self;
        let mut total = 0.0;
        loop {
            match node {
                Node::Leaf(l) => return total + l.dist.log_density(point, &l.region),
                _ => match node.route(point) {
                    Some((i, w)) => {
                        total += w.ln();
                        node = node.child(i);
                    }
                    None => return f64::NEG_INFINITY,
                },
            }
        }
    }

    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match node {
                Node::Leaf(l) => out.push(l),
                _ => stack.extend(node.children().into_iter().rev()),
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        self.children().iter().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }

    /// Assigns leaf ids in depth-first order and masses from edge weights.
    fn finalize(&mut self, mass: f64, next: &mut usize) {
        match self {
            Node::Leaf(l) => {
                l.id = *next;
                l.mass = mass;
                *next += 1;
            }
            Node::Split { weights, low, high, .. } => {
                low.finalize(mass * weights[0], next);
                high.finalize(mass * weights[1], next);
            }
            Node::Categorical { weights, children, .. } => {
                for (c, w) in children.iter_mut().zip(weights.iter()) {
                    c.finalize(mass * w, next);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityTree {
    pub region: Region,
    pub root: Node,
}

impl DensityTree {
    /// Wraps a root node, numbering leaves and deriving their masses.
    pub fn new(region: Region, mut root: Node) -> Self {
        let mut next = 0;
        root.finalize(1.0, &mut next);
        DensityTree { region, root }
    }

    /// A tree with one uniform leaf over `region`.
    pub fn uniform(region: Region) -> Self {
        let dist = LeafDist::uniform(&region);
        DensityTree::new(region.clone(), Node::leaf(region, 0, dist))
    }

    /// `ln(mass) + leaf log density` at the leaf containing `point`; `-inf`
    /// outside the root box.
    pub fn log_density(&self, point: &[f64]) -> f64 {
        if !self.region.contains(point) {
            return f64::NEG_INFINITY;
        }
        match self.root.leaf_at(point) {
            Some(l) => l.mass.ln() + l.dist.log_density(point, &l.region),
            None => f64::NEG_INFINITY,
        }
    }

    /// Density mixed with the uniform over the root box:
    /// `(1 - eps) p(x) + eps / measure(root)`.
    pub fn smoothed_log_density(&self, point: &[f64], epsilon: f64) -> f64 {
        if !self.region.contains(point) {
            return f64::NEG_INFINITY;
        }
        smooth(self.log_density(point), epsilon, -self.region.total_measure().ln())
    }

    pub fn leaf_at(&self, point: &[f64]) -> Option<&Leaf> {
        if !self.region.contains(point) {
            return None;
        }
        self.root.leaf_at(point)
    }

    pub fn leaves(&self) -> Vec<&Leaf> {
        self.root.leaves()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().len()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn total_mass(&self) -> f64 {
        self.leaves().iter().map(|l| l.mass).sum()
    }

    /// Picks a leaf with probability equal to its mass, then samples inside it.
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let leaves = self.leaves();
        let total: f64 = leaves.iter().map(|l| l.mass).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = leaves[leaves.len() - 1];
        for l in &leaves {
            if u < l.mass {
                pick = l;
                break;
            }
            u -= l.mass;
        }
        pick.dist.sample(&pick.region, rng)
    }
}

/// `ln((1 - eps) e^log_p + eps e^log_uniform)`, exact at the endpoints.
pub fn smooth(log_p: f64, epsilon: f64, log_uniform: f64) -> f64 {
    if epsilon <= 0.0 {
        return log_p;
    }
    if epsilon >= 1.0 {
        return log_uniform;
    }
    if log_p >= log_uniform {
        log_p + (epsilon * (log_uniform - log_p).exp_m1()).ln_1p()
    } else {
        log_uniform + ((1.0 - epsilon) * (log_p - log_uniform).exp_m1()).ln_1p()
    }
}
