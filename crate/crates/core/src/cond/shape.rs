//! Branching skeletons without masses, used for marginal and auxiliary trees.

use serde::{Deserialize, Serialize};

use crate::tree::Node;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape<L> {
    Leaf(L),
    Split {
        dim: usize,
        at: f64,
        low: Box<Shape<L>>,
        high: Box<Shape<L>>,
    },
    Categorical {
        dim: usize,
        values: Vec<u32>,
        children: Vec<Shape<L>>,
    },
}

impl<L> Shape<L> {
    fn route(&self, point: &[f64]) -> Option<&Shape<L>> {
        match self {
            Shape::Leaf(_) => None,
            Shape::Split { dim, at, low, high } => Some(if point[*dim] <= *at { low } else { high }),
            Shape::Categorical { dim, values, children } => {
                let v = point[*dim];
                if v < 0.0 || v.fract() != 0.0 {
                    return None;
                }
                values.binary_search(&(v as u32)).ok().map(|i| &children[i])
            }
        }
    }

    fn children(&self) -> Vec<&Shape<L>> {
        match self {
            Shape::Leaf(_) => Vec::new(),
            Shape::Split { low, high, .. } => vec![low, high],
            Shape::Categorical { children, .. } => children.iter().collect(),
        }
    }

    pub fn leaf_at(&self, point: &[f64]) -> Option<&L> {
        let mut node = self;
        loop {
            match node {
                Shape::Leaf(l) => return Some(l),
                _ => node = node.route(point)?,
            }
        }
    }

    /// Leaves in depth-first order, low side first.
    pub fn leaves(&self) -> Vec<&L> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match node {
                Shape::Leaf(l) => out.push(l),
                _ => stack.extend(node.children().into_iter().rev()),
            }
        }
        out
    }

    pub fn for_each_leaf_mut(&mut self, f: &mut impl FnMut(&mut L)) {
        match self {
            Shape::Leaf(l) => f(l),
            Shape::Split { low, high, .. } => {
                low.for_each_leaf_mut(f);
                high.for_each_leaf_mut(f);
            }
            Shape::Categorical { children, .. } => {
                for c in children {
                    c.for_each_leaf_mut(f);
                }
            }
        }
    }

    /// Leaves reachable from `point` when branches on `free` are enumerated
    /// rather than followed.
    pub fn sweep<'a>(&'a self, point: &[f64], free: usize, f: &mut impl FnMut(&'a L)) {
        match self {
            Shape::Leaf(l) => f(l),
            Shape::Split { dim, .. } | Shape::Categorical { dim, .. } if *dim == free => {
                for c in self.children() {
                    c.sweep(point, free, f);
                }
            }
            _ => {
                if let Some(c) = self.route(point) {
                    c.sweep(point, free, f);
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        self.children().iter().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }
}

/// [`Shape::sweep`] over a density tree.
pub fn sweep_tree<'a>(node: &'a Node, point: &[f64], free: usize, f: &mut impl FnMut(&'a crate::tree::Leaf)) {
    match node {
        Node::Leaf(l) => f(l),
        _ if node.dim() == Some(free) => {
            for c in node.children() {
                sweep_tree(c, point, free, f);
            }
        }
        _ => {
            if let Some((i, _)) = node.route(point) {
                sweep_tree(node.child(i), point, free, f);
            }
        }
    }
}
