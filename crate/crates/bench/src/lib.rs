//! Shared fixtures for the criterion benchmarks.

use denstree::harness::generate_connected;
use denstree::{CondConfig, ConditionalModel, ConditionalSpec, Dataset, LeafFamily, Mode};

pub fn connected(n: usize) -> Dataset {
    generate_connected(n, 11).expect("positive row count")
}

/// `P(x2 | x1)` on Connected data.
pub fn conditional(data: &Dataset, mode: Mode, family: LeafFamily) -> ConditionalModel {
    let cfg = CondConfig::new(mode, family).with_seed(3);
    ConditionalModel::learn(data, &ConditionalSpec::new(1, vec![0]), &cfg).expect("learnable fixture")
}

/// Local `[child, parent]` query points.
pub fn queries(data: &Dataset, n: usize) -> Vec<Vec<f64>> {
    data.rows.iter().take(n).map(|r| vec![r[1], r[0]]).collect()
}
