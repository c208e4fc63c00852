use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Schema, VarKind};
use crate::error::{Error, Result};
use crate::rng::{mix, rng_for};

/// `scaled = (raw - offset) / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: f64,
    pub scale: f64,
}

impl AffineMap {
    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.offset) / self.scale
    }

    pub fn invert(&self, scaled: f64) -> f64 {
        scaled * self.scale + self.offset
    }
}

/// Maps every continuous column affinely so its data minimum becomes 0 and its
/// maximum 1. Discrete columns get `None`. The returned schema has `[0, 1]`
/// bounds on every continuous variable.
pub fn scale_to_unit(data: &Dataset) -> Result<(Dataset, Vec<Option<AffineMap>>)> {
    let schema = &data.schema;
    let mut maps = Vec::with_capacity(schema.len());
    for (col, var) in schema.variables.iter().enumerate() {
        if !var.kind.is_continuous() {
            maps.push(None);
            continue;
        }
        let (min, max) = data
            .column(col)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        if !(max > min) {
            return Err(Error::ConstantColumn(var.name.clone()));
        }
        maps.push(Some(AffineMap {
            offset: min,
            scale: max - min,
        }));
    }
    let rows = data
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .zip(&maps)
                .map(|(&x, m)| match m {
                    // exact endpoints regardless of rounding in the division
                    Some(m) if x == m.offset => 0.0,
                    Some(m) if x == m.offset + m.scale => 1.0,
                    Some(m) => m.apply(x).clamp(0.0, 1.0),
                    None => x,
                })
                .collect()
        })
        .collect();
    let mut unit = (**schema).clone();
    for var in &mut unit.variables {
        if let VarKind::Continuous { lo, hi } = &mut var.kind {
            *lo = 0.0;
            *hi = 1.0;
        }
    }
    Ok((Dataset::new(Arc::new(unit), rows), maps))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Uniform on `[-magnitude/2, magnitude/2]`.
    Uniform,
    /// Zero-mean Gaussian with standard deviation `magnitude`.
    Gaussian,
}

/// Perturbs every continuous cell and clamps it back into the schema bounds.
pub fn add_noise(data: &Dataset, kind: NoiseKind, magnitude: f64, seed: u64) -> Result<Dataset> {
    if !(magnitude > 0.0 && magnitude.is_finite()) {
        return Err(Error::NoiseMagnitude(magnitude));
    }
    let schema: &Schema = &data.schema;
    let normal = Normal::new(0.0, magnitude).expect("positive std");
    let rows = data
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let mut rng = rng_for(mix(seed, r as u64));
            row.iter()
                .zip(&schema.variables)
                .map(|(&x, var)| match var.kind {
                    VarKind::Continuous { lo, hi } => {
                        let delta = match kind {
                            NoiseKind::Uniform => rng.random_range(-0.5..=0.5) * magnitude,
                            NoiseKind::Gaussian => normal.sample(&mut rng),
                        };
                        (x + delta).clamp(lo, hi)
                    }
                    VarKind::Discrete { .. } => x,
                })
                .collect()
        })
        .collect();
    Ok(Dataset::new(Arc::clone(&data.schema), rows))
}
