//! Aggregation functions that turn a seed row and its neighbors into one
//! synthetic row.
//!
//! Every function except [`interpolate`] aggregates over the set `{x} ∪ N`,
//! where `N` is the neighbor set. Interpolation instead acts on one partner
//! that the caller samples from `N` beforehand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::euclidean;

/// The six aggregation choices, in their fixed ordinal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AggregatorKind {
    Interpolation,
    Maximum,
    Minimum,
    Sum,
    Average,
    WeightedAverage,
}

impl AggregatorKind {
    pub const ALL: [AggregatorKind; 6] = [
        AggregatorKind::Interpolation,
        AggregatorKind::Maximum,
        AggregatorKind::Minimum,
        AggregatorKind::Sum,
        AggregatorKind::Average,
        AggregatorKind::WeightedAverage,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Output stays inside the bounding box of the inputs.
    pub fn is_bounded(self) -> bool {
        self != AggregatorKind::Sum
    }

    /// Applies the aggregator. `partner` and `lambda` are only read by
    /// interpolation; `partner` indexes into `neighbors`.
    pub fn apply(self, x: &[f64], neighbors: &[&[f64]], partner: usize, lambda: f64) -> Result<Vec<f64>> {
        match self {
            AggregatorKind::Interpolation => {
                let x_star = neighbors.get(partner).ok_or(Error::NoNeighbors)?;
                interpolate(x, x_star, lambda)
            }
            AggregatorKind::Maximum => elementwise_max(x, neighbors),
            AggregatorKind::Minimum => elementwise_min(x, neighbors),
            AggregatorKind::Sum => sum_agg(x, neighbors),
            AggregatorKind::Average => average_agg(x, neighbors),
            AggregatorKind::WeightedAverage => {
                let w = inverse_distance_weights(x, neighbors)?;
                weighted_average(x, neighbors, &w)
            }
        }
    }
}

fn check_dims(x: &[f64], neighbors: &[&[f64]]) -> Result<()> {
    for n in neighbors {
        if n.len() != x.len() {
            return Err(Error::DimensionMismatch(x.len(), n.len()));
        }
    }
    Ok(())
}

/// `λ·x + (1−λ)·x*`.
pub fn interpolate(x: &[f64], x_star: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if x.len() != x_star.len() {
        return Err(Error::DimensionMismatch(x.len(), x_star.len()));
    }
    Ok(x.iter().zip(x_star).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect())
}

fn fold_extreme(x: &[f64], neighbors: &[&[f64]], pick: fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    if neighbors.is_empty() {
        return Err(Error::NoNeighbors);
    }
    check_dims(x, neighbors)?;
    let mut out = x.to_vec();
    for n in neighbors {
        for (o, v) in out.iter_mut().zip(n.iter()) {
            *o = pick(*o, *v);
        }
    }
    Ok(out)
}

pub fn elementwise_max(x: &[f64], neighbors: &[&[f64]]) -> Result<Vec<f64>> {
    fold_extreme(x, neighbors, f64::max)
}

pub fn elementwise_min(x: &[f64], neighbors: &[&[f64]]) -> Result<Vec<f64>> {
    fold_extreme(x, neighbors, f64::min)
}

/// `x + Σ neighbors`; not clamped, so it can leave the input range.
pub fn sum_agg(x: &[f64], neighbors: &[&[f64]]) -> Result<Vec<f64>> {
    check_dims(x, neighbors)?;
    let mut out = x.to_vec();
    for n in neighbors {
        for (o, v) in out.iter_mut().zip(n.iter()) {
            *o += v;
        }
    }
    Ok(out)
}

/// `(x + Σ neighbors) / (k + 1)`.
pub fn average_agg(x: &[f64], neighbors: &[&[f64]]) -> Result<Vec<f64>> {
    let total = sum_agg(x, neighbors)?;
    let denom = (neighbors.len() + 1) as f64;
    Ok(total.into_iter().map(|v| v / denom).collect())
}

/// `Σ w·v / Σ w` over `{x} ∪ neighbors`; `weights[0]` belongs to `x`.
pub fn weighted_average(x: &[f64], neighbors: &[&[f64]], weights: &[f64]) -> Result<Vec<f64>> {
    check_dims(x, neighbors)?;
    if weights.len() != neighbors.len() + 1 {
        return Err(Error::DimensionMismatch(weights.len(), neighbors.len() + 1));
    }
    if let Some(&w) = weights.iter().find(|&&w| !(w > 0.0)) {
        return Err(Error::NonPositiveWeight(w));
    }
    let total: f64 = weights.iter().sum();
    let mut out: Vec<f64> = x.iter().map(|v| v * weights[0]).collect();
    for (n, w) in neighbors.iter().zip(&weights[1..]) {
        for (o, v) in out.iter_mut().zip(n.iter()) {
            *o += w * v;
        }
    }
    Ok(out.into_iter().map(|v| v / total).collect())
}

/// `softmax(−dist(x, ·))` over `{x} ∪ neighbors`, with `x` at distance 0.
pub fn inverse_distance_weights(x: &[f64], neighbors: &[&[f64]]) -> Result<Vec<f64>> {
    check_dims(x, neighbors)?;
    let mut w: Vec<f64> = std::iter::once(1.0)
        .chain(neighbors.iter().map(|n| (-euclidean(x, n)).exp()))
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}
