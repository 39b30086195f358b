//! Triplet/quadruplet accuracy and the random one-dimensional baseline.
//!
//! A constraint `dist(a, b) < dist(c, d)` is satisfied only under the strict
//! inequality; equal squared distances count as violated. Squared distances
//! are compared directly since the square root is monotone.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::{sq_dist, Embedding};
use crate::error::{LabError, Result};
use crate::instances::{Constraints, Instance};
use crate::rng::{derive_seed, seeded};
use crate::stats::MeanEstimate;

const PARALLEL_THRESHOLD: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub satisfied: usize,
    pub total: usize,
}

impl AccuracyReport {
    fn from_counts(satisfied: usize, total: usize) -> Self {
        // An empty constraint list is vacuously satisfied.
        let accuracy = if total == 0 {
            1.0
        } else {
            satisfied as f64 / total as f64
        };
        AccuracyReport {
            accuracy,
            satisfied,
            total,
        }
    }
}

#[inline]
pub(crate) fn is_satisfied(emb: &Embedding, [a, b, c, d]: [usize; 4]) -> bool {
    sq_dist(emb.row(a), emb.row(b)) < sq_dist(emb.row(c), emb.row(d))
}

pub(crate) fn count_satisfied(emb: &Embedding, constraints: &Constraints) -> usize {
    let m = constraints.len();
    if m >= PARALLEL_THRESHOLD {
        (0..m)
            .into_par_iter()
            .filter(|&i| is_satisfied(emb, constraints.comparison(i)))
            .count()
    } else {
        constraints
            .comparisons()
            .filter(|&c| is_satisfied(emb, c))
            .count()
    }
}

pub fn evaluate(emb: &Embedding, instance: &Instance) -> Result<AccuracyReport> {
    if emb.n() != instance.n() {
        return Err(LabError::InvalidInput(format!(
            "embedding has {} rows but the instance has {} items",
            emb.n(),
            instance.n()
        )));
    }
    if emb.dim() == 0 && instance.m() > 0 {
        return Err(LabError::InvalidInput("embedding has dimension 0".into()));
    }
    let satisfied = count_satisfied(emb, instance.constraints());
    Ok(AccuracyReport::from_counts(satisfied, instance.m()))
}

/// Fraction of satisfied constraints, counted with multiplicity.
pub fn evaluate_accuracy(emb: &Embedding, instance: &Instance) -> Result<f64> {
    evaluate(emb, instance).map(|r| r.accuracy)
}

/// Mean accuracy of `trials` independent embeddings `f(i) ~ U(0, 1)` on the line.
pub fn trivial_baseline(instance: &Instance, trials: usize, seed: u64) -> Result<MeanEstimate> {
    if trials == 0 {
        return Err(LabError::InvalidParameter("trials must be at least 1".into()));
    }
    let n = instance.n();
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded(derive_seed(seed, &[t as u64]));
            let coords: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let emb = Embedding::from_flat(n, 1, coords).expect("n x 1 coordinates");
            let satisfied = count_satisfied(&emb, instance.constraints());
            AccuracyReport::from_counts(satisfied, instance.m()).accuracy
        })
        .collect();
    Ok(MeanEstimate::from_samples(&samples))
}
