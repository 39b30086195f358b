//! Items, triplet and quadruplet constraints, and instances.
//!
//! A triplet `(anchor, positive, negative)` asks for
//! `dist(anchor, positive) < dist(anchor, negative)`; a quadruplet
//! `(a, b, c, d)` asks for `dist(a, b) < dist(c, d)`. Both are handled
//! uniformly downstream through [`Constraints::comparison`], which views a
//! triplet `(i, j, k)` as the quadruplet `(i, j, i, k)`.

mod generators;
mod io;

use std::fmt;

use serde::Serialize;

use crate::embedding::Embedding;
use crate::error::{LabError, Result};
use crate::rng::RNG_ALGORITHM;

pub use generators::{
    generate_ground_truth_sphere, generate_poisson_quadruplets, generate_poisson_triplets,
    generate_uniform_quadruplets, generate_uniform_triplets, ground_truth_combination_count,
    valid_quadruplet_count,
};
pub use io::{points_path_for, read_instance, write_instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl ItemId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for ItemId {
    fn from(i: usize) -> Self {
        ItemId(u32::try_from(i).expect("item index exceeds u32"))
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Triplet {
    pub anchor: ItemId,
    pub positive: ItemId,
    pub negative: ItemId,
}

impl Triplet {
    pub fn new(anchor: usize, positive: usize, negative: usize) -> Self {
        Triplet {
            anchor: anchor.into(),
            positive: positive.into(),
            negative: negative.into(),
        }
    }

    /// The same three items with positive and negative swapped.
    pub fn flipped(self) -> Self {
        Triplet {
            anchor: self.anchor,
            positive: self.negative,
            negative: self.positive,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let (i, j, k) = (self.anchor, self.positive, self.negative);
        if i == j || i == k || j == k {
            return Err(LabError::InvalidInstance(format!(
                "triplet ({i}, {j}, {k}) repeats an item"
            )));
        }
        if [i, j, k].iter().any(|x| x.index() >= n) {
            return Err(LabError::InvalidInstance(format!(
                "triplet ({i}, {j}, {k}) references an item outside [0, {n})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Quadruplet {
    pub a: ItemId,
    pub b: ItemId,
    pub c: ItemId,
    pub d: ItemId,
}

impl Quadruplet {
    pub fn new(a: usize, b: usize, c: usize, d: usize) -> Self {
        Quadruplet {
            a: a.into(),
            b: b.into(),
            c: c.into(),
            d: d.into(),
        }
    }

    pub(crate) fn is_well_formed(a: usize, b: usize, c: usize, d: usize) -> bool {
        a != b && c != d && !((a == c && b == d) || (a == d && b == c))
    }

    fn validate(&self, n: usize) -> Result<()> {
        let ids = [self.a, self.b, self.c, self.d];
        if ids.iter().any(|x| x.index() >= n) {
            return Err(LabError::InvalidInstance(format!(
                "quadruplet {ids:?} references an item outside [0, {n})"
            )));
        }
        let [a, b, c, d] = ids.map(ItemId::index);
        if !Quadruplet::is_well_formed(a, b, c, d) {
            return Err(LabError::InvalidInstance(format!(
                "quadruplet ({a}, {b}, {c}, {d}) compares a pair with itself or uses a degenerate pair"
            )));
        }
        Ok(())
    }
}

/// Homogeneous constraint list; duplicates are kept (multiset semantics).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraints {
    Triplets(Vec<Triplet>),
    Quadruplets(Vec<Quadruplet>),
}

impl Constraints {
    pub fn len(&self) -> usize {
        match self {
            Constraints::Triplets(t) => t.len(),
            Constraints::Quadruplets(q) => q.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_triplets(&self) -> bool {
        matches!(self, Constraints::Triplets(_))
    }

    /// Constraint `idx` as `[a, b, c, d]` meaning `dist(a, b) < dist(c, d)`.
    #[inline]
    pub fn comparison(&self, idx: usize) -> [usize; 4] {
        match self {
            Constraints::Triplets(t) => {
                let t = t[idx];
                [
                    t.anchor.index(),
                    t.positive.index(),
                    t.anchor.index(),
                    t.negative.index(),
                ]
            }
            Constraints::Quadruplets(q) => {
                let q = q[idx];
                [q.a.index(), q.b.index(), q.c.index(), q.d.index()]
            }
        }
    }

    pub fn comparisons(&self) -> impl Iterator<Item = [usize; 4]> + '_ {
        (0..self.len()).map(move |i| self.comparison(i))
    }

    pub fn word(&self) -> &'static str {
        match self {
            Constraints::Triplets(_) => "triplets",
            Constraints::Quadruplets(_) => "quadruplets",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GeneratorKind {
    UniformFixedM,
    PoissonLambda,
    GroundTruthSphere,
    UniformQuadruplet,
    PoissonQuadruplet,
    External,
}

impl GeneratorKind {
    pub fn token(self) -> &'static str {
        match self {
            GeneratorKind::UniformFixedM => "uniform",
            GeneratorKind::PoissonLambda => "poisson",
            GeneratorKind::GroundTruthSphere => "sphere",
            GeneratorKind::UniformQuadruplet => "quad-uniform",
            GeneratorKind::PoissonQuadruplet => "quad-poisson",
            GeneratorKind::External => "external",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Some(match token {
            "uniform" => GeneratorKind::UniformFixedM,
            "poisson" => GeneratorKind::PoissonLambda,
            "sphere" => GeneratorKind::GroundTruthSphere,
            "quad-uniform" => GeneratorKind::UniformQuadruplet,
            "quad-poisson" => GeneratorKind::PoissonQuadruplet,
            "external" => GeneratorKind::External,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMeta {
    pub kind: GeneratorKind,
    pub seed: u64,
    pub rng: String,
    pub lambda: Option<f64>,
    pub m_requested: Option<usize>,
    pub ground_truth_dimension: Option<usize>,
    pub ground_truth_points: Option<Embedding>,
}

impl GeneratorMeta {
    pub fn new(kind: GeneratorKind, seed: u64) -> Self {
        GeneratorMeta {
            kind,
            seed,
            rng: RNG_ALGORITHM.to_string(),
            lambda: None,
            m_requested: None,
            ground_truth_dimension: None,
            ground_truth_points: None,
        }
    }

    pub fn external() -> Self {
        GeneratorMeta::new(GeneratorKind::External, 0)
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self.kind {
            GeneratorKind::PoissonLambda | GeneratorKind::PoissonQuadruplet => {
                match self.lambda {
                    Some(l) if l >= 0.0 && l.is_finite() => {}
                    _ => {
                        return Err(LabError::InvalidInstance(
                            "Poisson instance requires a nonnegative lambda".into(),
                        ))
                    }
                }
            }
            GeneratorKind::GroundTruthSphere => {
                let (Some(dim), Some(points)) =
                    (self.ground_truth_dimension, &self.ground_truth_points)
                else {
                    return Err(LabError::InvalidInstance(
                        "ground-truth instance requires its dimension and points".into(),
                    ));
                };
                if points.n() != n || points.dim() != dim {
                    return Err(LabError::InvalidInstance(format!(
                        "ground-truth points are {} x {}, expected {n} x {dim}",
                        points.n(),
                        points.dim()
                    )));
                }
                for (i, row) in points.rows().enumerate() {
                    let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if (norm - 1.0).abs() > 1e-9 {
                        return Err(LabError::InvalidInstance(format!(
                            "ground-truth point {i} has norm {norm}, expected 1"
                        )));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// A set of `n` items with a homogeneous constraint multiset.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    n: usize,
    constraints: Constraints,
    meta: GeneratorMeta,
}

impl Instance {
    pub fn new(n: usize, constraints: Constraints, meta: GeneratorMeta) -> Result<Self> {
        match &constraints {
            Constraints::Triplets(ts) => ts.iter().try_for_each(|t| t.validate(n))?,
            Constraints::Quadruplets(qs) => qs.iter().try_for_each(|q| q.validate(n))?,
        }
        meta.validate(n)?;
        Ok(Instance {
            n,
            constraints,
            meta,
        })
    }

    pub fn from_triplets(n: usize, triplets: Vec<Triplet>) -> Result<Self> {
        Instance::new(n, Constraints::Triplets(triplets), GeneratorMeta::external())
    }

    pub fn from_quadruplets(n: usize, quadruplets: Vec<Quadruplet>) -> Result<Self> {
        Instance::new(
            n,
            Constraints::Quadruplets(quadruplets),
            GeneratorMeta::external(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn meta(&self) -> &GeneratorMeta {
        &self.meta
    }

    pub fn triplets(&self) -> Option<&[Triplet]> {
        match &self.constraints {
            Constraints::Triplets(t) => Some(t),
            Constraints::Quadruplets(_) => None,
        }
    }

    pub fn quadruplets(&self) -> Option<&[Quadruplet]> {
        match &self.constraints {
            Constraints::Quadruplets(q) => Some(q),
            Constraints::Triplets(_) => None,
        }
    }

    /// Keeps only the constraints at `indices` (in the given order).
    pub fn select(&self, indices: &[usize]) -> Instance {
        let constraints = match &self.constraints {
            Constraints::Triplets(t) => Constraints::Triplets(indices.iter().map(|&i| t[i]).collect()),
            Constraints::Quadruplets(q) => {
                Constraints::Quadruplets(indices.iter().map(|&i| q[i]).collect())
            }
        };
        Instance {
            n: self.n,
            constraints,
            meta: self.meta.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_repeated_items_and_out_of_range() {
        assert!(Instance::from_triplets(3, vec![Triplet::new(0, 0, 1)]).is_err());
        assert!(Instance::from_triplets(3, vec![Triplet::new(0, 1, 3)]).is_err());
        assert!(Instance::from_triplets(3, vec![Triplet::new(0, 1, 2)]).is_ok());
    }

    #[test]
    fn quadruplet_invariants() {
        assert!(Instance::from_quadruplets(4, vec![Quadruplet::new(0, 1, 1, 0)]).is_err());
        assert!(Instance::from_quadruplets(4, vec![Quadruplet::new(0, 0, 1, 2)]).is_err());
        assert!(Instance::from_quadruplets(4, vec![Quadruplet::new(0, 1, 0, 2)]).is_ok());
    }

    #[test]
    fn duplicates_count_toward_m() {
        let t = Triplet::new(0, 1, 2);
        let inst = Instance::from_triplets(3, vec![t, t, t]).unwrap();
        assert_eq!(inst.m(), 3);
    }

    #[test]
    fn triplet_comparison_view() {
        let inst = Instance::from_triplets(4, vec![Triplet::new(3, 1, 2)]).unwrap();
        assert_eq!(inst.constraints().comparison(0), [3, 1, 3, 2]);
    }

    #[test]
    fn poisson_meta_requires_lambda() {
        let meta = GeneratorMeta::new(GeneratorKind::PoissonLambda, 1);
        assert!(Instance::new(3, Constraints::Triplets(vec![]), meta).is_err());
    }
}
