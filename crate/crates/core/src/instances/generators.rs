use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::{Constraints, GeneratorKind, GeneratorMeta, Instance, Quadruplet, Triplet};
use crate::embedding::{sq_dist, Embedding};
use crate::error::{LabError, Result};
use crate::pairs::{pair_count, pair_from_index};
use crate::rng::{seeded, LabRng};

/// The six orientations of a sorted item set `{x < y < z}` as
/// `(anchor, positive, negative)` positions.
const ORIENTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn check_items(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(LabError::InvalidInstance(format!(
            "need at least {min} items, got {n}"
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(LabError::InvalidParameter(format!(
            "lambda must be a finite nonnegative number, got {lambda}"
        )));
    }
    Ok(())
}

/// Uniform 3-subset of `[0, n)`, sorted ascending.
fn sample_item_set(rng: &mut LabRng, n: usize) -> [usize; 3] {
    let x = rng.random_range(0..n);
    let mut y = rng.random_range(0..n);
    while y == x {
        y = rng.random_range(0..n);
    }
    let mut z = rng.random_range(0..n);
    while z == x || z == y {
        z = rng.random_range(0..n);
    }
    let mut set = [x, y, z];
    set.sort_unstable();
    set
}

/// One uniformly random ordered triplet of distinct items: a uniform item set,
/// then one of its six orientations.
fn sample_triplet(rng: &mut LabRng, n: usize) -> Triplet {
    let set = sample_item_set(rng, n);
    let o = ORIENTATIONS[rng.random_range(0..6)];
    Triplet::new(set[o[0]], set[o[1]], set[o[2]])
}

fn sample_quadruplet(rng: &mut LabRng, n: usize) -> Quadruplet {
    loop {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let c = rng.random_range(0..n);
        let d = rng.random_range(0..n);
        if Quadruplet::is_well_formed(a, b, c, d) {
            return Quadruplet::new(a, b, c, d);
        }
    }
}

fn poisson_total(rng: &mut LabRng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite Poisson mean");
    let draw: f64 = dist.sample(rng);
    draw as usize
}

/// Fixed-size model: `m` i.i.d. uniformly random triplets on `n` items.
pub fn generate_uniform_triplets(n: usize, m: usize, seed: u64) -> Result<Instance> {
    check_items(n, 3)?;
    if m == 0 {
        return Err(LabError::InvalidParameter("m must be at least 1".into()));
    }
    let mut rng = seeded(seed);
    let triplets = (0..m).map(|_| sample_triplet(&mut rng, n)).collect();
    let mut meta = GeneratorMeta::new(GeneratorKind::UniformFixedM, seed);
    meta.m_requested = Some(m);
    Instance::new(n, Constraints::Triplets(triplets), meta)
}

/// Poisson model: every ordered triple of distinct items appears with an
/// independent Poisson(`lambda`) multiplicity.
///
/// Sampled by drawing the total count from Poisson(`lambda * n(n-1)(n-2)`)
/// and then that many uniform ordered triples, which has the same law and
/// costs time proportional to the output.
pub fn generate_poisson_triplets(n: usize, lambda: f64, seed: u64) -> Result<Instance> {
    check_lambda(lambda)?;
    check_items(n, 3)?;
    let mut rng = seeded(seed);
    let cells = (n as f64) * (n as f64 - 1.0) * (n as f64 - 2.0);
    let total = poisson_total(&mut rng, lambda * cells);
    let triplets = (0..total).map(|_| sample_triplet(&mut rng, n)).collect();
    let mut meta = GeneratorMeta::new(GeneratorKind::PoissonLambda, seed);
    meta.lambda = Some(lambda);
    Instance::new(n, Constraints::Triplets(triplets), meta)
}

/// Number of (anchor, unordered pair of the other items) combinations.
pub fn ground_truth_combination_count(n: usize) -> usize {
    n * pair_count(n.saturating_sub(1))
}

fn decode_combination(n: usize, idx: usize) -> (usize, usize, usize) {
    let per_anchor = pair_count(n - 1);
    let anchor = idx / per_anchor;
    let (p, q) = pair_from_index(n - 1, idx % per_anchor);
    let lift = |x: usize| if x < anchor { x } else { x + 1 };
    (anchor, lift(p), lift(q))
}

fn sample_sphere_points(rng: &mut LabRng, n: usize, dim: usize) -> Embedding {
    let mut points = Embedding::zeros(n, dim);
    for i in 0..n {
        loop {
            let row = points.row_mut(i);
            for x in row.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                row.iter_mut().for_each(|x| *x /= norm);
                break;
            }
        }
    }
    points
}

/// Ground-truth model: `n` points uniform on the unit sphere in `R^dim`, and
/// `m` distinct (anchor, unordered pair) combinations drawn without
/// replacement, each oriented by the true distances.
pub fn generate_ground_truth_sphere(n: usize, dim: usize, m: usize, seed: u64) -> Result<Instance> {
    check_items(n, 3)?;
    if dim == 0 {
        return Err(LabError::InvalidParameter(
            "ground-truth dimension must be at least 1".into(),
        ));
    }
    let combos = ground_truth_combination_count(n);
    if m > combos {
        return Err(LabError::InvalidParameter(format!(
            "m = {m} exceeds the {combos} distinct (anchor, pair) combinations for n = {n}"
        )));
    }
    let mut rng = seeded(seed);
    let points = sample_sphere_points(&mut rng, n, dim);
    let picked = index::sample(&mut rng, combos, m).into_vec();

    let mut used: Option<HashSet<usize>> = None;
    let mut triplets = Vec::with_capacity(m);
    for mut idx in picked.iter().copied() {
        loop {
            let (anchor, u, v) = decode_combination(n, idx);
            let du = sq_dist(points.row(anchor), points.row(u));
            let dv = sq_dist(points.row(anchor), points.row(v));
            if du < dv {
                triplets.push(Triplet::new(anchor, u, v));
                break;
            }
            if dv < du {
                triplets.push(Triplet::new(anchor, v, u));
                break;
            }
            // Exact tie: replace with a fresh combination not drawn before.
            let used = used.get_or_insert_with(|| picked.iter().copied().collect());
            if used.len() >= combos {
                return Err(LabError::InvalidParameter(
                    "every remaining combination is a distance tie".into(),
                ));
            }
            loop {
                idx = rng.random_range(0..combos);
                if used.insert(idx) {
                    break;
                }
            }
        }
    }

    let mut meta = GeneratorMeta::new(GeneratorKind::GroundTruthSphere, seed);
    meta.m_requested = Some(m);
    meta.ground_truth_dimension = Some(dim);
    meta.ground_truth_points = Some(points);
    Instance::new(n, Constraints::Triplets(triplets), meta)
}

/// Number of ordered 4-tuples `(a, b, c, d)` with `a != b`, `c != d` and
/// `{a, b} != {c, d}`.
pub fn valid_quadruplet_count(n: usize) -> f64 {
    let ordered_pairs = n as f64 * (n as f64 - 1.0);
    ordered_pairs * (ordered_pairs - 2.0)
}

pub fn generate_uniform_quadruplets(n: usize, m: usize, seed: u64) -> Result<Instance> {
    check_items(n, 4)?;
    if m == 0 {
        return Err(LabError::InvalidParameter("m must be at least 1".into()));
    }
    let mut rng = seeded(seed);
    let quads = (0..m).map(|_| sample_quadruplet(&mut rng, n)).collect();
    let mut meta = GeneratorMeta::new(GeneratorKind::UniformQuadruplet, seed);
    meta.m_requested = Some(m);
    Instance::new(n, Constraints::Quadruplets(quads), meta)
}

pub fn generate_poisson_quadruplets(n: usize, lambda: f64, seed: u64) -> Result<Instance> {
    check_lambda(lambda)?;
    check_items(n, 4)?;
    let mut rng = seeded(seed);
    let total = poisson_total(&mut rng, lambda * valid_quadruplet_count(n));
    let quads = (0..total).map(|_| sample_quadruplet(&mut rng, n)).collect();
    let mut meta = GeneratorMeta::new(GeneratorKind::PoissonQuadruplet, seed);
    meta.lambda = Some(lambda);
    Instance::new(n, Constraints::Quadruplets(quads), meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_goodness_of_fit;

    fn orientation_of(t: &Triplet) -> usize {
        let mut set = [t.anchor.index(), t.positive.index(), t.negative.index()];
        set.sort_unstable();
        let pos = |x: usize| set.iter().position(|&s| s == x).unwrap();
        let o = [pos(t.anchor.index()), pos(t.positive.index()), pos(t.negative.index())];
        ORIENTATIONS.iter().position(|&p| p == o).unwrap()
    }

    #[test]
    fn single_item_set_for_three_items() {
        let inst = generate_uniform_triplets(3, 1, 5).unwrap();
        let t = inst.triplets().unwrap()[0];
        let mut items = [t.anchor.0, t.positive.0, t.negative.0];
        items.sort_unstable();
        assert_eq!(items, [0, 1, 2]);
    }

    #[test]
    fn too_few_items_rejected() {
        assert!(matches!(
            generate_uniform_triplets(2, 1, 0),
            Err(LabError::InvalidInstance(_))
        ));
        assert!(generate_uniform_quadruplets(3, 1, 0).is_err());
    }

    #[test]
    fn exact_count_and_determinism() {
        let a = generate_uniform_triplets(50, 1234, 9).unwrap();
        let b = generate_uniform_triplets(50, 1234, 9).unwrap();
        assert_eq!(a.m(), 1234);
        assert_eq!(a, b);
        assert_ne!(a, generate_uniform_triplets(50, 1234, 10).unwrap());
    }

    #[test]
    fn orientation_frequencies_are_uniform() {
        let inst = generate_uniform_triplets(10, 5000, 17).unwrap();
        let mut counts = [0u64; 6];
        for t in inst.triplets().unwrap() {
            counts[orientation_of(t)] += 1;
        }
        for c in counts {
            let freq = c as f64 / 5000.0;
            assert!((freq - 1.0 / 6.0).abs() <= 0.03, "{counts:?}");
        }
    }

    #[test]
    fn ordered_triples_are_uniform() {
        let n = 5;
        let inst = generate_uniform_triplets(n, 60_000, 3).unwrap();
        let cells = n * (n - 1) * (n - 2);
        let mut hist = vec![0u64; n * n * n];
        for t in inst.triplets().unwrap() {
            hist[(t.anchor.index() * n + t.positive.index()) * n + t.negative.index()] += 1;
        }
        let observed: Vec<u64> = hist.into_iter().filter(|&c| c > 0).collect();
        assert_eq!(observed.len(), cells);
        let test = chi_square_goodness_of_fit(&observed, &vec![1.0 / cells as f64; cells]);
        assert!(test.p_value > 0.001, "{test:?}");
    }

    #[test]
    fn poisson_zero_lambda_is_empty() {
        assert_eq!(generate_poisson_triplets(3, 0.0, 1).unwrap().m(), 0);
        assert_eq!(generate_poisson_quadruplets(4, 0.0, 1).unwrap().m(), 0);
        assert!(matches!(
            generate_poisson_triplets(3, -1.0, 1),
            Err(LabError::InvalidParameter(_))
        ));
    }

    #[test]
    fn poisson_mean_matches_closed_form() {
        let lambda = 1e-5;
        let seeds = 10_000u64;
        let total: usize = (0..seeds)
            .map(|s| generate_poisson_triplets(100, lambda, s).unwrap().m())
            .sum();
        let mean = total as f64 / seeds as f64;
        let expected = lambda * 100.0 * 99.0 * 98.0;
        assert!((expected - 9.7020).abs() < 1e-3);
        assert!((mean - expected).abs() <= 0.1, "mean {mean}, expected {expected}");
    }

    #[test]
    fn poisson_multiplicities_follow_poisson() {
        // Every (seed, ordered triple) cell is one sample of a multiplicity.
        let (n, lambda, seeds) = (50usize, 1e-4, 100_000u64);
        let cells = (n * (n - 1) * (n - 2)) as u64;
        let mut hist = [0u64; 4];
        for s in 0..seeds {
            let inst = generate_poisson_triplets(n, lambda, s).unwrap();
            let mut ts = inst.triplets().unwrap().to_vec();
            ts.sort_unstable();
            let mut distinct = 0u64;
            let mut i = 0;
            while i < ts.len() {
                let mut j = i;
                while j < ts.len() && ts[j] == ts[i] {
                    j += 1;
                }
                hist[(j - i).min(3)] += 1;
                distinct += 1;
                i = j;
            }
            hist[0] += cells - distinct;
        }
        let total = (cells * seeds) as f64;
        // Kolmogorov-Smirnov distance between the empirical and Poisson CDFs.
        let p0 = (-lambda).exp();
        let pmf = [p0, p0 * lambda, p0 * lambda * lambda / 2.0];
        let mut emp = 0.0;
        let mut theo = 0.0;
        let mut ks: f64 = 0.0;
        for k in 0..3 {
            emp += hist[k] as f64 / total;
            theo += pmf[k];
            ks = ks.max((emp - theo).abs());
        }
        let critical = 1.628 / total.sqrt();
        assert!(ks <= critical, "KS {ks} > {critical}, hist {hist:?}");
    }

    #[test]
    fn quadruplet_poisson_mean() {
        let lambda = 1e-7;
        let seeds = 10_000u64;
        let total: usize = (0..seeds)
            .map(|s| generate_poisson_quadruplets(100, lambda, s).unwrap().m())
            .sum();
        let mean = total as f64 / seeds as f64;
        let expected = lambda * valid_quadruplet_count(100);
        assert!((mean - expected).abs() <= 0.02 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn single_quadruplet_on_four_items() {
        let inst = generate_uniform_quadruplets(4, 1, 2).unwrap();
        let q = inst.quadruplets().unwrap()[0];
        let ab = crate::pairs::ordered(q.a.index(), q.b.index());
        let cd = crate::pairs::ordered(q.c.index(), q.d.index());
        assert_ne!(ab, cd);
    }

    #[test]
    fn valid_quadruplet_count_matches_enumeration() {
        for n in 2..7 {
            let mut count = 0usize;
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            count += Quadruplet::is_well_formed(a, b, c, d) as usize;
                        }
                    }
                }
            }
            assert_eq!(valid_quadruplet_count(n), count as f64);
        }
    }

    #[test]
    fn combination_decoding_covers_everything_once() {
        let n = 7;
        let mut seen = HashSet::new();
        for idx in 0..ground_truth_combination_count(n) {
            let (a, u, v) = decode_combination(n, idx);
            assert!(a != u && a != v && u < v && v < n);
            assert!(seen.insert((a, u, v)));
        }
        assert_eq!(seen.len(), n * (n - 1) * (n - 2) / 2);
    }

    #[test]
    fn sphere_instance_is_consistent_with_its_points() {
        let inst = generate_ground_truth_sphere(5, 2, 30, 11).unwrap();
        assert_eq!(inst.m(), 30);
        let pts = inst.meta().ground_truth_points.as_ref().unwrap();
        for t in inst.triplets().unwrap() {
            let (i, j, k) = (t.anchor.index(), t.positive.index(), t.negative.index());
            assert!(pts.sq_dist(i, j) < pts.sq_dist(i, k));
        }
        // combinations are distinct
        let keys: HashSet<_> = inst
            .triplets()
            .unwrap()
            .iter()
            .map(|t| (t.anchor, t.positive.min(t.negative), t.positive.max(t.negative)))
            .collect();
        assert_eq!(keys.len(), 30);
    }

    #[test]
    fn sphere_rejects_too_many_constraints() {
        assert!(matches!(
            generate_ground_truth_sphere(4, 2, 13, 0),
            Err(LabError::InvalidParameter(_))
        ));
        assert!(generate_ground_truth_sphere(4, 2, 12, 0).is_ok());
    }
}
