//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use num_rational::Ratio;
use ordinal_lab::constraint_graph::ConstraintMultigraph;
use ordinal_lab::instances::{Instance, Quadruplet, Triplet};
use rand::Rng;

/// Whether some strict order of the involved pairs puts every constraint's
/// first pair before its second pair, by search over orderings.
///
/// The search extends an ordering one pair at a time: a pair may be placed
/// once every pair it must follow is already placed. Prefixes with the same
/// set of placed pairs behave identically, so dead sets are remembered.
pub fn ordering_exists(instance: &Instance) -> bool {
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut key = |a: usize, b: usize| {
        let k = (a.min(b), a.max(b));
        let next = ids.len();
        *ids.entry(k).or_insert(next)
    };
    let mut must_follow: Vec<(usize, usize)> = Vec::new();
    for [a, b, c, d] in instance.constraints().comparisons() {
        let p = key(a, b);
        let q = key(c, d);
        must_follow.push((p, q));
    }
    let k = ids.len();
    assert!(k <= 24, "oracle limited to 24 pairs, got {k}");
    let mut preds = vec![0u32; k];
    for &(p, q) in &must_follow {
        preds[q] |= 1 << p;
    }
    let full = (1u32 << k) - 1;
    let mut dead = HashSet::new();
    fn extend(placed: u32, full: u32, preds: &[u32], dead: &mut HashSet<u32>) -> bool {
        if placed == full {
            return true;
        }
        if dead.contains(&placed) {
            return false;
        }
        for (p, &need) in preds.iter().enumerate() {
            let bit = 1u32 << p;
            if placed & bit == 0 && need & !placed == 0 && extend(placed | bit, full, preds, dead) {
                return true;
            }
        }
        dead.insert(placed);
        false
    }
    extend(0, full, &preds, &mut dead)
}

/// Small instance whose constraints crowd a few items, so that cycles are
/// common. Half triplets, half quadruplets.
pub fn crowded_instance(rng: &mut impl Rng) -> Instance {
    let n = rng.random_range(3..=8);
    let m = rng.random_range(1..=7);
    let crowd = rng.random_range(3..=n.min(5));
    if rng.random_bool(0.5) {
        let ts = (0..m)
            .map(|_| loop {
                let (a, b, c) = (
                    rng.random_range(0..crowd),
                    rng.random_range(0..crowd),
                    rng.random_range(0..crowd),
                );
                if a != b && b != c && a != c {
                    break Triplet::new(a, b, c);
                }
            })
            .collect();
        Instance::from_triplets(n, ts).unwrap()
    } else {
        let qs = (0..m)
            .map(|_| loop {
                let q = [0; 4].map(|_| rng.random_range(0..crowd));
                let (p1, p2) = ((q[0].min(q[1]), q[0].max(q[1])), (q[2].min(q[3]), q[2].max(q[3])));
                if q[0] != q[1] && q[2] != q[3] && p1 != p2 {
                    break Quadruplet::new(q[0], q[1], q[2], q[3]);
                }
            })
            .collect();
        Instance::from_quadruplets(n, qs).unwrap()
    }
}

/// Maximum of `|E(H)| / (|H| - 1)` over all vertex sets with two or more
/// vertices, by enumeration.
pub fn brute_force_density(g: &ConstraintMultigraph) -> Ratio<u64> {
    let n = g.n();
    assert!(n <= 16);
    let mut best = Ratio::from_integer(0);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() < 2 {
            continue;
        }
        let vs: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let edges = g
            .edges()
            .iter()
            .filter(|e| mask >> e.lo & 1 == 1 && mask >> e.hi & 1 == 1)
            .count() as u64;
        best = best.max(Ratio::new(edges, vs.len() as u64 - 1));
    }
    best
}

/// Random multigraph on at most `max_v` vertices with some parallel edges.
pub fn random_multigraph(rng: &mut impl Rng, max_v: usize) -> ConstraintMultigraph {
    let n = rng.random_range(2..=max_v);
    let edges = rng.random_range(1..=3 * n);
    let mut g = ConstraintMultigraph::new(n);
    for _ in 0..edges {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        g.add_edge(a, b, None);
    }
    g
}
