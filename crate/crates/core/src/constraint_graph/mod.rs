//! The constraint multigraph and its exact arboricity.
//!
//! Each triplet `(x, y, z)` contributes the edges `{x,y}` and `{x,z}`; each
//! quadruplet `(a, b, c, d)` contributes `{a,b}` and `{c,d}`. Arboricity is
//! computed in its density form: the maximum over vertex sets `H` with at
//! least two vertices of `|E(H)| / (|H| - 1)`, counted with multiplicity,
//! rounded up.

mod flow;

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::instances::{Constraints, Instance};
use crate::pairs::{ordered, pair_count, pair_from_index};
use crate::rng::{derive_seed, seeded};
use crate::stats::Proportion;
use flow::FlowNetwork;

/// Which side of a constraint an edge came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EdgePart {
    AnchorPositive,
    AnchorNegative,
    FirstPair,
    SecondPair,
}

impl EdgePart {
    fn first_half(self) -> bool {
        matches!(self, EdgePart::AnchorPositive | EdgePart::FirstPair)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphEdge {
    pub lo: usize,
    pub hi: usize,
    pub part: Option<EdgePart>,
}

/// Undirected multigraph on `n` items; every edge occurrence is kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintMultigraph {
    n: usize,
    edges: Vec<GraphEdge>,
}

impl ConstraintMultigraph {
    pub fn new(n: usize) -> Self {
        ConstraintMultigraph {
            n,
            edges: Vec::new(),
        }
    }

    pub fn add_edge(&mut self, a: usize, b: usize, part: Option<EdgePart>) {
        assert!(a != b, "self-loop {{{a}, {a}}}");
        assert!(a < self.n && b < self.n, "edge {{{a}, {b}}} outside [0, {})", self.n);
        let (lo, hi) = ordered(a, b);
        self.edges.push(GraphEdge { lo, hi, part });
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of edges counted with multiplicity.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    /// Distinct pairs with their multiplicities, in lexicographic order.
    pub fn multiplicities(&self) -> Vec<((usize, usize), u64)> {
        let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for e in &self.edges {
            *counts.entry((e.lo, e.hi)).or_default() += 1;
        }
        counts.into_iter().collect()
    }

    /// Edges inside `vertices`, with multiplicity.
    pub fn induced_edge_count(&self, vertices: &[usize]) -> u64 {
        let mut inside = vec![false; self.n];
        for &v in vertices {
            inside[v] = true;
        }
        self.edges
            .iter()
            .filter(|e| inside[e.lo] && inside[e.hi])
            .count() as u64
    }

    /// Density `|E(H)| / (|H| - 1)` of a vertex set with at least two vertices.
    pub fn density_of(&self, vertices: &[usize]) -> Option<Ratio<u64>> {
        let mut vs = vertices.to_vec();
        vs.sort_unstable();
        vs.dedup();
        if vs.len() < 2 {
            return None;
        }
        Some(Ratio::new(
            self.induced_edge_count(&vs),
            vs.len() as u64 - 1,
        ))
    }
}

pub fn build_constraint_graph(instance: &Instance) -> ConstraintMultigraph {
    let mut g = ConstraintMultigraph::new(instance.n());
    let (first, second) = match instance.constraints() {
        Constraints::Triplets(_) => (EdgePart::AnchorPositive, EdgePart::AnchorNegative),
        Constraints::Quadruplets(_) => (EdgePart::FirstPair, EdgePart::SecondPair),
    };
    for [a, b, c, d] in instance.constraints().comparisons() {
        g.add_edge(a, b, Some(first));
        g.add_edge(c, d, Some(second));
    }
    g
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArboricityReport {
    pub density_star: Ratio<u64>,
    pub rho: u64,
    pub witness_subgraph: Vec<usize>,
    pub forest_count_upper: u64,
    pub implied_dim_bound: u64,
}

/// Weighted simple graph used by the density search.
struct Weighted {
    n: usize,
    edges: Vec<(usize, usize, u64)>,
}

/// Best vertex set through `root` among `alive` vertices at guess `g = a/b`.
///
/// Network: source -> edge node with capacity `b * weight`, edge node -> both
/// endpoints unbounded, vertex -> sink with capacity `a` except the root,
/// which is free. The closure value `b w(E(S)) - a |S \ {root}|` equals the
/// total source capacity minus the min cut. Returns the source side when the
/// value is positive, which certifies a set of density strictly above `g`.
fn improve_through_root(
    graph: &Weighted,
    alive: &[bool],
    root: usize,
    g: Ratio<u64>,
) -> Option<Vec<usize>> {
    let (a, b) = (*g.numer(), *g.denom());
    let live: Vec<&(usize, usize, u64)> = graph
        .edges
        .iter()
        .filter(|(u, v, _)| alive[*u] && alive[*v])
        .collect();
    if !live.iter().any(|(u, v, _)| *u == root || *v == root) {
        return None;
    }
    let source = 0;
    let sink = 1;
    let vertex_node = |v: usize| 2 + v;
    let edge_base = 2 + graph.n;
    let mut net = FlowNetwork::new(edge_base + live.len());
    let total: u64 = live.iter().map(|e| b * e.2).sum();
    let unbounded = total + 1;
    for (k, &&(u, v, w)) in live.iter().enumerate() {
        net.add_arc(source, edge_base + k, b * w);
        net.add_arc(edge_base + k, vertex_node(u), unbounded);
        net.add_arc(edge_base + k, vertex_node(v), unbounded);
    }
    for v in 0..graph.n {
        if alive[v] && v != root && a > 0 {
            net.add_arc(vertex_node(v), sink, a);
        }
    }
    let cut = net.max_flow(source, sink);
    if cut >= total {
        return None;
    }
    let side = net.source_side(source);
    let set: Vec<usize> = (0..graph.n)
        .filter(|&v| alive[v] && side[vertex_node(v)])
        .collect();
    Some(set)
}

fn weighted_density(graph: &Weighted, vertices: &[usize]) -> Ratio<u64> {
    let mut inside = vec![false; graph.n];
    for &v in vertices {
        inside[v] = true;
    }
    let w: u64 = graph
        .edges
        .iter()
        .filter(|(u, v, _)| inside[*u] && inside[*v])
        .map(|e| e.2)
        .sum();
    Ratio::new(w, vertices.len() as u64 - 1)
}

/// Exact maximum density with a witness set.
///
/// Parametric (Dinkelbach) search: any set beating the current guess becomes
/// the new guess, so the guess only takes values attained by real subgraphs
/// and strictly increases. Roots are settled one at a time; once no set
/// through a root beats the guess, none ever will (the guess only grows),
/// so the root is deleted from the graph for the rest of the search.
fn max_density(graph: &ConstraintMultigraph) -> Result<(Ratio<u64>, Vec<usize>)> {
    let mult = graph.multiplicities();
    if mult.is_empty() {
        return Err(LabError::UndefinedDensity);
    }
    let weighted = Weighted {
        n: graph.n,
        edges: mult.iter().map(|&((u, v), w)| (u, v, w)).collect(),
    };
    let &((u0, v0), w0) = mult.iter().max_by_key(|e| e.1).expect("non-empty");
    let mut best = Ratio::from_integer(w0);
    let mut witness = vec![u0, v0];
    let mut alive = vec![true; graph.n];
    for root in 0..graph.n {
        while let Some(set) = improve_through_root(&weighted, &alive, root, best) {
            let d = weighted_density(&weighted, &set);
            debug_assert!(d > best);
            best = d;
            witness = set;
        }
        alive[root] = false;
    }
    Ok((best, witness))
}

/// Greedy upper bound: peel spanning forests until no edge is left.
pub fn greedy_forest_count(graph: &ConstraintMultigraph) -> u64 {
    let mut remaining: Vec<(usize, usize)> = graph.edges.iter().map(|e| (e.lo, e.hi)).collect();
    let mut forests = 0;
    let mut parent: Vec<usize> = (0..graph.n).collect();
    while !remaining.is_empty() {
        forests += 1;
        for (i, p) in parent.iter_mut().enumerate() {
            *p = i;
        }
        remaining.retain(|&(u, v)| {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru == rv {
                true
            } else {
                parent[ru] = rv;
                false
            }
        });
    }
    forests
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn ceil_ratio(r: Ratio<u64>) -> u64 {
    r.numer().div_ceil(*r.denom())
}

pub fn arboricity(graph: &ConstraintMultigraph) -> Result<ArboricityReport> {
    let (density_star, witness_subgraph) = max_density(graph)?;
    let rho = ceil_ratio(density_star);
    Ok(ArboricityReport {
        density_star,
        rho,
        witness_subgraph,
        forest_count_upper: greedy_forest_count(graph),
        implied_dim_bound: 4 * rho,
    })
}

/// Splits a tagged graph into the first-pair and second-pair edge sets.
pub fn split_constraint_graph(
    graph: &ConstraintMultigraph,
) -> Result<(ConstraintMultigraph, ConstraintMultigraph)> {
    let mut first = ConstraintMultigraph::new(graph.n);
    let mut second = ConstraintMultigraph::new(graph.n);
    for e in &graph.edges {
        let part = e.part.ok_or(LabError::CannotSplit)?;
        let target = if part.first_half() {
            &mut first
        } else {
            &mut second
        };
        target.edges.push(*e);
    }
    Ok((first, second))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SubadditivityReport {
    pub rho: u64,
    pub rho_first: u64,
    pub rho_second: u64,
    pub holds: bool,
}

/// Arboricity of the whole graph against the sum over its two halves.
pub fn subadditivity_check(graph: &ConstraintMultigraph) -> Result<SubadditivityReport> {
    let (first, second) = split_constraint_graph(graph)?;
    let rho = arboricity(graph)?.rho;
    let rho_of = |g: &ConstraintMultigraph| -> Result<u64> {
        match arboricity(g) {
            Ok(r) => Ok(r.rho),
            Err(LabError::UndefinedDensity) => Ok(0),
            Err(e) => Err(e),
        }
    };
    let rho_first = rho_of(&first)?;
    let rho_second = rho_of(&second)?;
    Ok(SubadditivityReport {
        rho,
        rho_first,
        rho_second,
        holds: rho <= rho_first + rho_second,
    })
}

/// Multigraph with independent Poisson(`alpha / n`) multiplicity per pair.
///
/// Sampled by drawing the Poisson total first and then placing that many
/// edges uniformly over pairs, which has the same law.
pub fn random_poisson_multigraph(n: usize, alpha: f64, seed: u64) -> Result<ConstraintMultigraph> {
    if n < 2 {
        return Err(LabError::InvalidParameter("need at least two vertices".into()));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(LabError::InvalidParameter(format!("alpha must be non-negative, got {alpha}")));
    }
    let mut rng = seeded(seed);
    let pairs = pair_count(n);
    let mean = pairs as f64 * alpha / n as f64;
    let total = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| LabError::InvalidParameter(e.to_string()))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    let mut g = ConstraintMultigraph::new(n);
    for _ in 0..total {
        let (u, v) = pair_from_index(n, rng.random_range(0..pairs));
        g.add_edge(u, v, None);
    }
    Ok(g)
}

#[derive(Debug, Clone, Serialize)]
pub struct ArboricityTail {
    pub threshold: f64,
    pub within_bound: Proportion,
    pub warning: Option<String>,
}

/// Fraction of random multigraphs with arboricity at most `5 * alpha`.
pub fn monte_carlo_arboricity_bound(
    n: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<ArboricityTail> {
    if trials == 0 {
        return Err(LabError::InvalidParameter("trials must be at least 1".into()));
    }
    let warning = (alpha < 1.0).then(|| {
        format!("alpha = {alpha} is below 1, outside the range where the tail bound is claimed")
    });
    let threshold = 5.0 * alpha;
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| {
            let g = random_poisson_multigraph(n, alpha, derive_seed(seed, &[t as u64]))?;
            let rho = match arboricity(&g) {
                Ok(r) => r.rho,
                Err(LabError::UndefinedDensity) => 0,
                Err(e) => return Err(e),
            };
            Ok(usize::from(rho as f64 <= threshold))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum();
    Ok(ArboricityTail {
        threshold,
        within_bound: Proportion::new(hits, trials),
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_uniform_quadruplets, generate_uniform_triplets, Quadruplet, Triplet};
    use proptest::prelude::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> ConstraintMultigraph {
        let mut g = ConstraintMultigraph::new(n);
        for &(a, b) in edges {
            g.add_edge(a, b, None);
        }
        g
    }

    fn brute_force_density(g: &ConstraintMultigraph) -> Ratio<u64> {
        let n = g.n();
        let mut best = Ratio::from_integer(0);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() < 2 {
                continue;
            }
            let vs: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            best = best.max(g.density_of(&vs).unwrap());
        }
        best
    }

    /// Smallest number of forests partitioning the edges, by backtracking.
    fn exhaustive_forest_count(g: &ConstraintMultigraph) -> u64 {
        fn place(edges: &[(usize, usize)], forests: &mut Vec<Vec<usize>>, k: usize) -> bool {
            let Some((&(u, v), rest)) = edges.split_first() else {
                return true;
            };
            for f in 0..k {
                let saved = forests[f].clone();
                let (ru, rv) = (find(&mut forests[f], u), find(&mut forests[f], v));
                if ru != rv {
                    forests[f][ru] = rv;
                    if place(rest, forests, k) {
                        return true;
                    }
                }
                forests[f] = saved;
            }
            false
        }
        let edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.lo, e.hi)).collect();
        (1..).find(|&k| {
            let mut forests = vec![(0..g.n()).collect::<Vec<_>>(); k];
            place(&edges, &mut forests, k)
        })
        .unwrap() as u64
    }

    #[test]
    fn triplet_edges_are_tagged() {
        let inst = Instance::from_triplets(3, vec![Triplet::new(0, 1, 2)]).unwrap();
        let g = build_constraint_graph(&inst);
        assert_eq!(
            g.edges(),
            &[
                GraphEdge { lo: 0, hi: 1, part: Some(EdgePart::AnchorPositive) },
                GraphEdge { lo: 0, hi: 2, part: Some(EdgePart::AnchorNegative) },
            ]
        );
    }

    #[test]
    fn quadruplet_edges_are_tagged() {
        let inst = Instance::from_quadruplets(4, vec![Quadruplet::new(0, 1, 2, 3)]).unwrap();
        let g = build_constraint_graph(&inst);
        assert_eq!((g.edges()[0].lo, g.edges()[0].hi), (0, 1));
        assert_eq!((g.edges()[1].lo, g.edges()[1].hi), (2, 3));
        assert_eq!(g.edges()[1].part, Some(EdgePart::SecondPair));
    }

    #[test]
    fn two_edges_per_triplet() {
        let inst = generate_uniform_triplets(20, 137, 3).unwrap();
        assert_eq!(build_constraint_graph(&inst).edge_count(), 274);
    }

    #[test]
    fn tree_has_arboricity_one() {
        let g = graph(6, &[(0, 1), (1, 2), (1, 3), (3, 4), (3, 5)]);
        let r = arboricity(&g).unwrap();
        assert_eq!(r.rho, 1);
        assert_eq!(r.density_star, Ratio::from_integer(1));
        assert_eq!(r.implied_dim_bound, 4);
    }

    #[test]
    fn complete_graph_on_four() {
        let k4 = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let r = arboricity(&graph(4, &k4)).unwrap();
        assert_eq!(r.density_star, Ratio::new(2, 1));
        assert_eq!(r.rho, 2);
        assert_eq!(r.witness_subgraph, vec![0, 1, 2, 3]);

        let mut doubled = k4.to_vec();
        doubled.push((0, 1));
        let r = arboricity(&graph(4, &doubled)).unwrap();
        assert_eq!(r.density_star, Ratio::new(7, 3));
        assert_eq!(r.rho, 3);
        assert_eq!(graph(4, &doubled).density_of(&r.witness_subgraph), Some(r.density_star));
    }

    #[test]
    fn single_pair_multiplicity() {
        let r = arboricity(&graph(2, &[(0, 1), (0, 1), (0, 1)])).unwrap();
        assert_eq!(r.rho, 3);
        assert_eq!(r.forest_count_upper, 3);
    }

    #[test]
    fn empty_graph_is_undefined() {
        assert!(matches!(
            arboricity(&ConstraintMultigraph::new(5)),
            Err(LabError::UndefinedDensity)
        ));
    }

    #[test]
    fn dense_part_beats_sparse_whole() {
        // K4 hanging off a long path.
        let mut edges = vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        edges.extend((3..9).map(|v| (v, v + 1)));
        let r = arboricity(&graph(10, &edges)).unwrap();
        assert_eq!(r.density_star, Ratio::new(2, 1));
        assert_eq!(r.witness_subgraph, vec![0, 1, 2, 3]);
    }

    #[test]
    fn untagged_graph_cannot_split() {
        assert!(matches!(
            split_constraint_graph(&graph(3, &[(0, 1)])),
            Err(LabError::CannotSplit)
        ));
    }

    #[test]
    fn subadditivity_on_instances() {
        let t = generate_uniform_triplets(20, 100, 9).unwrap();
        let q = generate_uniform_quadruplets(20, 100, 9).unwrap();
        for inst in [t, q] {
            let g = build_constraint_graph(&inst);
            let (a, b) = split_constraint_graph(&g).unwrap();
            assert_eq!(a.edge_count(), 100);
            assert_eq!(b.edge_count(), 100);
            let r = subadditivity_check(&g).unwrap();
            assert!(r.holds, "{r:?}");
            assert!(r.rho >= r.rho_first.max(r.rho_second));
        }
    }

    #[test]
    fn whole_graph_density_is_a_lower_bound() {
        let g = random_poisson_multigraph(60, 30.0, 2).unwrap();
        let r = arboricity(&g).unwrap();
        assert!(r.rho >= (g.edge_count() as u64).div_ceil(59));
    }

    #[test]
    fn tail_bound_at_desk_scale() {
        let tail = monte_carlo_arboricity_bound(200, 2.0, 100, 4).unwrap();
        assert!(tail.within_bound.estimate >= 0.95, "{tail:?}");
        assert!(tail.warning.is_none());
        assert!(monte_carlo_arboricity_bound(30, 0.5, 3, 1).unwrap().warning.is_some());
    }

    fn small_multigraph() -> impl Strategy<Value = ConstraintMultigraph> {
        (2usize..=10).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n), 1..30).prop_map(move |pairs| {
                let mut g = ConstraintMultigraph::new(n);
                for (a, b) in pairs {
                    if a != b {
                        g.add_edge(a, b, None);
                    }
                }
                if g.edge_count() == 0 {
                    g.add_edge(0, 1, None);
                }
                g
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn flow_density_matches_enumeration(g in small_multigraph()) {
            let r = arboricity(&g).unwrap();
            prop_assert_eq!(r.density_star, brute_force_density(&g));
            prop_assert_eq!(g.density_of(&r.witness_subgraph), Some(r.density_star));
            prop_assert!(r.rho <= r.forest_count_upper);
        }

        #[test]
        fn adding_an_edge_never_lowers_density(g in small_multigraph(), a in 0usize..10, b in 0usize..10) {
            let (a, b) = (a % g.n(), b % g.n());
            prop_assume!(a != b);
            let before = arboricity(&g).unwrap().density_star;
            let mut h = g.clone();
            h.add_edge(a, b, None);
            prop_assert!(arboricity(&h).unwrap().density_star >= before);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]

        #[test]
        fn rho_is_the_minimum_forest_count(
            n in 2usize..=7,
            pairs in prop::collection::vec((0usize..7, 0usize..7), 1..12),
        ) {
            let mut g = ConstraintMultigraph::new(n);
            for (a, b) in pairs {
                let (a, b) = (a % n, b % n);
                if a != b {
                    g.add_edge(a, b, None);
                }
            }
            prop_assume!(g.edge_count() > 0);
            prop_assert_eq!(arboricity(&g).unwrap().rho, exhaustive_forest_count(&g));
        }
    }
}
