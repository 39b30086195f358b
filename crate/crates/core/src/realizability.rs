//! Realizability certificates through the pair digraph.
//!
//! Every constraint orients one unordered item pair toward another: the
//! triplet `(x, y, z)` adds `{x,y} -> {x,z}` and the quadruplet `(a, b, c, d)`
//! adds `{a,b} -> {c,d}`. An instance can be satisfied in `n` dimensions
//! exactly when this digraph is acyclic, in which case any topological order
//! of the pairs is a consistent ordering of the distances and
//! [`embed_from_ordering`] turns it into coordinates.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::{sq_dist, Embedding};
use crate::error::{LabError, Result};
use crate::instances::{
    generate_poisson_quadruplets, generate_poisson_triplets, Constraints, Instance, ItemId,
};
use crate::pairs::{ordered, pair_count, pair_from_index, pair_index};
use crate::rng::derive_seed;
use crate::stats::Proportion;

/// Canonical unordered pair, `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PairNode {
    pub lo: ItemId,
    pub hi: ItemId,
}

impl PairNode {
    pub fn new(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "a pair needs two distinct items");
        let (lo, hi) = ordered(a, b);
        PairNode {
            lo: lo.into(),
            hi: hi.into(),
        }
    }

    fn key(self, n: usize) -> usize {
        pair_index(n, self.lo.index(), self.hi.index())
    }

    fn from_key(n: usize, key: usize) -> Self {
        let (lo, hi) = pair_from_index(n, key);
        PairNode {
            lo: lo.into(),
            hi: hi.into(),
        }
    }

    pub fn shares_item(self, other: PairNode) -> usize {
        let mine = [self.lo, self.hi];
        [other.lo, other.hi]
            .iter()
            .filter(|x| mine.contains(x))
            .count()
    }
}

/// Directed edge between two pair nodes, given as node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairEdge {
    pub tail: usize,
    pub head: usize,
}

/// Directed multigraph on the item pairs touched by an instance.
///
/// Edge `e` comes from constraint `e`: edges are stored in constraint order,
/// so the edge index is the back-reference to its source constraint.
#[derive(Debug, Clone)]
pub struct PairDigraph {
    n: usize,
    nodes: Vec<PairNode>,
    edges: Vec<PairEdge>,
    offsets: Vec<usize>,
    adjacency: Vec<usize>,
}

impl PairDigraph {
    pub fn n_items(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[PairNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[PairEdge] {
        &self.edges
    }

    /// Constraint index that produced edge `edge`.
    pub fn origin(&self, edge: usize) -> usize {
        edge
    }

    pub fn node_index(&self, pair: PairNode) -> Option<usize> {
        let key = pair.key(self.n);
        self.nodes
            .binary_search_by_key(&key, |p| p.key(self.n))
            .ok()
    }

    pub fn edge_pairs(&self, edge: usize) -> (PairNode, PairNode) {
        let e = self.edges[edge];
        (self.nodes[e.tail], self.nodes[e.head])
    }

    fn out_edges(&self, node: usize) -> &[usize] {
        &self.adjacency[self.offsets[node]..self.offsets[node + 1]]
    }
}

fn constraint_pairs(constraints: &Constraints, idx: usize) -> (PairNode, PairNode) {
    let [a, b, c, d] = constraints.comparison(idx);
    (PairNode::new(a, b), PairNode::new(c, d))
}

pub fn build_pair_digraph(instance: &Instance) -> PairDigraph {
    let n = instance.n();
    let constraints = instance.constraints();
    let m = constraints.len();

    let mut keys: Vec<usize> = Vec::with_capacity(2 * m);
    for i in 0..m {
        let (p, q) = constraint_pairs(constraints, i);
        keys.push(p.key(n));
        keys.push(q.key(n));
    }
    let mut sorted = keys.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let nodes: Vec<PairNode> = sorted.iter().map(|&k| PairNode::from_key(n, k)).collect();
    let lookup = |k: usize| sorted.binary_search(&k).expect("key was inserted");

    let edges: Vec<PairEdge> = keys
        .chunks_exact(2)
        .map(|kv| PairEdge {
            tail: lookup(kv[0]),
            head: lookup(kv[1]),
        })
        .collect();

    let mut offsets = vec![0usize; nodes.len() + 1];
    for e in &edges {
        offsets[e.tail + 1] += 1;
    }
    for i in 0..nodes.len() {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut adjacency = vec![0usize; edges.len()];
    for (idx, e) in edges.iter().enumerate() {
        adjacency[fill[e.tail]] = idx;
        fill[e.tail] += 1;
    }

    PairDigraph {
        n,
        nodes,
        edges,
        offsets,
        adjacency,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RealizabilityStatus {
    Realizable,
    Unrealizable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RealizabilityCertificate {
    /// Pairs present in the digraph, shortest distance first.
    Realizable { ordering: Vec<PairNode> },
    /// Constraint indices whose edges form a directed cycle, in cycle order.
    Unrealizable { witness_cycle: Vec<usize> },
}

impl RealizabilityCertificate {
    pub fn status(&self) -> RealizabilityStatus {
        match self {
            RealizabilityCertificate::Realizable { .. } => RealizabilityStatus::Realizable,
            RealizabilityCertificate::Unrealizable { .. } => RealizabilityStatus::Unrealizable,
        }
    }

    pub fn is_realizable(&self) -> bool {
        matches!(self, RealizabilityCertificate::Realizable { .. })
    }
}

enum DfsOutcome {
    /// Nodes in topological order.
    Order(Vec<usize>),
    /// Edge indices along a directed cycle.
    Cycle(Vec<usize>),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    White,
    Gray,
    Black,
}

/// Iterative three-colour DFS over all nodes in index order.
fn dfs_topological(g: &PairDigraph) -> DfsOutcome {
    let v = g.nodes.len();
    let mut mark = vec![Mark::White; v];
    let mut parent_edge = vec![usize::MAX; v];
    let mut cursor = vec![0usize; v];
    let mut postorder = Vec::with_capacity(v);
    let mut stack: Vec<usize> = Vec::new();

    for root in 0..v {
        if mark[root] != Mark::White {
            continue;
        }
        mark[root] = Mark::Gray;
        stack.push(root);
        while let Some(&node) = stack.last() {
            let out = g.out_edges(node);
            if cursor[node] == out.len() {
                mark[node] = Mark::Black;
                postorder.push(node);
                stack.pop();
                continue;
            }
            let edge = out[cursor[node]];
            cursor[node] += 1;
            let head = g.edges[edge].head;
            match mark[head] {
                Mark::White => {
                    mark[head] = Mark::Gray;
                    parent_edge[head] = edge;
                    stack.push(head);
                }
                Mark::Gray => {
                    // Back edge closes a cycle head -> ... -> node -> head.
                    let mut cycle = vec![edge];
                    let mut cur = node;
                    while cur != head {
                        let pe = parent_edge[cur];
                        cycle.push(pe);
                        cur = g.edges[pe].tail;
                    }
                    cycle.reverse();
                    return DfsOutcome::Cycle(cycle);
                }
                Mark::Black => {}
            }
        }
    }
    postorder.reverse();
    DfsOutcome::Order(postorder)
}

/// Decides whether the pair digraph of `instance` is acyclic.
pub fn certify(instance: &Instance) -> RealizabilityCertificate {
    certify_graph(&build_pair_digraph(instance))
}

pub fn certify_graph(graph: &PairDigraph) -> RealizabilityCertificate {
    match dfs_topological(graph) {
        DfsOutcome::Order(order) => RealizabilityCertificate::Realizable {
            ordering: order.into_iter().map(|i| graph.nodes[i]).collect(),
        },
        DfsOutcome::Cycle(edges) => RealizabilityCertificate::Unrealizable {
            witness_cycle: edges.into_iter().map(|e| graph.origin(e)).collect(),
        },
    }
}

/// Kahn peeling; only answers whether the digraph is acyclic.
pub fn is_acyclic(graph: &PairDigraph) -> bool {
    let v = graph.nodes.len();
    let mut indegree = vec![0usize; v];
    for e in &graph.edges {
        indegree[e.head] += 1;
    }
    let mut queue: Vec<usize> = (0..v).filter(|&i| indegree[i] == 0).collect();
    let mut seen = 0;
    while let Some(node) = queue.pop() {
        seen += 1;
        for &edge in graph.out_edges(node) {
            let head = graph.edges[edge].head;
            indegree[head] -= 1;
            if indegree[head] == 0 {
                queue.push(head);
            }
        }
    }
    seen == v
}

/// Checks that `cycle` lists constraints whose edges chain head-to-tail and
/// close up.
pub fn verify_witness(instance: &Instance, cycle: &[usize]) -> bool {
    if cycle.is_empty() {
        return false;
    }
    let constraints = instance.constraints();
    if cycle.iter().any(|&c| c >= constraints.len()) {
        return false;
    }
    (0..cycle.len()).all(|k| {
        let (_, head) = constraint_pairs(constraints, cycle[k]);
        let (next_tail, _) = constraint_pairs(constraints, cycle[(k + 1) % cycle.len()]);
        head == next_tail
    })
}

/// Checks that every constraint's shorter pair precedes its longer pair in
/// `ordering`. Pairs missing from the ordering make the check fail.
pub fn ordering_satisfies(instance: &Instance, ordering: &[PairNode]) -> bool {
    let n = instance.n();
    let mut rank = vec![usize::MAX; pair_count(n)];
    for (r, p) in ordering.iter().enumerate() {
        rank[p.key(n)] = r;
    }
    let constraints = instance.constraints();
    (0..constraints.len()).all(|i| {
        let (p, q) = constraint_pairs(constraints, i);
        let (rp, rq) = (rank[p.key(n)], rank[q.key(n)]);
        rp != usize::MAX && rq != usize::MAX && rp < rq
    })
}

/// Extends an ordering of some pairs to all `C(n, 2)` pairs by appending the
/// missing ones in lexicographic order.
pub fn complete_ordering(n: usize, partial: &[PairNode]) -> Vec<PairNode> {
    let total = pair_count(n);
    let mut present = vec![false; total];
    let mut out = Vec::with_capacity(total);
    for p in partial {
        let k = p.key(n);
        if !present[k] {
            present[k] = true;
            out.push(*p);
        }
    }
    out.extend(
        (0..total)
            .filter(|&k| !present[k])
            .map(|k| PairNode::from_key(n, k)),
    );
    out
}

const PSD_TOLERANCE: f64 = -1e-12;
const STRICT_GAP: f64 = 1e-9;
const MAX_HALVINGS: usize = 200;

/// Points whose pairwise distances increase strictly along `ordering`.
///
/// Starts from the regular simplex with unit squared edge lengths and sets
/// the squared length of the pair ranked `r` to `1 + eps * r`. The centered
/// Gram matrix is `C/2 - (eps/2) C R C` with `R` the rank matrix; on the
/// complement of the all-ones vector its eigenvalues are `(1 - eps*mu)/2`
/// for the eigenvalues `mu` of the projected rank matrix, so one symmetric
/// eigendecomposition serves every trial `eps`. `eps` starts at
/// `1 / (4 C(n,2))` and is halved until the Gram matrix is positive
/// semidefinite and the recovered distances are strictly increasing.
///
/// Returns `n` points with `n` coordinates (the last one is always zero).
pub fn embed_from_ordering(n: usize, ordering: &[PairNode]) -> Result<Embedding> {
    if n == 0 {
        return Err(LabError::InvalidParameter("need at least one item".into()));
    }
    let total = pair_count(n);
    if ordering.len() != total {
        return Err(LabError::InvalidParameter(format!(
            "ordering has {} pairs, a total order over {n} items needs {total}",
            ordering.len()
        )));
    }
    let mut rank = vec![usize::MAX; total];
    for (r, p) in ordering.iter().enumerate() {
        if p.hi.index() >= n {
            return Err(LabError::InvalidParameter(format!(
                "pair {{{}, {}}} is outside [0, {n})",
                p.lo, p.hi
            )));
        }
        let k = p.key(n);
        if rank[k] != usize::MAX {
            return Err(LabError::InvalidParameter(format!(
                "pair {{{}, {}}} appears twice in the ordering",
                p.lo, p.hi
            )));
        }
        rank[k] = r;
    }
    if n == 1 {
        return Ok(Embedding::zeros(1, 1));
    }

    let ranks = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let (lo, hi) = ordered(i, j);
            rank[pair_index(n, lo, hi)] as f64
        }
    });

    // Householder reflection sending e_{n-1} to the unit all-ones direction;
    // its first n-1 columns are an orthonormal basis of the centered subspace.
    let mut u = DMatrix::<f64>::from_element(n, 1, -1.0 / (n as f64).sqrt());
    u[(n - 1, 0)] += 1.0;
    let u_norm2 = u.norm_squared();
    let reflect = DMatrix::<f64>::identity(n, n) - (&u * u.transpose()) * (2.0 / u_norm2);
    let basis = reflect.columns(0, n - 1).into_owned();
    let projected = basis.transpose() * &ranks * &basis;
    let projected = (&projected + projected.transpose()) * 0.5;
    let eigen = SymmetricEigen::new(projected);
    let directions = &basis * &eigen.eigenvectors;
    let mu_max = eigen.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut eps = 1.0 / (4.0 * total as f64);
    for _ in 0..MAX_HALVINGS {
        let min_eig = 0.5 * (1.0 - eps * mu_max);
        if min_eig < PSD_TOLERANCE {
            eps *= 0.5;
            continue;
        }
        let mut emb = Embedding::zeros(n, n);
        for (k, mu) in eigen.eigenvalues.iter().enumerate() {
            let scale = (0.5 * (1.0 - eps * mu)).max(0.0).sqrt();
            for i in 0..n {
                emb.row_mut(i)[k] = directions[(i, k)] * scale;
            }
        }
        if strictly_increasing(&emb, ordering, eps) {
            return Ok(emb);
        }
        eps *= 0.5;
    }
    Err(LabError::InvalidParameter(
        "could not separate the ordered distances numerically".into(),
    ))
}

/// Consecutive distances along `ordering` must grow by at least the strictness
/// gap, capped at `eps/8` (the exact gap in distance units is about `eps/2`).
fn strictly_increasing(emb: &Embedding, ordering: &[PairNode], eps: f64) -> bool {
    let gap = STRICT_GAP.min(eps / 8.0);
    let mut prev = f64::NEG_INFINITY;
    for p in ordering {
        let d = sq_dist(emb.row(p.lo.index()), emb.row(p.hi.index())).sqrt();
        if !(d - prev >= gap) {
            return false;
        }
        prev = d;
    }
    true
}

/// Certifies `instance` and, when realizable, builds coordinates from the
/// completed ordering.
pub fn realize(instance: &Instance) -> Result<Option<Embedding>> {
    match certify(instance) {
        RealizabilityCertificate::Realizable { ordering } => {
            let full = complete_ordering(instance.n(), &ordering);
            embed_from_ordering(instance.n(), &full).map(Some)
        }
        RealizabilityCertificate::Unrealizable { .. } => Ok(None),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintFamily {
    Triplets,
    Quadruplets,
}

/// Fraction of Poisson instances whose pair digraph is acyclic.
pub fn monte_carlo_acyclicity(
    family: ConstraintFamily,
    n: usize,
    lambda: f64,
    trials: usize,
    seed: u64,
) -> Result<Proportion> {
    if trials == 0 {
        return Err(LabError::InvalidParameter("trials must be at least 1".into()));
    }
    let acyclic = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = derive_seed(seed, &[t as u64]);
            let inst = match family {
                ConstraintFamily::Triplets => generate_poisson_triplets(n, lambda, s)?,
                ConstraintFamily::Quadruplets => generate_poisson_quadruplets(n, lambda, s)?,
            };
            Ok(is_acyclic(&build_pair_digraph(&inst)) as usize)
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum();
    Ok(Proportion::new(acyclic, trials))
}
