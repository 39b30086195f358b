//! Maximum acyclic subgraph and its reduction to anchored triplets.
//!
//! A digraph on `v` vertices becomes a triplet instance on `v + 1` items:
//! item `v` is a new anchor `S` and every arc `u -> w` becomes the triplet
//! `(S, u, w)`. A triplet is then satisfied exactly when `u` sits closer to
//! the anchor than `w`, so sorting vertices by their distance to `S` turns
//! any embedding into an ordering that is at least as good.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::embedding::Embedding;
use crate::error::{LabError, Result};
use crate::evaluation::evaluate_accuracy;
use crate::instances::{GeneratorKind, GeneratorMeta, Instance, Triplet};
use crate::rng::{derive_seed, seeded};
use crate::stats::MeanEstimate;

/// Largest vertex count accepted by the factorial searches.
pub const BRUTE_FORCE_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasGraph {
    v: usize,
    arcs: Vec<(usize, usize)>,
}

impl MasGraph {
    pub fn new(v: usize, arcs: Vec<(usize, usize)>) -> Result<Self> {
        for &(u, w) in &arcs {
            if u == w {
                return Err(LabError::InvalidInput(format!("self-loop on vertex {u}")));
            }
            if u >= v || w >= v {
                return Err(LabError::InvalidInput(format!(
                    "arc {u} -> {w} is outside [0, {v})"
                )));
            }
        }
        Ok(MasGraph { v, arcs })
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("digraph {}\n", self.v);
        for (u, w) in &self.arcs {
            writeln!(out, "{u} {w}").unwrap();
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut v = None;
        let mut arcs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let num = |t: &str| {
                t.parse::<usize>()
                    .map_err(|e| LabError::parse(path, idx + 1, format!("bad number `{t}`: {e}")))
            };
            match (v, toks.as_slice()) {
                (None, ["digraph", count]) => v = Some(num(count)?),
                (None, _) => {
                    return Err(LabError::parse(path, idx + 1, "expected `digraph <v>` header"))
                }
                (Some(_), [u, w]) => arcs.push((num(u)?, num(w)?)),
                (Some(_), _) => {
                    return Err(LabError::parse(path, idx + 1, "expected an arc `u w`"))
                }
            }
        }
        let v = v.ok_or_else(|| LabError::parse(path, 1, "missing `digraph <v>` header"))?;
        MasGraph::new(v, arcs).map_err(|e| LabError::parse(path, 0, e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        MasGraph::parse(&text, path)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| LabError::io(path, e))
    }

    /// Anchor item in the reduced instance.
    pub fn anchor(&self) -> usize {
        self.v
    }
}

/// A permutation given by ranks: `ranks[u]` is the position of vertex `u`,
/// counted from 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MasSolution {
    pub ranks: Vec<usize>,
    pub forward_arcs: usize,
    pub total_arcs: usize,
    pub value: f64,
}

impl MasSolution {
    /// Vertices listed by increasing rank.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.ranks.len()];
        for (u, &r) in self.ranks.iter().enumerate() {
            order[r - 1] = u;
        }
        order
    }
}

fn check_ranks(g: &MasGraph, ranks: &[usize]) -> Result<()> {
    if ranks.len() != g.v {
        return Err(LabError::InvalidParameter(format!(
            "permutation has {} entries for {} vertices",
            ranks.len(),
            g.v
        )));
    }
    let mut seen = vec![false; g.v];
    for &r in ranks {
        if r == 0 || r > g.v || std::mem::replace(&mut seen[r - 1], true) {
            return Err(LabError::InvalidParameter(
                "ranks must be a bijection onto 1..=v".into(),
            ));
        }
    }
    Ok(())
}

fn forward_count(g: &MasGraph, ranks: &[usize]) -> usize {
    g.arcs.iter().filter(|&&(u, w)| ranks[u] < ranks[w]).count()
}

/// Fraction of arcs pointing forward under `ranks`.
pub fn value_of(g: &MasGraph, ranks: &[usize]) -> Result<MasSolution> {
    check_ranks(g, ranks)?;
    let forward_arcs = forward_count(g, ranks);
    let total_arcs = g.arcs.len();
    Ok(MasSolution {
        ranks: ranks.to_vec(),
        forward_arcs,
        total_arcs,
        value: if total_arcs == 0 {
            1.0
        } else {
            forward_arcs as f64 / total_arcs as f64
        },
    })
}

pub fn reduce_mas_to_triplets(g: &MasGraph) -> Result<Instance> {
    if g.arcs.is_empty() {
        return Err(LabError::InvalidInput("digraph has no arcs".into()));
    }
    let s = g.anchor();
    let triplets = g.arcs.iter().map(|&(u, w)| Triplet::new(s, u, w)).collect();
    Instance::new(
        g.v + 1,
        crate::instances::Constraints::Triplets(triplets),
        GeneratorMeta::new(GeneratorKind::External, 0),
    )
}

/// One-dimensional embedding with the anchor at 0 and vertex `u` at its rank.
pub fn embed_permutation(g: &MasGraph, ranks: &[usize]) -> Result<Embedding> {
    check_ranks(g, ranks)?;
    let mut coords: Vec<f64> = ranks.iter().map(|&r| r as f64).collect();
    coords.push(0.0);
    Embedding::from_flat(g.v + 1, 1, coords)
}

/// Orders vertices by distance to the anchor, ties by vertex index.
pub fn extract_permutation(emb: &Embedding, g: &MasGraph) -> Result<MasSolution> {
    if emb.n() != g.v + 1 {
        return Err(LabError::InvalidInput(format!(
            "embedding has {} rows, the reduced instance has {} items",
            emb.n(),
            g.v + 1
        )));
    }
    let s = g.anchor();
    let radius: Vec<f64> = (0..g.v).map(|u| emb.sq_dist(u, s)).collect();
    let mut order: Vec<usize> = (0..g.v).collect();
    order.sort_by(|&a, &b| radius[a].total_cmp(&radius[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; g.v];
    for (pos, &u) in order.iter().enumerate() {
        ranks[u] = pos + 1;
    }
    value_of(g, &ranks)
}

fn size_guard(v: usize) -> Result<()> {
    if v > BRUTE_FORCE_LIMIT {
        return Err(LabError::SizeGuard {
            what: "vertices for factorial search",
            actual: v,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    Ok(())
}

/// Calls `visit` on every permutation of `0..k` (Heap's algorithm).
fn for_each_permutation(k: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..k).collect();
    let mut c = vec![0usize; k];
    visit(&perm);
    let mut i = 1;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Exact optimum by trying every permutation; first best in enumeration order.
pub fn brute_force_mas(g: &MasGraph) -> Result<MasSolution> {
    size_guard(g.v)?;
    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut ranks = vec![0; g.v];
    for_each_permutation(g.v, |perm| {
        for (pos, &u) in perm.iter().enumerate() {
            ranks[u] = pos + 1;
        }
        let f = forward_count(g, &ranks);
        if best.as_ref().is_none_or(|(b, _)| f > *b) {
            best = Some((f, ranks.clone()));
        }
    });
    let (_, ranks) = best.expect("at least one permutation");
    value_of(g, &ranks)
}

/// Best accuracy over the one-dimensional embeddings that put item `n - 1`
/// at 0 and the other items at distinct positions `1..n-1`, padded with
/// zeros to `d` coordinates. Each candidate is scored by full evaluation.
pub fn brute_force_triplet_opt(instance: &Instance, d: usize) -> Result<f64> {
    if d < 1 {
        return Err(LabError::InvalidParameter("dimension must be at least 1".into()));
    }
    let n = instance.n();
    if n < 2 {
        return Err(LabError::InvalidInstance("need at least two items".into()));
    }
    let k = n - 1;
    size_guard(k)?;
    let mut best = f64::NEG_INFINITY;
    let mut failure = None;
    let mut emb = Embedding::zeros(n, d);
    for_each_permutation(k, |perm| {
        for (pos, &u) in perm.iter().enumerate() {
            emb.row_mut(u)[0] = (pos + 1) as f64;
        }
        match evaluate_accuracy(&emb, instance) {
            Ok(acc) => best = best.max(acc),
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

/// Mean value of uniformly random permutations.
pub fn random_permutation_baseline(g: &MasGraph, trials: usize, seed: u64) -> Result<MeanEstimate> {
    if trials == 0 {
        return Err(LabError::InvalidParameter("trials must be at least 1".into()));
    }
    let mut ranks: Vec<usize> = (1..=g.v).collect();
    let samples: Vec<f64> = (0..trials)
        .map(|t| {
            let mut rng = seeded(derive_seed(seed, &[t as u64]));
            ranks.shuffle(&mut rng);
            value_of(g, &ranks).map(|s| s.value)
        })
        .collect::<Result<_>>()?;
    Ok(MeanEstimate::from_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::evaluate;
    use crate::optimizer::{train, TrainConfig};
    use proptest::prelude::*;

    fn cycle3() -> MasGraph {
        MasGraph::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    fn arbitrary_graph(max_v: usize) -> impl Strategy<Value = MasGraph> {
        (2..=max_v).prop_flat_map(|v| {
            prop::collection::vec((0..v, 0..v), 1..16).prop_map(move |pairs| {
                let mut arcs: Vec<(usize, usize)> =
                    pairs.into_iter().filter(|(a, b)| a != b).collect();
                if arcs.is_empty() {
                    arcs.push((0, 1));
                }
                MasGraph::new(v, arcs).unwrap()
            })
        })
    }

    #[test]
    fn single_arc_reduction() {
        let g = MasGraph::new(2, vec![(0, 1)]).unwrap();
        let inst = reduce_mas_to_triplets(&g).unwrap();
        assert_eq!(inst.n(), 3);
        assert_eq!(inst.triplets().unwrap(), &[Triplet::new(2, 0, 1)]);
    }

    #[test]
    fn cycle_shares_the_anchor() {
        let inst = reduce_mas_to_triplets(&cycle3()).unwrap();
        assert_eq!(inst.m(), 3);
        assert!(inst.triplets().unwrap().iter().all(|t| t.anchor.index() == 3));
    }

    #[test]
    fn three_cycle_optimum_is_two_thirds() {
        let g = cycle3();
        let best = brute_force_mas(&g).unwrap();
        assert_eq!((best.forward_arcs, best.total_arcs), (2, 3));
        let inst = reduce_mas_to_triplets(&g).unwrap();
        assert_eq!(brute_force_triplet_opt(&inst, 1).unwrap(), 2.0 / 3.0);
        let mut every = Vec::new();
        for_each_permutation(3, |p| every.push(p.to_vec()));
        assert_eq!(every.len(), 6);
        for perm in every {
            let ranks: Vec<usize> = (0..3).map(|u| perm.iter().position(|&x| x == u).unwrap() + 1).collect();
            let emb = embed_permutation(&g, &ranks).unwrap();
            let acc = evaluate_accuracy(&emb, &inst).unwrap();
            assert!(acc == 1.0 / 3.0 || acc == 2.0 / 3.0);
        }
    }

    #[test]
    fn dag_and_opposing_arcs() {
        let dag = MasGraph::new(4, vec![(0, 1), (1, 2), (0, 3), (2, 3)]).unwrap();
        assert_eq!(brute_force_mas(&dag).unwrap().value, 1.0);
        let inst = reduce_mas_to_triplets(&dag).unwrap();
        let emb = embed_permutation(&dag, &[1, 2, 3, 4]).unwrap();
        assert_eq!(evaluate_accuracy(&emb, &inst).unwrap(), 1.0);

        let opposing = MasGraph::new(2, vec![(0, 1), (1, 0)]).unwrap();
        assert_eq!(brute_force_mas(&opposing).unwrap().value, 0.5);
        let base = random_permutation_baseline(&opposing, 200, 1).unwrap();
        assert_eq!(base.mean, 0.5);
        assert_eq!(base.stderr, 0.0);
    }

    #[test]
    fn random_baseline_is_half() {
        let g = MasGraph::new(6, vec![(0, 1), (2, 1), (3, 4), (5, 0), (4, 2), (1, 5), (0, 3)]).unwrap();
        let est = random_permutation_baseline(&g, 10_000, 3).unwrap();
        assert!((est.mean - 0.5).abs() <= 0.01, "{est:?}");
    }

    #[test]
    fn extraction_example() {
        let g = MasGraph::new(2, vec![(0, 1)]).unwrap();
        let emb = Embedding::from_flat(3, 1, vec![1.0, 2.0, 0.0]).unwrap();
        let sol = extract_permutation(&emb, &g).unwrap();
        assert_eq!(sol.ranks, vec![1, 2]);
        assert_eq!(sol.order(), vec![0, 1]);
        assert_eq!(sol.value, 1.0);
    }

    #[test]
    fn equal_radii_break_by_index() {
        let g = MasGraph::new(3, vec![(2, 0)]).unwrap();
        let emb = Embedding::from_flat(4, 1, vec![1.0, -1.0, 1.0, 0.0]).unwrap();
        assert_eq!(extract_permutation(&emb, &g).unwrap().ranks, vec![1, 2, 3]);
        let wrong = Embedding::zeros(3, 1);
        assert!(extract_permutation(&wrong, &g).is_err());
    }

    #[test]
    fn bad_permutations_rejected() {
        let g = cycle3();
        assert!(embed_permutation(&g, &[1, 1, 2]).is_err());
        assert!(embed_permutation(&g, &[0, 1, 2]).is_err());
        assert!(embed_permutation(&g, &[1, 2]).is_err());
    }

    #[test]
    fn size_guard_refuses_large_graphs() {
        let g = MasGraph::new(11, vec![(0, 1)]).unwrap();
        assert!(matches!(brute_force_mas(&g), Err(LabError::SizeGuard { .. })));
    }

    #[test]
    fn text_round_trip() {
        let g = MasGraph::new(4, vec![(0, 1), (3, 2), (0, 1)]).unwrap();
        assert_eq!(MasGraph::parse(&g.to_text(), Path::new("g")).unwrap(), g);
        assert!(MasGraph::parse("digraph 2\n0 0\n", Path::new("g")).is_err());
        assert!(MasGraph::parse("0 1\n", Path::new("g")).is_err());
    }

    #[test]
    fn trained_embeddings_never_beat_the_optimum() {
        let g = MasGraph::new(5, vec![(0, 1), (1, 2), (2, 0), (3, 4), (4, 3), (2, 4), (4, 1)]).unwrap();
        let inst = reduce_mas_to_triplets(&g).unwrap();
        let opt = brute_force_mas(&g).unwrap().value;
        for d in 1..=3 {
            for seed in 0..3 {
                let cfg = TrainConfig { steps: Some(300), batch_size: 8, seed, ..TrainConfig::with_dimension(d) };
                let emb = train(&inst, &cfg).unwrap().embedding;
                let acc = evaluate_accuracy(&emb, &inst).unwrap();
                assert!(acc <= opt + 1e-12);
                assert!(extract_permutation(&emb, &g).unwrap().value >= acc);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn value_equals_accuracy(g in arbitrary_graph(8), seed in 0u64..1000) {
            let inst = reduce_mas_to_triplets(&g).unwrap();
            let mut ranks: Vec<usize> = (1..=g.v()).collect();
            ranks.shuffle(&mut seeded(seed));
            let sol = value_of(&g, &ranks).unwrap();
            let report = evaluate(&embed_permutation(&g, &ranks).unwrap(), &inst).unwrap();
            prop_assert_eq!(sol.forward_arcs, report.satisfied);
            prop_assert_eq!(sol.value, report.accuracy);
            // distinct radii, so extraction recovers the permutation
            let emb = embed_permutation(&g, &ranks).unwrap();
            prop_assert_eq!(extract_permutation(&emb, &g).unwrap().ranks, ranks.clone());
            let reversed: Vec<usize> = ranks.iter().map(|r| g.v() + 1 - r).collect();
            let rev = value_of(&g, &reversed).unwrap();
            prop_assert_eq!(rev.forward_arcs + sol.forward_arcs, g.arcs().len());
        }

        #[test]
        fn optima_agree(g in arbitrary_graph(6)) {
            let inst = reduce_mas_to_triplets(&g).unwrap();
            prop_assert_eq!(brute_force_mas(&g).unwrap().value, brute_force_triplet_opt(&inst, 1).unwrap());
        }

        #[test]
        fn extraction_never_loses(g in arbitrary_graph(6), coords in prop::collection::vec(-2i32..3, 14)) {
            let n = g.v() + 1;
            let emb = Embedding::from_flat(n, 2, coords[..2 * n].iter().map(|&c| c as f64).collect()).unwrap();
            let inst = reduce_mas_to_triplets(&g).unwrap();
            let acc = evaluate_accuracy(&emb, &inst).unwrap();
            prop_assert!(extract_permutation(&emb, &g).unwrap().value >= acc);
        }
    }
}
