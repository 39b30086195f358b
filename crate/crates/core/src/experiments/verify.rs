//! Monte Carlo checks of the probabilistic statements and the
//! realizable-but-collapsing pipeline on random instances.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::constraint_graph::{
    arboricity, build_constraint_graph, monte_carlo_arboricity_bound, subadditivity_check,
};
use crate::error::{LabError, Result};
use crate::evaluation::{evaluate_accuracy, trivial_baseline};
use crate::instances::{generate_poisson_triplets, generate_uniform_triplets, Instance, Triplet};
use crate::optimizer::{train, TrainConfig};
use crate::realizability::{certify, monte_carlo_acyclicity, realize, ConstraintFamily};
use crate::rng::derive_seed;
use crate::stats::chi_square_two_sample;

#[derive(Debug, Clone, Serialize)]
pub struct Theorem3Config {
    pub ground_truth_dim: usize,
    pub n: usize,
    pub epsilon: f64,
    pub seeds: usize,
    /// `m = c1 * D * n`.
    pub c1: f64,
    /// Collapse arm trains at `d = max(1, round(c2 * epsilon^2 * D))`.
    pub c2: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Build coordinates for realizable instances (costs an `n x n` eigensolve).
    pub construct_embedding: bool,
    pub train: TrainConfig,
}

impl Default for Theorem3Config {
    fn default() -> Self {
        Theorem3Config {
            ground_truth_dim: 16,
            n: 400,
            epsilon: 0.25,
            seeds: 5,
            c1: 0.05,
            c2: 1.0,
            restarts: 3,
            seed: 0,
            construct_embedding: true,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem3Seed {
    pub seed: u64,
    pub m: usize,
    pub realizable: bool,
    /// Accuracy of the constructed embedding, when one was built.
    pub constructed_accuracy: Option<f64>,
    pub rho: u64,
    pub dimension_bound: u64,
    pub collapse_d: usize,
    /// Best accuracy over restarts: a lower bound on the optimum at `collapse_d`.
    pub collapse_best_accuracy: f64,
    pub full_dimension_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem3Report {
    pub config: Theorem3Config,
    pub m: usize,
    pub collapse_d: usize,
    pub collapse_target: f64,
    pub seeds: Vec<Theorem3Seed>,
    pub realizable_fraction: f64,
    pub exact_when_realizable: bool,
    pub bound_within_dimension_fraction: f64,
    pub collapse_within_target_fraction: f64,
    pub mean_full_dimension_accuracy: f64,
}

fn best_of_restarts(inst: &Instance, base: &TrainConfig, d: usize, restarts: usize, seed: u64) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for r in 0..restarts.max(1) {
        let cfg = TrainConfig {
            d,
            seed: derive_seed(seed, &[d as u64, r as u64]),
            ..base.clone()
        };
        let emb = train(inst, &cfg)?.embedding;
        best = best.max(evaluate_accuracy(&emb, inst)?);
    }
    Ok(best)
}

/// Runs the realizability, dimension-bound and collapse arms on random
/// `I(n, m)` instances with `m = c1 * D * n`.
pub fn verify_theorem3(config: &Theorem3Config) -> Result<Theorem3Report> {
    let big_d = config.ground_truth_dim;
    if big_d < 2 {
        return Err(LabError::InvalidParameter("D must be at least 2".into()));
    }
    if !(config.epsilon > 0.0 && config.epsilon <= 0.5) {
        return Err(LabError::InvalidParameter("epsilon must lie in (0, 1/2]".into()));
    }
    if config.seeds == 0 || !(config.c1 > 0.0) || !(config.c2 > 0.0) {
        return Err(LabError::InvalidParameter("seeds, c1 and c2 must be positive".into()));
    }
    let m = ((config.c1 * (big_d * config.n) as f64).round() as usize).max(1);
    let collapse_d = ((config.c2 * config.epsilon.powi(2) * big_d as f64).round() as usize).max(1);
    let collapse_target = 0.5 + config.epsilon;

    let seeds: Vec<Theorem3Seed> = (0..config.seeds as u64)
        .into_par_iter()
        .map(|s| {
            let seed = derive_seed(config.seed, &[s]);
            let inst = generate_uniform_triplets(config.n, m, seed)?;
            let (realizable, constructed_accuracy) = if config.construct_embedding {
                match realize(&inst)? {
                    Some(emb) => (true, Some(evaluate_accuracy(&emb, &inst)?)),
                    None => (false, None),
                }
            } else {
                let cert = certify(&inst);
                (cert.is_realizable(), None)
            };
            let report = arboricity(&build_constraint_graph(&inst))?;
            Ok(Theorem3Seed {
                seed,
                m,
                realizable,
                constructed_accuracy,
                rho: report.rho,
                dimension_bound: report.implied_dim_bound,
                collapse_d,
                collapse_best_accuracy: best_of_restarts(&inst, &config.train, collapse_d, config.restarts, seed)?,
                full_dimension_accuracy: best_of_restarts(&inst, &config.train, big_d, 1, seed)?,
            })
        })
        .collect::<Result<_>>()?;

    let k = seeds.len() as f64;
    let frac = |f: &dyn Fn(&Theorem3Seed) -> bool| seeds.iter().filter(|s| f(s)).count() as f64 / k;
    Ok(Theorem3Report {
        config: config.clone(),
        m,
        collapse_d,
        collapse_target,
        realizable_fraction: frac(&|s| s.realizable),
        exact_when_realizable: seeds.iter().all(|s| s.constructed_accuracy.is_none_or(|a| a == 1.0)),
        bound_within_dimension_fraction: frac(&|s| s.dimension_bound as usize <= big_d),
        collapse_within_target_fraction: frac(&|s| s.collapse_best_accuracy <= collapse_target),
        mean_full_dimension_accuracy: seeds.iter().map(|s| s.full_dimension_accuracy).sum::<f64>() / k,
        seeds,
    })
}

pub const LEMMA_SUITES: [&str; 6] = [
    "acyclicity",
    "acyclicity-quad",
    "arboricity-tail",
    "baseline",
    "subadditivity",
    "coupling",
];

/// Optional overrides; each suite fills in its own defaults.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LemmaParams {
    pub n: Option<usize>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub suite: String,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: String,
    pub trials: usize,
    pub details: BTreeMap<String, f64>,
}

fn ordered_triple_category(n: usize, t: &Triplet) -> usize {
    (t.anchor.index() * n + t.positive.index()) * n + t.negative.index()
}

/// Conditioned on its size, a Poisson instance should be a fixed-size
/// uniform instance. Compares constraint histograms of both samplers.
fn coupling_test(n: usize, m: usize, draws: usize, seed: u64) -> Result<(f64, BTreeMap<String, f64>)> {
    let ordered_triples = (n * (n - 1) * (n - 2)) as f64;
    let lambda = m as f64 / ordered_triples;
    let cats = n * n * n;

    // Rejection sampling: keep Poisson instances that happen to have size m.
    let mut conditioned = vec![0u64; cats];
    let mut accepted = 0usize;
    let mut attempts = 0u64;
    while accepted < draws {
        attempts += 1;
        let inst = generate_poisson_triplets(n, lambda, derive_seed(seed, &[1, attempts]))?;
        if inst.m() != m {
            continue;
        }
        for t in inst.triplets().expect("triplets") {
            conditioned[ordered_triple_category(n, t)] += 1;
        }
        accepted += 1;
    }

    let mut fixed = vec![0u64; cats];
    for k in 0..draws {
        let inst = generate_uniform_triplets(n, m, derive_seed(seed, &[2, k as u64]))?;
        for t in inst.triplets().expect("triplets") {
            fixed[ordered_triple_category(n, t)] += 1;
        }
    }
    let test = chi_square_two_sample(&conditioned, &fixed);
    let details = BTreeMap::from([
        ("chi_square".to_string(), test.statistic),
        ("degrees_of_freedom".to_string(), test.degrees_of_freedom as f64),
        ("poisson_attempts".to_string(), attempts as f64),
    ]);
    Ok((test.p_value, details))
}

/// Runs one named check against its pass threshold.
pub fn verify_lemmas(suite: &str, params: &LemmaParams, trials: usize, seed: u64) -> Result<LemmaReport> {
    if trials == 0 {
        return Err(LabError::InvalidParameter("trials must be at least 1".into()));
    }
    let mut details = BTreeMap::new();
    let (passed, statistic, threshold) = match suite {
        "acyclicity" | "acyclicity-quad" => {
            let quad = suite == "acyclicity-quad";
            let n = params.n.unwrap_or(if quad { 200 } else { 400 });
            let exponent = if quad { -2.0 } else { -1.5 };
            let lambda = params.lambda.unwrap_or(0.1 * (n as f64).powf(exponent));
            let family = if quad { ConstraintFamily::Quadruplets } else { ConstraintFamily::Triplets };
            let p = monte_carlo_acyclicity(family, n, lambda, trials, seed)?;
            details.insert("n".into(), n as f64);
            details.insert("lambda".into(), lambda);
            details.insert("wilson_lower".into(), p.lower);
            details.insert("wilson_upper".into(), p.upper);
            (p.estimate >= 0.9, p.estimate, "acyclic fraction >= 0.9".to_string())
        }
        "arboricity-tail" => {
            let n = params.n.unwrap_or(200);
            let alpha = params.alpha.unwrap_or(2.0);
            let tail = monte_carlo_arboricity_bound(n, alpha, trials, seed)?;
            details.insert("n".into(), n as f64);
            details.insert("alpha".into(), alpha);
            details.insert("rho_threshold".into(), tail.threshold);
            let p = tail.within_bound;
            (p.estimate >= 0.95, p.estimate, "fraction with rho <= 5 alpha >= 0.95".to_string())
        }
        "baseline" => {
            let n = params.n.unwrap_or(50);
            let m = params.m.unwrap_or(1000);
            let inst = generate_uniform_triplets(n, m, seed)?;
            let est = trivial_baseline(&inst, trials, derive_seed(seed, &[1]))?;
            details.insert("stderr".into(), est.stderr);
            ((est.mean - 0.5).abs() <= 0.01, est.mean, "|mean - 0.5| <= 0.01".to_string())
        }
        "subadditivity" => {
            let n = params.n.unwrap_or(20);
            let m = params.m.unwrap_or(100);
            let holds = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let inst = generate_uniform_triplets(n, m, derive_seed(seed, &[t as u64]))?;
                    Ok(subadditivity_check(&build_constraint_graph(&inst))?.holds)
                })
                .collect::<Result<Vec<bool>>>()?;
            let frac = holds.iter().filter(|&&h| h).count() as f64 / trials as f64;
            (frac == 1.0, frac, "rho(G) <= rho(G1) + rho(G2) on every trial".to_string())
        }
        "coupling" => {
            let n = params.n.unwrap_or(6);
            let m = params.m.unwrap_or(3);
            if n < 3 {
                return Err(LabError::InvalidParameter("coupling needs n >= 3".into()));
            }
            let (p, extra) = coupling_test(n, m, trials, seed)?;
            details.extend(extra);
            (p >= 0.001, p, "chi-square p-value >= 0.001".to_string())
        }
        other => return Err(LabError::UnknownSuite(other.to_string())),
    };
    Ok(LemmaReport {
        suite: suite.to_string(),
        passed,
        statistic,
        threshold,
        trials,
        details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(matches!(
            verify_lemmas("nope", &LemmaParams::default(), 1, 0),
            Err(LabError::UnknownSuite(_))
        ));
    }

    #[test]
    fn quick_suites_pass() {
        let p = LemmaParams::default();
        assert!(verify_lemmas("baseline", &p, 10_000, 1).unwrap().passed);
        assert!(verify_lemmas("subadditivity", &p, 10, 1).unwrap().passed);
        assert!(verify_lemmas("acyclicity", &p, 50, 1).unwrap().passed);
        assert!(verify_lemmas("coupling", &p, 5_000, 1).unwrap().passed);
    }

    #[test]
    fn theorem3_small_run() {
        let config = Theorem3Config {
            n: 150,
            ground_truth_dim: 8,
            seeds: 2,
            restarts: 1,
            train: TrainConfig { steps: Some(200), batch_size: 64, ..TrainConfig::default() },
            ..Theorem3Config::default()
        };
        let r = verify_theorem3(&config).unwrap();
        assert_eq!(r.m, 60);
        assert_eq!(r.collapse_d, 1);
        assert!(r.exact_when_realizable);
        assert_eq!(r.seeds.len(), 2);
        assert!(r.seeds.iter().all(|s| s.rho >= 1));
    }
}
