//! Command-line front end for the `lab` binary.

use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::constraint_graph::{arboricity, build_constraint_graph};
use crate::embedding::Embedding;
use crate::error::{LabError, Result};
use crate::evaluation::{evaluate, trivial_baseline};
use crate::experiments::{
    preset, run_sweep, verify_lemmas, verify_theorem3, LemmaParams, RunOptions, SweepConfig,
    Theorem3Config,
};
use crate::instances::{
    generate_ground_truth_sphere, generate_poisson_quadruplets, generate_poisson_triplets,
    generate_uniform_quadruplets, generate_uniform_triplets, read_instance, write_instance,
    Instance,
};
use crate::mas::{
    brute_force_mas, extract_permutation, random_permutation_baseline, reduce_mas_to_triplets,
    MasGraph, MasSolution,
};
use crate::optimizer::{train, LogEntry, TrainConfig};
use crate::realizability::{certify, complete_ordering, embed_from_ordering, RealizabilityCertificate};

#[derive(Debug, Parser)]
#[command(name = "lab", version, about = "Ordinal embedding laboratory")]
pub struct Cli {
    /// Print one JSON object instead of human-readable text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Decide realizability through the pair digraph.
    Check {
        file: PathBuf,
    },
    /// Build an exact embedding of a realizable instance.
    Embed {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact arboricity of the constraint multigraph.
    Arboricity {
        file: PathBuf,
    },
    /// Train an embedding with the hinge loss.
    Train(TrainArgs),
    /// Accuracy of coordinates on an instance.
    Eval {
        file: PathBuf,
        #[arg(long)]
        coords: PathBuf,
    },
    /// Accuracy of random one-dimensional embeddings.
    Baseline {
        file: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Maximum acyclic subgraph reduction.
    #[command(subcommand)]
    Mas(MasCommand),
    /// Run a dimension sweep from a config file or a named preset.
    Sweep(SweepArgs),
    /// Monte Carlo verification runs.
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Model {
    Uniform,
    Poisson,
    Sphere,
    QuadUniform,
    QuadPoisson,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    n: usize,
    /// Number of constraints (uniform and sphere models).
    #[arg(long)]
    m: Option<usize>,
    /// Per-tuple rate (Poisson models).
    #[arg(long)]
    lambda: Option<f64>,
    /// Ground-truth dimension (sphere model).
    #[arg(long = "dim", visible_alias = "D")]
    dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    file: PathBuf,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    spherical: bool,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    weight_decay: f64,
    /// Defaults to 20 passes over the constraints.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 1024)]
    batch: usize,
    /// Defaults to 1/sqrt(d).
    #[arg(long)]
    init_scale: Option<f64>,
    /// Evaluate full accuracy every this many steps (0 = never).
    #[arg(long, default_value_t = 0)]
    eval_every: usize,
    /// Early stop after this many evaluations without improvement (0 = off).
    #[arg(long, default_value_t = 0)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// CSV log with columns step,loss,accuracy.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum MasCommand {
    /// Write the anchored triplet instance of a digraph.
    Reduce {
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random-permutation baseline, or the exact optimum with --brute.
    Solve {
        graph: PathBuf,
        #[arg(long)]
        brute: bool,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Read a permutation off coordinates of the reduced instance.
    Extract {
        graph: PathBuf,
        #[arg(long)]
        coords: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// figure1, figure2 or desk.
    #[arg(long, requires = "out")]
    preset: Option<String>,
    /// Output CSV for presets.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stop after this many cells; a later run resumes.
    #[arg(long)]
    cell_limit: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Realizability, dimension-bound and collapse arms on random instances.
    Theorem3 {
        #[arg(long = "dim", visible_alias = "D", default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long, default_value_t = 0.05)]
        c1: f64,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        #[arg(long, default_value_t = 3)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip building coordinates for realizable instances.
        #[arg(long)]
        no_construct: bool,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// One Monte Carlo suite: acyclicity, acyclicity-quad, arboricity-tail,
    /// baseline, subadditivity or coupling.
    Lemma {
        name: String,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        m: Option<usize>,
    },
}

struct Output {
    json: bool,
}

impl Output {
    fn emit(&self, value: Value, text: impl FnOnce() -> String) {
        if self.json {
            println!("{value}");
        } else {
            println!("{}", text());
        }
    }
}

impl GenArgs {
    /// First model-specific flag that is required but absent.
    fn missing_flag(&self) -> Option<&'static str> {
        let needs: &[&'static str] = match self.model {
            Model::Uniform | Model::QuadUniform => &["m"],
            Model::Poisson | Model::QuadPoisson => &["lambda"],
            Model::Sphere => &["dim", "m"],
        };
        needs.iter().copied().find(|&f| match f {
            "m" => self.m.is_none(),
            "lambda" => self.lambda.is_none(),
            _ => self.dim.is_none(),
        })
    }
}

fn missing(what: &str, model: Model) -> LabError {
    LabError::InvalidParameter(format!("model {model:?} needs --{what}"))
}

fn generate(args: &GenArgs) -> Result<Instance> {
    match args.model {
        Model::Uniform => generate_uniform_triplets(args.n, args.m.ok_or_else(|| missing("m", args.model))?, args.seed),
        Model::QuadUniform => {
            generate_uniform_quadruplets(args.n, args.m.ok_or_else(|| missing("m", args.model))?, args.seed)
        }
        Model::Poisson => generate_poisson_triplets(
            args.n,
            args.lambda.ok_or_else(|| missing("lambda", args.model))?,
            args.seed,
        ),
        Model::QuadPoisson => generate_poisson_quadruplets(
            args.n,
            args.lambda.ok_or_else(|| missing("lambda", args.model))?,
            args.seed,
        ),
        Model::Sphere => generate_ground_truth_sphere(
            args.n,
            args.dim.ok_or_else(|| missing("dim", args.model))?,
            args.m.ok_or_else(|| missing("m", args.model))?,
            args.seed,
        ),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> LabError {
    LabError::parse(path, 0, e.to_string())
}

fn write_log(path: &Path, log: &[LogEntry]) -> Result<()> {
    let file = File::create(path).map_err(|e| LabError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["step", "loss", "accuracy"]).map_err(|e| csv_error(path, e))?;
    for e in log {
        let acc = e.accuracy.map(|a| a.to_string()).unwrap_or_default();
        w.write_record([e.step.to_string(), e.loss.to_string(), acc])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

fn solution_json(s: &MasSolution) -> Value {
    json!({
        "ranks": s.ranks,
        "order": s.order(),
        "forward_arcs": s.forward_arcs,
        "total_arcs": s.total_arcs,
        "value": s.value,
    })
}

fn run_command(cli: Cli) -> Result<()> {
    let out = Output { json: cli.json };
    match cli.command {
        Command::Gen(args) => {
            let inst = generate(&args)?;
            write_instance(&inst, &args.out)?;
            out.emit(
                json!({"path": args.out, "n": inst.n(), "m": inst.m(), "kind": inst.meta().kind.token()}),
                || format!("wrote {} {} on {} items to {}", inst.m(), inst.constraints().word(), inst.n(), args.out.display()),
            );
        }
        Command::Check { file } => {
            let inst = read_instance(&file)?;
            match certify(&inst) {
                RealizabilityCertificate::Realizable { ordering } => out.emit(
                    json!({"status": "realizable", "ordered_pairs": ordering.len()}),
                    || format!("realizable: {} pairs ordered consistently", ordering.len()),
                ),
                RealizabilityCertificate::Unrealizable { witness_cycle } => out.emit(
                    json!({"status": "unrealizable", "witness_cycle": witness_cycle}),
                    || {
                        let list: Vec<String> = witness_cycle.iter().map(|c| c.to_string()).collect();
                        format!("unrealizable: constraints {} form a cycle", list.join(" -> "))
                    },
                ),
            }
        }
        Command::Embed { file, out: path } => {
            let inst = read_instance(&file)?;
            let RealizabilityCertificate::Realizable { ordering } = certify(&inst) else {
                return Err(LabError::InvalidInstance(
                    "instance is unrealizable; run `lab check` for a witness cycle".into(),
                ));
            };
            let emb = embed_from_ordering(inst.n(), &complete_ordering(inst.n(), &ordering))?;
            emb.write(&path)?;
            let report = evaluate(&emb, &inst)?;
            out.emit(
                json!({"path": path, "dimension": emb.dim(), "accuracy": report.accuracy}),
                || format!("wrote {} points in {} dimensions to {} (accuracy {:.6})", emb.n(), emb.dim(), path.display(), report.accuracy),
            );
        }
        Command::Arboricity { file } => {
            let inst = read_instance(&file)?;
            let r = arboricity(&build_constraint_graph(&inst))?;
            let density = format!("{}/{}", r.density_star.numer(), r.density_star.denom());
            out.emit(
                json!({
                    "density_star": density,
                    "rho": r.rho,
                    "forest_count_upper": r.forest_count_upper,
                    "implied_dim_bound": r.implied_dim_bound,
                    "witness_subgraph": r.witness_subgraph,
                }),
                || {
                    let w: Vec<String> = r.witness_subgraph.iter().map(|v| v.to_string()).collect();
                    format!(
                        "density_star {density}\nrho {}\nforest_count_upper {}\nimplied_dim_bound {}\nwitness {}",
                        r.rho, r.forest_count_upper, r.implied_dim_bound, w.join(" ")
                    )
                },
            );
        }
        Command::Train(a) => {
            let inst = read_instance(&a.file)?;
            let config = TrainConfig {
                d: a.d,
                gamma: a.gamma,
                learning_rate: a.lr,
                weight_decay: a.weight_decay,
                steps: a.steps,
                batch_size: a.batch,
                spherical: a.spherical,
                init_scale: a.init_scale,
                seed: a.seed,
                eval_every: a.eval_every,
                patience: a.patience,
                ..TrainConfig::default()
            };
            let result = train(&inst, &config)?;
            result.embedding.write(&a.out)?;
            if let Some(log) = &a.log {
                write_log(log, &result.log)?;
            }
            let report = evaluate(&result.embedding, &inst)?;
            out.emit(
                json!({"path": a.out, "steps_run": result.steps_run, "accuracy": report.accuracy,
                       "satisfied": report.satisfied, "total": report.total}),
                || format!("trained {} steps, accuracy {:.6} ({}/{})", result.steps_run, report.accuracy, report.satisfied, report.total),
            );
        }
        Command::Eval { file, coords } => {
            let inst = read_instance(&file)?;
            let emb = Embedding::read(&coords)?;
            let r = evaluate(&emb, &inst)?;
            out.emit(
                json!({"accuracy": r.accuracy, "satisfied": r.satisfied, "total": r.total}),
                || format!("accuracy {:.6} ({}/{})", r.accuracy, r.satisfied, r.total),
            );
        }
        Command::Baseline { file, trials, seed } => {
            let inst = read_instance(&file)?;
            let est = trivial_baseline(&inst, trials, seed)?;
            out.emit(
                json!({"mean": est.mean, "stderr": est.stderr, "trials": trials}),
                || format!("baseline accuracy {:.6} +- {:.6} over {trials} trials", est.mean, est.stderr),
            );
        }
        Command::Mas(MasCommand::Reduce { graph, out: path }) => {
            let g = MasGraph::read(&graph)?;
            let inst = reduce_mas_to_triplets(&g)?;
            write_instance(&inst, &path)?;
            out.emit(
                json!({"path": path, "n": inst.n(), "m": inst.m(), "anchor": g.anchor()}),
                || format!("wrote {} triplets with anchor {} to {}", inst.m(), g.anchor(), path.display()),
            );
        }
        Command::Mas(MasCommand::Solve { graph, brute, trials, seed }) => {
            let g = MasGraph::read(&graph)?;
            if brute {
                let s = brute_force_mas(&g)?;
                out.emit(solution_json(&s), || {
                    format!("optimum {}/{} = {:.6}, order {:?}", s.forward_arcs, s.total_arcs, s.value, s.order())
                });
            } else {
                let est = random_permutation_baseline(&g, trials, seed)?;
                out.emit(
                    json!({"mean": est.mean, "stderr": est.stderr, "trials": trials}),
                    || format!("random permutations: {:.6} +- {:.6} over {trials} trials", est.mean, est.stderr),
                );
            }
        }
        Command::Mas(MasCommand::Extract { graph, coords }) => {
            let g = MasGraph::read(&graph)?;
            let emb = Embedding::read(&coords)?;
            let s = extract_permutation(&emb, &g)?;
            out.emit(solution_json(&s), || {
                format!("value {}/{} = {:.6}, order {:?}", s.forward_arcs, s.total_arcs, s.value, s.order())
            });
        }
        Command::Sweep(a) => {
            let config = match (&a.config, &a.preset) {
                (Some(path), _) => SweepConfig::read(path)?,
                (None, Some(name)) => preset(name, a.out.clone().expect("clap enforces --out"))?,
                (None, None) => unreachable!("clap enforces one source"),
            };
            let outcome = run_sweep(&config, RunOptions { cell_limit: a.cell_limit })?;
            for f in &outcome.failures {
                eprintln!("lab: {f}");
            }
            out.emit(
                json!({"path": outcome.output, "rows": outcome.records.len(),
                       "complete": outcome.complete, "failures": outcome.failures}),
                || {
                    if outcome.complete {
                        format!("wrote {} rows to {}", outcome.records.len(), outcome.output.display())
                    } else {
                        format!("{} rows so far; rerun to resume", outcome.records.len())
                    }
                },
            );
            if !outcome.failures.is_empty() {
                return Err(LabError::InvalidInput(format!("{} sweep cells failed", outcome.failures.len())));
            }
        }
        Command::Verify(VerifyCommand::Theorem3 { dim, n, epsilon, seeds, c1, c2, restarts, seed, no_construct, steps }) => {
            let config = Theorem3Config {
                ground_truth_dim: dim,
                n,
                epsilon,
                seeds,
                c1,
                c2,
                restarts,
                seed,
                construct_embedding: !no_construct,
                train: TrainConfig { steps, ..TrainConfig::default() },
            };
            let r = verify_theorem3(&config)?;
            let value = serde_json::to_value(&r).expect("report serializes");
            out.emit(value, || {
                format!(
                    "m = {}\nrealizable fraction {:.3} (constructed embeddings exact: {})\n\
                     4 rho <= D in {:.3} of seeds\ncollapse arm d = {}: best accuracy <= {:.3} in {:.3} of seeds \
                     (best of restarts, a lower bound on the optimum)\nd = D mean accuracy {:.4}",
                    r.m,
                    r.realizable_fraction,
                    r.exact_when_realizable,
                    r.bound_within_dimension_fraction,
                    r.collapse_d,
                    r.collapse_target,
                    r.collapse_within_target_fraction,
                    r.mean_full_dimension_accuracy
                )
            });
        }
        Command::Verify(VerifyCommand::Lemma { name, trials, seed, n, lambda, alpha, m }) => {
            let r = verify_lemmas(&name, &LemmaParams { n, lambda, alpha, m }, trials, seed)?;
            let value = serde_json::to_value(&r).expect("report serializes");
            out.emit(value, || {
                format!(
                    "{} {}: statistic {:.6} ({}) over {} trials",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.suite,
                    r.statistic,
                    r.threshold,
                    r.trials
                )
            });
        }
    }
    std::io::stdout().flush().map_err(|e| LabError::io("<stdout>", e))
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| LabError::InvalidParameter(format!("LAB_THREADS must be a positive integer, got `{raw}`")))?;
    if threads == 0 {
        return Err(LabError::InvalidParameter("LAB_THREADS must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| LabError::InvalidParameter(e.to_string()))
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 on success, 1 on domain errors, 2 on usage errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Command::Gen(args) = &cli.command {
        if let Some(flag) = args.missing_flag() {
            let model = args.model.to_possible_value().expect("no skipped variants");
            let msg = format!("--model {} requires --{flag}", model.get_name());
            let _ = Cli::command().error(ErrorKind::MissingRequiredArgument, msg).print();
            return 2;
        }
    }
    match configure_threads().and_then(|()| run_command(cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lab: {e}");
            1
        }
    }
}
