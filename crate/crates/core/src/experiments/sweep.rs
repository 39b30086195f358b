//! Resumable dimension sweeps written to CSV.
//!
//! Config files are flat TOML. Sweep keys are listed on [`SweepConfig`];
//! every other key is a training setting and goes to [`TrainConfig`]:
//!
//! ```toml
//! model = "sphere"
//! n = 200
//! m_per_dn = 50
//! ground_truth_dims = [16, 32]
//! d_grid = [1, 2, 4, 8, 16, 32]
//! variants = ["unconstrained", "spherical"]
//! seeds = [0, 1]
//! output = "sweep.csv"
//! learning_rate = 0.01
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::default_d_grid;
use crate::error::{LabError, Result};
use crate::evaluation::{evaluate_accuracy, trivial_baseline};
use crate::instances::{
    generate_ground_truth_sphere, generate_poisson_triplets, generate_uniform_quadruplets,
    generate_uniform_triplets, read_instance, Instance,
};
use crate::optimizer::{train, TrainConfig};
use crate::rng::derive_seed;

pub const CSV_VERSION_LINE: &str = "# ordinal-lab sweep v1";
pub const CSV_COLUMNS: [&str; 11] = [
    "model",
    "n",
    "m",
    "D",
    "d",
    "variant",
    "seed",
    "final_accuracy",
    "baseline_accuracy",
    "steps_run",
    "wall_seconds",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepModel {
    Sphere,
    Uniform,
    Poisson,
    QuadUniform,
    File,
}

impl SweepModel {
    fn token(self) -> &'static str {
        match self {
            SweepModel::Sphere => "sphere",
            SweepModel::Uniform => "uniform",
            SweepModel::Poisson => "poisson",
            SweepModel::QuadUniform => "quad-uniform",
            SweepModel::File => "file",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Unconstrained,
    Spherical,
}

impl Variant {
    fn token(self) -> &'static str {
        match self {
            Variant::Unconstrained => "unconstrained",
            Variant::Spherical => "spherical",
        }
    }
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Unconstrained]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_baseline_trials() -> usize {
    100
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepKeys {
    model: SweepModel,
    n: Option<usize>,
    m: Option<usize>,
    m_per_dn: Option<f64>,
    lambda: Option<f64>,
    #[serde(default)]
    ground_truth_dims: Vec<usize>,
    instance_file: Option<PathBuf>,
    #[serde(default)]
    instance_seed: u64,
    d_grid: Option<Vec<usize>>,
    d_min: Option<usize>,
    d_max: Option<usize>,
    #[serde(default = "default_variants")]
    variants: Vec<Variant>,
    #[serde(default = "default_seeds")]
    seeds: Vec<u64>,
    #[serde(default = "default_baseline_trials")]
    baseline_trials: usize,
    #[serde(default = "default_true")]
    record_wall_seconds: bool,
    output: PathBuf,
}

const SWEEP_KEYS: [&str; 16] = [
    "model",
    "n",
    "m",
    "m_per_dn",
    "lambda",
    "ground_truth_dims",
    "instance_file",
    "instance_seed",
    "d_grid",
    "d_min",
    "d_max",
    "variants",
    "seeds",
    "baseline_trials",
    "record_wall_seconds",
    "output",
];

/// Cell-set keys that belong to the sweep, not to the training template.
const RESERVED_TRAIN_KEYS: [&str; 3] = ["d", "seed", "spherical"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub model: SweepModel,
    pub n: Option<usize>,
    pub m: Option<usize>,
    /// `m = m_per_dn * D * n` for sphere instances.
    pub m_per_dn: Option<f64>,
    pub lambda: Option<f64>,
    pub ground_truth_dims: Vec<usize>,
    pub instance_file: Option<PathBuf>,
    pub instance_seed: u64,
    pub d_grid: Vec<usize>,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub baseline_trials: usize,
    /// Write 0 instead of elapsed time, making the CSV byte-reproducible.
    pub record_wall_seconds: bool,
    pub train: TrainConfig,
    pub output: PathBuf,
}

impl SweepConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| LabError::parse(path, 0, e.to_string()))?;
        let (sweep, rest): (toml::Table, toml::Table) = table
            .into_iter()
            .partition(|(k, _)| SWEEP_KEYS.contains(&k.as_str()));
        if let Some(k) = rest.keys().find(|k| RESERVED_TRAIN_KEYS.contains(&k.as_str())) {
            return Err(LabError::parse(
                path,
                0,
                format!("`{k}` is set per cell by the sweep and cannot appear in the config"),
            ));
        }
        let keys: SweepKeys = sweep
            .try_into()
            .map_err(|e: toml::de::Error| LabError::parse(path, 0, e.to_string()))?;
        let train: TrainConfig = rest
            .try_into()
            .map_err(|e: toml::de::Error| LabError::parse(path, 0, e.to_string()))?;
        let d_grid = match (keys.d_grid, keys.d_min, keys.d_max) {
            (Some(g), None, None) => g,
            (None, lo, hi) => default_d_grid(lo.unwrap_or(2), hi.unwrap_or(512))?,
            _ => {
                return Err(LabError::parse(
                    path,
                    0,
                    "give either d_grid or d_min/d_max, not both",
                ))
            }
        };
        let mut output = keys.output;
        if output.is_relative() {
            if let Some(dir) = path.parent() {
                output = dir.join(output);
            }
        }
        let config = SweepConfig {
            model: keys.model,
            n: keys.n,
            m: keys.m,
            m_per_dn: keys.m_per_dn,
            lambda: keys.lambda,
            ground_truth_dims: keys.ground_truth_dims,
            instance_file: keys.instance_file.map(|p| match path.parent() {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            }),
            instance_seed: keys.instance_seed,
            d_grid,
            variants: keys.variants,
            seeds: keys.seeds,
            baseline_trials: keys.baseline_trials,
            record_wall_seconds: keys.record_wall_seconds,
            train,
            output,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        SweepConfig::from_toml_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(LabError::InvalidParameter(msg.to_string()));
        if self.d_grid.is_empty() {
            return bad("d_grid must not be empty");
        }
        if self.d_grid.windows(2).any(|w| w[0] >= w[1]) || self.d_grid[0] == 0 {
            return bad("d_grid must be positive and strictly ascending");
        }
        if self.variants.is_empty() || self.seeds.is_empty() {
            return bad("variants and seeds must not be empty");
        }
        if self.baseline_trials == 0 {
            return bad("baseline_trials must be at least 1");
        }
        match self.model {
            SweepModel::Sphere => {
                if self.ground_truth_dims.is_empty() {
                    return bad("sphere sweeps need ground_truth_dims");
                }
                if self.m.is_some() == self.m_per_dn.is_some() {
                    return bad("sphere sweeps need exactly one of m and m_per_dn");
                }
            }
            SweepModel::Uniform | SweepModel::QuadUniform => {
                if self.m.is_none() || self.m_per_dn.is_some() {
                    return bad("uniform sweeps need m (and no m_per_dn)");
                }
            }
            SweepModel::Poisson => {
                if self.lambda.is_none() {
                    return bad("poisson sweeps need lambda");
                }
            }
            SweepModel::File => {
                if self.instance_file.is_none() {
                    return bad("file sweeps need instance_file");
                }
            }
        }
        if self.model != SweepModel::File && self.n.is_none() {
            return bad("n is required");
        }
        if self.model != SweepModel::Sphere && !self.ground_truth_dims.is_empty() {
            return bad("ground_truth_dims only applies to sphere sweeps");
        }
        let mut probe = self.train.clone();
        probe.d = 1;
        probe.validate()
    }

    /// Ground-truth dimensions, or a single `None` for models without one.
    fn dims(&self) -> Vec<Option<usize>> {
        if self.model == SweepModel::Sphere {
            self.ground_truth_dims.iter().copied().map(Some).collect()
        } else {
            vec![None]
        }
    }

    fn build_instance(&self, dim: Option<usize>, seed: u64) -> Result<Instance> {
        let s = derive_seed(self.instance_seed, &[dim.unwrap_or(0) as u64, seed]);
        let n = self.n.unwrap_or(0);
        match self.model {
            SweepModel::Sphere => {
                let big_d = dim.expect("sphere cells carry D");
                let m = match (self.m, self.m_per_dn) {
                    (Some(m), _) => m,
                    (None, Some(c)) => (c * (big_d * n) as f64).round() as usize,
                    (None, None) => unreachable!("validated"),
                };
                generate_ground_truth_sphere(n, big_d, m, s)
            }
            SweepModel::Uniform => generate_uniform_triplets(n, self.m.unwrap(), s),
            SweepModel::QuadUniform => generate_uniform_quadruplets(n, self.m.unwrap(), s),
            SweepModel::Poisson => generate_poisson_triplets(n, self.lambda.unwrap(), s),
            SweepModel::File => read_instance(self.instance_file.as_ref().unwrap()),
        }
    }
}

pub const PRESETS: [&str; 3] = ["figure1", "figure2", "desk"];

/// Named configurations: the full-scale figure setups and a desk-scale
/// analogue of the ground-truth sweep.
pub fn preset(name: &str, output: PathBuf) -> Result<SweepConfig> {
    let base = SweepConfig {
        model: SweepModel::Sphere,
        n: Some(1000),
        m: Some(1_000_000),
        m_per_dn: None,
        lambda: None,
        ground_truth_dims: vec![128, 256, 512, 1024],
        instance_file: None,
        instance_seed: 0,
        d_grid: default_d_grid(2, 512)?,
        variants: vec![Variant::Unconstrained, Variant::Spherical],
        seeds: vec![0],
        baseline_trials: 100,
        record_wall_seconds: true,
        train: TrainConfig::default(),
        output,
    };
    let config = match name {
        "figure1" => base,
        "figure2" => SweepConfig {
            model: SweepModel::Uniform,
            n: Some(4000),
            ground_truth_dims: Vec::new(),
            ..base
        },
        "desk" => SweepConfig {
            n: Some(200),
            m: None,
            m_per_dn: Some(50.0),
            ground_truth_dims: vec![16, 32, 64],
            d_grid: vec![1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64],
            variants: vec![Variant::Unconstrained],
            ..base
        },
        other => {
            return Err(LabError::InvalidParameter(format!(
                "unknown preset `{other}`, expected one of {}",
                PRESETS.join(", ")
            )))
        }
    };
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub model: String,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "D")]
    pub ground_truth_dim: Option<usize>,
    pub d: usize,
    pub variant: String,
    pub seed: u64,
    pub final_accuracy: f64,
    pub baseline_accuracy: f64,
    pub steps_run: usize,
    pub wall_seconds: f64,
}

type CellKey = (Option<usize>, usize, String, u64);

impl SweepRecord {
    fn key(&self) -> CellKey {
        (self.ground_truth_dim, self.d, self.variant.clone(), self.seed)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Run at most this many pending cells, then stop as if interrupted.
    pub cell_limit: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Finished rows in canonical order.
    pub records: Vec<SweepRecord>,
    pub failures: Vec<String>,
    /// Whether every cell has a row and the final CSV was written.
    pub complete: bool,
    pub output: PathBuf,
}

fn partial_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Reads a sweep CSV (final or partial); missing files read as empty.
pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| LabError::parse(path, 0, e.to_string()))?;
    let mut out = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        // A torn last line from an interrupted write is dropped.
        match row {
            Ok(r) => out.push(r),
            Err(e) if matches!(e.kind(), csv::ErrorKind::UnequalLengths { .. }) => {}
            Err(e) => return Err(LabError::parse(path, i + 2, e.to_string())),
        }
    }
    Ok(out)
}

struct Cell {
    dim: Option<usize>,
    d: usize,
    variant: Variant,
    seed: u64,
}

impl Cell {
    fn key(&self) -> CellKey {
        (self.dim, self.d, self.variant.token().to_string(), self.seed)
    }
}

fn run_cell(
    config: &SweepConfig,
    cell: &Cell,
    instance: &Instance,
    baseline: f64,
) -> Result<SweepRecord> {
    let started = Instant::now();
    let train_config = TrainConfig {
        d: cell.d,
        spherical: cell.variant == Variant::Spherical,
        seed: derive_seed(
            cell.seed,
            &[cell.dim.unwrap_or(0) as u64, cell.d as u64, cell.variant as u64],
        ),
        ..config.train.clone()
    };
    let result = train(instance, &train_config)?;
    let final_accuracy = evaluate_accuracy(&result.embedding, instance)?;
    Ok(SweepRecord {
        model: config.model.token().to_string(),
        n: instance.n(),
        m: instance.m(),
        ground_truth_dim: cell.dim,
        d: cell.d,
        variant: cell.variant.token().to_string(),
        seed: cell.seed,
        final_accuracy,
        baseline_accuracy: baseline,
        steps_run: result.steps_run,
        wall_seconds: if config.record_wall_seconds {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        },
    })
}

fn write_final(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let io = |e: std::io::Error| LabError::io(&tmp, e);
    let mut file = File::create(&tmp).map_err(io)?;
    writeln!(file, "{CSV_VERSION_LINE}").map_err(io)?;
    let mut writer = csv::Writer::from_writer(file);
    for r in records {
        writer
            .serialize(r)
            .map_err(|e| LabError::parse(&tmp, 0, e.to_string()))?;
    }
    writer.flush().map_err(io)?;
    drop(writer);
    fs::rename(&tmp, path).map_err(|e| LabError::io(path, e))
}

/// Runs every pending `(D, d, variant, seed)` cell and writes the CSV.
///
/// Finished rows are appended to `<output>.partial` as cells complete, and
/// rows already present there or in `<output>` are skipped, so an
/// interrupted sweep picks up where it stopped. The final CSV lists rows in
/// the order of the config (D, then d, then variant, then seed) and is
/// moved into place atomically.
pub fn run_sweep(config: &SweepConfig, options: RunOptions) -> Result<SweepOutcome> {
    config.validate()?;
    let output = config.output.clone();
    let partial = partial_path(&output);

    let mut done: BTreeMap<CellKey, SweepRecord> = BTreeMap::new();
    for r in read_records(&output)?.into_iter().chain(read_records(&partial)?) {
        done.insert(r.key(), r);
    }

    let mut cells = Vec::new();
    for dim in config.dims() {
        for &d in &config.d_grid {
            for &variant in &config.variants {
                for &seed in &config.seeds {
                    cells.push(Cell { dim, d, variant, seed });
                }
            }
        }
    }
    let mut pending: Vec<&Cell> = cells.iter().filter(|c| !done.contains_key(&c.key())).collect();
    if let Some(limit) = options.cell_limit {
        pending.truncate(limit);
    }

    // Instances and their baselines, shared by all cells with the same (D, seed).
    let needed: Vec<(Option<usize>, u64)> = {
        let mut seen = HashSet::new();
        pending
            .iter()
            .map(|c| (c.dim, c.seed))
            .filter(|k| seen.insert(*k))
            .collect()
    };
    let prepared: Vec<Result<(Instance, f64)>> = needed
        .par_iter()
        .map(|&(dim, seed)| {
            let inst = config.build_instance(dim, seed)?;
            let base = trivial_baseline(&inst, config.baseline_trials, derive_seed(seed, &[u64::MAX]))?;
            Ok((inst, base.mean))
        })
        .collect();
    let prepared: BTreeMap<(Option<usize>, u64), Result<(Instance, f64)>> =
        needed.into_iter().zip(prepared).collect();

    let new_file = !partial.exists() || fs::metadata(&partial).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&partial)
        .map_err(|e| LabError::io(&partial, e))?;
    let writer = Mutex::new(
        csv::WriterBuilder::new()
            .has_headers(new_file)
            .from_writer(file),
    );

    let results: Vec<std::result::Result<SweepRecord, String>> = pending
        .par_iter()
        .map(|cell| {
            let describe = |e: &dyn std::fmt::Display| {
                format!(
                    "cell D={:?} d={} variant={} seed={}: {e}",
                    cell.dim,
                    cell.d,
                    cell.variant.token(),
                    cell.seed
                )
            };
            let (inst, base) = match &prepared[&(cell.dim, cell.seed)] {
                Ok(p) => p,
                Err(e) => return Err(describe(e)),
            };
            let record = run_cell(config, cell, inst, *base).map_err(|e| describe(&e))?;
            let mut w = writer.lock().expect("writer lock");
            w.serialize(&record).map_err(|e| describe(&e))?;
            w.flush().map_err(|e| describe(&e))?;
            Ok(record)
        })
        .collect();
    drop(writer);

    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => {
                done.insert(rec.key(), rec);
            }
            Err(e) => failures.push(e),
        }
    }
    let records: Vec<SweepRecord> = cells
        .iter()
        .filter_map(|c| done.get(&c.key()).cloned())
        .collect();
    let complete = records.len() == cells.len();
    if complete {
        write_final(&output, &records)?;
        fs::remove_file(&partial).map_err(|e| LabError::io(&partial, e))?;
    }
    Ok(SweepOutcome {
        records,
        failures,
        complete,
        output,
    })
}
