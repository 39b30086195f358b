//! Line-oriented instance files.
//!
//! ```text
//! triplets <n> <m> <seed> <kind>
//! # rng=chacha8 lambda=0.0001
//! 0 1 2
//! ...
//! ```
//!
//! Quadruplet files use the word `quadruplets` and four indices per line.
//! Ground-truth points, when present, live next to the instance in
//! `<file>.points` using the points format of [`Embedding`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Constraints, GeneratorKind, GeneratorMeta, Instance, Quadruplet, Triplet};
use crate::embedding::Embedding;
use crate::error::{LabError, Result};

pub fn points_path_for(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".points");
    PathBuf::from(s)
}

pub fn instance_to_text(instance: &Instance) -> String {
    let meta = instance.meta();
    let mut out = String::new();
    writeln!(
        out,
        "{} {} {} {} {}",
        instance.constraints().word(),
        instance.n(),
        instance.m(),
        meta.seed,
        meta.kind.token()
    )
    .unwrap();
    let mut extras = vec![format!("rng={}", meta.rng)];
    if let Some(l) = meta.lambda {
        extras.push(format!("lambda={l:?}"));
    }
    if let Some(m) = meta.m_requested {
        extras.push(format!("m_requested={m}"));
    }
    if let Some(d) = meta.ground_truth_dimension {
        extras.push(format!("D={d}"));
    }
    writeln!(out, "# {}", extras.join(" ")).unwrap();
    match instance.constraints() {
        Constraints::Triplets(ts) => {
            for t in ts {
                writeln!(out, "{} {} {}", t.anchor, t.positive, t.negative).unwrap();
            }
        }
        Constraints::Quadruplets(qs) => {
            for q in qs {
                writeln!(out, "{} {} {} {}", q.a, q.b, q.c, q.d).unwrap();
            }
        }
    }
    out
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, instance_to_text(instance)).map_err(|e| LabError::io(path, e))?;
    if let Some(points) = &instance.meta().ground_truth_points {
        points.write(points_path_for(path))?;
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(tok: &str, path: &Path, line: usize, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    tok.parse::<T>()
        .map_err(|e| LabError::parse(path, line, format!("bad {what} `{tok}`: {e}")))
}

pub fn parse_instance(text: &str, path: &Path, points: Option<Embedding>) -> Result<Instance> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| LabError::parse(path, 1, "empty instance file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(LabError::parse(
            path,
            1,
            "header must be `triplets|quadruplets n m seed kind`",
        ));
    }
    let arity = match fields[0] {
        "triplets" => 3,
        "quadruplets" => 4,
        other => {
            return Err(LabError::parse(
                path,
                1,
                format!("unknown constraint word `{other}`"),
            ))
        }
    };
    let n: usize = parse_num(fields[1], path, 1, "n")?;
    let m: usize = parse_num(fields[2], path, 1, "m")?;
    let seed: u64 = parse_num(fields[3], path, 1, "seed")?;
    let kind = GeneratorKind::from_token(fields[4])
        .ok_or_else(|| LabError::parse(path, 1, format!("unknown kind `{}`", fields[4])))?;

    let mut meta = GeneratorMeta::new(kind, seed);
    let mut rows: Vec<[usize; 4]> = Vec::with_capacity(m);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            for kv in comment.split_whitespace() {
                let Some((k, v)) = kv.split_once('=') else {
                    continue;
                };
                match k {
                    "rng" => meta.rng = v.to_string(),
                    "lambda" => meta.lambda = Some(parse_num(v, path, lineno, "lambda")?),
                    "m_requested" => {
                        meta.m_requested = Some(parse_num(v, path, lineno, "m_requested")?)
                    }
                    "D" => {
                        meta.ground_truth_dimension = Some(parse_num(v, path, lineno, "D")?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != arity {
            return Err(LabError::parse(
                path,
                lineno,
                format!("expected {arity} item indices, found {}", toks.len()),
            ));
        }
        let mut row = [0usize; 4];
        for (slot, tok) in row.iter_mut().zip(&toks) {
            *slot = parse_num(tok, path, lineno, "item index")?;
        }
        rows.push(row);
    }
    if rows.len() != m {
        return Err(LabError::parse(
            path,
            1,
            format!("header declares {m} constraints, file has {}", rows.len()),
        ));
    }
    let constraints = if arity == 3 {
        Constraints::Triplets(rows.iter().map(|r| Triplet::new(r[0], r[1], r[2])).collect())
    } else {
        Constraints::Quadruplets(
            rows.iter()
                .map(|r| Quadruplet::new(r[0], r[1], r[2], r[3]))
                .collect(),
        )
    };
    if let Some(points) = points {
        meta.ground_truth_dimension = Some(points.dim());
        meta.ground_truth_points = Some(points);
    } else if kind == GeneratorKind::GroundTruthSphere {
        // Points file missing: keep the constraints, drop the ground-truth claim.
        meta.kind = GeneratorKind::External;
    }
    Instance::new(n, constraints, meta).map_err(|e| LabError::parse(path, 0, e.to_string()))
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let points_path = points_path_for(path);
    let points = if points_path.exists() {
        Some(Embedding::read(&points_path)?)
    } else {
        None
    };
    parse_instance(&text, path, points)
}
