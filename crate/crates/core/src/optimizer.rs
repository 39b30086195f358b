//! Hinge-loss training with AdamW-style updates.
//!
//! Every constraint is a comparison `dist(a, b) < dist(c, d)` with loss
//! `max(0, |f(a) - f(b)|^2 - |f(c) - f(d)|^2 + gamma)`; a triplet `(i, j, k)`
//! is the comparison `(i, j, i, k)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedding::{sq_dist, Embedding};
use crate::error::{LabError, Result};
use crate::evaluation::evaluate_accuracy;
use crate::instances::{Instance, Triplet};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    #[default]
    AdamW,
    /// Plain full-batch gradient descent; meant for tests of the loss surface.
    FullBatchGd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub d: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// `None` means 20 passes over the constraints: `20 * ceil(m / batch_size)`.
    pub steps: Option<usize>,
    pub batch_size: usize,
    pub spherical: bool,
    /// `None` means `1 / sqrt(d)`.
    pub init_scale: Option<f64>,
    pub seed: u64,
    /// Evaluate full accuracy every this many steps; 0 turns it off.
    pub eval_every: usize,
    /// Stop after this many evaluations without improvement; 0 turns it off.
    pub patience: usize,
    pub update: UpdateRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d: 2,
            gamma: 1.0,
            learning_rate: 1e-2,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            steps: None,
            batch_size: 1024,
            spherical: false,
            init_scale: None,
            seed: 0,
            eval_every: 0,
            patience: 0,
            update: UpdateRule::AdamW,
        }
    }
}

impl TrainConfig {
    pub fn with_dimension(d: usize) -> Self {
        TrainConfig {
            d,
            ..TrainConfig::default()
        }
    }

    pub fn resolved_steps(&self, m: usize) -> usize {
        self.steps
            .unwrap_or_else(|| 20 * m.div_ceil(self.batch_size.max(1)).max(1))
    }

    pub fn resolved_init_scale(&self) -> f64 {
        self.init_scale
            .unwrap_or_else(|| 1.0 / (self.d.max(1) as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LabError::InvalidParameter(msg));
        if self.d < 1 {
            return bad("dimension d must be at least 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("margin gamma must be positive, got {}", self.gamma));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay must be non-negative, got {}", self.weight_decay));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive".into());
        }
        if self.steps == Some(0) {
            return bad("steps must be at least 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1".into());
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("init_scale must be positive, got {s}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogEntry {
    pub step: usize,
    pub loss: f64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub embedding: Embedding,
    pub log: Vec<LogEntry>,
    pub steps_run: usize,
}

/// Hinge argument `|f(a)-f(b)|^2 - |f(c)-f(d)|^2 + gamma`.
fn hinge_argument(emb: &Embedding, [a, b, c, d]: [usize; 4], gamma: f64) -> f64 {
    sq_dist(emb.row(a), emb.row(b)) - sq_dist(emb.row(c), emb.row(d)) + gamma
}

pub fn hinge_loss(emb: &Embedding, t: &Triplet, gamma: f64) -> f64 {
    let (i, j, k) = (t.anchor.index(), t.positive.index(), t.negative.index());
    hinge_argument(emb, [i, j, i, k], gamma).max(0.0)
}

/// Gradient rows of [`hinge_loss`] with respect to the anchor, positive and
/// negative points. All zero unless the hinge is strictly active.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGradient {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

pub fn hinge_gradient(emb: &Embedding, t: &Triplet, gamma: f64) -> TripletGradient {
    let (i, j, k) = (t.anchor.index(), t.positive.index(), t.negative.index());
    let dim = emb.dim();
    let mut g = TripletGradient {
        anchor: vec![0.0; dim],
        positive: vec![0.0; dim],
        negative: vec![0.0; dim],
    };
    if hinge_argument(emb, [i, j, i, k], gamma) <= 0.0 {
        return g;
    }
    let (fi, fj, fk) = (emb.row(i), emb.row(j), emb.row(k));
    for x in 0..dim {
        g.anchor[x] = 2.0 * (fk[x] - fj[x]);
        g.positive[x] = -2.0 * (fi[x] - fj[x]);
        g.negative[x] = 2.0 * (fi[x] - fk[x]);
    }
    g
}

/// Adds `weight` times the gradient of one comparison loss into `grad` and
/// returns the loss.
fn accumulate(emb: &Embedding, cmp: [usize; 4], gamma: f64, weight: f64, grad: &mut [f64]) -> f64 {
    let arg = hinge_argument(emb, cmp, gamma);
    if arg <= 0.0 {
        return 0.0;
    }
    let dim = emb.dim();
    let [a, b, c, d] = cmp;
    for x in 0..dim {
        let ab = 2.0 * weight * (emb.row(a)[x] - emb.row(b)[x]);
        let cd = 2.0 * weight * (emb.row(c)[x] - emb.row(d)[x]);
        grad[a * dim + x] += ab;
        grad[b * dim + x] -= ab;
        grad[c * dim + x] -= cd;
        grad[d * dim + x] += cd;
    }
    arg
}

/// Mean hinge loss over all constraints.
pub fn full_loss(emb: &Embedding, instance: &Instance, gamma: f64) -> f64 {
    let m = instance.m();
    if m == 0 {
        return 0.0;
    }
    let total: f64 = instance
        .constraints()
        .comparisons()
        .map(|c| hinge_argument(emb, c, gamma).max(0.0))
        .sum();
    total / m as f64
}

pub fn initial_embedding(n: usize, config: &TrainConfig, rng: &mut impl Rng) -> Embedding {
    let scale = config.resolved_init_scale();
    let coords: Vec<f64> = (0..n * config.d)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    let mut emb = Embedding::from_flat(n, config.d, coords).expect("n x d coordinates");
    if config.spherical {
        emb.normalize_rows();
    }
    emb
}

pub fn train(instance: &Instance, config: &TrainConfig) -> Result<TrainResult> {
    train_with_callback(instance, config, |_, _| {})
}

/// Trains from a Gaussian start. `callback` sees the step number (from 1)
/// and the coordinates after every step.
pub fn train_with_callback(
    instance: &Instance,
    config: &TrainConfig,
    mut callback: impl FnMut(usize, &Embedding),
) -> Result<TrainResult> {
    config.validate()?;
    let n = instance.n();
    let m = instance.m();
    if m == 0 {
        return Err(LabError::InvalidInstance("cannot train on an empty instance".into()));
    }
    let steps = config.resolved_steps(m);
    let mut rng = seeded(config.seed);
    let mut emb = initial_embedding(n, config, &mut rng);
    let len = n * config.d;
    let mut grad = vec![0.0; len];
    let mut first = vec![0.0; len];
    let mut second = vec![0.0; len];
    let mut log = Vec::with_capacity(steps);
    let mut best_acc = f64::NEG_INFINITY;
    let mut stale = 0;
    let constraints = instance.constraints();
    let mut steps_run = 0;

    for step in 1..=steps {
        grad.fill(0.0);
        let loss = match config.update {
            UpdateRule::AdamW => {
                let w = 1.0 / config.batch_size as f64;
                let mut total = 0.0;
                for _ in 0..config.batch_size {
                    let idx = rng.random_range(0..m);
                    total += accumulate(&emb, constraints.comparison(idx), config.gamma, w, &mut grad);
                }
                total * w
            }
            UpdateRule::FullBatchGd => {
                let w = 1.0 / m as f64;
                let total: f64 = constraints
                    .comparisons()
                    .map(|c| accumulate(&emb, c, config.gamma, w, &mut grad))
                    .sum();
                total * w
            }
        };
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(LabError::Divergence { step });
        }

        let lr = config.learning_rate;
        let coords = emb.as_mut_slice();
        match config.update {
            UpdateRule::AdamW => {
                let bc1 = 1.0 - config.beta1.powi(step as i32);
                let bc2 = 1.0 - config.beta2.powi(step as i32);
                let decay = 1.0 - lr * config.weight_decay;
                for x in 0..len {
                    let g = grad[x];
                    first[x] = config.beta1 * first[x] + (1.0 - config.beta1) * g;
                    second[x] = config.beta2 * second[x] + (1.0 - config.beta2) * g * g;
                    let m_hat = first[x] / bc1;
                    let v_hat = second[x] / bc2;
                    coords[x] = coords[x] * decay - lr * m_hat / (v_hat.sqrt() + config.adam_epsilon);
                }
            }
            UpdateRule::FullBatchGd => {
                for x in 0..len {
                    coords[x] -= lr * grad[x];
                }
            }
        }
        if config.spherical {
            emb.normalize_rows();
        }
        if !emb.is_finite() {
            return Err(LabError::Divergence { step });
        }
        steps_run = step;

        let accuracy = (config.eval_every > 0 && step % config.eval_every == 0)
            .then(|| evaluate_accuracy(&emb, instance))
            .transpose()?;
        log.push(LogEntry { step, loss, accuracy });
        callback(step, &emb);

        if let (Some(acc), true) = (accuracy, config.patience > 0) {
            if acc > best_acc {
                best_acc = acc;
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
        }
    }
    Ok(TrainResult {
        embedding: emb,
        log,
        steps_run,
    })
}
