use std::fmt::Write as _;

use eoattn_core::activation::{NoiseSpec, Nonlinearity};
use eoattn_core::Scalar;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::{Ctx, ModelConfig, ModelKind, Transformer};
use crate::optim::{AdamW, AdamWConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: AdamWConfig,
    /// Draw fresh activation noise in every training forward pass.
    pub noise_in_training: bool,
    /// Validation metrics every this many steps; 0 disables them.
    pub eval_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            steps: 500,
            batch_size: 32,
            seed: 0,
            optimizer: AdamWConfig::default(),
            noise_in_training: false,
            eval_interval: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be >= 0",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        let o = &self.optimizer;
        if !(0.0..1.0).contains(&o.beta1)
            || !(0.0..1.0).contains(&o.beta2)
            || !(o.eps > 0.0)
            || o.weight_decay < 0.0
        {
            return Err(Error::InvalidConfig(format!(
                "invalid optimizer settings {o:?}"
            )));
        }
        Ok(())
    }
}

// Independent random streams derived from the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_BATCH: u64 = 1;
const STREAM_TRAIN_NOISE: u64 = 2;
const STREAM_EVAL: u64 = 3;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub step: usize,
    pub split: &'static str,
    pub metric: &'static str,
    pub value: f64,
    pub seed: u64,
}

pub const METRIC_CSV_HEADER: &str = "step,split,metric,value,seed";

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from(METRIC_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:e},{}",
            r.step, r.split, r.metric, r.value, r.seed
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: Transformer<T>,
    pub history: Vec<MetricRow>,
}

pub fn build_model<T: Scalar>(
    cfg: &ModelConfig,
    data: &Dataset,
    seq_len: usize,
    seed: u64,
) -> Result<Transformer<T>> {
    let mut rng = stream(seed, STREAM_INIT);
    if data.vocab.is_empty() {
        Transformer::vit(
            ModelConfig {
                classes: data.classes,
                ..*cfg
            },
            &mut rng,
        )
    } else {
        Transformer::char_lm(
            ModelConfig {
                classes: data.classes,
                ..*cfg
            },
            seq_len,
            &mut rng,
        )
    }
}

/// Optimizes a fresh model on `data.train` with the given attention
/// nonlinearity. Deterministic for a fixed `cfg.seed`.
pub fn train<T: Scalar>(
    data: &Dataset,
    model_cfg: &ModelConfig,
    seq_len: usize,
    cfg: &TrainConfig,
    nl: &Nonlinearity<T>,
) -> Result<TrainOutcome<T>> {
    train_observed(data, model_cfg, seq_len, cfg, nl, &mut |_| {})
}

/// As [`train`], handing every metric row to `on_row` as soon as it exists,
/// so callers keep partial histories when a run aborts.
pub fn train_observed<T: Scalar>(
    data: &Dataset,
    model_cfg: &ModelConfig,
    seq_len: usize,
    cfg: &TrainConfig,
    nl: &Nonlinearity<T>,
    on_row: &mut dyn FnMut(&MetricRow),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let mut model = build_model::<T>(model_cfg, data, seq_len, cfg.seed)?;
    let nl_train = if cfg.noise_in_training {
        *nl
    } else {
        nl.with_noise(NoiseSpec::none())
    };
    let mut batch_rng = stream(cfg.seed, STREAM_BATCH);
    let mut noise_rng = stream(cfg.seed, STREAM_TRAIN_NOISE);
    let mut opt = AdamW::new(cfg.optimizer, &model.params.values);
    let batch = cfg.batch_size.min(data.train.count);
    let mut history = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let idx = sample(&mut batch_rng, data.train.count, batch).into_vec();
        let split = data.train.subset(&idx);
        let leaves = model.params.leaves();
        let ctx = Ctx {
            surrogate: false,
            training: true,
            rng: Some(&mut noise_rng),
        };
        let loss = model
            .forward(&leaves, &split, &nl_train, ctx)?
            .cross_entropy(&split.targets())?;
        let value = loss.item().to_f64_lossy();
        if !value.is_finite() {
            return Err(Error::Divergence { step, loss: value });
        }
        loss.backward();
        let grads: Vec<Vec<T>> = leaves
            .iter()
            .map(|l| l.grad().unwrap_or_else(|| vec![T::zero(); l.len()]))
            .collect();
        opt.step(
            &mut model.params.values,
            &grads,
            &model.params.decay,
            cfg.lr,
        );
        let row = MetricRow {
            step,
            split: "train",
            metric: "loss",
            value,
            seed: cfg.seed,
        };
        on_row(&row);
        history.push(row);
        if cfg.eval_interval > 0 && (step + 1) % cfg.eval_interval == 0 {
            let r = evaluate(&model, &data.val, nl, cfg.seed)?;
            for (metric, value) in [("loss", r.loss), ("accuracy", r.accuracy)] {
                let row = MetricRow {
                    step,
                    split: "val",
                    metric,
                    value,
                    seed: cfg.seed,
                };
                on_row(&row);
                history.push(row);
            }
        }
    }
    Ok(TrainOutcome { model, history })
}

const EVAL_BATCH: usize = 250;

/// Loss and accuracy of `model` on `split` with the hardware forward model
/// of `nl`, including its noise (drawn from a stream of `seed`).
pub fn evaluate<T: Scalar>(
    model: &Transformer<T>,
    split: &Split,
    nl: &Nonlinearity<T>,
    seed: u64,
) -> Result<EvalResult> {
    let leaves = model.params.constants();
    let mut rng = stream(seed, STREAM_EVAL);
    let (mut loss, mut correct, mut total) = (0.0, 0usize, 0usize);
    for start in (0..split.count).step_by(EVAL_BATCH) {
        let idx: Vec<usize> = (start..(start + EVAL_BATCH).min(split.count)).collect();
        let part = split.subset(&idx);
        let logits = model.forward(&leaves, &part, nl, Ctx::eval(Some(&mut rng)))?;
        let targets = part.targets();
        loss += logits.cross_entropy(&targets)?.item().to_f64_lossy() * targets.len() as f64;
        let classes = logits.shape()[1];
        for (r, &t) in targets.iter().enumerate() {
            let row = &logits.data()[r * classes..(r + 1) * classes];
            let best = row
                .iter()
                .enumerate()
                .fold(0, |b, (j, v)| if *v > row[b] { j } else { b });
            correct += usize::from(best == t);
        }
        total += targets.len();
    }
    Ok(EvalResult {
        loss: loss / total as f64,
        accuracy: correct as f64 / total as f64,
    })
}

pub fn is_language_model<T>(model: &Transformer<T>) -> bool {
    model.kind == ModelKind::CharLm
}
