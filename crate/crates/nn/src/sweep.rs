use std::fmt;
use std::fmt::Write as _;

use eoattn_core::activation::{NoiseMode, NoiseSpec, Nonlinearity};
use eoattn_core::Scalar;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Transformer};
use crate::train::{evaluate, train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Bits,
    Sigma,
    NoiseMode,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Bits => "bits",
            SweepAxis::Sigma => "sigma",
            SweepAxis::NoiseMode => "noise_mode",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepValue {
    /// `None` is the unquantized (infinite-bit) point.
    Bits(Option<u32>),
    Sigma(f64),
    Mode(NoiseMode),
}

impl SweepValue {
    pub fn axis(&self) -> SweepAxis {
        match self {
            SweepValue::Bits(_) => SweepAxis::Bits,
            SweepValue::Sigma(_) => SweepAxis::Sigma,
            SweepValue::Mode(_) => SweepAxis::NoiseMode,
        }
    }

    /// Base nonlinearity with this point's setting substituted.
    pub fn apply<T: Scalar>(&self, base: &Nonlinearity<T>) -> Result<Nonlinearity<T>> {
        Ok(match *self {
            SweepValue::Bits(b) => base.with_bits(b)?,
            SweepValue::Sigma(s) => base.with_noise(NoiseSpec {
                sigma: T::lit(s),
                ..*base.noise()
            }),
            SweepValue::Mode(mode) => base.with_noise(NoiseSpec {
                mode,
                ..*base.noise()
            }),
        })
    }
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Bits(None) => f.write_str("inf"),
            SweepValue::Bits(Some(b)) => write!(f, "{b}"),
            SweepValue::Sigma(s) => write!(f, "{s}"),
            SweepValue::Mode(NoiseMode::None) => f.write_str("none"),
            SweepValue::Mode(NoiseMode::Additive) => f.write_str("additive"),
            SweepValue::Mode(NoiseMode::Multiplicative) => f.write_str("multiplicative"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariant {
    /// One model trained with the base nonlinearity; the swept setting is
    /// applied only at evaluation.
    #[default]
    TestOnly,
    /// A model trained per point with the swept setting, noise included.
    TrainAndTest,
}

#[derive(Debug, Clone)]
pub struct SweepBase<'a, T> {
    pub data: &'a Dataset,
    pub model: ModelConfig,
    pub seq_len: usize,
    pub train: TrainConfig,
    pub nonlinearity: Nonlinearity<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: SweepValue,
    pub metric: &'static str,
    pub result: f64,
    pub seed: u64,
}

pub const SWEEP_CSV_HEADER: &str = "axis,value,metric,result,seed";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:e},{}",
            r.axis.name(),
            r.value,
            r.metric,
            r.result,
            r.seed
        );
    }
    s
}

fn score<T: Scalar>(
    model: &Transformer<T>,
    base: &SweepBase<'_, T>,
    nl: &Nonlinearity<T>,
    value: SweepValue,
    out: &mut Vec<SweepRow>,
) -> Result<()> {
    let seed = base.train.seed;
    let val = evaluate(model, &base.data.val, nl, seed)?;
    let tr = evaluate(model, &base.data.train, nl, seed)?;
    for (metric, result) in [
        ("val_accuracy", val.accuracy),
        ("val_loss", val.loss),
        ("train_accuracy", tr.accuracy),
    ] {
        out.push(SweepRow {
            axis: value.axis(),
            value,
            metric,
            result,
            seed,
        });
    }
    Ok(())
}

/// Trains and evaluates once per value. Every point shares the run seed so
/// neighbouring points are paired comparisons.
pub fn sweep<T: Scalar>(
    values: &[SweepValue],
    variant: SweepVariant,
    base: &SweepBase<'_, T>,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(values.len() * 3);
    sweep_into(values, variant, base, &mut rows)?;
    Ok(rows)
}

/// As [`sweep`], appending to `rows` point by point; on error `rows` holds
/// every completed point.
pub fn sweep_into<T: Scalar>(
    values: &[SweepValue],
    variant: SweepVariant,
    base: &SweepBase<'_, T>,
    rows: &mut Vec<SweepRow>,
) -> Result<()> {
    let Some(first) = values.first() else {
        return Err(Error::InvalidConfig(
            "sweep needs at least one value".into(),
        ));
    };
    if values.iter().any(|v| v.axis() != first.axis()) {
        return Err(Error::InvalidConfig("sweep values mix axes".into()));
    }
    match variant {
        SweepVariant::TestOnly => {
            let trained = train(
                base.data,
                &base.model,
                base.seq_len,
                &base.train,
                &base.nonlinearity,
            )?;
            for &v in values {
                score(&trained.model, base, &v.apply(&base.nonlinearity)?, v, rows)?;
            }
        }
        SweepVariant::TrainAndTest => {
            let cfg = TrainConfig {
                noise_in_training: true,
                ..base.train
            };
            for &v in values {
                let nl = v.apply(&base.nonlinearity)?;
                let trained = train(base.data, &base.model, base.seq_len, &cfg, &nl)?;
                score(&trained.model, base, &nl, v, rows)?;
            }
        }
    }
    Ok(())
}

/// Looks up one metric at one point of a sweep result.
pub fn lookup(rows: &[SweepRow], value: SweepValue, metric: &str) -> Option<f64> {
    rows.iter()
        .find(|r| r.value == value && r.metric == metric)
        .map(|r| r.result)
}
