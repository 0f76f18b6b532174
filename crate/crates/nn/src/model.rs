//! Post-norm Transformer encoder used as a patch classifier or a causal
//! character model.

use eoattn_core::activation::Nonlinearity;
use eoattn_core::Scalar;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::attention::{attention_forward, AttentionConfig};
use crate::data::{Examples, Split};
use crate::error::{shape_err, Error, Result};
use crate::tensor::{reborrow, ActMode, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Square image side in pixels (image models).
    #[serde(default = "default_side")]
    pub image_side: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_patch")]
    pub patch: usize,
    pub embed: usize,
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default)]
    pub dropout: f64,
}

fn default_side() -> usize {
    16
}
fn default_channels() -> usize {
    3
}
fn default_patch() -> usize {
    4
}
fn default_classes() -> usize {
    10
}

impl ModelConfig {
    /// Full-size ViT: 32×32×3 inputs in 4×4 patches.
    pub fn vit_full() -> Self {
        Self {
            image_side: 32,
            channels: 3,
            patch: 4,
            embed: 256,
            hidden: 512,
            heads: 8,
            layers: 6,
            classes: 10,
            dropout: 0.2,
        }
    }

    pub fn vit_tiny() -> Self {
        Self {
            image_side: 16,
            channels: 3,
            patch: 4,
            embed: 32,
            hidden: 64,
            heads: 2,
            layers: 2,
            classes: 10,
            dropout: 0.0,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "vit-full" => Ok(Self::vit_full()),
            "vit-tiny" => Ok(Self::vit_tiny()),
            other => Err(Error::InvalidConfig(format!(
                "unknown model preset '{other}'"
            ))),
        }
    }

    pub fn patches(&self) -> usize {
        (self.image_side / self.patch).pow(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch == 0 || self.image_side % self.patch != 0 {
            return Err(shape_err(format!(
                "image side {} is not divisible by patch {}",
                self.image_side, self.patch
            )));
        }
        if self.heads == 0 || self.embed % self.heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "embed {} must be a positive multiple of heads {}",
                self.embed, self.heads
            )));
        }
        if self.hidden == 0 || self.layers == 0 || self.classes == 0 {
            return Err(Error::InvalidConfig(
                "hidden, layers and classes must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Vit,
    /// Causal char-level model; `classes` is the vocabulary size.
    CharLm,
}

pub type ParamId = usize;

/// Flat parameter storage; forward passes read leaves created from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
    pub values: Vec<Vec<T>>,
    /// Whether weight decay applies.
    pub decay: Vec<bool>,
}

impl<T: Scalar> ParamStore<T> {
    fn new() -> Self {
        Self {
            names: Vec::new(),
            shapes: Vec::new(),
            values: Vec::new(),
            decay: Vec::new(),
        }
    }

    fn add(&mut self, name: String, shape: &[usize], values: Vec<T>, decay: bool) -> ParamId {
        self.names.push(name);
        self.shapes.push(shape.to_vec());
        self.values.push(values);
        self.decay.push(decay);
        self.values.len() - 1
    }

    fn normal(
        &mut self,
        name: String,
        shape: &[usize],
        std: f64,
        rng: &mut dyn RngCore,
    ) -> ParamId {
        let n = shape.iter().product();
        let v = (0..n)
            .map(|_| {
                let g: f64 = StandardNormal.sample(rng);
                T::lit(std * g)
            })
            .collect();
        self.add(name, shape, v, true)
    }

    fn constant(&mut self, name: String, shape: &[usize], c: f64) -> ParamId {
        let n = shape.iter().product();
        self.add(name, shape, vec![T::lit(c); n], false)
    }

    /// Gradient-tracking leaves, one per parameter.
    pub fn leaves(&self) -> Vec<Tensor<T>> {
        self.shapes
            .iter()
            .zip(&self.values)
            .map(|(s, v)| Tensor::param(s, v.clone()).expect("stored shape"))
            .collect()
    }

    /// Constant leaves for inference.
    pub fn constants(&self) -> Vec<Tensor<T>> {
        self.shapes
            .iter()
            .zip(&self.values)
            .map(|(s, v)| Tensor::new(s, v.clone()).expect("stored shape"))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct BlockParams {
    wq: ParamId,
    wk: ParamId,
    wv: ParamId,
    bq: ParamId,
    bk: ParamId,
    bv: ParamId,
    wo: ParamId,
    bo: ParamId,
    ln1_g: ParamId,
    ln1_b: ParamId,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
}

#[derive(Debug, Clone)]
pub struct Transformer<T> {
    pub cfg: ModelConfig,
    pub kind: ModelKind,
    /// Tokens per example.
    pub seq_len: usize,
    pub params: ParamStore<T>,
    embed_w: ParamId,
    embed_b: Option<ParamId>,
    pos: ParamId,
    blocks: Vec<BlockParams>,
    head_w: ParamId,
    head_b: ParamId,
}

const LN_EPS: f64 = 1e-5;

impl<T: Scalar> Transformer<T> {
    pub fn vit(cfg: ModelConfig, rng: &mut dyn RngCore) -> Result<Self> {
        cfg.validate()?;
        let patch_dim = cfg.patch * cfg.patch * cfg.channels;
        Self::build(cfg, ModelKind::Vit, cfg.patches(), patch_dim, rng)
    }

    /// Causal model over `seq_len` tokens from a vocabulary of `cfg.classes`.
    pub fn char_lm(cfg: ModelConfig, seq_len: usize, rng: &mut dyn RngCore) -> Result<Self> {
        cfg.validate()?;
        Self::build(cfg, ModelKind::CharLm, seq_len, cfg.classes, rng)
    }

    fn build(
        cfg: ModelConfig,
        kind: ModelKind,
        seq_len: usize,
        input_dim: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let d = cfg.embed;
        let mut p = ParamStore::new();
        let std_in = 1.0 / (input_dim as f64).sqrt();
        let embed_w = match kind {
            ModelKind::Vit => p.normal("embed.w".into(), &[input_dim, d], std_in, rng),
            ModelKind::CharLm => p.normal("embed.table".into(), &[input_dim, d], 1.0, rng),
        };
        let embed_b = (kind == ModelKind::Vit).then(|| p.constant("embed.b".into(), &[d], 0.0));
        let pos = p.normal("pos".into(), &[seq_len, d], 0.1, rng);
        let sd = 1.0 / (d as f64).sqrt();
        let sh = 1.0 / (cfg.hidden as f64).sqrt();
        let blocks = (0..cfg.layers)
            .map(|l| {
                let n = |s: &str| format!("block{l}.{s}");
                BlockParams {
                    wq: p.normal(n("wq"), &[d, d], sd, rng),
                    wk: p.normal(n("wk"), &[d, d], sd, rng),
                    wv: p.normal(n("wv"), &[d, d], sd, rng),
                    bq: p.constant(n("bq"), &[d], 0.0),
                    bk: p.constant(n("bk"), &[d], 0.0),
                    bv: p.constant(n("bv"), &[d], 0.0),
                    wo: p.normal(n("wo"), &[d, d], sd, rng),
                    bo: p.constant(n("bo"), &[d], 0.0),
                    ln1_g: p.constant(n("ln1.g"), &[d], 1.0),
                    ln1_b: p.constant(n("ln1.b"), &[d], 0.0),
                    w1: p.normal(n("w1"), &[d, cfg.hidden], sd, rng),
                    b1: p.constant(n("b1"), &[cfg.hidden], 0.0),
                    w2: p.normal(n("w2"), &[cfg.hidden, d], sh, rng),
                    b2: p.constant(n("b2"), &[d], 0.0),
                    ln2_g: p.constant(n("ln2.g"), &[d], 1.0),
                    ln2_b: p.constant(n("ln2.b"), &[d], 0.0),
                }
            })
            .collect();
        let head_w = p.normal("head.w".into(), &[d, cfg.classes], sd, rng);
        let head_b = p.constant("head.b".into(), &[cfg.classes], 0.0);
        Ok(Self {
            cfg,
            kind,
            seq_len,
            params: p,
            embed_w,
            embed_b,
            pos,
            blocks,
            head_w,
            head_b,
        })
    }

    /// Token features `[batch, seq_len, input_dim]` for image models.
    fn patchify(&self, split: &Split) -> Result<Tensor<T>> {
        let Examples::Images {
            pixels,
            side,
            channels,
        } = &split.examples
        else {
            return Err(Error::InvalidConfig("image model given token data".into()));
        };
        let cfg = &self.cfg;
        if *side != cfg.image_side || *channels != cfg.channels {
            return Err(shape_err(format!(
                "images are {side}x{side}x{channels}, model expects {0}x{0}x{1}",
                cfg.image_side, cfg.channels
            )));
        }
        let (p, c, grid) = (cfg.patch, cfg.channels, cfg.image_side / cfg.patch);
        let per_img = side * side * c;
        let dim = p * p * c;
        let mut out = Vec::with_capacity(split.count * self.seq_len * dim);
        for b in 0..split.count {
            let img = &pixels[b * per_img..(b + 1) * per_img];
            for gy in 0..grid {
                for gx in 0..grid {
                    for y in 0..p {
                        let row = ((gy * p + y) * side + gx * p) * c;
                        out.extend(img[row..row + p * c].iter().map(|&v| T::lit(v)));
                    }
                }
            }
        }
        Tensor::new(&[split.count, self.seq_len, dim], out)
    }

    /// Logits: `[batch, classes]` for the ViT, `[batch·seq_len, vocab]` for
    /// the char-LM.
    pub fn forward(
        &self,
        leaves: &[Tensor<T>],
        split: &Split,
        nl: &Nonlinearity<T>,
        mut ctx: Ctx<'_>,
    ) -> Result<Tensor<T>> {
        let (b, n, d) = (split.count, self.seq_len, self.cfg.embed);
        let mut x = match self.kind {
            ModelKind::Vit => {
                let tokens = self.patchify(split)?;
                let e = tokens.matmul(&leaves[self.embed_w])?;
                e.add_broadcast(&leaves[self.embed_b.expect("vit has embed bias")])?
            }
            ModelKind::CharLm => {
                let Examples::Tokens { ids, seq_len } = &split.examples else {
                    return Err(Error::InvalidConfig("char-LM given image data".into()));
                };
                if *seq_len != n {
                    return Err(shape_err(format!(
                        "sequences of {seq_len}, model expects {n}"
                    )));
                }
                let inputs: Vec<usize> = (0..b)
                    .flat_map(|i| ids[i * (n + 1)..i * (n + 1) + n].iter().copied())
                    .collect();
                leaves[self.embed_w]
                    .gather_rows(&inputs)?
                    .reshape(&[b, n, d])?
            }
        };
        x = x.add_broadcast(&leaves[self.pos])?;
        let causal = self.kind == ModelKind::CharLm;
        for blk in &self.blocks {
            x = self.block(&x, blk, leaves, nl, causal, &mut ctx)?;
        }
        match self.kind {
            ModelKind::Vit => x
                .mean_axis(1)?
                .matmul(&leaves[self.head_w])?
                .add_broadcast(&leaves[self.head_b]),
            ModelKind::CharLm => x
                .matmul(&leaves[self.head_w])?
                .add_broadcast(&leaves[self.head_b])?
                .reshape(&[b * n, self.cfg.classes]),
        }
    }

    fn block(
        &self,
        x: &Tensor<T>,
        p: &BlockParams,
        leaves: &[Tensor<T>],
        nl: &Nonlinearity<T>,
        causal: bool,
        ctx: &mut Ctx<'_>,
    ) -> Result<Tensor<T>> {
        let (b, n, d) = (x.shape()[0], x.shape()[1], self.cfg.embed);
        let h = self.cfg.heads;
        let dh = d / h;
        let split_heads = |w: ParamId, bias: ParamId| -> Result<Tensor<T>> {
            x.matmul(&leaves[w])?
                .add_broadcast(&leaves[bias])?
                .reshape(&[b, n, h, dh])?
                .permute(&[0, 2, 1, 3])
        };
        let (q, k, v) = (
            split_heads(p.wq, p.bq)?,
            split_heads(p.wk, p.bk)?,
            split_heads(p.wv, p.bv)?,
        );
        let cfg = AttentionConfig {
            n,
            d_k: dh,
            heads: h,
            nonlinearity: *nl,
            causal,
        };
        let mode = if ctx.surrogate {
            ActMode::Surrogate
        } else {
            ActMode::Hardware(reborrow(&mut ctx.rng))
        };
        let att = attention_forward(&q, &k, &v, &cfg, mode)?
            .permute(&[0, 2, 1, 3])?
            .reshape(&[b, n, d])?
            .matmul(&leaves[p.wo])?
            .add_broadcast(&leaves[p.bo])?;
        let att = ctx.dropout(&att, self.cfg.dropout);
        let x = x
            .add(&att)?
            .layer_norm(&leaves[p.ln1_g], &leaves[p.ln1_b], T::lit(LN_EPS))?;
        let ff = x
            .matmul(&leaves[p.w1])?
            .add_broadcast(&leaves[p.b1])?
            .gelu()
            .matmul(&leaves[p.w2])?
            .add_broadcast(&leaves[p.b2])?;
        let ff = ctx.dropout(&ff, self.cfg.dropout);
        x.add(&ff)?
            .layer_norm(&leaves[p.ln2_g], &leaves[p.ln2_b], T::lit(LN_EPS))
    }
}

/// Per-pass options: surrogate activations (no quantization, no noise), and
/// the random source for noise and dropout.
pub struct Ctx<'a> {
    pub surrogate: bool,
    pub training: bool,
    pub rng: Option<&'a mut dyn RngCore>,
}

impl<'a> Ctx<'a> {
    pub fn eval(rng: Option<&'a mut dyn RngCore>) -> Self {
        Self {
            surrogate: false,
            training: false,
            rng,
        }
    }

    fn dropout<T: Scalar>(&mut self, x: &Tensor<T>, p: f64) -> Tensor<T> {
        match (&mut self.rng, self.training && p > 0.0) {
            (Some(r), true) => x.dropout(p, *r),
            _ => x.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, TaskSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vit_logit_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = Transformer::<f64>::vit(ModelConfig::vit_tiny(), &mut rng).unwrap();
        let d = generate(&TaskSpec::synthetic_patches(0)).unwrap();
        let batch = d.train.subset(&(0..8).collect::<Vec<_>>());
        assert_eq!(m.seq_len, 16);
        let y = m
            .forward(
                &m.params.constants(),
                &batch,
                &Nonlinearity::softmax(),
                Ctx::eval(None),
            )
            .unwrap();
        assert_eq!(y.shape(), &[8, 10]);
    }

    #[test]
    fn full_size_preset() {
        let c = ModelConfig::preset("vit-full").unwrap();
        assert_eq!(
            (c.embed, c.hidden, c.heads, c.layers, c.patch),
            (256, 512, 8, 6, 4)
        );
        assert_eq!((c.patches(), c.classes, c.dropout), (64, 10, 0.2));
        assert!(ModelConfig::preset("vit-huge").is_err());
    }

    #[test]
    fn indivisible_patch_rejected() {
        let cfg = ModelConfig {
            patch: 5,
            ..ModelConfig::vit_tiny()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            Transformer::<f32>::vit(cfg, &mut rng),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
