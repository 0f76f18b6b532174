//! Procedurally generated desk-scale tasks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// A class template hidden in one patch of a noisy image, next to a
    /// weaker template of another class.
    SyntheticPatches,
    /// Drawn shapes (bars, boxes, crosses, ...) with random colour and offset.
    TinyImageClassification,
    /// Next-character prediction on a generated word corpus.
    CharLm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Class count, or vocabulary size bound for the char-LM (ignored there).
    #[serde(default = "default_classes")]
    pub classes: usize,
    /// Training examples (sequences for the char-LM).
    #[serde(default = "default_size")]
    pub size: usize,
    #[serde(default = "default_val_size")]
    pub val_size: usize,
    /// Sequence length for the char-LM.
    #[serde(default = "default_seq_len")]
    pub seq_len: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_classes() -> usize {
    10
}
fn default_size() -> usize {
    1000
}
fn default_val_size() -> usize {
    500
}
fn default_seq_len() -> usize {
    16
}

impl TaskSpec {
    pub fn synthetic_patches(seed: u64) -> Self {
        Self {
            kind: TaskKind::SyntheticPatches,
            classes: 10,
            size: 1000,
            val_size: 500,
            seq_len: 16,
            seed,
        }
    }
}

pub const IMAGE_SIDE: usize = 16;
pub const IMAGE_CHANNELS: usize = 3;
pub const PATCH: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum Examples {
    /// `[count, side, side, channels]`, row-major.
    Images {
        pixels: Vec<f64>,
        side: usize,
        channels: usize,
    },
    /// `[count, seq_len + 1]` token ids; inputs are the first `seq_len`,
    /// targets the last `seq_len`.
    Tokens { ids: Vec<usize>, seq_len: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub examples: Examples,
    /// Class per image; unused for token splits.
    pub labels: Vec<usize>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Split,
    pub val: Split,
    /// Output classes: image classes or vocabulary size.
    pub classes: usize,
    /// Character of each token id for the char-LM.
    pub vocab: Vec<char>,
}

impl Split {
    pub fn subset(&self, idx: &[usize]) -> Split {
        let examples = match &self.examples {
            Examples::Images {
                pixels,
                side,
                channels,
            } => {
                let per = side * side * channels;
                Examples::Images {
                    pixels: idx
                        .iter()
                        .flat_map(|&i| pixels[i * per..(i + 1) * per].iter().copied())
                        .collect(),
                    side: *side,
                    channels: *channels,
                }
            }
            Examples::Tokens { ids, seq_len } => {
                let per = seq_len + 1;
                Examples::Tokens {
                    ids: idx
                        .iter()
                        .flat_map(|&i| ids[i * per..(i + 1) * per].iter().copied())
                        .collect(),
                    seq_len: *seq_len,
                }
            }
        };
        Split {
            examples,
            labels: if self.labels.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&i| self.labels[i]).collect()
            },
            count: idx.len(),
        }
    }

    /// Prediction targets in the order the model emits logits.
    pub fn targets(&self) -> Vec<usize> {
        match &self.examples {
            Examples::Images { .. } => self.labels.clone(),
            Examples::Tokens { ids, seq_len } => {
                let per = seq_len + 1;
                (0..self.count)
                    .flat_map(|i| ids[i * per + 1..(i + 1) * per].iter().copied())
                    .collect()
            }
        }
    }
}

pub fn generate(spec: &TaskSpec) -> Result<Dataset> {
    if spec.size == 0 {
        return Err(Error::InvalidConfig("task size must be positive".into()));
    }
    match spec.kind {
        TaskKind::SyntheticPatches => {
            if spec.classes < 2 {
                return Err(Error::InvalidConfig("need at least two classes".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let templates = patch_templates(spec.classes, &mut rng);
            let train = patch_split(spec.size, &templates, &mut rng);
            let val = patch_split(spec.val_size, &templates, &mut rng);
            Ok(Dataset {
                train,
                val,
                classes: spec.classes,
                vocab: Vec::new(),
            })
        }
        TaskKind::TinyImageClassification => {
            if !(2..=SHAPES).contains(&spec.classes) {
                return Err(Error::InvalidConfig(format!(
                    "shape task supports 2..={SHAPES} classes"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let train = shape_split(spec.size, spec.classes, &mut rng);
            let val = shape_split(spec.val_size, spec.classes, &mut rng);
            Ok(Dataset {
                train,
                val,
                classes: spec.classes,
                vocab: Vec::new(),
            })
        }
        TaskKind::CharLm => {
            if spec.seq_len == 0 {
                return Err(Error::InvalidConfig("seq_len must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let text = word_corpus(
                (spec.size + spec.val_size) * (spec.seq_len + 1) + 64,
                &mut rng,
            );
            let mut vocab: Vec<char> = text.clone();
            vocab.sort_unstable();
            vocab.dedup();
            let ids: Vec<usize> = text
                .iter()
                .map(|c| vocab.binary_search(c).expect("char in vocab"))
                .collect();
            let take = |start: usize, count: usize, rng: &mut ChaCha8Rng| {
                let per = spec.seq_len + 1;
                let mut out = Vec::with_capacity(count * per);
                for _ in 0..count {
                    let s = start + rng.random_range(0..ids.len() / 2 - per);
                    out.extend_from_slice(&ids[s..s + per]);
                }
                Split {
                    examples: Examples::Tokens {
                        ids: out,
                        seq_len: spec.seq_len,
                    },
                    labels: Vec::new(),
                    count,
                }
            };
            let train = take(0, spec.size, &mut rng);
            let val = take(ids.len() / 2, spec.val_size, &mut rng);
            Ok(Dataset {
                train,
                val,
                classes: vocab.len(),
                vocab,
            })
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn patch_templates(classes: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let per = PATCH * PATCH * IMAGE_CHANNELS;
    (0..classes)
        .map(|_| {
            let t: Vec<f64> = (0..per).map(|_| gaussian(rng)).collect();
            let rms = (t.iter().map(|v| v * v).sum::<f64>() / per as f64).sqrt();
            t.into_iter().map(|v| v / rms).collect()
        })
        .collect()
}

const SIGNAL: f64 = 1.0;
const DISTRACTOR: f64 = 0.6;
const BACKGROUND: f64 = 1.0;

fn patch_split(count: usize, templates: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Split {
    let grid = IMAGE_SIDE / PATCH;
    let per = IMAGE_SIDE * IMAGE_SIDE * IMAGE_CHANNELS;
    let mut pixels = Vec::with_capacity(count * per);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let label = rng.random_range(0..templates.len());
        let other = (label + rng.random_range(1..templates.len())) % templates.len();
        let mut slots: Vec<usize> = (0..grid * grid).collect();
        slots.shuffle(rng);
        let mut img: Vec<f64> = (0..per).map(|_| BACKGROUND * gaussian(rng)).collect();
        for (slot, class, amp) in [(slots[0], label, SIGNAL), (slots[1], other, DISTRACTOR)] {
            let (py, px) = (slot / grid, slot % grid);
            for y in 0..PATCH {
                for x in 0..PATCH {
                    for c in 0..IMAGE_CHANNELS {
                        let dst =
                            ((py * PATCH + y) * IMAGE_SIDE + px * PATCH + x) * IMAGE_CHANNELS + c;
                        img[dst] += amp * templates[class][(y * PATCH + x) * IMAGE_CHANNELS + c];
                    }
                }
            }
        }
        pixels.extend(img);
        labels.push(label);
    }
    Split {
        examples: Examples::Images {
            pixels,
            side: IMAGE_SIDE,
            channels: IMAGE_CHANNELS,
        },
        labels,
        count,
    }
}

const SHAPES: usize = 10;

fn draw_shape(kind: usize, size: usize, oy: usize, ox: usize, y: usize, x: usize) -> bool {
    if y < oy || x < ox || y >= oy + size || x >= ox + size {
        return false;
    }
    let (y, x) = (y - oy, x - ox);
    let (c, last) = (size / 2, size - 1);
    match kind {
        0 => true,                                       // filled square
        1 => y == 0 || x == 0 || y == last || x == last, // frame
        2 => y == c || y + 1 == c,                       // horizontal bar
        3 => x == c || x + 1 == c,                       // vertical bar
        4 => y == c || x == c,                           // cross
        5 => x == y,                                     // diagonal
        6 => x + y == last,                              // anti-diagonal
        7 => x <= y,                                     // lower triangle
        8 => y % 2 == 0 && x % 2 == 0,                   // dots
        _ => {
            // disc
            let (dy, dx) = (
                2 * y as isize - last as isize,
                2 * x as isize - last as isize,
            );
            dy * dy + dx * dx <= (size * size) as isize
        }
    }
}

fn shape_split(count: usize, classes: usize, rng: &mut ChaCha8Rng) -> Split {
    let per = IMAGE_SIDE * IMAGE_SIDE * IMAGE_CHANNELS;
    let mut pixels = Vec::with_capacity(count * per);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let label = rng.random_range(0..classes);
        let size = rng.random_range(6..=10);
        let (oy, ox) = (
            rng.random_range(0..=IMAGE_SIDE - size),
            rng.random_range(0..=IMAGE_SIDE - size),
        );
        let colour: [f64; 3] = [
            rng.random_range(0.3..1.0),
            rng.random_range(0.3..1.0),
            rng.random_range(0.3..1.0),
        ];
        for y in 0..IMAGE_SIDE {
            for x in 0..IMAGE_SIDE {
                let on = draw_shape(label, size, oy, ox, y, x);
                for c in colour {
                    pixels.push(if on { c } else { 0.0 } + 0.1 * gaussian(rng));
                }
            }
        }
        labels.push(label);
    }
    Split {
        examples: Examples::Images {
            pixels,
            side: IMAGE_SIDE,
            channels: IMAGE_CHANNELS,
        },
        labels,
        count,
    }
}

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "ta", "si", "po", "an", "el", "or", "um", "ti", "ba", "de", "go",
];

/// Text of `len` characters from a fixed lexicon with Zipf-like word
/// frequencies.
fn word_corpus(len: usize, rng: &mut ChaCha8Rng) -> Vec<char> {
    let lexicon: Vec<String> = (0..40)
        .map(|_| {
            let k = rng.random_range(1..=3);
            (0..k)
                .map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())])
                .collect()
        })
        .collect();
    let weights: Vec<f64> = (1..=lexicon.len()).map(|r| 1.0 / r as f64).collect();
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(len + 8);
    while out.len() < len {
        let mut u = rng.random::<f64>() * total;
        let mut pick = lexicon.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                pick = i;
                break;
            }
            u -= w;
        }
        out.extend(lexicon[pick].chars());
        out.push(if rng.random_range(0..8) == 0 {
            '.'
        } else {
            ' '
        });
    }
    out.truncate(len);
    out
}
