//! Run configuration: one TOML file with a section per subcommand.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use eoattn_core::activation::{ActivationKind, NoiseSpec};
use eoattn_core::hwperf::{ArchKind, HwConfig};
use eoattn_core::presets::ZPreset;
use eoattn_core::sigproc::{ErrorNorm, WaveformSpec};
use eoattn_nn::{AdamWConfig, ModelConfig, SweepAxis, SweepVariant, TaskSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::UserError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hwmodel: Option<HwSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigproc: Option<SigprocSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory, relative to the config file.
    pub dir: Option<PathBuf>,
    pub svg: bool,
    /// Embed the wall-clock time in SVG files (breaks byte-identity).
    pub timestamp: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            svg: true,
            timestamp: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    /// Transfer-curve CSV (`voltage_V,transmission`).
    pub curve: PathBuf,
    #[serde(default = "default_calibrate_kind")]
    pub kind: ActivationKind,
    #[serde(default = "default_x_range")]
    pub x_range: [f64; 2],
    #[serde(default = "default_z_range")]
    pub z_range: [f64; 2],
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Sequence length recorded in the document and used for the default bias.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub bias: Option<f64>,
    #[serde(default = "default_params_file")]
    pub output: String,
}

fn default_calibrate_kind() -> ActivationKind {
    ActivationKind::Optmax
}
fn default_x_range() -> [f64; 2] {
    [0.0, 4.0]
}
fn default_z_range() -> [f64; 2] {
    [6.0, 14.0]
}
fn default_grid_points() -> usize {
    256
}
fn default_params_file() -> String {
    "params.toml".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Parameter document from `calibrate`; otherwise `kind` selects a preset.
    #[serde(default)]
    pub params: Option<PathBuf>,
    #[serde(default)]
    pub kind: Option<ActivationKind>,
    #[serde(default = "default_figure_preset")]
    pub z_preset: ZPreset,
    /// Explicit inputs; take precedence over generated ones.
    #[serde(default)]
    pub inputs: Option<Vec<f64>>,
    #[serde(default = "default_eval_n")]
    pub n: usize,
    /// Resolution of generated inputs.
    #[serde(default = "default_input_bits")]
    pub input_bits: u32,
    /// Range of generated inputs; defaults to the activation's input range.
    #[serde(default)]
    pub input_range: Option<[f64; 2]>,
    /// Row length for row-wise kinds; defaults to the whole input.
    #[serde(default)]
    pub row_len: Option<usize>,
    #[serde(default)]
    pub bits: Option<u32>,
    #[serde(default)]
    pub noise: Option<NoiseSpec<f64>>,
}

fn default_figure_preset() -> ZPreset {
    ZPreset::Figure
}
fn default_eval_n() -> usize {
    2048
}
fn default_input_bits() -> u32 {
    5
}

/// Attention nonlinearity for training runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub kind: ActivationKind,
    #[serde(default = "default_vit_preset")]
    pub z_preset: ZPreset,
    #[serde(default)]
    pub params: Option<PathBuf>,
    #[serde(default)]
    pub bits: Option<u32>,
    #[serde(default)]
    pub noise: Option<NoiseSpec<f32>>,
}

fn default_vit_preset() -> ZPreset {
    ZPreset::Vit
}

/// A preset name or a full model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Preset(String),
    Inline(ModelConfig),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Preset("vit-tiny".into())
    }
}

impl ModelSpec {
    pub fn resolve(&self) -> Result<ModelConfig> {
        Ok(match self {
            ModelSpec::Preset(name) => ModelConfig::preset(name).map_err(UserError::wrap)?,
            ModelSpec::Inline(cfg) => *cfg,
        })
    }
}

/// Optimization settings; the seed comes from the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub lr: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub noise_in_training: bool,
    pub eval_interval: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            lr: t.lr,
            steps: t.steps,
            batch_size: t.batch_size,
            optimizer: t.optimizer,
            noise_in_training: t.noise_in_training,
            eval_interval: t.eval_interval,
        }
    }
}

impl Schedule {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            steps: self.steps,
            batch_size: self.batch_size,
            seed,
            optimizer: self.optimizer,
            noise_in_training: self.noise_in_training,
            eval_interval: self.eval_interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub task: TaskSpec,
    #[serde(default)]
    pub model: ModelSpec,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub task: TaskSpec,
    #[serde(default)]
    pub model: ModelSpec,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub schedule: Schedule,
    pub axis: SweepAxis,
    /// Bit depths (integers or `"inf"`), sigmas, or noise-mode names.
    pub values: Vec<toml::Value>,
    #[serde(default)]
    pub variant: SweepVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HwSection {
    pub hw: HwConfig,
    pub archs: Vec<ArchKind>,
    pub n: Vec<usize>,
    /// Symbol rates to sweep; defaults to `hw.f_baud`.
    pub baud: Option<Vec<f64>>,
    pub comparison: bool,
}

impl Default for HwSection {
    fn default() -> Self {
        Self {
            hw: HwConfig::default(),
            archs: ArchKind::ALL.to_vec(),
            n: vec![64, 2048],
            baud: None,
            comparison: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterChoice {
    /// Cutoff at the symbol rate, one symbol of taps.
    #[default]
    SymbolMatched,
    /// Cutoff scaled with the baud rate, fixed tap count.
    BaudScaled,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigprocSection {
    /// Measured trace (`time_s,amplitude`); synthesized when absent.
    pub trace: Option<PathBuf>,
    /// Ideal symbol amplitudes for a measured trace, one per line after a header.
    pub reference: Option<PathBuf>,
    pub waveform: WaveformSpec,
    pub noise: NoiseSpec<f64>,
    pub filter: FilterChoice,
    pub taps: Option<usize>,
    pub window_fraction: f64,
    pub bins: usize,
    pub norm: ErrorNorm,
}

impl Default for SigprocSection {
    fn default() -> Self {
        Self {
            trace: None,
            reference: None,
            waveform: WaveformSpec {
                baud: 10e9,
                sample_rate: 80e9,
                bit_depth: Some(5),
                n: 2048,
            },
            noise: NoiseSpec::none(),
            filter: FilterChoice::default(),
            taps: None,
            window_fraction: eoattn_core::sigproc::DEFAULT_WINDOW_FRACTION,
            bins: 50,
            norm: ErrorNorm::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| UserError::msg(format!("invalid config: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).context("serializing config")
    }

    /// Reads `path`; relative paths inside are resolved against its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UserError::msg(format!("cannot read config {}: {e}", path.display())))?;
        let cfg = Self::from_toml_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }
}

pub fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    match s {
        Some(v) => Ok(v),
        None => bail!(UserError(format!("config has no [{name}] section"))),
    }
}
