//! Analytical latency, power and energy of the Optmax and Optmoid signal
//! chains. All quantities are SI (seconds, watts, joules, hertz).

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    /// Two modulation trains, two photodiode/TIA stages, one drive amplifier.
    Optmax,
    Optmoid,
}

impl ArchKind {
    pub const ALL: [ArchKind; 2] = [ArchKind::Optmax, ArchKind::Optmoid];

    pub fn name(self) -> &'static str {
        match self {
            ArchKind::Optmax => "optmax",
            ArchKind::Optmoid => "optmoid",
        }
    }

    /// Number of modulation trains.
    fn trains(self) -> f64 {
        match self {
            ArchKind::Optmax => 2.0,
            ArchKind::Optmoid => 1.0,
        }
    }
}

/// TIA bandwidth as a function of symbol rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthPolicy {
    /// Constant bandwidth in hertz.
    Fixed(f64),
    /// `ratio · f_B`.
    ScaledWithBaud(f64),
}

impl Default for BandwidthPolicy {
    fn default() -> Self {
        BandwidthPolicy::Fixed(40e9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaserConfig {
    pub v_l: f64,
    /// Slope efficiency, W/A.
    pub gamma_l: f64,
    pub i_th: f64,
    pub p_opt: f64,
}

impl Default for LaserConfig {
    fn default() -> Self {
        Self {
            v_l: 1.6,
            gamma_l: 0.24,
            i_th: 60e-3,
            p_opt: 50e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulatorConfig {
    pub r: f64,
    pub v_max_optmax: f64,
    pub v_max_optmoid: f64,
    pub p_dc_optmax: f64,
    pub p_dc_optmoid: f64,
}

impl Default for ModulatorConfig {
    fn default() -> Self {
        Self {
            r: 50.0,
            v_max_optmax: 2.87,
            v_max_optmoid: 5.73,
            p_dc_optmax: 13.8e-3,
            p_dc_optmoid: 25.6e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferencePower {
    pub p_dac_ref: f64,
    pub p_adc_ref: f64,
    /// Sample rate at which the converter powers are quoted, samples/s.
    pub rate_ref: f64,
    pub p_drive: f64,
    pub p_pd: f64,
    pub p_tia: f64,
}

impl Default for ReferencePower {
    fn default() -> Self {
        Self {
            p_dac_ref: 132.25e-3,
            p_adc_ref: 130.25e-3,
            rate_ref: 97e9,
            p_drive: 100e-3,
            p_pd: 1e-3,
            p_tia: 11.2e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HwConfig {
    pub f_baud: f64,
    pub samples_per_symbol: f64,
    pub l_mzm: f64,
    pub n_eff: f64,
    pub f_3db: BandwidthPolicy,
    pub laser: LaserConfig,
    pub mzm: ModulatorConfig,
    pub reference: ReferencePower,
}

impl Default for HwConfig {
    fn default() -> Self {
        Self {
            f_baud: 10e9,
            samples_per_symbol: 4.0,
            l_mzm: 7.3e-3,
            n_eff: 1.2,
            f_3db: BandwidthPolicy::default(),
            laser: LaserConfig::default(),
            mzm: ModulatorConfig::default(),
            reference: ReferencePower::default(),
        }
    }
}

impl HwConfig {
    pub fn with_baud(mut self, f_baud: f64) -> Self {
        self.f_baud = f_baud;
        self
    }

    pub fn tia_bandwidth(&self) -> f64 {
        match self.f_3db {
            BandwidthPolicy::Fixed(f) => f,
            BandwidthPolicy::ScaledWithBaud(r) => r * self.f_baud,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("f_baud", self.f_baud),
            ("l_mzm", self.l_mzm),
            ("n_eff", self.n_eff),
            ("f_3db", self.tia_bandwidth()),
            ("laser.v_l", self.laser.v_l),
            ("laser.gamma_l", self.laser.gamma_l),
            ("laser.i_th", self.laser.i_th),
            ("laser.p_opt", self.laser.p_opt),
            ("mzm.r", self.mzm.r),
            ("mzm.v_max_optmax", self.mzm.v_max_optmax),
            ("mzm.v_max_optmoid", self.mzm.v_max_optmoid),
            ("mzm.p_dc_optmax", self.mzm.p_dc_optmax),
            ("mzm.p_dc_optmoid", self.mzm.p_dc_optmoid),
            ("reference.p_dac_ref", self.reference.p_dac_ref),
            ("reference.p_adc_ref", self.reference.p_adc_ref),
            ("reference.rate_ref", self.reference.rate_ref),
            ("reference.p_drive", self.reference.p_drive),
            ("reference.p_pd", self.reference.p_pd),
            ("reference.p_tia", self.reference.p_tia),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.samples_per_symbol >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "samples_per_symbol must be at least 1, got {}",
                self.samples_per_symbol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageLatencies {
    pub t_dac: f64,
    pub t_prop: f64,
    pub t_tia: f64,
    pub t_adc: f64,
}

pub fn stage_latencies(cfg: &HwConfig) -> StageLatencies {
    let t_conv = 1.0 / (cfg.samples_per_symbol * cfg.f_baud);
    StageLatencies {
        t_dac: t_conv,
        t_prop: cfg.n_eff * cfg.l_mzm / SPEED_OF_LIGHT,
        t_tia: 5.0 / (2.0 * PI * cfg.tia_bandwidth()),
        t_adc: t_conv,
    }
}

/// Pipeline delay for a sequence of `n` symbols.
pub fn latency(arch: ArchKind, n: usize, cfg: &HwConfig) -> f64 {
    let s = stage_latencies(cfg);
    let k = arch.trains();
    k * n as f64 / cfg.f_baud + k * (s.t_dac + s.t_prop + s.t_tia) + s.t_adc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBreakdown {
    pub laser: f64,
    /// All modulators together.
    pub mzm: f64,
    pub dac: f64,
    pub drive: f64,
    pub pd: f64,
    pub tia: f64,
    pub adc: f64,
}

impl PowerBreakdown {
    pub fn total(&self) -> f64 {
        self.laser + self.mzm + self.dac + self.drive + self.pd + self.tia + self.adc
    }
}

pub fn laser_power(cfg: &HwConfig) -> f64 {
    let l = &cfg.laser;
    l.v_l * (l.p_opt / l.gamma_l + l.i_th)
}

/// Electrical power of one modulator driven by uniformly distributed
/// voltages in `[0, V_max]`, plus its thermal bias.
pub fn modulator_power(arch: ArchKind, cfg: &HwConfig) -> f64 {
    let (v_max, p_dc) = match arch {
        ArchKind::Optmax => (cfg.mzm.v_max_optmax, cfg.mzm.p_dc_optmax),
        ArchKind::Optmoid => (cfg.mzm.v_max_optmoid, cfg.mzm.p_dc_optmoid),
    };
    let v_rms = v_max / (2.0 * 3f64.sqrt());
    v_rms * v_rms / cfg.mzm.r + p_dc
}

fn sample_rate(cfg: &HwConfig) -> f64 {
    cfg.samples_per_symbol * cfg.f_baud
}

pub fn dac_power(cfg: &HwConfig) -> f64 {
    cfg.reference.p_dac_ref * sample_rate(cfg) / cfg.reference.rate_ref
}

pub fn adc_power(cfg: &HwConfig) -> f64 {
    cfg.reference.p_adc_ref * sample_rate(cfg) / cfg.reference.rate_ref
}

pub fn power(arch: ArchKind, cfg: &HwConfig) -> PowerBreakdown {
    let k = arch.trains();
    PowerBreakdown {
        laser: laser_power(cfg),
        mzm: k * modulator_power(arch, cfg),
        dac: k * dac_power(cfg),
        drive: cfg.reference.p_drive,
        pd: k * cfg.reference.p_pd,
        tia: k * cfg.reference.p_tia,
        adc: adc_power(cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfReport {
    pub arch: ArchKind,
    pub n: usize,
    pub f_baud: f64,
    pub latency_s: f64,
    pub power_w: f64,
    pub breakdown: PowerBreakdown,
    pub energy_per_sequence_j: f64,
    pub energy_per_element_j: f64,
    pub ops_per_second: f64,
}

pub fn energy(arch: ArchKind, n: usize, cfg: &HwConfig) -> PerfReport {
    let latency_s = latency(arch, n, cfg);
    let breakdown = power(arch, cfg);
    let power_w = breakdown.total();
    let e = power_w * latency_s;
    PerfReport {
        arch,
        n,
        f_baud: cfg.f_baud,
        latency_s,
        power_w,
        breakdown,
        energy_per_sequence_j: e,
        energy_per_element_j: e / n as f64,
        ops_per_second: n as f64 / latency_s,
    }
}

/// Evaluates every `(arch, n, f_B)` combination, in that nesting order.
pub fn sweep(
    archs: &[ArchKind],
    ns: &[usize],
    bauds: &[f64],
    cfg: &HwConfig,
) -> Result<Vec<PerfReport>> {
    if archs.is_empty() || ns.is_empty() || bauds.is_empty() {
        return Err(Error::EmptyInput);
    }
    if ns.contains(&0) {
        return Err(Error::InvalidParameter(
            "sequence length must be at least 1".into(),
        ));
    }
    let mut rows = Vec::with_capacity(archs.len() * ns.len() * bauds.len());
    for &arch in archs {
        for &n in ns {
            for &f in bauds {
                let c = cfg.with_baud(f);
                c.validate()?;
                rows.push(energy(arch, n, &c));
            }
        }
    }
    Ok(rows)
}

pub const PERF_CSV_HEADER: &str = "arch,n,f_baud,latency_s,power_w,energy_seq_j,energy_elem_j";

pub fn perf_csv(rows: &[PerfReport]) -> String {
    let mut s = String::from(PERF_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:e},{:e},{:e},{:e},{:e}",
            r.arch.name(),
            r.n,
            r.f_baud,
            r.latency_s,
            r.power_w,
            r.energy_per_sequence_j,
            r.energy_per_element_j
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub latency_s: f64,
    pub energy_j: f64,
    /// `false` for the published constants of other accelerators.
    pub computed: bool,
}

/// Published latency and energy per sequence of length 64 for other
/// softmax accelerators.
pub const LITERATURE_N64: [(&str, f64, f64); 4] = [
    ("nMOS SMA", 5.5e-4, 1.9e-8),
    ("Softermax", 7.7e-4, 1.3e-8),
    ("Softonic", 1.7e-5, 4.5e-11),
    ("VEXP", 2.2e-7, 5.0e-8),
];

pub fn comparison_table(n: usize, cfg: &HwConfig) -> Result<Vec<ComparisonRow>> {
    if n != 64 {
        return Err(Error::UnsupportedN(n));
    }
    let mut rows: Vec<ComparisonRow> = LITERATURE_N64
        .iter()
        .map(|&(name, latency_s, energy_j)| ComparisonRow {
            name: name.to_string(),
            latency_s,
            energy_j,
            computed: false,
        })
        .collect();
    for arch in ArchKind::ALL {
        let r = energy(arch, n, cfg);
        rows.push(ComparisonRow {
            name: match arch {
                ArchKind::Optmax => "Optmax".into(),
                ArchKind::Optmoid => "Optmoid".into(),
            },
            latency_s: r.latency_s,
            energy_j: r.energy_per_sequence_j,
            computed: true,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn stage_latency_values() {
        let s = stage_latencies(&HwConfig::default());
        assert!(rel(s.t_prop, 29.2e-12) < 2e-3, "{}", s.t_prop);
        assert!(rel(s.t_tia, 19.89e-12) < 2e-3, "{}", s.t_tia);
        assert_eq!(s.t_dac, 25e-12);
        assert_eq!(s.t_adc, s.t_dac);
    }

    #[test]
    fn breakdown_sums_to_total() {
        let cfg = HwConfig::default();
        for a in ArchKind::ALL {
            let r = energy(a, 64, &cfg);
            assert!(rel(r.breakdown.total(), r.power_w) < 1e-12);
            assert!(rel(r.energy_per_sequence_j / r.latency_s, r.power_w) < 1e-12);
        }
    }

    #[test]
    fn scaled_bandwidth_policy() {
        let cfg = HwConfig {
            f_3db: BandwidthPolicy::ScaledWithBaud(4.0),
            ..HwConfig::default()
        };
        assert_eq!(cfg.tia_bandwidth(), 40e9);
        assert_eq!(cfg.with_baud(1e9).tia_bandwidth(), 4e9);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = HwConfig {
            samples_per_symbol: 0.5,
            ..HwConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = HwConfig {
            n_eff: -1.0,
            ..HwConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn table_requires_n64() {
        assert!(matches!(
            comparison_table(128, &HwConfig::default()),
            Err(Error::UnsupportedN(128))
        ));
        let t = comparison_table(64, &HwConfig::default()).unwrap();
        assert_eq!(t.len(), 6);
    }

    #[test]
    fn csv_layout() {
        let rows = sweep(&[ArchKind::Optmoid], &[64], &[10e9], &HwConfig::default()).unwrap();
        let csv = perf_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(PERF_CSV_HEADER));
        assert!(lines.next().unwrap().starts_with("optmoid,64,1e10,"));
    }
}
