use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use eoattn_core::activation::{
    ActivationKind, NoiseMode, Nonlinearity, OptmaxParams, OptmoidParams, ParamDocument,
    SigmoidGrid,
};
use eoattn_core::hwperf::{self, comparison_table, perf_csv};
use eoattn_core::mzm::{fit_transfer, load_transfer_curve, AffineEncoder, FitOptions};
use eoattn_core::presets::{nonlinearity_preset, reference_device, OPTMAX_X_RANGE};
use eoattn_core::sigproc::{
    error_stats_with, fir_lowpass, integrate_symbols, symbol_transmissions, synthesize_trace,
    uniform_symbols, FirSpec, Trace,
};
use eoattn_nn::{
    evaluate, generate, metrics_csv, sweep_csv, sweep_into, train_observed, Dataset, ModelConfig,
    SweepAxis, SweepBase, SweepValue, TaskKind, TaskSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{
    CalibrateConfig, EvalConfig, FilterChoice, HwSection, NonlinearitySpec, RunConfig,
    SigprocSection, SweepSection, TrainSection,
};
use crate::output::Outputs;
use crate::svg::{render, FigureSpec, PlotKind};
use crate::UserError;

/// Everything a subcommand needs besides its own section.
pub struct Run<'a> {
    pub cfg: &'a RunConfig,
    /// Directory relative config paths are resolved against.
    pub base: PathBuf,
    pub seed: u64,
    pub out: Outputs,
}

impl Run<'_> {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    fn figure(&mut self, name: &str, spec: &FigureSpec, csv: &str) -> Result<()> {
        if !self.cfg.output.svg {
            return Ok(());
        }
        let stamp = self.cfg.output.timestamp.then(timestamp);
        let svg = render(spec, csv, stamp.as_deref())?;
        self.out.write(name, &svg)?;
        Ok(())
    }
}

fn timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix {secs}")
}

pub fn calibrate(run: &mut Run<'_>, c: &CalibrateConfig) -> Result<()> {
    let curve_path = run.path(&c.curve);
    let samples = load_transfer_curve::<f64>(&curve_path)
        .with_context(|| format!("reading {}", curve_path.display()))?;
    let fit = fit_transfer(&samples, None, &FitOptions::default())?;
    let m = fit.model;
    let mut report = String::from("quantity,value\n");
    let mut line = |k: &str, v: f64| {
        let _ = writeln!(report, "{k},{v:.16e}");
    };
    line("a", m.a);
    line("b", m.b);
    line("c", m.c);
    line("v_pi", m.v_pi());
    line("fit_residual_norm", fit.residual_norm);
    line("fit_rms_residual", fit.rms_residual);
    line("fit_iterations", fit.iterations as f64);
    let nl = match c.kind {
        ActivationKind::Optmax => {
            let p = OptmaxParams::calibrated(
                &m,
                (c.x_range[0], c.x_range[1]),
                (c.z_range[0], c.z_range[1]),
                c.grid_points,
            )?;
            if let eoattn_core::activation::Normalizer::Mzm(norm) = &p.norm {
                line("norm_alpha", norm.alpha);
                line("norm_beta", norm.beta);
                line("norm_residual", norm.residual);
            }
            Nonlinearity::Optmax(p)
        }
        ActivationKind::Optmoid => {
            let bias = c
                .bias
                .unwrap_or_else(|| eoattn_core::activation::default_bias(c.n.unwrap_or(64)));
            let p = OptmoidParams::calibrate(&m, bias, &SigmoidGrid::default())?;
            line("bias", p.bias);
            line("sigmoid_fit_residual", p.fit_residual);
            Nonlinearity::Optmoid(p)
        }
        other => bail!(UserError(format!(
            "calibrate supports optmax and optmoid, not {other}"
        ))),
    };
    let doc = ParamDocument {
        n: c.n,
        nonlinearity: nl,
    };
    run.out.write(&c.output, &doc.to_toml_string()?)?;
    run.out.write("calibration.csv", &report)?;
    print!("{report}");
    Ok(())
}

pub fn eval(run: &mut Run<'_>, c: &EvalConfig) -> Result<()> {
    let row_hint = c.row_len.or(c.inputs.as_ref().map(Vec::len)).unwrap_or(c.n);
    let mut nl: Nonlinearity<f64> = match (&c.params, c.kind) {
        (Some(_), Some(_)) => bail!(UserError(
            "set either eval.params or eval.kind, not both".into()
        )),
        (Some(p), None) => {
            let path = run.path(p);
            if !path.exists() {
                bail!(UserError(format!(
                    "parameter file {} not found",
                    path.display()
                )));
            }
            ParamDocument::load(&path)?.nonlinearity
        }
        (None, Some(kind)) => nonlinearity_preset(kind, row_hint, c.z_preset)?,
        (None, None) => bail!(UserError("eval needs params or kind".into())),
    };
    if c.bits.is_some() {
        nl = nl.with_bits(c.bits)?;
    }
    if let Some(n) = c.noise {
        nl = nl.with_noise(n);
    }
    let mut rng = run.rng(0);
    let inputs: Vec<f64> = match &c.inputs {
        Some(v) if v.is_empty() => bail!(UserError("eval.inputs is empty".into())),
        Some(v) => v.clone(),
        None => {
            let [lo, hi] = c.input_range.unwrap_or_else(|| default_input_range(&nl));
            uniform_symbols::<f64>(c.n, Some(c.input_bits), &mut rng)
                .into_iter()
                .map(|u| lo + (hi - lo) * u)
                .collect()
        }
    };
    let row_len = if nl.kind().is_rowwise() {
        c.row_len.unwrap_or(inputs.len())
    } else {
        1
    };
    if row_len == 0 {
        bail!(UserError("eval.row_len must be positive".into()));
    }
    let mut noise_rng = run.rng(1);
    let mut csv = String::from("index,row,input,output\n");
    for (r, chunk) in inputs.chunks(row_len).enumerate() {
        let y = nl.forward_row(chunk, chunk.len(), Some(&mut noise_rng))?;
        for (j, (x, y)) in chunk.iter().zip(&y).enumerate() {
            let _ = writeln!(csv, "{},{r},{x:.16e},{y:.16e}", r * row_len + j);
        }
    }
    run.out.write("activation.csv", &csv)?;
    let spec = FigureSpec::new(
        PlotKind::Scatter,
        &format!("{} transfer", nl.kind()),
        "input",
        "output",
    );
    run.figure("activation.svg", &spec, &csv)?;
    println!("evaluated {} inputs with {}", inputs.len(), nl.kind());
    Ok(())
}

fn default_input_range(nl: &Nonlinearity<f64>) -> [f64; 2] {
    match nl {
        Nonlinearity::Optmax(p) => [p.x_min, p.x_max],
        Nonlinearity::Optmoid(p) => {
            let (lo, hi) = p.clip_range();
            [lo - p.bias, hi - p.bias]
        }
        _ => [OPTMAX_X_RANGE.0, OPTMAX_X_RANGE.1],
    }
}

/// Attention nonlinearity for a model attending over `seq_len` tokens.
fn build_nonlinearity(
    run: &Run<'_>,
    s: &NonlinearitySpec,
    seq_len: usize,
) -> Result<Nonlinearity<f32>> {
    let mut nl = match &s.params {
        Some(p) => {
            let path = run.path(p);
            if !path.exists() {
                bail!(UserError(format!(
                    "parameter file {} not found",
                    path.display()
                )));
            }
            let doc = ParamDocument::<f32>::load(&path)?;
            if doc.nonlinearity.kind() != s.kind {
                bail!(UserError(format!(
                    "parameter file holds {}, config asks for {}",
                    doc.nonlinearity.kind(),
                    s.kind
                )));
            }
            doc.nonlinearity
        }
        None => nonlinearity_preset(s.kind, seq_len, s.z_preset)?,
    };
    if s.bits.is_some() {
        nl = nl.with_bits(s.bits)?;
    }
    if let Some(n) = s.noise {
        nl = nl.with_noise(n);
    }
    Ok(nl)
}

struct Setup {
    data: Dataset,
    model: ModelConfig,
    seq_len: usize,
    nl: Nonlinearity<f32>,
}

fn setup(
    run: &Run<'_>,
    task: &TaskSpec,
    model: &crate::config::ModelSpec,
    nl: &NonlinearitySpec,
) -> Result<Setup> {
    let model = model.resolve()?;
    let data = generate(task)?;
    let seq_len = match task.kind {
        TaskKind::CharLm => task.seq_len,
        _ => model.patches(),
    };
    let nl = build_nonlinearity(run, nl, seq_len)?;
    Ok(Setup {
        data,
        model,
        seq_len,
        nl,
    })
}

pub fn train(run: &mut Run<'_>, c: &TrainSection) -> Result<()> {
    let s = setup(run, &c.task, &c.model, &c.nonlinearity)?;
    let cfg = c.schedule.with_seed(run.seed);
    let mut rows = Vec::new();
    let result = train_observed(&s.data, &s.model, s.seq_len, &cfg, &s.nl, &mut |r| {
        rows.push(r.clone())
    });
    let csv = metrics_csv(&rows);
    run.out.write("metrics.csv", &csv)?;
    let outcome = result?;
    let spec =
        FigureSpec::new(PlotKind::Line, "training loss", "step", "value").filter("split", "train");
    run.figure("loss.svg", &spec, &csv)?;
    let mut summary = String::from("split,metric,value\n");
    for (name, split) in [("train", &s.data.train), ("val", &s.data.val)] {
        let e = evaluate(&outcome.model, split, &s.nl, run.seed)?;
        let _ = writeln!(
            summary,
            "{name},loss,{:e}\n{name},accuracy,{:e}",
            e.loss, e.accuracy
        );
    }
    run.out.write("summary.csv", &summary)?;
    print!("{summary}");
    Ok(())
}

fn sweep_values(axis: SweepAxis, raw: &[toml::Value]) -> Result<Vec<SweepValue>> {
    if raw.is_empty() {
        bail!(UserError("sweep.values is empty".into()));
    }
    raw.iter()
        .map(|v| {
            let bad = || {
                anyhow!(UserError(format!(
                    "sweep value {v} does not fit axis {}",
                    axis.name()
                )))
            };
            Ok(match axis {
                SweepAxis::Bits => match v {
                    toml::Value::String(s) if s == "inf" => SweepValue::Bits(None),
                    toml::Value::Integer(b) if (1..=32).contains(b) => {
                        SweepValue::Bits(Some(*b as u32))
                    }
                    _ => return Err(bad()),
                },
                SweepAxis::Sigma => match v {
                    toml::Value::Float(f) if *f >= 0.0 => SweepValue::Sigma(*f),
                    toml::Value::Integer(i) if *i >= 0 => SweepValue::Sigma(*i as f64),
                    _ => return Err(bad()),
                },
                SweepAxis::NoiseMode => match v.as_str() {
                    Some("none") => SweepValue::Mode(NoiseMode::None),
                    Some("additive") => SweepValue::Mode(NoiseMode::Additive),
                    Some("multiplicative") => SweepValue::Mode(NoiseMode::Multiplicative),
                    _ => return Err(bad()),
                },
            })
        })
        .collect()
}

pub fn sweep(run: &mut Run<'_>, c: &SweepSection) -> Result<()> {
    let values = sweep_values(c.axis, &c.values)?;
    let s = setup(run, &c.task, &c.model, &c.nonlinearity)?;
    let base = SweepBase {
        data: &s.data,
        model: s.model,
        seq_len: s.seq_len,
        train: c.schedule.with_seed(run.seed),
        nonlinearity: s.nl,
    };
    let mut rows = Vec::new();
    let result = sweep_into(&values, c.variant, &base, &mut rows);
    let csv = sweep_csv(&rows);
    run.out.write("sweep.csv", &csv)?;
    result?;
    if c.axis == SweepAxis::Sigma {
        let spec = FigureSpec::new(PlotKind::Line, "accuracy vs noise", "value", "result")
            .filter("metric", "val_accuracy");
        run.figure(
            "sweep.svg",
            &FigureSpec {
                y_label: "validation accuracy".into(),
                x_label: "sigma".into(),
                ..spec
            },
            &csv,
        )?;
    } else if c.axis == SweepAxis::Bits
        && rows
            .iter()
            .all(|r| matches!(r.value, SweepValue::Bits(Some(_))))
    {
        let spec = FigureSpec::new(PlotKind::Line, "accuracy vs bits", "value", "result")
            .filter("metric", "val_accuracy");
        run.figure("sweep.svg", &spec, &csv)?;
    }
    print!("{csv}");
    Ok(())
}

pub fn hwmodel(run: &mut Run<'_>, c: &HwSection) -> Result<()> {
    c.hw.validate()?;
    let bauds = c.baud.clone().unwrap_or_else(|| vec![c.hw.f_baud]);
    let rows = hwperf::sweep(&c.archs, &c.n, &bauds, &c.hw)?;
    let csv = perf_csv(&rows);
    run.out.write("perf.csv", &csv)?;
    if c.n.len() > 1 {
        let spec = FigureSpec::new(PlotKind::Line, "latency per activation", "n", "latency_s")
            .group("arch")
            .log(true, true)
            .filter("f_baud", &format!("{:e}", bauds[0]));
        run.figure(
            "latency.svg",
            &FigureSpec {
                y_label: "latency (s)".into(),
                ..spec
            },
            &csv,
        )?;
    }
    if c.comparison {
        let mut t = String::from("name,latency_s,energy_j,computed\n");
        for r in comparison_table(64, &c.hw)? {
            let _ = writeln!(
                t,
                "{},{:e},{:e},{}",
                r.name, r.latency_s, r.energy_j, r.computed
            );
        }
        run.out.write("comparison.csv", &t)?;
    }
    print!("{csv}");
    Ok(())
}

fn load_reference(path: &Path) -> Result<Vec<f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|_| {
                anyhow!(UserError(format!(
                    "{}: line {}: invalid number `{}`",
                    path.display(),
                    i + 1,
                    l.trim()
                )))
            })
        })
        .collect()
}

pub fn sigproc(run: &mut Run<'_>, c: &SigprocSection) -> Result<()> {
    let baud = c.waveform.baud;
    let (trace, reference): (Trace<f64>, Vec<f64>) = match &c.trace {
        Some(p) => {
            let r = c.reference.as_ref().ok_or_else(|| {
                anyhow!(UserError("a measured trace needs sigproc.reference".into()))
            })?;
            (Trace::load(run.path(p))?, load_reference(&run.path(r))?)
        }
        None => {
            let device = reference_device::<f64>();
            let encoder = AffineEncoder::new(0.0, 1.0, device.window)?;
            let symbols =
                uniform_symbols::<f64>(c.waveform.n, c.waveform.bit_depth, &mut run.rng(0));
            let mut noise_rng = run.rng(1);
            let trace = synthesize_trace(
                &symbols,
                &c.waveform,
                &device,
                &encoder,
                &c.noise,
                Some(&mut noise_rng),
            )?;
            run.out.write("trace.csv", &trace.to_csv())?;
            (trace, symbol_transmissions(&symbols, &device, &encoder))
        }
    };
    let filtered = match c.filter {
        FilterChoice::None => trace,
        choice => {
            let sps = (trace.sample_rate / baud).round().max(1.0) as usize;
            let mut spec = match choice {
                FilterChoice::SymbolMatched => FirSpec::symbol_matched(baud, sps)?,
                _ => FirSpec::for_baud(baud)?,
            };
            if let Some(t) = c.taps {
                spec = FirSpec { taps: t, ..spec };
            }
            let f = fir_lowpass(&trace, &spec)?;
            run.out.write("filtered.csv", &f.to_csv())?;
            f
        }
    };
    let measured = integrate_symbols(&filtered, baud, c.window_fraction)?;
    let stats = error_stats_with(&measured, &reference, c.bins, c.norm)?;
    let mut sym = String::from("index,reference,measured\n");
    for (i, (r, m)) in reference.iter().zip(&measured).enumerate() {
        let _ = writeln!(sym, "{i},{r:.16e},{m:.16e}");
    }
    run.out.write("symbols.csv", &sym)?;
    let hist = stats.to_csv();
    run.out.write("histogram.csv", &hist)?;
    let spec = FigureSpec::new(
        PlotKind::Histogram,
        "relative symbol error",
        "bin_lo",
        "count",
    );
    run.figure(
        "histogram.svg",
        &FigureSpec {
            x_label: "relative error".into(),
            ..spec
        },
        &hist,
    )?;
    println!(
        "symbols {} mean {:e} sigma_hat {:e}",
        stats.errors.len(),
        stats.mean,
        stats.sigma_hat
    );
    Ok(())
}
