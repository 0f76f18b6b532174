use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eoattn_core::activation::{default_bias, softmax_ref, Nonlinearity, ParamDocument};
use eoattn_core::mzm::format_transfer_curve;
use eoattn_core::presets::{optmoid_preset, reference_device};

const BIN: &str = env!("CARGO_BIN_EXE_eoattn");

fn eoattn(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("EOATTN_OUT")
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> (tempfile::TempDir, PathBuf) {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("run.toml");
    std::fs::write(&p, config).unwrap();
    (d, p)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn reference_curve(dir: &Path) {
    let m = reference_device::<f64>();
    let samples: Vec<(f64, f64)> = (0..128)
        .map(|i| {
            let v = 17.19 * i as f64 / 127.0;
            (v, m.transmission(v))
        })
        .collect();
    std::fs::write(dir.join("curve.csv"), format_transfer_curve(&samples)).unwrap();
}

#[test]
fn calibrate_noiseless_fixture() {
    let (d, cfg) = setup(
        "[calibrate]\ncurve = \"curve.csv\"\nx_range = [0.0, 4.0]\nz_range = [6.0, 14.0]\nn = 64\n",
    );
    reference_curve(d.path());
    let out = eoattn(
        d.path(),
        &["calibrate", "--config", cfg.to_str().unwrap(), "--out", "o"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read(&d.path().join("o"), "calibration.csv");
    let residual: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("fit_residual_norm,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(residual < 1e-10, "{residual}");
    let doc = ParamDocument::<f64>::load(d.path().join("o/params.toml")).unwrap();
    let Nonlinearity::Optmax(p) = doc.nonlinearity else {
        panic!("expected optmax")
    };
    assert_eq!((p.x_min, p.x_max, p.z_min, p.z_max), (0.0, 4.0, 6.0, 14.0));
    assert_eq!(doc.n, Some(64));
}

#[test]
fn calibrate_reports_bad_line() {
    let (d, cfg) = setup("[calibrate]\ncurve = \"curve.csv\"\n");
    std::fs::write(
        d.path().join("curve.csv"),
        "voltage_V,transmission\n0.0,0.1\n0.5,oops\n",
    )
    .unwrap();
    let out = eoattn(
        d.path(),
        &["calibrate", "--config", cfg.to_str().unwrap(), "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("oops"), "{err}");
}

#[test]
fn eval_softmax_matches_reference() {
    let (d, cfg) = setup("[eval]\nkind = \"softmax\"\ninputs = [1.0, 2.0, 3.0]\n");
    let out = eoattn(
        d.path(),
        &["eval", "--config", cfg.to_str().unwrap(), "--out", "o"],
    );
    assert!(out.status.success());
    let csv = read(&d.path().join("o"), "activation.csv");
    let want = softmax_ref(&[1.0, 2.0, 3.0]).unwrap();
    let got: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(got.len(), 3);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-15, "{a} vs {b}");
    }
}

#[test]
fn eval_optmoid_saturates_at_clip_bounds() {
    let p = optmoid_preset::<f64>(default_bias(64)).unwrap();
    let (lo, hi) = p.clip_range();
    let inputs = [
        lo - p.bias - 1.0,
        lo - p.bias,
        hi - p.bias,
        hi - p.bias + 1.0,
    ];
    let (d, cfg) = setup(&format!(
        "[eval]\nkind = \"optmoid\"\nrow_len = 64\ninputs = [{}]\n",
        inputs.map(|v| format!("{v:?}")).join(", ")
    ));
    let out = eoattn(
        d.path(),
        &["eval", "--config", cfg.to_str().unwrap(), "--out", "o"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let got: Vec<f64> = read(&d.path().join("o"), "activation.csv")
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(got, vec![0.0, 0.0, 1.0, 1.0]);
}

#[test]
fn eval_without_parameter_file_fails() {
    let (d, cfg) = setup("[eval]\nparams = \"missing.toml\"\n");
    let out = eoattn(
        d.path(),
        &["eval", "--config", cfg.to_str().unwrap(), "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
}

#[test]
fn hwmodel_golden_rows() {
    let (d, cfg) = setup("[hwmodel]\nn = [64, 2048]\n");
    let out = eoattn(
        d.path(),
        &["hwmodel", "--config", cfg.to_str().unwrap(), "--out", "o"],
    );
    assert!(out.status.success());
    let csv = read(&d.path().join("o"), "perf.csv");
    let lat = |arch: &str, n: &str| -> f64 {
        csv.lines()
            .map(|l| l.split(',').collect::<Vec<_>>())
            .find(|f| f[0] == arch && f[1] == n)
            .unwrap()[3]
            .parse()
            .unwrap()
    };
    assert!((lat("optmax", "64") / 1.3e-8 - 1.0).abs() < 0.03);
    assert!((lat("optmax", "2048") / 4.1e-7 - 1.0).abs() < 0.01);
    assert!(d.path().join("o/latency.svg").exists());
    assert!(read(&d.path().join("o"), "comparison.csv").contains("VEXP,2.2e-7,5e-8,false"));
}

#[test]
fn train_ten_steps() {
    let (d, cfg) = setup(
        "seed = 5\n[train]\ntask = { kind = \"synthetic_patches\", size = 64, val_size = 16 }\n\
         nonlinearity = { kind = \"optmax\" }\nschedule = { steps = 10, batch_size = 8, lr = 1e-3 }\n",
    );
    let out = eoattn(
        d.path(),
        &["train", "--config", cfg.to_str().unwrap(), "--out", "o"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(&d.path().join("o"), "metrics.csv");
    let steps: Vec<usize> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(steps, (0..10).collect::<Vec<_>>());
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",5")));
}

#[test]
fn divergence_exits_two_and_keeps_rows() {
    let (d, cfg) = setup(
        "[train]\ntask = { kind = \"synthetic_patches\", size = 32, val_size = 8 }\n\
         nonlinearity = { kind = \"softmax\" }\nschedule = { steps = 50, batch_size = 8, lr = 1e30 }\n",
    );
    let out = eoattn(
        d.path(),
        &["train", "--config", cfg.to_str().unwrap(), "--out", "o"],
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
    let rows = read(&d.path().join("o"), "metrics.csv").lines().count() - 1;
    assert!((1..50).contains(&rows), "{rows}");
}

#[test]
fn sigproc_histogram_counts() {
    let (d, cfg) = setup(
        "[sigproc]\nnoise = { mode = \"additive\", sigma = 0.05, reference = \"signal_max\" }\n",
    );
    let out = eoattn(
        d.path(),
        &["sigproc", "--config", cfg.to_str().unwrap(), "--out", "o"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let hist = read(&d.path().join("o"), "histogram.csv");
    let total: usize = hist
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 2048);
}

#[test]
fn sweep_bits_axis() {
    let (d, cfg) = setup(
        "[sweep]\ntask = { kind = \"synthetic_patches\", size = 32, val_size = 16 }\n\
         nonlinearity = { kind = \"optmoid\" }\nschedule = { steps = 3, batch_size = 8 }\n\
         axis = \"bits\"\nvalues = [\"inf\", 8, 4]\n",
    );
    let out = eoattn(
        d.path(),
        &["sweep", "--config", cfg.to_str().unwrap(), "--out", "o"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(&d.path().join("o"), "sweep.csv");
    assert_eq!(csv.lines().count(), 1 + 9);
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("bits,inf,val_accuracy,"));
}

#[test]
fn config_errors_exit_one() {
    let (d, cfg) = setup("[hwmodel]\nn = [64]\nbogus = true\n");
    let out = eoattn(
        d.path(),
        &["hwmodel", "--config", cfg.to_str().unwrap(), "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let (d, cfg) = setup("[sweep]\ntask = { kind = \"synthetic_patches\" }\nnonlinearity = { kind = \"softmax\" }\naxis = \"sigma\"\nvalues = [\"loud\"]\n");
    let out = eoattn(
        d.path(),
        &["sweep", "--config", cfg.to_str().unwrap(), "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn output_directory_override() {
    let (d, cfg) = setup("[output]\ndir = \"from_config\"\n[hwmodel]\nn = [64]\n");
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(BIN);
        c.args(["hwmodel", "--config", cfg.to_str().unwrap()])
            .current_dir(d.path())
            .env_remove("EOATTN_OUT");
        if let Some(e) = env {
            c.env("EOATTN_OUT", e);
        }
        if let Some(f) = flag {
            c.args(["--out", f]);
        }
        assert!(c.output().unwrap().status.success());
    };
    run(None, None);
    assert!(d.path().join("from_config/perf.csv").exists());
    run(Some("from_env"), None);
    assert!(d.path().join("from_env/perf.csv").exists());
    run(Some("from_env2"), Some("from_flag"));
    assert!(d.path().join("from_flag/perf.csv").exists() && !d.path().join("from_env2").exists());
}

#[test]
fn timestamp_is_opt_in() {
    let (d, cfg) = setup("[output]\ntimestamp = true\n[hwmodel]\nn = [64, 128]\n");
    assert!(eoattn(
        d.path(),
        &["hwmodel", "--config", cfg.to_str().unwrap(), "--out", "o"]
    )
    .status
    .success());
    assert!(read(&d.path().join("o"), "latency.svg").contains("<!-- generated"));
    let (d, cfg) = setup("[hwmodel]\nn = [64, 128]\n");
    assert!(eoattn(
        d.path(),
        &["hwmodel", "--config", cfg.to_str().unwrap(), "--out", "o"]
    )
    .status
    .success());
    assert!(!read(&d.path().join("o"), "latency.svg").contains("generated"));
}
