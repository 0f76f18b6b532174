use std::f64::consts::PI;

use eoattn_core::mzm::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn curve(m: &SineTransferModel<f64>, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let v = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (v, m.transmission(v))
        })
        .collect()
}

#[test]
fn noiseless_curves_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = rng.random_range(0.2..1.0);
        let v_pi = rng.random_range(2.0..8.0);
        let c = rng.random_range(-PI..PI);
        let span = 2.0 * v_pi * rng.random_range(1.0..3.0);
        let lo = rng.random_range(-10.0..0.0);
        let w = VoltageWindow::new(lo, lo + span).unwrap();
        let truth = SineTransferModel::new(a, PI / v_pi, c, w).unwrap();
        let samples = curve(&truth, lo, lo + span, 96);
        let fit = fit_transfer(&samples, None, &FitOptions::default()).unwrap();
        for &(v, t) in &samples {
            worst = worst.max((fit.model.transmission(v) - t).abs());
        }
    }
    assert!(worst < 1e-6, "worst deviation {worst}");
}

#[test]
fn csv_round_trip_then_fit() {
    let w = VoltageWindow::new(-6.0, 6.0).unwrap();
    let truth = SineTransferModel::new(0.48, 0.55, 0.3, w).unwrap();
    let text = format_transfer_curve(&curve(&truth, -6.0, 6.0, 64));
    let parsed: Vec<(f64, f64)> = parse_transfer_curve(&text).unwrap();
    let fit = fit_transfer(&parsed, None, &FitOptions::default()).unwrap();
    assert!(fit.residual_norm < 1e-10);
}

proptest! {
    #[test]
    fn transmission_bounded(a in 0.1f64..2.0, b in 0.1f64..3.0, c in -PI..PI, v in -50.0f64..50.0) {
        let m = SineTransferModel::new(a, b, c, VoltageWindow::new(-1.0, 1.0).unwrap()).unwrap();
        let t = m.transmission(v);
        prop_assert!(t >= 0.0 && t <= 2.0 * a + 1e-12);
    }

    #[test]
    fn slope_windows_are_monotone(a in 0.1f64..2.0, v_pi in 0.5f64..10.0, c in -PI..PI, lo in -20.0f64..20.0) {
        let w = VoltageWindow::new(lo, lo + 2.0 * v_pi).unwrap();
        let m = SineTransferModel::new(a, PI / v_pi, c, w).unwrap();
        for (seg, sign) in [(SlopeSegment::Rising, 1.0), (SlopeSegment::Falling, -1.0), (SlopeSegment::FullSwing, 1.0)] {
            let r = m.slope_window(seg).unwrap();
            for i in 0..=32 {
                let v = r.v_min + r.width() * i as f64 / 32.0;
                prop_assert!(sign * m.slope(v) >= -1e-9);
            }
        }
    }

    #[test]
    fn encoder_hits_window_ends(w_min in -10.0f64..10.0, width in 0.01f64..10.0, v_min in -5.0f64..5.0, vw in 0.1f64..5.0) {
        let win = VoltageWindow::new(v_min, v_min + vw).unwrap();
        let e = AffineEncoder::new(w_min, w_min + width, win).unwrap();
        prop_assert!((e.encode(w_min) - v_min).abs() < 1e-12);
        prop_assert!((e.encode(w_min + width) - (v_min + vw)).abs() < 1e-9);
    }
}
