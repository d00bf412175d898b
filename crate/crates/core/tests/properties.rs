use chrono::NaiveDate;
use fbe_core::ensemble::{build_ensemble, make_forecast, BootstrapConfig};
use fbe_core::fitter::{multistart_fit, multistart_fit_window, FitConfig};
use fbe_core::lppl::{evaluate, LpplParams};
use fbe_core::scanner::{enumerate_windows, scan, select_candidates, successful_fits, ScanConfig};
use fbe_core::timeseries::{offset_to_date, PricePoint, PriceSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn origin() -> NaiveDate {
    NaiveDate::from_ymd_opt(2011, 2, 1).unwrap()
}

fn qualified_draw(rng: &mut ChaCha8Rng, days: i64) -> LpplParams {
    let t2 = (days - 1) as f64;
    let tc = t2 + rng.random_range(20.0..80.0);
    let alpha = rng.random_range(0.1..0.9);
    let rise: f64 = rng.random_range(0.3..1.0);
    let b = -rise / (tc.powf(alpha) - (tc - t2).powf(alpha));
    LpplParams {
        a: rng.random_range(3.0..6.0),
        b,
        c: rng.random_range(0.05..0.2) * b.abs(),
        alpha,
        omega: rng.random_range(2.0..25.0),
        phi: rng.random_range(0.0..std::f64::consts::TAU),
        tc,
    }
}

fn noisy_series(p: &LpplParams, days: i64, sigma: f64, rng: &mut ChaCha8Rng) -> PriceSeries {
    let noise = Normal::new(0.0, sigma).unwrap();
    let pts = (0..days)
        .map(|i| PricePoint {
            date: offset_to_date(origin(), i),
            price: (evaluate(p, i as f64).unwrap() + noise.sample(rng)).exp(),
        })
        .collect();
    PriceSeries::new("P", pts).unwrap()
}

/// Log-periodic cycles the oscillation completes over `[0, t2]`.
fn cycles(p: &LpplParams, t2: f64) -> f64 {
    p.omega * (p.tc / (p.tc - t2)).ln() / std::f64::consts::TAU
}

/// A qualified draw whose oscillation is visible: at least two cycles in
/// the window.
fn visible_bubble(rng: &mut ChaCha8Rng, days: i64) -> LpplParams {
    loop {
        let p = qualified_draw(rng, days);
        if cycles(&p, (days - 1) as f64) >= 2.0 {
            return p;
        }
    }
}

#[test]
fn noisy_fits_locate_tc_within_five_days() {
    let mut rng = ChaCha8Rng::seed_from_u64(515);
    let cfg = FitConfig::default();
    let mut hits = 0;
    for _ in 0..50 {
        let truth = visible_bubble(&mut rng, 500);
        let series = noisy_series(&truth, 500, 0.01, &mut rng);
        if let Ok(f) = multistart_fit(&series, &cfg) {
            if (f.params.tc - truth.tc).abs() <= 5.0 {
                hits += 1;
            }
        }
    }
    assert!(hits >= 45, "only {hits}/50 fits within 5 days");
}

#[test]
fn window_fit_matches_fit_of_slice() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let truth = qualified_draw(&mut rng, 400);
    let series = noisy_series(&truth, 400, 0.005, &mut rng);
    let sub = series.slice(100, 399).unwrap();
    let cfg = FitConfig::default();
    let a = multistart_fit_window(&sub, (100, 399), &cfg).unwrap();
    let b = multistart_fit(&sub, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn scan_count_and_forecast_determinism() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let truth = qualified_draw(&mut rng, 360);
    let series = noisy_series(&truth, 360, 0.01, &mut rng);
    let scan_cfg = ScanConfig {
        dt1: 35,
        n_t2: 2,
        top_k: 3,
        ..ScanConfig::default()
    };
    let fit_cfg = FitConfig::default();
    let results = scan(&series, &scan_cfg, &fit_cfg).unwrap();
    assert_eq!(results.len(), enumerate_windows(&series, &scan_cfg).len());

    let cands = select_candidates(&successful_fits(&results), scan_cfg.top_k);
    assert!(!cands.is_empty());
    let boot = BootstrapConfig {
        seed: 4,
        ..BootstrapConfig::default()
    };
    let first = build_ensemble(&cands, &series, &boot, &fit_cfg).unwrap();
    let second = build_ensemble(&cands, &series, &boot, &fit_cfg).unwrap();
    let bits = |e: &fbe_core::ensemble::Ensemble| -> Vec<u64> {
        e.members
            .iter()
            .map(|m| m.fit.params.tc.to_bits())
            .collect()
    };
    assert_eq!(bits(&first), bits(&second));
    assert_eq!(make_forecast(&first), make_forecast(&second));
    assert!(first.len() >= cands.len() && first.len() <= cands.len() * (1 + boot.n_bootstrap));
}
