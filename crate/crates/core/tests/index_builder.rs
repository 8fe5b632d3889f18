mod common;

use aei_backtest::index::{build_fc, build_pca, build_pls, IndexOptions, Method};
use aei_backtest::stats::{self, correlation};
use aei_backtest::synth::panel_from_columns;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{factor_panel, noise_panel};

fn opts() -> IndexOptions {
    IndexOptions::default()
}

#[test]
fn pls_recovers_planted_factor() {
    let s = factor_panel(600, 1.0, 11);
    let fit = build_pls(&s.panel, 599, &opts()).unwrap();
    let c = correlation(&fit.series, &s.truth.mu);
    assert!(c >= 0.9, "corr(E, mu) = {c}");
}

#[test]
fn pca_recovers_planted_factor() {
    let s = factor_panel(600, 1.0, 12);
    let fit = build_pca(&s.panel, 599, &opts()).unwrap();
    let c = correlation(&fit.series, &s.truth.mu).abs();
    assert!(c >= 0.9, "corr(PC1, mu) = {c}");
}

#[test]
fn pls_on_pure_noise_is_inside_permutation_band() {
    let panel = noise_panel(300, 16, 5);
    let t = 299;
    let fit = build_pls(&panel, t, &opts()).unwrap();

    // First-pass loadings: none should look significant.
    for i in 0..16 {
        let z = &panel.predictor(i)[..t];
        let f = stats::ols(&panel.r_simple[1..=t], z);
        assert!((f.beta / f.se_beta).abs() < 3.0, "predictor {i} t-stat {}", f.beta / f.se_beta);
    }

    let stat = |series: &[f64], r: &[f64]| correlation(&series[..t], &r[1..=t]).abs();
    let observed = stat(&fit.series, &panel.r_simple);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut null: Vec<f64> = (0..500)
        .map(|_| {
            let mut p = panel.clone();
            p.r_simple.shuffle(&mut rng);
            let f = build_pls(&p, t, &opts()).unwrap();
            stat(&f.series, &p.r_simple)
        })
        .collect();
    null.sort_by(f64::total_cmp);
    let band = null[(0.95 * null.len() as f64) as usize];
    assert!(observed < band, "observed {observed} vs 95% band {band}");
}

#[test]
fn builders_are_recursively_pure() {
    let s = factor_panel(400, 1.0, 3);
    for method in Method::ALL {
        for t in [60, 150, 299, 398] {
            let truncated = s.panel.truncated_through(s.panel.dates()[t]);
            let full = aei_backtest::index::build(method, &s.panel, t, &opts()).unwrap();
            let cut = aei_backtest::index::build(method, &truncated, t, &opts()).unwrap();
            assert_eq!(full, cut, "{method:?} at {t}");
        }
    }
}

#[test]
fn scale_invariance() {
    let s = factor_panel(300, 1.0, 21);
    let mut scaled = s.panel.clone();
    for (i, k) in [(0, 7.3), (5, 0.01), (15, 1e3)] {
        scaled.predictor_mut(i).iter_mut().for_each(|v| *v *= k);
    }
    let t = 299;
    for (a, b) in [
        (build_pls(&s.panel, t, &opts()).unwrap(), build_pls(&scaled, t, &opts()).unwrap()),
        (build_pca(&s.panel, t, &opts()).unwrap(), build_pca(&scaled, t, &opts()).unwrap()),
    ] {
        for (x, y) in a.series.iter().zip(&b.series) {
            assert!((x - y).abs() < 1e-10, "{:?}: {x} vs {y}", a.method);
        }
    }
    let a = build_fc(&s.panel, t, &opts()).unwrap().value;
    let b = build_fc(&scaled, t, &opts()).unwrap().value;
    assert!((a - b).abs() < 1e-10);
}

#[test]
fn pca_sign_follows_returns() {
    let s = factor_panel(300, 1.0, 8);
    let mut neg = s.panel.clone();
    neg.r_simple.iter_mut().for_each(|v| *v = -*v);
    let a = build_pca(&s.panel, 299, &opts()).unwrap();
    let b = build_pca(&neg, 299, &opts()).unwrap();
    for (x, y) in a.series.iter().zip(&b.series) {
        assert_eq!(*x, -*y);
    }
    let slope = stats::ols(&a.series[..299], &s.panel.r_simple[1..=299]).beta;
    assert!(slope >= 0.0);
}

/// Closed-form univariate OLS forecast, kept independent of the library.
fn hand_forecast(x: &[f64], y: &[f64], x_now: f64) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = sxy / sxx;
    my - b * mx + b * x_now
}

#[test]
fn fc_with_perfect_foresight_plant() {
    let noise = noise_panel(200, 16, 17);
    let r = noise.r_simple.clone();
    let t = 150;
    let mut cols: Vec<Vec<f64>> = (0..16).map(|i| noise.predictor(i).to_vec()).collect();
    cols[0] = (0..200).map(|s| if s + 1 < 200 { r[s + 1] } else { 0.0 }).collect();
    let panel = panel_from_columns(cols.clone(), r.clone());
    let fc = build_fc(&panel, t, &opts()).unwrap().value;

    let y = &r[1..=t];
    let plant = hand_forecast(&cols[0][..t], y, cols[0][t]);
    assert!((plant - r[t + 1]).abs() < 1e-12);
    let others: f64 = (1..16).map(|i| hand_forecast(&cols[i][..t], y, cols[i][t])).sum();
    let expect = (r[t + 1] + others) / 16.0;
    assert!((fc - expect).abs() < 1e-12, "{fc} vs {expect}");
}

#[test]
fn fc_single_predictor_is_its_univariate_forecast() {
    let noise = noise_panel(120, 1, 4);
    let t = 100;
    let fc = build_fc(&noise, t, &opts()).unwrap().value;
    let expect = hand_forecast(&noise.predictor(0)[..t], &noise.r_simple[1..=t], noise.predictor(0)[t]);
    assert!((fc - expect).abs() < 1e-14);
}

#[test]
fn loadings_dump_has_one_row_per_date() {
    let s = factor_panel(200, 1.0, 2);
    let idx = aei_backtest::index::EconomicIndex::build(&s.panel, Method::Pls, 100..110, &opts()).unwrap();
    let mut buf = Vec::new();
    idx.write_loadings_to(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 17);
}
