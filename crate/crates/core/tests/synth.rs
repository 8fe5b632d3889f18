use aei_backtest::state::MarketState;
use aei_backtest::stats;
use aei_backtest::synth::{generate, write_state_labels, SynthSpec, RNG_VERSION};

fn up_share(states: &[MarketState]) -> f64 {
    states.iter().filter(|s| **s == MarketState::Up).count() as f64 / states.len() as f64
}

#[test]
fn independent_states_match_stationary_share() {
    // Identical rows make the chain i.i.d., so the binomial SE is exact.
    let spec = SynthSpec { months: 5000, transition: [[0.75, 0.25], [0.75, 0.25]], seed: 1, ..Default::default() };
    let s = generate(&spec).unwrap();
    let p = spec.stationary_up();
    assert_eq!(p, 0.75);
    let se = (p * (1.0 - p) / 5000.0).sqrt();
    let share = up_share(&s.truth.states);
    assert!((share - p).abs() < 3.0 * se, "{share} vs {p} ± {se}");
}

#[test]
fn persistent_states_match_stationary_share() {
    let spec = SynthSpec { months: 5000, seed: 2, ..Default::default() };
    let s = generate(&spec).unwrap();
    let p = spec.stationary_up();
    assert!((p - 0.75).abs() < 1e-15);
    // A two-state chain with second eigenvalue lambda inflates the variance of the
    // sample share by (1 + lambda) / (1 - lambda).
    let lambda = 1.0 - spec.transition[0][1] - spec.transition[1][0];
    let se = (p * (1.0 - p) / 5000.0 * (1.0 + lambda) / (1.0 - lambda)).sqrt();
    let share = up_share(&s.truth.states);
    assert!((share - p).abs() < 3.0 * se, "{share} vs {p} ± {se}");

    let leaves = s.truth.states.windows(2).filter(|w| w[0] == MarketState::Up && w[1] == MarketState::Down).count();
    let ups = s.truth.states[..4999].iter().filter(|x| **x == MarketState::Up).count();
    let q = leaves as f64 / ups as f64;
    assert!((q - 0.05).abs() < 3.0 * (0.05 * 0.95 / ups as f64).sqrt(), "exit rate {q}");
}

#[test]
fn predictor_factor_correlation() {
    let spec = SynthSpec { months: 5000, seed: 3, ..Default::default() };
    let s = generate(&spec).unwrap();
    let var_mu = spec.factor_sd * spec.factor_sd;
    for (i, l) in spec.loadings().iter().enumerate() {
        let pop = l * var_mu.sqrt() / (l * l * var_mu + spec.noise_sd * spec.noise_sd).sqrt();
        let got = stats::correlation(s.panel.predictor(i), &s.truth.mu);
        assert!((got - pop).abs() < 0.05, "x{i}: {got} vs {pop}");
    }
    let sd = stats::variance(&s.truth.mu, stats::Divisor::Sample).sqrt();
    assert!((sd - spec.factor_sd).abs() < 0.1 * spec.factor_sd, "factor sd {sd}");
}

#[test]
fn equal_betas_give_agreeing_slopes() {
    let spec = SynthSpec { months: 3000, beta_up: 0.6, beta_dn: 0.6, seed: 4, ..Default::default() };
    let s = generate(&spec).unwrap();
    let n = spec.months - 1;
    let fit_where = |keep: &dyn Fn(MarketState) -> bool| {
        let idx: Vec<usize> = (0..n).filter(|&i| keep(s.truth.states[i])).collect();
        let x: Vec<f64> = idx.iter().map(|&i| s.truth.mu[i]).collect();
        let y: Vec<f64> = idx.iter().map(|&i| s.panel.r_simple[i + 1]).collect();
        stats::ols(&x, &y)
    };
    let pooled = fit_where(&|_| true);
    let up = fit_where(&|st| st == MarketState::Up);
    let dn = fit_where(&|st| st == MarketState::Down);
    let se = (up.se_beta.powi(2) + dn.se_beta.powi(2)).sqrt();
    assert!((up.beta - dn.beta).abs() < 3.0 * se, "{} vs {}", up.beta, dn.beta);
    assert!((pooled.beta - 0.6).abs() < 3.0 * pooled.se_beta);
}

#[test]
fn deterministic_per_seed() {
    assert_eq!(RNG_VERSION, "chacha8-v1");
    let spec = SynthSpec { months: 200, seed: 9, ..Default::default() };
    assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    let other = SynthSpec { seed: 10, ..spec.clone() };
    assert_ne!(generate(&spec).unwrap().panel, generate(&other).unwrap().panel);
}

#[test]
fn labels_mark_down_months() {
    let s = generate(&SynthSpec { months: 150, seed: 5, ..Default::default() }).unwrap();
    let mut buf = Vec::new();
    write_state_labels(&s.states, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let ones = text.lines().skip(1).filter(|l| l.ends_with(",1")).count();
    let downs = s.truth.states.iter().filter(|x| **x == MarketState::Down).count();
    assert_eq!(ones, downs);
}

#[test]
fn invalid_spec_is_rejected() {
    let bad = SynthSpec { transition: [[0.5, 0.6], [0.1, 0.9]], ..Default::default() };
    assert!(generate(&bad).is_err());
    let bad = SynthSpec { n_pred: 3, loadings: Some(vec![1.0]), ..Default::default() };
    assert!(generate(&bad).is_err());
}
