#![allow(dead_code)]

use std::fmt::Write as _;

use aei_backtest::data::PredictorPanel;
use aei_backtest::date::YearMonth;
use aei_backtest::synth::{self, SynthSpec, Synthetic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const RAW_HEADER: &str = "yyyymm,Index,D12,E12,b/m,tbl,lty,ltr,AAA,BAA,corpr,ntis,infl,rvol,CRSP_SPvw,Rfree,y10";

/// Raw-layout CSV text with smooth, plausible values for `n` months from `start`.
pub fn raw_csv(start: YearMonth, n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from(RAW_HEADER);
    out.push('\n');
    let mut index = 20.0;
    for i in 0..n {
        let d = start.add_months(i as i64);
        let z = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
        let ret = 0.008 + 0.04 * z(&mut rng);
        index *= 1.0 + ret - 0.003;
        let tbl = 0.04 + 0.02 * (i as f64 / 50.0).sin();
        let lty = tbl + 0.012 + 0.01 * (i as f64 / 37.0).cos();
        let y10 = lty - 0.001;
        writeln!(
            out,
            "{d},{index:.4},{:.4},{:.4},{:.4},{tbl:.5},{lty:.5},{:.5},{:.5},{:.5},{:.5},{:.5},{:.5},{:.5},{ret:.6},{:.6},{y10:.5}",
            index * (0.03 + 0.002 * z(&mut rng).abs()),
            index * (0.06 + 0.004 * z(&mut rng).abs()),
            0.5 + 0.1 * z(&mut rng),
            0.004 + 0.02 * z(&mut rng),
            0.05 + 0.01 * (i as f64 / 60.0).sin(),
            0.07 + 0.015 * (i as f64 / 60.0).sin().abs(),
            0.004 + 0.02 * z(&mut rng),
            0.01 + 0.01 * z(&mut rng),
            0.003 + 0.003 * z(&mut rng),
            0.15 + 0.03 * z(&mut rng).abs(),
            tbl / 12.0,
        )
        .unwrap();
    }
    out
}

/// One-factor panel: `x_i = l_i * mu + noise`, `r_{t+1} = beta(s_t) * mu_t + e`.
pub fn factor_panel(months: usize, noise_sd: f64, seed: u64) -> Synthetic {
    synth::generate(&SynthSpec {
        months,
        persistence: 0.5,
        factor_sd: 1.0,
        noise_sd,
        premium: 0.0,
        ret_noise_sd: 1.0,
        beta_up: 1.0,
        beta_dn: 1.0,
        rf: 0.0,
        seed,
        ..Default::default()
    })
    .unwrap()
}

pub fn noise_panel(months: usize, n_pred: usize, seed: u64) -> PredictorPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = (0..n_pred)
        .map(|_| (0..months).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let r = (0..months).map(|_| 0.005 + 0.04 * rng.sample::<f64, _>(StandardNormal)).collect();
    synth::panel_from_columns(cols, r)
}
