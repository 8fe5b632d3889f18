//! Synthetic panels with a planted factor and a two-state Markov regime.
//!
//! Draw order per month is fixed (factor shock, regime transition, predictor
//! noise, return noise, slope magnitude) and the generator is ChaCha8, so a seed
//! reproduces the same panel on every platform.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::PredictorPanel;
use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::state::{classify_updown, MarketState, StateSeries};

/// Identifies the random stream layout. Bump when the draw order changes.
pub const RNG_VERSION: &str = "chacha8-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// Number of months.
    pub months: usize,
    pub n_pred: usize,
    /// AR(1) coefficient of the latent factor.
    pub persistence: f64,
    /// Unconditional standard deviation of the latent factor.
    pub factor_sd: f64,
    /// Per-predictor exposures; `None` uses alternating-sign exposures between 0.5 and 1.5.
    pub loadings: Option<Vec<f64>>,
    /// Idiosyncratic predictor noise.
    pub noise_sd: f64,
    /// Unconditional mean excess return.
    pub premium: f64,
    pub ret_noise_sd: f64,
    pub beta_up: f64,
    pub beta_dn: f64,
    /// Row-stochastic transition matrix over (Up, Down).
    pub transition: [[f64; 2]; 2],
    /// Monthly risk-free return.
    pub rf: f64,
    pub start: YearMonth,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            months: 729,
            n_pred: 16,
            persistence: 0.9,
            factor_sd: 0.01,
            loadings: None,
            noise_sd: 0.01,
            premium: 0.005,
            ret_noise_sd: 0.04,
            beta_up: 0.8,
            beta_dn: -0.4,
            transition: [[0.95, 0.05], [0.15, 0.85]],
            rf: 0.003,
            start: YearMonth::new(1960, 1).expect("valid month"),
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.months < 120 {
            return bad(format!("months = {} < 120", self.months));
        }
        if self.n_pred == 0 {
            return bad("n_pred must be positive".into());
        }
        if !(self.persistence.abs() < 1.0) {
            return bad(format!("|persistence| = {} must be < 1", self.persistence.abs()));
        }
        for row in &self.transition {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row[0] + row[1] - 1.0).abs() > 1e-12 {
                return bad(format!("transition row {row:?} is not a probability vector"));
            }
        }
        if let Some(l) = &self.loadings {
            if l.len() != self.n_pred {
                return bad(format!("{} loadings for {} predictors", l.len(), self.n_pred));
            }
        }
        for (name, v) in [("factor_sd", self.factor_sd), ("noise_sd", self.noise_sd), ("ret_noise_sd", self.ret_noise_sd)] {
            if !(v >= 0.0) {
                return bad(format!("{name} must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn loadings(&self) -> Vec<f64> {
        self.loadings.clone().unwrap_or_else(|| default_loadings(self.n_pred))
    }

    /// Stationary probability of the Up state.
    pub fn stationary_up(&self) -> f64 {
        let p_ud = self.transition[0][1];
        let p_du = self.transition[1][0];
        if p_ud + p_du == 0.0 {
            1.0
        } else {
            p_du / (p_ud + p_du)
        }
    }
}

fn default_loadings(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let mag = 0.5 + i as f64 / (n - 1) as f64;
            if i % 2 == 0 {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub mu: Vec<f64>,
    pub states: Vec<MarketState>,
    pub loadings: Vec<f64>,
    pub beta_up: f64,
    pub beta_dn: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub panel: PredictorPanel,
    pub states: StateSeries,
    pub truth: GroundTruth,
}

pub fn generate(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.months;
    let loadings = spec.loadings();
    let shock_sd = spec.factor_sd * (1.0 - spec.persistence * spec.persistence).sqrt();
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    let mut mu = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut x = vec![Vec::with_capacity(n); spec.n_pred];
    let mut r = Vec::with_capacity(n);
    let mut slope = Vec::with_capacity(n);

    let mut m = spec.factor_sd * normal(&mut rng);
    let u: f64 = rng.gen();
    let mut s = if u < spec.stationary_up() { MarketState::Up } else { MarketState::Down };
    for t in 0..n {
        if t > 0 {
            m = spec.persistence * m + shock_sd * normal(&mut rng);
            let row = match s {
                MarketState::Up => 0,
                MarketState::Down => 1,
            };
            let u: f64 = rng.gen();
            s = if u < spec.transition[row][0] { MarketState::Up } else { MarketState::Down };
        }
        for (col, l) in x.iter_mut().zip(&loadings) {
            col.push(l * m + spec.noise_sd * normal(&mut rng));
        }
        // r_t is driven by last month's factor and state.
        let e = spec.ret_noise_sd * normal(&mut rng);
        let drift = match (mu.last(), states.last()) {
            (Some(&pm), Some(&MarketState::Up)) => spec.beta_up * pm,
            (Some(&pm), Some(&MarketState::Down)) => spec.beta_dn * pm,
            _ => 0.0,
        };
        r.push(spec.premium + drift + e);
        let mag: f64 = rng.gen();
        slope.push(match s {
            MarketState::Up => 0.005 + 0.02 * mag,
            MarketState::Down => -(0.001 + 0.01 * mag),
        });
        mu.push(m);
        states.push(s);
    }

    let dates: Vec<YearMonth> = (0..n).map(|i| spec.start.add_months(i as i64)).collect();
    let rf = vec![spec.rf; n];
    let market: Vec<f64> = r.iter().map(|v| (1.0 + v) * (1.0 + spec.rf) - 1.0).collect();
    let r_log: Vec<f64> = r.iter().map(|v| v.ln_1p()).collect();
    let names = (1..=spec.n_pred).map(|i| format!("x{i:02}")).collect();
    let panel = PredictorPanel::new(dates.clone(), names, x, r_log, r, slope.clone(), rf, market)?;
    let state_series = classify_updown(&dates, &slope)?;
    debug_assert_eq!(state_series.updown, states);
    Ok(Synthetic {
        panel,
        states: state_series,
        truth: GroundTruth {
            mu,
            states,
            loadings,
            beta_up: spec.beta_up,
            beta_dn: spec.beta_dn,
        },
    })
}

/// Writes `yyyymm,usrec` with Down months labelled 1, so synthetic runs exercise the
/// recession/expansion split.
pub fn write_state_labels<W: Write>(states: &StateSeries, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["yyyymm", "usrec"])?;
    for (d, s) in states.dates.iter().zip(&states.updown) {
        wtr.write_record([d.to_string(), u8::from(*s == MarketState::Down).to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Panel with the given predictor columns and simple excess returns, monthly from
/// 1950:01, a constant 0.3% bill return and a flat positive yield slope.
pub fn panel_from_columns(cols: Vec<Vec<f64>>, r_simple: Vec<f64>) -> PredictorPanel {
    let n = r_simple.len();
    let start = YearMonth::new(1950, 1).expect("valid month");
    let dates = (0..n).map(|i| start.add_months(i as i64)).collect();
    let names = (1..=cols.len()).map(|i| format!("x{i:02}")).collect();
    let rf = vec![0.003; n];
    let market = r_simple.iter().map(|v| (1.0 + v) * 1.003 - 1.0).collect();
    let r_log = r_simple.iter().map(|v| v.ln_1p()).collect();
    PredictorPanel::new(dates, names, cols, r_log, r_simple, vec![0.01; n], rf, market).expect("consistent columns")
}
