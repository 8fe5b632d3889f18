//! One-step-ahead excess-return forecasts: one-state and state-switching
//! predictive regressions on the index, and the historical-mean benchmark.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::PredictorPanel;
use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::index::{self, IndexFit, IndexOptions, Method};
use crate::state::{MarketState, StateSeries};
use crate::stats::{self, OlsFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    OneState,
    Switching,
    HistMean,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::OneState => "one-state",
            Model::Switching => "switching",
            Model::HistMean => "histmean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastOptions {
    /// Fewer training pairs than this in a state falls back to the pooled fit.
    pub min_state_obs: usize,
    /// Replace negative forecasts by zero.
    pub truncate_negative: bool,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        Self {
            min_state_obs: 24,
            truncate_negative: false,
        }
    }
}

/// Intercepts and slopes in force at one formation date. One-state fits report the
/// pooled pair under both states; FC and the historical mean report NaN.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Coefficients {
    pub alpha_up: f64,
    pub beta_up: f64,
    pub alpha_down: f64,
    pub beta_down: f64,
}

impl Coefficients {
    const NONE: Self = Self {
        alpha_up: f64::NAN,
        beta_up: f64::NAN,
        alpha_down: f64::NAN,
        beta_down: f64::NAN,
    };

    fn pooled(fit: &OlsFit) -> Self {
        Self {
            alpha_up: fit.alpha,
            beta_up: fit.beta,
            alpha_down: fit.alpha,
            beta_down: fit.beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSeries {
    pub model: Model,
    pub method: Option<Method>,
    /// Months being forecast (formation month + 1).
    pub dates: Vec<YearMonth>,
    pub fhat: Vec<f64>,
    pub realized: Vec<f64>,
    pub state_at_formation: Vec<MarketState>,
    pub coefficients: Vec<Coefficients>,
    /// Index loadings per formation date (empty for FC and the historical mean).
    pub loadings: Vec<Vec<f64>>,
}

impl ForecastSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn name(&self) -> String {
        match self.method {
            Some(m) => format!("{}-{}", m.as_str(), self.model.as_str()),
            None => self.model.as_str().to_string(),
        }
    }

    /// `yyyymm,fhat,realized,state`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["yyyymm", "fhat", "realized", "state"])?;
        for i in 0..self.len() {
            wtr.write_record([
                self.dates[i].to_string(),
                self.fhat[i].to_string(),
                self.realized[i].to_string(),
                self.state_at_formation[i].as_str().to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Predictive regression of `r_{s+1}` on `E_s` over `s < t`, evaluated at `E_t`.
/// FC fits already carry a forecast, which is passed through.
pub fn forecast_one_state(fit: &IndexFit, panel: &PredictorPanel, opts: &IndexOptions) -> (f64, Coefficients) {
    if fit.method == Method::Fc {
        return (fit.value, Coefficients::NONE);
    }
    let t = fit.t;
    let ols = stats::ols(&fit.series[..t], &opts.target(panel)[1..=t]);
    if ols.degenerate {
        log::warn!("{}: index constant over window, forecast is the window mean", panel.dates()[t]);
    }
    (ols.predict(fit.value), Coefficients::pooled(&ols))
}

/// Separate regressions for Up and Down training months (state at `s`), evaluated
/// with the coefficients of the state at `t`.
///
/// `updown` is aligned with the panel rows.
pub fn forecast_switching(
    fit: &IndexFit,
    updown: &[MarketState],
    panel: &PredictorPanel,
    opts: &IndexOptions,
    fopts: &ForecastOptions,
) -> (f64, Coefficients) {
    let t = fit.t;
    let now = updown[t];
    let count = |st: MarketState| updown[..t].iter().filter(|s| **s == st).count();
    let enough = |st: MarketState| {
        let n = count(st);
        if n < fopts.min_state_obs {
            log::warn!(
                "{}: only {n} {} months in window, using pooled fit for that state",
                panel.dates()[t],
                st.as_str()
            );
            false
        } else {
            true
        }
    };

    if fit.method == Method::Fc {
        let value = if enough(now) {
            index::fc_forecast(panel, t, opts, |s| updown[s] == now)
        } else {
            fit.value
        };
        return (value, Coefficients::NONE);
    }

    let target = opts.target(panel);
    let pooled = || stats::ols(&fit.series[..t], &target[1..=t]);
    let fit_state = |st: MarketState| {
        if !enough(st) {
            return pooled();
        }
        let (x, y): (Vec<f64>, Vec<f64>) = (0..t).filter(|&s| updown[s] == st).map(|s| (fit.series[s], target[s + 1])).unzip();
        stats::ols(&x, &y)
    };
    let up = fit_state(MarketState::Up);
    let down = fit_state(MarketState::Down);
    let coefs = Coefficients {
        alpha_up: up.alpha,
        beta_up: up.beta,
        alpha_down: down.alpha,
        beta_down: down.beta,
    };
    let value = match now {
        MarketState::Up => up.predict(fit.value),
        MarketState::Down => down.predict(fit.value),
    };
    (value, coefs)
}

/// Expanding-window mean of the target over rows `0..=t`.
pub fn forecast_histmean(panel: &PredictorPanel, t: usize, opts: &IndexOptions) -> Result<f64> {
    if t >= panel.len() {
        return Err(Error::Numeric(format!("row {t} outside panel")));
    }
    Ok(stats::mean(&opts.target(panel)[..=t]))
}

/// Aligns market states to panel rows by date.
pub fn align_states(panel: &PredictorPanel, states: &StateSeries) -> Result<Vec<MarketState>> {
    panel
        .dates()
        .iter()
        .map(|d| states.state_at(*d).ok_or_else(|| Error::data(d, "no market state for this month")))
        .collect()
}

/// Recursive out-of-sample forecasts for every month in `[oos_start, oos_end]`.
///
/// The index is re-estimated at every formation month. Months are independent
/// and evaluated in parallel; the output does not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn run_oos(
    panel: &PredictorPanel,
    states: &StateSeries,
    method: Option<Method>,
    model: Model,
    oos_start: YearMonth,
    oos_end: YearMonth,
    opts: &IndexOptions,
    fopts: &ForecastOptions,
) -> Result<ForecastSeries> {
    if oos_end < oos_start {
        return Err(Error::Config(format!("OOS end {oos_end} precedes start {oos_start}")));
    }
    if model != Model::HistMean && method.is_none() {
        return Err(Error::Config(format!("model {} needs an index method", model.as_str())));
    }
    let first = panel.index_of(oos_start).filter(|&j| j > 0).ok_or_else(|| Error::Window {
        date: oos_start,
        cause: "panel does not cover the month before the OOS start".into(),
    })?;
    let last = panel.index_of(oos_end).ok_or_else(|| Error::Window {
        date: oos_end,
        cause: "panel does not cover the OOS end".into(),
    })?;
    let updown = align_states(&panel.truncated_through(panel.dates()[last - 1]), states)?;
    let target = opts.target(panel);

    let rows: Vec<(f64, Coefficients, Vec<f64>)> = (first..=last)
        .into_par_iter()
        .map(|j| {
            let t = j - 1;
            let (f, coefs, loadings) = match (model, method) {
                (Model::HistMean, _) => (forecast_histmean(panel, t, opts)?, Coefficients::NONE, Vec::new()),
                (_, Some(m)) => {
                    let fit = index::build(m, panel, t, opts)?;
                    let (f, c) = match model {
                        Model::OneState => forecast_one_state(&fit, panel, opts),
                        _ => forecast_switching(&fit, &updown, panel, opts, fopts),
                    };
                    (f, c, fit.loadings)
                }
                (_, None) => unreachable!("checked above"),
            };
            let f = if fopts.truncate_negative { f.max(0.0) } else { f };
            Ok((f, coefs, loadings))
        })
        .collect::<Result<_>>()?;

    let mut out = ForecastSeries {
        model,
        method: if model == Model::HistMean { None } else { method },
        dates: panel.dates()[first..=last].to_vec(),
        fhat: Vec::with_capacity(rows.len()),
        realized: target[first..=last].to_vec(),
        state_at_formation: updown[first - 1..last].to_vec(),
        coefficients: Vec::with_capacity(rows.len()),
        loadings: Vec::with_capacity(rows.len()),
    };
    for (f, c, l) in rows {
        out.fhat.push(f);
        out.coefficients.push(c);
        out.loadings.push(l);
    }
    Ok(out)
}

/// Out-of-sample R² against a benchmark, optionally over the months where `mask` is true.
pub fn r2_oos(f: &ForecastSeries, bench: &ForecastSeries, mask: Option<&[bool]>) -> Result<f64> {
    if f.dates != bench.dates {
        return Err(Error::Numeric("forecast series are not aligned".into()));
    }
    let mut sse = 0.0;
    let mut sse_b = 0.0;
    for i in 0..f.len() {
        if mask.is_none_or(|m| m[i]) {
            sse += (f.realized[i] - f.fhat[i]).powi(2);
            sse_b += (bench.realized[i] - bench.fhat[i]).powi(2);
        }
    }
    if !(sse_b > 0.0) {
        return Err(Error::Numeric("benchmark squared error is zero; R²_oos undefined".into()));
    }
    Ok(1.0 - sse / sse_b)
}
