//! Constrained mean-variance allocation between the market and bills.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::PredictorPanel;
use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::forecast::ForecastSeries;
use crate::stats::{self, Divisor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationConfig {
    /// Relative risk aversion.
    pub gamma: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// Proportional cost per unit of wealth traded, in basis points.
    pub cost_bps: f64,
    /// Months in the rolling variance window.
    pub var_window: usize,
    /// Maximum ratio between consecutive weights.
    pub adjust_cap: f64,
    /// Largest weight reachable in one step from a zero position.
    pub zero_escape: f64,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        Self {
            gamma: 3.0,
            w_min: 0.0,
            w_max: 1.5,
            cost_bps: 50.0,
            var_window: 60,
            adjust_cap: 2.0,
            zero_escape: 0.10,
        }
    }
}

impl AllocationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("allocation: {m}")));
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if !(0.0 <= self.w_min && self.w_min < self.w_max) {
            return bad("need 0 <= w_min < w_max");
        }
        if !(self.cost_bps >= 0.0) {
            return bad("cost_bps must be nonnegative");
        }
        if self.var_window < 12 {
            return bad("var_window must be at least 12 months");
        }
        if !(self.adjust_cap >= 1.0) {
            return bad("adjust_cap must be at least 1");
        }
        if !(self.zero_escape > 0.0) {
            return bad("zero_escape must be positive");
        }
        Ok(())
    }

    pub fn cost_rate(&self) -> f64 {
        self.cost_bps / 10_000.0
    }
}

/// Unbiased variance of the last `window` observations of `history`.
pub fn rolling_variance(history: &[f64], window: usize) -> Result<f64> {
    if window < 2 || history.len() < window {
        return Err(Error::Numeric(format!(
            "rolling variance needs {window} observations, have {}",
            history.len()
        )));
    }
    Ok(stats::variance(&history[history.len() - window..], Divisor::Sample))
}

/// Mean-variance weight `fhat / (gamma * sigma2)`, clamped to the weight range and
/// then to the adjustment band around `w_prev`.
///
/// Returns `(unconstrained target, implemented weight)`. With `w_prev = None` only the
/// range applies; with `w_prev = Some(0)` the weight may rise at most to `zero_escape`.
pub fn optimal_weight(fhat: f64, sigma2: f64, cfg: &AllocationConfig, w_prev: Option<f64>) -> Result<(f64, f64)> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Numeric(format!("variance estimate {sigma2} is not positive")));
    }
    if !fhat.is_finite() {
        return Err(Error::Numeric(format!("forecast {fhat} is not finite")));
    }
    let target = fhat / (cfg.gamma * sigma2);
    let ranged = target.clamp(cfg.w_min, cfg.w_max);
    let w = match w_prev {
        None => ranged,
        Some(p) if p > 0.0 => ranged.clamp(p / cfg.adjust_cap, p * cfg.adjust_cap),
        Some(_) => {
            if ranged > cfg.zero_escape {
                log::debug!("zero position: capping re-entry at {}", cfg.zero_escape);
            }
            ranged.min(cfg.zero_escape)
        }
    };
    Ok((target, w))
}

/// Realised path of one strategy over the out-of-sample months.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationPath {
    pub name: String,
    pub dates: Vec<YearMonth>,
    pub w_target: Vec<f64>,
    /// Weight held over the month.
    pub w: Vec<f64>,
    pub sigma2hat: Vec<f64>,
    /// Fraction of wealth traded at the start of the month.
    pub turnover: Vec<f64>,
    pub r_gross: Vec<f64>,
    pub r_net: Vec<f64>,
    /// Wealth at the end of the month, starting from 1.
    pub wealth: Vec<f64>,
    pub rf: Vec<f64>,
}

impl AllocationPath {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn terminal_wealth(&self) -> f64 {
        self.wealth.last().copied().unwrap_or(1.0)
    }

    /// Range and adjustment-band breaches, one message each.
    pub fn constraint_violations(&self, cfg: &AllocationConfig) -> Vec<String> {
        const TOL: f64 = 1e-12;
        let mut out = Vec::new();
        for (i, &w) in self.w.iter().enumerate() {
            if w < cfg.w_min - TOL || w > cfg.w_max + TOL {
                out.push(format!("{}: weight {w} outside [{}, {}]", self.dates[i], cfg.w_min, cfg.w_max));
            }
            if i > 0 && self.w[i - 1] > 0.0 {
                let ratio = w / self.w[i - 1];
                if ratio < 1.0 / cfg.adjust_cap - TOL || ratio > cfg.adjust_cap + TOL {
                    out.push(format!("{}: weight ratio {ratio} outside adjustment band", self.dates[i]));
                }
            }
        }
        out
    }

    /// `yyyymm,w_target,w,sigma2hat,turnover,r_gross,r_net,wealth`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["yyyymm", "w_target", "w", "sigma2hat", "turnover", "r_gross", "r_net", "wealth"])?;
        for i in 0..self.len() {
            wtr.write_record([
                self.dates[i].to_string(),
                self.w_target[i].to_string(),
                self.w[i].to_string(),
                self.sigma2hat[i].to_string(),
                self.turnover[i].to_string(),
                self.r_gross[i].to_string(),
                self.r_net[i].to_string(),
                self.wealth[i].to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

struct PathBuilder {
    path: AllocationPath,
    cost: f64,
    wealth: f64,
}

impl PathBuilder {
    fn new(name: String, n: usize, cost: f64) -> Self {
        let v = || Vec::<f64>::with_capacity(n);
        Self {
            path: AllocationPath {
                name,
                dates: Vec::with_capacity(n),
                w_target: v(),
                w: v(),
                sigma2hat: v(),
                turnover: v(),
                r_gross: v(),
                r_net: v(),
                wealth: v(),
                rf: v(),
            },
            cost,
            wealth: 1.0,
        }
    }

    /// Weight the previous month's position drifted to by the start of this month.
    fn drifted_weight(&self, market_prev: f64) -> f64 {
        match (self.path.w.last(), self.path.r_gross.last()) {
            (Some(w), Some(rp)) => w * (1.0 + market_prev) / (1.0 + rp),
            _ => 0.0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, date: YearMonth, w_target: f64, w: f64, sigma2: f64, turnover: f64, market: f64, rf: f64) {
        let r_gross = rf + w * (market - rf);
        let r_net = r_gross - self.cost * turnover;
        self.wealth *= 1.0 + r_net;
        let p = &mut self.path;
        p.dates.push(date);
        p.w_target.push(w_target);
        p.w.push(w);
        p.sigma2hat.push(sigma2);
        p.turnover.push(turnover);
        p.r_gross.push(r_gross);
        p.r_net.push(r_net);
        p.wealth.push(self.wealth);
        p.rf.push(rf);
    }
}

fn row_of(panel: &PredictorPanel, date: YearMonth) -> Result<usize> {
    panel.index_of(date).filter(|&j| j > 0).ok_or_else(|| Error::Window {
        date,
        cause: "month (and the month before it) must be in the panel".into(),
    })
}

/// Turns forecasts into a month-by-month portfolio path.
///
/// The variance estimate for month `t+1` uses excess returns through `t`. Turnover
/// is measured against the drifted previous weight, and the opening position is costed.
pub fn run_allocation(f: &ForecastSeries, panel: &PredictorPanel, cfg: &AllocationConfig) -> Result<AllocationPath> {
    cfg.validate()?;
    let mut b = PathBuilder::new(f.name(), f.len(), cfg.cost_rate());
    let mut prev_market = 0.0;
    for (i, &date) in f.dates.iter().enumerate() {
        let j = row_of(panel, date)?;
        let sigma2 = rolling_variance(&panel.r_simple[..j], cfg.var_window).map_err(|e| Error::Window {
            date,
            cause: e.to_string(),
        })?;
        let (target, w) = optimal_weight(f.fhat[i], sigma2, cfg, b.path.w.last().copied())?;
        let turnover = (w - b.drifted_weight(prev_market)).abs();
        b.push(date, target, w, sigma2, turnover, panel.market[j], panel.rf[j]);
        prev_market = panel.market[j];
    }
    Ok(b.path)
}

/// Full market investment from `start` to `end` with no rebalancing. Only the
/// opening purchase is costed.
pub fn run_buy_and_hold(panel: &PredictorPanel, start: YearMonth, end: YearMonth, cfg: &AllocationConfig) -> Result<AllocationPath> {
    let first = row_of(panel, start)?;
    let last = panel.index_of(end).ok_or_else(|| Error::Window {
        date: end,
        cause: "month not in panel".into(),
    })?;
    let mut b = PathBuilder::new("buy-and-hold".into(), last + 1 - first, cfg.cost_rate());
    for j in first..=last {
        let sigma2 = rolling_variance(&panel.r_simple[..j], cfg.var_window).unwrap_or(f64::NAN);
        let turnover = if j == first { 1.0 } else { 0.0 };
        b.push(panel.dates()[j], 1.0, 1.0, sigma2, turnover, panel.market[j], panel.rf[j]);
    }
    Ok(b.path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rolling_variance_examples() {
        assert_abs_diff_eq!(rolling_variance(&[0.003; 70], 60).unwrap(), 0.0, epsilon = 1e-30);
        let alt: Vec<f64> = (0..60).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        assert_abs_diff_eq!(rolling_variance(&alt, 60).unwrap(), 0.0001 * 60.0 / 59.0, epsilon = 1e-18);
        assert!(rolling_variance(&alt[..30], 60).is_err());
    }

    #[test]
    fn weight_examples() {
        let cfg = AllocationConfig::default();
        let (_, w) = optimal_weight(0.005, 0.002, &cfg, None).unwrap();
        assert_abs_diff_eq!(w, 0.005 / 0.006, epsilon = 1e-15);
        let (t, w) = optimal_weight(-0.01, 0.002, &cfg, Some(0.5)).unwrap();
        assert!(t < 0.0);
        assert_eq!(w, 0.25);
        let (_, w) = optimal_weight(-0.01, 0.002, &cfg, None).unwrap();
        assert_eq!(w, 0.0);
        let (_, w) = optimal_weight(0.009, 0.002, &cfg, Some(0.4)).unwrap();
        assert_eq!(w, 0.8);
        assert!(optimal_weight(0.01, 0.0, &cfg, None).is_err());
    }

    #[test]
    fn zero_position_escape() {
        let cfg = AllocationConfig::default();
        let (_, w) = optimal_weight(0.02, 0.002, &cfg, Some(0.0)).unwrap();
        assert_eq!(w, 0.10);
        let (_, w) = optimal_weight(0.0003, 0.002, &cfg, Some(0.0)).unwrap();
        assert_abs_diff_eq!(w, 0.05, epsilon = 1e-15);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = AllocationConfig { gamma: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = AllocationConfig { w_min: 1.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = AllocationConfig { var_window: 6, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
