//! Certainty-equivalent returns, Sharpe ratios, turnover and bootstrap inference.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alloc::AllocationPath;
use crate::error::{Error, Result};
use crate::state::{CyclePhase, MarketState};
use crate::stats::{self, Divisor};

/// Months per year times percent.
pub const ANNUALIZE: f64 = 1200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub replications: usize,
    /// Block length; `None` uses `ceil(T^(1/3))`.
    pub block_len: Option<usize>,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: 499,
            block_len: None,
            seed: 20_201_231,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub gamma: f64,
    pub cer_divisor: Divisor,
    pub bootstrap: BootstrapConfig,
    /// Subsets shorter than this get a ΔCER but no p-value.
    pub min_months_for_pvalue: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            gamma: 3.0,
            cer_divisor: Divisor::Population,
            bootstrap: BootstrapConfig::default(),
            min_months_for_pvalue: 12,
        }
    }
}

/// Annualized certainty-equivalent return in percent.
pub fn cer(returns: &[f64], gamma: f64, divisor: Divisor) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::Numeric(format!("CER needs at least 2 months, have {}", returns.len())));
    }
    Ok((stats::mean(returns) - 0.5 * gamma * stats::variance(returns, divisor)) * ANNUALIZE)
}

fn select(xs: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    match mask {
        None => xs.to_vec(),
        Some(m) => xs.iter().zip(m).filter(|(_, k)| **k).map(|(x, _)| *x).collect(),
    }
}

/// CER of `model` minus CER of `bench`, optionally over the months where `mask` is true.
pub fn delta_cer(model: &[f64], bench: &[f64], gamma: f64, divisor: Divisor, mask: Option<&[bool]>) -> Result<f64> {
    if model.len() != bench.len() || mask.is_some_and(|m| m.len() != model.len()) {
        return Err(Error::Numeric("return series are not aligned".into()));
    }
    let (m, b) = (select(model, mask), select(bench, mask));
    if m.is_empty() {
        return Err(Error::Numeric("empty month subset".into()));
    }
    Ok(cer(&m, gamma, divisor)? - cer(&b, gamma, divisor)?)
}

/// Monthly Sharpe ratio of `returns` in excess of `rf`.
pub fn sharpe_monthly(returns: &[f64], rf: &[f64]) -> Result<f64> {
    if returns.len() < 2 || returns.len() != rf.len() {
        return Err(Error::Numeric("Sharpe ratio needs two or more aligned months".into()));
    }
    let ex: Vec<f64> = returns.iter().zip(rf).map(|(r, f)| r - f).collect();
    let sd = stats::variance(&ex, Divisor::Sample).sqrt();
    let scale = stats::mean(&ex).abs().max(f64::MIN_POSITIVE);
    if !(sd > 1e-12 * scale) {
        return Err(Error::Numeric("excess returns have zero standard deviation".into()));
    }
    Ok(stats::mean(&ex) / sd)
}

/// Average monthly turnover in percent and its ratio to the benchmark's.
pub fn turnover_stats(model: &[f64], bench: &[f64]) -> Result<(f64, f64)> {
    if model.is_empty() || bench.is_empty() {
        return Err(Error::Numeric("empty turnover series".into()));
    }
    let avg = 100.0 * stats::mean(model);
    let avg_b = 100.0 * stats::mean(bench);
    if !(avg_b > 0.0) {
        return Err(Error::Numeric("benchmark turnover is zero; relative turnover undefined".into()));
    }
    Ok((avg, avg / avg_b))
}

pub fn default_block_len(n: usize) -> usize {
    (n as f64).cbrt().ceil() as usize
}

/// One-sided circular-block-bootstrap p-value for `H0: ΔCER <= 0`.
///
/// Months are resampled in pairs, so the cross-correlation between the two strategies
/// is preserved. Bootstrap statistics are recentred on the sample ΔCER and compared
/// with it; the p-value is `(1 + #exceedances) / (B + 1)`. Replication `b` draws from
/// its own ChaCha stream, so the result does not depend on thread scheduling.
pub fn bootstrap_dcer(
    model: &[f64],
    bench: &[f64],
    gamma: f64,
    divisor: Divisor,
    replications: usize,
    block_len: usize,
    seed: u64,
) -> Result<f64> {
    let n = model.len();
    if n != bench.len() {
        return Err(Error::Numeric("return series are not aligned".into()));
    }
    if block_len == 0 || block_len >= n {
        return Err(Error::Numeric(format!("block length {block_len} must be in 1..{n}")));
    }
    if replications == 0 {
        return Err(Error::Numeric("bootstrap needs at least one replication".into()));
    }
    let observed = delta_cer(model, bench, gamma, divisor, None)?;
    let n_blocks = n.div_ceil(block_len);

    let stats: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut m = Vec::with_capacity(n);
            let mut r = Vec::with_capacity(n);
            'fill: for _ in 0..n_blocks {
                let start = rng.gen_range(0..n);
                for k in 0..block_len {
                    if m.len() == n {
                        break 'fill;
                    }
                    let i = (start + k) % n;
                    m.push(model[i]);
                    r.push(bench[i]);
                }
            }
            // Both calls have n >= 2 months, so they cannot fail.
            cer(&m, gamma, divisor).unwrap() - cer(&r, gamma, divisor).unwrap()
        })
        .collect();

    let exceed = stats.iter().filter(|d| **d - observed >= observed).count();
    Ok((1 + exceed) as f64 / (replications + 1) as f64)
}

/// ΔCER and optional p-value over one subset of months.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsetResult {
    pub months: usize,
    /// CER level of the model over the subset.
    pub cer: f64,
    pub dcer: f64,
    pub pvalue: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PerState {
    pub expansion: Option<SubsetResult>,
    pub recession: Option<SubsetResult>,
    pub up: Option<SubsetResult>,
    pub down: Option<SubsetResult>,
}

/// Net-of-cost ΔCER over expansions, recessions, and up/down formation states.
///
/// `phases` is optional; the corresponding entries stay empty without it. Empty
/// subsets are reported as `None`.
pub fn per_state_report(
    model: &AllocationPath,
    bench: &AllocationPath,
    updown: &[MarketState],
    phases: Option<&[CyclePhase]>,
    cfg: &EvalConfig,
) -> Result<PerState> {
    let n = model.len();
    if bench.dates != model.dates || updown.len() != n || phases.is_some_and(|p| p.len() != n) {
        return Err(Error::Numeric("per-state evaluation inputs are not aligned".into()));
    }
    let subset = |name: &str, mask: Vec<bool>| -> Result<Option<SubsetResult>> {
        let months = mask.iter().filter(|k| **k).count();
        if months == 0 {
            return Ok(None);
        }
        let m = select(&model.r_net, Some(&mask));
        let b = select(&bench.r_net, Some(&mask));
        if months < 2 {
            log::warn!("{}: {name} subset has {months} month, ΔCER undefined", model.name);
            return Ok(None);
        }
        let dcer = cer(&m, cfg.gamma, cfg.cer_divisor)? - cer(&b, cfg.gamma, cfg.cer_divisor)?;
        let pvalue = if months < cfg.min_months_for_pvalue {
            log::warn!("{}: {name} subset has {months} months, p-value suppressed", model.name);
            None
        } else {
            Some(bootstrap_for(&m, &b, cfg)?)
        };
        Ok(Some(SubsetResult {
            months,
            cer: cer(&m, cfg.gamma, cfg.cer_divisor)?,
            dcer,
            pvalue,
        }))
    };
    let by_state = |st: MarketState| updown.iter().map(|s| *s == st).collect::<Vec<_>>();
    let mut out = PerState {
        up: subset("up", by_state(MarketState::Up))?,
        down: subset("down", by_state(MarketState::Down))?,
        ..Default::default()
    };
    if let Some(ph) = phases {
        let by_phase = |p: CyclePhase| ph.iter().map(|x| *x == p).collect::<Vec<_>>();
        out.expansion = subset("expansion", by_phase(CyclePhase::Expansion))?;
        out.recession = subset("recession", by_phase(CyclePhase::Recession))?;
    }
    Ok(out)
}

fn bootstrap_for(model: &[f64], bench: &[f64], cfg: &EvalConfig) -> Result<f64> {
    let n = model.len();
    let len = cfg.bootstrap.block_len.unwrap_or_else(|| default_block_len(n)).min(n - 1).max(1);
    bootstrap_dcer(model, bench, cfg.gamma, cfg.cer_divisor, cfg.bootstrap.replications, len, cfg.bootstrap.seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PValues {
    pub dcer: Option<f64>,
    pub dcer_net: Option<f64>,
}

/// Evaluation of one strategy against the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceReport {
    pub strategy: String,
    pub is_benchmark: bool,
    /// Annualized CER before costs, percent.
    pub cer_ann: f64,
    /// Annualized CER after costs, percent.
    pub cer_net: f64,
    pub dcer_ann: f64,
    pub dcer_net: f64,
    pub sharpe_m: f64,
    /// Mean monthly turnover, percent.
    pub avg_turnover: f64,
    pub rel_turnover: f64,
    pub per_state: PerState,
    pub pvals: PValues,
    pub terminal_wealth: f64,
    pub r2_oos: Option<f64>,
}

impl PerformanceReport {
    pub fn stars(&self) -> &'static str {
        stars(self.pvals.dcer)
    }
}

pub fn stars(p: Option<f64>) -> &'static str {
    match p {
        Some(p) if p < 0.01 => "***",
        Some(p) if p < 0.05 => "**",
        Some(p) if p < 0.10 => "*",
        _ => "",
    }
}

/// Full evaluation of `model` against `bench`.
pub fn evaluate(
    model: &AllocationPath,
    bench: &AllocationPath,
    updown: &[MarketState],
    phases: Option<&[CyclePhase]>,
    cfg: &EvalConfig,
) -> Result<PerformanceReport> {
    if model.dates != bench.dates {
        return Err(Error::Numeric(format!("{} and {} cover different months", model.name, bench.name)));
    }
    let is_benchmark = model.name == bench.name;
    let (g, d) = (cfg.gamma, cfg.cer_divisor);
    let (avg_turnover, rel_turnover) = turnover_stats(&model.turnover, &bench.turnover)?;
    let (p_gross, p_net) = if is_benchmark {
        (None, None)
    } else {
        (Some(bootstrap_for(&model.r_gross, &bench.r_gross, cfg)?), Some(bootstrap_for(&model.r_net, &bench.r_net, cfg)?))
    };
    Ok(PerformanceReport {
        strategy: model.name.clone(),
        is_benchmark,
        cer_ann: cer(&model.r_gross, g, d)?,
        cer_net: cer(&model.r_net, g, d)?,
        dcer_ann: delta_cer(&model.r_gross, &bench.r_gross, g, d, None)?,
        dcer_net: delta_cer(&model.r_net, &bench.r_net, g, d, None)?,
        sharpe_m: sharpe_monthly(&model.r_net, &model.rf)?,
        avg_turnover,
        rel_turnover,
        per_state: per_state_report(model, bench, updown, phases, cfg)?,
        pvals: PValues { dcer: p_gross, dcer_net: p_net },
        terminal_wealth: model.terminal_wealth(),
        r2_oos: None,
    })
}

pub fn write_reports_json(reports: &[PerformanceReport], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(reports).map_err(|e| Error::Numeric(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Summary table: benchmark rows show levels, other rows show gains over the benchmark.
pub fn write_table_csv<W: Write>(reports: &[PerformanceReport], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "predictor", "dcer", "sr", "rel_turnover", "dcer_net", "dcer_exp", "dcer_rec", "dcer_up", "dcer_down", "stars",
    ])?;
    let f = |v: f64| format!("{v:.4}");
    let cell = |s: Option<SubsetResult>, level: bool| s.map_or(String::new(), |s| f(if level { s.cer } else { s.dcer }));
    for r in reports {
        let lvl = r.is_benchmark;
        wtr.write_record([
            r.strategy.clone(),
            f(if lvl { r.cer_ann } else { r.dcer_ann }),
            f(r.sharpe_m),
            f(if lvl { r.avg_turnover } else { r.rel_turnover }),
            f(if lvl { r.cer_net } else { r.dcer_net }),
            cell(r.per_state.expansion, lvl),
            cell(r.per_state.recession, lvl),
            cell(r.per_state.up, lvl),
            cell(r.per_state.down, lvl),
            r.stars().to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
