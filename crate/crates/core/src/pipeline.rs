//! End-to-end backtest runs and input validation behind the command-line tool.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::alloc::{run_allocation, run_buy_and_hold, AllocationPath};
use crate::config::RunConfig;
use crate::data::{load_panel, PredictorPanel, Schema};
use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::eval::{self, PerformanceReport};
use crate::forecast::{r2_oos, run_oos, ForecastSeries, Model};
use crate::index::Method;
use crate::state::{attach_nber, classify_updown, load_nber_csv, CyclePhase, StateSeries};

/// Name of the historical-mean benchmark strategy.
pub const BENCHMARK: &str = "histmean";

/// Everything a backtest produced, before it is written out.
#[derive(Debug, Clone)]
pub struct BacktestRun {
    pub panel: PredictorPanel,
    pub states: StateSeries,
    pub forecasts: Vec<ForecastSeries>,
    /// Benchmark first, then buy-and-hold (if enabled), then the index strategies.
    pub paths: Vec<AllocationPath>,
    pub reports: Vec<PerformanceReport>,
}

impl BacktestRun {
    pub fn path(&self, name: &str) -> Option<&AllocationPath> {
        self.paths.iter().find(|p| p.name == name)
    }

    pub fn report(&self, name: &str) -> Option<&PerformanceReport> {
        self.reports.iter().find(|r| r.strategy == name)
    }

    pub fn forecast(&self, name: &str) -> Option<&ForecastSeries> {
        self.forecasts.iter().find(|f| f.name() == name)
    }
}

fn load_inputs(cfg: &RunConfig) -> Result<(PredictorPanel, StateSeries)> {
    let schema = match &cfg.data.schema {
        Some(p) => Schema::from_toml_file(p)?,
        None => Schema::default(),
    };
    let data = cfg.data.path.as_ref().ok_or_else(|| Error::Config("no data file given".into()))?;
    let panel = load_panel(data, &schema, &cfg.ingest_options()).map_err(Error::in_module("data_ingest"))?;
    let states = classify_updown(panel.dates(), &panel.slope).map_err(Error::in_module("market_state"))?;
    let states = match &cfg.data.nber {
        Some(p) => attach_nber(states, &load_nber_csv(p)?).map_err(Error::in_module("market_state"))?,
        None => states,
    };
    Ok((panel, states))
}

/// Runs every enabled strategy and evaluates it against the historical mean.
pub fn run_backtest(cfg: &RunConfig) -> Result<BacktestRun> {
    cfg.validate()?;
    let (panel, states) = load_inputs(cfg)?;
    run_backtest_on(cfg, panel, states)
}

/// As [`run_backtest`], on an already loaded panel.
pub fn run_backtest_on(cfg: &RunConfig, panel: PredictorPanel, states: StateSeries) -> Result<BacktestRun> {
    let s = cfg.sample;
    let panel = panel.window(Some(s.train_start), Some(s.oos_end));
    if panel.dates().first().is_none_or(|d| *d > s.train_start) || panel.dates().last().is_none_or(|d| *d < s.oos_end) {
        return Err(Error::Stage {
            module: "data_ingest",
            source: Box::new(Error::Window {
                date: s.train_start,
                cause: format!("panel does not cover {}..{}", s.train_start, s.oos_end),
            }),
        });
    }

    let mut specs: Vec<(Option<Method>, Model)> = vec![(None, Model::HistMean)];
    for &model in cfg.strategies.models.iter().filter(|m| **m != Model::HistMean) {
        for &method in &cfg.strategies.methods {
            specs.push((Some(method), model));
        }
    }
    let forecasts: Vec<ForecastSeries> = specs
        .par_iter()
        .map(|&(method, model)| {
            run_oos(&panel, &states, method, model, s.oos_start, s.oos_end, &cfg.index, &cfg.forecast)
                .map_err(Error::in_module("forecaster"))
        })
        .collect::<Result<_>>()?;

    let mut paths: Vec<AllocationPath> = forecasts
        .par_iter()
        .map(|f| run_allocation(f, &panel, &cfg.allocation).map_err(Error::in_module("allocator")))
        .collect::<Result<_>>()?;
    if cfg.strategies.buy_and_hold {
        let bh = run_buy_and_hold(&panel, s.oos_start, s.oos_end, &cfg.allocation).map_err(Error::in_module("allocator"))?;
        paths.insert(1, bh);
    }

    let bench_path = &paths[0];
    let bench_fc = &forecasts[0];
    let updown = &bench_fc.state_at_formation;
    let phases: Option<Vec<CyclePhase>> = match &states.nber {
        Some(_) => Some(
            bench_path
                .dates
                .iter()
                .map(|d| states.phase_at(*d).ok_or_else(|| Error::data(d, "no recession label")))
                .collect::<Result<_>>()
                .map_err(Error::in_module("evaluator"))?,
        ),
        None => None,
    };
    let ecfg = cfg.eval_config();
    let by_name: HashMap<String, &ForecastSeries> = forecasts.iter().map(|f| (f.name(), f)).collect();
    let mut reports: Vec<PerformanceReport> = paths
        .par_iter()
        .map(|p| {
            let mut r = eval::evaluate(p, bench_path, updown, phases.as_deref(), &ecfg).map_err(Error::in_module("evaluator"))?;
            if !r.is_benchmark {
                if let Some(f) = by_name.get(&p.name) {
                    r.r2_oos = Some(r2_oos(f, bench_fc, None).map_err(Error::in_module("evaluator"))?);
                }
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;
    if !cfg.strategies.histmean {
        reports.retain(|r| !r.is_benchmark);
    }
    Ok(BacktestRun {
        panel,
        states,
        forecasts,
        paths,
        reports,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    rng: &'static str,
    config_sha256: String,
    data_sha256: String,
    nber_sha256: Option<String>,
    config: RunConfig,
    artifacts: Vec<(String, String)>,
}

fn write_loadings(panel: &PredictorPanel, f: &ForecastSeries, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = vec!["yyyymm".to_string()];
    header.extend(panel.names().iter().cloned());
    wtr.write_record(&header)?;
    for (d, l) in f.dates.iter().zip(&f.loadings) {
        let mut rec = vec![d.pred().to_string()];
        rec.extend(l.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Runs the backtest and writes all artifacts under the configured output directory.
///
/// Returns the run and the list of files written (relative to the output directory).
pub fn cmd_backtest(cfg: &RunConfig) -> Result<(BacktestRun, Vec<PathBuf>)> {
    let run = run_backtest(cfg)?;
    let out = &cfg.output.dir;
    for sub in ["paths", "forecasts", "loadings"] {
        fs::create_dir_all(out.join(sub)).map_err(|e| Error::io(out.join(sub), e))?;
    }
    let mut written = Vec::new();
    for p in &run.paths {
        let rel = PathBuf::from("paths").join(format!("{}.csv", p.name));
        p.write_csv(&out.join(&rel))?;
        written.push(rel);
    }
    for f in &run.forecasts {
        let rel = PathBuf::from("forecasts").join(format!("{}.csv", f.name()));
        f.write_csv(&out.join(&rel))?;
        written.push(rel);
        let has_loadings = matches!(f.method, Some(Method::Pls | Method::Pca)) && f.model == Model::OneState;
        if cfg.output.dump_loadings && has_loadings {
            let rel = PathBuf::from("loadings").join(format!("{}.csv", f.method.map_or("", |m| m.as_str())));
            write_loadings(&run.panel, f, &out.join(&rel))?;
            written.push(rel);
        }
    }
    let summary = PathBuf::from("summary.csv");
    let file = fs::File::create(out.join(&summary)).map_err(|e| Error::io(out.join(&summary), e))?;
    eval::write_table_csv(&run.reports, file)?;
    written.push(summary);
    let report = PathBuf::from("report.json");
    eval::write_reports_json(&run.reports, &out.join(&report))?;
    written.push(report);

    let artifacts = written
        .iter()
        .map(|rel| Ok((rel.display().to_string(), file_sha256(&out.join(rel))?)))
        .collect::<Result<Vec<_>>>()?;
    let config_json = serde_json::to_vec(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        rng: crate::synth::RNG_VERSION,
        config_sha256: sha256_hex(&config_json),
        data_sha256: file_sha256(cfg.data.path.as_deref().expect("validated"))?,
        nber_sha256: cfg.data.nber.as_deref().map(file_sha256).transpose()?,
        config: cfg.clone(),
        artifacts,
    };
    let rel = PathBuf::from("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out.join(&rel), text + "\n").map_err(|e| Error::io(out.join(&rel), e))?;
    written.push(rel);
    Ok((run, written))
}

/// A problem found by [`cmd_validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Issue {
    MissingColumn { column: String },
    BadDate { row: usize, cell: String },
    NotIncreasing { before: YearMonth, after: YearMonth },
    Gap { before: YearMonth, after: YearMonth },
    Unparseable { date: YearMonth, column: String, cell: String },
    LogDomain { date: YearMonth, column: String, value: f64 },
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Issue::MissingColumn { column } => write!(f, "missing column `{column}`"),
            Issue::BadDate { row, cell } => write!(f, "row {row}: unparseable date `{cell}`"),
            Issue::NotIncreasing { before, after } => write!(f, "dates not increasing: {before} then {after}"),
            Issue::Gap { before, after } => write!(f, "gap between {before} and {after}"),
            Issue::Unparseable { date, column, cell } => write!(f, "{date}: cannot parse `{cell}` in `{column}`"),
            Issue::LogDomain { date, column, value } => write!(f, "{date}: {column} = {value} is not positive (log input)"),
        }
    }
}

/// Lists schema and coverage problems in a raw data file. An empty list means clean.
pub fn cmd_validate(path: &Path, schema: &Schema) -> Result<Vec<Issue>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut issues = Vec::new();
    let mut required = vec![("date", schema.date.as_str())];
    required.extend(schema_columns(schema));
    for (_, h) in &required {
        if col(h).is_none() {
            issues.push(Issue::MissingColumn { column: h.to_string() });
        }
    }
    let date_col = col(&schema.date);
    let log_cols: Vec<(&str, usize)> = [&schema.sp_index, &schema.d12, &schema.e12]
        .into_iter()
        .filter_map(|h| col(h).map(|c| (h.as_str(), c)))
        .collect();
    let value_cols: Vec<(&str, usize)> = schema_columns(schema).into_iter().filter_map(|(_, h)| col(h).map(|c| (h, c))).collect();

    let mut prev: Option<YearMonth> = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let Some(dc) = date_col else { break };
        let cell = rec.get(dc).unwrap_or("");
        let Ok(date) = cell.parse::<YearMonth>() else {
            issues.push(Issue::BadDate { row: i + 2, cell: cell.to_string() });
            continue;
        };
        if let Some(p) = prev {
            if date <= p {
                issues.push(Issue::NotIncreasing { before: p, after: date });
            } else if p.succ() != date {
                issues.push(Issue::Gap { before: p, after: date });
            }
        }
        prev = Some(date);
        for &(name, c) in &value_cols {
            let cell = rec.get(c).unwrap_or("");
            let missing = matches!(cell, "" | "NaN" | "nan" | "NA" | "N/A" | ".");
            let parsed = cell.replace(',', "").parse::<f64>();
            if !missing && parsed.is_err() {
                issues.push(Issue::Unparseable { date, column: name.to_string(), cell: cell.to_string() });
            }
            if let (Ok(v), true) = (parsed, log_cols.iter().any(|(_, lc)| *lc == c)) {
                if v <= 0.0 {
                    issues.push(Issue::LogDomain { date, column: name.to_string(), value: v });
                }
            }
        }
    }
    Ok(issues)
}

fn schema_columns(schema: &Schema) -> Vec<(&'static str, &str)> {
    schema.value_columns().to_vec()
}
