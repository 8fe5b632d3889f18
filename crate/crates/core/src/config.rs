//! Run configuration. Every field has a default matching the reference experiment,
//! so an empty config file reproduces it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::alloc::AllocationConfig;
use crate::data::IngestOptions;
use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::eval::{BootstrapConfig, EvalConfig};
use crate::forecast::{ForecastOptions, Model};
use crate::index::{IndexOptions, Method};
use crate::stats::Divisor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    /// `yyyymm,usrec` recession labels.
    pub nber: Option<PathBuf>,
    /// Column-name map; the default source headers are used when absent.
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    /// First month of the estimation window.
    pub train_start: YearMonth,
    pub oos_start: YearMonth,
    pub oos_end: YearMonth,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            train_start: YearMonth::new(1960, 1).expect("valid"),
            oos_start: YearMonth::new(1980, 1).expect("valid"),
            oos_end: YearMonth::new(2020, 9).expect("valid"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub methods: Vec<Method>,
    pub models: Vec<Model>,
    /// Report the historical-mean benchmark as its own row. It is always computed.
    pub histmean: bool,
    pub buy_and_hold: bool,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            models: vec![Model::OneState, Model::Switching],
            histmean: true,
            buy_and_hold: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub cer_divisor: Divisor,
    pub min_months_for_pvalue: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            cer_divisor: Divisor::Population,
            min_months_for_pvalue: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write per-date index loadings for PLS and PCA.
    pub dump_loadings: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            dump_loadings: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub sample: SampleConfig,
    pub strategies: StrategyConfig,
    pub ingest: IngestOptions,
    pub index: IndexOptions,
    pub forecast: ForecastOptions,
    pub allocation: AllocationConfig,
    pub evaluation: EvaluationConfig,
    pub bootstrap: BootstrapConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config; relative data paths are resolved against the config file's directory.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.path, &mut cfg.data.nber, &mut cfg.data.schema].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sample;
        if s.oos_start >= s.oos_end {
            return Err(Error::Config(format!("oos_start {} must precede oos_end {}", s.oos_start, s.oos_end)));
        }
        if s.train_start >= s.oos_start {
            return Err(Error::Config(format!("train_start {} must precede oos_start {}", s.train_start, s.oos_start)));
        }
        let models = self.strategies.models.iter().filter(|m| **m != Model::HistMean).count();
        let n_models = self.strategies.methods.len() * models;
        if n_models == 0 && !self.strategies.histmean && !self.strategies.buy_and_hold {
            return Err(Error::Config("no strategy enabled".into()));
        }
        if self.data.path.is_none() {
            return Err(Error::Config("no data file given".into()));
        }
        if self.bootstrap.replications < 199 {
            return Err(Error::Config(format!("bootstrap replications {} < 199", self.bootstrap.replications)));
        }
        self.allocation.validate()
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            gamma: self.allocation.gamma,
            cer_divisor: self.evaluation.cer_divisor,
            bootstrap: self.bootstrap,
            min_months_for_pvalue: self.evaluation.min_months_for_pvalue,
        }
    }

    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            start: Some(self.sample.train_start),
            end: Some(self.sample.oos_end),
            ..self.ingest
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_has_reference_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.allocation.gamma, 3.0);
        assert_eq!(cfg.allocation.cost_bps, 50.0);
        assert_eq!(cfg.allocation.w_max, 1.5);
        assert_eq!(cfg.sample.oos_start.to_string(), "198001");
        assert_eq!(cfg.strategies.methods.len(), 3);
    }

    #[test]
    fn sections_parse() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [sample]
            oos_start = 199001
            [strategies]
            methods = ["pls"]
            models = ["switching"]
            [allocation]
            gamma = 5.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.sample.oos_start.yyyymm(), 199001);
        assert_eq!(cfg.strategies.models, vec![Model::Switching]);
        assert_eq!(cfg.allocation.gamma, 5.0);
    }

    #[test]
    fn malformed_month_is_a_config_error() {
        let err = RunConfig::from_toml_str("[sample]\noos_start = 198013\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn reversed_window_fails_validation() {
        let mut cfg = RunConfig::from_toml_str("[data]\npath = \"x.csv\"\n").unwrap();
        cfg.validate().unwrap();
        cfg.sample.oos_end = YearMonth::new(1975, 1).unwrap();
        assert!(cfg.validate().is_err());
    }
}
