//! Recursive construction of the univariate predictor index.
//!
//! Every builder takes a formation row `t` and reads panel rows `0..=t` only, so
//! fitting on a panel truncated at `t` reproduces the same numbers bit for bit.
//!
//! * PLS: three-pass regression filter. Pass one regresses each standardized
//!   predictor on the next-month return to get its loading; pass two regresses
//!   the cross-section of predictors on the loadings, month by month, to get the
//!   index. The third pass (the predictive regression) lives in [`crate::forecast`].
//! * PCA: first principal component of the standardized predictors.
//! * FC: equal-weighted mean of the univariate predictive-regression forecasts.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::PredictorPanel;
use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::stats::{self, Divisor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pls,
    Pca,
    Fc,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pls, Method::Pca, Method::Fc];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pls => "pls",
            Method::Pca => "pca",
            Method::Fc => "fc",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Pls => "E^PLS",
            Method::Pca => "E^PCA",
            Method::Fc => "E^FC",
        }
    }
}

/// Which return series the index is aligned with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Simple,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexOptions {
    pub target: Target,
    /// Include an intercept in the PLS cross-section regression; otherwise fit through the origin.
    pub pass2_intercept: bool,
    /// Minimum number of (predictor, next return) pairs before an index can be formed.
    pub min_history: usize,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self {
            target: Target::Simple,
            pass2_intercept: true,
            min_history: 60,
        }
    }
}

impl IndexOptions {
    pub fn target<'a>(&self, panel: &'a PredictorPanel) -> &'a [f64] {
        match self.target {
            Target::Simple => &panel.r_simple,
            Target::Log => &panel.r_log,
        }
    }
}

/// In-window moments used to standardize each predictor.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// One fit of the index at a formation row.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexFit {
    pub method: Method,
    /// Formation row in the panel.
    pub t: usize,
    /// Index values for rows `0..=t` under this fit; empty for FC.
    pub series: Vec<f64>,
    /// `series[t]` for PLS/PCA, the combined forecast for FC.
    pub value: f64,
    /// PLS first-pass loadings or PCA weights, zero for excluded predictors; empty for FC.
    pub loadings: Vec<f64>,
    pub standardization: Standardization,
    /// Share of standardized variance captured by the first component (PCA only).
    pub explained_share: Option<f64>,
}

fn check_history(panel: &PredictorPanel, t: usize, opts: &IndexOptions) -> Result<()> {
    if t >= panel.len() {
        return Err(Error::Numeric(format!("formation row {t} outside panel of {} rows", panel.len())));
    }
    if t < opts.min_history {
        return Err(Error::Window {
            date: panel.dates()[t],
            cause: format!("{t} usable months, need at least {}", opts.min_history),
        });
    }
    Ok(())
}

fn standardize(panel: &PredictorPanel, t: usize) -> (Standardization, Vec<Option<Vec<f64>>>) {
    let mut st = Standardization::default();
    let cols = (0..panel.n_predictors())
        .map(|i| {
            let x = &panel.predictor(i)[..=t];
            let m = stats::mean(x);
            let sd = stats::variance(x, Divisor::Sample).sqrt();
            st.means.push(m);
            st.sds.push(sd);
            let scale = m.abs().max(f64::MIN_POSITIVE);
            (sd > 1e-12 * scale).then(|| x.iter().map(|v| (v - m) / sd).collect())
        })
        .collect();
    (st, cols)
}

/// Flips `series` and `weights` when the in-window predictive slope of the target on the index is negative.
fn orient(series: &mut [f64], weights: &mut [f64], target: &[f64], t: usize) {
    let fit = stats::ols(&series[..t], &target[1..=t]);
    if fit.beta < 0.0 {
        series.iter_mut().for_each(|v| *v = -*v);
        weights.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Cross-section regression of one month's predictors on the loadings.
///
/// Returns the slope (the index value) and the residuals.
pub fn cross_section_fit(z: &[f64], loadings: &[f64], intercept: bool) -> Option<(f64, Vec<f64>)> {
    let n = z.len();
    if intercept && n >= 2 {
        let fit = stats::ols(loadings, z);
        if fit.degenerate {
            return None;
        }
        let resid = z.iter().zip(loadings).map(|(zi, li)| zi - fit.alpha - fit.beta * li).collect();
        Some((fit.beta, resid))
    } else {
        let sll: f64 = loadings.iter().map(|l| l * l).sum();
        if !(sll > 0.0) {
            return None;
        }
        let e = z.iter().zip(loadings).map(|(zi, li)| zi * li).sum::<f64>() / sll;
        let resid = z.iter().zip(loadings).map(|(zi, li)| zi - e * li).collect();
        Some((e, resid))
    }
}

/// PLS index at formation row `t`.
pub fn build_pls(panel: &PredictorPanel, t: usize, opts: &IndexOptions) -> Result<IndexFit> {
    check_history(panel, t, opts)?;
    let date = panel.dates()[t];
    let target = opts.target(panel);
    let (standardization, cols) = standardize(panel, t);
    let usable: Vec<(usize, &Vec<f64>)> = cols.iter().enumerate().filter_map(|(i, c)| c.as_ref().map(|c| (i, c))).collect();
    if usable.is_empty() {
        return Err(Error::Singularity {
            date,
            cause: "every predictor is constant over the window".into(),
        });
    }

    let next_ret = &target[1..=t];
    let mut loadings = vec![0.0; panel.n_predictors()];
    let phi: Vec<f64> = usable
        .iter()
        .map(|(i, z)| {
            let b = stats::ols(next_ret, &z[..t]).beta;
            loadings[*i] = b;
            b
        })
        .collect();

    // A lone predictor cannot support an intercept in the cross-section.
    let intercept = opts.pass2_intercept && phi.len() >= 2;
    let mut zs = vec![0.0; phi.len()];
    let mut series = Vec::with_capacity(t + 1);
    for s in 0..=t {
        for (k, (_, z)) in usable.iter().enumerate() {
            zs[k] = z[s];
        }
        let (e, _) = cross_section_fit(&zs, &phi, intercept).ok_or_else(|| Error::Singularity {
            date,
            cause: "first-pass loadings do not vary across predictors".into(),
        })?;
        series.push(e);
    }
    orient(&mut series, &mut loadings, target, t);
    Ok(IndexFit {
        method: Method::Pls,
        t,
        value: series[t],
        series,
        loadings,
        standardization,
        explained_share: None,
    })
}

/// First-principal-component index at formation row `t`.
pub fn build_pca(panel: &PredictorPanel, t: usize, opts: &IndexOptions) -> Result<IndexFit> {
    check_history(panel, t, opts)?;
    let date = panel.dates()[t];
    let (standardization, cols) = standardize(panel, t);
    let usable: Vec<(usize, &Vec<f64>)> = cols.iter().enumerate().filter_map(|(i, c)| c.as_ref().map(|c| (i, c))).collect();
    let k = usable.len();
    if k == 0 {
        return Err(Error::Singularity {
            date,
            cause: "every predictor is constant over the window".into(),
        });
    }
    let rows = t + 1;
    let corr = DMatrix::from_fn(k, k, |a, b| {
        let (za, zb) = (usable[a].1, usable[b].1);
        za.iter().zip(zb.iter()).map(|(x, y)| x * y).sum::<f64>() / (rows as f64 - 1.0)
    });
    let eig = SymmetricEigen::new(corr);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l1 = eig.eigenvalues[order[0]];
    let l2 = order.get(1).map_or(0.0, |&j| eig.eigenvalues[j]);
    if !(l1 > 0.0) || l1 - l2 <= 1e-10 * l1 {
        return Err(Error::Singularity {
            date,
            cause: "leading eigenvalue of the predictor correlation matrix is not unique".into(),
        });
    }
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let v = eig.eigenvectors.column(order[0]);
    // Fix an arbitrary but deterministic sign before orienting on returns.
    let pivot = (0..k).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap_or(0);
    let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };

    let mut weights = vec![0.0; panel.n_predictors()];
    for (j, (i, _)) in usable.iter().enumerate() {
        weights[*i] = sign * v[j];
    }
    let mut series: Vec<f64> = (0..rows)
        .map(|s| usable.iter().map(|(i, z)| weights[*i] * z[s]).sum())
        .collect();
    orient(&mut series, &mut weights, opts.target(panel), t);
    Ok(IndexFit {
        method: Method::Pca,
        t,
        value: series[t],
        series,
        loadings: weights,
        standardization,
        explained_share: Some(l1 / total),
    })
}

/// Equal-weighted forecast combination at formation row `t` using every training pair.
pub fn build_fc(panel: &PredictorPanel, t: usize, opts: &IndexOptions) -> Result<IndexFit> {
    check_history(panel, t, opts)?;
    let standardization = standardize(panel, t).0;
    let value = fc_forecast(panel, t, opts, |_| true);
    Ok(IndexFit {
        method: Method::Fc,
        t,
        series: Vec::new(),
        value,
        loadings: Vec::new(),
        standardization,
        explained_share: None,
    })
}

/// Forecast combination restricted to training pairs `(x_s, r_{s+1})` with `include(s)`, `s < t`.
pub fn fc_forecast(panel: &PredictorPanel, t: usize, opts: &IndexOptions, include: impl Fn(usize) -> bool) -> f64 {
    let target = opts.target(panel);
    let idx: Vec<usize> = (0..t).filter(|&s| include(s)).collect();
    let y: Vec<f64> = idx.iter().map(|&s| target[s + 1]).collect();
    let n = panel.n_predictors();
    let mut xs = vec![0.0; idx.len()];
    let mut total = 0.0;
    for i in 0..n {
        let col = panel.predictor(i);
        for (slot, &s) in xs.iter_mut().zip(&idx) {
            *slot = col[s];
        }
        let fit = stats::ols(&xs, &y);
        if fit.degenerate {
            log::debug!("{}: predictor {} constant in window, using intercept", panel.dates()[t], panel.names()[i]);
        }
        total += fit.predict(col[t]);
    }
    total / n as f64
}

pub fn build(method: Method, panel: &PredictorPanel, t: usize, opts: &IndexOptions) -> Result<IndexFit> {
    match method {
        Method::Pls => build_pls(panel, t, opts),
        Method::Pca => build_pca(panel, t, opts),
        Method::Fc => build_fc(panel, t, opts),
    }
}

/// Index values and estimation metadata across a run of formation dates.
#[derive(Debug, Clone, PartialEq)]
pub struct EconomicIndex {
    pub method: Method,
    pub dates: Vec<YearMonth>,
    pub values: Vec<f64>,
    pub loadings: Vec<Vec<f64>>,
    pub standardization: Vec<Standardization>,
    names: Vec<String>,
}

impl EconomicIndex {
    /// Fits the index at every formation row in `rows`. Rows are independent and run in parallel.
    pub fn build(panel: &PredictorPanel, method: Method, rows: std::ops::Range<usize>, opts: &IndexOptions) -> Result<Self> {
        let fits: Vec<IndexFit> = rows.into_par_iter().map(|t| build(method, panel, t, opts)).collect::<Result<_>>()?;
        Ok(Self::from_fits(panel, method, fits))
    }

    pub fn from_fits(panel: &PredictorPanel, method: Method, fits: Vec<IndexFit>) -> Self {
        let mut out = Self {
            method,
            dates: Vec::with_capacity(fits.len()),
            values: Vec::with_capacity(fits.len()),
            loadings: Vec::with_capacity(fits.len()),
            standardization: Vec::with_capacity(fits.len()),
            names: panel.names().to_vec(),
        };
        for f in fits {
            out.dates.push(panel.dates()[f.t]);
            out.values.push(f.value);
            out.loadings.push(f.loadings);
            out.standardization.push(f.standardization);
        }
        out
    }

    /// `yyyymm` followed by one column per predictor.
    pub fn write_loadings_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_loadings_to(file)
    }

    pub fn write_loadings_to<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["yyyymm".to_string()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        for (d, l) in self.dates.iter().zip(&self.loadings) {
            if l.is_empty() {
                continue;
            }
            let mut rec = vec![d.to_string()];
            rec.extend(l.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}
