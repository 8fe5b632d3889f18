//! Monthly source data: loading, validation and derivation of the predictor panel.
//!
//! Two CSV layouts are accepted by [`load_panel`]:
//!
//! * the raw source layout (one column per source series, renamed through a
//!   [`Schema`]), from which the sixteen predictors are derived, and
//! * the derived panel layout written by [`PredictorPanel::write_csv`], which is
//!   loaded as-is. Synthetic panels use this layout.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::date::YearMonth;
use crate::error::{Error, Result};

/// Column names of the sixteen derived predictors, in panel order.
pub const PREDICTOR_NAMES: [&str; 16] = [
    "dp", "dy", "ep", "de", "rvol", "bm", "ntis", "tbl", "lty", "ltr", "tms", "dfy", "dfr", "infl",
    "lep", "cbp",
];

const PANEL_TAIL: [&str; 5] = ["r_log", "r_simple", "slope", "rf", "market"];

/// One month of source data. Missing cells are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawMonthlyRow {
    pub date: YearMonth,
    pub sp_index: f64,
    pub d12: f64,
    pub e12: f64,
    pub bm: f64,
    pub tbl: f64,
    pub lty: f64,
    pub ltr: f64,
    pub aaa: f64,
    pub baa: f64,
    pub corpr: f64,
    pub ntis: f64,
    pub infl: f64,
    pub rvol: f64,
    pub crsp_vw: f64,
    pub rfree: f64,
    pub y10: f64,
}

/// Maps each logical input series to the column header used by a particular file vintage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub date: String,
    pub sp_index: String,
    pub d12: String,
    pub e12: String,
    pub bm: String,
    pub tbl: String,
    pub lty: String,
    pub ltr: String,
    pub aaa: String,
    pub baa: String,
    pub corpr: String,
    pub ntis: String,
    pub infl: String,
    pub rvol: String,
    pub crsp_vw: String,
    pub rfree: String,
    pub y10: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            date: "yyyymm".into(),
            sp_index: "Index".into(),
            d12: "D12".into(),
            e12: "E12".into(),
            bm: "b/m".into(),
            tbl: "tbl".into(),
            lty: "lty".into(),
            ltr: "ltr".into(),
            aaa: "AAA".into(),
            baa: "BAA".into(),
            corpr: "corpr".into(),
            ntis: "ntis".into(),
            infl: "infl".into(),
            rvol: "rvol".into(),
            crsp_vw: "CRSP_SPvw".into(),
            rfree: "Rfree".into(),
            y10: "y10".into(),
        }
    }
}

impl Schema {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// (logical name, header) pairs for the sixteen value columns, in `RawMonthlyRow` order.
    pub(crate) fn value_columns(&self) -> [(&'static str, &str); 16] {
        [
            ("sp_index", &self.sp_index),
            ("d12", &self.d12),
            ("e12", &self.e12),
            ("bm", &self.bm),
            ("tbl", &self.tbl),
            ("lty", &self.lty),
            ("ltr", &self.ltr),
            ("aaa", &self.aaa),
            ("baa", &self.baa),
            ("corpr", &self.corpr),
            ("ntis", &self.ntis),
            ("infl", &self.infl),
            ("rvol", &self.rvol),
            ("crsp_vw", &self.crsp_vw),
            ("rfree", &self.rfree),
            ("y10", &self.y10),
        ]
    }
}

/// How the simple excess return is formed from the market and bill returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcessForm {
    /// `(1 + R) / (1 + Rf) - 1`, so that `r_log = ln(1 + r_simple)` exactly.
    #[default]
    Ratio,
    /// `R - Rf`.
    Arithmetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    /// Lag inflation by one month for its publication delay.
    pub lag_inflation: bool,
    pub excess_form: ExcessForm,
    pub start: Option<YearMonth>,
    pub end: Option<YearMonth>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            lag_inflation: true,
            excess_form: ExcessForm::Ratio,
            start: None,
            end: None,
        }
    }
}

/// Date-aligned predictors, returns and rates. All vectors share the length of `dates`.
///
/// Row `t` holds values observable at the end of month `t`; `r_simple[t]` is the
/// excess return realised over month `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorPanel {
    dates: Vec<YearMonth>,
    names: Vec<String>,
    /// Column-major predictor matrix.
    x: Vec<Vec<f64>>,
    pub r_log: Vec<f64>,
    pub r_simple: Vec<f64>,
    pub slope: Vec<f64>,
    pub rf: Vec<f64>,
    /// Simple total return of the market.
    pub market: Vec<f64>,
}

impl PredictorPanel {
    /// Assembles a panel, checking alignment and monthly continuity.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dates: Vec<YearMonth>,
        names: Vec<String>,
        x: Vec<Vec<f64>>,
        r_log: Vec<f64>,
        r_simple: Vec<f64>,
        slope: Vec<f64>,
        rf: Vec<f64>,
        market: Vec<f64>,
    ) -> Result<Self> {
        let t = dates.len();
        if names.len() != x.len() {
            return Err(Error::Format(format!(
                "{} predictor names for {} columns",
                names.len(),
                x.len()
            )));
        }
        for (name, col) in names.iter().zip(&x) {
            if col.len() != t {
                return Err(Error::Format(format!("column {name} has {} rows, expected {t}", col.len())));
            }
        }
        for (name, col) in PANEL_TAIL.iter().zip([&r_log, &r_simple, &slope, &rf, &market]) {
            if col.len() != t {
                return Err(Error::Format(format!("column {name} has {} rows, expected {t}", col.len())));
            }
        }
        check_monthly(&dates)?;
        Ok(Self {
            dates,
            names,
            x,
            r_log,
            r_simple,
            slope,
            rf,
            market,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_predictors(&self) -> usize {
        self.x.len()
    }

    pub fn predictor(&self, i: usize) -> &[f64] {
        &self.x[i]
    }

    pub fn predictor_mut(&mut self, i: usize) -> &mut Vec<f64> {
        &mut self.x[i]
    }

    pub fn index_of(&self, date: YearMonth) -> Option<usize> {
        let first = *self.dates.first()?;
        let idx = usize::try_from(first.months_until(date)).ok()?;
        (idx < self.len()).then_some(idx)
    }

    /// Rows `start..end` (half-open, by index).
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            dates: self.dates[start..end].to_vec(),
            names: self.names.clone(),
            x: self.x.iter().map(|c| c[start..end].to_vec()).collect(),
            r_log: self.r_log[start..end].to_vec(),
            r_simple: self.r_simple[start..end].to_vec(),
            slope: self.slope[start..end].to_vec(),
            rf: self.rf[start..end].to_vec(),
            market: self.market[start..end].to_vec(),
        }
    }

    /// Rows dated within `[start, end]`; bounds outside the panel are clipped.
    pub fn window(&self, start: Option<YearMonth>, end: Option<YearMonth>) -> Self {
        let lo = start.map_or(0, |d| self.dates.partition_point(|x| *x < d));
        let hi = end.map_or(self.len(), |d| self.dates.partition_point(|x| *x <= d));
        self.slice(lo, hi.max(lo))
    }

    /// Rows dated up to and including `date`.
    pub fn truncated_through(&self, date: YearMonth) -> Self {
        self.window(None, Some(date))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["yyyymm".to_string()];
        header.extend(self.names.iter().cloned());
        header.extend(PANEL_TAIL.iter().map(|s| s.to_string()));
        wtr.write_record(&header)?;
        for t in 0..self.len() {
            let mut rec = vec![self.dates[t].to_string()];
            rec.extend(self.x.iter().map(|c| c[t].to_string()));
            for col in [&self.r_log, &self.r_simple, &self.slope, &self.rf, &self.market] {
                rec.push(col[t].to_string());
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

fn check_monthly(dates: &[YearMonth]) -> Result<()> {
    for w in dates.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Format(format!(
                "dates not strictly increasing: {} followed by {}",
                w[0], w[1]
            )));
        }
        if w[0].succ() != w[1] {
            return Err(Error::Format(format!("gap in monthly dates between {} and {}", w[0], w[1])));
        }
    }
    Ok(())
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NaN" | "nan" | "NA" | "N/A" | ".")
}

fn parse_cell(cell: &str) -> Option<f64> {
    if is_missing(cell) {
        return Some(f64::NAN);
    }
    cell.trim().replace(',', "").parse::<f64>().ok()
}

/// Loads and validates a panel from either supported CSV layout.
pub fn load_panel(path: &Path, schema: &Schema, opts: &IngestOptions) -> Result<PredictorPanel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    load_panel_from_reader(file, schema, opts)
}

pub fn load_panel_from_reader<R: std::io::Read>(
    rdr: R,
    schema: &Schema,
    opts: &IngestOptions,
) -> Result<PredictorPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
    let headers = rdr.headers()?.clone();
    let col: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;

    if col.contains_key("r_simple") && col.contains_key("slope") {
        return load_derived(&headers, &records, opts);
    }

    let find = |name: &str| col.get(name).copied().ok_or_else(|| Error::Schema { column: name.to_string() });
    let date_col = find(&schema.date)?;
    let value_cols = schema
        .value_columns()
        .iter()
        .map(|(_, header)| find(header))
        .collect::<Result<Vec<_>>>()?;

    let dates = parse_dates(&records, date_col)?;
    check_monthly(&dates)?;

    // Rows inside the requested range must parse; the month before `start` feeds the lags.
    let lo = opts.start.map_or(0, |d| dates.partition_point(|x| *x < d).saturating_sub(1));
    let hi = opts.end.map_or(dates.len(), |d| dates.partition_point(|x| *x <= d));
    let strict_from = opts.start.map_or(0, |d| dates.partition_point(|x| *x < d));
    let mut raw = Vec::with_capacity(hi.saturating_sub(lo));
    for i in lo..hi.max(lo) {
        let rec = &records[i];
        let mut v = [f64::NAN; 16];
        for (k, &c) in value_cols.iter().enumerate() {
            let cell = rec.get(c).unwrap_or("");
            v[k] = match parse_cell(cell) {
                Some(x) => x,
                None if i >= strict_from => {
                    return Err(Error::data(
                        format!("row {} ({})", i + 2, dates[i]),
                        format!("cannot parse `{cell}` in column `{}`", schema.value_columns()[k].1),
                    ))
                }
                None => f64::NAN,
            };
        }
        raw.push(RawMonthlyRow {
            date: dates[i],
            sp_index: v[0],
            d12: v[1],
            e12: v[2],
            bm: v[3],
            tbl: v[4],
            lty: v[5],
            ltr: v[6],
            aaa: v[7],
            baa: v[8],
            corpr: v[9],
            ntis: v[10],
            infl: v[11],
            rvol: v[12],
            crsp_vw: v[13],
            rfree: v[14],
            y10: v[15],
        });
    }
    let panel = derive_predictors(&raw, opts)?;
    Ok(panel.window(opts.start, opts.end))
}

fn parse_dates(records: &[csv::StringRecord], date_col: usize) -> Result<Vec<YearMonth>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let cell = r.get(date_col).unwrap_or("");
            cell.parse::<YearMonth>()
                .map_err(|_| Error::Format(format!("row {}: unparseable date `{cell}`", i + 2)))
        })
        .collect()
}

fn load_derived(headers: &csv::StringRecord, records: &[csv::StringRecord], opts: &IngestOptions) -> Result<PredictorPanel> {
    let hdr: Vec<&str> = headers.iter().collect();
    if hdr.first() != Some(&"yyyymm") {
        return Err(Error::Schema { column: "yyyymm".into() });
    }
    for name in PANEL_TAIL {
        if !hdr.contains(&name) {
            return Err(Error::Schema { column: name.into() });
        }
    }
    let n_pred = hdr.len() - 1 - PANEL_TAIL.len();
    if hdr[1 + n_pred..] != PANEL_TAIL {
        return Err(Error::Format("derived panel must end with r_log,r_simple,slope,rf,market".into()));
    }
    let names: Vec<String> = hdr[1..1 + n_pred].iter().map(|s| s.to_string()).collect();
    let dates = parse_dates(records, 0)?;
    check_monthly(&dates)?;
    let mut cols = vec![Vec::with_capacity(records.len()); hdr.len() - 1];
    for (i, rec) in records.iter().enumerate() {
        for (k, col) in cols.iter_mut().enumerate() {
            let cell = rec.get(k + 1).unwrap_or("");
            let v = parse_cell(cell)
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::data(format!("row {} ({})", i + 2, dates[i]), format!("bad value `{cell}` in `{}`", hdr[k + 1])))?;
            col.push(v);
        }
    }
    let mut tail = cols.split_off(n_pred).into_iter();
    let mut next = || tail.next().expect("tail columns present");
    let panel = PredictorPanel::new(dates, names, cols, next(), next(), next(), next(), next())?;
    Ok(panel.window(opts.start, opts.end))
}

fn positive_log(v: f64, what: &str, date: YearMonth) -> Result<f64> {
    if v.is_nan() {
        Ok(f64::NAN)
    } else if v > 0.0 {
        Ok(v.ln())
    } else {
        Err(Error::data(date, format!("{what} = {v} is not positive; log undefined")))
    }
}

/// Derives the sixteen predictors, returns and slope from raw rows.
///
/// Leading months where any derived series is unavailable are trimmed; a gap
/// after the first complete month is an error.
pub fn derive_predictors(raw: &[RawMonthlyRow], opts: &IngestOptions) -> Result<PredictorPanel> {
    let dates: Vec<YearMonth> = raw.iter().map(|r| r.date).collect();
    check_monthly(&dates)?;
    let n = raw.len();
    let mut x = vec![Vec::with_capacity(n); PREDICTOR_NAMES.len()];
    let mut r_log = Vec::with_capacity(n);
    let mut r_simple = Vec::with_capacity(n);
    let mut slope = Vec::with_capacity(n);
    let mut rf = Vec::with_capacity(n);
    let mut market = Vec::with_capacity(n);

    let mut prev_log_sp = f64::NAN;
    let mut prev_infl = f64::NAN;
    let mut prev_r_log = f64::NAN;
    for row in raw {
        let d = row.date;
        let log_sp = positive_log(row.sp_index, "sp_index", d)?;
        let log_d = positive_log(row.d12, "d12", d)?;
        let log_e = positive_log(row.e12, "e12", d)?;
        let rl = (1.0 + row.crsp_vw).ln() - (1.0 + row.rfree).ln();
        let rs = match opts.excess_form {
            ExcessForm::Ratio => (1.0 + row.crsp_vw) / (1.0 + row.rfree) - 1.0,
            ExcessForm::Arithmetic => row.crsp_vw - row.rfree,
        };
        let infl = if opts.lag_inflation { prev_infl } else { row.infl };
        let values = [
            log_d - log_sp,
            log_d - prev_log_sp,
            log_e - log_sp,
            log_d - log_e,
            row.rvol,
            row.bm,
            row.ntis,
            row.tbl,
            row.lty,
            row.ltr,
            row.lty - row.tbl,
            row.baa - row.aaa,
            row.corpr - row.ltr,
            infl,
            prev_r_log,
            row.corpr - row.rfree,
        ];
        for (col, v) in x.iter_mut().zip(values) {
            col.push(v);
        }
        r_log.push(rl);
        r_simple.push(rs);
        slope.push(row.y10 - row.tbl);
        rf.push(row.rfree);
        market.push(row.crsp_vw);

        prev_log_sp = log_sp;
        prev_infl = row.infl;
        prev_r_log = rl;
    }

    let complete = |t: usize| {
        x.iter().all(|c| c[t].is_finite())
            && [&r_log, &r_simple, &slope, &rf, &market].iter().all(|c| c[t].is_finite())
    };
    let first = (0..n).find(|&t| complete(t)).unwrap_or(n);
    if let Some(t) = (first..n).find(|&t| !complete(t)) {
        let names = PREDICTOR_NAMES.iter().chain(PANEL_TAIL.iter());
        let cols = x.iter().chain([&r_log, &r_simple, &slope, &rf, &market]);
        let missing: Vec<&str> = names.zip(cols).filter(|(_, c)| !c[t].is_finite()).map(|(n, _)| *n).collect();
        return Err(Error::data(dates[t], format!("missing value(s) after sample start: {}", missing.join(", "))));
    }

    let panel = PredictorPanel::new(
        dates,
        PREDICTOR_NAMES.iter().map(|s| s.to_string()).collect(),
        x,
        r_log,
        r_simple,
        slope,
        rf,
        market,
    )?;
    Ok(panel.slice(first, n))
}
