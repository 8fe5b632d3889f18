mod common;

use std::io::Cursor;

use aei_backtest::data::{load_panel, load_panel_from_reader, IngestOptions, Schema};
use aei_backtest::date::YearMonth;
use aei_backtest::Error;
use proptest::prelude::*;

use common::raw_csv;

fn ym(code: i64) -> YearMonth {
    YearMonth::from_yyyymm(code).unwrap()
}

fn load(text: &str, opts: &IngestOptions) -> aei_backtest::Result<aei_backtest::data::PredictorPanel> {
    load_panel_from_reader(Cursor::new(text.as_bytes()), &Schema::default(), opts)
}

fn months(a: i64, b: i64) -> usize {
    (ym(a).months_until(ym(b)) + 1) as usize
}

#[test]
fn full_postwar_range() {
    let text = raw_csv(ym(194912), months(194912, 202009), 1);
    let opts = IngestOptions { start: Some(ym(195001)), end: Some(ym(202009)), ..Default::default() };
    let p = load(&text, &opts).unwrap();
    assert_eq!(p.len(), 849);
    assert_eq!(p.dates()[0], ym(195001));
}

#[test]
fn main_sample_has_729_months() {
    let text = raw_csv(ym(195001), months(195001, 202009), 2);
    let opts = IngestOptions { start: Some(ym(196001)), end: Some(ym(202009)), ..Default::default() };
    assert_eq!(load(&text, &opts).unwrap().len(), 729);
    // Without an earlier month the first row has no lags and is trimmed.
    let text = raw_csv(ym(195001), months(195001, 202009), 2);
    assert_eq!(load(&text, &IngestOptions::default()).unwrap().len(), 848);
}

#[test]
fn missing_column_is_named() {
    let text = raw_csv(ym(199001), 24, 3).replace(",lty,", ",long_yield,");
    match load(&text, &IngestOptions::default()) {
        Err(Error::Schema { column }) => assert_eq!(column, "lty"),
        other => panic!("expected schema error, got {other:?}"),
    }
}

#[test]
fn schema_map_renames_columns() {
    let text = raw_csv(ym(199001), 24, 3).replace(",lty,", ",long_yield,");
    let schema: Schema = toml::from_str("lty = \"long_yield\"").unwrap();
    let p = load_panel_from_reader(Cursor::new(text.as_bytes()), &schema, &IngestOptions::default()).unwrap();
    assert_eq!(p.len(), 23);
}

#[test]
fn non_monotone_dates_are_a_format_error() {
    let text = raw_csv(ym(199001), 24, 3);
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(5, 6);
    let err = load(&lines.join("\n"), &IngestOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Format(_)), "{err}");
}

#[test]
fn unparseable_cell_reports_row() {
    let text = raw_csv(ym(199001), 24, 3);
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[10] = lines[10].replacen(",0.", ",abc", 1);
    let err = load(&lines.join("\n"), &IngestOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Data { .. }) && err.to_string().contains("row 11"), "{err}");
}

#[test]
fn round_trip_is_bit_exact() {
    let text = raw_csv(ym(195001), 240, 4);
    let p = load(&text, &IngestOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    p.write_csv(&path).unwrap();
    let q = load_panel(&path, &Schema::default(), &IngestOptions::default()).unwrap();
    assert_eq!(p, q);
}

#[test]
fn no_look_ahead() {
    let text = raw_csv(ym(195001), 120, 5);
    let base = load(&text, &IngestOptions::default()).unwrap();
    // Perturb every row after 1955:06 (line index = months from start + 1).
    let cut = ym(195001).months_until(ym(195506)) as usize + 1;
    let perturbed: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i > cut {
                let mut cells: Vec<String> = l.split(',').map(String::from).collect();
                for c in cells.iter_mut().skip(1) {
                    let v: f64 = c.parse().unwrap();
                    *c = (v * 1.37 + 0.001).to_string();
                }
                cells.join(",")
            } else {
                l.to_string()
            }
        })
        .collect();
    let other = load(&perturbed.join("\n"), &IngestOptions::default()).unwrap();
    let t = base.index_of(ym(195506)).unwrap();
    for i in 0..16 {
        assert_eq!(base.predictor(i)[..=t], other.predictor(i)[..=t], "predictor {i}");
    }
    assert_eq!(base.r_simple[..=t], other.r_simple[..=t]);
    assert_eq!(base.slope[..=t], other.slope[..=t]);
}

#[test]
fn index_rescaling() {
    let text = raw_csv(ym(195001), 60, 6);
    let base = load(&text, &IngestOptions::default()).unwrap();
    let k = 3.5;
    let scaled: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                return l.to_string();
            }
            let mut cells: Vec<String> = l.split(',').map(String::from).collect();
            for c in &mut cells[1..=3] {
                *c = (c.parse::<f64>().unwrap() * k).to_string();
            }
            cells.join(",")
        })
        .collect();
    let other = load(&scaled.join("\n"), &IngestOptions::default()).unwrap();
    // dp, dy, ep shift by an additive constant only when D12/E12 scale with the index;
    // scaling Index, D12, E12 together leaves the ratios unchanged up to rounding.
    for i in 0..4 {
        for t in 0..base.len() {
            assert!((base.predictor(i)[t] - other.predictor(i)[t]).abs() < 1e-12);
        }
    }
    for i in [10, 11, 12] {
        assert_eq!(base.predictor(i), other.predictor(i));
    }
    assert_eq!(base.slope, other.slope);
}

#[test]
fn index_only_rescaling_shifts_price_ratios_by_constant() {
    let text = raw_csv(ym(195001), 60, 7);
    let base = load(&text, &IngestOptions::default()).unwrap();
    let k: f64 = 10.0;
    let scaled: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                return l.to_string();
            }
            let mut cells: Vec<String> = l.split(',').map(String::from).collect();
            cells[1] = (cells[1].parse::<f64>().unwrap() * k).to_string();
            cells.join(",")
        })
        .collect();
    let other = load(&scaled.join("\n"), &IngestOptions::default()).unwrap();
    for i in 0..3 {
        for t in 0..base.len() {
            assert!((other.predictor(i)[t] - base.predictor(i)[t] + k.ln()).abs() < 1e-12);
        }
    }
    assert_eq!(base.predictor(3), other.predictor(3));
    for i in [10, 11, 12] {
        assert_eq!(base.predictor(i), other.predictor(i));
    }
    assert_eq!(base.slope, other.slope);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn derived_round_trip(seed in 0u64..1000, n in 14usize..80) {
        let p = load(&raw_csv(ym(196001), n, seed), &IngestOptions::default()).unwrap();
        let mut buf = Vec::new();
        p.write_csv_to(&mut buf).unwrap();
        let q = load_panel_from_reader(Cursor::new(buf), &Schema::default(), &IngestOptions::default()).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn ratio_excess_is_log_consistent(seed in 0u64..1000) {
        let p = load(&raw_csv(ym(196001), 36, seed), &IngestOptions::default()).unwrap();
        for t in 0..p.len() {
            prop_assert!((p.r_log[t] - p.r_simple[t].ln_1p()).abs() < 1e-12);
        }
    }
}
