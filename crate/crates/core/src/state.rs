//! Ex-ante yield-curve states and ex-post business-cycle labels.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::date::YearMonth;
use crate::error::{Error, Result};

/// Yield-curve state observed at month end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MarketState {
    Up,
    Down,
}

impl MarketState {
    /// Strict inversion is `Down`; a flat curve counts as `Up`.
    pub fn from_slope(slope: f64) -> Self {
        if slope < 0.0 {
            MarketState::Down
        } else {
            MarketState::Up
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MarketState::Up => "up",
            MarketState::Down => "down",
        }
    }
}

/// NBER business-cycle phase. Used for evaluation splits only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CyclePhase {
    Expansion,
    Recession,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSeries {
    pub dates: Vec<YearMonth>,
    pub updown: Vec<MarketState>,
    pub nber: Option<Vec<CyclePhase>>,
}

impl StateSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn state_at(&self, date: YearMonth) -> Option<MarketState> {
        let i = self.index_of(date)?;
        Some(self.updown[i])
    }

    pub fn phase_at(&self, date: YearMonth) -> Option<CyclePhase> {
        let i = self.index_of(date)?;
        self.nber.as_ref().map(|n| n[i])
    }

    fn index_of(&self, date: YearMonth) -> Option<usize> {
        let first = *self.dates.first()?;
        let i = usize::try_from(first.months_until(date)).ok()?;
        (i < self.len()).then_some(i)
    }
}

pub fn classify_updown(dates: &[YearMonth], slope: &[f64]) -> Result<StateSeries> {
    if dates.len() != slope.len() {
        return Err(Error::Format(format!("{} dates for {} slope values", dates.len(), slope.len())));
    }
    let updown = dates
        .iter()
        .zip(slope)
        .map(|(d, &s)| {
            if s.is_finite() {
                Ok(MarketState::from_slope(s))
            } else {
                Err(Error::data(d, format!("non-finite yield slope {s}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StateSeries {
        dates: dates.to_vec(),
        updown,
        nber: None,
    })
}

/// Attaches 0/1 recession labels. `labels` may extend beyond the state dates on either side.
pub fn attach_nber(mut states: StateSeries, labels: &[(YearMonth, u8)]) -> Result<StateSeries> {
    let mut out = Vec::with_capacity(states.len());
    let mut j = 0;
    for &d in &states.dates {
        while j < labels.len() && labels[j].0 < d {
            j += 1;
        }
        match labels.get(j) {
            Some(&(ld, v)) if ld == d => out.push(match v {
                0 => CyclePhase::Expansion,
                1 => CyclePhase::Recession,
                other => return Err(Error::data(d, format!("recession label {other} is not 0/1"))),
            }),
            _ => return Err(Error::data(d, "no recession label for this month")),
        }
    }
    states.nber = Some(out);
    Ok(states)
}

/// Reads a `yyyymm,usrec` file. Any header names are accepted; the first two columns are used.
pub fn load_nber_csv(path: &Path) -> Result<Vec<(YearMonth, u8)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let loc = format!("{} row {}", path.display(), i + 2);
        let date: YearMonth = rec.get(0).unwrap_or("").parse().map_err(|_| Error::data(&loc, "bad date"))?;
        let raw = rec.get(1).unwrap_or("");
        let label = raw
            .parse::<f64>()
            .ok()
            .filter(|v| *v == 0.0 || *v == 1.0)
            .ok_or_else(|| Error::data(&loc, format!("label `{raw}` is not 0/1")))?;
        out.push((date, label as u8));
    }
    for w in out.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::Format(format!("{}: dates not increasing at {}", path.display(), w[1].0)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn months(start: (i32, u32), n: usize) -> Vec<YearMonth> {
        let s = YearMonth::new(start.0, start.1).unwrap();
        (0..n).map(|i| s.add_months(i as i64)).collect()
    }

    #[test]
    fn slope_sign_rules() {
        let dates = months((2000, 1), 3);
        let s = classify_updown(&dates, &[0.015, -0.002, 0.0]).unwrap();
        assert_eq!(s.updown, vec![MarketState::Up, MarketState::Down, MarketState::Up]);
    }

    #[test]
    fn non_finite_slope_is_a_data_error() {
        let dates = months((2000, 1), 2);
        let err = classify_updown(&dates, &[0.01, f64::NAN]).unwrap_err();
        assert!(err.to_string().contains("200002"));
    }

    #[test]
    fn recession_labels_for_great_recession() {
        let dates = months((2005, 1), 72);
        let labels: Vec<(YearMonth, u8)> = months((2004, 1), 100)
            .into_iter()
            .map(|d| (d, u8::from(d.yyyymm() >= 200712 && d.yyyymm() <= 200906)))
            .collect();
        let states = classify_updown(&dates, &vec![0.01; 72]).unwrap();
        let s = attach_nber(states, &labels).unwrap();
        let rec = s.nber.unwrap().iter().filter(|p| **p == CyclePhase::Recession).count();
        assert_eq!(rec, 19);
    }

    #[test]
    fn all_zero_labels_are_expansion() {
        let dates = months((2005, 1), 10);
        let labels: Vec<_> = dates.iter().map(|d| (*d, 0u8)).collect();
        let s = attach_nber(classify_updown(&dates, &[0.0; 10]).unwrap(), &labels).unwrap();
        assert!(s.nber.unwrap().iter().all(|p| *p == CyclePhase::Expansion));
    }

    #[test]
    fn short_label_vector_is_rejected() {
        let dates = months((2005, 1), 10);
        let labels: Vec<_> = dates[..8].iter().map(|d| (*d, 0u8)).collect();
        assert!(attach_nber(classify_updown(&dates, &[0.0; 10]).unwrap(), &labels).is_err());
    }
}
