use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::CalibrationError;

/// Column names of the hospitalization CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesColumns {
    pub date: String,
    pub count: String,
}

impl Default for SeriesColumns {
    fn default() -> Self {
        Self { date: "date_of_interest".into(), count: "HOSPITALIZED_COUNT".into() }
    }
}

/// Contiguous daily hospitalization counts with their trailing 7-day mean.
#[derive(Debug, Clone, PartialEq)]
pub struct HospitalizationSeries {
    dates: Vec<NaiveDate>,
    counts: Vec<f64>,
    avg7: Vec<Option<f64>>,
}

impl HospitalizationSeries {
    pub fn new(start: NaiveDate, counts: Vec<f64>) -> Result<Self, CalibrationError> {
        let dates = (0..counts.len()).map(|i| start + chrono::Duration::days(i as i64)).collect();
        Self::from_pairs(dates, counts)
    }

    /// Sorts by date, then rejects duplicates, gaps and negative counts.
    pub fn from_pairs(dates: Vec<NaiveDate>, counts: Vec<f64>) -> Result<Self, CalibrationError> {
        if dates.len() != counts.len() || dates.is_empty() {
            return Err(CalibrationError::Data("series is empty or misaligned".into()));
        }
        let mut pairs: Vec<(NaiveDate, f64)> = dates.into_iter().zip(counts).collect();
        pairs.sort_by_key(|p| p.0);
        if let Some((d, v)) = pairs.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(CalibrationError::Data(format!("count {v} on {d} is negative or not finite")));
        }
        let mut gaps = Vec::new();
        for w in pairs.windows(2) {
            let step = (w[1].0 - w[0].0).num_days();
            if step == 0 {
                return Err(CalibrationError::Data(format!("duplicate date {}", w[0].0)));
            }
            if step > 1 {
                gaps.push(format!("{}..{}", w[0].0.succ_opt().unwrap_or(w[0].0), w[1].0.pred_opt().unwrap_or(w[1].0)));
            }
        }
        if !gaps.is_empty() {
            return Err(CalibrationError::Gaps(gaps));
        }
        let (dates, counts): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let avg7 = (0..counts.len())
            .map(|i| (i >= 6).then(|| counts[i - 6..=i].iter().sum::<f64>() / 7.0))
            .collect();
        Ok(Self { dates, counts, avg7 })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// Mean of the day and the previous six; `None` for the first six days.
    pub fn avg7(&self) -> &[Option<f64>] {
        &self.avg7
    }

    pub fn start(&self) -> NaiveDate {
        self.dates[0]
    }

    pub fn end(&self) -> NaiveDate {
        *self.dates.last().expect("non-empty series")
    }

    pub fn index_of(&self, d: NaiveDate) -> Option<usize> {
        let i = (d - self.start()).num_days();
        (0..self.len() as i64).contains(&i).then_some(i as usize)
    }

    pub fn avg7_on(&self, d: NaiveDate) -> Option<f64> {
        self.index_of(d).and_then(|i| self.avg7[i])
    }

    /// Restricts to an inclusive date range (the trailing mean is recomputed).
    pub fn slice(&self, start: NaiveDate, end: NaiveDate) -> Result<Self, CalibrationError> {
        let (Some(a), Some(b)) = (self.index_of(start), self.index_of(end)) else {
            return Err(CalibrationError::Data(format!("{start}..{end} outside the series")));
        };
        Self::from_pairs(self.dates[a..=b].to_vec(), self.counts[a..=b].to_vec())
    }
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%m/%d/%Y"))
        .ok()
        .or_else(|| s.get(..10).and_then(|p| NaiveDate::parse_from_str(p, "%Y-%m-%d").ok()))
}

pub fn load_series(path: impl AsRef<Path>, columns: &SeriesColumns) -> Result<HospitalizationSeries, CalibrationError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| CalibrationError::Data(format!("cannot open {}: {e}", path.display())))?;
    read_series(file, columns)
}

/// Column lookup is case-insensitive.
pub fn read_series<R: Read>(reader: R, columns: &SeriesColumns) -> Result<HospitalizationSeries, CalibrationError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CalibrationError::Data(e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
            .ok_or_else(|| CalibrationError::Data(format!("column {name} not found")))
    };
    let (di, ci) = (find(&columns.date)?, find(&columns.count)?);
    let mut dates = Vec::new();
    let mut counts = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CalibrationError::Data(e.to_string()))?;
        let row = line + 2;
        let raw_date = rec.get(di).unwrap_or("");
        let d = parse_date(raw_date)
            .ok_or_else(|| CalibrationError::Data(format!("row {row}: unparseable date {raw_date:?}")))?;
        let raw = rec.get(ci).unwrap_or("");
        let v: f64 = raw
            .replace(',', "")
            .parse()
            .map_err(|_| CalibrationError::Data(format!("row {row}: unparseable count {raw:?}")))?;
        dates.push(d);
        counts.push(v);
    }
    HospitalizationSeries::from_pairs(dates, counts)
}
