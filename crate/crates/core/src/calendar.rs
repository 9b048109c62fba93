//! Calendar of the NYC study: simulation epoch and lockdown phase start dates.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::ModelError;
use crate::params::{LockdownSchedule, ThetaSegment};

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && d <= self.end
    }

    /// First wave: epoch to 2020-07-28.
    pub fn first_wave() -> Self {
        Self::new(date(2020, 2, 29), date(2020, 7, 28))
    }

    /// Second wave: 2020-07-29 to 2021-03-25.
    pub fn second_wave() -> Self {
        Self::new(date(2020, 7, 29), date(2021, 3, 25))
    }
}

/// Epoch plus the dates at which θ switches to each fitted phase value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCalendar {
    pub epoch: NaiveDate,
    pub phase_starts: Vec<NaiveDate>,
}

impl Default for PhaseCalendar {
    fn default() -> Self {
        Self {
            epoch: date(2020, 2, 29),
            phase_starts: vec![date(2020, 3, 14), date(2020, 4, 5), date(2020, 5, 28), date(2020, 8, 25)],
        }
    }
}

impl PhaseCalendar {
    /// Days from the epoch (negative before it).
    pub fn day(&self, d: NaiveDate) -> i64 {
        (d - self.epoch).num_days()
    }

    pub fn date_of(&self, day: i64) -> NaiveDate {
        self.epoch + chrono::Duration::days(day)
    }

    /// θ = 1 before the first phase, then `values[k]` from `phase_starts[k]`.
    pub fn schedule(&self, values: &[f64]) -> Result<LockdownSchedule, ModelError> {
        if values.len() != self.phase_starts.len() {
            return Err(ModelError::InvalidParams(format!(
                "{} theta values for {} phases",
                values.len(),
                self.phase_starts.len()
            )));
        }
        let mut segs = vec![ThetaSegment { start_day: 0, value: 1.0 }];
        for (&d, &value) in self.phase_starts.iter().zip(values) {
            let day = self.day(d);
            if day <= 0 {
                return Err(ModelError::InvalidParams(format!("phase start {d} not after epoch")));
            }
            segs.push(ThetaSegment { start_day: day as u32, value });
        }
        LockdownSchedule::new(segs)
    }
}
