//! Rate constants of the n-group model and the piecewise lockdown multiplier.

use serde::{Deserialize, Serialize};

use crate::model::ModelError;

/// One segment of the lockdown multiplier: `value` applies from `start_day` until the next segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSegment {
    pub start_day: u32,
    pub value: f64,
}

/// Piecewise-constant θ(t). The first segment starts at day 0 and the last extends forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ThetaSegment>", into = "Vec<ThetaSegment>")]
pub struct LockdownSchedule {
    segments: Vec<ThetaSegment>,
}

impl LockdownSchedule {
    pub fn new(segments: Vec<ThetaSegment>) -> Result<Self, ModelError> {
        if segments.is_empty() {
            return Err(ModelError::InvalidParams("lockdown schedule is empty".into()));
        }
        if segments[0].start_day != 0 {
            return Err(ModelError::InvalidParams(
                "lockdown schedule must start at day 0".into(),
            ));
        }
        for w in segments.windows(2) {
            if w[1].start_day <= w[0].start_day {
                return Err(ModelError::InvalidParams(format!(
                    "lockdown start days must be strictly increasing ({} then {})",
                    w[0].start_day, w[1].start_day
                )));
            }
        }
        for s in &segments {
            if !(0.0..=1.0).contains(&s.value) {
                return Err(ModelError::InvalidParams(format!(
                    "theta value {} at day {} outside [0, 1]",
                    s.value, s.start_day
                )));
            }
        }
        Ok(Self { segments })
    }

    /// θ = value for all t.
    pub fn constant(value: f64) -> Result<Self, ModelError> {
        Self::new(vec![ThetaSegment { start_day: 0, value }])
    }

    pub fn segments(&self) -> &[ThetaSegment] {
        &self.segments
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self
            .segments
            .iter()
            .rposition(|s| f64::from(s.start_day) <= t)
            .unwrap_or(0);
        self.segments[idx].value
    }

    /// Days strictly inside (0, t_end) at which θ changes.
    pub fn breakpoints(&self, t_end: f64) -> Vec<f64> {
        self.segments
            .iter()
            .skip(1)
            .map(|s| f64::from(s.start_day))
            .filter(|&d| d > 0.0 && d < t_end)
            .collect()
    }

    /// Replaces the value of segment `index`.
    pub fn with_value(&self, index: usize, value: f64) -> Result<Self, ModelError> {
        let mut segments = self.segments.clone();
        let seg = segments.get_mut(index).ok_or_else(|| {
            ModelError::InvalidParams(format!("no lockdown segment {index}"))
        })?;
        seg.value = value;
        Self::new(segments)
    }
}

impl TryFrom<Vec<ThetaSegment>> for LockdownSchedule {
    type Error = ModelError;
    fn try_from(v: Vec<ThetaSegment>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<LockdownSchedule> for Vec<ThetaSegment> {
    fn from(s: LockdownSchedule) -> Self {
        s.segments
    }
}

/// All rate constants. Rates are per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta_a: f64,
    pub beta_i: f64,
    pub beta_h: f64,
    pub xi: f64,
    pub sigma_e: f64,
    pub sigma_i: f64,
    pub gamma_a: f64,
    pub gamma_h: f64,
    pub delta_h: f64,
    pub r: f64,
    pub q: f64,
    /// Behavior exponents, one per group.
    pub a: Vec<f64>,
    /// `c_b[i][j]`: rate at which group i pulls members of group j toward it.
    pub c_b: Vec<Vec<f64>>,
    pub theta: LockdownSchedule,
}

/// NYC 2020 population.
pub const NYC_POPULATION: f64 = 8_336_817.0;

/// Fitted lockdown multipliers of the two-group model, phases 1 to 4.
pub const TWO_GROUP_THETA: [f64; 4] = [0.74664, 0.00133, 0.15427, 0.30970];

/// Fitted lockdown multipliers of the behavior-free model, phases 1 to 4.
pub const BEHAVIOR_FREE_THETA: [f64; 4] = [0.45, 0.0153, 0.178, 0.248];

/// Phase start days counted from 2020-02-29: Mar 14, Apr 5, May 28, Aug 25 2020.
pub const NYC_PHASE_DAYS: [u32; 4] = [14, 36, 89, 178];

impl ModelParams {
    /// Two-group NYC baseline: fixed rates plus fitted behavior and lockdown values.
    pub fn nyc_two_group() -> Self {
        Self::nyc_fixed(
            vec![8000.0, 2800.0],
            vec![vec![0.0, 1.0 / 30.0], vec![1.0 / 90.0, 0.0]],
            nyc_schedule(TWO_GROUP_THETA),
        )
    }

    /// Single-group model without behavior terms, fitted lockdown values.
    pub fn nyc_behavior_free() -> Self {
        Self::nyc_fixed(vec![0.0], vec![vec![0.0]], nyc_schedule(BEHAVIOR_FREE_THETA))
    }

    fn nyc_fixed(a: Vec<f64>, c_b: Vec<Vec<f64>>, theta: LockdownSchedule) -> Self {
        Self {
            beta_a: 0.625,
            beta_i: 0.375,
            beta_h: 0.0,
            xi: 1.0 / 180.0,
            sigma_e: 0.25,
            sigma_i: 1.0 / 14.0,
            gamma_a: 1.0 / 9.0,
            gamma_h: 0.1,
            delta_h: 0.41,
            r: 0.6,
            q: 0.05,
            a,
            c_b,
            theta,
        }
    }

    pub fn groups(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let rates = [
            ("beta_a", self.beta_a),
            ("beta_i", self.beta_i),
            ("beta_h", self.beta_h),
            ("xi", self.xi),
            ("sigma_e", self.sigma_e),
            ("sigma_i", self.sigma_i),
            ("gamma_a", self.gamma_a),
            ("gamma_h", self.gamma_h),
            ("delta_h", self.delta_h),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidParams(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        for (name, v) in [("r", self.r), ("q", self.q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ModelError::InvalidParams(format!("{name} = {v} outside [0, 1]")));
            }
        }
        let n = self.groups();
        if n == 0 {
            return Err(ModelError::InvalidParams("at least one group required".into()));
        }
        if let Some(v) = self.a.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(ModelError::InvalidParams(format!("behavior exponent {v} must be >= 0")));
        }
        if self.c_b.len() != n || self.c_b.iter().any(|row| row.len() != n) {
            return Err(ModelError::InvalidParams(format!(
                "c_b must be {n}x{n} to match a"
            )));
        }
        for (i, row) in self.c_b.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i == j && v != 0.0 {
                    return Err(ModelError::InvalidParams(format!("c_b[{i}][{i}] must be 0")));
                }
                if !(v.is_finite() && v >= 0.0) {
                    return Err(ModelError::InvalidParams(format!("c_b[{i}][{j}] = {v} must be >= 0")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let p: Self = serde_json::from_str(s).map_err(|e| ModelError::InvalidParams(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

/// θ = 1 before the first NYC phase, then the four given values.
pub fn nyc_schedule(theta: [f64; 4]) -> LockdownSchedule {
    let mut segs = vec![ThetaSegment { start_day: 0, value: 1.0 }];
    segs.extend(
        NYC_PHASE_DAYS
            .iter()
            .zip(theta)
            .map(|(&start_day, value)| ThetaSegment { start_day, value }),
    );
    LockdownSchedule::new(segs).expect("valid NYC schedule")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_lookup_is_left_closed() {
        let s = nyc_schedule(TWO_GROUP_THETA);
        assert_eq!(s.value_at(0.0), 1.0);
        assert_eq!(s.value_at(13.999), 1.0);
        assert_eq!(s.value_at(14.0), 0.74664);
        assert_eq!(s.value_at(1e6), 0.30970);
        assert_eq!(s.breakpoints(100.0), vec![14.0, 36.0, 89.0]);
    }

    #[test]
    fn schedule_rejects_bad_segments() {
        let seg = |start_day, value| ThetaSegment { start_day, value };
        assert!(LockdownSchedule::new(vec![]).is_err());
        assert!(LockdownSchedule::new(vec![seg(1, 0.5)]).is_err());
        assert!(LockdownSchedule::new(vec![seg(0, 0.5), seg(0, 0.4)]).is_err());
        assert!(LockdownSchedule::new(vec![seg(0, 1.2)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = ModelParams::nyc_two_group();
        let back = ModelParams::from_json(&p.to_json()).unwrap();
        assert_eq!(p, back);
        let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        for key in [
            "beta_a", "beta_i", "beta_h", "xi", "sigma_e", "sigma_i", "gamma_a", "gamma_h",
            "delta_h", "r", "q", "a", "c_b", "theta",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["theta"][1]["start_day"], 14);
    }

    #[test]
    fn validation_catches_shape_and_diagonal() {
        let mut p = ModelParams::nyc_two_group();
        p.c_b[0][0] = 0.1;
        assert!(p.validate().is_err());
        let mut p = ModelParams::nyc_two_group();
        p.a.push(1.0);
        assert!(p.validate().is_err());
        let mut p = ModelParams::nyc_two_group();
        p.q = 1.5;
        assert!(p.validate().is_err());
        assert!(ModelParams::nyc_behavior_free().validate().is_ok());
    }
}
