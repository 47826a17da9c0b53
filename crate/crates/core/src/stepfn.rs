//! Right-continuous step functions: the shared representation of estimated
//! survival and cumulative-incidence curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SubdistributionTime;

/// A right-continuous piecewise-constant probability curve on `[0, inf)`,
/// stored sparsely as jump times (strictly increasing, positive) with the
/// value attained at each jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepFunction", into = "RawStepFunction")]
pub struct StepFunction {
    value_at_zero: f64,
    times: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawStepFunction {
    value_at_zero: f64,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl From<StepFunction> for RawStepFunction {
    fn from(f: StepFunction) -> RawStepFunction {
        RawStepFunction {
            value_at_zero: f.value_at_zero,
            times: f.times,
            values: f.values,
        }
    }
}

impl TryFrom<RawStepFunction> for StepFunction {
    type Error = Error;

    fn try_from(raw: RawStepFunction) -> Result<StepFunction> {
        StepFunction::new(raw.value_at_zero, raw.times, raw.values)
    }
}

// Estimator arithmetic may land a hair outside [0, 1]; tolerate and clamp.
const UNIT_SLACK: f64 = 1e-9;

impl StepFunction {
    pub fn new(value_at_zero: f64, times: Vec<f64>, values: Vec<f64>) -> Result<StepFunction> {
        if times.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} jump times but {} values",
                times.len(),
                values.len()
            )));
        }
        let mut prev = 0.0;
        for &t in &times {
            if !t.is_finite() || t <= prev {
                return Err(Error::InvalidParameter(format!(
                    "jump times must be finite, positive and strictly increasing; \
                     got {t} after {prev}"
                )));
            }
            prev = t;
        }
        let clamp_unit = |v: f64| -> Result<f64> {
            if !v.is_finite() || !(-UNIT_SLACK..=1.0 + UNIT_SLACK).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "curve values must lie in [0, 1], got {v}"
                )));
            }
            Ok(v.clamp(0.0, 1.0))
        };
        Ok(StepFunction {
            value_at_zero: clamp_unit(value_at_zero)?,
            values: values.into_iter().map(clamp_unit).collect::<Result<_>>()?,
            times,
        })
    }

    /// A curve without jumps.
    pub fn constant(value: f64) -> StepFunction {
        StepFunction {
            value_at_zero: value,
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn value_at_zero(&self) -> f64 {
        self.value_at_zero
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value after the last jump (the whole-line value when there is none).
    pub fn terminal_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.value_at_zero)
    }

    /// Right-continuous evaluation at `t >= 0`.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&u| u <= t);
        if idx == 0 {
            self.value_at_zero
        } else {
            self.values[idx - 1]
        }
    }

    /// `(time, value)` pairs of all jumps.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    /// Exact integral over `[0, upper]` (rectangles between jumps).
    pub fn integral_to(&self, upper: f64) -> f64 {
        assert!(upper >= 0.0, "integration bound must be nonnegative");
        let mut total = 0.0;
        let mut seg_start = 0.0;
        let mut seg_value = self.value_at_zero;
        for (t, v) in self.points() {
            if t >= upper {
                break;
            }
            total += seg_value * (t - seg_start);
            seg_start = t;
            seg_value = v;
        }
        total + seg_value * (upper - seg_start)
    }

    /// First time the curve reaches `level`: `inf{t : f(t) >= level}`.
    pub fn first_time_at_or_above(&self, level: f64) -> SubdistributionTime {
        if self.value_at_zero >= level {
            return SubdistributionTime::Finite(0.0);
        }
        for (t, v) in self.points() {
            if v >= level {
                return SubdistributionTime::Finite(t);
            }
        }
        SubdistributionTime::Infinite
    }
}
