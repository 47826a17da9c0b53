//! Subject-level trial data: one record per subject with time to and type of
//! first event.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Randomized arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "T")]
    Treatment,
    #[serde(rename = "C")]
    Control,
}

impl Arm {
    pub fn label(self) -> &'static str {
        match self {
            Arm::Treatment => "T",
            Arm::Control => "C",
        }
    }

    pub fn from_label(label: &str) -> Option<Arm> {
        match label {
            "T" => Some(Arm::Treatment),
            "C" => Some(Arm::Control),
            _ => None,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Observed endpoint of one subject's follow-up.
///
/// Wire code (CSV `status` column, JSON): 0 censored, 1 favourable, 2 competing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Status {
    Censored,
    Favourable,
    Competing,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Censored => 0,
            Status::Favourable => 1,
            Status::Competing => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Status> {
        match code {
            0 => Some(Status::Censored),
            1 => Some(Status::Favourable),
            2 => Some(Status::Competing),
            _ => None,
        }
    }

    /// True for both event types, false for censoring.
    pub fn is_event(self) -> bool {
        self != Status::Censored
    }
}

impl From<Status> for u8 {
    fn from(status: Status) -> u8 {
        status.code()
    }
}

impl TryFrom<u8> for Status {
    type Error = Error;

    fn try_from(code: u8) -> Result<Status> {
        Status::from_code(code)
            .ok_or_else(|| Error::InvalidParameter(format!("status code {code} not in {{0,1,2}}")))
    }
}

/// Event type, excluding censoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cause {
    Favourable,
    Competing,
}

impl Cause {
    pub fn status(self) -> Status {
        match self {
            Cause::Favourable => Status::Favourable,
            Cause::Competing => Status::Competing,
        }
    }
}

/// One subject: time to first event (or censoring) and its type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub id: u64,
    pub arm: Arm,
    pub time: f64,
    pub status: Status,
}

impl EventRecord {
    pub fn new(id: u64, arm: Arm, time: f64, status: Status) -> Result<EventRecord> {
        if !time.is_finite() || time <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "event time must be finite and positive, got {time}"
            )));
        }
        Ok(EventRecord {
            id,
            arm,
            time,
            status,
        })
    }
}
