//! Design and analysis of randomized trials whose primary outcome is a
//! favourable event (recovery, improvement, extubation) subject to the
//! competing event death within a fixed horizon.
//!
//! - [`model`] — closed-form cumulative incidence, subdistribution hazard,
//!   restricted mean and median under constant event-specific hazards.
//! - [`estimators`] — Kaplan-Meier, Aalen-Johansen, the subdistribution
//!   product-limit estimator and two-sample logrank tests (including Gray's
//!   test on censored subdistribution times).
//! - [`design`] — Schoenfeld-style sample-size planning on the event-specific
//!   hazard, subdistribution hazard, or odds-ratio scale, plus scenario tables.
//! - [`simulate`] — reproducible Monte Carlo evaluation of operating
//!   characteristics and blinded sample-size recalculation.

pub mod data;
pub mod design;
pub mod error;
pub mod estimators;
pub mod model;
pub mod simulate;
pub mod stats;
pub mod stepfn;

pub use data::{Arm, Cause, EventRecord, Status};
pub use error::{Error, Result};
pub use model::{
    ArmHazards, CumulativeIncidencePair, EffectMeasures, ScenarioSpec, SubdistributionTime,
};
pub use stepfn::StepFunction;
