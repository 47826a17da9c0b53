//! Closed-form competing-risks quantities under constant event-specific
//! hazards, and the subdistribution-time view of a favourable outcome.
//!
//! The model has two transitions out of the initial state: a favourable event
//! (recovery, improvement, extubation) with hazard `favourable`, and a
//! competing event (death before the favourable event) with hazard
//! `competing`. The subdistribution time of the favourable event is its
//! occurrence time when it comes first and infinite otherwise; censoring that
//! improper time at the horizon `tau` is what turns cumulative-incidence
//! comparisons into standard product-limit/logrank machinery.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{EventRecord, Status};
use crate::error::{Error, Result};

/// A duration in days that may be infinite (the event never happens).
///
/// Serialized as a JSON number when finite and as the string `"inf"`
/// otherwise; the same token is used in CSV output.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum SubdistributionTime {
    Finite(f64),
    Infinite,
}

impl SubdistributionTime {
    pub fn is_finite(self) -> bool {
        matches!(self, SubdistributionTime::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            SubdistributionTime::Finite(t) => Some(t),
            SubdistributionTime::Infinite => None,
        }
    }
}

impl fmt::Display for SubdistributionTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubdistributionTime::Finite(t) => write!(f, "{t}"),
            SubdistributionTime::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for SubdistributionTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SubdistributionTime::Finite(t) => serializer.serialize_f64(*t),
            SubdistributionTime::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for SubdistributionTime {
    fn deserialize<D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<SubdistributionTime, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Token(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Number(t) => Ok(SubdistributionTime::Finite(t)),
            Repr::Token(s) if s == "inf" => Ok(SubdistributionTime::Infinite),
            Repr::Token(s) => Err(D::Error::custom(format!(
                "expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// Constant event-specific hazards of one arm (per day).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawArmHazards", into = "RawArmHazards")]
pub struct ArmHazards {
    favourable: f64,
    competing: f64,
}

#[derive(Serialize, Deserialize)]
struct RawArmHazards {
    favourable: f64,
    competing: f64,
}

impl From<ArmHazards> for RawArmHazards {
    fn from(h: ArmHazards) -> RawArmHazards {
        RawArmHazards {
            favourable: h.favourable,
            competing: h.competing,
        }
    }
}

impl TryFrom<RawArmHazards> for ArmHazards {
    type Error = Error;

    fn try_from(raw: RawArmHazards) -> Result<ArmHazards> {
        ArmHazards::new(raw.favourable, raw.competing)
    }
}

impl ArmHazards {
    pub fn new(favourable: f64, competing: f64) -> Result<ArmHazards> {
        if !favourable.is_finite() || favourable < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "favourable hazard must be finite and nonnegative, got {favourable}"
            )));
        }
        if !competing.is_finite() || competing < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "competing hazard must be finite and nonnegative, got {competing}"
            )));
        }
        if favourable + competing == 0.0 {
            return Err(Error::InvalidParameter(
                "at least one event-specific hazard must be positive".into(),
            ));
        }
        Ok(ArmHazards {
            favourable,
            competing,
        })
    }

    /// Recover the unique constant hazards consistent with cumulative event
    /// probabilities `(f1, f2)` at the horizon `tau`.
    ///
    /// Inverts the closed-form incidence functions: the all-events hazard is
    /// `-ln(1 - f1 - f2) / tau` and the event-specific hazards split it in
    /// proportion `f1 : f2`.
    pub fn from_cumulative_probabilities(f1: f64, f2: f64, tau: f64) -> Result<ArmHazards> {
        check_horizon(tau)?;
        if !(f1 > 0.0) || !f1.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "favourable-event probability must be positive, got {f1}"
            )));
        }
        if !(f2 >= 0.0) || !f2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "competing-event probability must be nonnegative, got {f2}"
            )));
        }
        let total = f1 + f2;
        if total >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "combined event probability must be below 1 for a finite-hazard \
                 inversion, got {total}"
            )));
        }
        let all_events = -(1.0 - total).ln() / tau;
        ArmHazards::new(all_events * f1 / total, all_events * f2 / total)
    }

    pub fn favourable(&self) -> f64 {
        self.favourable
    }

    pub fn competing(&self) -> f64 {
        self.competing
    }

    /// All-events hazard (sum of the event-specific hazards).
    pub fn total(&self) -> f64 {
        self.favourable + self.competing
    }

    /// Eventual favourable-event probability `favourable / total`.
    pub fn favourable_plateau(&self) -> f64 {
        self.favourable / self.total()
    }

    /// Cumulative event probabilities and event-free probability at time `t`.
    pub fn cumulative_incidence(&self, t: f64) -> Result<CumulativeIncidencePair> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "time must be finite and nonnegative, got {t}"
            )));
        }
        let total = self.total();
        let event_free = (-total * t).exp();
        let cumulative = 1.0 - event_free;
        Ok(CumulativeIncidencePair {
            favourable: self.favourable / total * cumulative,
            competing: self.competing / total * cumulative,
            event_free,
        })
    }

    /// Hazard attached to the favourable-event subdistribution at time `t`:
    /// `(1 + F2(t)/P(T>t))^{-1} * favourable`. Equals the favourable hazard at
    /// `t = 0` and shrinks as competing events accumulate.
    pub fn subdistribution_hazard(&self, t: f64) -> Result<f64> {
        let inc = self.cumulative_incidence(t)?;
        Ok(self.favourable * inc.event_free / (inc.event_free + inc.competing))
    }

    /// Mean time lost to the favourable event before `tau`:
    /// `tau - integral of F1 over [0, tau]`, in closed form.
    pub fn restricted_mean_lost(&self, tau: f64) -> Result<f64> {
        check_horizon(tau)?;
        let total = self.total();
        let plateau = self.favourable_plateau();
        let area = plateau * (tau - (1.0 - (-total * tau).exp()) / total);
        Ok(tau - area)
    }

    /// Median time to the favourable event: `inf{t : F1(t) >= 1/2}`.
    /// Infinite when the eventual favourable probability stays below 1/2.
    pub fn median_favourable_time(&self) -> SubdistributionTime {
        let plateau = self.favourable_plateau();
        if plateau < 0.5 {
            return SubdistributionTime::Infinite;
        }
        let inner = 1.0 - 0.5 / plateau;
        if inner <= 0.0 {
            // F1 approaches 1/2 asymptotically without attaining it.
            return SubdistributionTime::Infinite;
        }
        SubdistributionTime::Finite(-inner.ln() / self.total())
    }
}

/// Cumulative incidence of both event types plus the event-free probability;
/// the three always sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulativeIncidencePair {
    pub favourable: f64,
    pub competing: f64,
    pub event_free: f64,
}

/// Two-arm trial scenario: constant hazards per arm, horizon, and the
/// fraction randomized to treatment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScenarioSpec", into = "RawScenarioSpec")]
pub struct ScenarioSpec {
    treatment: ArmHazards,
    control: ArmHazards,
    tau: f64,
    allocation_p: f64,
}

#[derive(Serialize, Deserialize)]
struct RawScenarioSpec {
    treatment: ArmHazards,
    control: ArmHazards,
    tau: f64,
    allocation_p: f64,
}

impl From<ScenarioSpec> for RawScenarioSpec {
    fn from(s: ScenarioSpec) -> RawScenarioSpec {
        RawScenarioSpec {
            treatment: s.treatment,
            control: s.control,
            tau: s.tau,
            allocation_p: s.allocation_p,
        }
    }
}

impl TryFrom<RawScenarioSpec> for ScenarioSpec {
    type Error = Error;

    fn try_from(raw: RawScenarioSpec) -> Result<ScenarioSpec> {
        ScenarioSpec::new(raw.treatment, raw.control, raw.tau, raw.allocation_p)
    }
}

/// Default horizon in days.
pub const DEFAULT_TAU: f64 = 28.0;

impl ScenarioSpec {
    pub fn new(
        treatment: ArmHazards,
        control: ArmHazards,
        tau: f64,
        allocation_p: f64,
    ) -> Result<ScenarioSpec> {
        check_horizon(tau)?;
        if !(allocation_p > 0.0 && allocation_p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "allocation fraction must lie strictly between 0 and 1, got {allocation_p}"
            )));
        }
        Ok(ScenarioSpec {
            treatment,
            control,
            tau,
            allocation_p,
        })
    }

    /// 1:1 allocation and the default 28-day horizon.
    pub fn balanced(treatment: ArmHazards, control: ArmHazards) -> ScenarioSpec {
        ScenarioSpec {
            treatment,
            control,
            tau: DEFAULT_TAU,
            allocation_p: 0.5,
        }
    }

    pub fn treatment(&self) -> ArmHazards {
        self.treatment
    }

    pub fn control(&self) -> ArmHazards {
        self.control
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn allocation_p(&self) -> f64 {
        self.allocation_p
    }

    /// Scenario with the arms exchanged.
    pub fn swapped(&self) -> ScenarioSpec {
        ScenarioSpec {
            treatment: self.control,
            control: self.treatment,
            tau: self.tau,
            allocation_p: 1.0 - self.allocation_p,
        }
    }

    /// All four treatment-effect measures evaluated at the horizon.
    ///
    /// Requires the favourable-event probability of each arm to be strictly
    /// inside (0, 1) at `tau`; otherwise the log and odds transforms are
    /// undefined and an error is returned.
    pub fn effect_measures(&self) -> Result<EffectMeasures> {
        let t_inc = self.treatment.cumulative_incidence(self.tau)?;
        let c_inc = self.control.cumulative_incidence(self.tau)?;
        for (label, f1) in [("treatment", t_inc.favourable), ("control", c_inc.favourable)] {
            if f1 <= 0.0 || f1 >= 1.0 {
                return Err(Error::DegenerateProbability(format!(
                    "favourable-event probability in the {label} arm is {f1} at tau; \
                     hazard-ratio and odds-ratio measures are undefined"
                )));
            }
        }
        // Competing hazard ratio: defined as 1 when neither arm has competing
        // risk (equal-hazards limit); a single zero hazard leaves no finite
        // positive ratio.
        let competing_event_hr = match (self.treatment.competing(), self.control.competing()) {
            (0.0, 0.0) => 1.0,
            (t, c) if t > 0.0 && c > 0.0 => t / c,
            _ => {
                return Err(Error::DegenerateProbability(
                    "competing hazard is zero in exactly one arm; its hazard ratio \
                     is degenerate"
                        .into(),
                ))
            }
        };
        let odds = |f1: f64| f1 / (1.0 - f1);
        Ok(EffectMeasures {
            event_specific_hr: self.treatment.favourable() / self.control.favourable(),
            competing_event_hr,
            subdistribution_hr: (1.0 - t_inc.favourable).ln() / (1.0 - c_inc.favourable).ln(),
            odds_ratio: odds(t_inc.favourable) / odds(c_inc.favourable),
        })
    }
}

/// Treatment-versus-control effect measures; the subdistribution hazard ratio
/// and the odds ratio are evaluated at the scenario horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectMeasures {
    /// Ratio of favourable event-specific hazards.
    pub event_specific_hr: f64,
    /// Ratio of competing event-specific hazards.
    pub competing_event_hr: f64,
    /// `ln(1 - F1_T(tau)) / ln(1 - F1_C(tau))`.
    pub subdistribution_hr: f64,
    /// Odds ratio of the favourable event by `tau`.
    pub odds_ratio: f64,
}

/// Subdistribution time censored at the horizon: the favourable-event time
/// when it occurred by `tau`, and `tau` itself for competing events and
/// event-free subjects.
pub fn censored_subdistribution_time(record: &EventRecord, tau: f64) -> f64 {
    match record.status {
        Status::Favourable => record.time.min(tau),
        Status::Competing | Status::Censored => tau,
    }
}

/// Event-free days on `[0, tau]` scored against the favourable event:
/// `tau - censored subdistribution time`. Zero for subjects who died first or
/// never reached the favourable event.
pub fn ventilator_free_days(record: &EventRecord, tau: f64) -> f64 {
    tau - censored_subdistribution_time(record, tau)
}

fn check_horizon(tau: f64) -> Result<()> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "horizon tau must be finite and positive, got {tau}"
        )));
    }
    Ok(())
}
