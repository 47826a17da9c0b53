//! Sample-size planning for trials targeting the favourable event: required
//! events from the Schoenfeld formula, conversion to subjects via the
//! probability of observing a favourable event, odds-ratio planning for the
//! binary endpoint, and scenario tables over hazard or probability grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArmHazards, EffectMeasures, ScenarioSpec};
use crate::stats::normal_quantile;

/// Two-sided level, power and treatment-allocation fraction of a planned
/// trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDesignParams", into = "RawDesignParams")]
pub struct DesignParams {
    alpha_two_sided: f64,
    power: f64,
    allocation_p: f64,
}

#[derive(Serialize, Deserialize)]
struct RawDesignParams {
    alpha_two_sided: f64,
    power: f64,
    allocation_p: f64,
}

impl From<DesignParams> for RawDesignParams {
    fn from(p: DesignParams) -> RawDesignParams {
        RawDesignParams {
            alpha_two_sided: p.alpha_two_sided,
            power: p.power,
            allocation_p: p.allocation_p,
        }
    }
}

impl TryFrom<RawDesignParams> for DesignParams {
    type Error = Error;

    fn try_from(raw: RawDesignParams) -> Result<DesignParams> {
        DesignParams::new(raw.alpha_two_sided, raw.power, raw.allocation_p)
    }
}

impl DesignParams {
    pub fn new(alpha_two_sided: f64, power: f64, allocation_p: f64) -> Result<DesignParams> {
        for (label, v) in [
            ("alpha", alpha_two_sided),
            ("power", power),
            ("allocation fraction", allocation_p),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{label} must lie strictly between 0 and 1, got {v}"
                )));
            }
        }
        Ok(DesignParams {
            alpha_two_sided,
            power,
            allocation_p,
        })
    }

    pub fn alpha_two_sided(&self) -> f64 {
        self.alpha_two_sided
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn allocation_p(&self) -> f64 {
        self.allocation_p
    }
}

impl Default for DesignParams {
    /// Two-sided 0.05, power 0.8, 1:1 allocation.
    fn default() -> DesignParams {
        DesignParams {
            alpha_two_sided: 0.05,
            power: 0.8,
            allocation_p: 0.5,
        }
    }
}

/// Effect scale a sample size is planned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanningMethod {
    EventSpecificHr,
    SubdistributionHr,
    OddsRatio,
}

/// A planned trial size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSizePlan {
    pub method: PlanningMethod,
    /// Effect size on the planning scale (hazard ratio or odds ratio).
    pub theta: f64,
    /// Required favourable events (Schoenfeld, real-valued); for the
    /// odds-ratio method the expected favourable-event count at the planned
    /// size.
    pub required_events: f64,
    pub required_events_ceil: u64,
    /// Probability that a randomized subject contributes a favourable event
    /// by the horizon.
    pub psi: f64,
    pub total_n: u64,
    pub n_treatment: u64,
    pub n_control: u64,
}

impl SampleSizePlan {
    fn from_total(
        method: PlanningMethod,
        theta: f64,
        events: f64,
        psi: f64,
        total_n: u64,
        p: f64,
    ) -> Self {
        let n_treatment = (total_n as f64 * p).round() as u64;
        SampleSizePlan {
            method,
            theta,
            required_events: events,
            required_events_ceil: ceil_with_slack(events),
            psi,
            total_n,
            n_treatment,
            n_control: total_n - n_treatment,
        }
    }
}

/// Schoenfeld formula: required favourable events for a two-sided test of a
/// hazard ratio `theta`,
/// `E = (u_{1-alpha/2} + u_{1-power'})^2 / [p (1-p) (ln theta)^2]`
/// with `p` the treatment-allocation fraction.
pub fn schoenfeld_events(theta: f64, params: &DesignParams) -> Result<f64> {
    if !theta.is_finite() || theta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "hazard ratio must be finite and positive, got {theta}"
        )));
    }
    if theta == 1.0 {
        return Err(Error::InvalidParameter(
            "hazard ratio 1 requires infinitely many events".into(),
        ));
    }
    let z = normal_quantile(1.0 - params.alpha_two_sided / 2.0) + normal_quantile(params.power);
    let p = params.allocation_p;
    Ok(z * z / (p * (1.0 - p) * theta.ln().powi(2)))
}

/// Total size for comparing two proportions with a single binary covariate
/// (Hsieh's logistic-regression formula): `X = 1` is the treatment group with
/// event probability `p_treatment` and prevalence `allocation_p`.
pub fn hsieh_total_n(p_treatment: f64, p_control: f64, params: &DesignParams) -> Result<f64> {
    for (label, v) in [("treatment", p_treatment), ("control", p_control)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::DegenerateProbability(format!(
                "{label} event probability must lie strictly between 0 and 1, got {v}"
            )));
        }
    }
    if p_treatment == p_control {
        return Err(Error::InvalidParameter(
            "equal event probabilities admit no finite sample size".into(),
        ));
    }
    let b = params.allocation_p;
    let p_bar = b * p_treatment + (1.0 - b) * p_control;
    let z_alpha = normal_quantile(1.0 - params.alpha_two_sided / 2.0);
    let z_beta = normal_quantile(params.power);
    let root = z_alpha * (p_bar * (1.0 - p_bar) / b).sqrt()
        + z_beta
            * (p_control * (1.0 - p_control)
                + p_treatment * (1.0 - p_treatment) * (1.0 - b) / b)
                .sqrt();
    Ok(root * root / ((p_treatment - p_control).powi(2) * (1.0 - b)))
}

/// Assumed cumulative event probabilities at the horizon: favourable (`f1`)
/// and competing (`f2`) per arm. The starting point of probability-based
/// planning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventProbabilities {
    pub f1_treatment: f64,
    pub f1_control: f64,
    pub f2_treatment: f64,
    pub f2_control: f64,
}

impl EventProbabilities {
    /// The constant-hazards scenario these probabilities imply.
    pub fn to_scenario(&self, tau: f64, allocation_p: f64) -> Result<ScenarioSpec> {
        let treatment =
            ArmHazards::from_cumulative_probabilities(self.f1_treatment, self.f2_treatment, tau)?;
        let control =
            ArmHazards::from_cumulative_probabilities(self.f1_control, self.f2_control, tau)?;
        ScenarioSpec::new(treatment, control, tau, allocation_p)
    }
}

/// Plan a trial from assumed cumulative event probabilities at `tau`.
///
/// Recovers the constant hazards behind the probabilities, computes all
/// effect measures, and sizes the trial on the requested scale. For the
/// hazard-ratio scales `N = ceil(E / psi)` with
/// `psi = p F1_T(tau) + (1-p) F1_C(tau)`, rounded up to a whole number of
/// allocation blocks (even for 1:1); the odds-ratio scale sizes the binary
/// comparison directly.
pub fn plan_from_probabilities(
    probs: &EventProbabilities,
    tau: f64,
    params: &DesignParams,
    method: PlanningMethod,
) -> Result<(SampleSizePlan, EffectMeasures)> {
    let scenario = probs.to_scenario(tau, params.allocation_p())?;
    let measures = scenario.effect_measures()?;
    let p = params.allocation_p();
    let psi = p * probs.f1_treatment + (1.0 - p) * probs.f1_control;
    let denom = allocation_denominator(p);
    let plan = match method {
        PlanningMethod::EventSpecificHr | PlanningMethod::SubdistributionHr => {
            let theta = match method {
                PlanningMethod::EventSpecificHr => measures.event_specific_hr,
                _ => measures.subdistribution_hr,
            };
            let events = schoenfeld_events(theta, params)?;
            let total_n = round_up_to_multiple(events / psi, denom);
            SampleSizePlan::from_total(method, theta, events, psi, total_n, p)
        }
        PlanningMethod::OddsRatio => {
            let raw_n = hsieh_total_n(probs.f1_treatment, probs.f1_control, params)?;
            let total_n = round_up_to_multiple(raw_n, denom);
            SampleSizePlan::from_total(method, measures.odds_ratio, psi * raw_n, psi, total_n, p)
        }
    };
    Ok((plan, measures))
}

/// Plan a trial from assumed median times to the favourable event, treating
/// the time as exponentially distributed: the hazard ratio is the inverse
/// ratio of medians, and `N = ceil(E / improvement_prob)`.
pub fn plan_from_medians(
    median_treatment: f64,
    median_control: f64,
    improvement_prob: f64,
    params: &DesignParams,
) -> Result<SampleSizePlan> {
    for (label, m) in [("treatment", median_treatment), ("control", median_control)] {
        if !m.is_finite() || m <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{label} median must be finite and positive, got {m}"
            )));
        }
    }
    if median_treatment == median_control {
        return Err(Error::InvalidParameter(
            "equal medians admit no finite sample size".into(),
        ));
    }
    if !(improvement_prob > 0.0 && improvement_prob <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "improvement probability must lie in (0, 1], got {improvement_prob}"
        )));
    }
    let theta = median_control / median_treatment;
    let events = schoenfeld_events(theta, params)?;
    let total_n = ceil_with_slack(events / improvement_prob);
    Ok(SampleSizePlan::from_total(
        PlanningMethod::EventSpecificHr,
        theta,
        events,
        improvement_prob,
        total_n,
        params.allocation_p(),
    ))
}

/// One row of a hazard-scenario table: the assumed hazards with every derived
/// quantity at the scenario horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HazardScenarioRow {
    pub favourable_hazard_treatment: f64,
    pub favourable_hazard_control: f64,
    pub competing_hazard_treatment: f64,
    pub competing_hazard_control: f64,
    pub event_specific_hr: f64,
    pub competing_event_hr: f64,
    pub f1_treatment: f64,
    pub f1_control: f64,
    pub f2_treatment: f64,
    pub f2_control: f64,
    pub subdistribution_hr: f64,
}

/// One row of a probability-scenario table: assumed probabilities with effect
/// measures and the planned size on each scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityScenarioRow {
    pub f1_treatment: f64,
    pub f1_control: f64,
    pub f2_treatment: f64,
    pub f2_control: f64,
    pub event_specific_hr: f64,
    pub n_event_specific: u64,
    pub competing_event_hr: f64,
    pub subdistribution_hr: f64,
    pub n_subdistribution: u64,
    pub odds_ratio: f64,
    pub n_odds_ratio: u64,
    pub psi: f64,
}

/// Derived columns for a list of hazard scenarios. Errors carry the offending
/// row index.
pub fn hazard_scenario_table(rows: &[ScenarioSpec]) -> Result<Vec<HazardScenarioRow>> {
    rows.iter()
        .enumerate()
        .map(|(index, spec)| {
            let build = || -> Result<HazardScenarioRow> {
                let measures = spec.effect_measures()?;
                let t = spec.treatment().cumulative_incidence(spec.tau())?;
                let c = spec.control().cumulative_incidence(spec.tau())?;
                Ok(HazardScenarioRow {
                    favourable_hazard_treatment: spec.treatment().favourable(),
                    favourable_hazard_control: spec.control().favourable(),
                    competing_hazard_treatment: spec.treatment().competing(),
                    competing_hazard_control: spec.control().competing(),
                    event_specific_hr: measures.event_specific_hr,
                    competing_event_hr: measures.competing_event_hr,
                    f1_treatment: t.favourable,
                    f1_control: c.favourable,
                    f2_treatment: t.competing,
                    f2_control: c.competing,
                    subdistribution_hr: measures.subdistribution_hr,
                })
            };
            build().map_err(|e| e.at_row(index))
        })
        .collect()
}

/// Derived columns and planned sizes for a list of probability scenarios.
pub fn probability_scenario_table(
    rows: &[EventProbabilities],
    tau: f64,
    params: &DesignParams,
) -> Result<Vec<ProbabilityScenarioRow>> {
    rows.iter()
        .enumerate()
        .map(|(index, probs)| {
            let build = || -> Result<ProbabilityScenarioRow> {
                let (es, measures) =
                    plan_from_probabilities(probs, tau, params, PlanningMethod::EventSpecificHr)?;
                let (sd, _) =
                    plan_from_probabilities(probs, tau, params, PlanningMethod::SubdistributionHr)?;
                let (or, _) =
                    plan_from_probabilities(probs, tau, params, PlanningMethod::OddsRatio)?;
                Ok(ProbabilityScenarioRow {
                    f1_treatment: probs.f1_treatment,
                    f1_control: probs.f1_control,
                    f2_treatment: probs.f2_treatment,
                    f2_control: probs.f2_control,
                    event_specific_hr: measures.event_specific_hr,
                    n_event_specific: es.total_n,
                    competing_event_hr: measures.competing_event_hr,
                    subdistribution_hr: measures.subdistribution_hr,
                    n_subdistribution: sd.total_n,
                    odds_ratio: measures.odds_ratio,
                    n_odds_ratio: or.total_n,
                    psi: es.psi,
                })
            };
            build().map_err(|e| e.at_row(index))
        })
        .collect()
}

/// Built-in hazard grid (preset `table1`): favourable hazards 0.04-0.08
/// against 0.04, both directions, crossed with competing hazards 0.01/0.02,
/// spanning beneficial, neutral and harmful competing-event constellations.
pub fn preset_hazard_scenarios() -> Vec<ScenarioSpec> {
    const GRID: [(f64, f64, f64, f64); 15] = [
        (0.04, 0.04, 0.01, 0.01),
        (0.04, 0.04, 0.01, 0.02),
        (0.04, 0.04, 0.02, 0.01),
        (0.06, 0.04, 0.01, 0.01),
        (0.06, 0.04, 0.01, 0.02),
        (0.06, 0.04, 0.02, 0.01),
        (0.08, 0.04, 0.01, 0.01),
        (0.08, 0.04, 0.01, 0.02),
        (0.08, 0.04, 0.02, 0.01),
        (0.04, 0.06, 0.01, 0.01),
        (0.04, 0.06, 0.01, 0.02),
        (0.04, 0.06, 0.02, 0.01),
        (0.04, 0.08, 0.01, 0.01),
        (0.04, 0.08, 0.01, 0.02),
        (0.04, 0.08, 0.02, 0.01),
    ];
    GRID.iter()
        .map(|&(a1t, a1c, a2t, a2c)| {
            ScenarioSpec::balanced(
                ArmHazards::new(a1t, a2t).expect("preset hazards are valid"),
                ArmHazards::new(a1c, a2c).expect("preset hazards are valid"),
            )
        })
        .collect()
}

/// Built-in probability grid (preset `table2`): recovery probabilities
/// 0.70 vs 0.55 with mortality 0.10-0.20 varied jointly and separately.
pub fn preset_probability_scenarios() -> Vec<EventProbabilities> {
    const GRID: [(f64, f64); 5] = [(0.10, 0.10), (0.15, 0.15), (0.20, 0.20), (0.10, 0.20), (0.15, 0.20)];
    GRID.iter()
        .map(|&(f2t, f2c)| EventProbabilities {
            f1_treatment: 0.70,
            f1_control: 0.55,
            f2_treatment: f2t,
            f2_control: f2c,
        })
        .collect()
}

/// Smallest block size over which the allocation fraction yields whole
/// subjects per arm (2 for 1:1, 3 for 2:1, ...); 1 when no small denominator
/// fits.
pub(crate) fn allocation_denominator(p: f64) -> u64 {
    for d in 1..=1000u64 {
        let scaled = p * d as f64;
        if (scaled - scaled.round()).abs() < 1e-9 {
            return d;
        }
    }
    1
}

fn ceil_with_slack(x: f64) -> u64 {
    (x - 1e-9 * x.abs().max(1.0)).ceil().max(0.0) as u64
}

pub(crate) fn round_up_to_multiple(x: f64, multiple: u64) -> u64 {
    let n = ceil_with_slack(x);
    n.div_ceil(multiple) * multiple
}
