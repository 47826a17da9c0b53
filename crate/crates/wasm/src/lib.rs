//! Browser bindings for the interactive demo page: scenario curves, sample
//! size planning and in-browser trial simulation. Each function returns a
//! JSON string for plain `JSON.parse` on the JavaScript side.
//!
//! The `*_impl` functions carry the logic with plain string errors so they
//! also compile and test on native targets; the `#[wasm_bindgen]` wrappers
//! only translate errors for JavaScript.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use favtrial::design::{
    plan_from_probabilities, DesignParams, EventProbabilities, PlanningMethod, SampleSizePlan,
};
use favtrial::simulate::{
    operating_characteristics, AllocationRule, AnalysisMethod, CensoringModel,
    OperatingCharacteristics, SimulationConfig,
};
use favtrial::{ArmHazards, EffectMeasures, ScenarioSpec, SubdistributionTime};

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CurvePoint {
    t: f64,
    f1_treatment: f64,
    f2_treatment: f64,
    f1_control: f64,
    f2_control: f64,
}

#[derive(Serialize)]
struct ScenarioReport {
    measures: EffectMeasures,
    f1_treatment_at_tau: f64,
    f2_treatment_at_tau: f64,
    f1_control_at_tau: f64,
    f2_control_at_tau: f64,
    median_treatment: SubdistributionTime,
    median_control: SubdistributionTime,
    restricted_mean_lost_treatment: f64,
    restricted_mean_lost_control: f64,
    curves: Vec<CurvePoint>,
}

fn scenario_report_impl(
    h1t: f64,
    h2t: f64,
    h1c: f64,
    h2c: f64,
    tau: f64,
) -> Result<String, String> {
    let fail = |e: favtrial::Error| e.to_string();
    let treatment = ArmHazards::new(h1t, h2t).map_err(fail)?;
    let control = ArmHazards::new(h1c, h2c).map_err(fail)?;
    let spec = ScenarioSpec::new(treatment, control, tau, 0.5).map_err(fail)?;
    let measures = spec.effect_measures().map_err(fail)?;

    const POINTS: usize = 141;
    let curves = (0..POINTS)
        .map(|i| {
            let t = tau * i as f64 / (POINTS - 1) as f64;
            let a = treatment.cumulative_incidence(t).map_err(fail)?;
            let b = control.cumulative_incidence(t).map_err(fail)?;
            Ok(CurvePoint {
                t,
                f1_treatment: a.favourable,
                f2_treatment: a.competing,
                f1_control: b.favourable,
                f2_control: b.competing,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;

    let at_tau_t = treatment.cumulative_incidence(tau).map_err(fail)?;
    let at_tau_c = control.cumulative_incidence(tau).map_err(fail)?;
    to_json(&ScenarioReport {
        measures,
        f1_treatment_at_tau: at_tau_t.favourable,
        f2_treatment_at_tau: at_tau_t.competing,
        f1_control_at_tau: at_tau_c.favourable,
        f2_control_at_tau: at_tau_c.competing,
        median_treatment: treatment.median_favourable_time(),
        median_control: control.median_favourable_time(),
        restricted_mean_lost_treatment: treatment.restricted_mean_lost(tau).map_err(fail)?,
        restricted_mean_lost_control: control.restricted_mean_lost(tau).map_err(fail)?,
        curves,
    })
}

/// Closed-form cumulative incidence curves and effect measures for a
/// two-arm constant-hazards scenario.
#[wasm_bindgen]
pub fn scenario_report(
    h1t: f64,
    h2t: f64,
    h1c: f64,
    h2c: f64,
    tau: f64,
) -> Result<String, JsValue> {
    scenario_report_impl(h1t, h2t, h1c, h2c, tau).map_err(|e| JsValue::from_str(&e))
}

#[derive(Serialize)]
struct PlanReport {
    measures: EffectMeasures,
    event_specific: SampleSizePlan,
    subdistribution: SampleSizePlan,
    odds_ratio: SampleSizePlan,
}

fn plan_report_impl(
    f1t: f64,
    f1c: f64,
    f2t: f64,
    f2c: f64,
    tau: f64,
    alpha: f64,
    power: f64,
) -> Result<String, String> {
    let fail = |e: favtrial::Error| e.to_string();
    let params = DesignParams::new(alpha, power, 0.5).map_err(fail)?;
    let probs = EventProbabilities {
        f1_treatment: f1t,
        f1_control: f1c,
        f2_treatment: f2t,
        f2_control: f2c,
    };
    let (event_specific, measures) =
        plan_from_probabilities(&probs, tau, &params, PlanningMethod::EventSpecificHr)
            .map_err(fail)?;
    let (subdistribution, _) =
        plan_from_probabilities(&probs, tau, &params, PlanningMethod::SubdistributionHr)
            .map_err(fail)?;
    let (odds_ratio, _) =
        plan_from_probabilities(&probs, tau, &params, PlanningMethod::OddsRatio).map_err(fail)?;
    to_json(&PlanReport {
        measures,
        event_specific,
        subdistribution,
        odds_ratio,
    })
}

/// Sample sizes on all three planning scales from assumed cumulative event
/// probabilities at the horizon.
#[wasm_bindgen]
pub fn plan_report(
    f1t: f64,
    f1c: f64,
    f2t: f64,
    f2c: f64,
    tau: f64,
    alpha: f64,
    power: f64,
) -> Result<String, JsValue> {
    plan_report_impl(f1t, f1c, f2t, f2c, tau, alpha, power).map_err(|e| JsValue::from_str(&e))
}

#[derive(Serialize)]
struct SimulationReport {
    config: SimulationConfig,
    result: OperatingCharacteristics,
}

fn simulate_report_impl(
    f1t: f64,
    f1c: f64,
    f2t: f64,
    f2c: f64,
    tau: f64,
    n_total: u32,
    replicates: u32,
    analysis: &str,
    seed: u32,
) -> Result<String, String> {
    let fail = |e: favtrial::Error| e.to_string();
    let analysis = match analysis {
        "event_specific_logrank" => AnalysisMethod::EventSpecificLogrank,
        "gray_subdistribution" => AnalysisMethod::GraySubdistribution,
        "binary_proportion" => AnalysisMethod::BinaryProportion,
        other => return Err(format!("unknown analysis {other:?}")),
    };
    let scenario = EventProbabilities {
        f1_treatment: f1t,
        f1_control: f1c,
        f2_treatment: f2t,
        f2_control: f2c,
    }
    .to_scenario(tau, 0.5)
    .map_err(fail)?;
    let config = SimulationConfig {
        scenario,
        n_total,
        replicates: replicates.min(20_000),
        seed: seed as u64,
        analysis,
        censoring: CensoringModel::None,
        alpha: 0.05,
        allocation: AllocationRule::PermutedBlock,
    };
    let result = operating_characteristics(&config).map_err(fail)?;
    to_json(&SimulationReport { config, result })
}

/// In-browser Monte Carlo run (sequential; replicates capped at 20,000 to
/// keep the page responsive).
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate_report(
    f1t: f64,
    f1c: f64,
    f2t: f64,
    f2c: f64,
    tau: f64,
    n_total: u32,
    replicates: u32,
    analysis: &str,
    seed: u32,
) -> Result<String, JsValue> {
    simulate_report_impl(f1t, f1c, f2t, f2c, tau, n_total, replicates, analysis, seed)
        .map_err(|e| JsValue::from_str(&e))
}
