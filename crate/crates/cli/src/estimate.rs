//! Dataset estimation report: per-arm curves, medians, restricted means and
//! the two-sample tests, serializable as the `estimate` command's JSON.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use favtrial::estimators::{
    aalen_johansen, empirical_median, empirical_restricted_mean_lost, kaplan_meier,
    logrank_test, subdistribution_km, LogrankMode, TwoSampleTestResult,
};
use favtrial::{
    Arm, Cause, Error, EventRecord, Status, StepFunction, SubdistributionTime,
};

use crate::error::{CliError, CliResult};
use crate::SCHEMA_VERSION;

#[derive(Serialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub tau: f64,
    pub n_total: usize,
    pub arms: ArmReports,
    pub tests: TestReports,
    pub notes: Vec<String>,
}

#[derive(Serialize)]
pub struct ArmReports {
    #[serde(rename = "T")]
    pub treatment: Option<ArmReport>,
    #[serde(rename = "C")]
    pub control: Option<ArmReport>,
}

#[derive(Serialize)]
pub struct ArmReport {
    pub n: usize,
    pub events_favourable: usize,
    pub events_competing: usize,
    pub censored: usize,
    pub f1_at_tau: f64,
    pub f2_at_tau: f64,
    pub median_favourable_time: SubdistributionTime,
    pub restricted_mean_lost: f64,
    pub event_free_km: StepFunction,
    pub incidence_favourable: StepFunction,
    pub incidence_competing: StepFunction,
    pub subdistribution_km: Option<StepFunction>,
}

#[derive(Serialize)]
pub struct TestReports {
    pub event_specific_favourable: Option<TwoSampleTestResult>,
    pub event_specific_competing: Option<TwoSampleTestResult>,
    pub gray_subdistribution: Option<TwoSampleTestResult>,
}

pub fn build_report(
    data: &[EventRecord],
    tau: f64,
    require_subdistribution: bool,
) -> CliResult<EstimateReport> {
    let mut notes = Vec::new();

    let censored_early = data
        .iter()
        .filter(|r| r.status == Status::Censored && r.time < tau)
        .count();
    if censored_early > 0 {
        let message = Error::IncompleteFollowUp {
            censored_before_horizon: censored_early,
        }
        .to_string();
        if require_subdistribution {
            return Err(CliError::Run(message));
        }
        notes.push(format!("subdistribution estimates omitted: {message}"));
    }
    let complete = censored_early == 0;

    let mut reports = [None, None];
    for (slot, arm) in [(0, Arm::Treatment), (1, Arm::Control)] {
        let subset: Vec<EventRecord> = data.iter().filter(|r| r.arm == arm).cloned().collect();
        if subset.is_empty() {
            continue;
        }
        reports[slot] = Some(arm_report(&subset, tau, complete)?);
    }
    let both_arms = reports.iter().all(Option::is_some);
    if !both_arms {
        notes.push("only one arm present; two-sample tests skipped".into());
    }

    let tests = if both_arms {
        TestReports {
            event_specific_favourable: Some(logrank_test(
                data,
                LogrankMode::EventSpecific(Cause::Favourable),
            )?),
            event_specific_competing: Some(logrank_test(
                data,
                LogrankMode::EventSpecific(Cause::Competing),
            )?),
            gray_subdistribution: complete
                .then(|| logrank_test(data, LogrankMode::Subdistribution { tau }))
                .transpose()?,
        }
    } else {
        TestReports {
            event_specific_favourable: None,
            event_specific_competing: None,
            gray_subdistribution: None,
        }
    };

    let [treatment, control] = reports;
    Ok(EstimateReport {
        schema_version: SCHEMA_VERSION,
        tau,
        n_total: data.len(),
        arms: ArmReports { treatment, control },
        tests,
        notes,
    })
}

fn arm_report(subset: &[EventRecord], tau: f64, complete: bool) -> CliResult<ArmReport> {
    let incidence_favourable = aalen_johansen(subset, Cause::Favourable)?;
    let incidence_competing = aalen_johansen(subset, Cause::Competing)?;
    let event_free_km = kaplan_meier(subset, |r| r.status.is_event())?;
    let subdist = complete
        .then(|| subdistribution_km(subset, tau))
        .transpose()?;
    Ok(ArmReport {
        n: subset.len(),
        events_favourable: count(subset, Status::Favourable),
        events_competing: count(subset, Status::Competing),
        censored: count(subset, Status::Censored),
        f1_at_tau: incidence_favourable.eval(tau),
        f2_at_tau: incidence_competing.eval(tau),
        median_favourable_time: empirical_median(&incidence_favourable),
        restricted_mean_lost: empirical_restricted_mean_lost(&incidence_favourable, tau)?,
        event_free_km,
        incidence_favourable,
        incidence_competing,
        subdistribution_km: subdist,
    })
}

fn count(data: &[EventRecord], status: Status) -> usize {
    data.iter().filter(|r| r.status == status).count()
}

/// Tidy CSV of every curve in the report: `curve,arm,time,value` with an
/// explicit time-zero row per curve.
pub fn write_curves_csv(report: &EstimateReport, path: &Path) -> CliResult<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "curve,arm,time,value")?;
    for (arm, label) in [(&report.arms.treatment, "T"), (&report.arms.control, "C")] {
        let Some(arm) = arm else { continue };
        let named: [(&str, Option<&StepFunction>); 4] = [
            ("event_free_km", Some(&arm.event_free_km)),
            ("incidence_favourable", Some(&arm.incidence_favourable)),
            ("incidence_competing", Some(&arm.incidence_competing)),
            ("subdistribution_km", arm.subdistribution_km.as_ref()),
        ];
        for (name, curve) in named {
            let Some(curve) = curve else { continue };
            writeln!(out, "{name},{label},0,{}", curve.value_at_zero())?;
            for (t, v) in curve.points() {
                writeln!(out, "{name},{label},{t},{v}")?;
            }
        }
    }
    Ok(())
}
