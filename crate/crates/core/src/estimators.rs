//! Nonparametric product-limit estimators and two-sample tests for competing
//! events data.
//!
//! The estimators share two conventions: the risk set at `t` counts subjects
//! with observed time `>= t`, and when an event and a censoring share a time
//! the censoring is taken to happen just after the event.

use crate::data::{Arm, Cause, EventRecord, Status};
use crate::error::{Error, Result};
use crate::model::{censored_subdistribution_time, SubdistributionTime};
use crate::stats::chi_square1_sf;
use crate::stepfn::StepFunction;

/// Standardized two-sample test outcome. `observed_minus_expected` counts
/// treatment-arm events against their null expectation; the two-sided p-value
/// comes from the chi-square(1) tail of the squared statistic.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TwoSampleTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub observed_minus_expected: f64,
    pub variance: f64,
}

/// Which transformed timescale a logrank test runs on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogrankMode {
    /// Count only events of this cause; censor other-cause events at their
    /// own time (cause-specific hazard comparison).
    EventSpecific(Cause),
    /// Run on subdistribution times censored at `tau`; on censoring-complete
    /// data this is Gray's test for comparing cumulative incidence curves.
    Subdistribution { tau: f64 },
}

/// Kaplan-Meier product-limit estimator of the event-free probability, with
/// `is_event` deciding which records count as events (the rest censor at
/// their own time).
pub fn kaplan_meier<F>(data: &[EventRecord], is_event: F) -> Result<StepFunction>
where
    F: Fn(&EventRecord) -> bool,
{
    let pairs: Vec<(f64, bool)> = data.iter().map(|r| (r.time, is_event(r))).collect();
    let (times, survival) = product_limit(pairs)?;
    StepFunction::new(1.0, times, survival)
}

/// Aalen-Johansen estimator of the cumulative incidence of one cause:
/// `F_j(t) = sum over u <= t of S(u-) * dN_j(u) / Y(u)`.
pub fn aalen_johansen(data: &[EventRecord], cause: Cause) -> Result<StepFunction> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let groups = group_by_time(data.iter().map(|r| (r.time, r.status)));
    let mut at_risk = data.len() as f64;
    let mut survival_before = 1.0;
    let mut cumulative = 0.0;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for g in groups {
        let d_cause = match cause {
            Cause::Favourable => g.favourable,
            Cause::Competing => g.competing,
        } as f64;
        let d_all = (g.favourable + g.competing) as f64;
        if d_cause > 0.0 {
            cumulative += survival_before * d_cause / at_risk;
            times.push(g.time);
            values.push(cumulative);
        }
        survival_before *= 1.0 - d_all / at_risk;
        at_risk -= (g.favourable + g.competing + g.censored) as f64;
    }
    StepFunction::new(0.0, times, values)
}

/// One minus the product-limit estimator on subdistribution times censored at
/// `tau`. Keeps subjects with a prior competing event in the risk set until
/// `tau`, so on censoring-complete data the curve coincides with the
/// Aalen-Johansen cumulative incidence of the favourable event.
///
/// Refuses data censored strictly before `tau`, where the identity is not
/// guaranteed and proper censoring weights would be needed.
pub fn subdistribution_km(data: &[EventRecord], tau: f64) -> Result<StepFunction> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "horizon tau must be finite and positive, got {tau}"
        )));
    }
    require_censoring_complete(data, tau)?;
    let pairs: Vec<(f64, bool)> = data
        .iter()
        .map(|r| {
            (
                censored_subdistribution_time(r, tau),
                r.status == Status::Favourable && r.time <= tau,
            )
        })
        .collect();
    let (times, survival) = product_limit(pairs)?;
    let incidence = survival.into_iter().map(|s| 1.0 - s).collect();
    StepFunction::new(0.0, times, incidence)
}

/// One minus Kaplan-Meier with other-cause events censored at their own time.
/// This estimator ignores that the cumulative incidence of one cause is
/// bounded by its eventual probability and therefore overestimates whenever
/// competing events occur; it is provided for diagnostics.
pub fn naive_km_biased(data: &[EventRecord], cause: Cause) -> Result<StepFunction> {
    let km = kaplan_meier(data, |r| r.status == cause.status())?;
    let incidence = km.values().iter().map(|s| 1.0 - s).collect();
    StepFunction::new(0.0, km.times().to_vec(), incidence)
}

/// Two-sample logrank test of treatment versus control on the transformed
/// timescale selected by `mode`.
pub fn logrank_test(data: &[EventRecord], mode: LogrankMode) -> Result<TwoSampleTestResult> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    for arm in [Arm::Treatment, Arm::Control] {
        if !data.iter().any(|r| r.arm == arm) {
            return Err(Error::MissingArm(arm));
        }
    }
    let entries: Vec<(f64, bool, bool)> = match mode {
        LogrankMode::EventSpecific(cause) => data
            .iter()
            .map(|r| {
                (
                    r.time,
                    r.status == cause.status(),
                    r.arm == Arm::Treatment,
                )
            })
            .collect(),
        LogrankMode::Subdistribution { tau } => {
            if !tau.is_finite() || tau <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "horizon tau must be finite and positive, got {tau}"
                )));
            }
            require_censoring_complete(data, tau)?;
            data.iter()
                .map(|r| {
                    (
                        censored_subdistribution_time(r, tau),
                        r.status == Status::Favourable && r.time <= tau,
                        r.arm == Arm::Treatment,
                    )
                })
                .collect()
        }
    };
    Ok(logrank_from_entries(entries))
}

/// Plug-in median of an estimated cumulative incidence curve.
pub fn empirical_median(curve: &StepFunction) -> SubdistributionTime {
    curve.first_time_at_or_above(0.5)
}

/// Plug-in restricted mean time lost: `tau` minus the exact step-function
/// integral of the curve over `[0, tau]`.
pub fn empirical_restricted_mean_lost(curve: &StepFunction, tau: f64) -> Result<f64> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "horizon tau must be finite and positive, got {tau}"
        )));
    }
    Ok(tau - curve.integral_to(tau))
}

struct TimeGroup {
    time: f64,
    favourable: usize,
    competing: usize,
    censored: usize,
}

fn group_by_time(records: impl Iterator<Item = (f64, Status)>) -> Vec<TimeGroup> {
    let mut items: Vec<(f64, Status)> = records.collect();
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<TimeGroup> = Vec::new();
    for (time, status) in items {
        match groups.last_mut() {
            Some(g) if g.time == time => match status {
                Status::Favourable => g.favourable += 1,
                Status::Competing => g.competing += 1,
                Status::Censored => g.censored += 1,
            },
            _ => groups.push(TimeGroup {
                time,
                favourable: (status == Status::Favourable) as usize,
                competing: (status == Status::Competing) as usize,
                censored: (status == Status::Censored) as usize,
            }),
        }
    }
    groups
}

/// Shared product-limit walk over `(time, is_event)` pairs. Returns the
/// survival value after each event time (censoring-only times do not jump).
fn product_limit(mut pairs: Vec<(f64, bool)>) -> Result<(Vec<f64>, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::EmptyData);
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut at_risk = pairs.len() as f64;
    let mut survival = 1.0;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let time = pairs[i].0;
        let mut events = 0usize;
        let mut total = 0usize;
        while i < pairs.len() && pairs[i].0 == time {
            events += pairs[i].1 as usize;
            total += 1;
            i += 1;
        }
        if events > 0 {
            survival *= 1.0 - events as f64 / at_risk;
            times.push(time);
            values.push(survival);
        }
        at_risk -= total as f64;
    }
    Ok((times, values))
}

fn require_censoring_complete(data: &[EventRecord], tau: f64) -> Result<()> {
    let censored_before_horizon = data
        .iter()
        .filter(|r| r.status == Status::Censored && r.time < tau)
        .count();
    if censored_before_horizon > 0 {
        return Err(Error::IncompleteFollowUp {
            censored_before_horizon,
        });
    }
    Ok(())
}

fn logrank_from_entries(mut entries: Vec<(f64, bool, bool)>) -> TwoSampleTestResult {
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut at_risk = entries.len() as f64;
    let mut at_risk_treatment = entries.iter().filter(|e| e.2).count() as f64;
    let mut observed_minus_expected = 0.0;
    let mut variance = 0.0;
    let mut i = 0;
    while i < entries.len() {
        let time = entries[i].0;
        let mut events = 0.0;
        let mut events_treatment = 0.0;
        let mut leaving = 0.0;
        let mut leaving_treatment = 0.0;
        while i < entries.len() && entries[i].0 == time {
            let (_, is_event, in_treatment) = entries[i];
            events += is_event as u8 as f64;
            events_treatment += (is_event && in_treatment) as u8 as f64;
            leaving += 1.0;
            leaving_treatment += in_treatment as u8 as f64;
            i += 1;
        }
        if events > 0.0 {
            let share = at_risk_treatment / at_risk;
            observed_minus_expected += events_treatment - events * share;
            if at_risk > 1.0 {
                variance +=
                    events * share * (1.0 - share) * (at_risk - events) / (at_risk - 1.0);
            }
        }
        at_risk -= leaving;
        at_risk_treatment -= leaving_treatment;
    }
    let (statistic, p_value) = if variance > 0.0 {
        let z = observed_minus_expected / variance.sqrt();
        (z, chi_square1_sf(z * z))
    } else {
        (0.0, 1.0)
    };
    TwoSampleTestResult {
        statistic,
        p_value,
        observed_minus_expected,
        variance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Arm;

    fn rec(id: u64, arm: Arm, time: f64, status: Status) -> EventRecord {
        EventRecord::new(id, arm, time, status).unwrap()
    }

    fn treatment(id: u64, time: f64, status: Status) -> EventRecord {
        rec(id, Arm::Treatment, time, status)
    }

    /// Independent Aalen-Johansen oracle: the literal summation
    /// `sum_{u <= t} S(u-) dN_j(u) / Y(u)` with every term recomputed from
    /// scratch, O(n^2) and free of shared code with the estimator.
    fn aj_bruteforce(data: &[EventRecord], cause: Cause, t: f64) -> f64 {
        let mut event_times: Vec<f64> = data
            .iter()
            .filter(|r| r.status.is_event())
            .map(|r| r.time)
            .collect();
        event_times.sort_by(f64::total_cmp);
        event_times.dedup();

        let at_risk = |u: f64| data.iter().filter(|r| r.time >= u).count() as f64;
        let events_at = |u: f64, s: Status| {
            data.iter().filter(|r| r.time == u && r.status == s).count() as f64
        };
        let km_before = |u: f64| -> f64 {
            event_times
                .iter()
                .filter(|&&v| v < u)
                .map(|&v| {
                    1.0 - (events_at(v, Status::Favourable) + events_at(v, Status::Competing))
                        / at_risk(v)
                })
                .product()
        };

        event_times
            .iter()
            .filter(|&&u| u <= t)
            .map(|&u| km_before(u) * events_at(u, cause.status()) / at_risk(u))
            .sum()
    }

    #[test]
    fn km_without_censoring_is_empirical_fraction() {
        let data: Vec<EventRecord> = [1.0, 2.0, 5.0, 7.0]
            .iter()
            .enumerate()
            .map(|(i, &t)| treatment(i as u64, t, Status::Favourable))
            .collect();
        let km = kaplan_meier(&data, |r| r.status.is_event()).unwrap();
        assert_eq!(km.times(), &[1.0, 2.0, 5.0, 7.0]);
        for (v, expected) in km.values().iter().zip([0.75, 0.5, 0.25, 0.0]) {
            assert!((v - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn km_all_censored_is_one() {
        let data: Vec<EventRecord> = (0..5)
            .map(|i| treatment(i, (i + 1) as f64, Status::Censored))
            .collect();
        let km = kaplan_meier(&data, |r| r.status.is_event()).unwrap();
        assert!(km.times().is_empty());
        assert_eq!(km.eval(100.0), 1.0);
    }

    #[test]
    fn km_with_censoring_hand_computed() {
        // Events at 2 and 7, censored at 5 and 10:
        // S(2) = 3/4, S(7) = 3/4 * 1/2 = 0.375.
        let data = vec![
            treatment(0, 2.0, Status::Favourable),
            treatment(1, 5.0, Status::Censored),
            treatment(2, 7.0, Status::Favourable),
            treatment(3, 10.0, Status::Censored),
        ];
        let km = kaplan_meier(&data, |r| r.status.is_event()).unwrap();
        assert!((km.eval(7.0) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn km_rejects_empty_input() {
        assert!(matches!(
            kaplan_meier(&[], |r| r.status.is_event()),
            Err(Error::EmptyData)
        ));
    }

    fn complete_n4() -> Vec<EventRecord> {
        vec![
            treatment(0, 2.0, Status::Favourable),
            treatment(1, 3.0, Status::Competing),
            treatment(2, 7.0, Status::Favourable),
            treatment(3, 28.0, Status::Censored),
        ]
    }

    #[test]
    fn aj_complete_data_is_event_count_over_n() {
        let curve = aalen_johansen(&complete_n4(), Cause::Favourable).unwrap();
        assert!((curve.eval(2.0) - 0.25).abs() < 1e-15);
        assert!((curve.eval(7.0) - 0.5).abs() < 1e-15);
        assert!((curve.eval(28.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn aj_without_target_cause_is_zero() {
        let data = vec![
            treatment(0, 2.0, Status::Favourable),
            treatment(1, 3.0, Status::Favourable),
        ];
        let curve = aalen_johansen(&data, Cause::Competing).unwrap();
        assert!(curve.times().is_empty());
        assert_eq!(curve.eval(10.0), 0.0);
    }

    #[test]
    fn aj_with_interleaved_censoring_matches_bruteforce() {
        let data = vec![
            treatment(0, 1.0, Status::Favourable),
            treatment(1, 2.0, Status::Censored),
            treatment(2, 3.0, Status::Competing),
            treatment(3, 4.0, Status::Favourable),
            treatment(4, 5.0, Status::Censored),
            treatment(5, 6.0, Status::Favourable),
        ];
        let curve = aalen_johansen(&data, Cause::Favourable).unwrap();
        // Hand value of the summation display at t = 6: 19/24.
        assert!((curve.eval(6.0) - 19.0 / 24.0).abs() < 1e-12);
        for t in [0.5, 1.0, 2.5, 3.0, 4.5, 6.0, 9.0] {
            assert!(
                (curve.eval(t) - aj_bruteforce(&data, Cause::Favourable, t)).abs() < 1e-12,
                "mismatch at t = {t}"
            );
        }
    }

    #[test]
    fn balance_equation_with_censoring() {
        let data = vec![
            treatment(0, 1.0, Status::Favourable),
            treatment(1, 2.0, Status::Censored),
            treatment(2, 3.0, Status::Competing),
            treatment(3, 4.0, Status::Favourable),
            treatment(4, 5.5, Status::Censored),
            treatment(5, 6.0, Status::Competing),
            treatment(6, 8.0, Status::Favourable),
        ];
        let km = kaplan_meier(&data, |r| r.status.is_event()).unwrap();
        let f1 = aalen_johansen(&data, Cause::Favourable).unwrap();
        let f2 = aalen_johansen(&data, Cause::Competing).unwrap();
        for t in [0.0, 1.0, 2.5, 3.0, 4.0, 6.0, 7.9, 8.0, 20.0] {
            let total = km.eval(t) + f1.eval(t) + f2.eval(t);
            assert!((total - 1.0).abs() < 1e-12, "balance violated at t = {t}");
        }
    }

    #[test]
    fn subdistribution_km_equals_aj_on_complete_data() {
        let data = complete_n4();
        let aj = aalen_johansen(&data, Cause::Favourable).unwrap();
        let sub = subdistribution_km(&data, 28.0).unwrap();
        for t in [0.0, 1.0, 2.0, 3.0, 5.0, 7.0, 27.9, 28.0] {
            assert!((aj.eval(t) - sub.eval(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn subdistribution_km_all_competing_is_zero() {
        let data: Vec<EventRecord> = (0..4)
            .map(|i| treatment(i, (i + 1) as f64, Status::Competing))
            .collect();
        let sub = subdistribution_km(&data, 28.0).unwrap();
        assert_eq!(sub.eval(28.0), 0.0);
    }

    #[test]
    fn subdistribution_km_refuses_early_censoring() {
        let mut data = complete_n4();
        data.push(treatment(4, 10.0, Status::Censored));
        assert!(matches!(
            subdistribution_km(&data, 28.0),
            Err(Error::IncompleteFollowUp {
                censored_before_horizon: 1
            })
        ));
    }

    #[test]
    fn naive_km_exceeds_aj_under_competing_events() {
        // Deaths before the late improvements inflate the naive estimate.
        let data = vec![
            treatment(0, 1.0, Status::Competing),
            treatment(1, 2.0, Status::Competing),
            treatment(2, 3.0, Status::Favourable),
            treatment(3, 5.0, Status::Favourable),
            treatment(4, 28.0, Status::Censored),
        ];
        let naive = naive_km_biased(&data, Cause::Favourable).unwrap();
        let aj = aalen_johansen(&data, Cause::Favourable).unwrap();
        assert!(naive.eval(28.0) > aj.eval(28.0) + 1e-9);
        // And never below.
        for t in [1.0, 3.0, 5.0, 28.0] {
            assert!(naive.eval(t) >= aj.eval(t) - 1e-12);
        }
    }

    #[test]
    fn naive_km_equals_aj_without_competing_events() {
        let data = vec![
            treatment(0, 1.0, Status::Favourable),
            treatment(1, 2.0, Status::Censored),
            treatment(2, 4.0, Status::Favourable),
        ];
        let naive = naive_km_biased(&data, Cause::Favourable).unwrap();
        let aj = aalen_johansen(&data, Cause::Favourable).unwrap();
        for t in [0.5, 1.0, 2.0, 4.0, 9.0] {
            assert!((naive.eval(t) - aj.eval(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn naive_km_overestimates_observed_fraction() {
        // 53 subjects, 36 improvements, 17 deaths censored at their own time:
        // the naive curve at the horizon exceeds the observed fraction 36/53.
        let mut data = Vec::new();
        for i in 0..17 {
            data.push(treatment(i, 1.0 + i as f64 * 0.5, Status::Competing));
        }
        for i in 0..36 {
            data.push(treatment(17 + i, 2.0 + i as f64 * 0.7, Status::Favourable));
        }
        let naive = naive_km_biased(&data, Cause::Favourable).unwrap();
        let aj = aalen_johansen(&data, Cause::Favourable).unwrap();
        let observed = 36.0 / 53.0;
        assert!((aj.eval(28.0) - observed).abs() < 1e-12);
        assert!(naive.eval(28.0) > observed + 0.05);
    }

    #[test]
    fn logrank_identical_arms_is_null() {
        let mut data = Vec::new();
        for (i, &(t, s)) in [
            (2.0, Status::Favourable),
            (4.0, Status::Competing),
            (6.0, Status::Favourable),
            (28.0, Status::Censored),
        ]
        .iter()
        .enumerate()
        {
            data.push(rec(i as u64, Arm::Treatment, t, s));
            data.push(rec(100 + i as u64, Arm::Control, t, s));
        }
        for mode in [
            LogrankMode::EventSpecific(Cause::Favourable),
            LogrankMode::Subdistribution { tau: 28.0 },
        ] {
            let result = logrank_test(&data, mode).unwrap();
            assert!(result.observed_minus_expected.abs() < 1e-12);
            assert_eq!(result.statistic, 0.0);
            assert!((result.p_value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn logrank_single_event_hand_computed() {
        // One treatment event while two subjects per arm are at risk:
        // expected treatment events 1/2, so O - E = 1/2 and V = 1/4.
        let data = vec![
            rec(0, Arm::Treatment, 5.0, Status::Favourable),
            rec(1, Arm::Treatment, 10.0, Status::Censored),
            rec(2, Arm::Control, 10.0, Status::Censored),
            rec(3, Arm::Control, 10.0, Status::Censored),
        ];
        let result = logrank_test(&data, LogrankMode::EventSpecific(Cause::Favourable)).unwrap();
        assert!((result.observed_minus_expected - 0.5).abs() < 1e-15);
        assert!((result.variance - 0.25).abs() < 1e-15);
        assert!((result.statistic - 1.0).abs() < 1e-15);
    }

    #[test]
    fn logrank_requires_both_arms() {
        let data = vec![treatment(0, 2.0, Status::Favourable)];
        assert!(matches!(
            logrank_test(&data, LogrankMode::EventSpecific(Cause::Favourable)),
            Err(Error::MissingArm(Arm::Control))
        ));
    }

    #[test]
    fn logrank_invariant_under_relabeling_and_monotone_time_maps() {
        let data = vec![
            rec(0, Arm::Treatment, 1.0, Status::Favourable),
            rec(1, Arm::Treatment, 3.0, Status::Competing),
            rec(2, Arm::Treatment, 9.0, Status::Favourable),
            rec(3, Arm::Control, 2.0, Status::Favourable),
            rec(4, Arm::Control, 3.0, Status::Favourable),
            rec(5, Arm::Control, 12.0, Status::Censored),
        ];
        let base = logrank_test(&data, LogrankMode::EventSpecific(Cause::Favourable)).unwrap();

        let relabeled: Vec<EventRecord> = data
            .iter()
            .map(|r| rec(r.id + 1000, r.arm, r.time, r.status))
            .collect();
        let transformed: Vec<EventRecord> = data
            .iter()
            .map(|r| rec(r.id, r.arm, r.time * r.time, r.status))
            .collect();
        for other in [relabeled, transformed] {
            let result =
                logrank_test(&other, LogrankMode::EventSpecific(Cause::Favourable)).unwrap();
            assert!((result.statistic - base.statistic).abs() < 1e-15);
            assert!((result.p_value - base.p_value).abs() < 1e-15);
        }
    }

    #[test]
    fn empirical_median_cases() {
        let exact = StepFunction::new(0.0, vec![3.0, 7.0], vec![0.3, 0.5]).unwrap();
        assert_eq!(
            empirical_median(&exact),
            SubdistributionTime::Finite(7.0)
        );
        let low = StepFunction::new(0.0, vec![3.0], vec![0.4]).unwrap();
        assert_eq!(empirical_median(&low), SubdistributionTime::Infinite);
    }

    #[test]
    fn empirical_restricted_mean_lost_cases() {
        let tau = 28.0;
        let zero = StepFunction::constant(0.0);
        assert!((empirical_restricted_mean_lost(&zero, tau).unwrap() - tau).abs() < 1e-12);

        // Jump to one essentially at zero: nothing is lost.
        let immediate = StepFunction::new(0.0, vec![1e-12], vec![1.0]).unwrap();
        assert!(empirical_restricted_mean_lost(&immediate, tau).unwrap() < 1e-9);

        // n = 4 complete-data curve: F1 = 1/4 on [2,7), 1/2 afterwards.
        let curve = aalen_johansen(&complete_n4(), Cause::Favourable).unwrap();
        let expected = tau - (0.25 * 5.0 + 0.5 * 21.0);
        assert!(
            (empirical_restricted_mean_lost(&curve, tau).unwrap() - expected).abs() < 1e-12
        );
    }
}
