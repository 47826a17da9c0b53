//! Reproducible Monte Carlo evaluation of trial designs: dataset generation
//! under a constant-hazards scenario, operating characteristics (power, type
//! I error, estimator summaries) and blinded sample-size recalculation with
//! an internal pilot.
//!
//! Reproducibility contract: every replicate draws from its own ChaCha
//! substream keyed by `(seed, replicate index)` and results are aggregated
//! in replicate order, so outputs are identical regardless of how many
//! worker threads run the replicates.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Arm, Cause, EventRecord, Status};
use crate::design::{allocation_denominator, round_up_to_multiple};
use crate::error::{Error, Result};
use crate::estimators::{aalen_johansen, logrank_test, LogrankMode, TwoSampleTestResult};
use crate::model::{censored_subdistribution_time, ScenarioSpec};
use crate::stats::chi_square1_sf;

/// Primary analysis applied to each simulated trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisMethod {
    /// Logrank on the favourable cause-specific hazard (competing events
    /// censored at their own time).
    EventSpecificLogrank,
    /// Logrank on subdistribution times censored at the horizon (Gray's
    /// test); requires complete follow-up.
    GraySubdistribution,
    /// Two-proportion z-test on favourable status by the horizon.
    BinaryProportion,
}

/// Independent censoring before the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoringModel {
    /// Complete follow-up to the horizon (administrative censoring only).
    None,
    /// Censoring time drawn uniformly from `(0, window]`, applied when it
    /// precedes both the event and the horizon.
    Uniform { window: f64 },
}

/// How subjects are assigned to arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationRule {
    /// Shuffled blocks matching the allocation fraction exactly (block size
    /// = allocation denominator, e.g. 2 for 1:1).
    PermutedBlock,
    /// Independent coin flips with the allocation probability.
    Bernoulli,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_censoring() -> CensoringModel {
    CensoringModel::None
}

fn default_allocation() -> AllocationRule {
    AllocationRule::PermutedBlock
}

/// One simulation run: scenario, size, replication and analysis settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub scenario: ScenarioSpec,
    pub n_total: u32,
    pub replicates: u32,
    pub seed: u64,
    pub analysis: AnalysisMethod,
    #[serde(default = "default_censoring")]
    pub censoring: CensoringModel,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_allocation")]
    pub allocation: AllocationRule,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_total < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_total must be at least 2, got {}",
                self.n_total
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie strictly between 0 and 1, got {}",
                self.alpha
            )));
        }
        if let CensoringModel::Uniform { window } = self.censoring {
            if !window.is_finite() || window <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "censoring window must be finite and positive, got {window}"
                )));
            }
            if self.analysis == AnalysisMethod::GraySubdistribution {
                return Err(Error::InvalidParameter(
                    "gray_subdistribution analysis requires complete follow-up \
                     (censoring: none)"
                        .into(),
                ));
            }
        }
        Ok(())
    }
}

/// Sample-size recalculation policy of an internal-pilot design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecalcPolicy {
    /// Recalculate once when the pilot is complete.
    Once,
    /// Fixed-size design (reference arm for comparisons).
    None,
}

/// Internal-pilot design: the base run describes the initially planned trial
/// (`base.n_total` from the design-stage calculation), `required_events` is
/// the design-stage Schoenfeld event count that the recalculation converts
/// into a new size via the blinded interim estimate of the favourable-event
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsrConfig {
    pub base: SimulationConfig,
    pub pilot_fraction: f64,
    pub recalc: RecalcPolicy,
    pub n_max_cap: u32,
    pub required_events: f64,
}

impl SsrConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.pilot_fraction > 0.0 && self.pilot_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "pilot fraction must lie in (0, 1], got {}",
                self.pilot_fraction
            )));
        }
        if !self.required_events.is_finite() || self.required_events <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "required events must be finite and positive, got {}",
                self.required_events
            )));
        }
        let pilot = self.pilot_n();
        let p = self.base.scenario.allocation_p();
        if (pilot as f64 * p.min(1.0 - p)).floor() < 2.0 {
            return Err(Error::InvalidParameter(format!(
                "pilot of {pilot} subjects leaves fewer than 2 per arm"
            )));
        }
        if (self.n_max_cap as u64) < pilot {
            return Err(Error::InvalidParameter(format!(
                "n_max_cap {} is below the pilot size {pilot}",
                self.n_max_cap
            )));
        }
        Ok(())
    }

    fn pilot_n(&self) -> u64 {
        let denom = allocation_denominator(self.base.scenario.allocation_p());
        round_up_to_multiple(
            self.pilot_fraction * self.base.n_total as f64,
            denom,
        )
        .min(self.base.n_total as u64)
    }
}

/// Per-quantity averages over informative replicates. The effect estimate is
/// summarized on the log scale (`theta` is its geometric mean) and sits on
/// the scale of the configured analysis: event-specific hazard ratio,
/// subdistribution hazard ratio, or odds ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimates {
    /// Replicates with a defined effect estimate (events in both arms).
    pub informative_replicates: u32,
    pub theta: f64,
    pub log_theta: f64,
    pub f1_treatment: f64,
    pub f1_control: f64,
    pub f2_treatment: f64,
    pub f2_control: f64,
}

/// Final-size distribution of an internal-pilot run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsrSummary {
    pub mean_final_n: f64,
    pub min_final_n: u32,
    pub max_final_n: u32,
    /// Replicates whose pilot had no favourable event, falling back to the
    /// originally planned size.
    pub fallback_replicates: u32,
}

/// Monte Carlo operating characteristics of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub replicates: u32,
    pub rejections: u32,
    pub rejection_rate: f64,
    /// `sqrt(rate (1-rate) / replicates)`.
    pub mc_standard_error: f64,
    pub mean_estimates: MeanEstimates,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssr: Option<SsrSummary>,
}

/// Independent generator for one replicate: one ChaCha stream per index.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Simulate one trial: arms by the allocation rule, latent event times
/// exponential with the arm's all-events hazard (inverse transform), event
/// type favourable with probability `favourable/total`, administrative
/// censoring at the horizon, then optional independent censoring.
pub fn generate_trial(
    scenario: &ScenarioSpec,
    n_total: u32,
    allocation: AllocationRule,
    censoring: &CensoringModel,
    rng: &mut impl Rng,
) -> Vec<EventRecord> {
    let n = n_total as usize;
    let arms = draw_allocation(n, scenario.allocation_p(), allocation, rng);
    let tau = scenario.tau();
    let mut records = Vec::with_capacity(n);
    for (i, arm) in arms.into_iter().enumerate() {
        let hazards = match arm {
            Arm::Treatment => scenario.treatment(),
            Arm::Control => scenario.control(),
        };
        let rate = hazards.total();
        let mut latent = 0.0;
        while latent <= 0.0 {
            latent = -(1.0 - rng.random::<f64>()).ln() / rate;
        }
        let cause = if rng.random::<f64>() < hazards.favourable_plateau() {
            Status::Favourable
        } else {
            Status::Competing
        };
        let (mut time, mut status) = if latent > tau {
            (tau, Status::Censored)
        } else {
            (latent, cause)
        };
        if let CensoringModel::Uniform { window } = *censoring {
            // (0, window]: the complement keeps the draw strictly positive.
            let censor_at = window * (1.0 - rng.random::<f64>());
            if censor_at < time {
                time = censor_at;
                status = Status::Censored;
            }
        }
        records.push(EventRecord {
            id: i as u64,
            arm,
            time,
            status,
        });
    }
    records
}

fn draw_allocation(
    n: usize,
    p: f64,
    rule: AllocationRule,
    rng: &mut impl Rng,
) -> Vec<Arm> {
    match rule {
        AllocationRule::Bernoulli => (0..n)
            .map(|_| {
                if rng.random::<f64>() < p {
                    Arm::Treatment
                } else {
                    Arm::Control
                }
            })
            .collect(),
        AllocationRule::PermutedBlock => {
            let denom = allocation_denominator(p) as usize;
            let treatment_per_block = (p * denom as f64).round() as usize;
            let mut arms = Vec::with_capacity(n + denom);
            let mut block = vec![Arm::Control; denom];
            while arms.len() < n {
                block[..treatment_per_block].fill(Arm::Treatment);
                block[treatment_per_block..].fill(Arm::Control);
                block.shuffle(rng);
                arms.extend_from_slice(&block);
            }
            arms.truncate(n);
            arms
        }
    }
}

/// Two-proportion z-test (pooled variance) on favourable status by `tau`.
/// `observed_minus_expected` and `variance` are on the risk-difference scale.
pub fn two_proportion_test(data: &[EventRecord], tau: f64) -> Result<TwoSampleTestResult> {
    let mut n = [0.0_f64; 2];
    let mut events = [0.0_f64; 2];
    for r in data {
        let idx = (r.arm == Arm::Control) as usize;
        n[idx] += 1.0;
        if r.status == Status::Favourable && r.time <= tau {
            events[idx] += 1.0;
        }
    }
    for (idx, arm) in [(0, Arm::Treatment), (1, Arm::Control)] {
        if n[idx] == 0.0 {
            return Err(Error::MissingArm(arm));
        }
    }
    let diff = events[0] / n[0] - events[1] / n[1];
    let pooled = (events[0] + events[1]) / (n[0] + n[1]);
    let variance = pooled * (1.0 - pooled) * (1.0 / n[0] + 1.0 / n[1]);
    let (statistic, p_value) = if variance > 0.0 {
        let z = diff / variance.sqrt();
        (z, chi_square1_sf(z * z))
    } else {
        (0.0, 1.0)
    };
    Ok(TwoSampleTestResult {
        statistic,
        p_value,
        observed_minus_expected: diff,
        variance,
    })
}

/// Effect point estimate on the scale of `method`, from constant-hazard
/// (events over person-time) maximum likelihood for the hazard scales and
/// the empirical odds ratio for the binary scale. Errors when either arm has
/// no information on the requested scale.
pub fn effect_estimate(data: &[EventRecord], method: AnalysisMethod, tau: f64) -> Result<f64> {
    let mut events = [0.0_f64; 2];
    let mut exposure = [0.0_f64; 2];
    let mut subjects = [0.0_f64; 2];
    for r in data {
        let idx = (r.arm == Arm::Control) as usize;
        subjects[idx] += 1.0;
        let favourable_by_tau = r.status == Status::Favourable && r.time <= tau;
        match method {
            AnalysisMethod::EventSpecificLogrank => {
                events[idx] += (r.status == Status::Favourable) as u8 as f64;
                exposure[idx] += r.time;
            }
            AnalysisMethod::GraySubdistribution => {
                events[idx] += favourable_by_tau as u8 as f64;
                exposure[idx] += censored_subdistribution_time(r, tau);
            }
            AnalysisMethod::BinaryProportion => {
                events[idx] += favourable_by_tau as u8 as f64;
            }
        }
    }
    match method {
        AnalysisMethod::BinaryProportion => {
            let odds = |i: usize| -> Result<f64> {
                let p = events[i] / subjects[i];
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::DegenerateProbability(format!(
                        "favourable fraction {p} admits no odds ratio"
                    )));
                }
                Ok(p / (1.0 - p))
            };
            Ok(odds(0)? / odds(1)?)
        }
        _ => {
            if events.iter().any(|&d| d == 0.0) || exposure.iter().any(|&e| e <= 0.0) {
                return Err(Error::DegenerateProbability(
                    "an arm has no favourable events; hazard ratio undefined".into(),
                ));
            }
            Ok((events[0] / exposure[0]) / (events[1] / exposure[1]))
        }
    }
}

/// One line of the per-replicate audit trail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicateAudit {
    pub replicate: u32,
    pub p_value: f64,
    pub reject: bool,
    /// Effect estimate on the analysis scale; absent when an arm had no
    /// events.
    pub theta: Option<f64>,
    pub final_n: u32,
    pub fallback: bool,
}

#[derive(Clone, Copy)]
struct ReplicateOutcome {
    reject: bool,
    p_value: f64,
    estimates: Option<ReplicateEstimates>,
    final_n: u32,
    fallback: bool,
}

#[derive(Clone, Copy)]
struct ReplicateEstimates {
    log_theta: f64,
    f1_treatment: f64,
    f1_control: f64,
    f2_treatment: f64,
    f2_control: f64,
}

fn analyze_replicate(data: &[EventRecord], cfg: &SimulationConfig) -> Result<ReplicateOutcome> {
    let tau = cfg.scenario.tau();
    let test = match cfg.analysis {
        AnalysisMethod::EventSpecificLogrank => {
            logrank_test(data, LogrankMode::EventSpecific(Cause::Favourable))?
        }
        AnalysisMethod::GraySubdistribution => {
            logrank_test(data, LogrankMode::Subdistribution { tau })?
        }
        AnalysisMethod::BinaryProportion => two_proportion_test(data, tau)?,
    };
    let estimates = match effect_estimate(data, cfg.analysis, tau) {
        Ok(theta) => {
            let mut f = [[0.0; 2]; 2];
            for (a, arm) in [(0, Arm::Treatment), (1, Arm::Control)] {
                let subset: Vec<EventRecord> =
                    data.iter().filter(|r| r.arm == arm).cloned().collect();
                f[a][0] = aalen_johansen(&subset, Cause::Favourable)?.eval(tau);
                f[a][1] = aalen_johansen(&subset, Cause::Competing)?.eval(tau);
            }
            Some(ReplicateEstimates {
                log_theta: theta.ln(),
                f1_treatment: f[0][0],
                f1_control: f[1][0],
                f2_treatment: f[0][1],
                f2_control: f[1][1],
            })
        }
        Err(Error::DegenerateProbability(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ReplicateOutcome {
        reject: test.p_value < cfg.alpha,
        p_value: test.p_value,
        estimates,
        final_n: data.len() as u32,
        fallback: false,
    })
}

fn fixed_n_replicate(cfg: &SimulationConfig, replicate: u64) -> Result<ReplicateOutcome> {
    let mut rng = replicate_rng(cfg.seed, replicate);
    let data = generate_trial(
        &cfg.scenario,
        cfg.n_total,
        cfg.allocation,
        &cfg.censoring,
        &mut rng,
    );
    analyze_replicate(&data, cfg)
}

fn ssr_replicate(cfg: &SsrConfig, replicate: u64) -> Result<ReplicateOutcome> {
    let base = &cfg.base;
    if cfg.recalc == RecalcPolicy::None {
        return fixed_n_replicate(base, replicate);
    }
    let mut rng = replicate_rng(base.seed, replicate);
    let pilot_n = cfg.pilot_n();
    let mut data = generate_trial(
        &base.scenario,
        pilot_n as u32,
        base.allocation,
        &base.censoring,
        &mut rng,
    );
    // Blinded interim: pooled Aalen-Johansen estimate of the favourable-event
    // probability at the horizon, no arm information used.
    let psi_hat = aalen_johansen(&data, Cause::Favourable)?.eval(base.scenario.tau());
    let (final_n, fallback) = if psi_hat > 0.0 {
        let denom = allocation_denominator(base.scenario.allocation_p());
        let recalculated = round_up_to_multiple(cfg.required_events / psi_hat, denom);
        (
            recalculated.clamp(pilot_n, cfg.n_max_cap as u64),
            false,
        )
    } else {
        ((base.n_total as u64).max(pilot_n), true)
    };
    let remaining = (final_n - pilot_n) as u32;
    if remaining > 0 {
        let mut extra = generate_trial(
            &base.scenario,
            remaining,
            base.allocation,
            &base.censoring,
            &mut rng,
        );
        for r in &mut extra {
            r.id += pilot_n;
        }
        data.extend(extra);
    }
    let mut outcome = analyze_replicate(&data, base)?;
    outcome.fallback = fallback;
    Ok(outcome)
}

fn audit_rows(outcomes: &[ReplicateOutcome]) -> Vec<ReplicateAudit> {
    outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| ReplicateAudit {
            replicate: i as u32,
            p_value: o.p_value,
            reject: o.reject,
            theta: o.estimates.map(|e| e.log_theta.exp()),
            final_n: o.final_n,
            fallback: o.fallback,
        })
        .collect()
}

fn aggregate(
    replicates: u32,
    outcomes: &[ReplicateOutcome],
    with_ssr: bool,
) -> OperatingCharacteristics {
    let mut rejections = 0u32;
    let mut informative = 0u32;
    let mut sums = [0.0_f64; 5];
    let mut n_sum = 0.0_f64;
    let mut n_min = u32::MAX;
    let mut n_max = 0u32;
    let mut fallbacks = 0u32;
    for o in outcomes {
        rejections += o.reject as u32;
        if let Some(e) = o.estimates {
            informative += 1;
            sums[0] += e.log_theta;
            sums[1] += e.f1_treatment;
            sums[2] += e.f1_control;
            sums[3] += e.f2_treatment;
            sums[4] += e.f2_control;
        }
        n_sum += o.final_n as f64;
        n_min = n_min.min(o.final_n);
        n_max = n_max.max(o.final_n);
        fallbacks += o.fallback as u32;
    }
    let rate = rejections as f64 / replicates as f64;
    let m = informative as f64;
    let log_theta = sums[0] / m;
    OperatingCharacteristics {
        replicates,
        rejections,
        rejection_rate: rate,
        mc_standard_error: (rate * (1.0 - rate) / replicates as f64).sqrt(),
        mean_estimates: MeanEstimates {
            informative_replicates: informative,
            theta: log_theta.exp(),
            log_theta,
            f1_treatment: sums[1] / m,
            f1_control: sums[2] / m,
            f2_treatment: sums[3] / m,
            f2_control: sums[4] / m,
        },
        ssr: with_ssr.then_some(SsrSummary {
            mean_final_n: n_sum / replicates as f64,
            min_final_n: n_min,
            max_final_n: n_max,
            fallback_replicates: fallbacks,
        }),
    }
}

fn map_replicates<F>(replicates: u32, threads: usize, run: F) -> Result<Vec<ReplicateOutcome>>
where
    F: Fn(u64) -> Result<ReplicateOutcome> + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let work = || (0..replicates as u64).into_par_iter().map(&run).collect();
        if threads == 0 {
            work()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            pool.install(work)
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        (0..replicates as u64).map(run).collect()
    }
}

/// Run the configured number of replicates and report rejection rate and
/// estimator summaries. Uses the global worker pool.
pub fn operating_characteristics(cfg: &SimulationConfig) -> Result<OperatingCharacteristics> {
    operating_characteristics_with_threads(cfg, 0)
}

/// Like [`operating_characteristics`] with an explicit worker count
/// (0 = default pool). Results are identical for every thread count.
pub fn operating_characteristics_with_threads(
    cfg: &SimulationConfig,
    threads: usize,
) -> Result<OperatingCharacteristics> {
    Ok(operating_characteristics_with_audit(cfg, threads)?.0)
}

/// Variant returning the per-replicate audit trail alongside the summary.
pub fn operating_characteristics_with_audit(
    cfg: &SimulationConfig,
    threads: usize,
) -> Result<(OperatingCharacteristics, Vec<ReplicateAudit>)> {
    cfg.validate()?;
    let outcomes = map_replicates(cfg.replicates, threads, |rep| fixed_n_replicate(cfg, rep))?;
    Ok((
        aggregate(cfg.replicates, &outcomes, false),
        audit_rows(&outcomes),
    ))
}

/// Internal-pilot simulation: per replicate, enroll the pilot, re-estimate
/// the favourable-event probability from the blinded pooled curve,
/// recalculate the size as `required_events / psi_hat` (clamped to
/// `[pilot, n_max_cap]`), enroll the remainder and analyze the combined
/// trial. Pilots without a favourable event fall back to the planned size
/// and are counted.
pub fn blinded_ssr(cfg: &SsrConfig) -> Result<OperatingCharacteristics> {
    blinded_ssr_with_threads(cfg, 0)
}

/// Like [`blinded_ssr`] with an explicit worker count (0 = default pool).
pub fn blinded_ssr_with_threads(
    cfg: &SsrConfig,
    threads: usize,
) -> Result<OperatingCharacteristics> {
    Ok(blinded_ssr_with_audit(cfg, threads)?.0)
}

/// Variant returning the per-replicate audit trail alongside the summary.
pub fn blinded_ssr_with_audit(
    cfg: &SsrConfig,
    threads: usize,
) -> Result<(OperatingCharacteristics, Vec<ReplicateAudit>)> {
    cfg.validate()?;
    let outcomes = map_replicates(cfg.base.replicates, threads, |rep| ssr_replicate(cfg, rep))?;
    Ok((
        aggregate(cfg.base.replicates, &outcomes, true),
        audit_rows(&outcomes),
    ))
}
