//! Text and CSV rendering of plans and scenario tables. Text output rounds
//! probabilities to 4 decimals and ratios to 2; CSV and JSON keep full
//! precision.

use favtrial::design::{
    HazardScenarioRow, PlanningMethod, ProbabilityScenarioRow, SampleSizePlan,
};
use favtrial::EffectMeasures;

pub fn method_name(method: PlanningMethod) -> &'static str {
    match method {
        PlanningMethod::EventSpecificHr => "event-specific hazard ratio",
        PlanningMethod::SubdistributionHr => "subdistribution hazard ratio",
        PlanningMethod::OddsRatio => "odds ratio",
    }
}

pub fn plan_text(plan: &SampleSizePlan, measures: Option<&EffectMeasures>, tau: f64) -> String {
    let mut out = String::new();
    out.push_str(&format!("sample size plan ({})\n", method_name(plan.method)));
    out.push_str(&format!("  theta                {:.2}\n", plan.theta));
    out.push_str(&format!(
        "  required events      {:.2} (rounded up {})\n",
        plan.required_events, plan.required_events_ceil
    ));
    out.push_str(&format!("  psi                  {:.4}\n", plan.psi));
    out.push_str(&format!(
        "  total N              {} (treatment {}, control {})\n",
        plan.total_n, plan.n_treatment, plan.n_control
    ));
    if let Some(m) = measures {
        out.push_str(&format!("\neffect measures at tau = {tau}\n"));
        out.push_str(&format!("  event-specific HR    {:.2}\n", m.event_specific_hr));
        out.push_str(&format!("  competing-event HR   {:.2}\n", m.competing_event_hr));
        out.push_str(&format!("  subdistribution HR   {:.2}\n", m.subdistribution_hr));
        out.push_str(&format!("  odds ratio           {:.2}\n", m.odds_ratio));
    }
    out
}

fn aligned(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<String>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        out.push_str(&padded.join("  "));
        out.push('\n');
    };
    line(headers.iter().map(|h| h.to_string()).collect());
    for row in rows {
        line(row.clone());
    }
    out
}

const HAZARD_HEADER: [&str; 11] = [
    "h1_t", "h1_c", "h2_t", "h2_c", "hr_es", "hr_ce", "f1_t", "f1_c", "f2_t", "f2_c", "hr_sd",
];

const PROBABILITY_HEADER: [&str; 12] = [
    "f1_t", "f1_c", "f2_t", "f2_c", "hr_es", "n_es", "hr_ce", "hr_sd", "n_sd", "or", "n_or",
    "psi",
];

fn hazard_cells(r: &HazardScenarioRow, full: bool) -> Vec<String> {
    let p = |v: f64| if full { v.to_string() } else { format!("{v:.4}") };
    let ratio = |v: f64| if full { v.to_string() } else { format!("{v:.2}") };
    vec![
        p(r.favourable_hazard_treatment),
        p(r.favourable_hazard_control),
        p(r.competing_hazard_treatment),
        p(r.competing_hazard_control),
        ratio(r.event_specific_hr),
        ratio(r.competing_event_hr),
        p(r.f1_treatment),
        p(r.f1_control),
        p(r.f2_treatment),
        p(r.f2_control),
        ratio(r.subdistribution_hr),
    ]
}

fn probability_cells(r: &ProbabilityScenarioRow, full: bool) -> Vec<String> {
    let p = |v: f64| if full { v.to_string() } else { format!("{v:.4}") };
    let ratio = |v: f64| if full { v.to_string() } else { format!("{v:.2}") };
    vec![
        p(r.f1_treatment),
        p(r.f1_control),
        p(r.f2_treatment),
        p(r.f2_control),
        ratio(r.event_specific_hr),
        r.n_event_specific.to_string(),
        ratio(r.competing_event_hr),
        ratio(r.subdistribution_hr),
        r.n_subdistribution.to_string(),
        ratio(r.odds_ratio),
        r.n_odds_ratio.to_string(),
        p(r.psi),
    ]
}

pub fn hazard_table_text(rows: &[HazardScenarioRow]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(|r| hazard_cells(r, false)).collect();
    aligned(&HAZARD_HEADER, &cells)
}

pub fn probability_table_text(rows: &[ProbabilityScenarioRow]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(|r| probability_cells(r, false)).collect();
    aligned(&PROBABILITY_HEADER, &cells)
}

pub fn hazard_table_csv(rows: &[HazardScenarioRow]) -> String {
    let mut out = HAZARD_HEADER.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&hazard_cells(r, true).join(","));
        out.push('\n');
    }
    out
}

pub fn probability_table_csv(rows: &[ProbabilityScenarioRow]) -> String {
    let mut out = PROBABILITY_HEADER.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&probability_cells(r, true).join(","));
        out.push('\n');
    }
    out
}
