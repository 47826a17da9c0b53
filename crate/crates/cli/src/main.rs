//! favtrial: plan, tabulate, estimate and simulate randomized trials whose
//! primary endpoint is a favourable event under competing mortality.

mod dataset;
mod error;
mod estimate;
mod render;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;

use favtrial::design::{
    hazard_scenario_table, plan_from_medians, plan_from_probabilities, preset_hazard_scenarios,
    preset_probability_scenarios, probability_scenario_table, DesignParams, EventProbabilities,
    PlanningMethod,
};
use favtrial::simulate::{
    blinded_ssr_with_audit, operating_characteristics_with_audit, AllocationRule, AnalysisMethod,
    CensoringModel, ReplicateAudit, SimulationConfig, SsrConfig,
};
use favtrial::{ArmHazards, EffectMeasures, ScenarioSpec};

use error::{CliError, CliResult};

pub(crate) const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "favtrial",
    version,
    about = "Competing-risks design and analysis for favourable-event trials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample-size plan from event probabilities or median improvement times
    Plan(PlanArgs),
    /// Derived scenario tables from a built-in preset or a CSV of scenarios
    ScenarioTable(ScenarioTableArgs),
    /// Curves, medians, restricted means and tests for a dataset CSV
    Estimate(EstimateArgs),
    /// Monte Carlo operating characteristics of a fixed-size design
    Simulate(SimulateArgs),
    /// Monte Carlo of blinded sample-size recalculation (internal pilot)
    SsrSim(SsrSimArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Favourable cause-specific hazard ratio
    EventSpecific,
    /// Subdistribution hazard ratio at the horizon
    Subdistribution,
    /// Odds ratio of the favourable event by the horizon
    OddsRatio,
}

impl From<MethodArg> for PlanningMethod {
    fn from(m: MethodArg) -> PlanningMethod {
        match m {
            MethodArg::EventSpecific => PlanningMethod::EventSpecificHr,
            MethodArg::Subdistribution => PlanningMethod::SubdistributionHr,
            MethodArg::OddsRatio => PlanningMethod::OddsRatio,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalysisArg {
    EventSpecificLogrank,
    GraySubdistribution,
    BinaryProportion,
}

impl From<AnalysisArg> for AnalysisMethod {
    fn from(a: AnalysisArg) -> AnalysisMethod {
        match a {
            AnalysisArg::EventSpecificLogrank => AnalysisMethod::EventSpecificLogrank,
            AnalysisArg::GraySubdistribution => AnalysisMethod::GraySubdistribution,
            AnalysisArg::BinaryProportion => AnalysisMethod::BinaryProportion,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TextOrJson {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Text,
    Csv,
    Json,
}

#[derive(Args, Clone, Copy)]
struct DesignFlags {
    /// Two-sided type I error
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Target power
    #[arg(long, default_value_t = 0.8)]
    power: f64,
    /// Fraction randomized to treatment
    #[arg(long, default_value_t = 0.5)]
    allocation: f64,
}

impl DesignFlags {
    fn params(&self) -> CliResult<DesignParams> {
        DesignParams::new(self.alpha, self.power, self.allocation)
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Args)]
struct PlanArgs {
    /// Favourable-event probability by tau, treatment arm
    #[arg(long)]
    f1t: Option<f64>,
    /// Favourable-event probability by tau, control arm
    #[arg(long)]
    f1c: Option<f64>,
    /// Competing-event probability by tau, treatment arm
    #[arg(long)]
    f2t: Option<f64>,
    /// Competing-event probability by tau, control arm
    #[arg(long)]
    f2c: Option<f64>,
    /// Horizon in days
    #[arg(long, default_value_t = 28.0)]
    tau: f64,
    /// Planning scale (required with probabilities)
    #[arg(long)]
    method: Option<MethodArg>,
    /// Median days to the favourable event, treatment arm
    #[arg(long)]
    median_t: Option<f64>,
    /// Median days to the favourable event, control arm
    #[arg(long)]
    median_c: Option<f64>,
    /// Probability of reaching the favourable event (median-based planning)
    #[arg(long)]
    improve: Option<f64>,
    #[command(flatten)]
    design: DesignFlags,
    #[arg(long, value_enum, default_value_t = TextOrJson::Text)]
    format: TextOrJson,
}

#[derive(Args)]
struct ScenarioTableArgs {
    /// Built-in grid: `table1` (hazard scenarios) or `table2` (probability
    /// scenarios with planned sizes)
    #[arg(long, conflicts_with = "file")]
    preset: Option<String>,
    /// CSV of custom rows; header h1t,h1c,h2t,h2c (hazards per arm) or
    /// f1t,f1c,f2t,f2c (probabilities per arm)
    #[arg(long)]
    file: Option<PathBuf>,
    /// Horizon in days
    #[arg(long, default_value_t = 28.0)]
    tau: f64,
    #[command(flatten)]
    design: DesignFlags,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    format: TableFormat,
}

#[derive(Args)]
struct EstimateArgs {
    /// Dataset CSV with header id,arm,time,status
    #[arg(long)]
    data: PathBuf,
    /// Horizon in days
    #[arg(long, default_value_t = 28.0)]
    tau: f64,
    /// Also write every curve as tidy CSV (curve,arm,time,value)
    #[arg(long)]
    curves_csv: Option<PathBuf>,
    /// Fail instead of noting when the subdistribution product-limit curve
    /// cannot be computed (needs censoring-complete data)
    #[arg(long)]
    require_subdistribution: bool,
}

#[derive(Args)]
struct ScenarioFlags {
    /// Favourable-event probability by tau, treatment arm
    #[arg(long)]
    f1t: Option<f64>,
    #[arg(long)]
    f1c: Option<f64>,
    #[arg(long)]
    f2t: Option<f64>,
    #[arg(long)]
    f2c: Option<f64>,
    /// Favourable hazard per day, treatment arm (alternative to --f1t group)
    #[arg(long)]
    h1t: Option<f64>,
    #[arg(long)]
    h1c: Option<f64>,
    #[arg(long)]
    h2t: Option<f64>,
    #[arg(long)]
    h2c: Option<f64>,
    /// Horizon in days
    #[arg(long, default_value_t = 28.0)]
    tau: f64,
    /// Fraction randomized to treatment
    #[arg(long, default_value_t = 0.5)]
    allocation: f64,
}

impl ScenarioFlags {
    fn build(&self) -> CliResult<ScenarioSpec> {
        let probs = [self.f1t, self.f1c, self.f2t, self.f2c];
        let hazards = [self.h1t, self.h1c, self.h2t, self.h2c];
        match (
            probs.iter().filter(|v| v.is_some()).count(),
            hazards.iter().filter(|v| v.is_some()).count(),
        ) {
            (4, 0) => EventProbabilities {
                f1_treatment: self.f1t.unwrap(),
                f1_control: self.f1c.unwrap(),
                f2_treatment: self.f2t.unwrap(),
                f2_control: self.f2c.unwrap(),
            }
            .to_scenario(self.tau, self.allocation)
            .map_err(|e| CliError::Usage(e.to_string())),
            (0, 4) => {
                let treatment = ArmHazards::new(self.h1t.unwrap(), self.h2t.unwrap());
                let control = ArmHazards::new(self.h1c.unwrap(), self.h2c.unwrap());
                treatment
                    .and_then(|t| control.map(|c| (t, c)))
                    .and_then(|(t, c)| ScenarioSpec::new(t, c, self.tau, self.allocation))
                    .map_err(|e| CliError::Usage(e.to_string()))
            }
            _ => Err(CliError::Usage(
                "specify the scenario as all of --f1t --f1c --f2t --f2c or all of \
                 --h1t --h1c --h2t --h2c"
                    .into(),
            )),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON configuration file (alternative to inline flags)
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioFlags,
    /// Subjects per simulated trial
    #[arg(long)]
    n_total: Option<u32>,
    /// Number of simulated trials
    #[arg(long)]
    replicates: Option<u32>,
    /// Analysis applied to each trial
    #[arg(long)]
    analysis: Option<AnalysisArg>,
    /// Two-sided test level
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Uniform censoring window in days (omit for complete follow-up)
    #[arg(long)]
    censor_window: Option<f64>,
    /// Assign arms by independent coin flips instead of permuted blocks
    #[arg(long)]
    bernoulli: bool,
    /// RNG seed; drawn and echoed when omitted
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Write a per-replicate audit CSV
    #[arg(long)]
    audit_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SsrSimArgs {
    /// JSON configuration file (alternative to inline flags)
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioFlags,
    /// Initially planned total size
    #[arg(long)]
    n_total: Option<u32>,
    #[arg(long)]
    replicates: Option<u32>,
    #[arg(long)]
    analysis: Option<AnalysisArg>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Fraction of the planned size enrolled before the blinded interim
    #[arg(long, default_value_t = 0.5)]
    pilot_fraction: f64,
    /// Upper cap on the recalculated size
    #[arg(long)]
    n_max_cap: Option<u32>,
    /// Design-stage required favourable events driving the recalculation
    #[arg(long)]
    required_events: Option<f64>,
    /// Skip recalculation (fixed-size reference run)
    #[arg(long)]
    no_recalc: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    audit_csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<C: Serialize, R: Serialize> {
    schema_version: u32,
    command: &'static str,
    config: C,
    result: R,
}

#[derive(Serialize)]
struct PlanEnvelope<'a> {
    schema_version: u32,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    plan: &'a favtrial::design::SampleSizePlan,
    #[serde(skip_serializing_if = "Option::is_none")]
    effect_measures: Option<&'a EffectMeasures>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Plan(args) => cmd_plan(args),
        Command::ScenarioTable(args) => cmd_scenario_table(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::SsrSim(args) => cmd_ssr_sim(args),
    }
}

fn cmd_plan(args: PlanArgs) -> CliResult<()> {
    let params = args.design.params()?;
    let medians_given = [args.median_t, args.median_c, args.improve]
        .iter()
        .filter(|v| v.is_some())
        .count();
    let probs_given = [args.f1t, args.f1c, args.f2t, args.f2c]
        .iter()
        .filter(|v| v.is_some())
        .count();

    let (plan, measures, tau) = if medians_given > 0 {
        if medians_given < 3 {
            return Err(CliError::Usage(
                "median-based planning needs all of --median-t --median-c --improve".into(),
            ));
        }
        if probs_given > 0 || args.method.is_some() {
            return Err(CliError::Usage(
                "choose either probability-based flags (--f1t ... --method) or \
                 median-based flags (--median-t --median-c --improve), not both"
                    .into(),
            ));
        }
        let plan = plan_from_medians(
            args.median_t.unwrap(),
            args.median_c.unwrap(),
            args.improve.unwrap(),
            &params,
        )?;
        (plan, None, None)
    } else {
        if probs_given < 4 {
            return Err(CliError::Usage(
                "probability-based planning needs all of --f1t --f1c --f2t --f2c".into(),
            ));
        }
        let method = args.method.ok_or_else(|| {
            CliError::Usage("probability-based planning needs --method".into())
        })?;
        let probs = EventProbabilities {
            f1_treatment: args.f1t.unwrap(),
            f1_control: args.f1c.unwrap(),
            f2_treatment: args.f2t.unwrap(),
            f2_control: args.f2c.unwrap(),
        };
        let (plan, measures) =
            plan_from_probabilities(&probs, args.tau, &params, method.into())?;
        (plan, Some(measures), Some(args.tau))
    };

    match args.format {
        TextOrJson::Text => print!(
            "{}",
            render::plan_text(&plan, measures.as_ref(), tau.unwrap_or(28.0))
        ),
        TextOrJson::Json => print_json(&PlanEnvelope {
            schema_version: SCHEMA_VERSION,
            command: "plan",
            tau,
            plan: &plan,
            effect_measures: measures.as_ref(),
        })?,
    }
    Ok(())
}

enum ScenarioRows {
    Hazards(Vec<ScenarioSpec>),
    Probabilities(Vec<EventProbabilities>),
}

fn cmd_scenario_table(args: ScenarioTableArgs) -> CliResult<()> {
    let params = args.design.params()?;
    let rows = match (&args.preset, &args.file) {
        (Some(name), None) => match name.as_str() {
            "table1" => ScenarioRows::Hazards(preset_hazard_scenarios()),
            "table2" => ScenarioRows::Probabilities(preset_probability_scenarios()),
            other => {
                return Err(CliError::Usage(format!(
                    "unknown preset {other:?}; available: table1, table2"
                )))
            }
        },
        (None, Some(path)) => read_scenario_file(path, args.tau, params.allocation_p())?,
        _ => {
            return Err(CliError::Usage(
                "scenario-table needs exactly one of --preset or --file".into(),
            ))
        }
    };

    match rows {
        ScenarioRows::Hazards(specs) => {
            let table = hazard_scenario_table(&specs)?;
            match args.format {
                TableFormat::Text => print!("{}", render::hazard_table_text(&table)),
                TableFormat::Csv => print!("{}", render::hazard_table_csv(&table)),
                TableFormat::Json => print_json(&Envelope {
                    schema_version: SCHEMA_VERSION,
                    command: "scenario-table",
                    config: "hazard_rows",
                    result: &table,
                })?,
            }
        }
        ScenarioRows::Probabilities(probs) => {
            let table = probability_scenario_table(&probs, args.tau, &params)?;
            match args.format {
                TableFormat::Text => print!("{}", render::probability_table_text(&table)),
                TableFormat::Csv => print!("{}", render::probability_table_csv(&table)),
                TableFormat::Json => print_json(&Envelope {
                    schema_version: SCHEMA_VERSION,
                    command: "scenario-table",
                    config: "probability_rows",
                    result: &table,
                })?,
            }
        }
    }
    Ok(())
}

fn read_scenario_file(path: &Path, tau: f64, allocation_p: f64) -> CliResult<ScenarioRows> {
    let display = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Run(format!("{display}: {e}")))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Run(format!("{display}: {e}")))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();

    let mut rows: Vec<[f64; 4]> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Run(format!("{display}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(CliError::Run(format!(
                "{display}: line {line}: expected 4 fields, got {}",
                record.len()
            )));
        }
        let mut row = [0.0; 4];
        for (slot, field) in row.iter_mut().zip(record.iter()) {
            *slot = field.parse().map_err(|_| {
                CliError::Run(format!("{display}: line {line}: invalid number {field:?}"))
            })?;
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!("{display}: no scenario rows")));
    }

    if headers == ["h1t", "h1c", "h2t", "h2c"] {
        let specs = rows
            .iter()
            .enumerate()
            .map(|(i, &[h1t, h1c, h2t, h2c])| {
                ArmHazards::new(h1t, h2t)
                    .and_then(|t| ArmHazards::new(h1c, h2c).map(|c| (t, c)))
                    .and_then(|(t, c)| ScenarioSpec::new(t, c, tau, allocation_p))
                    .map_err(|e| CliError::Run(format!("{display}: row {i}: {e}")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(ScenarioRows::Hazards(specs))
    } else if headers == ["f1t", "f1c", "f2t", "f2c"] {
        Ok(ScenarioRows::Probabilities(
            rows.iter()
                .map(|&[f1t, f1c, f2t, f2c]| EventProbabilities {
                    f1_treatment: f1t,
                    f1_control: f1c,
                    f2_treatment: f2t,
                    f2_control: f2c,
                })
                .collect(),
        ))
    } else {
        Err(CliError::Usage(format!(
            "{display}: expected header h1t,h1c,h2t,h2c or f1t,f1c,f2t,f2c, got {}",
            headers.join(",")
        )))
    }
}

fn cmd_estimate(args: EstimateArgs) -> CliResult<()> {
    if !(args.tau.is_finite() && args.tau > 0.0) {
        return Err(CliError::Usage(format!(
            "--tau must be positive, got {}",
            args.tau
        )));
    }
    let data = dataset::parse_dataset(&args.data)?;
    let report = estimate::build_report(&data, args.tau, args.require_subdistribution)?;
    if let Some(path) = &args.curves_csv {
        estimate::write_curves_csv(&report, path)?;
    }
    print_json(&report)
}

fn resolve_seed(seed_flag: Option<u64>) -> u64 {
    seed_flag.unwrap_or_else(|| {
        let seed: u64 = rand::rng().random();
        eprintln!("note: no --seed given; drew seed {seed}");
        seed
    })
}

fn load_config_value(path: &Path) -> CliResult<serde_json::Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!(
            "{}: invalid JSON at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn seed_object(value: &mut serde_json::Value, seed_flag: Option<u64>) -> CliResult<()> {
    let object = value
        .as_object_mut()
        .ok_or_else(|| CliError::Usage("config root must be a JSON object".into()))?;
    if let Some(seed) = seed_flag {
        object.insert("seed".into(), seed.into());
    } else if !object.contains_key("seed") {
        let seed = resolve_seed(None);
        object.insert("seed".into(), seed.into());
    }
    Ok(())
}

fn inline_sim_config(args: &SimulateArgs) -> CliResult<SimulationConfig> {
    let (Some(n_total), Some(replicates), Some(analysis)) =
        (args.n_total, args.replicates, args.analysis)
    else {
        return Err(CliError::Usage(
            "simulate needs --config or all of --n-total --replicates --analysis plus a \
             scenario"
                .into(),
        ));
    };
    Ok(SimulationConfig {
        scenario: args.scenario.build()?,
        n_total,
        replicates,
        seed: resolve_seed(args.seed),
        analysis: analysis.into(),
        censoring: match args.censor_window {
            Some(window) => CensoringModel::Uniform { window },
            None => CensoringModel::None,
        },
        alpha: args.alpha,
        allocation: if args.bernoulli {
            AllocationRule::Bernoulli
        } else {
            AllocationRule::PermutedBlock
        },
    })
}

fn write_audit_csv(path: &Path, rows: &[ReplicateAudit]) -> CliResult<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let cfg: SimulationConfig = match &args.config {
        Some(path) => {
            let mut value = load_config_value(path)?;
            seed_object(&mut value, args.seed)?;
            serde_json::from_value(value)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => inline_sim_config(&args)?,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let (result, audit) = operating_characteristics_with_audit(&cfg, args.threads)?;
    if let Some(path) = &args.audit_csv {
        write_audit_csv(path, &audit)?;
    }
    print_json(&Envelope {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        config: &cfg,
        result: &result,
    })
}

fn cmd_ssr_sim(args: SsrSimArgs) -> CliResult<()> {
    let cfg: SsrConfig = match &args.config {
        Some(path) => {
            let mut value = load_config_value(path)?;
            let base = value
                .as_object_mut()
                .and_then(|o| o.get_mut("base"))
                .ok_or_else(|| {
                    CliError::Usage("ssr-sim config must contain a \"base\" object".into())
                })?;
            seed_object(base, args.seed)?;
            serde_json::from_value(value)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => {
            let (Some(n_total), Some(replicates), Some(analysis)) =
                (args.n_total, args.replicates, args.analysis)
            else {
                return Err(CliError::Usage(
                    "ssr-sim needs --config or all of --n-total --replicates --analysis \
                     --n-max-cap --required-events plus a scenario"
                        .into(),
                ));
            };
            let (Some(n_max_cap), Some(required_events)) =
                (args.n_max_cap, args.required_events)
            else {
                return Err(CliError::Usage(
                    "ssr-sim needs --n-max-cap and --required-events".into(),
                ));
            };
            SsrConfig {
                base: SimulationConfig {
                    scenario: args.scenario.build()?,
                    n_total,
                    replicates,
                    seed: resolve_seed(args.seed),
                    analysis: analysis.into(),
                    censoring: CensoringModel::None,
                    alpha: args.alpha,
                    allocation: AllocationRule::PermutedBlock,
                },
                pilot_fraction: args.pilot_fraction,
                recalc: if args.no_recalc {
                    favtrial::simulate::RecalcPolicy::None
                } else {
                    favtrial::simulate::RecalcPolicy::Once
                },
                n_max_cap,
                required_events,
            }
        }
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let (result, audit) = blinded_ssr_with_audit(&cfg, args.threads)?;
    if let Some(path) = &args.audit_csv {
        write_audit_csv(path, &audit)?;
    }
    print_json(&Envelope {
        schema_version: SCHEMA_VERSION,
        command: "ssr-sim",
        config: &cfg,
        result: &result,
    })
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Run(format!("serialization failed: {e}")))?;
    println!("{text}");
    Ok(())
}
