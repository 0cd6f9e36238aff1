//! Command-line entry points.
//!
//! Subcommands: `calibrate`, `run`, `sweep-tax`, `evaluate`, `report`,
//! `verify`. Failures exit with distinct codes so scripts can tell usage
//! errors (2), config errors (3), missing credentials (4), provider
//! failures (5) and store errors (6) apart; `verify` exits 1 when an
//! invariant check fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{AgentError, BackendKind, Gateway, ScenarioKind};
use crate::calibration::period_rate_consistency_check;
use crate::config::{Config, ConfigError};
use crate::experiment::{
    evaluate_records, run_scenario, ExperimentError, ExperimentPlan,
};
use crate::lifecycle::{
    budget_residual, effective_rate, euler_residual_relative, solve_n_period, solve_numeric,
    solve_two_period, BudgetEnvironment, Preferences, TaxPolicy,
};
use crate::report::write_report;
use crate::store::{RunManifest, RunStore, StoreError};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_CREDENTIALS: u8 = 4;
const EXIT_PROVIDER: u8 = 5;
const EXIT_STORE: u8 = 6;
const EXIT_RUNTIME: u8 = 7;

#[derive(Parser)]
#[command(
    name = "lifecycle-sim",
    version,
    about = "Two-period lifecycle consumption experiments over LLM and persona agent panels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Persona,
    Live,
}

impl From<Mode> for BackendKind {
    fn from(mode: Mode) -> Self {
        match mode {
            Mode::Persona => BackendKind::Persona,
            Mode::Live => BackendKind::LiveProvider,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliScenario {
    WithUtility,
    GutFeeling,
}

#[derive(Args)]
struct CommonRunArgs {
    /// TOML config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Agent backend.
    #[arg(long, value_enum, default_value = "persona")]
    mode: Mode,
    /// Base seed every per-trial seed derives from.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per agent (and per tax point).
    #[arg(long)]
    trials: Option<u32>,
    /// Run store directory to create.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve population calibrations and write them to a run store.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run scenario A (explicit utility) or B (gut feeling).
    Run {
        #[arg(long, value_enum)]
        scenario: CliScenario,
        #[command(flatten)]
        common: CommonRunArgs,
    },
    /// Sweep the interest-earnings tax across the grid.
    SweepTax {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Comma-separated tax fractions, e.g. 0,0.1,0.2 (defaults to the
        /// config grid).
        #[arg(long, value_delimiter = ',')]
        tax_grid: Option<Vec<f64>>,
    },
    /// Score a run store's records and persist the evaluations.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
    },
    /// Emit figure CSV/SVG files and the metric table from a run store.
    Report {
        #[arg(long)]
        run: PathBuf,
        /// Output directory (defaults to <run>/report).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the solver-oracle and invariant suite.
    Verify {
        /// Randomized draws to compare the closed form against the grid oracle.
        #[arg(long, default_value_t = 1_000)]
        draws: u32,
        #[arg(long, default_value_t = 20_240_921)]
        seed: u64,
        /// Grid resolution for the oracle.
        #[arg(long, default_value_t = 10_000)]
        resolution: usize,
    },
}

/// Parse and run; returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(error) => {
            // Keep clap's rendering (helps with --help/--version) but pin
            // the usage exit code.
            let is_help = matches!(
                error.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = error.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_USAGE)
            };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.exit_code)
        }
    }
}

struct Failure {
    exit_code: u8,
    message: String,
}

impl Failure {
    fn new(exit_code: u8, message: impl Into<String>) -> Self {
        Self {
            exit_code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(error: ConfigError) -> Self {
        Failure::new(EXIT_CONFIG, error.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(error: StoreError) -> Self {
        Failure::new(EXIT_STORE, error.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(error: ExperimentError) -> Self {
        let code = match &error {
            ExperimentError::Agent(AgentError::MissingCredentials { .. }) => EXIT_CREDENTIALS,
            ExperimentError::Agent(_) | ExperimentError::ProviderFailedAllTrials(_) => {
                EXIT_PROVIDER
            }
            ExperimentError::Validation(_) => EXIT_CONFIG,
            ExperimentError::Store(_) => EXIT_STORE,
            _ => EXIT_RUNTIME,
        };
        Failure::new(code, error.to_string())
    }
}

impl From<crate::report::ReportError> for Failure {
    fn from(error: crate::report::ReportError) -> Self {
        Failure::new(EXIT_RUNTIME, error.to_string())
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<Config, Failure> {
    match path {
        Some(path) => Ok(Config::load(path)?),
        None => Ok(Config::default_panel()),
    }
}

/// In live mode, fail fast when any referenced provider has no credential.
fn preflight_credentials(config: &Config, mode: BackendKind) -> Result<(), Failure> {
    if mode != BackendKind::LiveProvider {
        return Ok(());
    }
    for agent in &config.agents {
        let Some(provider_name) = agent.provider.as_deref() else {
            return Err(Failure::new(
                EXIT_CONFIG,
                format!("agent {} has no provider for live mode", agent.model_id),
            ));
        };
        let Some(provider) = config.providers.iter().find(|p| p.name == provider_name)
        else {
            return Err(Failure::new(
                EXIT_CONFIG,
                format!("agent {} references unknown provider {provider_name}", agent.model_id),
            ));
        };
        if std::env::var(&provider.auth_env).is_err() {
            return Err(Failure::new(
                EXIT_CREDENTIALS,
                format!(
                    "provider {provider_name}: credentials missing, set ${}",
                    provider.auth_env
                ),
            ));
        }
    }
    Ok(())
}

fn execute(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Calibrate { config, out } => {
            let config = load_config(&config)?;
            let calibrations = config.calibrations()?;
            let manifest =
                RunManifest::new("calibrate", "n/a", config.experiment.base_seed, &config.content_hash()?);
            let store = RunStore::create(&out, manifest)?;
            for params in &calibrations {
                store.append_calibration(params)?;
            }
            println!(
                "calibrated {} group(s) into {}",
                calibrations.len(),
                out.display()
            );
            for params in &calibrations {
                println!(
                    "  {:<18} w0={:>12.1} y1={:>12.1} y2={:>12.1} ({:?})",
                    params.group_label, params.w0, params.y1, params.y2, params.source
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { scenario, common } => {
            let kind = match scenario {
                CliScenario::WithUtility => ScenarioKind::WithUtility,
                CliScenario::GutFeeling => ScenarioKind::GutFeeling,
            };
            run_experiment(kind, common, None)
        }
        Command::SweepTax { common, tax_grid } => {
            run_experiment(ScenarioKind::TaxPolicy, common, tax_grid)
        }
        Command::Evaluate { run } => {
            let store = RunStore::open(&run)?;
            let records = store.read_trials()?;
            if records.is_empty() {
                return Err(Failure::new(EXIT_RUNTIME, "run store has no trial records"));
            }
            let evaluations = evaluate_records(&records)?;
            store.write_evaluations(&evaluations)?;
            println!("{}", crate::report::metric_table(&evaluations));
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { run, out } => {
            let store = RunStore::open(&run)?;
            let records = store.read_trials()?;
            if records.is_empty() {
                return Err(Failure::new(EXIT_RUNTIME, "run store has no trial records"));
            }
            let evaluations = evaluate_records(&records)?;
            store.write_evaluations(&evaluations)?;
            let out_dir = out.unwrap_or_else(|| run.join("report"));
            let written = write_report(&records, &evaluations, &out_dir)?;
            println!("wrote {} file(s) to {}", written.len(), out_dir.display());
            for path in &written {
                println!("  {}", path.display());
            }
            println!("{}", crate::report::metric_table(&evaluations));
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            draws,
            seed,
            resolution,
        } => Ok(verify(draws, seed, resolution)),
    }
}

fn run_experiment(
    kind: ScenarioKind,
    common: CommonRunArgs,
    tax_grid: Option<Vec<f64>>,
) -> Result<ExitCode, Failure> {
    let mut config = load_config(&common.config)?;
    if let Some(seed) = common.seed {
        config.experiment.base_seed = seed;
    }
    if let Some(trials) = common.trials {
        config.experiment.trials_per_agent = trials;
    }
    if let Some(grid) = tax_grid {
        config.experiment.tax_grid = grid;
    }
    config.validate()?;
    let mode: BackendKind = common.mode.into();
    preflight_credentials(&config, mode)?;

    let plan = ExperimentPlan::from_config(&config, kind, mode)?;
    let gateway = Gateway::new(config.providers.clone());
    let manifest = RunManifest::new(
        match kind {
            ScenarioKind::WithUtility => "run-with-utility",
            ScenarioKind::GutFeeling => "run-gut-feeling",
            ScenarioKind::TaxPolicy => "sweep-tax",
        },
        match mode {
            BackendKind::Persona => "persona",
            BackendKind::LiveProvider => "live",
        },
        plan.base_seed,
        &config.content_hash()?,
    );
    let store = RunStore::create(&common.out, manifest)?;
    let started = Instant::now();
    let records = run_scenario(&plan, &gateway, Some(&store))?;
    let ok = records
        .iter()
        .filter(|r| r.parse_status == crate::agent::ParseStatus::Ok)
        .count();
    println!(
        "{} records ({} parsed ok) in {:.2}s -> {}",
        records.len(),
        ok,
        started.elapsed().as_secs_f64(),
        common.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Solver-oracle and invariant suite; prints one line per check.
fn verify(draws: u32, seed: u64, resolution: usize) -> ExitCode {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0u32;
    let mut max_oracle_gap = 0.0_f64;
    let mut max_euler = 0.0_f64;
    let mut max_budget = 0.0_f64;
    let mut max_ratio_gap = 0.0_f64;
    let mut max_homogeneity_gap = 0.0_f64;

    for draw in 0..draws {
        let sigma = rng.random_range(0.25..10.0);
        let beta = rng.random_range(0.5..0.999);
        let rate = rng.random_range(0.0..1.0);
        let w0 = rng.random_range(0.0..500_000.0);
        let y1 = rng.random_range(1_000.0..2_000_000.0);
        let y2 = rng.random_range(1_000.0..2_000_000.0);
        let prefs = Preferences::new(sigma, beta).expect("draw within bounds");
        let env = BudgetEnvironment::two_period(w0, y1, y2, rate, None).expect("feasible draw");

        let plan = match solve_two_period(&prefs, &env) {
            Ok(plan) => plan,
            Err(error) => {
                eprintln!("draw {draw}: solve failed: {error}");
                failures += 1;
                continue;
            }
        };
        let (c1, c2) = plan.pair().expect("two-period plan");

        let oracle = solve_numeric(&prefs, &env, resolution).expect("oracle solve");
        let (o1, _) = oracle.pair().expect("two-period oracle");
        let gap = (c1 - o1).abs() / o1;
        max_oracle_gap = max_oracle_gap.max(gap);
        if gap > 1e-6 {
            eprintln!("draw {draw}: oracle gap {gap:.3e} (sigma={sigma}, beta={beta}, r={rate})");
            failures += 1;
        }

        let euler = euler_residual_relative(&prefs, &env, &plan)
            .expect("positive plan")
            .abs();
        max_euler = max_euler.max(euler);
        if euler > 1e-9 {
            eprintln!("draw {draw}: euler residual {euler:.3e}");
            failures += 1;
        }

        let budget = budget_residual(&env, &plan).expect("matching plan").abs();
        max_budget = max_budget.max(budget);
        if budget > 1e-12 {
            eprintln!("draw {draw}: budget residual {budget:.3e}");
            failures += 1;
        }

        let ratio_gap =
            (c2 / c1 - prefs.consumption_growth(rate)).abs() / prefs.consumption_growth(rate);
        max_ratio_gap = max_ratio_gap.max(ratio_gap);
        if ratio_gap > 1e-12 {
            eprintln!("draw {draw}: consumption ratio off by {ratio_gap:.3e}");
            failures += 1;
        }

        let lambda = rng.random_range(0.1..10.0);
        let scaled_env =
            BudgetEnvironment::two_period(lambda * w0, lambda * y1, lambda * y2, rate, None)
                .expect("scaled env");
        let scaled = solve_two_period(&prefs, &scaled_env).expect("scaled solve");
        let (s1, _) = scaled.pair().expect("two-period plan");
        let homogeneity_gap = (s1 - lambda * c1).abs() / (lambda * c1);
        max_homogeneity_gap = max_homogeneity_gap.max(homogeneity_gap);
        if homogeneity_gap > 1e-12 {
            eprintln!("draw {draw}: homogeneity off by {homogeneity_gap:.3e}");
            failures += 1;
        }

        let n_plan = solve_n_period(&prefs, &env).expect("n-period solve");
        if n_plan != plan {
            eprintln!("draw {draw}: N=2 solve differs from the two-period solve");
            failures += 1;
        }
    }

    let mut check = |name: &str, pass: bool, detail: String| {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failures += 1;
        }
    };

    check(
        "oracle agreement",
        max_oracle_gap <= 1e-6,
        format!("{draws} draws, max relative gap {max_oracle_gap:.3e} (tolerance 1e-6)"),
    );
    check(
        "euler residual",
        max_euler <= 1e-9,
        format!("max relative residual {max_euler:.3e} (tolerance 1e-9)"),
    );
    check(
        "budget identity",
        max_budget <= 1e-12,
        format!("max |residual| {max_budget:.3e} (tolerance 1e-12)"),
    );
    check(
        "consumption ratio",
        max_ratio_gap <= 1e-12,
        format!("max gap {max_ratio_gap:.3e}"),
    );
    check(
        "homogeneity",
        max_homogeneity_gap <= 1e-12,
        format!("max gap {max_homogeneity_gap:.3e}"),
    );

    let tax_zero = effective_rate(0.486, Some(&TaxPolicy::new(0.0).expect("valid")));
    let tax_full = effective_rate(0.486, Some(&TaxPolicy::new(1.0).expect("valid")));
    check(
        "effective rate boundaries",
        tax_zero == 0.486 && tax_full == 0.0,
        format!("tau=0 -> {tax_zero}, tau=1 -> {tax_full}"),
    );

    let period_rate = period_rate_consistency_check(0.02, 20);
    let beta20 = 0.99_f64.powi(20);
    check(
        "prompt constants",
        format!("{:.1}", period_rate * 100.0) == "48.6" && format!("{beta20:.3}") == "0.818",
        format!(
            "(1.02^20-1) = {:.5} -> {:.1}%, 0.99^20 = {beta20:.5} -> {:.3}",
            period_rate,
            period_rate * 100.0,
            beta20
        ),
    );

    println!(
        "verify finished in {:.2}s: {}",
        started.elapsed().as_secs_f64(),
        if failures == 0 {
            "all checks passed".to_string()
        } else {
            format!("{failures} failure(s)")
        }
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY_FAILED)
    }
}
