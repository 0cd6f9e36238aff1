//! Experiment orchestration: scenario runs, the interest-tax sweep,
//! population aggregation and theoretical reference paths.

use std::collections::BTreeMap;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    derive_trial_seed, parse_final_answer, render_prompt, AgentError, AgentProfile, BackendKind,
    EvaluationContext, Gateway, ParseFailure, ParseStatus, PromptScenario, RequestMetadata,
    ScenarioKind, TrialRecord, TrialRequest,
};
use crate::calibration::CalibratedParameters;
use crate::config::Config;
use crate::lifecycle::{
    saving_rates, solve_two_period, BudgetEnvironment, ConsumptionPlan, LifecycleError,
    Preferences, Provenance, SavingRates, TaxPolicy,
};
use crate::metrics::{evaluate_trial_set, tag_motives, MetricsError, TrialSetEvaluation};
use crate::store::{RunStore, StoreError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment plan: {0}")]
    Validation(String),
    #[error("provider for agent {0} failed every trial; aborting the run")]
    ProviderFailedAllTrials(String),
    #[error("group {model_id} has no valid trials at tax rate {tax_rate}")]
    MissingGroupAtTax { model_id: String, tax_rate: f64 },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// One panel member ready to run: profile plus resolved calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedAgent {
    pub profile: AgentProfile,
    pub calibration: CalibratedParameters,
}

impl PlannedAgent {
    /// Preference parameters exactly as the agent sees them: sigma verbatim,
    /// beta rounded to the three decimals shown in the prompt.
    pub fn display_sigma(&self) -> f64 {
        self.calibration.sigma
    }

    pub fn display_beta(&self) -> f64 {
        (self.calibration.beta_period * 1000.0).round() / 1000.0
    }
}

/// A fully specified run: which prompt, which panel, how many trials, which
/// tax grid, and the seed everything derives from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub scenario: ScenarioKind,
    pub agents: Vec<PlannedAgent>,
    pub trials_per_agent: u32,
    /// Swept only by the tax scenario; ignored otherwise.
    pub tax_grid: Vec<f64>,
    pub base_seed: u64,
}

impl ExperimentPlan {
    /// Assemble a plan from a config for the given scenario and backend mode.
    pub fn from_config(
        config: &Config,
        scenario: ScenarioKind,
        mode: BackendKind,
    ) -> Result<Self, ExperimentError> {
        config
            .validate()
            .map_err(|e| ExperimentError::Validation(e.to_string()))?;
        let mut agents = Vec::with_capacity(config.agents.len());
        for spec in &config.agents {
            let calibration = spec
                .calibration
                .resolve(spec.education_group.as_str(), &config.assumptions)
                .map_err(|e| ExperimentError::Validation(e.to_string()))?;
            agents.push(PlannedAgent {
                profile: spec.profile(mode),
                calibration,
            });
        }
        Ok(Self {
            scenario,
            agents,
            trials_per_agent: config.experiment.trials_per_agent,
            tax_grid: config.experiment.tax_grid.clone(),
            base_seed: config.experiment.base_seed,
        })
    }

    pub fn validate(&self, gateway: &Gateway) -> Result<(), ExperimentError> {
        if self.agents.is_empty() {
            return Err(ExperimentError::Validation("no agents in plan".into()));
        }
        if self.trials_per_agent == 0 {
            return Err(ExperimentError::Validation("trials_per_agent must be >= 1".into()));
        }
        let share_sum: f64 = self.agents.iter().map(|a| a.profile.population_share).sum();
        if (share_sum - 1.0).abs() > 1e-9 {
            return Err(ExperimentError::Validation(format!(
                "population shares sum to {share_sum}"
            )));
        }
        if self.scenario == ScenarioKind::TaxPolicy {
            if self.tax_grid.is_empty() {
                return Err(ExperimentError::Validation("tax sweep needs a grid".into()));
            }
            if self.tax_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(ExperimentError::Validation("tax grid outside [0, 1]".into()));
            }
            if self.tax_grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ExperimentError::Validation(
                    "tax grid must be strictly increasing".into(),
                ));
            }
        }
        for agent in &self.agents {
            gateway.validate_agent(&agent.profile)?;
        }
        Ok(())
    }

    fn tax_points(&self) -> Vec<Option<f64>> {
        if self.scenario == ScenarioKind::TaxPolicy {
            self.tax_grid.iter().copied().map(Some).collect()
        } else {
            vec![None]
        }
    }

    /// Total records the run must produce: |agents| x |tax points| x trials.
    pub fn expected_records(&self) -> usize {
        self.agents.len() * self.tax_points().len() * self.trials_per_agent as usize
    }
}

/// Run every (agent x tax point x trial) cell of the plan, persist the
/// records if a store is given, and return them sorted by (agent, tax,
/// trial index).
///
/// Trials fan out one thread per agent; agents sharing a live provider are
/// grouped onto the same thread so at most one request per provider is in
/// flight, which stays within any provider's parallelism bound. Per-trial
/// failures become records; the run only aborts when some agent fails every
/// single trial.
pub fn run_scenario(
    plan: &ExperimentPlan,
    gateway: &Gateway,
    store: Option<&RunStore>,
) -> Result<Vec<TrialRecord>, ExperimentError> {
    plan.validate(gateway)?;
    let tax_points = plan.tax_points();

    // Group agent indices by provider so live rate limits see one caller.
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (index, agent) in plan.agents.iter().enumerate() {
        let key = match agent.profile.backend {
            BackendKind::Persona => format!("persona:{index}"),
            BackendKind::LiveProvider => agent
                .profile
                .provider
                .clone()
                .unwrap_or_else(|| format!("unknown:{index}")),
        };
        groups.entry(key).or_default().push(index);
    }

    let mut per_agent: Vec<Vec<TrialRecord>> = vec![Vec::new(); plan.agents.len()];
    let results: Vec<(usize, Result<Vec<TrialRecord>, ExperimentError>)> =
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for agent_indices in groups.values() {
                let indices = agent_indices.clone();
                let tax_points = &tax_points;
                handles.push(scope.spawn(move || {
                    indices
                        .into_iter()
                        .map(|index| (index, run_agent_trials(plan, index, tax_points, gateway)))
                        .collect::<Vec<_>>()
                }));
            }
            handles
                .into_iter()
                .flat_map(|handle| handle.join().expect("trial thread panicked"))
                .collect()
        });

    for (index, result) in results {
        per_agent[index] = result?;
    }

    let records: Vec<TrialRecord> = per_agent.into_iter().flatten().collect();
    if let Some(store) = store {
        store.append_trials(&records)?;
    }
    Ok(records)
}

fn run_agent_trials(
    plan: &ExperimentPlan,
    agent_index: usize,
    tax_points: &[Option<f64>],
    gateway: &Gateway,
) -> Result<Vec<TrialRecord>, ExperimentError> {
    let agent = &plan.agents[agent_index];
    let mut records = Vec::with_capacity(tax_points.len() * plan.trials_per_agent as usize);
    let mut failures = 0usize;
    let mut total = 0usize;

    for tax_rate in tax_points {
        let scenario =
            PromptScenario::from_calibration(plan.scenario, &agent.calibration, *tax_rate)?;
        let optimum = scenario.optimum(agent.display_sigma(), agent.display_beta())?;
        let (optimum_c1, optimum_c2) = optimum.pair().expect("two-period optimum");
        let prompt = render_prompt(&scenario)?;
        let evaluation = EvaluationContext {
            sigma: agent.display_sigma(),
            beta: agent.display_beta(),
            optimum_c1,
            optimum_c2,
        };

        for trial_index in 1..=plan.trials_per_agent {
            total += 1;
            let seed = derive_trial_seed(
                plan.base_seed,
                &agent.profile.model_id,
                plan.scenario,
                *tax_rate,
                trial_index,
            );
            let trial_agent = agent.profile.with_trial_seed(seed);
            let request = TrialRequest {
                prompt: &prompt,
                scenario: &scenario,
                optimum: &optimum,
            };
            let record = match gateway.invoke(&trial_agent, &request) {
                Ok(outcome) => {
                    let (parsed_plan, parse_status) =
                        match parse_final_answer(&outcome.raw_response) {
                            Ok((c1, c2)) => {
                                match ConsumptionPlan::two_period(c1, c2, Provenance::AgentParsed)
                                {
                                    Ok(plan) => (Some(plan), ParseStatus::Ok),
                                    Err(_) => (None, ParseStatus::MalformedNumbers),
                                }
                            }
                            Err(ParseFailure::NoFinalAnswer) => (None, ParseStatus::NoFinalAnswer),
                            Err(ParseFailure::MalformedNumbers) => {
                                (None, ParseStatus::MalformedNumbers)
                            }
                        };
                    TrialRecord {
                        trial_index,
                        tax_rate: *tax_rate,
                        agent: trial_agent,
                        scenario: scenario.clone(),
                        raw_response: outcome.raw_response,
                        parsed_plan,
                        parse_status,
                        invoke_error: None,
                        evaluation: evaluation.clone(),
                        timestamp: Utc::now(),
                        request_metadata: outcome.metadata,
                    }
                }
                Err(error) => {
                    failures += 1;
                    let provider = agent
                        .profile
                        .provider
                        .clone()
                        .unwrap_or_else(|| "persona".to_string());
                    TrialRecord {
                        trial_index,
                        tax_rate: *tax_rate,
                        agent: trial_agent,
                        scenario: scenario.clone(),
                        raw_response: String::new(),
                        parsed_plan: None,
                        parse_status: ParseStatus::InvokeFailed,
                        invoke_error: Some(error.to_string()),
                        evaluation: evaluation.clone(),
                        timestamp: Utc::now(),
                        request_metadata: RequestMetadata {
                            provider,
                            latency_ms: 0,
                            attempts: 0,
                        },
                    }
                }
            };
            records.push(record);
        }
    }

    if failures == total && total > 0 {
        return Err(ExperimentError::ProviderFailedAllTrials(
            agent.profile.model_id.clone(),
        ));
    }
    Ok(records)
}

/// One point of a theoretical saving-rate path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub tax_rate: f64,
    pub rates: SavingRates,
}

/// Analytical saving-rate path across the tax grid for given preferences.
pub fn reference_path(
    prefs: &Preferences,
    env: &BudgetEnvironment,
    tax_grid: &[f64],
) -> Result<Vec<ReferencePoint>, ExperimentError> {
    let mut path = Vec::with_capacity(tax_grid.len());
    for &tax_rate in tax_grid {
        let taxed = env.with_tax(TaxPolicy::new(tax_rate)?)?;
        let plan = solve_two_period(prefs, &taxed)?;
        let reference = ConsumptionPlan::new(plan.consumptions().to_vec(), Provenance::ReferencePath)
            .expect("solver output is a valid plan");
        let rates = saving_rates(&taxed, &reference)?;
        path.push(ReferencePoint { tax_rate, rates });
    }
    Ok(path)
}

/// Summary of one group's trials at one tax point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCurvePoint {
    pub tax_rate: f64,
    pub mean: SavingRates,
    pub median: SavingRates,
    /// Dispersion of the wealth-inclusive rate over trials.
    pub min: f64,
    pub q1: f64,
    pub q3: f64,
    pub max: f64,
    pub n_valid: usize,
}

/// Population-weighted point with the group envelope at this tax rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub tax_rate: f64,
    pub rate: SavingRates,
    pub group_min: f64,
    pub group_max: f64,
}

/// Full sweep output: per-group curves, the population aggregate and the
/// two theoretical reference paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub per_group: BTreeMap<String, Vec<GroupCurvePoint>>,
    pub aggregate: Vec<AggregatePoint>,
    pub reference_sigma_2: Vec<ReferencePoint>,
    pub reference_sigma_05: Vec<ReferencePoint>,
}

fn percentile(sorted: &[f64], fraction: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    if sorted.len() == 1 {
        return sorted[0];
    }
    let position = fraction * (sorted.len() - 1) as f64;
    let low = position.floor() as usize;
    let high = position.ceil() as usize;
    let weight = position - low as f64;
    sorted[low] * (1.0 - weight) + sorted[high] * weight
}

/// Everything population aggregation needs, derivable from a plan or from a
/// stored record set alone.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepContext {
    /// (model_id, population share) per group.
    pub shares: Vec<(String, f64)>,
    pub tax_grid: Vec<f64>,
    /// Untaxed share-weighted environment for the reference paths.
    pub reference_env: BudgetEnvironment,
    /// Period discount factor assumed for the reference paths.
    pub beta_period: f64,
}

impl SweepContext {
    pub fn from_plan(plan: &ExperimentPlan) -> Result<Self, ExperimentError> {
        Ok(Self {
            shares: plan
                .agents
                .iter()
                .map(|a| (a.profile.model_id.clone(), a.profile.population_share))
                .collect(),
            tax_grid: plan.tax_grid.clone(),
            reference_env: weighted_environment(plan)?,
            beta_period: plan.agents[0].calibration.beta_period,
        })
    }

    /// Reconstruct the context from stored records: shares come from the
    /// embedded agent profiles, the tax grid from the swept rates, and the
    /// reference environment from the displayed scenario parameters.
    pub fn from_records(records: &[TrialRecord]) -> Result<Self, ExperimentError> {
        let mut per_model: BTreeMap<String, &TrialRecord> = BTreeMap::new();
        let mut tax_bits: Vec<u64> = Vec::new();
        for record in records {
            per_model.entry(record.agent.model_id.clone()).or_insert(record);
            if let Some(tax) = record.tax_rate {
                if !tax_bits.contains(&tax.to_bits()) {
                    tax_bits.push(tax.to_bits());
                }
            }
        }
        if per_model.is_empty() {
            return Err(ExperimentError::Validation("no records".into()));
        }
        let mut tax_grid: Vec<f64> = tax_bits.into_iter().map(f64::from_bits).collect();
        tax_grid.sort_by(|a, b| a.partial_cmp(b).expect("finite tax rates"));
        if tax_grid.is_empty() {
            return Err(ExperimentError::Validation(
                "records carry no swept tax rates".into(),
            ));
        }
        let mut shares = Vec::with_capacity(per_model.len());
        let (mut w0, mut y1, mut y2) = (0.0, 0.0, 0.0);
        let mut rate = 0.0;
        let mut beta_period = 0.0;
        for (model_id, record) in &per_model {
            let share = record.agent.population_share;
            shares.push((model_id.clone(), share));
            let params = record.scenario.params();
            w0 += share * params.current_savings;
            y1 += share * params.working_income;
            y2 += share * params.retirement_income;
            rate = params.interest_rate_percent / 100.0;
            beta_period = record.evaluation.beta;
        }
        Ok(Self {
            shares,
            tax_grid,
            reference_env: BudgetEnvironment::two_period(w0, y1, y2, rate, None)?,
            beta_period,
        })
    }
}

/// Aggregate trial records from a tax sweep into population-weighted curves.
///
/// Every group must have at least one valid trial at every tax point; a
/// missing cell is an error rather than a silent renormalization. The
/// reference paths are computed on the share-weighted average environment.
pub fn aggregate_population(
    records: &[TrialRecord],
    context: &SweepContext,
) -> Result<SweepResult, ExperimentError> {
    let share_sum: f64 = context.shares.iter().map(|(_, share)| share).sum();
    if (share_sum - 1.0).abs() > 1e-9 {
        return Err(ExperimentError::Validation(format!(
            "population shares sum to {share_sum}"
        )));
    }
    let tax_grid: Vec<f64> = context.tax_grid.clone();
    if tax_grid.is_empty() {
        return Err(ExperimentError::Validation("empty tax grid".into()));
    }

    // (model_id, tax bits) -> wealth-inclusive and income-only samples.
    let mut cells: BTreeMap<(String, u64), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for record in records {
        let (Some(tax_rate), Some(plan_parsed)) = (record.tax_rate, record.parsed_plan.as_ref())
        else {
            continue;
        };
        if record.parse_status != ParseStatus::Ok {
            continue;
        }
        let env = record.scenario.environment()?;
        let rates = saving_rates(&env, plan_parsed)?;
        let cell = cells
            .entry((record.agent.model_id.clone(), tax_rate.to_bits()))
            .or_default();
        cell.0.push(rates.wealth_inclusive);
        cell.1.push(rates.income_only);
    }

    let mut per_group: BTreeMap<String, Vec<GroupCurvePoint>> = BTreeMap::new();
    for (model_id, _) in &context.shares {
        let mut curve = Vec::with_capacity(tax_grid.len());
        for &tax_rate in &tax_grid {
            let Some((wealth_rates, income_rates)) =
                cells.get(&(model_id.clone(), tax_rate.to_bits()))
            else {
                return Err(ExperimentError::MissingGroupAtTax {
                    model_id: model_id.clone(),
                    tax_rate,
                });
            };
            let mut sorted = wealth_rates.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite rates"));
            let mean_wealth = wealth_rates.iter().sum::<f64>() / wealth_rates.len() as f64;
            let mean_income = income_rates.iter().sum::<f64>() / income_rates.len() as f64;
            let mut sorted_income = income_rates.clone();
            sorted_income.sort_by(|a, b| a.partial_cmp(b).expect("finite rates"));
            curve.push(GroupCurvePoint {
                tax_rate,
                mean: SavingRates {
                    wealth_inclusive: mean_wealth,
                    income_only: mean_income,
                },
                median: SavingRates {
                    wealth_inclusive: percentile(&sorted, 0.5),
                    income_only: percentile(&sorted_income, 0.5),
                },
                min: sorted[0],
                q1: percentile(&sorted, 0.25),
                q3: percentile(&sorted, 0.75),
                max: sorted[sorted.len() - 1],
                n_valid: wealth_rates.len(),
            });
        }
        per_group.insert(model_id.clone(), curve);
    }

    let mut aggregate = Vec::with_capacity(tax_grid.len());
    for (grid_index, &tax_rate) in tax_grid.iter().enumerate() {
        let mut weighted = SavingRates {
            wealth_inclusive: 0.0,
            income_only: 0.0,
        };
        let mut group_min = f64::INFINITY;
        let mut group_max = f64::NEG_INFINITY;
        for (model_id, share) in &context.shares {
            let point = &per_group[model_id][grid_index];
            weighted.wealth_inclusive += share * point.mean.wealth_inclusive;
            weighted.income_only += share * point.mean.income_only;
            group_min = group_min.min(point.mean.wealth_inclusive);
            group_max = group_max.max(point.mean.wealth_inclusive);
        }
        aggregate.push(AggregatePoint {
            tax_rate,
            rate: weighted,
            group_min,
            group_max,
        });
    }

    let reference_sigma_2 = reference_path(
        &Preferences::new(2.0, context.beta_period)?,
        &context.reference_env,
        &tax_grid,
    )?;
    let reference_sigma_05 = reference_path(
        &Preferences::new(0.5, context.beta_period)?,
        &context.reference_env,
        &tax_grid,
    )?;

    Ok(SweepResult {
        per_group,
        aggregate,
        reference_sigma_2,
        reference_sigma_05,
    })
}

/// Population-share-weighted (w0, y1, y2) at the common period rate.
pub fn weighted_environment(plan: &ExperimentPlan) -> Result<BudgetEnvironment, ExperimentError> {
    let mut w0 = 0.0;
    let mut y1 = 0.0;
    let mut y2 = 0.0;
    for agent in &plan.agents {
        let share = agent.profile.population_share;
        w0 += share * agent.calibration.w0;
        y1 += share * agent.calibration.y1;
        y2 += share * agent.calibration.y2;
    }
    let rate = plan.agents[0].calibration.rate_period;
    Ok(BudgetEnvironment::two_period(w0, y1, y2, rate, None)?)
}

/// Metrics for one (agent, scenario, tax rate) cell of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub model_id: String,
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub tax_rate: Option<f64>,
    pub evaluation: TrialSetEvaluation,
    pub parse_failures: usize,
    pub invoke_failures: usize,
    /// Trials (not phrase hits) voicing each motive at least once.
    pub motive_counts: BTreeMap<String, usize>,
}

/// Score a record set cell by cell against each cell's displayed optimum.
pub fn evaluate_records(records: &[TrialRecord]) -> Result<Vec<EvaluationRecord>, ExperimentError> {
    let mut cells: BTreeMap<(String, &'static str, Option<u64>), Vec<&TrialRecord>> =
        BTreeMap::new();
    for record in records {
        cells
            .entry((
                record.agent.model_id.clone(),
                record.scenario.kind().as_str(),
                record.tax_rate.map(f64::to_bits),
            ))
            .or_default()
            .push(record);
    }

    let mut evaluations = Vec::with_capacity(cells.len());
    for ((model_id, _, _), cell) in cells {
        let first = cell[0];
        let scenario = &first.scenario;
        let env = scenario.environment()?;
        let optimum = ConsumptionPlan::two_period(
            first.evaluation.optimum_c1,
            first.evaluation.optimum_c2,
            Provenance::Analytical,
        )?;
        let valid: Vec<ConsumptionPlan> = cell
            .iter()
            .filter(|r| r.parse_status == ParseStatus::Ok)
            .filter_map(|r| r.parsed_plan.clone())
            .collect();
        let parse_failures = cell
            .iter()
            .filter(|r| {
                matches!(
                    r.parse_status,
                    ParseStatus::NoFinalAnswer | ParseStatus::MalformedNumbers
                )
            })
            .count();
        let invoke_failures = cell
            .iter()
            .filter(|r| r.parse_status == ParseStatus::InvokeFailed)
            .count();
        let mut motive_counts: BTreeMap<String, usize> = BTreeMap::new();
        for record in &cell {
            if record.parse_status == ParseStatus::InvokeFailed {
                continue;
            }
            for tag in tag_motives(&record.raw_response) {
                *motive_counts
                    .entry(tag.label.as_str().to_string())
                    .or_default() += 1;
            }
        }
        let evaluation = evaluate_trial_set(&valid, &optimum, &env, cell.len())?;
        evaluations.push(EvaluationRecord {
            model_id,
            scenario: scenario.kind(),
            tax_rate: first.tax_rate,
            evaluation,
            parse_failures,
            invoke_failures,
            motive_counts,
        });
    }
    Ok(evaluations)
}
