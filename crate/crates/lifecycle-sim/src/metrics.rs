//! Deviation metrics over trial sets and the keyword-based motive tagger.
//!
//! All four quantitative metrics compare parsed plans against the analytical
//! optimum of the problem the agent was shown. Parse failures never enter a
//! metric denominator; they are counted separately.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lifecycle::{budget_residual, BudgetEnvironment, ConsumptionPlan, LifecycleError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no valid trials; the metric is undefined")]
    NoValidTrials,
    #[error("variance needs at least two valid trials, got {0}")]
    InsufficientSample(usize),
    #[error("optimum consumptions must be strictly positive")]
    NonPositiveOptimum,
    #[error("tolerance must be non-negative, got {0}")]
    NegativeTolerance(f64),
    #[error("trial plans must be two-period, got {0} entries")]
    NotTwoPeriod(usize),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
}

/// Accuracy counting convention.
///
/// `PerTrialJoint` counts a trial as accurate only when both coordinates are
/// within tolerance. `PerCoordinate` counts each coordinate separately with
/// twice the denominator; kept because one published accuracy figure implies
/// a per-coordinate denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyMode {
    PerTrialJoint,
    PerCoordinate,
}

/// Per-trial absolute percentage deviation, as a fraction:
/// (|c1-c1*|/c1* + |c2-c2*|/c2*)/2.
pub fn apd(plan: &ConsumptionPlan, optimum: &ConsumptionPlan) -> Result<f64, MetricsError> {
    let (c1, c2) = two_period(plan)?;
    let (o1, o2) = two_period(optimum)?;
    if o1 <= 0.0 || o2 <= 0.0 {
        return Err(MetricsError::NonPositiveOptimum);
    }
    Ok(0.5 * ((c1 - o1).abs() / o1 + (c2 - o2).abs() / o2))
}

fn two_period(plan: &ConsumptionPlan) -> Result<(f64, f64), MetricsError> {
    plan.pair().ok_or(MetricsError::NotTwoPeriod(plan.len()))
}

/// Fraction of valid trials within `tolerance` of the optimum.
pub fn accuracy(
    trials: &[ConsumptionPlan],
    optimum: &ConsumptionPlan,
    tolerance: f64,
    mode: AccuracyMode,
) -> Result<f64, MetricsError> {
    if tolerance < 0.0 {
        return Err(MetricsError::NegativeTolerance(tolerance));
    }
    if trials.is_empty() {
        return Err(MetricsError::NoValidTrials);
    }
    let (o1, o2) = two_period(optimum)?;
    if o1 <= 0.0 || o2 <= 0.0 {
        return Err(MetricsError::NonPositiveOptimum);
    }
    let mut hits = 0usize;
    for trial in trials {
        let (c1, c2) = two_period(trial)?;
        let d1 = (c1 - o1).abs() / o1;
        let d2 = (c2 - o2).abs() / o2;
        match mode {
            AccuracyMode::PerTrialJoint => {
                if d1.max(d2) <= tolerance {
                    hits += 1;
                }
            }
            AccuracyMode::PerCoordinate => {
                hits += usize::from(d1 <= tolerance) + usize::from(d2 <= tolerance);
            }
        }
    }
    let denominator = match mode {
        AccuracyMode::PerTrialJoint => trials.len(),
        AccuracyMode::PerCoordinate => 2 * trials.len(),
    };
    Ok(hits as f64 / denominator as f64)
}

/// Mean absolute percentage deviation over valid trials, as a fraction.
pub fn mapd(trials: &[ConsumptionPlan], optimum: &ConsumptionPlan) -> Result<f64, MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::NoValidTrials);
    }
    let mut total = 0.0;
    for trial in trials {
        total += apd(trial, optimum)?;
    }
    Ok(total / trials.len() as f64)
}

/// Sample variance (n-1 denominator) of per-trial APD expressed in
/// percentage points, so the units are percentage-points squared.
///
/// Presentation-layer scaling (the x10^4 table column) is applied at render
/// time, never here.
pub fn var_apd(trials: &[ConsumptionPlan], optimum: &ConsumptionPlan) -> Result<f64, MetricsError> {
    if trials.len() < 2 {
        return Err(MetricsError::InsufficientSample(trials.len()));
    }
    let deviations: Vec<f64> = trials
        .iter()
        .map(|t| apd(t, optimum).map(|d| d * 100.0))
        .collect::<Result<_, _>>()?;
    let mean = deviations.iter().sum::<f64>() / deviations.len() as f64;
    let squared: f64 = deviations.iter().map(|d| (d - mean).powi(2)).sum();
    Ok(squared / (deviations.len() - 1) as f64)
}

/// Mean absolute budget residual over valid trials, as a fraction. Over- and
/// under-consumption do not cancel.
pub fn budget_mapd(
    trials: &[ConsumptionPlan],
    env: &BudgetEnvironment,
) -> Result<f64, MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::NoValidTrials);
    }
    let mut total = 0.0;
    for trial in trials {
        total += budget_residual(env, trial)?.abs();
    }
    Ok(total / trials.len() as f64)
}

/// The four headline metrics for one (agent, scenario, tax rate) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSetEvaluation {
    /// Fraction of valid trials within 5% of the optimum (joint convention).
    pub accuracy_5pct: f64,
    /// Mean absolute percentage deviation, fraction.
    pub mapd: f64,
    /// Sample variance of APD in percentage points squared. Equals the
    /// fraction-units variance scaled by 10^4, which is one of the two
    /// plausible readings of the published table column.
    pub var_apd: f64,
    /// The other reading: percent-units variance scaled by 10^4.
    pub var_apd_pct_x1e4: f64,
    /// Mean absolute budget deviation, fraction.
    pub budget_mapd: f64,
    pub n_valid: usize,
    pub n_total: usize,
}

/// Default tolerance for the accuracy metric.
pub const ACCURACY_TOLERANCE: f64 = 0.05;

/// Evaluate a trial set in one pass. `n_total` includes failed trials the
/// caller excluded from `trials`.
pub fn evaluate_trial_set(
    trials: &[ConsumptionPlan],
    optimum: &ConsumptionPlan,
    env: &BudgetEnvironment,
    n_total: usize,
) -> Result<TrialSetEvaluation, MetricsError> {
    let var = var_apd(trials, optimum)?;
    Ok(TrialSetEvaluation {
        accuracy_5pct: accuracy(trials, optimum, ACCURACY_TOLERANCE, AccuracyMode::PerTrialJoint)?,
        mapd: mapd(trials, optimum)?,
        var_apd: var,
        var_apd_pct_x1e4: var * 1e4,
        budget_mapd: budget_mapd(trials, env)?,
        n_valid: trials.len(),
        n_total,
    })
}

/// Economic motive labels recognised by the tagger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotiveLabel {
    ConsumptionSmoothing,
    IntertemporalSubstitution,
    PrecautionarySaving,
    HigherMarginalUtilityOfConsumption,
    DecreasedMarginalPropensityToConsume,
    LifeCycleSpendingShifts,
    LifeCyclePeakConsumption,
    RiskAversion,
    HedonicConsumption,
    Inflation,
    InterestRateRisk,
    BequestMotive,
    ParentalAltruism,
    DynasticUtilityOptimization,
    PresentBias,
}

impl MotiveLabel {
    pub const ALL: [MotiveLabel; 15] = [
        MotiveLabel::ConsumptionSmoothing,
        MotiveLabel::IntertemporalSubstitution,
        MotiveLabel::PrecautionarySaving,
        MotiveLabel::HigherMarginalUtilityOfConsumption,
        MotiveLabel::DecreasedMarginalPropensityToConsume,
        MotiveLabel::LifeCycleSpendingShifts,
        MotiveLabel::LifeCyclePeakConsumption,
        MotiveLabel::RiskAversion,
        MotiveLabel::HedonicConsumption,
        MotiveLabel::Inflation,
        MotiveLabel::InterestRateRisk,
        MotiveLabel::BequestMotive,
        MotiveLabel::ParentalAltruism,
        MotiveLabel::DynasticUtilityOptimization,
        MotiveLabel::PresentBias,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MotiveLabel::ConsumptionSmoothing => "consumption smoothing",
            MotiveLabel::IntertemporalSubstitution => "intertemporal substitution",
            MotiveLabel::PrecautionarySaving => "precautionary saving",
            MotiveLabel::HigherMarginalUtilityOfConsumption => {
                "higher marginal utility of consumption"
            }
            MotiveLabel::DecreasedMarginalPropensityToConsume => {
                "decreased marginal propensity to consume"
            }
            MotiveLabel::LifeCycleSpendingShifts => "life-cycle spending shifts",
            MotiveLabel::LifeCyclePeakConsumption => "life-cycle peak consumption",
            MotiveLabel::RiskAversion => "risk aversion",
            MotiveLabel::HedonicConsumption => "hedonic consumption",
            MotiveLabel::Inflation => "inflation",
            MotiveLabel::InterestRateRisk => "interest rate risk",
            MotiveLabel::BequestMotive => "bequest motive",
            MotiveLabel::ParentalAltruism => "parental altruism",
            MotiveLabel::DynasticUtilityOptimization => "dynastic utility optimization",
            MotiveLabel::PresentBias => "present bias",
        }
    }
}

/// Curated phrase bank. Matching is case-insensitive substring search, so
/// phrases are kept specific enough not to cross-trigger.
pub const MOTIVE_PHRASES: &[(MotiveLabel, &[&str])] = &[
    (
        MotiveLabel::ConsumptionSmoothing,
        &[
            "balance between both periods",
            "balance consumption",
            "balance my consumption",
            "balanced consumption",
            "consumption smoothing",
            "smooth consumption",
            "smooth my consumption",
            "similar standard of living in both periods",
        ],
    ),
    (
        MotiveLabel::IntertemporalSubstitution,
        &[
            "take advantage of high interest",
            "take advantage of the high interest",
            "high interest rate",
            "attractive interest",
            "intertemporal substitution",
            "generous return on savings",
        ],
    ),
    (
        MotiveLabel::PrecautionarySaving,
        &[
            "buffer during retirement",
            "buffer for retirement",
            "health issues in retirement",
            "unexpected expenses",
            "precautionary",
            "rainy day",
            "未雨绸缪",
            "uncertainties",
            "safety net",
            "emergencies",
        ],
    ),
    (
        MotiveLabel::HigherMarginalUtilityOfConsumption,
        &[
            "active lifestyle during working",
            "active lifestyle during my working",
            "enjoy more while working",
            "higher marginal utility",
        ],
    ),
    (
        MotiveLabel::DecreasedMarginalPropensityToConsume,
        &[
            "lower needs in retirement",
            "need less in retirement",
            "needs will be lower in retirement",
            "decreased marginal propensity",
        ],
    ),
    (
        MotiveLabel::LifeCycleSpendingShifts,
        &[
            "rising living costs in retirement",
            "living costs will rise in retirement",
            "costs rise in retirement",
            "spending shifts over the life cycle",
        ],
    ),
    (
        MotiveLabel::LifeCyclePeakConsumption,
        &[
            "peak consumption needs in working",
            "peak consumption years",
            "peak spending years",
        ],
    ),
    (
        MotiveLabel::RiskAversion,
        &[
            "chinese culture",
            "emphasize saving",
            "save against future income risks",
            "risk averse",
            "risk aversion",
            "prudent to be cautious",
        ],
    ),
    (
        MotiveLabel::HedonicConsumption,
        &[
            "work hard, deserve",
            "deserve to consume",
            "deserve to enjoy",
            "reward myself",
        ],
    ),
    (
        MotiveLabel::Inflation,
        &[
            "prices will go up",
            "prices will rise",
            "inflation",
            "cost of living will increase",
        ],
    ),
    (
        MotiveLabel::InterestRateRisk,
        &[
            "interest rates might change",
            "interest rate might change",
            "could be a scam",
            "rate may not last",
        ],
    ),
    (
        MotiveLabel::BequestMotive,
        &[
            "future generations",
            "leave something behind",
            "inheritance",
            "bequest",
        ],
    ),
    (
        MotiveLabel::ParentalAltruism,
        &[
            "burden on children",
            "burden on my children",
            "burden to my children",
        ],
    ),
    (
        MotiveLabel::DynasticUtilityOptimization,
        &[
            "help children in the future",
            "help my children in the future",
            "support my children later",
        ],
    ),
    (
        MotiveLabel::PresentBias,
        &[
            "life is short",
            "don't know what the future holds",
            "live in the present",
        ],
    ),
];

/// One tagged motive with the phrases that triggered it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotiveTag {
    pub label: MotiveLabel,
    pub matched_phrases: Vec<String>,
}

/// Tag the economic motives voiced in a response. Deterministic, idempotent,
/// and happy to return an empty list.
pub fn tag_motives(raw_response: &str) -> Vec<MotiveTag> {
    let haystack = raw_response.to_lowercase();
    let mut tags = Vec::new();
    for (label, phrases) in MOTIVE_PHRASES {
        let matched: Vec<String> = phrases
            .iter()
            .filter(|phrase| haystack.contains(&phrase.to_lowercase()))
            .map(|phrase| phrase.to_string())
            .collect();
        if !matched.is_empty() {
            tags.push(MotiveTag {
                label: *label,
                matched_phrases: matched,
            });
        }
    }
    tags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifecycle::{solve_two_period, Preferences, Provenance};

    fn aggregate_env() -> BudgetEnvironment {
        BudgetEnvironment::two_period(141_598.4, 958_189.8, 244_103.9, 0.486, None).unwrap()
    }

    fn optimum() -> ConsumptionPlan {
        let prefs = Preferences::new(2.0, 0.818).unwrap();
        solve_two_period(&prefs, &aggregate_env()).unwrap()
    }

    fn plan(c1: f64, c2: f64) -> ConsumptionPlan {
        ConsumptionPlan::two_period(c1, c2, Provenance::AgentParsed).unwrap()
    }

    #[test]
    fn accuracy_counts_joint_deviations() {
        let opt = optimum();
        let (o1, o2) = opt.pair().unwrap();
        let all_exact = vec![opt.clone(); 16];
        assert_eq!(
            accuracy(&all_exact, &opt, 0.05, AccuracyMode::PerTrialJoint).unwrap(),
            1.0
        );

        // One trial 6% off on c1, fifteen exact: 15/16.
        let mut trials = vec![opt.clone(); 15];
        trials.push(plan(1.06 * o1, o2));
        let joint = accuracy(&trials, &opt, 0.05, AccuracyMode::PerTrialJoint).unwrap();
        assert!((joint - 15.0 / 16.0).abs() < 1e-15);

        // Per-coordinate: 31 of 32 coordinates hit.
        let per_coord = accuracy(&trials, &opt, 0.05, AccuracyMode::PerCoordinate).unwrap();
        assert!((per_coord - 31.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn accuracy_is_monotone_in_tolerance() {
        let opt = optimum();
        let (o1, o2) = opt.pair().unwrap();
        let trials = vec![
            plan(1.01 * o1, o2),
            plan(1.04 * o1, 0.97 * o2),
            plan(1.20 * o1, o2),
        ];
        let mut previous = 0.0;
        for tolerance in [0.0, 0.01, 0.03, 0.05, 0.25] {
            let value = accuracy(&trials, &opt, tolerance, AccuracyMode::PerTrialJoint).unwrap();
            assert!(value >= previous);
            previous = value;
        }
    }

    #[test]
    fn mapd_matches_hand_values() {
        let opt = optimum();
        let (o1, o2) = opt.pair().unwrap();
        assert_eq!(mapd(&vec![opt.clone(); 4], &opt).unwrap(), 0.0);

        let single = vec![plan(1.10 * o1, 0.90 * o2)];
        let value = mapd(&single, &opt).unwrap();
        assert!((value - 0.10).abs() < 1e-12, "mapd = {value}");

        // Scale invariance: scale trials and optimum by the same factor.
        let scaled_opt = plan(2.0 * o1, 2.0 * o2);
        let scaled = vec![plan(2.2 * o1, 1.8 * o2)];
        let scaled_value = mapd(&scaled, &scaled_opt).unwrap();
        assert!((scaled_value - value).abs() < 1e-12);
    }

    #[test]
    fn var_apd_matches_hand_values() {
        let opt = optimum();
        let (o1, o2) = opt.pair().unwrap();
        assert_eq!(var_apd(&vec![opt.clone(); 3], &opt).unwrap(), 0.0);

        // APDs of 0% and 2% in percentage points: sample variance 2.
        let trials = vec![opt.clone(), plan(1.02 * o1, 1.02 * o2)];
        let value = var_apd(&trials, &opt).unwrap();
        assert!((value - 2.0).abs() < 1e-9, "var = {value}");

        // Doubling every deviation quadruples the variance.
        let doubled = vec![opt.clone(), plan(1.04 * o1, 1.04 * o2)];
        let value4 = var_apd(&doubled, &opt).unwrap();
        assert!((value4 - 8.0).abs() < 1e-9, "var = {value4}");

        assert!(matches!(
            var_apd(&trials[..1], &opt),
            Err(MetricsError::InsufficientSample(1))
        ));
    }

    #[test]
    fn budget_mapd_uses_absolute_values() {
        let env = aggregate_env();
        let opt = optimum();
        let (o1, o2) = opt.pair().unwrap();
        assert!(budget_mapd(&vec![opt.clone(); 2], &env).unwrap() < 1e-12);

        // 0.9x the exhausting plan leaves a 10% gap.
        let under = vec![plan(0.9 * o1, 0.9 * o2)];
        let value = budget_mapd(&under, &env).unwrap();
        assert!((value - 0.10).abs() < 1e-12);

        // +5% and -5% do not cancel.
        let mixed = vec![plan(1.05 * o1, 1.05 * o2), plan(0.95 * o1, 0.95 * o2)];
        let value = budget_mapd(&mixed, &env).unwrap();
        assert!((value - 0.05).abs() < 1e-12);
    }

    #[test]
    fn empty_trial_sets_are_rejected() {
        let opt = optimum();
        let env = aggregate_env();
        let empty: Vec<ConsumptionPlan> = Vec::new();
        assert!(matches!(
            accuracy(&empty, &opt, 0.05, AccuracyMode::PerTrialJoint),
            Err(MetricsError::NoValidTrials)
        ));
        assert!(matches!(mapd(&empty, &opt), Err(MetricsError::NoValidTrials)));
        assert!(matches!(
            budget_mapd(&empty, &env),
            Err(MetricsError::NoValidTrials)
        ));
    }

    #[test]
    fn evaluation_bundle_is_consistent() {
        let env = aggregate_env();
        let opt = optimum();
        let (o1, o2) = opt.pair().unwrap();
        let trials = vec![opt.clone(), plan(1.02 * o1, 1.02 * o2), plan(1.10 * o1, 0.90 * o2)];
        let eval = evaluate_trial_set(&trials, &opt, &env, 4).unwrap();
        assert_eq!(eval.n_valid, 3);
        assert_eq!(eval.n_total, 4);
        assert!((eval.var_apd_pct_x1e4 - eval.var_apd * 1e4).abs() < 1e-9);
        assert!((eval.accuracy_5pct - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn motive_tagger_matches_table_phrases() {
        let tags = tag_motives("I want to balance consumption between both periods.");
        assert_eq!(tags.len(), 1);
        assert_eq!(tags[0].label, MotiveLabel::ConsumptionSmoothing);
        assert!(!tags[0].matched_phrases.is_empty());

        assert!(tag_motives("").is_empty());

        let tags =
            tag_motives("high interest rates make saving attractive, and prices will go up");
        let labels: Vec<MotiveLabel> = tags.iter().map(|t| t.label).collect();
        assert_eq!(
            labels,
            vec![MotiveLabel::IntertemporalSubstitution, MotiveLabel::Inflation]
        );
    }

    #[test]
    fn motive_tagger_is_idempotent_and_case_insensitive() {
        let text = "Prepare for RAINY DAY, 未雨绸缪; I am risk averse.";
        let first = tag_motives(text);
        let second = tag_motives(text);
        assert_eq!(first, second);
        let labels: Vec<MotiveLabel> = first.iter().map(|t| t.label).collect();
        assert!(labels.contains(&MotiveLabel::PrecautionarySaving));
        assert!(labels.contains(&MotiveLabel::RiskAversion));
    }

    #[test]
    fn motive_tagger_dedupes_within_a_label() {
        let text = "I will smooth consumption; consumption smoothing matters.";
        let tags = tag_motives(text);
        let smoothing: Vec<&MotiveTag> = tags
            .iter()
            .filter(|t| t.label == MotiveLabel::ConsumptionSmoothing)
            .collect();
        assert_eq!(smoothing.len(), 1);
        assert!(smoothing[0].matched_phrases.len() >= 2);
    }
}
