//! Deterministic offline personas.
//!
//! A persona stands in for a live model during offline runs and testing.
//! Its statistical profile (noise around the optimum, systematic
//! under-consumption, leftover budget slack) is configurable per model so a
//! panel can be shaped to published deviation levels, and every draw comes
//! from a per-trial seed, which makes whole runs bit-reproducible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::prompt::{format_units, PromptScenario};
use super::{AgentError, AgentProfile, PersonaParams};
use crate::lifecycle::{BudgetEnvironment, ConsumptionPlan, Preferences};

/// A motive sentence with its sampling frequency out of 16 trials.
#[derive(Debug, Clone, Copy)]
pub struct MotiveRow {
    pub sentence: &'static str,
    pub frequency_per_16: u32,
}

const SMOOTHING_SENTENCE: &str =
    "I want to keep a balance between both periods of my life";

const DEEPSEEK_MOTIVES: &[MotiveRow] = &[
    MotiveRow { sentence: "I will save to take advantage of high interest rates.", frequency_per_16: 7 },
    MotiveRow { sentence: "I would like a buffer during retirement.", frequency_per_16: 2 },
    MotiveRow { sentence: "I expect an active lifestyle during working years.", frequency_per_16: 1 },
];

const GPT4O_MOTIVES: &[MotiveRow] = &[
    MotiveRow { sentence: "I will save to take advantage of high interest rates.", frequency_per_16: 9 },
    MotiveRow { sentence: "There are uncertainties like health issues in retirement.", frequency_per_16: 4 },
    MotiveRow { sentence: "I anticipate lower needs in retirement.", frequency_per_16: 3 },
    MotiveRow { sentence: "I worry about rising living costs in retirement.", frequency_per_16: 2 },
    MotiveRow { sentence: "These are my peak consumption needs in working years.", frequency_per_16: 2 },
    MotiveRow { sentence: "I save against future income risks.", frequency_per_16: 1 },
];

const GEMINI_MOTIVES: &[MotiveRow] = &[
    MotiveRow { sentence: "Prices will go up over time.", frequency_per_16: 8 },
    MotiveRow { sentence: "I will save to take advantage of high interest rates.", frequency_per_16: 5 },
    MotiveRow { sentence: "Chinese culture taught me to emphasize saving.", frequency_per_16: 4 },
    MotiveRow { sentence: "I work hard, deserve to consume well while working.", frequency_per_16: 4 },
    MotiveRow { sentence: "Interest rates might change, this could be a scam.", frequency_per_16: 3 },
    MotiveRow { sentence: "I worry about rising living costs in retirement.", frequency_per_16: 2 },
    MotiveRow { sentence: "I expect an active lifestyle during working years.", frequency_per_16: 2 },
    MotiveRow { sentence: "There are uncertainties like health issues in retirement.", frequency_per_16: 2 },
    MotiveRow { sentence: "I want to leave something for future generations.", frequency_per_16: 2 },
    MotiveRow { sentence: "I anticipate lower needs in retirement.", frequency_per_16: 1 },
    MotiveRow { sentence: "I do not want to be a burden on my children.", frequency_per_16: 1 },
];

const CLAUDE_MOTIVES: &[MotiveRow] = &[
    MotiveRow { sentence: "Chinese culture taught me to emphasize saving, 未雨绸缪.", frequency_per_16: 13 },
    MotiveRow { sentence: "I will save to take advantage of high interest rates.", frequency_per_16: 12 },
    MotiveRow { sentence: "I worry about rising living costs in retirement.", frequency_per_16: 10 },
    MotiveRow { sentence: "These are my peak consumption needs in working years.", frequency_per_16: 7 },
    MotiveRow { sentence: "I expect an active lifestyle during working years.", frequency_per_16: 5 },
    MotiveRow { sentence: "There are uncertainties like health issues in retirement.", frequency_per_16: 4 },
    MotiveRow { sentence: "I anticipate lower needs in retirement.", frequency_per_16: 3 },
    MotiveRow { sentence: "I do not want to be a burden on my children.", frequency_per_16: 3 },
    MotiveRow { sentence: "I hope to help children in the future.", frequency_per_16: 1 },
];

const LLAMA_MOTIVES: &[MotiveRow] = &[
    MotiveRow { sentence: "I will save to take advantage of high interest rates.", frequency_per_16: 9 },
    MotiveRow { sentence: "I anticipate lower needs in retirement.", frequency_per_16: 3 },
    MotiveRow { sentence: "I work hard, deserve to consume well while working.", frequency_per_16: 2 },
    MotiveRow { sentence: "I worry about rising living costs in retirement.", frequency_per_16: 1 },
    MotiveRow { sentence: "Life is short, and I don't know what the future holds.", frequency_per_16: 1 },
];

const GENERIC_MOTIVES: &[MotiveRow] = &[
    MotiveRow { sentence: "I will save to take advantage of high interest rates.", frequency_per_16: 8 },
    MotiveRow { sentence: "There are uncertainties like health issues in retirement.", frequency_per_16: 3 },
];

/// Motive rows for a model id, falling back to a generic bank.
pub fn motive_rows(model_id: &str) -> &'static [MotiveRow] {
    let id = model_id.to_lowercase();
    if id.contains("deepseek") {
        DEEPSEEK_MOTIVES
    } else if id.contains("gpt") {
        GPT4O_MOTIVES
    } else if id.contains("gemini") {
        GEMINI_MOTIVES
    } else if id.contains("claude") {
        CLAUDE_MOTIVES
    } else if id.contains("llama") {
        LLAMA_MOTIVES
    } else {
        GENERIC_MOTIVES
    }
}

impl PersonaParams {
    /// Noise level that makes a zero-bias, zero-slack persona hit a target
    /// mean absolute percentage deviation on the given problem.
    ///
    /// With c2 set to exhaust the budget, a relative c1 error of d costs
    /// APD = |d|(1 + kappa)/2 where kappa = c1*/(W - c1*), and the half
    /// normal mean gives E|d| = sd*sqrt(2/pi).
    pub fn for_mapd_target(
        target_mapd: f64,
        prefs: &Preferences,
        env: &BudgetEnvironment,
    ) -> Result<Self, AgentError> {
        let optimum = crate::lifecycle::solve_two_period(prefs, env)?;
        let (c1, _) = optimum.pair().expect("two-period solve");
        let wealth = env.lifetime_wealth();
        let kappa = c1 / (wealth - c1);
        let half_normal_mean = (2.0 / std::f64::consts::PI).sqrt();
        let noise_sd = 2.0 * target_mapd / ((1.0 + kappa) * half_normal_mean);
        Ok(Self {
            bias_c1: 0.0,
            noise_sd,
            underconsumption_bias: 0.0,
            seed: 0,
        })
    }
}

/// Generate a synthetic response for one trial.
///
/// Draw order is fixed (c1 noise, budget slack, motive coin flips) so a
/// given seed always produces the same transcript. The text always ends in
/// the exact final-answer sentence the parser expects, and always voices the
/// consumption-smoothing motive.
pub fn persona_generate(
    agent: &AgentProfile,
    scenario: &PromptScenario,
    optimum: &ConsumptionPlan,
) -> Result<String, AgentError> {
    let params = agent.persona_params()?;
    let env = scenario.environment()?;
    let wealth = env.lifetime_wealth();
    let rate = env.effective_rate();
    let (optimal_c1, _) = optimum
        .pair()
        .ok_or_else(|| AgentError::ScenarioInvariant("optimum must be two-period".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = Normal::new(0.0, params.noise_sd.max(0.0))
        .map_err(|e| AgentError::ScenarioInvariant(format!("bad persona noise: {e}")))?;
    let shock: f64 = noise.sample(&mut rng);
    let drift = params.bias_c1 - params.underconsumption_bias + shock;
    let c1 = (optimal_c1 * (1.0 + drift)).clamp(optimal_c1 * 1e-6, wealth * (1.0 - 1e-9));

    // Leftover slack as a fraction of lifetime wealth; exactly the budget
    // deviation the evaluator will see.
    let slack = params.underconsumption_bias * rng.random::<f64>();
    let c2 = ((wealth * (1.0 - slack) - c1) * (1.0 + rate)).max(0.0);

    let mut motives = vec![format!("{SMOOTHING_SENTENCE}.")];
    for row in motive_rows(&agent.model_id) {
        if rng.random::<f64>() < f64::from(row.frequency_per_16) / 16.0 {
            motives.push(row.sentence.to_string());
        }
    }

    let body = motives.join(" ");
    Ok(format!(
        "As a middle-age working adult in urban China, I have thought about how to divide my \
         lifetime resources between my working years and retirement. {body}\n\n\
         Final Answer: I will choose to consume {c1_text} units during my working period and \
         {c2_text} units during my retirement period because {reason}.",
        c1_text = format_units(c1),
        c2_text = format_units(c2),
        reason = "I want to keep a balance between both periods while using the interest on my savings"
    ))
}
