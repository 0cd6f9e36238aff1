//! Uniform agent abstraction over live chat-completion providers and
//! deterministic offline personas.
//!
//! A trial is one prompt/response round-trip: render the scenario, invoke
//! the backend with a fresh context, parse the "Final Answer" into a
//! consumption plan, and keep the raw transcript verbatim.

pub mod parse;
pub mod persona;
pub mod prompt;
pub mod provider;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::lifecycle::{ConsumptionPlan, LifecycleError};
pub use parse::{parse_final_answer, ParseFailure};
pub use prompt::{render_prompt, PromptScenario, ScenarioKind, ScenarioParams};
pub use provider::{AuthScheme, ProviderConfig, WireShape};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("provider {provider}: credentials missing, set ${env_var}")]
    MissingCredentials { provider: String, env_var: String },
    #[error("provider {provider}: authentication rejected (HTTP {status})")]
    AuthFailed { provider: String, status: u16 },
    #[error("provider {provider}: HTTP {status} after {attempts} attempt(s)")]
    ProviderHttp {
        provider: String,
        status: u16,
        attempts: u32,
    },
    #[error("provider {provider}: transport failure after {attempts} attempt(s): {detail}")]
    Transport {
        provider: String,
        detail: String,
        attempts: u32,
    },
    #[error("provider {provider}: response did not contain the expected text field: {detail}")]
    MalformedProviderResponse { provider: String, detail: String },
    #[error("agent {0} references a provider that is not configured")]
    UnknownProvider(String),
    #[error("agent {model_id}: temperature {temperature} outside provider range [{low}, {high}]")]
    TemperatureOutOfRange {
        model_id: String,
        temperature: f64,
        low: f64,
        high: f64,
    },
    #[error("agent {0} runs as a persona but has no persona parameters")]
    PersonaParamsMissing(String),
    #[error("prompt template placeholder {{{0}}} was not substituted")]
    MissingParameter(String),
    #[error("scenario invariant violated: {0}")]
    ScenarioInvariant(String),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
}

/// Which machinery answers the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    LiveProvider,
    Persona,
}

/// The five education strata of the simulated population, highest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EducationGroup {
    College4YrPlus,
    College3Yr,
    SeniorHigh,
    JuniorHigh,
    Primary,
}

impl EducationGroup {
    pub const ALL: [EducationGroup; 5] = [
        EducationGroup::College4YrPlus,
        EducationGroup::College3Yr,
        EducationGroup::SeniorHigh,
        EducationGroup::JuniorHigh,
        EducationGroup::Primary,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EducationGroup::College4YrPlus => "college_4yr_plus",
            EducationGroup::College3Yr => "college_3yr",
            EducationGroup::SeniorHigh => "senior_high",
            EducationGroup::JuniorHigh => "junior_high",
            EducationGroup::Primary => "primary",
        }
    }
}

/// Offline persona parameters.
///
/// A persona draws its working-period consumption around the analytical
/// optimum, `c1 = c1*(1 + bias_c1 - underconsumption_bias + eps)` with
/// `eps ~ Normal(0, noise_sd)`, then spends the remaining budget minus a
/// drawn under-consumption slack. All draws come from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonaParams {
    #[serde(default)]
    pub bias_c1: f64,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub underconsumption_bias: f64,
    #[serde(default)]
    pub seed: u64,
}

/// One simulated decision maker: a model identity bound to an education
/// group with a population share, answering either live or as a persona.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub model_id: String,
    pub backend: BackendKind,
    /// Provider name for live backends; resolved against the gateway.
    #[serde(default)]
    pub provider: Option<String>,
    pub temperature: f64,
    pub education_group: EducationGroup,
    pub population_share: f64,
    #[serde(default)]
    pub persona: Option<PersonaParams>,
}

impl AgentProfile {
    pub fn persona_params(&self) -> Result<&PersonaParams, AgentError> {
        self.persona
            .as_ref()
            .ok_or_else(|| AgentError::PersonaParamsMissing(self.model_id.clone()))
    }

    /// Copy of this profile with the per-trial seed substituted in.
    pub fn with_trial_seed(&self, seed: u64) -> Self {
        let mut agent = self.clone();
        if let Some(persona) = agent.persona.as_mut() {
            persona.seed = seed;
        }
        agent
    }
}

/// Outcome of a parse attempt over a raw response, plus the failed-invoke
/// state so no trial is ever silently dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    NoFinalAnswer,
    MalformedNumbers,
    InvokeFailed,
}

/// Problem parameters the trial is scored against: the displayed scenario
/// values plus the preference parameters and the cached analytical optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationContext {
    pub sigma: f64,
    pub beta: f64,
    pub optimum_c1: f64,
    pub optimum_c2: f64,
}

/// Transport bookkeeping for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestMetadata {
    pub provider: String,
    pub latency_ms: u64,
    pub attempts: u32,
}

/// One prompt/response round-trip with full provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u32,
    /// Tax rate swept for this trial, as a fraction; zero-tax scenarios omit it.
    #[serde(default)]
    pub tax_rate: Option<f64>,
    pub agent: AgentProfile,
    pub scenario: PromptScenario,
    pub raw_response: String,
    pub parsed_plan: Option<ConsumptionPlan>,
    pub parse_status: ParseStatus,
    #[serde(default)]
    pub invoke_error: Option<String>,
    pub evaluation: EvaluationContext,
    pub timestamp: DateTime<Utc>,
    pub request_metadata: RequestMetadata,
}

impl TrialRecord {
    /// Canonical identity of the record with volatile transport metadata
    /// (timestamp, latency, attempt count) stripped; two runs with the same
    /// seed must produce identical fingerprints.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Stable<'a> {
            trial_index: u32,
            tax_rate: Option<f64>,
            agent: &'a AgentProfile,
            scenario: &'a PromptScenario,
            raw_response: &'a str,
            parsed_plan: &'a Option<ConsumptionPlan>,
            parse_status: ParseStatus,
            invoke_error: &'a Option<String>,
            evaluation: &'a EvaluationContext,
            provider: &'a str,
        }
        serde_json::to_string(&Stable {
            trial_index: self.trial_index,
            tax_rate: self.tax_rate,
            agent: &self.agent,
            scenario: &self.scenario,
            raw_response: &self.raw_response,
            parsed_plan: &self.parsed_plan,
            parse_status: self.parse_status,
            invoke_error: &self.invoke_error,
            evaluation: &self.evaluation,
            provider: &self.request_metadata.provider,
        })
        .expect("record serialization cannot fail")
    }
}

/// What one invocation produced before parsing.
#[derive(Debug, Clone)]
pub struct InvokeOutcome {
    pub raw_response: String,
    pub metadata: RequestMetadata,
}

/// Everything the gateway needs to execute one trial.
#[derive(Debug, Clone)]
pub struct TrialRequest<'a> {
    pub prompt: &'a str,
    pub scenario: &'a PromptScenario,
    pub optimum: &'a ConsumptionPlan,
}

/// Dispatches invocations to live providers or the persona generator.
///
/// Stateless between calls: every live request is a fresh single-turn
/// conversation, and persona output depends only on (params, scenario,
/// optimum), so trials never leak state into each other.
#[derive(Debug, Clone, Default)]
pub struct Gateway {
    providers: BTreeMap<String, ProviderConfig>,
}

impl Gateway {
    pub fn new(providers: impl IntoIterator<Item = ProviderConfig>) -> Self {
        Self {
            providers: providers
                .into_iter()
                .map(|config| (config.name.clone(), config))
                .collect(),
        }
    }

    pub fn provider(&self, name: &str) -> Option<&ProviderConfig> {
        self.providers.get(name)
    }

    /// Check an agent's backend wiring and temperature bounds.
    pub fn validate_agent(&self, agent: &AgentProfile) -> Result<(), AgentError> {
        match agent.backend {
            BackendKind::Persona => {
                agent.persona_params()?;
            }
            BackendKind::LiveProvider => {
                let name = agent
                    .provider
                    .as_deref()
                    .ok_or_else(|| AgentError::UnknownProvider(agent.model_id.clone()))?;
                let config = self
                    .providers
                    .get(name)
                    .ok_or_else(|| AgentError::UnknownProvider(agent.model_id.clone()))?;
                let (low, high) = config.temperature_range;
                if !(low..=high).contains(&agent.temperature) {
                    return Err(AgentError::TemperatureOutOfRange {
                        model_id: agent.model_id.clone(),
                        temperature: agent.temperature,
                        low,
                        high,
                    });
                }
            }
        }
        Ok(())
    }

    /// Run one trial against the agent's backend. Live requests carry no
    /// conversational state; personas are pure functions of their seed.
    pub fn invoke(
        &self,
        agent: &AgentProfile,
        request: &TrialRequest<'_>,
    ) -> Result<InvokeOutcome, AgentError> {
        match agent.backend {
            BackendKind::Persona => {
                let raw_response =
                    persona::persona_generate(agent, request.scenario, request.optimum)?;
                Ok(InvokeOutcome {
                    raw_response,
                    metadata: RequestMetadata {
                        provider: "persona".to_string(),
                        latency_ms: 0,
                        attempts: 1,
                    },
                })
            }
            BackendKind::LiveProvider => {
                let name = agent
                    .provider
                    .as_deref()
                    .ok_or_else(|| AgentError::UnknownProvider(agent.model_id.clone()))?;
                let config = self
                    .providers
                    .get(name)
                    .ok_or_else(|| AgentError::UnknownProvider(agent.model_id.clone()))?;
                provider::invoke_live(config, &agent.model_id, agent.temperature, request.prompt)
            }
        }
    }
}

/// Stable 64-bit FNV-1a hash used to derive per-trial seeds; must not change
/// across releases or platforms, or stored runs stop being reproducible.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for byte in *part {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x100_0000_01b3);
        }
        // Separator so ("ab","c") and ("a","bc") differ.
        hash ^= 0xff;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

/// Per-trial seed from the run seed and the trial's provenance tuple.
pub fn derive_trial_seed(
    base_seed: u64,
    model_id: &str,
    scenario: ScenarioKind,
    tax_rate: Option<f64>,
    trial_index: u32,
) -> u64 {
    let tax_bits = tax_rate.unwrap_or(-1.0).to_bits();
    stable_hash(&[
        &base_seed.to_le_bytes(),
        model_id.as_bytes(),
        scenario.as_str().as_bytes(),
        &tax_bits.to_le_bytes(),
        &trial_index.to_le_bytes(),
    ])
}
