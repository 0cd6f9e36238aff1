//! TOML configuration: population groups, agent panel, providers and
//! experiment settings.
//!
//! The built-in defaults describe the five-model panel mapped onto the five
//! education strata with shares (0.11, 0.12, 0.24, 0.35, 0.18). Group
//! calibrations default to the aggregate fixture because per-group survey
//! inputs are not published; they are marked as placeholders and can be
//! replaced by raw income tables per group in the config file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    stable_hash, AgentProfile, AuthScheme, BackendKind, EducationGroup, PersonaParams,
    ProviderConfig, WireShape,
};
use crate::calibration::{
    calibrate_group, AgeGroupIncomeTable, CalibratedParameters, CalibrationError,
    CalibrationSource, GrowthAssumptions, AGE_GROUPS, AGGREGATE_W0, AGGREGATE_Y1, AGGREGATE_Y2,
};

/// Population shares of the five education groups, highest first.
pub const DEFAULT_SHARES: [f64; 5] = [0.11, 0.12, 0.24, 0.35, 0.18];

/// Default tax sweep: 0% to 100% in 10-point steps.
pub fn default_tax_grid() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 10.0).collect()
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    #[serde(default = "default_trials")]
    pub trials_per_agent: u32,
    #[serde(default = "default_tax_grid")]
    pub tax_grid: Vec<f64>,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
}

fn default_trials() -> u32 {
    16
}

fn default_seed() -> u64 {
    42
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            trials_per_agent: default_trials(),
            tax_grid: default_tax_grid(),
            base_seed: default_seed(),
        }
    }
}

/// Where a group's two-period parameters come from: either direct fixture
/// values or a raw income table fed through the calibration pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CalibrationSpec {
    IncomeTable {
        group_means: [f64; AGE_GROUPS],
        overall_mean: f64,
    },
    Fixture {
        w0: f64,
        y1: f64,
        y2: f64,
        /// Marks values copied from the aggregate fixture rather than
        /// derived from group data.
        #[serde(default)]
        placeholder: bool,
    },
}

impl CalibrationSpec {
    pub fn resolve(
        &self,
        label: &str,
        assumptions: &GrowthAssumptions,
    ) -> Result<CalibratedParameters, CalibrationError> {
        match self {
            CalibrationSpec::Fixture {
                w0,
                y1,
                y2,
                placeholder,
            } => Ok(CalibratedParameters {
                group_label: label.to_string(),
                w0: *w0,
                y1: *y1,
                y2: *y2,
                beta_period: assumptions.period_discount(),
                sigma: assumptions.sigma,
                rate_period: assumptions.period_rate(),
                source: if *placeholder {
                    CalibrationSource::PlaceholderFixture
                } else {
                    CalibrationSource::DerivedFromIncomeTable
                },
            }),
            CalibrationSpec::IncomeTable {
                group_means,
                overall_mean,
            } => {
                let table = AgeGroupIncomeTable::new(*group_means, *overall_mean)?;
                calibrate_group(label, &table, assumptions)
            }
        }
    }
}

/// One panel member: the agent profile fields plus its group calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub model_id: String,
    #[serde(default)]
    pub provider: Option<String>,
    pub temperature: f64,
    pub education_group: EducationGroup,
    pub population_share: f64,
    #[serde(default)]
    pub persona: Option<PersonaParams>,
    pub calibration: CalibrationSpec,
}

impl AgentSpec {
    /// Materialize the runtime profile for the chosen backend mode.
    pub fn profile(&self, backend: BackendKind) -> AgentProfile {
        AgentProfile {
            model_id: self.model_id.clone(),
            backend,
            provider: self.provider.clone(),
            temperature: self.temperature,
            education_group: self.education_group,
            population_share: self.population_share,
            persona: self.persona,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    #[serde(default)]
    pub assumptions: GrowthAssumptions,
    #[serde(default)]
    pub experiment: ExperimentSettings,
    #[serde(default)]
    pub providers: Vec<ProviderConfig>,
    pub agents: Vec<AgentSpec>,
}

impl Default for Config {
    fn default() -> Self {
        Self::default_panel()
    }
}

impl Config {
    /// The five-model panel with education mapping, published temperatures,
    /// persona profiles shaped to the published deviation levels, and
    /// placeholder fixture calibrations for every group.
    pub fn default_panel() -> Self {
        let fixture = CalibrationSpec::Fixture {
            w0: AGGREGATE_W0,
            y1: AGGREGATE_Y1,
            y2: AGGREGATE_Y2,
            placeholder: true,
        };
        let agent = |model_id: &str,
                     provider: &str,
                     temperature: f64,
                     group: EducationGroup,
                     share: f64,
                     persona: PersonaParams| AgentSpec {
            model_id: model_id.to_string(),
            provider: Some(provider.to_string()),
            temperature,
            education_group: group,
            population_share: share,
            persona: Some(persona),
            calibration: fixture.clone(),
        };
        Self {
            assumptions: GrowthAssumptions::default(),
            experiment: ExperimentSettings::default(),
            providers: default_providers(),
            agents: vec![
                agent(
                    "deepseek-v3",
                    "deepseek",
                    1.0,
                    EducationGroup::College4YrPlus,
                    0.11,
                    PersonaParams {
                        bias_c1: 0.0028,
                        noise_sd: 0.016,
                        underconsumption_bias: 0.019,
                        seed: 0,
                    },
                ),
                agent(
                    "gpt-4o",
                    "openai",
                    1.0,
                    EducationGroup::College3Yr,
                    0.12,
                    PersonaParams {
                        bias_c1: 0.0059,
                        noise_sd: 0.074,
                        underconsumption_bias: 0.0392,
                        seed: 0,
                    },
                ),
                agent(
                    "gemini-1.5-pro",
                    "gemini",
                    1.0,
                    EducationGroup::SeniorHigh,
                    0.24,
                    PersonaParams {
                        bias_c1: 0.0045,
                        noise_sd: 0.042,
                        underconsumption_bias: 0.1336,
                        seed: 0,
                    },
                ),
                agent(
                    "claude-3.5-sonnet",
                    "anthropic",
                    1.0,
                    EducationGroup::JuniorHigh,
                    0.35,
                    PersonaParams {
                        bias_c1: 0.1812,
                        noise_sd: 0.092,
                        underconsumption_bias: 0.2652,
                        seed: 0,
                    },
                ),
                agent(
                    "llama-3.1-405b",
                    "together",
                    0.2,
                    EducationGroup::Primary,
                    0.18,
                    PersonaParams {
                        bias_c1: 0.55,
                        noise_sd: 0.12,
                        underconsumption_bias: 0.6132,
                        seed: 0,
                    },
                ),
            ],
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: Config = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Stable content hash recorded in run manifests.
    pub fn content_hash(&self) -> Result<String, ConfigError> {
        let canonical = self.to_toml()?;
        Ok(format!("{:016x}", stable_hash(&[canonical.as_bytes()])))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.agents.is_empty() {
            return Err(ConfigError::Validation("no agents configured".into()));
        }
        let share_sum: f64 = self.agents.iter().map(|a| a.population_share).sum();
        if (share_sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Validation(format!(
                "population shares sum to {share_sum}, expected 1"
            )));
        }
        if self.agents.iter().any(|a| a.population_share < 0.0) {
            return Err(ConfigError::Validation("negative population share".into()));
        }
        let mut ids: Vec<&str> = self.agents.iter().map(|a| a.model_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.agents.len() {
            return Err(ConfigError::Validation("duplicate model_id".into()));
        }
        if self.experiment.trials_per_agent == 0 {
            return Err(ConfigError::Validation("trials_per_agent must be >= 1".into()));
        }
        let grid = &self.experiment.tax_grid;
        if grid.is_empty() {
            return Err(ConfigError::Validation("tax grid is empty".into()));
        }
        if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(ConfigError::Validation("tax grid outside [0, 1]".into()));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::Validation(
                "tax grid must be strictly increasing".into(),
            ));
        }
        self.assumptions
            .validate()
            .map_err(ConfigError::Calibration)?;
        Ok(())
    }

    /// Resolve every agent's calibration.
    pub fn calibrations(&self) -> Result<Vec<CalibratedParameters>, ConfigError> {
        self.agents
            .iter()
            .map(|agent| {
                agent
                    .calibration
                    .resolve(agent.education_group.as_str(), &self.assumptions)
                    .map_err(ConfigError::from)
            })
            .collect()
    }
}

fn default_providers() -> Vec<ProviderConfig> {
    let openai_compatible = |name: &str, endpoint: &str, env: &str, range: (f64, f64)| {
        ProviderConfig {
            name: name.to_string(),
            endpoint: endpoint.to_string(),
            wire: WireShape::OpenaiChat,
            auth_env: env.to_string(),
            auth_header: "Authorization".to_string(),
            auth_scheme: AuthScheme::Bearer,
            temperature_range: range,
            max_retries: 3,
            backoff_ms: 250,
            extra_headers: vec![],
            max_tokens: None,
            max_parallel: 2,
            timeout_secs: 120,
        }
    };
    vec![
        openai_compatible(
            "deepseek",
            "https://api.deepseek.com/v1/chat/completions",
            "DEEPSEEK_API_KEY",
            (0.0, 2.0),
        ),
        openai_compatible(
            "openai",
            "https://api.openai.com/v1/chat/completions",
            "OPENAI_API_KEY",
            (0.0, 1.0),
        ),
        ProviderConfig {
            name: "gemini".to_string(),
            endpoint:
                "https://generativelanguage.googleapis.com/v1beta/models/gemini-1.5-pro-002:generateContent"
                    .to_string(),
            wire: WireShape::GeminiGenerate,
            auth_env: "GEMINI_API_KEY".to_string(),
            auth_header: "key".to_string(),
            auth_scheme: AuthScheme::QueryParam,
            temperature_range: (0.0, 2.0),
            max_retries: 3,
            backoff_ms: 250,
            extra_headers: vec![],
            max_tokens: None,
            max_parallel: 2,
            timeout_secs: 120,
        },
        ProviderConfig {
            name: "anthropic".to_string(),
            endpoint: "https://api.anthropic.com/v1/messages".to_string(),
            wire: WireShape::AnthropicMessages,
            auth_env: "ANTHROPIC_API_KEY".to_string(),
            auth_header: "x-api-key".to_string(),
            auth_scheme: AuthScheme::RawHeader,
            temperature_range: (0.0, 1.0),
            max_retries: 3,
            backoff_ms: 250,
            extra_headers: vec![("anthropic-version".to_string(), "2023-06-01".to_string())],
            max_tokens: Some(4096),
            max_parallel: 2,
            timeout_secs: 120,
        },
        openai_compatible(
            "together",
            "https://api.together.xyz/v1/chat/completions",
            "TOGETHER_API_KEY",
            (0.0, 1.0),
        ),
    ]
}
