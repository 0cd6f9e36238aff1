//! Scenario definitions and prompt rendering.
//!
//! The three prompt texts live as template files with `{placeholder}`
//! substitution and are rendered byte-exactly against fixtures committed in
//! the test suite. Number formatting follows the displayed convention:
//! thousands separators with commas, one decimal place on currency amounts,
//! one decimal on interest rates, trimmed integers on tax rates.

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::calibration::CalibratedParameters;
use crate::lifecycle::{
    solve_two_period, BudgetEnvironment, ConsumptionPlan, LifecycleError, Preferences, TaxPolicy,
};

const WITH_UTILITY_TEMPLATE: &str = include_str!("../../templates/with_utility.txt");
const GUT_FEELING_TEMPLATE: &str = include_str!("../../templates/gut_feeling.txt");
const TAX_POLICY_TEMPLATE: &str = include_str!("../../templates/tax_policy.txt");

/// The three experiment prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Explicit utility function plus the economic situation.
    WithUtility,
    /// Same situation, no utility function, decide on gut feeling.
    GutFeeling,
    /// Gut-feeling framing plus an interest-earnings tax line.
    TaxPolicy,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::WithUtility => "with_utility",
            ScenarioKind::GutFeeling => "gut_feeling",
            ScenarioKind::TaxPolicy => "tax_policy",
        }
    }
}

/// Parameter values exactly as displayed to the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub current_savings: f64,
    pub working_income: f64,
    pub retirement_income: f64,
    pub interest_rate_percent: f64,
    #[serde(default)]
    pub tax_rate_percent: Option<f64>,
    #[serde(default)]
    pub beta_display: Option<f64>,
    #[serde(default)]
    pub sigma_display: Option<f64>,
}

/// A renderable scenario: kind plus displayed parameters, with the kind's
/// invariants checked at construction (tax line iff tax scenario, utility
/// parameters iff utility scenario).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PromptScenarioRaw")]
pub struct PromptScenario {
    kind: ScenarioKind,
    params: ScenarioParams,
}

#[derive(Deserialize)]
struct PromptScenarioRaw {
    kind: ScenarioKind,
    params: ScenarioParams,
}

impl TryFrom<PromptScenarioRaw> for PromptScenario {
    type Error = AgentError;
    fn try_from(raw: PromptScenarioRaw) -> Result<Self, AgentError> {
        PromptScenario::new(raw.kind, raw.params)
    }
}

impl PromptScenario {
    pub fn new(kind: ScenarioKind, params: ScenarioParams) -> Result<Self, AgentError> {
        let has_tax = params.tax_rate_percent.is_some();
        let has_utility = params.beta_display.is_some() && params.sigma_display.is_some();
        match kind {
            ScenarioKind::WithUtility => {
                if has_tax {
                    return Err(AgentError::ScenarioInvariant(
                        "tax rate is only valid in the tax scenario".into(),
                    ));
                }
                if !has_utility {
                    return Err(AgentError::ScenarioInvariant(
                        "utility scenario needs beta_display and sigma_display".into(),
                    ));
                }
            }
            ScenarioKind::GutFeeling | ScenarioKind::TaxPolicy => {
                if params.beta_display.is_some() || params.sigma_display.is_some() {
                    return Err(AgentError::ScenarioInvariant(
                        "utility parameters are only displayed in the utility scenario".into(),
                    ));
                }
                if (kind == ScenarioKind::TaxPolicy) != has_tax {
                    return Err(AgentError::ScenarioInvariant(
                        "tax rate must be present exactly for the tax scenario".into(),
                    ));
                }
            }
        }
        if let Some(tax) = params.tax_rate_percent {
            if !(0.0..=100.0).contains(&tax) {
                return Err(AgentError::ScenarioInvariant(format!(
                    "tax rate percent out of range: {tax}"
                )));
            }
        }
        Ok(Self { kind, params })
    }

    /// Scenario for one agent's calibrated parameters. Rates are displayed
    /// rounded (one decimal on the interest percent, three decimals on
    /// beta), and the agent is scored against the displayed problem.
    pub fn from_calibration(
        kind: ScenarioKind,
        calibration: &CalibratedParameters,
        tax_rate: Option<f64>,
    ) -> Result<Self, AgentError> {
        let interest_rate_percent = round_to(calibration.rate_period * 100.0, 1);
        let (beta_display, sigma_display) = match kind {
            ScenarioKind::WithUtility => {
                (Some(round_to(calibration.beta_period, 3)), Some(calibration.sigma))
            }
            _ => (None, None),
        };
        Self::new(
            kind,
            ScenarioParams {
                current_savings: calibration.w0,
                working_income: calibration.y1,
                retirement_income: calibration.y2,
                interest_rate_percent,
                tax_rate_percent: tax_rate.map(|t| round_to(t * 100.0, 1)),
                beta_display,
                sigma_display,
            },
        )
    }

    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    /// The budget environment exactly as displayed, including the symmetric
    /// interest tax when present.
    pub fn environment(&self) -> Result<BudgetEnvironment, LifecycleError> {
        let tax = match self.params.tax_rate_percent {
            Some(percent) => Some(TaxPolicy::new(percent / 100.0)?),
            None => None,
        };
        BudgetEnvironment::two_period(
            self.params.current_savings,
            self.params.working_income,
            self.params.retirement_income,
            self.params.interest_rate_percent / 100.0,
            tax,
        )
    }

    /// Preferences used for scoring. Scenarios that do not display the
    /// utility function fall back to the supplied calibration values.
    pub fn preferences_or(
        &self,
        fallback_sigma: f64,
        fallback_beta: f64,
    ) -> Result<Preferences, LifecycleError> {
        Preferences::new(
            self.params.sigma_display.unwrap_or(fallback_sigma),
            self.params.beta_display.unwrap_or(fallback_beta),
        )
    }

    /// Analytical optimum of the displayed problem.
    pub fn optimum(
        &self,
        fallback_sigma: f64,
        fallback_beta: f64,
    ) -> Result<ConsumptionPlan, LifecycleError> {
        let prefs = self.preferences_or(fallback_sigma, fallback_beta)?;
        solve_two_period(&prefs, &self.environment()?)
    }
}

fn round_to(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (value * scale).round() / scale
}

/// "141598.4" -> "141,598.4": comma thousands separators, one decimal.
pub fn format_units(value: f64) -> String {
    let rounded = format!("{value:.1}");
    let (integer, fraction) = rounded.split_once('.').expect("fixed-point format");
    let mut grouped = String::new();
    let digits: Vec<char> = integer.chars().collect();
    for (position, digit) in digits.iter().enumerate() {
        if position > 0 && (digits.len() - position).is_multiple_of(3) {
            grouped.push(',');
        }
        grouped.push(*digit);
    }
    format!("{grouped}.{fraction}")
}

/// Interest rates display with one decimal: 48.6.
fn format_interest(percent: f64) -> String {
    format!("{percent:.1}")
}

/// Tax rates display trimmed: 30, or 12.5 when fractional.
fn format_tax(percent: f64) -> String {
    if (percent - percent.round()).abs() < 1e-9 {
        format!("{:.0}", percent.round())
    } else {
        format!("{percent:.1}")
    }
}

/// Sigma displays trimmed: 2, or 0.5 when fractional.
fn format_sigma(sigma: f64) -> String {
    if (sigma - sigma.round()).abs() < 1e-9 {
        format!("{:.0}", sigma.round())
    } else {
        let text = format!("{sigma}");
        text
    }
}

/// Beta displays with three decimals: 0.818.
fn format_beta(beta: f64) -> String {
    format!("{beta:.3}")
}

/// Render the scenario's prompt text with every placeholder substituted.
pub fn render_prompt(scenario: &PromptScenario) -> Result<String, AgentError> {
    let params = scenario.params();
    let template = match scenario.kind() {
        ScenarioKind::WithUtility => WITH_UTILITY_TEMPLATE,
        ScenarioKind::GutFeeling => GUT_FEELING_TEMPLATE,
        ScenarioKind::TaxPolicy => TAX_POLICY_TEMPLATE,
    };
    let mut text = template.to_string();
    let mut substitute = |name: &str, value: String| {
        text = text.replace(&format!("{{{name}}}"), &value);
    };
    substitute("current_savings", format_units(params.current_savings));
    substitute("working_income", format_units(params.working_income));
    substitute("retirement_income", format_units(params.retirement_income));
    substitute("interest_rate", format_interest(params.interest_rate_percent));
    if let Some(tax) = params.tax_rate_percent {
        substitute("tax_rate", format_tax(tax));
    }
    if let (Some(beta), Some(sigma)) = (params.beta_display, params.sigma_display) {
        substitute("beta", format_beta(beta));
        substitute("sigma", format_sigma(sigma));
    }
    if let Some(start) = text.find('{') {
        let end = text[start..].find('}').map_or(text.len(), |e| start + e + 1);
        let name = text[start + 1..end.saturating_sub(1)].to_string();
        return Err(AgentError::MissingParameter(name));
    }
    Ok(text)
}
