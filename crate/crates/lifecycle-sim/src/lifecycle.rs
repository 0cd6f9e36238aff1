//! Deterministic core of the lifecycle consumption model.
//!
//! CRRA utility, budget environments with optional interest-income taxation,
//! closed-form two-period and N-period optimal plans, residual checks, saving
//! rates, and an independent grid-search oracle used to cross-check the
//! closed form. Every function here is pure: no shared state, safe to call
//! from any thread.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance the analytical plan must meet on the Euler condition.
pub const EULER_REL_TOL: f64 = 1e-9;
/// Relative tolerance the analytical plan must meet on the budget identity.
pub const BUDGET_REL_TOL: f64 = 1e-12;
/// Required relative agreement between the closed form and the grid oracle.
pub const ORACLE_REL_TOL: f64 = 1e-6;
/// Smallest grid the numeric oracle accepts.
pub const MIN_GRID_RESOLUTION: usize = 1_000;

#[derive(Debug, Error)]
pub enum LifecycleError {
    #[error("consumption must be strictly positive, got {0}")]
    NonPositiveConsumption(f64),
    #[error("sigma must be a positive finite number, got {0}")]
    InvalidSigma(f64),
    #[error("beta must lie strictly inside (0, 1), got {0}")]
    InvalidBeta(f64),
    #[error("period interest rate must exceed -1, got {0}")]
    InvalidRate(f64),
    #[error("interest tax rate must lie in [0, 1], got {0}")]
    InvalidTaxRate(f64),
    #[error("initial wealth must be non-negative, got {0}")]
    NegativeInitialWealth(f64),
    #[error("incomes must be non-empty, finite and non-negative")]
    InvalidIncomes,
    #[error("environment is infeasible: lifetime wealth {0} is not positive")]
    InfeasibleEnvironment(f64),
    #[error("expected a {expected}-period environment/plan, got {actual}")]
    PeriodMismatch { expected: usize, actual: usize },
    #[error("plan has {plan} entries but the environment has {env} periods")]
    PlanLengthMismatch { plan: usize, env: usize },
    #[error("need at least 2 periods to solve, got {0}")]
    HorizonTooShort(usize),
    #[error("saving-rate denominators must be positive (w0+y1={wealth}, y1={income})")]
    ZeroDenominator { wealth: f64, income: f64 },
    #[error("grid resolution must be at least {min}, got {got}")]
    GridTooCoarse { min: usize, got: usize },
    #[error("asymmetric borrowing tax is only supported on two-period environments")]
    AsymmetricTaxUnsupported,
    #[error("consumption plan entries must be finite and non-negative")]
    InvalidPlanEntries,
}

/// CRRA preferences: curvature `sigma` and per-period discount factor `beta`.
///
/// `sigma == 1` selects the logarithmic utility branch by exact equality on
/// the input; callers wanting the log case pass `1.0` literally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PreferencesRaw")]
pub struct Preferences {
    sigma: f64,
    beta: f64,
}

#[derive(Deserialize)]
struct PreferencesRaw {
    sigma: f64,
    beta: f64,
}

impl TryFrom<PreferencesRaw> for Preferences {
    type Error = LifecycleError;
    fn try_from(raw: PreferencesRaw) -> Result<Self, LifecycleError> {
        Preferences::new(raw.sigma, raw.beta)
    }
}

impl Preferences {
    pub fn new(sigma: f64, beta: f64) -> Result<Self, LifecycleError> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(LifecycleError::InvalidSigma(sigma));
        }
        if !beta.is_finite() || beta <= 0.0 || beta >= 1.0 {
            return Err(LifecycleError::InvalidBeta(beta));
        }
        Ok(Self { sigma, beta })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Gross growth factor of consumption across one period, (β(1+r))^(1/σ).
    pub fn consumption_growth(&self, rate: f64) -> f64 {
        (self.beta * (1.0 + rate)).powf(1.0 / self.sigma)
    }
}

/// Tax on interest earnings, paid in the period the interest accrues to.
///
/// Savings earn `r·(1-τ)` after tax. By default borrowing is treated
/// symmetrically (negative interest is rebated at the same rate); with
/// `rebate_on_borrowing == false`, borrowers pay the full pre-tax rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TaxPolicyRaw")]
pub struct TaxPolicy {
    interest_tax_rate: f64,
    rebate_on_borrowing: bool,
}

#[derive(Deserialize)]
struct TaxPolicyRaw {
    interest_tax_rate: f64,
    #[serde(default = "default_true")]
    rebate_on_borrowing: bool,
}

fn default_true() -> bool {
    true
}

impl TryFrom<TaxPolicyRaw> for TaxPolicy {
    type Error = LifecycleError;
    fn try_from(raw: TaxPolicyRaw) -> Result<Self, LifecycleError> {
        let mut policy = TaxPolicy::new(raw.interest_tax_rate)?;
        policy.rebate_on_borrowing = raw.rebate_on_borrowing;
        Ok(policy)
    }
}

impl TaxPolicy {
    pub fn new(interest_tax_rate: f64) -> Result<Self, LifecycleError> {
        if !interest_tax_rate.is_finite() || !(0.0..=1.0).contains(&interest_tax_rate) {
            return Err(LifecycleError::InvalidTaxRate(interest_tax_rate));
        }
        Ok(Self {
            interest_tax_rate,
            rebate_on_borrowing: true,
        })
    }

    pub fn without_borrowing_rebate(interest_tax_rate: f64) -> Result<Self, LifecycleError> {
        let mut policy = Self::new(interest_tax_rate)?;
        policy.rebate_on_borrowing = false;
        Ok(policy)
    }

    pub fn interest_tax_rate(&self) -> f64 {
        self.interest_tax_rate
    }

    pub fn rebate_on_borrowing(&self) -> bool {
        self.rebate_on_borrowing
    }
}

/// After-tax interest rate: `r` when no tax applies, `r·(1-τ)` otherwise.
pub fn effective_rate(rate: f64, tax: Option<&TaxPolicy>) -> f64 {
    match tax {
        Some(policy) => rate * (1.0 - policy.interest_tax_rate),
        None => rate,
    }
}

/// Budget environment: initial wealth, per-period incomes, the interest rate
/// between consecutive periods, and an optional interest-income tax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BudgetEnvironmentRaw")]
pub struct BudgetEnvironment {
    initial_wealth: f64,
    incomes: Vec<f64>,
    period_rate: f64,
    tax: Option<TaxPolicy>,
}

#[derive(Deserialize)]
struct BudgetEnvironmentRaw {
    initial_wealth: f64,
    incomes: Vec<f64>,
    period_rate: f64,
    #[serde(default)]
    tax: Option<TaxPolicy>,
}

impl TryFrom<BudgetEnvironmentRaw> for BudgetEnvironment {
    type Error = LifecycleError;
    fn try_from(raw: BudgetEnvironmentRaw) -> Result<Self, LifecycleError> {
        BudgetEnvironment::new(raw.initial_wealth, raw.incomes, raw.period_rate, raw.tax)
    }
}

impl BudgetEnvironment {
    pub fn new(
        initial_wealth: f64,
        incomes: Vec<f64>,
        period_rate: f64,
        tax: Option<TaxPolicy>,
    ) -> Result<Self, LifecycleError> {
        if !initial_wealth.is_finite() || initial_wealth < 0.0 {
            return Err(LifecycleError::NegativeInitialWealth(initial_wealth));
        }
        if incomes.is_empty() || incomes.iter().any(|y| !y.is_finite() || *y < 0.0) {
            return Err(LifecycleError::InvalidIncomes);
        }
        if !period_rate.is_finite() || period_rate <= -1.0 {
            return Err(LifecycleError::InvalidRate(period_rate));
        }
        let env = Self {
            initial_wealth,
            incomes,
            period_rate,
            tax,
        };
        let wealth = env.lifetime_wealth();
        if wealth <= 0.0 || wealth.is_nan() {
            return Err(LifecycleError::InfeasibleEnvironment(wealth));
        }
        Ok(env)
    }

    pub fn two_period(
        initial_wealth: f64,
        working_income: f64,
        retirement_income: f64,
        period_rate: f64,
        tax: Option<TaxPolicy>,
    ) -> Result<Self, LifecycleError> {
        Self::new(
            initial_wealth,
            vec![working_income, retirement_income],
            period_rate,
            tax,
        )
    }

    pub fn initial_wealth(&self) -> f64 {
        self.initial_wealth
    }

    pub fn incomes(&self) -> &[f64] {
        &self.incomes
    }

    pub fn period_rate(&self) -> f64 {
        self.period_rate
    }

    pub fn tax(&self) -> Option<&TaxPolicy> {
        self.tax.as_ref()
    }

    pub fn horizon(&self) -> usize {
        self.incomes.len()
    }

    pub fn effective_rate(&self) -> f64 {
        effective_rate(self.period_rate, self.tax.as_ref())
    }

    /// Lifetime wealth W = w0 + Σ y_t/(1+r_eff)^(t-1), discounted at the
    /// after-tax rate when a tax is present.
    pub fn lifetime_wealth(&self) -> f64 {
        self.lifetime_wealth_at(self.effective_rate())
    }

    fn lifetime_wealth_at(&self, rate: f64) -> f64 {
        let mut total = self.initial_wealth;
        let mut discount = 1.0;
        for income in &self.incomes {
            total += income / discount;
            discount *= 1.0 + rate;
        }
        total
    }

    /// Same environment with the given tax policy attached.
    pub fn with_tax(&self, tax: TaxPolicy) -> Result<Self, LifecycleError> {
        Self::new(
            self.initial_wealth,
            self.incomes.clone(),
            self.period_rate,
            Some(tax),
        )
    }
}

/// Where a consumption plan came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytical,
    AgentParsed,
    ReferencePath,
}

/// A candidate consumption path, one entry per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConsumptionPlanRaw")]
pub struct ConsumptionPlan {
    consumptions: Vec<f64>,
    provenance: Provenance,
}

#[derive(Deserialize)]
struct ConsumptionPlanRaw {
    consumptions: Vec<f64>,
    provenance: Provenance,
}

impl TryFrom<ConsumptionPlanRaw> for ConsumptionPlan {
    type Error = LifecycleError;
    fn try_from(raw: ConsumptionPlanRaw) -> Result<Self, LifecycleError> {
        ConsumptionPlan::new(raw.consumptions, raw.provenance)
    }
}

impl ConsumptionPlan {
    pub fn new(consumptions: Vec<f64>, provenance: Provenance) -> Result<Self, LifecycleError> {
        if consumptions.is_empty() || consumptions.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(LifecycleError::InvalidPlanEntries);
        }
        Ok(Self {
            consumptions,
            provenance,
        })
    }

    pub fn two_period(c1: f64, c2: f64, provenance: Provenance) -> Result<Self, LifecycleError> {
        Self::new(vec![c1, c2], provenance)
    }

    pub fn consumptions(&self) -> &[f64] {
        &self.consumptions
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.consumptions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.consumptions.is_empty()
    }

    /// (c1, c2) for two-period plans.
    pub fn pair(&self) -> Option<(f64, f64)> {
        match self.consumptions[..] {
            [c1, c2] => Some((c1, c2)),
            _ => None,
        }
    }
}

/// CRRA period utility: c^(1-σ)/(1-σ), or ln(c) exactly when σ = 1.
pub fn utility(consumption: f64, sigma: f64) -> Result<f64, LifecycleError> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(LifecycleError::InvalidSigma(sigma));
    }
    if !consumption.is_finite() || consumption <= 0.0 {
        return Err(LifecycleError::NonPositiveConsumption(consumption));
    }
    if sigma == 1.0 {
        Ok(consumption.ln())
    } else {
        Ok(consumption.powf(1.0 - sigma) / (1.0 - sigma))
    }
}

/// Marginal utility u'(c) = c^(-σ).
pub fn marginal_utility(consumption: f64, sigma: f64) -> Result<f64, LifecycleError> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(LifecycleError::InvalidSigma(sigma));
    }
    if !consumption.is_finite() || consumption <= 0.0 {
        return Err(LifecycleError::NonPositiveConsumption(consumption));
    }
    Ok(consumption.powf(-sigma))
}

fn ensure_horizon(env: &BudgetEnvironment, expected: usize) -> Result<(), LifecycleError> {
    if env.horizon() != expected {
        return Err(LifecycleError::PeriodMismatch {
            expected,
            actual: env.horizon(),
        });
    }
    Ok(())
}

fn ensure_plan_matches(
    env: &BudgetEnvironment,
    plan: &ConsumptionPlan,
) -> Result<(), LifecycleError> {
    if plan.len() != env.horizon() {
        return Err(LifecycleError::PlanLengthMismatch {
            plan: plan.len(),
            env: env.horizon(),
        });
    }
    Ok(())
}

/// Chained-Euler plan at a fixed rate: c_{t+1} = c_t (β(1+r))^(1/σ) with the
/// discounted sum exhausting lifetime wealth.
fn chained_plan(
    prefs: &Preferences,
    rate: f64,
    env: &BudgetEnvironment,
) -> Result<Vec<f64>, LifecycleError> {
    let wealth = env.lifetime_wealth_at(rate);
    if wealth <= 0.0 || wealth.is_nan() {
        return Err(LifecycleError::InfeasibleEnvironment(wealth));
    }
    let growth = prefs.consumption_growth(rate);
    let discounted_growth = growth / (1.0 + rate);
    let denom: f64 = (0..env.horizon())
        .map(|t| discounted_growth.powi(t as i32))
        .sum();
    let first = wealth / denom;
    Ok((0..env.horizon())
        .map(|t| first * growth.powi(t as i32))
        .collect())
}

/// Closed-form optimal plan for a two-period environment.
///
/// With a symmetric tax the solution is the standard one evaluated at the
/// after-tax rate. Without a borrowing rebate the budget frontier is kinked
/// at zero saving; the optimum is then whichever branch solution respects
/// its own rate regime, or the kink itself.
pub fn solve_two_period(
    prefs: &Preferences,
    env: &BudgetEnvironment,
) -> Result<ConsumptionPlan, LifecycleError> {
    ensure_horizon(env, 2)?;
    if let Some(tax) = env.tax {
        if !tax.rebate_on_borrowing && tax.interest_tax_rate > 0.0 {
            return solve_two_period_kinked(prefs, env, tax);
        }
    }
    let consumptions = chained_plan(prefs, env.effective_rate(), env)?;
    ConsumptionPlan::new(consumptions, Provenance::Analytical)
}

fn solve_two_period_kinked(
    prefs: &Preferences,
    env: &BudgetEnvironment,
    tax: TaxPolicy,
) -> Result<ConsumptionPlan, LifecycleError> {
    let kink = env.initial_wealth + env.incomes[0];
    let saver_rate = env.period_rate * (1.0 - tax.interest_tax_rate);
    let saver = chained_plan(prefs, saver_rate, env)?;
    if saver[0] <= kink {
        return ConsumptionPlan::new(saver, Provenance::Analytical);
    }
    let borrower = chained_plan(prefs, env.period_rate, env)?;
    if borrower[0] >= kink {
        return ConsumptionPlan::new(borrower, Provenance::Analytical);
    }
    ConsumptionPlan::new(vec![kink, env.incomes[1]], Provenance::Analytical)
}

/// Optimal plan for an N-period environment (N >= 2). For N = 2 this is the
/// same computation as [`solve_two_period`].
pub fn solve_n_period(
    prefs: &Preferences,
    env: &BudgetEnvironment,
) -> Result<ConsumptionPlan, LifecycleError> {
    if env.horizon() < 2 {
        return Err(LifecycleError::HorizonTooShort(env.horizon()));
    }
    if env.horizon() == 2 {
        return solve_two_period(prefs, env);
    }
    if let Some(tax) = env.tax {
        if !tax.rebate_on_borrowing && tax.interest_tax_rate > 0.0 {
            return Err(LifecycleError::AsymmetricTaxUnsupported);
        }
    }
    let consumptions = chained_plan(prefs, env.effective_rate(), env)?;
    ConsumptionPlan::new(consumptions, Provenance::Analytical)
}

/// Euler residual u'(c_t) - β(1+r_eff)u'(c_{t+1}), in marginal-utility units.
///
/// Evaluated pairwise for each adjacent period; returns the residual of
/// largest magnitude, sign preserved. Zero at the optimum.
pub fn euler_residual(
    prefs: &Preferences,
    env: &BudgetEnvironment,
    plan: &ConsumptionPlan,
) -> Result<f64, LifecycleError> {
    pairwise_euler(prefs, env, plan, false)
}

/// Euler residual normalised by u'(c_t), so tolerances are scale-free.
pub fn euler_residual_relative(
    prefs: &Preferences,
    env: &BudgetEnvironment,
    plan: &ConsumptionPlan,
) -> Result<f64, LifecycleError> {
    pairwise_euler(prefs, env, plan, true)
}

fn pairwise_euler(
    prefs: &Preferences,
    env: &BudgetEnvironment,
    plan: &ConsumptionPlan,
    relative: bool,
) -> Result<f64, LifecycleError> {
    ensure_plan_matches(env, plan)?;
    if plan.len() < 2 {
        return Err(LifecycleError::HorizonTooShort(plan.len()));
    }
    let factor = prefs.beta * (1.0 + env.effective_rate());
    let mut worst = 0.0_f64;
    for pair in plan.consumptions().windows(2) {
        let today = marginal_utility(pair[0], prefs.sigma)?;
        let tomorrow = marginal_utility(pair[1], prefs.sigma)?;
        let mut residual = today - factor * tomorrow;
        if relative {
            residual /= today;
        }
        if residual.abs() >= worst.abs() {
            worst = residual;
        }
    }
    Ok(worst)
}

/// Signed fractional budget gap (Σ c_t/(1+r_eff)^(t-1) - W)/W.
///
/// Positive means over-consumption (infeasible), negative under-consumption.
pub fn budget_residual(
    env: &BudgetEnvironment,
    plan: &ConsumptionPlan,
) -> Result<f64, LifecycleError> {
    ensure_plan_matches(env, plan)?;
    let rate = env.effective_rate();
    let wealth = env.lifetime_wealth();
    let mut discounted = 0.0;
    let mut discount = 1.0;
    for consumption in plan.consumptions() {
        discounted += consumption / discount;
        discount *= 1.0 + rate;
    }
    Ok((discounted - wealth) / wealth)
}

/// The two saving-rate definitions for a two-period plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SavingRates {
    /// 1 - c1/(w0 + y1)
    pub wealth_inclusive: f64,
    /// 1 - c1/y1
    pub income_only: f64,
}

/// Both saving-rate definitions, unclamped (negative when c1 exceeds the
/// denominator resources).
pub fn saving_rates(
    env: &BudgetEnvironment,
    plan: &ConsumptionPlan,
) -> Result<SavingRates, LifecycleError> {
    ensure_horizon(env, 2)?;
    ensure_plan_matches(env, plan)?;
    let wealth = env.initial_wealth + env.incomes[0];
    let income = env.incomes[0];
    if wealth <= 0.0 || income <= 0.0 {
        return Err(LifecycleError::ZeroDenominator { wealth, income });
    }
    let c1 = plan.consumptions()[0];
    Ok(SavingRates {
        wealth_inclusive: 1.0 - c1 / wealth,
        income_only: 1.0 - c1 / income,
    })
}

/// Wealth carried into each period under the timing convention
/// a_1 = w0, a_{t+1} = (a_t + y_t - c_t)(1 + r_eff).
///
/// Returns N+1 entries; the last one is terminal wealth (zero for a plan
/// that exhausts the budget).
pub fn wealth_path(env: &BudgetEnvironment, plan: &ConsumptionPlan) -> Result<Vec<f64>, LifecycleError> {
    ensure_plan_matches(env, plan)?;
    let rate = env.effective_rate();
    let mut path = Vec::with_capacity(env.horizon() + 1);
    let mut assets = env.initial_wealth;
    path.push(assets);
    for (income, consumption) in env.incomes.iter().zip(plan.consumptions()) {
        assets = (assets + income - consumption) * (1.0 + rate);
        path.push(assets);
    }
    Ok(path)
}

/// Independent brute-force oracle for the two-period problem.
///
/// Grid search over c1 with c2 implied by exhausting the budget, followed by
/// bisection on the sign change of dU/dc1 inside the best grid bracket. Does
/// not share any code path with [`solve_two_period`] beyond the type
/// definitions, so the two can cross-check each other.
pub fn solve_numeric(
    prefs: &Preferences,
    env: &BudgetEnvironment,
    grid_resolution: usize,
) -> Result<ConsumptionPlan, LifecycleError> {
    ensure_horizon(env, 2)?;
    if grid_resolution < MIN_GRID_RESOLUTION {
        return Err(LifecycleError::GridTooCoarse {
            min: MIN_GRID_RESOLUTION,
            got: grid_resolution,
        });
    }

    let sigma = prefs.sigma;
    let beta = prefs.beta;
    let kink = env.initial_wealth + env.incomes[0];
    let (saver_rate, borrow_rate) = match env.tax {
        Some(tax) if !tax.rebate_on_borrowing => (
            env.period_rate * (1.0 - tax.interest_tax_rate),
            env.period_rate,
        ),
        _ => (env.effective_rate(), env.effective_rate()),
    };
    let second_income = env.incomes[1];
    let implied_second = |c1: f64| -> f64 {
        let saving = kink - c1;
        let rate = if saving >= 0.0 { saver_rate } else { borrow_rate };
        second_income + saving * (1.0 + rate)
    };
    // Highest c1 with non-negative c2: borrow fully against y2.
    let c1_max = kink + second_income / (1.0 + borrow_rate);
    if c1_max <= 0.0 || c1_max.is_nan() {
        return Err(LifecycleError::InfeasibleEnvironment(c1_max));
    }

    let period_utility = |c: f64| -> f64 {
        if sigma == 1.0 {
            c.ln()
        } else {
            c.powf(1.0 - sigma) / (1.0 - sigma)
        }
    };

    let n = grid_resolution;
    let step = c1_max / (n as f64 + 1.0);
    let mut best_index = 0usize;
    let mut best_value = f64::NEG_INFINITY;
    for i in 1..=n {
        let c1 = step * i as f64;
        let c2 = implied_second(c1);
        if c2 <= 0.0 {
            continue;
        }
        let value = period_utility(c1) + beta * period_utility(c2);
        if value > best_value {
            best_value = value;
            best_index = i;
        }
    }

    // dU/dc1 along the (possibly kinked) frontier; strictly decreasing in c1.
    let slope = |c1: f64| -> f64 {
        let saving = kink - c1;
        let rate = if saving >= 0.0 { saver_rate } else { borrow_rate };
        let c2 = implied_second(c1);
        c1.powf(-sigma) - beta * (1.0 + rate) * c2.powf(-sigma)
    };

    let (mut lo, mut hi) = if best_index > 0 {
        (
            step * best_index.saturating_sub(1).max(1) as f64,
            step * (best_index + 1).min(n) as f64,
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    if !(lo.is_finite() && hi.is_finite() && slope(lo) > 0.0 && slope(hi) < 0.0) {
        // Fall back to the full range: slope(0+) = +inf, slope(c1_max-) = -inf.
        lo = c1_max * 1e-12;
        hi = c1_max * (1.0 - 1e-12);
    }
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c1 = 0.5 * (lo + hi);
    let c2 = implied_second(c1).max(0.0);
    ConsumptionPlan::two_period(c1, c2, Provenance::Analytical)
}
