//! C ABI over the lifecycle consumption solver.
//!
//! The surface follows the usual opaque-handle pattern: build an
//! `LcsProblem` from preference and budget parameters, call solvers and
//! checks against it, free it when done. Every function returns an
//! `LcsStatus` code; outputs travel through caller-provided pointers. The
//! generated header lives at `include/lifecycle_sim.h`.

use std::ffi::{c_char, CStr};

use lifecycle_sim::lifecycle::{
    budget_residual, effective_rate, euler_residual, marginal_utility, saving_rates,
    solve_n_period, solve_numeric, utility, BudgetEnvironment, ConsumptionPlan, LifecycleError,
    Preferences, Provenance, TaxPolicy,
};

/// Result code of every FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A parameter violated its domain (sigma, beta, rates, incomes...).
    InvalidArgument = 2,
    /// The environment has non-positive lifetime wealth.
    Infeasible = 3,
    /// Evaluation outside the function's domain (e.g. zero consumption).
    DomainError = 4,
    /// The output buffer is smaller than the number of periods.
    BufferTooSmall = 5,
}

fn status_of(error: &LifecycleError) -> LcsStatus {
    match error {
        LifecycleError::InfeasibleEnvironment(_) => LcsStatus::Infeasible,
        LifecycleError::NonPositiveConsumption(_) | LifecycleError::ZeroDenominator { .. } => {
            LcsStatus::DomainError
        }
        _ => LcsStatus::InvalidArgument,
    }
}

/// Opaque problem handle: preferences plus a budget environment.
pub struct LcsProblem {
    prefs: Preferences,
    env: BudgetEnvironment,
}

/// Build a problem handle.
///
/// # Safety
/// `incomes` must point to `n_incomes` readable doubles and `out` to a
/// writable pointer slot. On success `*out` owns the handle and must be
/// released with [`lcs_problem_free`].
#[no_mangle]
pub unsafe extern "C" fn lcs_problem_new(
    sigma: f64,
    beta: f64,
    initial_wealth: f64,
    incomes: *const f64,
    n_incomes: usize,
    period_rate: f64,
    out: *mut *mut LcsProblem,
) -> LcsStatus {
    if out.is_null() || incomes.is_null() || n_incomes == 0 {
        return LcsStatus::NullArgument;
    }
    let incomes = std::slice::from_raw_parts(incomes, n_incomes).to_vec();
    let prefs = match Preferences::new(sigma, beta) {
        Ok(prefs) => prefs,
        Err(error) => return status_of(&error),
    };
    let env = match BudgetEnvironment::new(initial_wealth, incomes, period_rate, None) {
        Ok(env) => env,
        Err(error) => return status_of(&error),
    };
    *out = Box::into_raw(Box::new(LcsProblem { prefs, env }));
    LcsStatus::Ok
}

/// Attach an interest-earnings tax to the problem.
///
/// # Safety
/// `problem` must be a live handle from [`lcs_problem_new`].
#[no_mangle]
pub unsafe extern "C" fn lcs_problem_set_interest_tax(
    problem: *mut LcsProblem,
    tax_rate: f64,
    rebate_on_borrowing: bool,
) -> LcsStatus {
    let Some(problem) = problem.as_mut() else {
        return LcsStatus::NullArgument;
    };
    let policy = if rebate_on_borrowing {
        TaxPolicy::new(tax_rate)
    } else {
        TaxPolicy::without_borrowing_rebate(tax_rate)
    };
    let policy = match policy {
        Ok(policy) => policy,
        Err(error) => return status_of(&error),
    };
    match problem.env.with_tax(policy) {
        Ok(env) => {
            problem.env = env;
            LcsStatus::Ok
        }
        Err(error) => status_of(&error),
    }
}

/// Release a handle; null is ignored.
///
/// # Safety
/// `problem` must be null or a handle from [`lcs_problem_new`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn lcs_problem_free(problem: *mut LcsProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of periods in the problem.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lcs_problem_horizon(
    problem: *const LcsProblem,
    out: *mut usize,
) -> LcsStatus {
    let (Some(problem), false) = (problem.as_ref(), out.is_null()) else {
        return LcsStatus::NullArgument;
    };
    *out = problem.env.horizon();
    LcsStatus::Ok
}

/// Lifetime wealth discounted at the after-tax rate.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lcs_lifetime_wealth(
    problem: *const LcsProblem,
    out: *mut f64,
) -> LcsStatus {
    let (Some(problem), false) = (problem.as_ref(), out.is_null()) else {
        return LcsStatus::NullArgument;
    };
    *out = problem.env.lifetime_wealth();
    LcsStatus::Ok
}

/// Closed-form optimal plan; writes one consumption per period.
///
/// # Safety
/// `out_consumptions` must point to at least `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lcs_solve(
    problem: *const LcsProblem,
    out_consumptions: *mut f64,
    capacity: usize,
) -> LcsStatus {
    let (Some(problem), false) = (problem.as_ref(), out_consumptions.is_null()) else {
        return LcsStatus::NullArgument;
    };
    if capacity < problem.env.horizon() {
        return LcsStatus::BufferTooSmall;
    }
    let plan = match solve_n_period(&problem.prefs, &problem.env) {
        Ok(plan) => plan,
        Err(error) => return status_of(&error),
    };
    let out = std::slice::from_raw_parts_mut(out_consumptions, problem.env.horizon());
    out.copy_from_slice(plan.consumptions());
    LcsStatus::Ok
}

/// Grid-search oracle for two-period problems.
///
/// # Safety
/// `out_c1` and `out_c2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lcs_solve_numeric(
    problem: *const LcsProblem,
    grid_resolution: usize,
    out_c1: *mut f64,
    out_c2: *mut f64,
) -> LcsStatus {
    let Some(problem) = problem.as_ref() else {
        return LcsStatus::NullArgument;
    };
    if out_c1.is_null() || out_c2.is_null() {
        return LcsStatus::NullArgument;
    }
    match solve_numeric(&problem.prefs, &problem.env, grid_resolution) {
        Ok(plan) => {
            let (c1, c2) = plan.pair().expect("two-period oracle");
            *out_c1 = c1;
            *out_c2 = c2;
            LcsStatus::Ok
        }
        Err(error) => status_of(&error),
    }
}

unsafe fn plan_from_raw(
    consumptions: *const f64,
    len: usize,
) -> Result<ConsumptionPlan, LcsStatus> {
    if consumptions.is_null() || len == 0 {
        return Err(LcsStatus::NullArgument);
    }
    let values = std::slice::from_raw_parts(consumptions, len).to_vec();
    ConsumptionPlan::new(values, Provenance::AgentParsed).map_err(|e| status_of(&e))
}

/// Largest-magnitude Euler residual of a candidate plan.
///
/// # Safety
/// `consumptions` must point to `len` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lcs_euler_residual(
    problem: *const LcsProblem,
    consumptions: *const f64,
    len: usize,
    out: *mut f64,
) -> LcsStatus {
    let (Some(problem), false) = (problem.as_ref(), out.is_null()) else {
        return LcsStatus::NullArgument;
    };
    let plan = match plan_from_raw(consumptions, len) {
        Ok(plan) => plan,
        Err(status) => return status,
    };
    match euler_residual(&problem.prefs, &problem.env, &plan) {
        Ok(residual) => {
            *out = residual;
            LcsStatus::Ok
        }
        Err(error) => status_of(&error),
    }
}

/// Signed fractional budget gap of a candidate plan.
///
/// # Safety
/// `consumptions` must point to `len` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lcs_budget_residual(
    problem: *const LcsProblem,
    consumptions: *const f64,
    len: usize,
    out: *mut f64,
) -> LcsStatus {
    let (Some(problem), false) = (problem.as_ref(), out.is_null()) else {
        return LcsStatus::NullArgument;
    };
    let plan = match plan_from_raw(consumptions, len) {
        Ok(plan) => plan,
        Err(status) => return status,
    };
    match budget_residual(&problem.env, &plan) {
        Ok(residual) => {
            *out = residual;
            LcsStatus::Ok
        }
        Err(error) => status_of(&error),
    }
}

/// Both saving-rate definitions for a two-period plan (c1, c2).
///
/// # Safety
/// The two output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn lcs_saving_rates(
    problem: *const LcsProblem,
    c1: f64,
    c2: f64,
    out_wealth_inclusive: *mut f64,
    out_income_only: *mut f64,
) -> LcsStatus {
    let Some(problem) = problem.as_ref() else {
        return LcsStatus::NullArgument;
    };
    if out_wealth_inclusive.is_null() || out_income_only.is_null() {
        return LcsStatus::NullArgument;
    }
    let plan = match ConsumptionPlan::two_period(c1, c2, Provenance::AgentParsed) {
        Ok(plan) => plan,
        Err(error) => return status_of(&error),
    };
    match saving_rates(&problem.env, &plan) {
        Ok(rates) => {
            *out_wealth_inclusive = rates.wealth_inclusive;
            *out_income_only = rates.income_only;
            LcsStatus::Ok
        }
        Err(error) => status_of(&error),
    }
}

/// CRRA period utility.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lcs_utility(consumption: f64, sigma: f64, out: *mut f64) -> LcsStatus {
    if out.is_null() {
        return LcsStatus::NullArgument;
    }
    match utility(consumption, sigma) {
        Ok(value) => {
            *out = value;
            LcsStatus::Ok
        }
        Err(error) => status_of(&error),
    }
}

/// Marginal utility c^(-sigma).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lcs_marginal_utility(
    consumption: f64,
    sigma: f64,
    out: *mut f64,
) -> LcsStatus {
    if out.is_null() {
        return LcsStatus::NullArgument;
    }
    match marginal_utility(consumption, sigma) {
        Ok(value) => {
            *out = value;
            LcsStatus::Ok
        }
        Err(error) => status_of(&error),
    }
}

/// After-tax rate r(1 - tau); pass a negative tax rate for "no tax".
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lcs_effective_rate(rate: f64, tax_rate: f64, out: *mut f64) -> LcsStatus {
    if out.is_null() {
        return LcsStatus::NullArgument;
    }
    if tax_rate < 0.0 {
        *out = effective_rate(rate, None);
        return LcsStatus::Ok;
    }
    match TaxPolicy::new(tax_rate) {
        Ok(policy) => {
            *out = effective_rate(rate, Some(&policy));
            LcsStatus::Ok
        }
        Err(error) => status_of(&error),
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn lcs_status_message(status: LcsStatus) -> *const c_char {
    let message: &CStr = match status {
        LcsStatus::Ok => c"ok",
        LcsStatus::NullArgument => c"null pointer argument",
        LcsStatus::InvalidArgument => c"argument outside its domain",
        LcsStatus::Infeasible => c"environment has non-positive lifetime wealth",
        LcsStatus::DomainError => c"evaluation outside the function domain",
        LcsStatus::BufferTooSmall => c"output buffer too small",
    };
    message.as_ptr()
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn lcs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    unsafe fn aggregate_problem() -> *mut LcsProblem {
        let incomes = [958_189.8f64, 244_103.9];
        let mut handle: *mut LcsProblem = std::ptr::null_mut();
        let status = lcs_problem_new(
            2.0,
            0.818,
            141_598.4,
            incomes.as_ptr(),
            incomes.len(),
            0.486,
            &mut handle,
        );
        assert_eq!(status, LcsStatus::Ok);
        assert!(!handle.is_null());
        handle
    }

    #[test]
    fn solve_round_trips_through_the_abi() {
        unsafe {
            let problem = aggregate_problem();
            let mut horizon = 0usize;
            assert_eq!(lcs_problem_horizon(problem, &mut horizon), LcsStatus::Ok);
            assert_eq!(horizon, 2);

            let mut plan = [0.0f64; 2];
            assert_eq!(lcs_solve(problem, plan.as_mut_ptr(), 2), LcsStatus::Ok);
            assert!((plan[0] - 725_661.744433).abs() / plan[0] < 1e-9);

            let (mut n1, mut n2) = (0.0f64, 0.0f64);
            assert_eq!(
                lcs_solve_numeric(problem, 100_000, &mut n1, &mut n2),
                LcsStatus::Ok
            );
            assert!((n1 - plan[0]).abs() / plan[0] < 1e-6);

            let mut residual = 1.0f64;
            assert_eq!(
                lcs_budget_residual(problem, plan.as_ptr(), 2, &mut residual),
                LcsStatus::Ok
            );
            assert!(residual.abs() < 1e-12);

            let (mut wealth_rate, mut income_rate) = (0.0f64, 0.0f64);
            assert_eq!(
                lcs_saving_rates(problem, plan[0], plan[1], &mut wealth_rate, &mut income_rate),
                LcsStatus::Ok
            );
            assert!((wealth_rate - 0.3402).abs() < 0.001);

            lcs_problem_free(problem);
        }
    }

    #[test]
    fn taxed_problems_shift_the_solution() {
        unsafe {
            let problem = aggregate_problem();
            let mut untaxed = [0.0f64; 2];
            assert_eq!(lcs_solve(problem, untaxed.as_mut_ptr(), 2), LcsStatus::Ok);
            assert_eq!(
                lcs_problem_set_interest_tax(problem, 0.5, true),
                LcsStatus::Ok
            );
            let mut taxed = [0.0f64; 2];
            assert_eq!(lcs_solve(problem, taxed.as_mut_ptr(), 2), LcsStatus::Ok);
            assert!(taxed[0] < untaxed[0], "taxed saver consumes less up front");
            lcs_problem_free(problem);
        }
    }

    #[test]
    fn status_codes_cover_the_error_paths() {
        unsafe {
            let incomes = [100.0f64, 100.0];
            let mut handle: *mut LcsProblem = std::ptr::null_mut();
            // Bad sigma.
            assert_eq!(
                lcs_problem_new(0.0, 0.8, 0.0, incomes.as_ptr(), 2, 0.1, &mut handle),
                LcsStatus::InvalidArgument
            );
            // Infeasible: all-zero resources.
            let zeros = [0.0f64, 0.0];
            assert_eq!(
                lcs_problem_new(2.0, 0.8, 0.0, zeros.as_ptr(), 2, 0.1, &mut handle),
                LcsStatus::Infeasible
            );
            // Null pointers.
            assert_eq!(
                lcs_problem_new(2.0, 0.8, 0.0, std::ptr::null(), 2, 0.1, &mut handle),
                LcsStatus::NullArgument
            );
            let mut out = 0.0f64;
            assert_eq!(
                lcs_lifetime_wealth(std::ptr::null(), &mut out),
                LcsStatus::NullArgument
            );
            // Domain error: utility of zero consumption.
            assert_eq!(lcs_utility(0.0, 2.0, &mut out), LcsStatus::DomainError);
            // Buffer too small.
            let problem = aggregate_problem();
            let mut one = [0.0f64; 1];
            assert_eq!(
                lcs_solve(problem, one.as_mut_ptr(), 1),
                LcsStatus::BufferTooSmall
            );
            // Tax rate outside [0, 1].
            assert_eq!(
                lcs_problem_set_interest_tax(problem, 1.5, true),
                LcsStatus::InvalidArgument
            );
            lcs_problem_free(problem);
            // Freeing null is fine.
            lcs_problem_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn scalar_helpers_match_hand_values() {
        unsafe {
            let mut out = 0.0f64;
            assert_eq!(lcs_utility(2.0, 2.0, &mut out), LcsStatus::Ok);
            assert_eq!(out, -0.5);
            assert_eq!(lcs_marginal_utility(100.0, 2.0, &mut out), LcsStatus::Ok);
            assert!((out - 1e-4).abs() < 1e-18);
            assert_eq!(lcs_effective_rate(0.486, 0.5, &mut out), LcsStatus::Ok);
            assert!((out - 0.243).abs() < 1e-15);
            assert_eq!(lcs_effective_rate(0.486, -1.0, &mut out), LcsStatus::Ok);
            assert_eq!(out, 0.486);
        }
    }

    #[test]
    fn status_messages_are_stable_c_strings() {
        for status in [
            LcsStatus::Ok,
            LcsStatus::NullArgument,
            LcsStatus::InvalidArgument,
            LcsStatus::Infeasible,
            LcsStatus::DomainError,
            LcsStatus::BufferTooSmall,
        ] {
            let message = unsafe { CStr::from_ptr(lcs_status_message(status)) };
            assert!(!message.to_str().unwrap().is_empty());
        }
        let version = unsafe { CStr::from_ptr(lcs_version()) };
        assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
