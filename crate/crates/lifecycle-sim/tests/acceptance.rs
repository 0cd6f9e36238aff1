//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`; failures always print).
//!
//! Run with: cargo test --test acceptance -- --nocapture

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lifecycle_sim::agent::{
    derive_trial_seed, parse_final_answer, persona::persona_generate, AgentProfile, BackendKind,
    EducationGroup, Gateway, ParseFailure, ParseStatus, PersonaParams, PromptScenario,
    ScenarioKind, TrialRecord,
};
use lifecycle_sim::calibration::{
    period_rate_consistency_check, CalibratedParameters, AGGREGATE_W0, AGGREGATE_Y1, AGGREGATE_Y2,
};
use lifecycle_sim::config::Config;
use lifecycle_sim::experiment::{
    aggregate_population, reference_path, run_scenario, ExperimentPlan, SweepContext,
};
use lifecycle_sim::lifecycle::{
    budget_residual, euler_residual_relative, solve_numeric, solve_two_period, BudgetEnvironment,
    ConsumptionPlan, Preferences, Provenance,
};
use lifecycle_sim::metrics::{
    accuracy, apd, budget_mapd, mapd, var_apd, AccuracyMode,
};

fn criterion(number: &str, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    eprintln!("ACCEPTANCE {number} {name}: {verdict} - {detail}");
    assert!(pass, "acceptance criterion {number} ({name}) failed: {detail}");
}

fn aggregate_exact_env() -> BudgetEnvironment {
    let rate = 1.02f64.powi(20) - 1.0;
    BudgetEnvironment::two_period(AGGREGATE_W0, AGGREGATE_Y1, AGGREGATE_Y2, rate, None).unwrap()
}

fn aggregate_exact_prefs(sigma: f64) -> Preferences {
    Preferences::new(sigma, 0.99f64.powi(20)).unwrap()
}

#[test]
fn criterion_1_oracle_equivalence() {
    let started = Instant::now();
    let draws = 1_000u32;
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce97);
    let mut max_gap = 0.0f64;
    for _ in 0..draws {
        let sigma = rng.random_range(0.25..10.0);
        let beta = rng.random_range(0.5..0.999);
        let rate = rng.random_range(0.0..1.0);
        let w0 = rng.random_range(0.0..1_000_000.0);
        let y1 = rng.random_range(1_000.0..5_000_000.0);
        let y2 = rng.random_range(1_000.0..5_000_000.0);
        let prefs = Preferences::new(sigma, beta).unwrap();
        let env = BudgetEnvironment::two_period(w0, y1, y2, rate, None).unwrap();
        let (c1, _) = solve_two_period(&prefs, &env).unwrap().pair().unwrap();
        let (o1, _) = solve_numeric(&prefs, &env, 10_000).unwrap().pair().unwrap();
        max_gap = max_gap.max((c1 - o1).abs() / o1);
    }
    let elapsed = started.elapsed().as_secs_f64();
    criterion(
        "1",
        "oracle equivalence",
        max_gap < 1e-6 && elapsed < 60.0,
        &format!("{draws} draws, max relative gap {max_gap:.3e} (< 1e-6), runtime {elapsed:.1}s (< 60s)"),
    );
}

#[test]
fn criterion_2_calibration_constants() {
    let rate = period_rate_consistency_check(0.02, 20);
    let rate_display = format!("{:.1}", rate * 100.0);
    let beta20 = 0.99f64.powi(20);
    let beta_display = format!("{beta20:.3}");
    criterion(
        "2",
        "calibration constants",
        rate_display == "48.6" && beta_display == "0.818",
        &format!("(1.02^20 - 1) renders as {rate_display}% and 0.99^20 renders as {beta_display}"),
    );
}

#[test]
fn criterion_3_analytical_plan_properties() {
    // Residuals on the published calibration, exact compounded parameters.
    let prefs = aggregate_exact_prefs(2.0);
    let env = aggregate_exact_env();
    let plan = solve_two_period(&prefs, &env).unwrap();
    let euler = euler_residual_relative(&prefs, &env, &plan).unwrap().abs();
    let budget = budget_residual(&env, &plan).unwrap().abs();

    // Homogeneity and the consumption-growth identity over a random sweep.
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce93);
    let mut max_ratio_gap = 0.0f64;
    let mut max_scale_gap = 0.0f64;
    for _ in 0..300 {
        let sigma = rng.random_range(0.25..10.0);
        let beta = rng.random_range(0.5..0.999);
        let rate = rng.random_range(0.0..1.0);
        let w0 = rng.random_range(0.0..500_000.0);
        let y1 = rng.random_range(1_000.0..2_000_000.0);
        let y2 = rng.random_range(1_000.0..2_000_000.0);
        let lambda = rng.random_range(0.1..10.0);
        let prefs = Preferences::new(sigma, beta).unwrap();
        let env = BudgetEnvironment::two_period(w0, y1, y2, rate, None).unwrap();
        let (c1, c2) = solve_two_period(&prefs, &env).unwrap().pair().unwrap();
        let growth = prefs.consumption_growth(rate);
        max_ratio_gap = max_ratio_gap.max((c2 / c1 - growth).abs() / growth);
        let scaled_env =
            BudgetEnvironment::two_period(lambda * w0, lambda * y1, lambda * y2, rate, None)
                .unwrap();
        let (s1, _) = solve_two_period(&prefs, &scaled_env).unwrap().pair().unwrap();
        max_scale_gap = max_scale_gap.max((s1 - lambda * c1).abs() / (lambda * c1));
    }

    criterion(
        "3",
        "analytical plan properties",
        euler < 1e-9 && budget < 1e-12 && max_ratio_gap < 1e-12 && max_scale_gap < 1e-12,
        &format!(
            "euler {euler:.2e} (< 1e-9), budget {budget:.2e} (< 1e-12), ratio gap {max_ratio_gap:.2e}, homogeneity gap {max_scale_gap:.2e} over 300 draws"
        ),
    );
}

#[test]
fn criterion_4a_sigma2_reference_level() {
    // Wealth-inclusive saving rate of the sigma = 2 reference at tau = 0 on
    // the aggregate calibration fixture, against the quoted "around 28%".
    let prefs = aggregate_exact_prefs(2.0);
    let env = aggregate_exact_env();
    let grid: Vec<f64> = (0..=10).map(|i| f64::from(i) / 10.0).collect();
    let path = reference_path(&prefs, &env, &grid).unwrap();
    let untaxed = path[0].rates.wealth_inclusive;
    // Cross-check the level against the independent grid oracle before
    // judging it.
    let (oracle_c1, _) = solve_numeric(&prefs, &env, 1_000_000).unwrap().pair().unwrap();
    let oracle_rate = 1.0 - oracle_c1 / (AGGREGATE_W0 + AGGREGATE_Y1);
    assert!(
        (untaxed - oracle_rate).abs() < 1e-6,
        "reference path disagrees with the oracle"
    );
    criterion(
        "4a",
        "sigma=2 untaxed saving rate near 0.28",
        (untaxed - 0.28).abs() <= 0.03,
        &format!(
            "measured {untaxed:.4} (oracle-confirmed) on the aggregate calibration fixture; \
             target 0.28 +/- 0.03. The fixture values (w0=141,598.4, y1=958,189.8, \
             y2=244,103.9, beta=0.99^20, r=1.02^20-1, sigma=2) analytically give 0.3402, \
             so the quoted 28% level is not reproducible from the published numbers"
        ),
    );
}

#[test]
fn criterion_4b_sigma05_reference_monotone_decline() {
    let prefs = aggregate_exact_prefs(0.5);
    let env = aggregate_exact_env();
    let grid: Vec<f64> = (0..=10).map(|i| f64::from(i) / 10.0).collect();
    let path = reference_path(&prefs, &env, &grid).unwrap();
    let strictly_declining = path
        .windows(2)
        .all(|pair| pair[1].rates.wealth_inclusive < pair[0].rates.wealth_inclusive);
    criterion(
        "4b",
        "sigma=0.5 reference strictly declines",
        strictly_declining && path.len() == 11,
        &format!(
            "11-point grid, rate falls from {:.4} to {:.4}",
            path[0].rates.wealth_inclusive,
            path[10].rates.wealth_inclusive
        ),
    );
}

#[test]
fn criterion_5_metric_oracle_and_persona_calibration() {
    let env =
        BudgetEnvironment::two_period(AGGREGATE_W0, AGGREGATE_Y1, AGGREGATE_Y2, 0.486, None)
            .unwrap();
    let prefs = Preferences::new(2.0, 0.818).unwrap();
    let optimum = solve_two_period(&prefs, &env).unwrap();
    let (o1, o2) = optimum.pair().unwrap();
    let plan = |c1: f64, c2: f64| {
        ConsumptionPlan::two_period(c1, c2, Provenance::AgentParsed).unwrap()
    };

    // Hand-computed wealth, independent of the library's budget arithmetic.
    let wealth = AGGREGATE_W0 + AGGREGATE_Y1 + AGGREGATE_Y2 / 1.486;

    // Set A: sixteen trials exactly at the optimum.
    let all_optimal = vec![optimum.clone(); 16];
    let acc_a = accuracy(&all_optimal, &optimum, 0.05, AccuracyMode::PerTrialJoint).unwrap();
    let mapd_a = mapd(&all_optimal, &optimum).unwrap();
    let var_a = var_apd(&all_optimal, &optimum).unwrap();
    let budget_a = budget_mapd(&all_optimal, &env).unwrap();
    let set_a_ok = acc_a == 1.0 && mapd_a == 0.0 && var_a == 0.0 && budget_a < 1e-12;

    // Set B: the optimum plus one (+10% c1, -10% c2) deviation.
    // Hand values: APDs {0%, 10%} so MAPD = 0.05 and the sample variance in
    // percentage points is ((0-5)^2 + (10-5)^2)/1 = 50. The deviating trial
    // misses the budget by 0.1*(2*c1* - W)/W.
    let set_b = vec![optimum.clone(), plan(1.10 * o1, 0.90 * o2)];
    let acc_b = accuracy(&set_b, &optimum, 0.05, AccuracyMode::PerTrialJoint).unwrap();
    let mapd_b = mapd(&set_b, &optimum).unwrap();
    let var_b = var_apd(&set_b, &optimum).unwrap();
    let budget_b = budget_mapd(&set_b, &env).unwrap();
    let hand_budget_b = (0.1 * (2.0 * o1 - wealth) / wealth).abs() / 2.0;
    let set_b_ok = acc_b == 0.5
        && (mapd_b - 0.05).abs() < 1e-12
        && (var_b - 50.0).abs() < 1e-9
        && (budget_b - hand_budget_b).abs() < 1e-12;

    // Set C: symmetric +5% / -5% scalings of the whole plan; the budget gaps
    // must not cancel. Accuracy is checked off the knife edge with +/-4%
    // (all within) and +/-6% (none within) scalings, since a deviation of
    // exactly the tolerance is floating-point fragile by construction.
    let set_c = vec![plan(1.05 * o1, 1.05 * o2), plan(0.95 * o1, 0.95 * o2)];
    let mapd_c = mapd(&set_c, &optimum).unwrap();
    let var_c = var_apd(&set_c, &optimum).unwrap();
    let budget_c = budget_mapd(&set_c, &env).unwrap();
    let inside = vec![plan(1.04 * o1, 1.04 * o2), plan(0.96 * o1, 0.96 * o2)];
    let outside = vec![plan(1.06 * o1, 1.06 * o2), plan(0.94 * o1, 0.94 * o2)];
    let acc_c = accuracy(&inside, &optimum, 0.05, AccuracyMode::PerTrialJoint).unwrap();
    let acc_c_out = accuracy(&outside, &optimum, 0.05, AccuracyMode::PerTrialJoint).unwrap();
    let set_c_ok = acc_c == 1.0
        && acc_c_out == 0.0
        && (mapd_c - 0.05).abs() < 1e-12
        && var_c.abs() < 1e-9
        && (budget_c - 0.05).abs() < 1e-12;

    // Persona calibrated to a 1.94% MAPD target, sampled over 10^4 trials.
    let calibration = CalibratedParameters::aggregate_fixture("college_4yr_plus");
    let scenario =
        PromptScenario::from_calibration(ScenarioKind::WithUtility, &calibration, None).unwrap();
    let scenario_optimum = scenario.optimum(2.0, 0.818).unwrap();
    let base = PersonaParams::for_mapd_target(0.0194, &prefs, &env).unwrap();
    let mut total_apd = 0.0;
    let trials = 10_000u32;
    for index in 0..trials {
        let agent = AgentProfile {
            model_id: "deepseek-v3".into(),
            backend: BackendKind::Persona,
            provider: None,
            temperature: 1.0,
            education_group: EducationGroup::College4YrPlus,
            population_share: 1.0,
            persona: Some(PersonaParams {
                seed: derive_trial_seed(5150, "deepseek-v3", ScenarioKind::WithUtility, None, index),
                ..base
            }),
        };
        let text = persona_generate(&agent, &scenario, &scenario_optimum).unwrap();
        let (c1, c2) = parse_final_answer(&text).unwrap();
        let parsed = plan(c1, c2);
        total_apd += apd(&parsed, &scenario_optimum).unwrap();
    }
    let sample_mapd = total_apd / f64::from(trials);
    let persona_ok = (sample_mapd - 0.0194).abs() <= 0.005;

    criterion(
        "5",
        "metric oracle and persona calibration",
        set_a_ok && set_b_ok && set_c_ok && persona_ok,
        &format!(
            "all-optimal ({acc_a}, {mapd_a}, {var_a}, {budget_a:.1e}); single deviation \
             (acc {acc_b}, mapd {mapd_b:.4}, var {var_b:.4}, budget {budget_b:.6} vs hand {hand_budget_b:.6}); \
             mixed +/-5% (mapd {mapd_c:.4}, var {var_c:.1e}, budget {budget_c:.4}; acc within/outside {acc_c}/{acc_c_out}); \
             persona MAPD {sample_mapd:.4} vs target 0.0194 +/- 0.005 over {trials} trials"
        ),
    );
}

fn persona_plan(scenario: ScenarioKind, trials: u32, seed: u64) -> ExperimentPlan {
    let mut config = Config::default_panel();
    config.experiment.trials_per_agent = trials;
    config.experiment.base_seed = seed;
    ExperimentPlan::from_config(&config, scenario, BackendKind::Persona).unwrap()
}

#[test]
fn criterion_6_protocol_cardinality_and_determinism() {
    let gateway = Gateway::default();

    let plan_a = persona_plan(ScenarioKind::WithUtility, 16, 7);
    let records_a = run_scenario(&plan_a, &gateway, None).unwrap();
    let ok_a = records_a
        .iter()
        .filter(|r| r.parse_status == ParseStatus::Ok)
        .count();

    let sweep_plan = persona_plan(ScenarioKind::TaxPolicy, 16, 7);
    let sweep_records = run_scenario(&sweep_plan, &gateway, None).unwrap();

    let rerun: Vec<String> = run_scenario(&sweep_plan, &gateway, None)
        .unwrap()
        .iter()
        .map(TrialRecord::fingerprint)
        .collect();
    let first: Vec<String> = sweep_records.iter().map(TrialRecord::fingerprint).collect();

    criterion(
        "6",
        "protocol cardinality and determinism",
        records_a.len() == 80 && ok_a == 80 && sweep_records.len() == 880 && first == rerun,
        &format!(
            "scenario A: {} records ({} ok-parsed, need 80); sweep: {} records (need 880); \
             same-seed rerun identical: {}",
            records_a.len(),
            ok_a,
            sweep_records.len(),
            first == rerun
        ),
    );
}

#[test]
fn criterion_7_population_aggregation() {
    let shares: Vec<f64> = Config::default_panel()
        .agents
        .iter()
        .map(|a| a.population_share)
        .collect();
    let sum: f64 = shares.iter().sum();
    let exact = sum == 1.0 && format!("{sum:.2}") == "1.00";

    let plan = persona_plan(ScenarioKind::TaxPolicy, 4, 11);
    let records = run_scenario(&plan, &Gateway::default(), None).unwrap();
    let context = SweepContext::from_plan(&plan).unwrap();
    let sweep = aggregate_population(&records, &context).unwrap();
    let bounded = sweep.aggregate.iter().all(|point| {
        point.rate.wealth_inclusive >= point.group_min - 1e-12
            && point.rate.wealth_inclusive <= point.group_max + 1e-12
    });

    criterion(
        "7",
        "population aggregation",
        exact && bounded && sweep.aggregate.len() == 11,
        &format!(
            "shares sum to {sum} (renders {sum:.2}); aggregate bounded by group extremes at all {} tax points",
            sweep.aggregate.len()
        ),
    );
}

#[test]
fn criterion_8_parser_robustness_corpus() {
    use ParseFailure::{MalformedNumbers, NoFinalAnswer};
    type Expected = Result<(f64, f64), ParseFailure>;

    // Hand-labelled corpus of response variants.
    let corpus: Vec<(&str, Expected)> = vec![
        (
            "Final Answer: I will choose to consume 725,635 units during my working period and 800,088 units during my retirement period because I want balance.",
            Ok((725_635.0, 800_088.0)),
        ),
        ("final answer: consume 500000.5 then 600000", Ok((500_000.5, 600_000.0))),
        ("Final Answer: 725,661.7 and 800,055.8 units", Ok((725_661.7, 800_055.8))),
        (
            "Final Answer: 1 and 2. Hmm, wait. Final Answer: consume 700,000 and 850,000",
            Ok((700_000.0, 850_000.0)),
        ),
        ("so my Final Answer: I consume 600,000 units now and 700,000 later", Ok((600_000.0, 700_000.0))),
        ("FINAL ANSWER: 123,456 / 789,012", Ok((123_456.0, 789_012.0))),
        (
            "Final Answer: with the 48.6% rate I pick 650,000 and 750,000",
            Ok((650_000.0, 750_000.0)),
        ),
        ("Final Answer: c1 = 725,635 and c2 = 800,088", Ok((725_635.0, 800_088.0))),
        ("Final Answer:\nworking: 111,111\nretirement: 222,222", Ok((111_111.0, 222_222.0))),
        (
            "Final Answer: 500,000 and 600,000, leaving 100,000 unspent",
            Ok((500_000.0, 600_000.0)),
        ),
        ("Final Answer: I will consume 1,000,000 units then 200,000", Ok((1_000_000.0, 200_000.0))),
        ("Final Answer: 0 and 1,343,892", Ok((0.0, 1_343_892.0))),
        (
            "Final Answer: consume 725,000 units (working) and 800,000 units (retirement)",
            Ok((725_000.0, 800_000.0)),
        ),
        ("Final Answer: 1,234,567.8 and 2,000,000", Ok((1_234_567.8, 2_000_000.0))),
        ("fInAl AnSwEr: 10,000 and 20,000", Ok((10_000.0, 20_000.0))),
        ("Final Answer I choose 300,000 and 400,000", Ok((300_000.0, 400_000.0))),
        ("Final answer: 725661.74 then 800055.81", Ok((725_661.74, 800_055.81))),
        (
            "Final Answer: approximately 725,000, and roughly 800,000.",
            Ok((725_000.0, 800_000.0)),
        ),
        ("Final Answer: 12,34", Ok((12.0, 34.0))),
        (
            "Final Answer: consume 725635 in period one, 800088 in period two",
            Ok((725_635.0, 800_088.0)),
        ),
        // No marker at all.
        ("I think saving is wise.", Err(NoFinalAnswer)),
        ("", Err(NoFinalAnswer)),
        ("The final amount is 700,000 and 800,000", Err(NoFinalAnswer)),
        ("Answer: 1 and 2", Err(NoFinalAnswer)),
        (
            "Given the high rate I would save a lot, maybe most of my income.",
            Err(NoFinalAnswer),
        ),
        // Marker present but numbers unusable.
        ("Final Answer: I will choose to consume 725,635 units.", Err(MalformedNumbers)),
        (
            "Final Answer: between 700,000 and 750,000 units, then 500,000",
            Err(MalformedNumbers),
        ),
        ("Final Answer: 700,000 - 750,000", Err(MalformedNumbers)),
        ("Final Answer: 700,000 ~ 750,000 units", Err(MalformedNumbers)),
        ("Final Answer: 700,000 to 750,000 units", Err(MalformedNumbers)),
        ("Final Answer: I cannot decide.", Err(MalformedNumbers)),
        ("Final Answer: consume -100 and 200", Err(MalformedNumbers)),
        ("Final Answer: about 48.6% and 30%", Err(MalformedNumbers)),
        ("Final Answer: c1 and c2 as computed above", Err(MalformedNumbers)),
    ];

    assert!(corpus.len() >= 30, "corpus must hold at least 30 variants");
    let mut disagreements = Vec::new();
    for (text, expected) in &corpus {
        let got = parse_final_answer(text);
        if got != *expected {
            disagreements.push(format!("{text:?}: got {got:?}, expected {expected:?}"));
        }
    }
    criterion(
        "8",
        "parser robustness",
        disagreements.is_empty(),
        &format!(
            "{} hand-labelled variants, {} disagreement(s){}",
            corpus.len(),
            disagreements.len(),
            if disagreements.is_empty() {
                String::new()
            } else {
                format!(": {}", disagreements.join("; "))
            }
        ),
    );
}

#[test]
fn criterion_9_end_to_end_desk_run() {
    let binary = env!("CARGO_BIN_EXE_lifecycle-sim");
    let root = std::env::temp_dir().join(format!("lcs-acceptance-e2e-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).unwrap();
    let sweep_dir = root.join("sweep");
    let report_dir = root.join("report");

    let started = Instant::now();
    let run = |args: &[&str]| -> (bool, String) {
        let output = Command::new(binary).args(args).output().unwrap();
        (
            output.status.success(),
            String::from_utf8_lossy(&output.stderr).to_string(),
        )
    };

    let (cal_ok, cal_err) = run(&["calibrate", "--out", root.join("cal").to_str().unwrap()]);
    let (sweep_ok, sweep_err) = run(&[
        "sweep-tax",
        "--mode",
        "persona",
        "--seed",
        "7",
        "--out",
        sweep_dir.to_str().unwrap(),
    ]);
    let (eval_ok, eval_err) = run(&["evaluate", "--run", sweep_dir.to_str().unwrap()]);
    let (report_ok, report_err) = run(&[
        "report",
        "--run",
        sweep_dir.to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
    ]);
    let elapsed = started.elapsed().as_secs_f64();

    let exists = |suffix: &str| -> bool {
        report_dir.join(suffix).exists()
    };
    let has_scatter = std::fs::read_dir(&report_dir)
        .map(|entries| {
            entries
                .flatten()
                .any(|e| e.file_name().to_string_lossy().starts_with("scatter_"))
        })
        .unwrap_or(false);
    let figures_ok = has_scatter
        && exists("distribution_box_tax-policy.csv")
        && exists("saving_rate_curves.csv")
        && exists("saving_rate_curves_wealth_inclusive.svg")
        && exists("metrics_table.txt");

    criterion(
        "9",
        "end-to-end desk-scale run",
        cal_ok && sweep_ok && eval_ok && report_ok && figures_ok && elapsed < 300.0,
        &format!(
            "calibrate/sweep/evaluate/report ok: {}/{}/{}/{}; all three figure kinds plus \
             metric table emitted: {figures_ok}; total {elapsed:.1}s (< 300s){}",
            cal_ok,
            sweep_ok,
            eval_ok,
            report_ok,
            if cal_ok && sweep_ok && eval_ok && report_ok {
                String::new()
            } else {
                format!("; stderr: {cal_err}{sweep_err}{eval_err}{report_err}")
            }
        ),
    );
    let _ = std::fs::remove_dir_all(&root);
}
