//! Runner behaviour against a live provider stub: per-trial failures are
//! recorded rather than dropped, and the run only aborts when an agent's
//! provider fails every single trial.

use std::io::{Read, Write};
use std::net::TcpListener;

use lifecycle_sim::agent::{
    AuthScheme, BackendKind, Gateway, ParseStatus, ProviderConfig, ScenarioKind, WireShape,
};
use lifecycle_sim::calibration::{AGGREGATE_W0, AGGREGATE_Y1, AGGREGATE_Y2};
use lifecycle_sim::config::{AgentSpec, CalibrationSpec, Config, ExperimentSettings};
use lifecycle_sim::experiment::{run_scenario, ExperimentError, ExperimentPlan};

/// Serve one canned response per accepted connection, then stop.
fn spawn_stub(responses: Vec<(u16, String)>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for (status, body) in responses {
            let Ok((mut stream, _)) = listener.accept() else {
                return;
            };
            let mut buffer = [0u8; 65536];
            let mut request = String::new();
            loop {
                let n = stream.read(&mut buffer).unwrap_or(0);
                if n == 0 {
                    break;
                }
                request.push_str(&String::from_utf8_lossy(&buffer[..n]));
                if let Some(header_end) = request.find("\r\n\r\n") {
                    let content_length = request
                        .lines()
                        .find_map(|line| {
                            line.to_lowercase()
                                .strip_prefix("content-length:")
                                .map(|v| v.trim().parse::<usize>().unwrap())
                        })
                        .unwrap_or(0);
                    if request.len() >= header_end + 4 + content_length {
                        break;
                    }
                }
            }
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    format!("http://{addr}/v1/chat/completions")
}

fn completion(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"content": text}}]}).to_string()
}

fn live_config(endpoint: String, auth_env: &str, trials: u32) -> Config {
    Config {
        assumptions: Default::default(),
        experiment: ExperimentSettings {
            trials_per_agent: trials,
            tax_grid: vec![0.0, 1.0],
            base_seed: 3,
        },
        providers: vec![ProviderConfig {
            name: "stub".into(),
            endpoint,
            wire: WireShape::OpenaiChat,
            auth_env: auth_env.into(),
            auth_header: "Authorization".into(),
            auth_scheme: AuthScheme::Bearer,
            temperature_range: (0.0, 2.0),
            max_retries: 1,
            backoff_ms: 1,
            extra_headers: vec![],
            max_tokens: None,
            max_parallel: 1,
            timeout_secs: 5,
        }],
        agents: vec![AgentSpec {
            model_id: "stub-model".into(),
            provider: Some("stub".into()),
            temperature: 1.0,
            education_group: lifecycle_sim::agent::EducationGroup::College4YrPlus,
            population_share: 1.0,
            persona: None,
            calibration: CalibrationSpec::Fixture {
                w0: AGGREGATE_W0,
                y1: AGGREGATE_Y1,
                y2: AGGREGATE_Y2,
                placeholder: true,
            },
        }],
    }
}

#[test]
fn per_trial_failures_are_recorded_not_dropped() {
    let ok = completion(
        "Final Answer: I will consume 725,661.7 units and 800,055.8 units because balance.",
    );
    let endpoint = spawn_stub(vec![
        (200, ok.clone()),
        (400, "{}".to_string()),
        (200, ok),
    ]);
    let config = live_config(endpoint, "STUB_RUNNER_KEY_MIXED", 3);
    std::env::set_var("STUB_RUNNER_KEY_MIXED", "sk-test");

    let plan =
        ExperimentPlan::from_config(&config, ScenarioKind::GutFeeling, BackendKind::LiveProvider)
            .unwrap();
    let gateway = Gateway::new(config.providers.clone());
    let records = run_scenario(&plan, &gateway, None).unwrap();

    assert_eq!(records.len(), 3);
    let statuses: Vec<ParseStatus> = records.iter().map(|r| r.parse_status).collect();
    assert_eq!(
        statuses,
        vec![ParseStatus::Ok, ParseStatus::InvokeFailed, ParseStatus::Ok]
    );
    let failed = &records[1];
    assert!(failed.invoke_error.as_deref().unwrap_or("").contains("400"));
    assert!(failed.parsed_plan.is_none());
}

#[test]
fn a_provider_failing_every_trial_aborts_the_run() {
    let endpoint = spawn_stub(vec![(401, "{}".to_string()), (401, "{}".to_string())]);
    let config = live_config(endpoint, "STUB_RUNNER_KEY_AUTH", 2);
    std::env::set_var("STUB_RUNNER_KEY_AUTH", "sk-bad");

    let plan =
        ExperimentPlan::from_config(&config, ScenarioKind::GutFeeling, BackendKind::LiveProvider)
            .unwrap();
    let gateway = Gateway::new(config.providers.clone());
    let error = run_scenario(&plan, &gateway, None).unwrap_err();
    assert!(
        matches!(error, ExperimentError::ProviderFailedAllTrials(ref model) if model == "stub-model"),
        "{error}"
    );
}

#[test]
fn out_of_range_temperatures_fail_validation() {
    let endpoint = "http://127.0.0.1:1/unused".to_string();
    let mut config = live_config(endpoint, "STUB_RUNNER_KEY_TEMP", 1);
    config.agents[0].temperature = 3.5;
    let plan =
        ExperimentPlan::from_config(&config, ScenarioKind::GutFeeling, BackendKind::LiveProvider)
            .unwrap();
    let gateway = Gateway::new(config.providers.clone());
    let error = plan.validate(&gateway).unwrap_err();
    assert!(error.to_string().contains("temperature"), "{error}");
}
