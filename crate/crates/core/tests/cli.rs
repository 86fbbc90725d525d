mod common;

use std::io::Write;
use std::process::{Command, Output};

fn iotchat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iotchat"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn replay_passes_the_shipped_transcripts() {
    for name in ["a", "b", "c", "d", "e"] {
        let out = iotchat(&[
            "replay",
            &common::transcript_path(&format!("usecase_{name}.txt")),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
        assert!(stdout(&out).starts_with("ok"));
    }
}

#[test]
fn replay_reports_the_first_mismatch() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "U: How much is my car charged?\nB: The car is full.").unwrap();
    let out = iotchat(&["replay", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(
        text.starts_with("FAIL") && text.contains("line 2"),
        "{text}"
    );
}

#[test]
fn bad_inputs_exit_with_usage_errors() {
    let mut config = tempfile::NamedTempFile::new().unwrap();
    write!(config, "{{\"not_a_field\": 1}}").unwrap();
    let path = config.path().to_str().unwrap();
    assert_eq!(iotchat(&["seed", "--config", path]).status.code(), Some(2));
    assert_eq!(
        iotchat(&["replay", "/nonexistent/transcript.txt"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn entities_prints_one_json_object_per_entity() {
    let out = iotchat(&["entities", "turn on the heating in the kitchen for $15"]);
    let lines: Vec<&str> = std::str::from_utf8(&out.stdout).unwrap().lines().collect();
    assert_eq!(
        lines,
        [
            r#"{"type":"iot","device":"Thermostat"}"#,
            r#"{"type":"location","location":"kitchen"}"#,
            r#"{"type":"money","amount":15,"currency":"dollars"}"#,
        ]
    );
}

#[test]
fn seed_and_parse_describe_the_fleet_and_a_parse() {
    let seed = stdout(&iotchat(&["seed"]));
    assert!(seed.contains("LK-4001"));
    let parse: serde_json::Value =
        serde_json::from_slice(&iotchat(&["parse", "lock the door"]).stdout).unwrap();
    assert_eq!(parse["result"]["action_name"], "smartHome.lock");
}
