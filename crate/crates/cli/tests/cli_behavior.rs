//! Behavior of the installed binary: exit codes, determinism, file
//! round trips, and cross-command coherence.

use std::path::Path;
use std::process::{Command, Output};

fn qpkc() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qpkc"));
    cmd.env_remove("QPKC_SEED");
    cmd
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn line_value<'a>(stdout: &'a str, key: &str) -> &'a str {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no `{key}` line in:\n{stdout}"))
        .trim()
}

#[test]
fn selftest_passes() {
    let out = qpkc().arg("selftest").output().unwrap();
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!(text.lines().count() >= 8);
    for line in text.lines() {
        assert!(line.starts_with("ok "), "unexpected line: {line}");
    }
}

#[test]
fn keygen_writes_loadable_stable_key_files() {
    let dir = tempfile::tempdir().unwrap();
    let public = dir.path().join("pk.json");
    let private = dir.path().join("sk.json");
    let run = |dir: &Path| {
        let out = qpkc()
            .args(["keygen", "--n", "5", "--seed", "41"])
            .arg("--public")
            .arg(dir.join("pk.json"))
            .arg("--private")
            .arg(dir.join("sk.json"))
            .output()
            .unwrap();
        assert!(out.status.success());
    };
    run(dir.path());
    let pk_text = std::fs::read_to_string(&public).unwrap();
    let sk_text = std::fs::read_to_string(&private).unwrap();

    let pk = qpkc_core::PublicKey::from_json(&pk_text).unwrap();
    let sk = qpkc_core::PrivateKey::from_json(&sk_text).unwrap();
    assert_eq!(pk.n(), 5);
    assert_eq!(sk.n(), 5);

    // Same seed rewrites the same bytes.
    let dir2 = tempfile::tempdir().unwrap();
    run(dir2.path());
    assert_eq!(
        std::fs::read(&public).unwrap(),
        std::fs::read(dir2.path().join("pk.json")).unwrap()
    );
    assert_eq!(
        std::fs::read(&private).unwrap(),
        std::fs::read(dir2.path().join("sk.json")).unwrap()
    );
}

#[test]
fn run_stdout_is_deterministic_and_seed_sensitive() {
    let args = [
        "run", "--n", "8", "--m", "2048", "--threshold", "2.2", "--format", "json",
    ];
    let a = qpkc().args(args).args(["--seed", "5"]).output().unwrap();
    let b = qpkc().args(args).args(["--seed", "5"]).output().unwrap();
    let c = qpkc().args(args).args(["--seed", "6"]).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "same seed must reproduce stdout bytes");
    assert_ne!(a.stdout, c.stdout, "different seeds must differ");
}

#[test]
fn env_seed_overrides_the_flag() {
    let args = [
        "run", "--n", "8", "--m", "2048", "--threshold", "2.2", "--format", "json",
    ];
    let flag = qpkc().args(args).args(["--seed", "5"]).output().unwrap();
    let env = qpkc()
        .args(args)
        .args(["--seed", "9000"])
        .env("QPKC_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(flag.stdout, env.stdout);

    let bad = qpkc()
        .args(args)
        .env("QPKC_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn encrypt_then_decrypt_recovers_the_message() {
    let dir = tempfile::tempdir().unwrap();
    let ct = dir.path().join("ct.json");
    let sess = dir.path().join("sess.json");
    let out = qpkc()
        .args([
            "encrypt", "--n", "8", "--m", "2048", "--threshold", "2.2", "--seed", "5",
            "--message", "0110100111",
        ])
        .arg("--ciphertext")
        .arg(&ct)
        .arg("--session-file")
        .arg(&sess)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = qpkc()
        .arg("decrypt")
        .arg("--session-file")
        .arg(&sess)
        .arg("--ciphertext")
        .arg(&ct)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(line_value(&stdout_of(&out), "plaintext:"), "0110100111");
}

#[test]
fn decrypt_agrees_with_a_run_of_the_same_seed() {
    // encrypt+decrypt is run_session factored into two processes; the
    // decrypted bits must match what `run` reports for the same seed.
    let dir = tempfile::tempdir().unwrap();
    let ct = dir.path().join("ct.json");
    let sess = dir.path().join("sess.json");
    let message = "110010";
    assert!(qpkc()
        .args([
            "encrypt", "--n", "6", "--m", "2048", "--threshold", "2.2", "--seed", "77",
            "--message", message,
        ])
        .arg("--ciphertext")
        .arg(&ct)
        .arg("--session-file")
        .arg(&sess)
        .output()
        .unwrap()
        .status
        .success());

    let run_out = qpkc()
        .args([
            "run", "--n", "6", "--m", "2048", "--threshold", "2.2", "--seed", "77",
            "--message", message, "--format", "json",
        ])
        .output()
        .unwrap();
    assert!(run_out.status.success());
    let transcript: serde_json::Value = serde_json::from_slice(&run_out.stdout).unwrap();
    assert_eq!(transcript["outcome"], "completed");
    let decrypted: Vec<u8> = transcript["decrypted_bits"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as u8)
        .collect();

    let dec_out = qpkc()
        .arg("decrypt")
        .arg("--session-file")
        .arg(&sess)
        .arg("--ciphertext")
        .arg(&ct)
        .output()
        .unwrap();
    let text = stdout_of(&dec_out);
    let got = line_value(&text, "plaintext:");
    let want: String = decrypted.iter().map(|&b| char::from(b'0' + b)).collect();
    assert_eq!(got, want);
    assert_eq!(got, message, "honest sessions recover the plaintext");
}

#[test]
fn full_interception_aborts_with_exit_code_2() {
    let out = qpkc()
        .args([
            "run", "--n", "8", "--m", "2000", "--seed", "3", "--eve",
            "intercept-resend-fixed", "--coverage", "1.0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = stdout_of(&out);
    assert_eq!(line_value(&text, "outcome:"), "aborted");
    assert_eq!(line_value(&text, "check:").split("verdict=").nth(1), Some("eavesdropped"));
}

#[test]
fn passive_strategies_are_rejected_by_run() {
    for strategy in ["channel-guess", "ciphertext-distinguish"] {
        let out = qpkc()
            .args(["run", "--n", "4", "--eve", strategy])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(1), "{strategy}");
    }
}

#[test]
fn attack_reports_parse_and_match_theory() {
    let out = qpkc()
        .args([
            "attack", "--strategy", "channel-guess", "--trials", "40000", "--seed", "9",
            "--format", "json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["kind"], "attack-report");
    assert_eq!(report["theory_value"].as_f64().unwrap(), 0.125);
    let rate = report["success_rate"].as_f64().unwrap();
    assert!((0.11..=0.14).contains(&rate), "rate {rate}");

    let serial = qpkc()
        .args([
            "attack", "--strategy", "intercept-resend-random", "--n", "8", "--m", "600",
            "--trials", "10", "--seed", "4", "--format", "json",
        ])
        .output()
        .unwrap();
    let parallel = qpkc()
        .args([
            "attack", "--strategy", "intercept-resend-random", "--n", "8", "--m", "600",
            "--trials", "10", "--seed", "4", "--parallel", "4", "--format", "json",
        ])
        .output()
        .unwrap();
    assert_eq!(serial.stdout, parallel.stdout);
}

#[test]
fn malformed_inputs_exit_with_code_1() {
    // Bad message alphabet.
    let out = qpkc()
        .args(["run", "--n", "4", "--message", "0120"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Unknown flag.
    let out = qpkc().args(["run", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Fraction out of range.
    let out = qpkc()
        .args(["run", "--n", "4", "--fraction", "1.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Corrupt ciphertext file.
    let dir = tempfile::tempdir().unwrap();
    let ct = dir.path().join("ct.json");
    let sess = dir.path().join("sess.json");
    assert!(qpkc()
        .args([
            "encrypt", "--n", "4", "--m", "2048", "--threshold", "2.2", "--seed", "5",
            "--message", "1011",
        ])
        .arg("--ciphertext")
        .arg(&ct)
        .arg("--session-file")
        .arg(&sess)
        .output()
        .unwrap()
        .status
        .success());
    let mut text = std::fs::read_to_string(&ct).unwrap();
    text = text.replacen("\"version\": 1", "\"version\": 99", 1);
    std::fs::write(&ct, text).unwrap();
    let out = qpkc()
        .arg("decrypt")
        .arg("--session-file")
        .arg(&sess)
        .arg("--ciphertext")
        .arg(&ct)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn timings_stay_on_stderr() {
    let out = qpkc()
        .args([
            "run", "--n", "4", "--m", "2048", "--threshold", "2.2", "--seed", "5",
            "--format", "json",
        ])
        .output()
        .unwrap();
    let stdout = stdout_of(&out);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(!stdout.contains("timing:"));
    assert!(stderr.contains("timing:"));
}
