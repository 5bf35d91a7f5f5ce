use std::path::Path;
use std::process::{Command, Output};
use std::sync::Mutex;

use prism_core::simulator::synthetic_identity;

const TOKEN_KEY: &str = "0f1e2d3c4b5a69788796a5b4c3d2e1f00112233445566778899aabbccddeeff0";
const ENC_KEY: &str = "a1b2c3d4e5f60718293a4b5c6d7e8f90a1b2c3d4e5f60718293a4b5c6d7e8f9a";

/// Everything any test printed, scanned once at the end of `privacy_scan`.
static CAPTURED: Mutex<Vec<String>> = Mutex::new(Vec::new());

fn prism(args: &[&str], cwd: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_prism"))
        .args(args)
        .current_dir(cwd)
        .env("PRISM_TOKEN_KEY", TOKEN_KEY)
        .env("PRISM_ENC_KEY", ENC_KEY)
        .output()
        .expect("binary runs");
    let mut cap = CAPTURED.lock().unwrap();
    cap.push(String::from_utf8_lossy(&out.stdout).into_owned());
    cap.push(String::from_utf8_lossy(&out.stderr).into_owned());
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL: &str = r#"{"name": "small", "n_users": 60, "n_groups": 6, "n_coaches": 2, "capacity_min": 12, "capacity_max": 14}"#;

fn small_run(dir: &Path, seed: u64, policy: &str) -> std::path::PathBuf {
    std::fs::write(dir.join("s.json"), SMALL).unwrap();
    let out_dir = dir.join(format!("run-{policy}-{seed}"));
    let out = prism(
        &[
            "simulate",
            "--scenario",
            "s.json",
            "--seed",
            &seed.to_string(),
            "--policy",
            policy,
            "--out",
            out_dir.to_str().unwrap(),
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    out_dir
}

fn scan_everything(dir: &Path, seeds: &[u64], n_users: usize, texts: &mut Vec<String>) {
    for entry in walk(dir) {
        if let Ok(t) = std::fs::read_to_string(&entry) {
            texts.push(t);
        }
    }
    let mut needles: Vec<String> = vec![TOKEN_KEY.into(), TOKEN_KEY.to_uppercase(), ENC_KEY.into(), ENC_KEY.to_uppercase()];
    for &seed in seeds.iter().chain(&[0]) {
        for i in 0..n_users {
            needles.extend(synthetic_identity(seed, i).values().map(str::to_string));
        }
    }
    for t in texts.iter() {
        for n in &needles {
            assert!(!t.contains(n.as_str()), "secret or identity value found in output");
        }
    }
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap().flatten() {
        let p = e.path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn simulate_writes_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let run = small_run(dir.path(), 7, "adaptive");
    for f in ["manifest.json", "metrics.json", "traces.jsonl", "audit.jsonl"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["policy"], "adaptive");
    assert_eq!(manifest["scenario"]["n_users"], 60);
}

#[test]
fn config_overrides_are_echoed_into_manifest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.json"), SMALL).unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"policy": {"churn_weight": 0.7, "dwell": 3}}"#).unwrap();
    let out = prism(
        &["simulate", "--scenario", "s.json", "--config", "c.json", "--seed", "1", "--out", "r"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scenario"]["policy_config"]["churn_weight"], 0.7);
    assert_eq!(manifest["scenario"]["policy_config"]["dwell"], 3);
    assert_eq!(manifest["rules_source"], "built-in");
}

#[test]
fn seed_ranges_write_one_directory_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.json"), SMALL).unwrap();
    let out = prism(&["simulate", "--scenario", "s.json", "--seeds", "3..5", "--out", "sweep"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("sweep/seed-0003/metrics.json").is_file());
    assert!(dir.path().join("sweep/seed-0004/metrics.json").is_file());
    assert!(!dir.path().join("sweep/seed-0005").exists());
    assert_eq!(stdout(&out).lines().count(), 3);
}

#[test]
fn over_capacity_scenario_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"n_users": 200, "n_groups": 10, "capacity_min": 12, "capacity_max": 15}"#)
        .unwrap();
    let out = prism(&["simulate", "--scenario", "bad.json", "--seed", "1", "--out", "r"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("capacity constraint"), "{}", stderr(&out));
}

#[test]
fn unknown_subcommand_exits_1_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = prism(&["frobnicate"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("Usage"));
}

#[test]
fn bad_policy_flag_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = prism(&["simulate", "--policy", "random", "--out", "r"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn leak_audit_clean_and_dirty() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("clean.jsonl"),
        "\"Great week, keep going!\"\n{\"text\": \"[NAME] checked in 5 times\"}\n",
    )
    .unwrap();
    let out = prism(&["leak-audit", "--in", "clean.jsonl"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(report["leak_rate"], 0.0);
    assert_eq!(report["n_samples"], 2);

    std::fs::write(dir.path().join("dirty.jsonl"), "{\"text\": \"call me at (415) 555-0101\"}\n\"fine\"\n").unwrap();
    let out = prism(&["leak-audit", "--in", "dirty.jsonl"], dir.path());
    assert_eq!(code(&out), 3);
    let report: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(report["leak_rate"], 0.5);
    assert!(!stdout(&out).contains("555-0101"));
    assert!(!stderr(&out).contains("555-0101"));
}

#[test]
fn leak_audit_accepts_custom_rules() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("rules.json"),
        r#"[{"entity_type": "ID_NUMBER", "pattern": "MRN-\\d+", "placeholder": "[ID]"}]"#,
    )
    .unwrap();
    std::fs::write(dir.path().join("m.jsonl"), "\"record MRN-1234\"\n").unwrap();
    let out = prism(&["leak-audit", "--in", "m.jsonl", "--rules", "rules.json"], dir.path());
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn compare_orders_arms_by_label() {
    let dir = tempfile::tempdir().unwrap();
    let st = small_run(dir.path(), 2, "static");
    let ad = small_run(dir.path(), 2, "adaptive");
    let out = prism(&["compare", "--a", ad.to_str().unwrap(), "--b", st.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("Mann-Whitney"));
    let out = prism(&["compare", "--a", st.to_str().unwrap(), "--b", st.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn review_applies_one_decision_per_draft() {
    let dir = tempfile::tempdir().unwrap();
    let run = small_run(dir.path(), 4, "adaptive");
    let drafts = std::fs::read_to_string(run.join("drafts.jsonl")).unwrap();
    let pending: Vec<String> = drafts
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|d| d["status"] == "pending")
        .map(|d| d["draft_id"].as_str().unwrap().to_string())
        .collect();
    assert!(pending.len() >= 2, "last-week drafts stay pending");
    let run_s = run.to_str().unwrap();
    let leaky = prism(
        &["review", "--run", run_s, "--draft", &pending[0], "--decision", "edit", "--text", "reach me at jo@example.org", "--reviewer", "c00"],
        dir.path(),
    );
    assert_eq!(code(&leaky), 3);
    let ok = prism(
        &["review", "--run", run_s, "--draft", &pending[0], "--decision", "edit", "--text", "Nice work this week.", "--reviewer", "c00"],
        dir.path(),
    );
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let again = prism(&["review", "--run", run_s, "--draft", &pending[0], "--decision", "approve", "--reviewer", "c00"], dir.path());
    assert_eq!(code(&again), 1);
    let missing = prism(&["review", "--run", run_s, "--draft", "nope", "--decision", "discard", "--reviewer", "c00"], dir.path());
    assert_eq!(code(&missing), 1);
    let after = std::fs::read_to_string(run.join("drafts.jsonl")).unwrap();
    assert!(after.contains("Nice work this week."));
    assert!(!after.contains("jo@example.org"));
}

#[test]
fn restore_demo_enforces_roles_and_audits() {
    let dir = tempfile::tempdir().unwrap();
    let out = prism(&["restore-demo", "--role", "analyst", "--attempts", "2"], dir.path());
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).matches("denied (role_forbidden)").count(), 2);
    assert!(stdout(&out).contains("audit entries: 2 (restoration attempts: 2), chain intact"));

    let out = prism(&["restore-demo", "--attempts", "11", "--audit-out", "audit.jsonl"], dir.path());
    assert_eq!(stdout(&out).matches("granted").count(), 10);
    assert!(stdout(&out).contains("denied (rate_limited)"));
    assert_eq!(std::fs::read_to_string(dir.path().join("audit.jsonl")).unwrap().lines().count(), 11);

    let out = prism(&["restore-demo", "--no-mfa"], dir.path());
    assert!(stdout(&out).contains("denied (mfa_required)"));
}

#[test]
fn tokenize_demo_normalizes_without_echoing_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = prism(
        &["tokenize-demo", "--context", "phone", "--value", "(415) 555-0199", "--value", "415.555.0199"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let lines: Vec<serde_json::Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["token"], lines[1]["token"]);
    assert!(!stdout(&out).contains("555"));
}

#[test]
fn privacy_scan() {
    let dir = tempfile::tempdir().unwrap();
    let ad = small_run(dir.path(), 9, "adaptive");
    let st = small_run(dir.path(), 9, "static");
    let (ad, st) = (ad.to_str().unwrap(), st.to_str().unwrap());
    prism(&["compare", "--a", st, "--b", ad], dir.path());
    prism(&["compare", "--a", st, "--b", ad, "--json"], dir.path());
    prism(&["leak-audit", "--in", &format!("{ad}/drafts.jsonl")], dir.path());
    prism(&["restore-demo", "--attempts", "3"], dir.path());
    prism(&["restore-demo", "--role", "admin", "--attempts", "12"], dir.path());
    // Identity values passed as input must not be echoed back.
    let id = synthetic_identity(9, 0);
    let mut args = vec!["tokenize-demo", "--context", "name"];
    for v in id.values() {
        args.extend(["--value", v]);
    }
    prism(&args, dir.path());
    let mut texts = CAPTURED.lock().unwrap().clone();
    scan_everything(dir.path(), &[9], 60, &mut texts);
}
