//! Subcommand implementations.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::Utc;
use prism_core::assistant::{read_drafts_jsonl, write_jsonl, ReviewDecision, ReviewQueue};
use prism_core::metrics::{render_report, MetricsReport, RenderOptions};
use prism_core::redaction::leak_audit;
use prism_core::simulator::{compare_arms, synthetic_identity, write_run_dir, Experiment, Policy, Scenario};
use prism_core::vault::{verify_audit_chain, FieldContext, KeyRing, Restoration, RestorationRequest, Role, Vault};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{load_scenario, read, CliConfig};
use crate::error::{invalid, CliError};

pub struct SimulateArgs {
    pub scenario: Option<PathBuf>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub policy: Option<Policy>,
}

pub fn simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = CliConfig::load(args.config.as_deref())?;
    let mut scenario = load_scenario(args.scenario.as_deref())?;
    cfg.apply(&mut scenario);
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(p) = args.policy {
        scenario.policy = p;
    }
    let (rules, rules_source) = cfg.rules(args.rules.as_deref())?;
    let keys = cfg.keys()?;

    let run_one = |s: Scenario, dir: &Path| -> Result<MetricsReport, CliError> {
        s.validate()?;
        // Synthetic runs without configured keys derive them from the seed so
        // that reruns reproduce the same tokens.
        let ring = keys.clone().unwrap_or_else(|| KeyRing::from_seed(s.seed));
        let run = Experiment::with_rules(s, ring, rules.clone())?.run_to_end()?;
        write_run_dir(dir, &run, &rules_source, &RenderOptions::default())?;
        Ok(run.report)
    };

    match args.seeds {
        None => {
            let report = run_one(scenario, &args.out)?;
            let rendered = render_report(&report, &RenderOptions::default());
            write!(out, "{}", rendered.text).map_err(io)?;
            writeln!(out, "run directory: {}", args.out.display()).map_err(io)?;
        }
        Some(seeds) => {
            let reports: Vec<(u64, Result<MetricsReport, CliError>)> = seeds
                .par_iter()
                .map(|&seed| {
                    let dir = args.out.join(format!("seed-{seed:04}"));
                    (seed, run_one(scenario.clone().with_seed(seed), &dir))
                })
                .collect();
            let opts = RenderOptions::default();
            writeln!(out, "seed,{}", prism_core::metrics::csv_header()).map_err(io)?;
            for (seed, r) in reports {
                let report = r?;
                writeln!(out, "{seed},{}", prism_core::metrics::csv_row(&report, &opts)).map_err(io)?;
            }
        }
    }
    Ok(())
}

fn io(e: std::io::Error) -> CliError {
    CliError::Internal(format!("cannot write output: {e}"))
}

fn load_metrics(dir: &Path) -> Result<MetricsReport, CliError> {
    let path = if dir.is_dir() { dir.join("metrics.json") } else { dir.to_path_buf() };
    serde_json::from_str(&read(&path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

pub fn compare(a: &Path, b: &Path, json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let ra = load_metrics(a)?;
    let rb = load_metrics(b)?;
    let (st, ad) = match (ra.arm.as_str(), rb.arm.as_str()) {
        ("static", "adaptive") => (ra, rb),
        ("adaptive", "static") => (rb, ra),
        (x, y) => return Err(invalid(format!("need one static and one adaptive run, got {x} and {y}"))),
    };
    if st.seed != ad.seed {
        writeln!(out, "note: runs use different seeds ({} vs {})", st.seed, ad.seed).map_err(io)?;
    }
    let table = compare_arms(&st, &ad)?;
    if json {
        let text = serde_json::to_string_pretty(&table).map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(out, "{text}").map_err(io)?;
    } else {
        write!(out, "{}", table.render_text(&RenderOptions::default())).map_err(io)?;
    }
    Ok(())
}

/// One input line of `leak-audit`: a bare JSON string or an object carrying
/// the text under `text` or `rendered_text`.
#[derive(Deserialize)]
#[serde(untagged)]
enum Message {
    Bare(String),
    Text { text: String },
    Draft { rendered_text: String },
}

impl Message {
    fn into_text(self) -> String {
        match self {
            Message::Bare(t) | Message::Text { text: t } | Message::Draft { rendered_text: t } => t,
        }
    }
}

pub fn leak_audit_cmd(input: &Path, rules: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let (rules, _) = CliConfig::default().rules(rules)?;
    let file = std::fs::File::open(input).map_err(|e| invalid(format!("cannot read {}: {e}", input.display())))?;
    let mut texts = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| invalid(format!("{}: {e}", input.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        // Parse errors deliberately omit the line content.
        let msg: Message = serde_json::from_str(&line)
            .map_err(|_| invalid(format!("line {} is not a JSON string or text object", i + 1)))?;
        texts.push(msg.into_text());
    }
    let report = leak_audit(&texts, &rules)?;
    let text = serde_json::to_string(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    writeln!(out, "{text}").map_err(io)?;
    if report.n_hits > 0 {
        return Err(CliError::Privacy(format!(
            "{} of {} messages contain residual identifiers",
            report.n_hits, report.n_samples
        )));
    }
    Ok(())
}

pub fn tokenize_demo(
    config: Option<&Path>,
    context: FieldContext,
    values: Vec<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let keys = match CliConfig::load(config)?.keys()? {
        Some(k) => k,
        None => {
            writeln!(err, "note: no keys configured; using fixed demo keys").map_err(io)?;
            KeyRing::from_seed(0)
        }
    };
    let values = if values.is_empty() {
        std::io::stdin()
            .lock()
            .lines()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| invalid(format!("stdin: {e}")))?
    } else {
        values
    };
    let tokenizer = prism_core::vault::Tokenizer::new(keys.tokenization_key().clone());
    for (i, v) in values.iter().enumerate() {
        let tok = tokenizer.tokenize_field(v, context);
        writeln!(out, r#"{{"index":{i},"context":"{context}","token":"{}"}}"#, tok.to_hex()).map_err(io)?;
    }
    Ok(())
}

pub struct RestoreArgs {
    pub config: Option<PathBuf>,
    pub role: Role,
    pub mfa: bool,
    pub purpose: String,
    pub attempts: usize,
    pub audit_out: Option<PathBuf>,
}

/// Registers one synthetic identity and runs restoration requests against it.
/// Prints decisions and the audit trail, never the restored fields.
pub fn restore_demo(args: RestoreArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let keys = match CliConfig::load(args.config.as_deref())?.keys()? {
        Some(k) => k,
        None => {
            writeln!(err, "note: no keys configured; using fixed demo keys").map_err(io)?;
            KeyRing::from_seed(0)
        }
    };
    let vault = Vault::with_rng(keys, StdRng::from_os_rng());
    let now = Utc::now();
    let token = vault.register(&synthetic_identity(0, 0), now)?;
    writeln!(out, "registered synthetic subject {}", token.short()).map_err(io)?;
    for i in 0..args.attempts {
        let req = RestorationRequest {
            requester_id: format!("{}-demo", args.role),
            role: args.role,
            mfa_verified: args.mfa,
            user_token: token.clone(),
            purpose: args.purpose.clone(),
            timestamp: now + chrono::TimeDelta::seconds(i as i64),
        };
        match vault.restore_identity(&req)? {
            Restoration::Granted(fields) => {
                let names: BTreeSet<String> = FieldContext::ALL
                    .into_iter()
                    .filter(|c| fields.get(*c).is_some())
                    .map(|c| c.to_string())
                    .collect();
                let names: Vec<String> = names.into_iter().collect();
                writeln!(out, "attempt {}: granted ({} fields: {})", i + 1, fields.len(), names.join(", "))
                    .map_err(io)?;
            }
            Restoration::Denied(reason) => writeln!(out, "attempt {}: denied ({reason})", i + 1).map_err(io)?,
        }
    }
    let audit = vault.audit_entries();
    let chain = match verify_audit_chain(&audit) {
        Ok(()) => "intact".to_string(),
        Err(b) => format!("broken at entry {}", b.index()),
    };
    writeln!(
        out,
        "audit entries: {} (restoration attempts: {}), chain {chain}",
        audit.len(),
        vault.restoration_attempts()
    )
    .map_err(io)?;
    if let Some(path) = args.audit_out {
        let f = std::fs::File::create(&path).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
        prism_core::vault::write_audit_jsonl(f, &audit).map_err(io)?;
    }
    Ok(())
}

pub struct ReviewArgs {
    pub run: PathBuf,
    pub draft: String,
    pub decision: String,
    pub text: Option<String>,
    pub reviewer: String,
    pub rules: Option<PathBuf>,
}

/// Applies one coach decision to a draft of a finished run.
pub fn review(args: ReviewArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (rules, _) = CliConfig::default().rules(args.rules.as_deref())?;
    let drafts_path = args.run.join("drafts.jsonl");
    let file = std::fs::File::open(&drafts_path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", drafts_path.display())))?;
    let drafts = read_drafts_jsonl(BufReader::new(file))?;
    let decision = match (args.decision.as_str(), args.text) {
        ("approve", None) => ReviewDecision::Approve,
        ("discard", None) => ReviewDecision::Discard,
        ("edit", Some(t)) => ReviewDecision::Edit(t),
        ("edit", None) => return Err(invalid("--decision edit needs --text")),
        ("approve" | "discard", Some(_)) => return Err(invalid("--text is only valid with --decision edit")),
        (other, _) => return Err(invalid(format!("unknown decision {other:?} (approve|edit|discard)"))),
    };
    let queue = ReviewQueue::from_drafts(drafts);
    let event = queue.decide(&args.draft, &args.reviewer, decision, &rules, Utc::now())?;

    let tmp = args.run.join("drafts.jsonl.tmp");
    let f = std::fs::File::create(&tmp).map_err(|e| CliError::Internal(format!("{}: {e}", tmp.display())))?;
    write_jsonl(f, &queue.drafts()).map_err(io)?;
    std::fs::rename(&tmp, &drafts_path).map_err(io)?;
    let log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(args.run.join("review.jsonl"))
        .map_err(io)?;
    write_jsonl(log, std::slice::from_ref(&event)).map_err(io)?;
    writeln!(out, "draft {} -> {:?}", event.draft_id, event.status).map_err(io)?;
    Ok(())
}
