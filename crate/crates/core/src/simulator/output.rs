//! Run directory layout.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{RunOutput, RunStats};
use super::{Scenario, SimError};
use crate::assignment::write_traces_jsonl;
use crate::assistant::write_jsonl;
use crate::features::EngagementWeights;
use crate::metrics::{render_report, RenderOptions};
use crate::vault::write_audit_jsonl;

pub const OUTPUT_FILES: [&str; 11] = [
    "manifest.json",
    "metrics.json",
    "metrics.csv",
    "metrics.txt",
    "stats.json",
    "traces.jsonl",
    "audit.jsonl",
    "drafts.jsonl",
    "review.jsonl",
    "deliveries.jsonl",
    "vault.json",
];

/// What is needed to reproduce a run. Holds no wallclock time and no key
/// material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub seed: u64,
    pub policy: String,
    pub key_version: u32,
    pub rules_source: String,
    pub engagement_weights: EngagementWeights,
    pub scenario: Scenario,
    pub outputs: Vec<String>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, SimError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), SimError> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| SimError::Internal(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), SimError> {
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

/// Writes every artifact of `run` into `dir`, creating it if needed.
pub fn write_run_dir(
    dir: &Path,
    run: &RunOutput,
    rules_source: &str,
    opts: &RenderOptions,
) -> Result<RunManifest, SimError> {
    std::fs::create_dir_all(dir)?;
    let rendered = render_report(&run.report, opts);
    write_text(dir, "metrics.json", &rendered.json)?;
    write_text(dir, "metrics.csv", &rendered.csv)?;
    write_text(dir, "metrics.txt", &rendered.text)?;
    write_json::<RunStats>(dir, "stats.json", &run.stats)?;

    let mut w = create(dir, "traces.jsonl")?;
    write_traces_jsonl(&mut w, &run.traces)?;
    w.flush()?;
    let mut w = create(dir, "audit.jsonl")?;
    write_audit_jsonl(&mut w, &run.audit)?;
    w.flush()?;
    let mut w = create(dir, "drafts.jsonl")?;
    write_jsonl(&mut w, &run.drafts)?;
    w.flush()?;
    let mut w = create(dir, "review.jsonl")?;
    write_jsonl(&mut w, &run.review_events)?;
    w.flush()?;
    let mut w = create(dir, "deliveries.jsonl")?;
    write_jsonl(&mut w, &run.deliveries)?;
    w.flush()?;
    run.vault.save(&dir.join("vault.json"))?;

    let manifest = RunManifest {
        code_version: env!("CARGO_PKG_VERSION").into(),
        seed: run.scenario.seed,
        policy: run.scenario.policy.as_str().into(),
        key_version: run.vault.key_version(),
        rules_source: rules_source.into(),
        engagement_weights: run.engagement_weights.clone(),
        scenario: run.scenario.clone(),
        outputs: OUTPUT_FILES.iter().map(|s| s.to_string()).collect(),
    };
    write_json(dir, "manifest.json", &manifest)?;
    Ok(manifest)
}
