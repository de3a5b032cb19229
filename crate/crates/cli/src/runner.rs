//! Runs a scenario and persists its reports.
//!
//! A run directory holds the CSV tables, `config.json`, `summary.json` and
//! `manifest.json`; wall-clock timestamps are confined to the `run.log`
//! sidecar so reruns stay byte-identical.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::manifest::emit_manifest;
use crate::report::Outcome;
use crate::scenarios::{RunError, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

pub struct CompletedRun {
    pub outcome: Outcome,
    pub dir: PathBuf,
}

/// Execute a scenario and write every report under `out_root/<name>`.
pub fn run_to_dir(
    scenario: &Scenario,
    jobs: usize,
    out_root: &Path,
) -> Result<CompletedRun, RunnerError> {
    let started = Instant::now();
    let outcome = scenario.run(jobs)?;
    let dir = out_root.join(scenario.name());
    fs::create_dir_all(&dir)?;
    for table in &outcome.tables {
        fs::write(dir.join(&table.name), table.to_csv())?;
    }
    for (name, contents) in &outcome.files {
        fs::write(dir.join(name), contents)?;
    }
    let config_json = serde_json::to_string_pretty(scenario).expect("scenario serializes");
    fs::write(dir.join("config.json"), &config_json)?;
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&outcome.summary()).expect("summary serializes"),
    )?;
    emit_manifest(&dir, scenario.name(), &config_json, &outcome.seeds)?;
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    fs::write(
        dir.join("run.log"),
        format!(
            "scenario={} finished_unix={} elapsed_ms={} jobs={}\n",
            scenario.name(),
            unix,
            started.elapsed().as_millis(),
            jobs
        ),
    )?;
    Ok(CompletedRun { outcome, dir })
}
