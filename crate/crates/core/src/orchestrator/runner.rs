//! Batch execution with resumable JSONL output.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::baselines::run_method;
use super::infoqa::InfoQaOptions;
use super::mock::ModelProvider;
use super::prompts::PromptSet;
use super::{Method, OrchestratorError, Result, RunRecord};
use crate::benchgen::Sample;
use crate::par::{self, Exec};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    /// Runs executed in this invocation.
    pub attempted: usize,
    pub completed: usize,
    pub failed: usize,
    /// Runs already present in the output file.
    pub skipped: usize,
}

impl RunSummary {
    /// Share of runs (including earlier ones) that completed without error.
    pub fn completion_rate(&self) -> f64 {
        let total = self.attempted + self.skipped;
        if total == 0 {
            1.0
        } else {
            (self.completed + self.skipped) as f64 / total as f64
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OrchestratorError + '_ {
    move |source| OrchestratorError::Io { path: path.display().to_string(), source }
}

/// Reads RunRecords from a JSONL file, returning them with the number of
/// lines that failed to parse.
pub fn load_records(path: &Path) -> Result<(Vec<RunRecord>, usize)> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    let mut malformed = 0;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RunRecord>(&line) {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("{}:{}: skipping malformed record: {e}", path.display(), n + 1);
                malformed += 1;
            }
        }
    }
    Ok((records, malformed))
}

/// Drops a trailing partial line left by an interrupted writer.
fn repair_tail(path: &Path) -> Result<()> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    log::warn!("{}: discarding {} bytes of an incomplete record", path.display(), bytes.len() - keep);
    let file = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
    file.set_len(keep as u64).map_err(io_err(path))
}

/// Runs every (method, sample) pair not yet recorded in `out_path`, with at
/// most `concurrency` runs in flight. Records are appended in job order,
/// one chunk at a time, so an interrupted run resumes without duplicates.
pub fn run_all(
    samples: &[Sample],
    methods: &[Method],
    provider: &dyn ModelProvider,
    prompts: &PromptSet,
    opts: InfoQaOptions,
    concurrency: usize,
    out_path: &Path,
) -> Result<RunSummary> {
    if methods.is_empty() {
        return Err(OrchestratorError::Config("no methods selected".into()));
    }
    if concurrency == 0 {
        return Err(OrchestratorError::Config("concurrency must be at least 1".into()));
    }
    let mut done = HashSet::new();
    if out_path.exists() {
        repair_tail(out_path)?;
        for r in load_records(out_path)?.0 {
            done.insert((r.method, r.sample_id));
        }
    }
    let mut summary = RunSummary::default();
    let mut jobs = Vec::new();
    for &method in methods {
        for sample in samples {
            if done.contains(&(method.label().to_owned(), sample.id.clone())) {
                summary.skipped += 1;
            } else {
                jobs.push((method, sample));
            }
        }
    }

    if let Some(dir) = out_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut out = OpenOptions::new().create(true).append(true).open(out_path).map_err(io_err(out_path))?;

    let chunk = (concurrency * 4).max(1);
    for batch in jobs.chunks(chunk) {
        let records = par::with_pool(concurrency, || {
            par::map_slice(batch, Exec::default(), |&(method, sample)| match provider.model_for(sample) {
                Ok(model) => run_method(method, sample, model.as_ref(), prompts, opts),
                Err(e) => {
                    let mut r = RunRecord::new(method, sample, prompts);
                    r.error = Some(e.to_string());
                    r
                }
            })
        });
        let mut text = String::new();
        for r in &records {
            summary.attempted += 1;
            if r.succeeded() {
                summary.completed += 1;
            } else {
                summary.failed += 1;
                log::warn!("{} on {}: {}", r.method, r.sample_id, r.error.as_deref().unwrap_or(""));
            }
            let line = serde_json::to_string(r).expect("run records serialize");
            text.push_str(&line);
            text.push('\n');
        }
        out.write_all(text.as_bytes()).map_err(io_err(out_path))?;
        out.flush().map_err(io_err(out_path))?;
    }
    Ok(summary)
}
