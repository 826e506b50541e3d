//! Iterative decomposition, answering and query contraction.
//!
//! Only the contracted query travels between steps. Raw model outputs are
//! reduced to their extracted answer before anything else sees them, unless
//! the run deliberately keeps a transcript (the no-pruning ablation).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::endpoint::{ChatModel, ChatRequest};
use super::mock::{SUB_QUESTION_MARKER, TERMINAL_MARKER};
use super::prompts::PromptSet;
use super::{CallRecord, Method, OrchestratorError, Result, RunRecord, StepOutcome};
use crate::benchgen::{Sample, TokenCounter};
use crate::scoring::{extract_answer, find_marker, normalize_answer};

/// Size of the context digest given to the decomposition step, in tokens.
pub const DIGEST_TOKENS: u64 = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryState {
    pub step: usize,
    pub query: String,
    pub finding: Option<String>,
    pub history: Vec<(String, String)>,
}

impl QueryState {
    pub fn new(question: &str) -> Self {
        QueryState { step: 0, query: question.to_owned(), finding: None, history: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InfoQaOptions {
    pub max_steps: usize,
    /// Decompose and answer in a single call per step.
    pub fused: bool,
    /// Carry the accumulated transcript in every prompt (disables pruning).
    pub keep_transcript: bool,
}

impl Default for InfoQaOptions {
    fn default() -> Self {
        InfoQaOptions { max_steps: 6, fused: false, keep_transcript: false }
    }
}

/// Sends one prompt and records the exchange.
pub(crate) struct Caller<'a> {
    pub model: &'a dyn ChatModel,
    pub prompts: &'a PromptSet,
    pub record: &'a mut RunRecord,
}

impl Caller<'_> {
    pub fn call(&mut self, prompt: String, temperature: Option<f64>) -> Result<String> {
        let (default_temp, max_tokens) = self.model.defaults();
        let request = ChatRequest {
            system: self.prompts.system.clone(),
            user: prompt,
            temperature: temperature.unwrap_or(default_temp),
            max_tokens,
        };
        let started = Instant::now();
        let reply = self.model.chat(&request)?;
        self.record.calls.push(CallRecord {
            system: request.system,
            prompt: request.user,
            temperature: request.temperature,
            raw_output: reply.content.clone(),
            latency_ms: started.elapsed().as_millis() as u64,
            usage: reply.usage,
            retries: reply.retries,
        });
        Ok(reply.content)
    }
}

/// Leading words of `context` worth about [`DIGEST_TOKENS`] tokens.
pub fn context_digest(context: &str) -> String {
    let words = TokenCounter::default().words_for(DIGEST_TOKENS);
    context.split_whitespace().take(words).collect::<Vec<_>>().join(" ")
}

fn with_transcript(prompts: &PromptSet, transcript: Option<&str>, prompt: String) -> Result<String> {
    match transcript {
        Some(t) => Ok(format!("{}{prompt}", prompts.render("transcript", &[("transcript", t)])?)),
        None => Ok(prompt),
    }
}

pub(crate) fn decompose_with(caller: &mut Caller<'_>, state: &QueryState, digest: &str, transcript: Option<&str>) -> Result<String> {
    let prompt = caller.prompts.render("decompose", &[("question", &state.query), ("digest", digest)])?;
    let prompt = with_transcript(caller.prompts, transcript, prompt)?;
    let raw = caller.call(prompt, None)?;
    Ok(extract_answer(&raw))
}

pub(crate) fn answer_with(caller: &mut Caller<'_>, sub_question: &str, context: &str, transcript: Option<&str>) -> Result<String> {
    let prompt = caller.prompts.render("answer", &[("question", sub_question), ("context", context)])?;
    let prompt = with_transcript(caller.prompts, transcript, prompt)?;
    let raw = caller.call(prompt, None)?;
    Ok(extract_answer(&raw))
}

/// Result of a contraction call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Contraction {
    Next(String),
    Terminal(String),
}

pub(crate) fn contract_with(caller: &mut Caller<'_>, state: &QueryState, finding: &str, transcript: Option<&str>) -> Result<Contraction> {
    let prompt = caller.prompts.render("contract", &[("question", &state.query), ("finding", finding)])?;
    let prompt = with_transcript(caller.prompts, transcript, prompt)?;
    let raw = caller.call(prompt, None)?;
    if let Some(answer) = find_marker(&raw, TERMINAL_MARKER) {
        let answer = if answer.is_empty() { finding.to_owned() } else { answer };
        return Ok(Contraction::Terminal(answer));
    }
    Ok(Contraction::Next(extract_answer(&raw)))
}

/// Turns the current query into one single-hop sub-question.
pub fn infoqa_decompose(state: &QueryState, context_digest: &str, model: &dyn ChatModel, prompts: &PromptSet, record: &mut RunRecord) -> Result<String> {
    decompose_with(&mut Caller { model, prompts, record }, state, context_digest, None)
}

/// Answers a sub-question against the full context.
pub fn infoqa_answer(sub_question: &str, context: &str, model: &dyn ChatModel, prompts: &PromptSet, record: &mut RunRecord) -> Result<String> {
    answer_with(&mut Caller { model, prompts, record }, sub_question, context, None)
}

/// Rewrites the query around the latest finding and advances `state`.
/// Returns the final answer when the model reports that nothing remains.
pub fn infoqa_contract(state: &mut QueryState, sub_question: &str, finding: &str, model: &dyn ChatModel, prompts: &PromptSet, record: &mut RunRecord) -> Result<Option<String>> {
    if finding.trim().is_empty() {
        return Err(OrchestratorError::Config("cannot contract on an empty finding".into()));
    }
    let outcome = contract_with(&mut Caller { model, prompts, record }, state, finding, None)?;
    Ok(apply_contraction(state, sub_question, finding, outcome, record))
}

fn apply_contraction(state: &mut QueryState, sub_question: &str, finding: &str, outcome: Contraction, record: &mut RunRecord) -> Option<String> {
    state.history.push((sub_question.to_owned(), finding.to_owned()));
    state.step += 1;
    state.finding = Some(finding.to_owned());
    match outcome {
        Contraction::Terminal(answer) => Some(answer),
        Contraction::Next(query) => {
            if query.chars().count() > 2 * state.query.chars().count() {
                let msg = format!(
                    "step {}: contraction grew the query from {} to {} characters",
                    state.step,
                    state.query.chars().count(),
                    query.chars().count()
                );
                log::warn!("{}: {msg}", record.sample_id);
                record.anomalies.push(msg);
            }
            state.query = query;
            None
        }
    }
}

fn strip_preamble(q: &str) -> &str {
    const PREAMBLE: &str = "based on the provided context,";
    let q = q.trim();
    match q.get(..PREAMBLE.len()) {
        Some(head) if head.eq_ignore_ascii_case(PREAMBLE) => q[PREAMBLE.len()..].trim_start(),
        _ => q,
    }
}

/// Whether decomposition returned the query itself, meaning it is atomic.
pub fn is_fixed_point(query: &str, sub_question: &str) -> bool {
    normalize_answer(strip_preamble(query)) == normalize_answer(strip_preamble(sub_question))
}

fn step_correct(sample: &Sample, step: usize, finding: &str) -> Option<bool> {
    if sample.chain_entities.is_empty() || step >= sample.hops as usize {
        return None;
    }
    let gold = sample.chain_entities.get(step + 1)?;
    Some(normalize_answer(finding) == normalize_answer(gold))
}

/// Runs the decompose, answer, contract loop until the query is atomic, the
/// model declares it terminal, or `max_steps` is reached.
pub fn run_infoqa(sample: &Sample, model: &dyn ChatModel, prompts: &PromptSet, opts: InfoQaOptions) -> RunRecord {
    let method = if opts.keep_transcript { Method::NoPruning } else { Method::InfoQa };
    let mut record = RunRecord::new(method, sample, prompts);
    if opts.max_steps == 0 {
        record.error = Some("max_steps must be at least 1".into());
        return record;
    }
    if let Err(e) = infoqa_loop(sample, model, prompts, opts, &mut record) {
        record.error = Some(e.to_string());
    }
    record
}

fn infoqa_loop(sample: &Sample, model: &dyn ChatModel, prompts: &PromptSet, opts: InfoQaOptions, record: &mut RunRecord) -> Result<()> {
    let digest = context_digest(&sample.context);
    let mut state = QueryState::new(&sample.question);
    let mut transcript = String::new();
    let mut outcomes = Vec::new();
    let mut final_answer = None;

    for step in 0..opts.max_steps {
        let kept = opts.keep_transcript.then_some(transcript.as_str());
        let (sub_question, finding) = {
            let mut caller = Caller { model, prompts, record: &mut *record };
            if opts.fused {
                let prompt = prompts.render("fused", &[("question", &state.query), ("context", &sample.context)])?;
                let prompt = with_transcript(prompts, kept, prompt)?;
                let raw = caller.call(prompt, None)?;
                let sub = find_marker(&raw, SUB_QUESTION_MARKER).unwrap_or_else(|| state.query.clone());
                (sub, extract_answer(&raw))
            } else {
                let sub = decompose_with(&mut caller, &state, &digest, kept)?;
                let kept = opts.keep_transcript.then(|| format!("{transcript}\nStep {} sub-question: {sub}", step + 1));
                let finding = answer_with(&mut caller, &sub, &sample.context, kept.as_deref())?;
                (sub, finding)
            }
        };
        outcomes.push(StepOutcome {
            step,
            sub_question: sub_question.clone(),
            finding: finding.clone(),
            correct: step_correct(sample, step, &finding),
        });
        record.step_outcomes = outcomes.clone();
        if opts.keep_transcript {
            for call in &record.calls[record.calls.len().saturating_sub(if opts.fused { 1 } else { 2 })..] {
                transcript.push_str(&format!("\n--- prompt ---\n{}\n--- output ---\n{}", call.prompt, call.raw_output));
            }
        }

        if finding.trim().is_empty() {
            return Err(OrchestratorError::Protocol(format!("step {}: empty finding", step + 1)));
        }
        if is_fixed_point(&state.query, &sub_question) {
            state.history.push((sub_question, finding.clone()));
            state.step += 1;
            state.finding = Some(finding.clone());
            final_answer = Some(finding);
            break;
        }
        let outcome = {
            let kept = opts.keep_transcript.then_some(transcript.as_str());
            contract_with(&mut Caller { model, prompts, record: &mut *record }, &state, &finding, kept)?
        };
        if opts.keep_transcript {
            if let Some(call) = record.calls.last() {
                transcript.push_str(&format!("\n--- prompt ---\n{}\n--- output ---\n{}", call.prompt, call.raw_output));
            }
        }
        if let Some(answer) = apply_contraction(&mut state, &sub_question, &finding, outcome, record) {
            final_answer = Some(answer);
            break;
        }
    }

    record.final_answer = final_answer.or(state.finding).unwrap_or_default();
    Ok(())
}
