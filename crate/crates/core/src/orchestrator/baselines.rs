//! Single-pass baselines and the method dispatcher.

use std::collections::HashMap;

use super::endpoint::ChatModel;
use super::infoqa::{run_infoqa, Caller, InfoQaOptions};
use super::prompts::PromptSet;
use super::{Method, Result, RunRecord};
use crate::benchgen::Sample;
use crate::scoring::{extract_answer, normalize_answer};

/// Sampling temperatures of the five self-consistency generations.
pub const SELF_CONSISTENCY_TEMPERATURES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Most frequent answer after normalization. Ties go to the candidate whose
/// first occurrence comes earliest; the returned string is that occurrence.
pub fn majority_vote(answers: &[String]) -> Option<String> {
    let mut tally: HashMap<Vec<String>, (usize, usize)> = HashMap::new();
    for (i, a) in answers.iter().enumerate() {
        tally.entry(normalize_answer(a)).or_insert((0, i)).0 += 1;
    }
    tally
        .into_values()
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|(_, first)| answers[first].clone())
}

fn single_template(method: Method) -> Option<&'static str> {
    match method {
        Method::Direct => Some("direct"),
        Method::CoT => Some("cot"),
        Method::ReAct => Some("react"),
        Method::PlanAndSolve => Some("plan_solve"),
        Method::SelfAsk => Some("self_ask"),
        Method::NoDecomposition => Some("monolithic"),
        _ => None,
    }
}

/// Runs a baseline or ablation. The multi-call methods are delegated to
/// [`run_infoqa`] with default options.
pub fn run_baseline(method: Method, sample: &Sample, model: &dyn ChatModel, prompts: &PromptSet) -> RunRecord {
    run_method(method, sample, model, prompts, InfoQaOptions::default())
}

pub fn run_method(method: Method, sample: &Sample, model: &dyn ChatModel, prompts: &PromptSet, opts: InfoQaOptions) -> RunRecord {
    match method {
        Method::InfoQa => return run_infoqa(sample, model, prompts, InfoQaOptions { keep_transcript: false, ..opts }),
        Method::NoPruning => return run_infoqa(sample, model, prompts, InfoQaOptions { keep_transcript: true, ..opts }),
        _ => {}
    }
    let mut record = RunRecord::new(method, sample, prompts);
    let outcome = single_pass(method, sample, &mut Caller { model, prompts, record: &mut record });
    match outcome {
        Ok(answer) => record.final_answer = answer,
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

fn single_pass(method: Method, sample: &Sample, caller: &mut Caller<'_>) -> Result<String> {
    let base = [("question", sample.question.as_str()), ("context", sample.context.as_str())];
    if let Some(name) = single_template(method) {
        let prompt = caller.prompts.render(name, &base)?;
        return Ok(extract_answer(&caller.call(prompt, None)?));
    }
    match method {
        Method::SelfConsistency => {
            let prompt = caller.prompts.render("self_consistency", &base)?;
            let mut answers = Vec::with_capacity(SELF_CONSISTENCY_TEMPERATURES.len());
            for t in SELF_CONSISTENCY_TEMPERATURES {
                answers.push(extract_answer(&caller.call(prompt.clone(), Some(t))?));
            }
            Ok(majority_vote(&answers).unwrap_or_default())
        }
        Method::SelfRefine => {
            let first = caller.prompts.render("cot", &base)?;
            let draft = caller.call(first, None)?;
            let refine = caller.prompts.render(
                "self_refine",
                &[("question", &sample.question), ("context", &sample.context), ("draft", &draft)],
            )?;
            Ok(extract_answer(&caller.call(refine, None)?))
        }
        _ => unreachable!("multi-call methods are dispatched before single_pass"),
    }
}
