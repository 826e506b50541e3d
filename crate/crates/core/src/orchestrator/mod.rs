//! Multi-call reasoning (decompose, answer, contract) and single-pass
//! baselines over a pluggable chat model.

pub mod baselines;
pub mod endpoint;
pub mod infoqa;
pub mod mock;
pub mod prompts;
pub mod runner;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchgen::Sample;
use crate::scoring::ScoredRun;

pub use baselines::{majority_vote, run_baseline, run_method, SELF_CONSISTENCY_TEMPERATURES};
pub use endpoint::{ChatModel, ChatReply, ChatRequest, HttpModel, ModelEndpoint, Usage};
pub use infoqa::{infoqa_answer, infoqa_contract, infoqa_decompose, run_infoqa, InfoQaOptions, QueryState};
pub use mock::{MockKind, MockModel, MockProvider, ModelProvider, SharedProvider};
pub use prompts::PromptSet;
pub use runner::{load_records, run_all, RunSummary};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport error{}: {message}", status.map(|s| format!(" (last status {s})")).unwrap_or_default())]
    Transport { status: Option<u16>, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("oracle error: {0}")]
    Oracle(String),
    #[error("{0}")]
    Script(String),
    #[error("I/O error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, OrchestratorError>;

/// Reasoning methods: the multi-call approach, seven single-pass baselines
/// and two ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Direct,
    CoT,
    SelfRefine,
    SelfConsistency,
    ReAct,
    PlanAndSolve,
    SelfAsk,
    InfoQa,
    /// Ablation without decomposition: the whole chain in one prompt.
    NoDecomposition,
    /// Ablation without pruning: every prompt carries the accumulated transcript.
    NoPruning,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Direct,
        Method::CoT,
        Method::SelfRefine,
        Method::SelfConsistency,
        Method::ReAct,
        Method::PlanAndSolve,
        Method::SelfAsk,
        Method::InfoQa,
        Method::NoDecomposition,
        Method::NoPruning,
    ];

    /// Short label used in reports and reference tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Direct => "Direct",
            Method::CoT => "CoT",
            Method::SelfRefine => "S-R",
            Method::SelfConsistency => "S-C",
            Method::ReAct => "ReAct",
            Method::PlanAndSolve => "P&S",
            Method::SelfAsk => "S-A",
            Method::InfoQa => "InfoQA",
            Method::NoDecomposition => "w/o D.",
            Method::NoPruning => "w/o P.",
        }
    }

    /// Exact number of model calls for single-call-contract methods.
    pub fn fixed_calls(self) -> Option<usize> {
        match self {
            Method::Direct
            | Method::CoT
            | Method::ReAct
            | Method::PlanAndSolve
            | Method::SelfAsk
            | Method::NoDecomposition => Some(1),
            Method::SelfRefine => Some(2),
            Method::SelfConsistency => Some(SELF_CONSISTENCY_TEMPERATURES.len()),
            Method::InfoQa | Method::NoPruning => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = OrchestratorError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let m = match key.as_str() {
            "direct" => Method::Direct,
            "cot" | "chainofthought" => Method::CoT,
            "sr" | "selfrefine" => Method::SelfRefine,
            "sc" | "selfconsistency" => Method::SelfConsistency,
            "react" => Method::ReAct,
            "ps" | "planandsolve" | "plansolve" => Method::PlanAndSolve,
            "sa" | "selfask" => Method::SelfAsk,
            "infoqa" => Method::InfoQa,
            "wod" | "nodecomposition" | "infoqanodecomp" | "infoqanodecomposition" => Method::NoDecomposition,
            "wop" | "nopruning" | "infoqanoprune" | "infoqanopruning" => Method::NoPruning,
            _ => return Err(OrchestratorError::Config(format!("unknown method `{s}`"))),
        };
        Ok(m)
    }
}

/// One model call as sent and received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub system: String,
    pub prompt: String,
    pub temperature: f64,
    pub raw_output: String,
    pub latency_ms: u64,
    pub usage: Option<Usage>,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step: usize,
    pub sub_question: String,
    pub finding: String,
    /// Whether the finding names the gold bridge entity for this step.
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub sample_id: String,
    pub hops: u32,
    pub context_len: u32,
    pub gold_answer: String,
    pub prompt_version: String,
    pub calls: Vec<CallRecord>,
    pub final_answer: String,
    pub step_outcomes: Vec<StepOutcome>,
    /// Present when the run stopped on an error; calls made so far are kept.
    pub error: Option<String>,
    pub anomalies: Vec<String>,
}

impl RunRecord {
    pub fn new(method: Method, sample: &Sample, prompts: &PromptSet) -> Self {
        RunRecord {
            method: method.label().to_owned(),
            sample_id: sample.id.clone(),
            hops: sample.hops,
            context_len: sample.target_len,
            gold_answer: sample.answer.clone(),
            prompt_version: prompts.version.clone(),
            calls: Vec::new(),
            final_answer: String::new(),
            step_outcomes: Vec::new(),
            error: None,
            anomalies: Vec::new(),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }

    pub fn scored(&self) -> ScoredRun {
        ScoredRun::score(
            &self.method,
            self.hops,
            self.context_len,
            &self.sample_id,
            &self.final_answer,
            &self.gold_answer,
        )
    }
}
