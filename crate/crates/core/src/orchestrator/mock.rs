//! Hermetic test doubles for [`ChatModel`].
//!
//! Prompts identify their task with a `[task:NAME]` header and carry their
//! inputs in `<question>`, `<context>` and `<finding>` tags. The oracle mocks
//! parse the question against the sample's stored chain and answer from it.

use std::collections::VecDeque;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::endpoint::{ChatModel, ChatReply, ChatRequest};
use super::{OrchestratorError, Result};
use crate::benchgen::{ChainTemplate, Content, EntityDictionary, Sample, StreamRng};
use crate::scoring::FINAL_ANSWER_MARKER;

pub const SUB_QUESTION_MARKER: &str = "SUB-QUESTION:";
pub const TERMINAL_MARKER: &str = "TERMINAL:";
pub const SUBQUESTION_PREAMBLE: &str = "Based on the provided context,";

#[derive(Debug, Clone, PartialEq)]
pub enum MockKind {
    /// Returns the user message unchanged.
    Echo,
    /// Always answers correctly from the sample's chain.
    GoldOracle,
    /// Answers each hop correctly with probability `1 - eps`, otherwise names a
    /// uniformly drawn wrong entity of the right category.
    NoisyOracle { eps: f64 },
    /// Replays fixed outputs in order.
    Scripted(Vec<String>),
}

impl FromStr for MockKind {
    type Err = OrchestratorError;

    /// Accepts `echo`, `gold_oracle` (or `gold`) and `noisy_oracle:EPS` (or `noisy:EPS`).
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        match (name, arg) {
            ("echo", None) => Ok(MockKind::Echo),
            ("gold" | "gold_oracle", None) => Ok(MockKind::GoldOracle),
            ("noisy" | "noisy_oracle", Some(a)) => {
                let eps: f64 = a
                    .parse()
                    .map_err(|_| OrchestratorError::Config(format!("bad noise level `{a}`")))?;
                if !(0.0..=1.0).contains(&eps) {
                    return Err(OrchestratorError::Config("noise level must lie in [0, 1]".into()));
                }
                Ok(MockKind::NoisyOracle { eps })
            }
            _ => Err(OrchestratorError::Config(format!(
                "unknown mock `{s}` (expected echo, gold_oracle or noisy_oracle:EPS)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
struct OracleChain {
    template: ChainTemplate,
    entities: Vec<String>,
    dictionary: Arc<EntityDictionary>,
}

pub struct MockModel {
    kind: MockKind,
    chain: Option<OracleChain>,
    rng: Mutex<StreamRng>,
    script: Mutex<VecDeque<String>>,
    seen: Mutex<Vec<ChatRequest>>,
    calls: AtomicUsize,
}

impl MockModel {
    pub fn echo() -> Self {
        Self::build(MockKind::Echo, None, 0)
    }

    pub fn scripted<I, S>(outputs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::build(MockKind::Scripted(outputs.into_iter().map(Into::into).collect()), None, 0)
    }

    /// Oracle or noisy mock bound to the chain stored in `sample`.
    pub fn for_sample(kind: MockKind, sample: &Sample, content: &Content, seed: u64) -> Result<Self> {
        let chain = match kind {
            MockKind::GoldOracle | MockKind::NoisyOracle { .. } => {
                let template = content.template(&sample.template_id).ok_or_else(|| {
                    OrchestratorError::Config(format!(
                        "sample `{}` names unknown template `{}`",
                        sample.id, sample.template_id
                    ))
                })?;
                if sample.chain_entities.len() != template.entity_seq.len() {
                    return Err(OrchestratorError::Config(format!(
                        "sample `{}` lacks its stored chain",
                        sample.id
                    )));
                }
                Some(OracleChain {
                    template: template.clone(),
                    entities: sample.chain_entities.clone(),
                    dictionary: Arc::new(content.dictionary.clone()),
                })
            }
            _ => None,
        };
        let stream = (3u64 << 56) | (fnv1a(sample.id.as_bytes()) & ((1u64 << 56) - 1));
        let mut model = Self::build(kind, chain, seed);
        model.rng = Mutex::new(StreamRng::new(seed, stream));
        Ok(model)
    }

    fn build(kind: MockKind, chain: Option<OracleChain>, seed: u64) -> Self {
        let script = match &kind {
            MockKind::Scripted(lines) => lines.iter().cloned().collect(),
            _ => VecDeque::new(),
        };
        MockModel {
            kind,
            chain,
            rng: Mutex::new(StreamRng::new(seed, 3u64 << 56)),
            script: Mutex::new(script),
            seen: Mutex::new(Vec::new()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Requests received so far.
    pub fn seen(&self) -> Vec<ChatRequest> {
        self.seen.lock().expect("mock lock").clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn oracle(&self, eps: f64, user: &str, call: usize) -> Result<String> {
        let chain = self
            .chain
            .as_ref()
            .ok_or_else(|| OrchestratorError::Oracle("oracle has no chain".into()))?;
        let task = task_of(user).ok_or_else(|| OrchestratorError::Oracle("prompt has no [task:...] header".into()))?;
        let question = tag(user, "question")
            .ok_or_else(|| OrchestratorError::Oracle(format!("`{task}` prompt has no <question>")))?
            .trim();
        let (start, hops, subject) = chain.template.parse_question(question).ok_or_else(|| {
            OrchestratorError::Oracle(format!(
                "question `{question}` does not match template `{}`",
                chain.template.id
            ))
        })?;
        let trace = format!("[oracle trace #{call}] task {task}, {hops} unresolved hop(s)");
        let out = match task {
            "decompose" => {
                let sub = if hops == 1 { question.to_owned() } else { sub_question(&chain.template, start, &subject) };
                format!("{trace}\n{FINAL_ANSWER_MARKER} {sub}")
            }
            "contract" => {
                let finding = tag(user, "finding")
                    .map(str::trim)
                    .filter(|f| !f.is_empty())
                    .ok_or_else(|| OrchestratorError::Oracle("contract prompt has no finding".into()))?;
                if hops == 1 {
                    format!("{trace}\n{TERMINAL_MARKER} {finding}")
                } else {
                    let next = chain.template.nested_question(start + 1, hops - 1, finding);
                    format!("{trace}\n{FINAL_ANSWER_MARKER} {next}")
                }
            }
            "fused" => {
                let sub = if hops == 1 { question.to_owned() } else { sub_question(&chain.template, start, &subject) };
                let answer = self.resolve(chain, start, 1, &subject, eps)?;
                format!("{trace}\n{SUB_QUESTION_MARKER} {sub}\n{FINAL_ANSWER_MARKER} {answer}")
            }
            _ => {
                let answer = self.resolve(chain, start, hops, &subject, eps)?;
                format!("{trace}\n{FINAL_ANSWER_MARKER} {answer}")
            }
        };
        Ok(out)
    }

    /// Entity reached from `subject` (at chain position `start`) after `hops` links.
    fn resolve(&self, chain: &OracleChain, start: usize, hops: usize, subject: &str, eps: f64) -> Result<String> {
        let on_chain = chain.entities.get(start).is_some_and(|e| e == subject);
        let target = start + hops;
        let gold = &chain.entities[target];
        let mut correct = on_chain;
        if eps > 0.0 {
            let mut rng = self.rng.lock().expect("mock lock");
            for _ in 0..hops {
                if rng.chance(eps) {
                    correct = false;
                }
            }
        }
        if correct {
            return Ok(gold.clone());
        }
        if eps == 0.0 {
            return Err(OrchestratorError::Oracle(format!(
                "`{subject}` is not entity {start} of the stored chain"
            )));
        }
        let pool = chain
            .dictionary
            .category(&chain.template.entity_seq[target])
            .map_err(|e| OrchestratorError::Oracle(e.to_string()))?;
        let wrong: Vec<&String> = pool.iter().filter(|e| *e != gold).collect();
        let pick = self.rng.lock().expect("mock lock").below(wrong.len());
        Ok(wrong[pick].clone())
    }
}

fn sub_question(template: &ChainTemplate, start: usize, subject: &str) -> String {
    let q = template.nested_question(start, 1, subject);
    let mut chars = q.chars();
    let lowered: String = match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    };
    format!("{SUBQUESTION_PREAMBLE} {lowered}")
}

impl ChatModel for MockModel {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        self.seen.lock().expect("mock lock").push(request.clone());
        let content = match &self.kind {
            MockKind::Echo => request.user.clone(),
            MockKind::Scripted(_) => self
                .script
                .lock()
                .expect("mock lock")
                .pop_front()
                .ok_or_else(|| OrchestratorError::Script("script exhausted".into()))?,
            MockKind::GoldOracle => self.oracle(0.0, &request.user, call)?,
            MockKind::NoisyOracle { eps } => self.oracle(*eps, &request.user, call)?,
        };
        Ok(ChatReply::text(content))
    }
}

/// Name inside the last `[task:NAME]` header, so a prompt prefixed with an
/// earlier transcript still resolves to its own task.
pub fn task_of(prompt: &str) -> Option<&str> {
    let start = prompt.rfind("[task:")? + "[task:".len();
    let end = prompt[start..].find(']')?;
    Some(&prompt[start..start + end])
}

/// Body of the last complete `<name>...</name>` element. Anchoring on the
/// closing tag skips placeholders such as `<question>` in instruction text.
pub fn tag<'a>(prompt: &'a str, name: &str) -> Option<&'a str> {
    let open = format!("<{name}>");
    let close = format!("</{name}>");
    let end = prompt.rfind(&close)?;
    let start = prompt[..end].rfind(&open)? + open.len();
    Some(&prompt[start..end])
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Supplies the model used for one run over one sample.
pub trait ModelProvider: Send + Sync {
    fn model_for(&self, sample: &Sample) -> Result<Arc<dyn ChatModel>>;
}

/// Hands out the same model, e.g. an HTTP client, for every sample.
pub struct SharedProvider(pub Arc<dyn ChatModel>);

impl ModelProvider for SharedProvider {
    fn model_for(&self, _sample: &Sample) -> Result<Arc<dyn ChatModel>> {
        Ok(Arc::clone(&self.0))
    }
}

/// Builds a fresh mock bound to each sample's chain.
pub struct MockProvider {
    pub kind: MockKind,
    pub content: Arc<Content>,
    pub seed: u64,
}

impl ModelProvider for MockProvider {
    fn model_for(&self, sample: &Sample) -> Result<Arc<dyn ChatModel>> {
        Ok(Arc::new(MockModel::for_sample(self.kind.clone(), sample, &self.content, self.seed)?))
    }
}
