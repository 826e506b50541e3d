use std::collections::BTreeMap;

use serde::Deserialize;

use super::{OrchestratorError, Result};
use crate::reference;
use crate::scoring::FINAL_ANSWER_MARKER;

/// Templates every prompt set must define.
pub const REQUIRED: [&str; 13] = [
    "direct",
    "cot",
    "react",
    "plan_solve",
    "self_ask",
    "self_consistency",
    "self_refine",
    "monolithic",
    "decompose",
    "answer",
    "contract",
    "fused",
    "transcript",
];

/// Fragments spliced into other prompts; they carry no answer instruction.
const FRAGMENTS: [&str; 1] = ["transcript"];

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PromptSet {
    pub version: String,
    pub system: String,
    pub templates: BTreeMap<String, String>,
}

impl PromptSet {
    pub fn from_toml(text: &str) -> Result<Self> {
        let set: PromptSet =
            toml::from_str(text).map_err(|e| OrchestratorError::Config(format!("prompt file: {e}")))?;
        set.validate()?;
        Ok(set)
    }

    pub fn bundled() -> Self {
        Self::from_toml(reference::PROMPTS_TOML).expect("bundled prompts are valid")
    }

    pub fn validate(&self) -> Result<()> {
        for name in REQUIRED {
            let Some(body) = self.templates.get(name) else {
                return Err(OrchestratorError::Config(format!("prompt template `{name}` is missing")));
            };
            if FRAGMENTS.contains(&name) {
                continue;
            }
            let header = format!("[task:{name}]");
            if !body.trim_start().starts_with(&header) {
                return Err(OrchestratorError::Config(format!("prompt `{name}` must start with `{header}`")));
            }
            let last = body.trim_end().lines().last().unwrap_or_default();
            if !last.contains(FINAL_ANSWER_MARKER) {
                return Err(OrchestratorError::Config(format!(
                    "prompt `{name}` must end by asking for `{FINAL_ANSWER_MARKER}`"
                )));
            }
        }
        Ok(())
    }

    /// Fills `{name}` placeholders in one pass, so substituted text is never
    /// rescanned. Unknown placeholders are left as they are.
    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> Result<String> {
        let template = self
            .templates
            .get(name)
            .ok_or_else(|| OrchestratorError::Config(format!("prompt template `{name}` is missing")))?;
        let mut out = String::with_capacity(template.len() + vars.iter().map(|(_, v)| v.len()).sum::<usize>());
        let mut rest = template.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let close = after.find('}');
            let key = close.map(|c| &after[..c]);
            match key.and_then(|k| vars.iter().find(|(n, _)| *n == k)) {
                Some((_, value)) => {
                    out.push_str(value);
                    rest = &after[close.unwrap_or(0) + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        Ok(out.trim_start_matches('\n').to_owned())
    }
}
