//! Replaceable benchmark content: entity dictionary, chain templates and the
//! generic noise pool.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{BenchError, Result};
use crate::reference;

/// Minimum number of entities each category must provide.
pub const MIN_CATEGORY_SIZE: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDictionary {
    pub categories: BTreeMap<String, Vec<String>>,
}

impl EntityDictionary {
    pub fn from_json(text: &str) -> Result<Self> {
        let dict: EntityDictionary = serde_json::from_str(text)
            .map_err(|e| BenchError::Config(format!("entity dictionary: {e}")))?;
        dict.validate()?;
        Ok(dict)
    }

    /// The bundled fictitious dictionary.
    pub fn bundled() -> Self {
        Self::from_json(reference::ENTITIES_JSON).expect("bundled dictionary is valid")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, items) in &self.categories {
            if items.len() < MIN_CATEGORY_SIZE {
                return Err(BenchError::Config(format!(
                    "category `{name}` has {} entities, need at least {MIN_CATEGORY_SIZE}",
                    items.len()
                )));
            }
            let distinct: HashSet<&String> = items.iter().collect();
            if distinct.len() != items.len() {
                return Err(BenchError::Config(format!("category `{name}` has duplicate entities")));
            }
            if items.iter().any(|e| e.trim().is_empty() || e.trim() != e) {
                return Err(BenchError::Config(format!("category `{name}` has blank or padded entities")));
            }
        }
        Ok(())
    }

    pub fn category(&self, name: &str) -> Result<&[String]> {
        self.categories
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| BenchError::Config(format!("entity dictionary lacks category `{name}`")))
    }

    /// Category owning `entity`, if any.
    pub fn category_of(&self, entity: &str) -> Option<&str> {
        self.categories
            .iter()
            .find(|(_, items)| items.iter().any(|e| e == entity))
            .map(|(name, _)| name.as_str())
    }
}

/// One link of a chain template; slot `{k}` is the subject and `{k+1}` the object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    /// Evidence sentence mentioning subject and object.
    pub text: String,
    /// Noun phrase denoting the object in terms of the subject.
    pub clause: String,
    /// Single-hop question asking for the object.
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTemplate {
    pub id: String,
    pub entity_seq: Vec<String>,
    pub relations: Vec<Relation>,
}

fn slot(k: usize) -> String {
    format!("{{{k}}}")
}

fn slots_in(text: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else { break };
        if let Ok(k) = rest[open + 1..open + close].parse::<usize>() {
            out.push(k);
        }
        rest = &rest[open + close + 1..];
    }
    out
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl ChainTemplate {
    pub fn max_hops(&self) -> usize {
        self.relations.len()
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(BenchError::Config(format!("template `{}`: {msg}", self.id)));
        if self.relations.is_empty() || self.entity_seq.len() != self.relations.len() + 1 {
            return err(format!(
                "needs n relations and n + 1 entity slots, got {} and {}",
                self.relations.len(),
                self.entity_seq.len()
            ));
        }
        for (k, rel) in self.relations.iter().enumerate() {
            let mut text_slots = slots_in(&rel.text);
            text_slots.sort_unstable();
            if text_slots != [k, k + 1] {
                return err(format!("relation {k} text must use exactly slots {{{k}}} and {{{}}}", k + 1));
            }
            if slots_in(&rel.clause) != [k] || slots_in(&rel.question) != [k] {
                return err(format!("relation {k} clause and question must use only slot {{{k}}}"));
            }
        }
        Ok(())
    }

    /// Evidence sentence for relation `k` over concrete `entities`.
    pub fn chain_text(&self, k: usize, entities: &[String]) -> String {
        self.fact_text(k, &entities[k], &entities[k + 1])
    }

    pub fn fact_text(&self, k: usize, subject: &str, object: &str) -> String {
        capitalize(
            &self.relations[k]
                .text
                .replace(&slot(k), subject)
                .replace(&slot(k + 1), object),
        )
    }

    /// Question asking for entity `start + hops` given entity `start` named `subject`,
    /// composed by nesting the clauses of relations `start..start + hops - 1`.
    pub fn nested_question(&self, start: usize, hops: usize, subject: &str) -> String {
        assert!(hops >= 1 && start + hops <= self.relations.len());
        let last = start + hops - 1;
        let mut phrase = subject.to_owned();
        for k in start..last {
            phrase = self.relations[k].clause.replace(&slot(k), &phrase);
        }
        capitalize(&self.relations[last].question.replace(&slot(last), &phrase))
    }

    /// The `hops`-hop question template from entity 0, with slot `{0}` left open.
    pub fn question_template(&self, hops: usize) -> String {
        self.nested_question(0, hops, &slot(0))
    }

    /// Noun phrase resolved by relation `k` for a given subject.
    pub fn clause_text(&self, k: usize, subject: &str) -> String {
        self.relations[k].clause.replace(&slot(k), subject)
    }

    /// Inverts [`Self::nested_question`]: finds `(start, hops, subject)` such that
    /// the rendered question equals `question` (first letter case-insensitive),
    /// preferring the shortest subject. A leading "Based on the provided
    /// context," preamble is ignored.
    pub fn parse_question(&self, question: &str) -> Option<(usize, usize, String)> {
        const SENTINEL: &str = "\u{1F}";
        let q = strip_preamble(question.trim());
        let mut best: Option<(usize, usize, String)> = None;
        for start in 0..self.relations.len() {
            for hops in 1..=self.relations.len() - start {
                let pattern = self.nested_question(start, hops, SENTINEL);
                let (prefix, suffix) = pattern.split_once(SENTINEL)?;
                if q.len() <= prefix.len() + suffix.len() {
                    continue;
                }
                let Some(head) = q.get(..prefix.len()) else { continue };
                if !eq_first_insensitive(head, prefix) || !q.ends_with(suffix) {
                    continue;
                }
                let Some(subject) = q.get(prefix.len()..q.len() - suffix.len()) else { continue };
                let better = best.as_ref().is_none_or(|b| subject.len() < b.2.len());
                if better {
                    best = Some((start, hops, subject.to_owned()));
                }
            }
        }
        best
    }
}

const PREAMBLE: &str = "based on the provided context,";

fn strip_preamble(q: &str) -> &str {
    match q.get(..PREAMBLE.len()) {
        Some(head) if head.eq_ignore_ascii_case(PREAMBLE) => q[PREAMBLE.len()..].trim_start(),
        _ => q,
    }
}

fn eq_first_insensitive(a: &str, b: &str) -> bool {
    let mut ca = a.chars();
    let mut cb = b.chars();
    match (ca.next(), cb.next()) {
        (None, None) => true,
        (Some(x), Some(y)) => x.to_lowercase().eq(y.to_lowercase()) && ca.as_str() == cb.as_str(),
        _ => false,
    }
}

#[derive(Debug, Clone, Deserialize)]
struct TemplateFile {
    templates: Vec<ChainTemplate>,
}

pub fn templates_from_json(text: &str) -> Result<Vec<ChainTemplate>> {
    let file: TemplateFile =
        serde_json::from_str(text).map_err(|e| BenchError::Config(format!("templates: {e}")))?;
    if file.templates.is_empty() {
        return Err(BenchError::Config("no chain templates".into()));
    }
    let mut ids = HashSet::new();
    for t in &file.templates {
        t.validate()?;
        if !ids.insert(t.id.as_str()) {
            return Err(BenchError::Config(format!("duplicate template id `{}`", t.id)));
        }
    }
    Ok(file.templates)
}

pub fn bundled_templates() -> Vec<ChainTemplate> {
    templates_from_json(reference::TEMPLATES_JSON).expect("bundled templates are valid")
}

/// Generic filler sentences, indexed by word length for exact padding.
#[derive(Debug, Clone)]
pub struct NoisePool {
    /// Sorted by (word count, text).
    sentences: Vec<(usize, String)>,
}

impl NoisePool {
    pub fn from_lines(text: &str) -> Result<Self> {
        let mut sentences: Vec<(usize, String)> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| (l.split_whitespace().count(), l.to_owned()))
            .collect();
        if sentences.is_empty() {
            return Err(BenchError::Config("noise pool is empty".into()));
        }
        sentences.sort();
        sentences.dedup();
        Ok(NoisePool { sentences })
    }

    pub fn bundled() -> Self {
        Self::from_lines(reference::NOISE_TXT).expect("bundled noise pool is valid")
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn min_words(&self) -> usize {
        self.sentences[0].0
    }

    pub fn get(&self, i: usize) -> &str {
        &self.sentences[i].1
    }

    pub fn words(&self, i: usize) -> usize {
        self.sentences[i].0
    }

    /// Number of sentences with at most `words` words; these are the indices `0..n`.
    pub fn fitting(&self, words: usize) -> usize {
        self.sentences.partition_point(|(w, _)| *w <= words)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().map(|(_, s)| s.as_str())
    }
}

/// The bundled dictionary, templates and noise pool.
#[derive(Debug, Clone)]
pub struct Content {
    pub dictionary: EntityDictionary,
    pub templates: Vec<ChainTemplate>,
    pub noise: NoisePool,
}

impl Content {
    pub fn bundled() -> Self {
        Content {
            dictionary: EntityDictionary::bundled(),
            templates: bundled_templates(),
            noise: NoisePool::bundled(),
        }
    }

    pub fn template(&self, id: &str) -> Option<&ChainTemplate> {
        self.templates.iter().find(|t| t.id == id)
    }
}
