//! Deterministic synthetic multi-hop QA benchmark generation.
//!
//! A dataset is built in six phases: content definition, chain sampling,
//! distractor generation, hop-dependent scaling, evidence placement with
//! noise padding, and emission of one JSON file per (hops, length) cell.
//! Every sample draws from its own keyed random stream (see [`rng`]), so
//! generation parallelises freely and is byte-reproducible from the seed.

pub mod chain;
pub mod content;
pub mod context;
pub mod dataset;
pub mod rng;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chain::{generate_chain, generate_distractors, scale_distractors, DistractorSet, Fact, ReasoningChain};
pub use content::{ChainTemplate, Content, EntityDictionary, NoisePool};
pub use context::{create_context, PlacedContext};
pub use dataset::{build_dataset, build_dataset_with, load_cell, load_dataset, write_dataset, Dataset, DatasetStats, Sample};
pub use rng::StreamRng;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("sample (hops={hops}, len={context_len}, index={index})")]
    Sample {
        hops: u32,
        context_len: u32,
        index: usize,
        #[source]
        source: Box<BenchError>,
    },
    #[error("I/O error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error in {path}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// Word-count based token estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenCounter {
    pub tokens_per_word: f64,
}

impl Default for TokenCounter {
    fn default() -> Self {
        TokenCounter { tokens_per_word: 1.3 }
    }
}

impl TokenCounter {
    pub fn count(&self, text: &str) -> u64 {
        self.from_words(text.split_whitespace().count())
    }

    pub fn from_words(&self, words: usize) -> u64 {
        (words as f64 * self.tokens_per_word).round() as u64
    }

    /// Number of words whose token estimate is closest to `tokens`.
    pub fn words_for(&self, tokens: u64) -> usize {
        (tokens as f64 / self.tokens_per_word).round() as usize
    }
}

/// Token count with the default factor of 1.3 tokens per word.
pub fn count_tokens(text: &str) -> u64 {
    TokenCounter::default().count(text)
}

/// Physical placement of the gold evidence for one hop count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceLayout {
    pub hops: u32,
    /// Logical evidence numbers (1-based) in the order they appear in the context.
    pub order: Vec<u32>,
    /// Fractional start positions of the evidence sentences, in physical order.
    pub positions: Vec<f64>,
}

impl EvidenceLayout {
    pub fn validate(&self) -> Result<()> {
        let h = self.hops as usize;
        let err = |m: &str| Err(BenchError::Config(format!("layout for {h} hops: {m}")));
        if h == 0 {
            return err("hops must be at least 1");
        }
        if self.order.len() != h || self.positions.len() != h {
            return err("order and positions must both have one entry per hop");
        }
        let mut seen = self.order.clone();
        seen.sort_unstable();
        if seen.iter().copied().ne(1..=self.hops) {
            return err("order must be a permutation of 1..=hops");
        }
        if self.positions.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return err("positions must lie strictly between 0 and 1");
        }
        if self.positions.windows(2).any(|w| w[0] >= w[1]) {
            return err("positions must be strictly increasing");
        }
        Ok(())
    }
}

pub fn default_layouts() -> Vec<EvidenceLayout> {
    let fractions = |h: u32| (1..=h).map(|k| f64::from(k) / f64::from(h + 1)).collect();
    vec![
        EvidenceLayout { hops: 1, order: vec![1], positions: fractions(1) },
        EvidenceLayout { hops: 2, order: vec![2, 1], positions: fractions(2) },
        EvidenceLayout { hops: 3, order: vec![2, 3, 1], positions: fractions(3) },
        EvidenceLayout { hops: 4, order: vec![2, 4, 3, 1], positions: fractions(4) },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub seed: u64,
    pub n_per_cell: usize,
    pub lengths: Vec<u32>,
    pub hops: Vec<u32>,
    /// Object variants emitted per distractor anchor subject.
    pub n_var: usize,
    /// Base distractor count is `floor(dist_base + dist_per_token * L)`.
    pub dist_base: f64,
    pub dist_per_token: f64,
    /// Noise sentence count is `floor(noise_per_token * L)`.
    pub noise_per_token: f64,
    pub tokens_per_word: f64,
    pub layout: Vec<EvidenceLayout>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            seed: 20251016,
            n_per_cell: 300,
            lengths: vec![500, 1000, 2000, 4000, 8000, 10000],
            hops: vec![1, 2, 3, 4],
            n_var: 5,
            dist_base: 2.0,
            dist_per_token: 0.004,
            noise_per_token: 0.01,
            tokens_per_word: 1.3,
            layout: default_layouts(),
        }
    }
}

impl DatasetConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DatasetConfig =
            toml::from_str(text).map_err(|e| BenchError::Config(format!("dataset config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(BenchError::Config(m));
        if self.n_per_cell == 0 {
            return err("n_per_cell must be positive".into());
        }
        if self.lengths.is_empty() || self.hops.is_empty() {
            return err("lengths and hops must be non-empty".into());
        }
        if self.lengths.contains(&0) {
            return err("lengths must be positive".into());
        }
        if self.n_var == 0 {
            return err("n_var must be at least 1".into());
        }
        if !(self.tokens_per_word > 0.0 && self.tokens_per_word.is_finite()) {
            return err("tokens_per_word must be positive".into());
        }
        for v in [self.dist_base, self.dist_per_token, self.noise_per_token] {
            if !(v >= 0.0 && v.is_finite()) {
                return err("distractor and noise rates must be non-negative".into());
            }
        }
        let mut sorted = self.lengths.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.lengths.len() {
            return err("lengths contain duplicates".into());
        }
        let mut sorted = self.hops.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.hops.len() {
            return err("hops contain duplicates".into());
        }
        for l in &self.layout {
            l.validate()?;
        }
        for &h in &self.hops {
            match self.layout.iter().filter(|l| l.hops == h).count() {
                1 => {}
                0 => return err(format!("no evidence layout for {h} hops")),
                _ => return err(format!("duplicate evidence layout for {h} hops")),
            }
        }
        Ok(())
    }

    pub fn layout_for(&self, hops: u32) -> Result<&EvidenceLayout> {
        self.layout
            .iter()
            .find(|l| l.hops == hops)
            .ok_or_else(|| BenchError::Config(format!("no evidence layout for {hops} hops")))
    }

    pub fn token_counter(&self) -> TokenCounter {
        TokenCounter { tokens_per_word: self.tokens_per_word }
    }

    /// Distractor count before hop scaling.
    pub fn base_distractors(&self, context_len: u32) -> usize {
        (self.dist_base + self.dist_per_token * f64::from(context_len)).floor() as usize
    }

    pub fn noise_sentences(&self, context_len: u32) -> usize {
        (self.noise_per_token * f64::from(context_len)).floor() as usize
    }

    pub fn total_samples(&self) -> usize {
        self.n_per_cell * self.lengths.len() * self.hops.len()
    }
}
