//! Evidence placement and length control.

use super::chain::DistractorSet;
use super::content::NoisePool;
use super::rng::StreamRng;
use super::{BenchError, EvidenceLayout, Result, TokenCounter};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacedContext {
    pub context: String,
    /// Character offsets `[start, end)` of the gold sentences in physical order.
    pub evidence_spans: Vec<(usize, usize)>,
    pub word_count: usize,
    pub token_count: u64,
}

fn words(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Lays out `gold` (given in logical order) according to `layout`, fills the
/// gaps with the shuffled distractors, and pads with pool sentences until the
/// context reaches `target_len` tokens.
///
/// Positions are controlled in words: the context is planned to hold
/// `W = target_len / tokens_per_word` words and gold sentence `j` (physical
/// order) starts at word `round(p_j * W)`. Distractors are spread over the
/// gaps in proportion to gap size, then each gap is padded up to the next
/// planned start. Because padding sentences have at least a few words, a gap
/// may end up to `min_words - 1` words short, and the following gap absorbs
/// the slack, so errors never accumulate.
pub fn create_context(
    gold: &[String],
    distractors: &DistractorSet,
    layout: &EvidenceLayout,
    counter: TokenCounter,
    target_len: u32,
    noise: &NoisePool,
    rng: &mut StreamRng,
) -> Result<PlacedContext> {
    let h = gold.len();
    if h != layout.hops as usize {
        return Err(BenchError::Config(format!(
            "layout is for {} hops but {h} gold sentences were given",
            layout.hops
        )));
    }
    layout.validate()?;

    let total_words = counter.words_for(u64::from(target_len));
    let physical: Vec<&str> = layout.order.iter().map(|&e| gold[e as usize - 1].as_str()).collect();
    let gold_words: Vec<usize> = physical.iter().map(|s| words(s)).collect();
    let starts: Vec<usize> = layout
        .positions
        .iter()
        .map(|p| (p * total_words as f64).round() as usize)
        .collect();

    // Nominal gap sizes: gaps[j] precedes gold j; gaps[h] is the tail.
    let mut gaps = Vec::with_capacity(h + 1);
    let mut cursor = 0usize;
    for j in 0..=h {
        let end = if j < h { starts[j] } else { total_words };
        if end < cursor {
            return Err(BenchError::Generation(format!(
                "target length {target_len} is too small to hold the gold evidence"
            )));
        }
        gaps.push(end - cursor);
        if j < h {
            cursor = end + gold_words[j];
        }
    }

    let mut similar: Vec<&str> = distractors.similar.iter().map(|f| f.text.as_str()).collect();
    let mut generic: Vec<&str> = distractors.noise.iter().map(String::as_str).collect();
    rng.shuffle(&mut similar);
    rng.shuffle(&mut generic);
    let mut stream: Vec<&str> = Vec::with_capacity(similar.len() + generic.len());
    for i in 0..similar.len().max(generic.len()) {
        stream.extend(similar.get(i).copied());
        stream.extend(generic.get(i).copied());
    }

    let free: usize = gaps.iter().sum();
    let content_words: usize = stream.iter().map(|s| words(s)).sum();
    let ratio = if free == 0 { 0.0 } else { (content_words as f64 / free as f64).min(1.0) };

    let mut pieces: Vec<&str> = Vec::new();
    let mut gold_piece = Vec::with_capacity(h);
    let mut pos = 0usize;
    let mut next = 0usize;
    let mut placed_content = 0usize;
    let mut cum_free = 0usize;
    for j in 0..=h {
        let end = if j < h { starts[j] } else { total_words };
        let room = end.saturating_sub(pos);
        cum_free += gaps[j];
        let quota = (ratio * cum_free as f64).round() as usize;

        let mut segment: Vec<&str> = Vec::new();
        let mut used = 0usize;
        while let Some(&item) = stream.get(next) {
            let w = words(item);
            let last = j == h;
            if used + w > room || (!last && placed_content + w > quota) {
                break;
            }
            segment.push(item);
            used += w;
            placed_content += w;
            next += 1;
        }

        let mut deficit = room - used;
        while deficit >= noise.min_words() {
            let pick = rng.below(noise.fitting(deficit));
            let at = rng.below(segment.len() + 1);
            segment.insert(at, noise.get(pick));
            deficit -= noise.words(pick);
        }
        pos += room - deficit;
        pieces.extend(segment);

        if j < h {
            gold_piece.push(pieces.len());
            pieces.push(physical[j]);
            pos += gold_words[j];
        }
    }
    if next < stream.len() {
        log::debug!("{} distractor sentences did not fit in {target_len} tokens", stream.len() - next);
    }

    let mut context = String::new();
    let mut spans = Vec::with_capacity(h);
    let mut chars = 0usize;
    let mut gold_iter = gold_piece.iter().peekable();
    for (i, piece) in pieces.iter().enumerate() {
        if i > 0 {
            context.push(' ');
            chars += 1;
        }
        let len = piece.chars().count();
        if gold_iter.peek() == Some(&&i) {
            spans.push((chars, chars + len));
            gold_iter.next();
        }
        context.push_str(piece);
        chars += len;
    }

    let word_count = words(&context);
    Ok(PlacedContext {
        token_count: counter.from_words(word_count),
        word_count,
        evidence_spans: spans,
        context,
    })
}

/// Substring of `text` between character offsets `start..end`.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let offset = |n: usize| text.char_indices().nth(n).map_or(text.len(), |(i, _)| i);
    &text[offset(start)..offset(end.max(start))]
}
