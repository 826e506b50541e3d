//! Reasoning chains and their distractors.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::content::{ChainTemplate, EntityDictionary, NoisePool};
use super::rng::StreamRng;
use super::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningChain {
    pub template_id: String,
    pub entities: Vec<String>,
    pub chain_texts: Vec<String>,
}

impl ReasoningChain {
    pub fn answer(&self, hops: usize) -> &str {
        &self.entities[hops]
    }

    pub fn gold_evidence(&self, hops: usize) -> &[String] {
        &self.chain_texts[..hops]
    }
}

/// A single relational statement, `relation` indexing the template's relations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub relation: usize,
    pub subject: String,
    pub object: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistractorSet {
    pub similar: Vec<Fact>,
    pub noise: Vec<String>,
}

impl DistractorSet {
    pub fn is_empty(&self) -> bool {
        self.similar.is_empty() && self.noise.is_empty()
    }
}

fn pick_distinct(pool: &[String], taken: &HashSet<&str>, rng: &mut StreamRng) -> Option<usize> {
    let free = pool.iter().filter(|e| !taken.contains(e.as_str())).count();
    if free == 0 {
        return None;
    }
    let target = rng.below(free);
    pool.iter()
        .enumerate()
        .filter(|(_, e)| !taken.contains(e.as_str()))
        .nth(target)
        .map(|(i, _)| i)
}

pub fn generate_chain(
    template: &ChainTemplate,
    dict: &EntityDictionary,
    rng: &mut StreamRng,
) -> Result<ReasoningChain> {
    let mut entities: Vec<String> = Vec::with_capacity(template.entity_seq.len());
    for category in &template.entity_seq {
        let pool = dict.category(category)?;
        let taken: HashSet<&str> = entities.iter().map(String::as_str).collect();
        let idx = pick_distinct(pool, &taken, rng).ok_or_else(|| {
            BenchError::Generation(format!(
                "template `{}`: category `{category}` has no unused entity left",
                template.id
            ))
        })?;
        entities.push(pool[idx].clone());
    }
    let chain_texts = (0..template.relations.len())
        .map(|k| template.chain_text(k, &entities))
        .collect();
    Ok(ReasoningChain {
        template_id: template.id.clone(),
        entities,
        chain_texts,
    })
}

/// Hop-dependent distractor count: `floor(n_dist * (1 + 0.6 * (h - 1)))`.
pub fn scale_distractors(n_dist: usize, hops: u32) -> usize {
    // Integer arithmetic in tenths keeps exact values such as 10 * 2.2 = 22.
    let tenths = 10 + 6 * u64::from(hops.saturating_sub(1));
    (n_dist as u64 * tenths / 10) as usize
}

/// Builds `n_dist` template-shaped distractor facts and `n_noise` generic
/// sentences for a `hops`-hop question over `chain`.
///
/// Distractors are produced in rounds that cycle over the relations used by
/// the question. Each round anchors a fresh non-gold subject and emits up to
/// `n_var` facts giving it different objects. No distractor mentions any
/// entity of the gold chain, so every gold (subject, relation) pair keeps a
/// unique object and the answer never leaks outside its evidence sentence.
#[allow(clippy::too_many_arguments)]
pub fn generate_distractors(
    chain: &ReasoningChain,
    template: &ChainTemplate,
    hops: usize,
    n_dist: usize,
    n_var: usize,
    n_noise: usize,
    dict: &EntityDictionary,
    noise: &NoisePool,
    rng: &mut StreamRng,
) -> Result<DistractorSet> {
    if n_var == 0 {
        return Err(BenchError::Config("n_var must be at least 1".into()));
    }
    if hops == 0 || hops > template.relations.len() {
        return Err(BenchError::Config(format!(
            "template `{}` supports 1..={} hops, asked for {hops}",
            template.id,
            template.relations.len()
        )));
    }
    let gold: HashSet<&str> = chain.entities.iter().map(String::as_str).collect();
    let too_small = |what: &str| {
        BenchError::Generation(format!(
            "template `{}`: entity pool too small for distractors ({what})",
            template.id
        ))
    };

    let mut anchors: Vec<Vec<&String>> = Vec::with_capacity(hops);
    for k in 0..hops {
        let mut pool: Vec<&String> = dict
            .category(&template.entity_seq[k])?
            .iter()
            .filter(|e| !gold.contains(e.as_str()))
            .collect();
        rng.shuffle(&mut pool);
        anchors.push(pool);
    }
    let mut next_anchor = vec![0usize; hops];
    let mut used: HashSet<(usize, &str, &str)> = HashSet::new();
    let max_idle = hops * anchors.iter().map(Vec::len).max().unwrap_or(0);

    // Anchors are recycled once every candidate has been used, but a fact is
    // never repeated; give up after a full pass that yields nothing new.
    let mut similar = Vec::with_capacity(n_dist);
    let mut round = 0usize;
    let mut idle = 0usize;
    while similar.len() < n_dist {
        let k = round % hops;
        round += 1;
        if anchors[k].is_empty() {
            return Err(too_small("no anchor subjects"));
        }
        let subject = anchors[k][next_anchor[k] % anchors[k].len()];
        next_anchor[k] += 1;

        let mut objects: Vec<&String> = dict
            .category(&template.entity_seq[k + 1])?
            .iter()
            .filter(|e| !gold.contains(e.as_str()) && *e != subject)
            .filter(|e| !used.contains(&(k, subject.as_str(), e.as_str())))
            .collect();
        let take = n_var.min(n_dist - similar.len()).min(objects.len());
        if take == 0 {
            idle += 1;
            if idle > max_idle {
                return Err(too_small("no unused facts left"));
            }
            continue;
        }
        idle = 0;
        for slot in 0..take {
            let j = slot + rng.below(objects.len() - slot);
            objects.swap(slot, j);
            let object = objects[slot];
            used.insert((k, subject.as_str(), object.as_str()));
            similar.push(Fact {
                relation: k,
                subject: subject.clone(),
                object: object.clone(),
                text: template.fact_text(k, subject, object),
            });
        }
    }

    let mut order: Vec<usize> = (0..noise.len()).collect();
    rng.shuffle(&mut order);
    let noise = order
        .iter()
        .cycle()
        .take(n_noise)
        .map(|&i| noise.get(i).to_owned())
        .collect();

    Ok(DistractorSet { similar, noise })
}

/// Checks that, for every gold subject of a `hops`-hop question, each
/// statement of its relation found in `text` names the gold object.
/// Returns a description of the first violation.
pub fn find_guard_violation(
    text: &str,
    chain: &ReasoningChain,
    template: &ChainTemplate,
    hops: usize,
) -> Option<String> {
    const SENTINEL: &str = "\u{1F}";
    for k in 0..hops {
        let subject = &chain.entities[k];
        let object = &chain.entities[k + 1];
        let pattern = template.fact_text(k, subject, SENTINEL);
        let (before, after) = pattern.split_once(SENTINEL)?;
        let subject_first = before.contains(subject.as_str());
        let key = if subject_first { before } else { after };
        for (pos, _) in text.match_indices(key) {
            let ok = if subject_first {
                text[pos + key.len()..].starts_with(&format!("{object}{after}"))
            } else {
                text[..pos].ends_with(&format!("{before}{object}"))
            };
            if !ok {
                return Some(format!(
                    "relation {k} of `{subject}` is stated with an object other than `{object}`"
                ));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchgen::content::Content;
    use proptest::prelude::*;

    fn content() -> Content {
        Content::bundled()
    }

    #[test]
    fn chain_is_deterministic_and_instantiated() {
        let c = content();
        let t = &c.templates[0];
        let a = generate_chain(t, &c.dictionary, &mut StreamRng::new(1, 0)).unwrap();
        let b = generate_chain(t, &c.dictionary, &mut StreamRng::new(1, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.entities.len(), 5);
        let distinct: HashSet<&String> = a.entities.iter().collect();
        assert_eq!(distinct.len(), 5);
        assert!(a.chain_texts[0].contains(&a.entities[0]));
        assert!(a.chain_texts[0].contains(&a.entities[1]));
        assert!(c.dictionary.category("person").unwrap().contains(&a.entities[0]));
        assert!(c.dictionary.category("book").unwrap().contains(&a.entities[1]));
    }

    #[test]
    fn missing_category_is_a_config_error() {
        let c = content();
        let mut dict = c.dictionary.clone();
        dict.categories.remove("film");
        let err = generate_chain(&c.templates[0], &dict, &mut StreamRng::new(1, 0)).unwrap_err();
        assert!(matches!(err, BenchError::Config(_)), "{err}");
    }

    #[test]
    fn scale_examples() {
        assert_eq!(scale_distractors(10, 1), 10);
        assert_eq!(scale_distractors(10, 3), 22);
        assert_eq!(scale_distractors(7, 4), 19);
        assert_eq!(scale_distractors(0, 4), 0);
    }

    #[test]
    fn scale_matches_float_formula() {
        for n in 0..500usize {
            for h in 1..=4u32 {
                let exact = n as f64 * (1.0 + 0.6 * f64::from(h - 1));
                let floor = exact.floor();
                // Float products may fall just below an integer, so compare
                // against a rounded exact value where the two could disagree.
                let expected = if (exact - exact.round()).abs() < 1e-9 { exact.round() } else { floor };
                assert_eq!(scale_distractors(n, h), expected as usize, "n={n} h={h}");
            }
        }
    }

    #[test]
    fn empty_distractor_set() {
        let c = content();
        let t = &c.templates[0];
        let mut rng = StreamRng::new(3, 0);
        let chain = generate_chain(t, &c.dictionary, &mut rng).unwrap();
        let d = generate_distractors(&chain, t, 2, 0, 5, 0, &c.dictionary, &c.noise, &mut rng).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn too_small_pool_names_template() {
        let c = content();
        let t = &c.templates[0];
        let chain = generate_chain(t, &c.dictionary, &mut StreamRng::new(3, 0)).unwrap();
        let err = generate_distractors(&chain, t, 1, 10_000, 5, 0, &c.dictionary, &c.noise, &mut StreamRng::new(3, 1))
            .unwrap_err();
        assert!(err.to_string().contains(&t.id));
    }

    #[test]
    fn guard_detects_conflicting_object() {
        let c = content();
        let t = &c.templates[0];
        let chain = generate_chain(t, &c.dictionary, &mut StreamRng::new(9, 0)).unwrap();
        let good = chain.chain_texts[..3].join(" ");
        assert_eq!(find_guard_violation(&good, &chain, t, 3), None);
        // Same subject, same relation, different object: the case the guard forbids.
        let other = c.dictionary.category("book").unwrap().iter().find(|b| **b != chain.entities[1]).unwrap();
        let bad = format!("{good} {}", t.fact_text(0, &chain.entities[0], other));
        assert!(find_guard_violation(&bad, &chain, t, 3).is_some());
        // A distractor with an unrelated subject is allowed.
        let stranger = c.dictionary.category("person").unwrap().iter().find(|p| !chain.entities.contains(p)).unwrap();
        let fine = format!("{good} {}", t.fact_text(0, stranger, other));
        assert_eq!(find_guard_violation(&fine, &chain, t, 3), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn distractors_respect_guard(seed in any::<u64>(), tidx in 0usize..8, hops in 1usize..=4, n_dist in 0usize..80, n_var in 1usize..=6, n_noise in 0usize..40) {
            let c = content();
            let t = &c.templates[tidx % c.templates.len()];
            let mut rng = StreamRng::new(seed, 5);
            let chain = generate_chain(t, &c.dictionary, &mut rng).unwrap();
            let d = generate_distractors(&chain, t, hops, n_dist, n_var, n_noise, &c.dictionary, &c.noise, &mut rng).unwrap();
            prop_assert_eq!(d.similar.len(), n_dist);
            prop_assert_eq!(d.noise.len(), n_noise);
            let gold_texts: HashSet<&String> = chain.chain_texts.iter().collect();
            for f in &d.similar {
                prop_assert!(f.relation < hops);
                prop_assert!(!gold_texts.contains(&f.text));
                for e in &chain.entities {
                    prop_assert!(!f.text.contains(e.as_str()));
                }
            }
            let mut all = chain.chain_texts[..hops].join(" ");
            for f in &d.similar { all.push(' '); all.push_str(&f.text); }
            for s in &d.noise { all.push(' '); all.push_str(s); }
            prop_assert_eq!(find_guard_violation(&all, &chain, t, hops), None);
            prop_assert_eq!(all.matches(chain.answer(hops)).count(), 1);

            let mut again = StreamRng::new(seed, 5);
            let chain2 = generate_chain(t, &c.dictionary, &mut again).unwrap();
            let d2 = generate_distractors(&chain2, t, hops, n_dist, n_var, n_noise, &c.dictionary, &c.noise, &mut again).unwrap();
            prop_assert_eq!(d, d2);
        }
    }
}
