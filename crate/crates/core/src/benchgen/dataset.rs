//! Dataset assembly, statistics and on-disk layout.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::chain::{find_guard_violation, generate_chain, generate_distractors, scale_distractors, ReasoningChain};
use super::content::Content;
use super::context::create_context;
use super::rng::{self, StreamRng};
use super::{BenchError, DatasetConfig, Result};
use crate::par::{self, Exec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub hops: u32,
    pub target_len: u32,
    pub token_count: u64,
    pub word_count: usize,
    pub template_id: String,
    /// All entities of the underlying chain; the first `hops + 1` are used.
    pub chain_entities: Vec<String>,
    /// Gold evidence sentences in logical order.
    pub gold_evidence: Vec<String>,
    /// Character offsets of the gold sentences in physical order.
    pub evidence_spans: Vec<[usize; 2]>,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub hops: u32,
    pub context_len: u32,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub hops: u32,
    pub context_len: u32,
    pub count: usize,
    pub mean_token_count: f64,
    /// Mean of `|tokens - target| / target`.
    pub mean_token_error: f64,
    pub max_token_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub rng_algorithm: String,
    pub seed: u64,
    pub tokens_per_word: f64,
    pub total_samples: usize,
    pub cells: Vec<CellStats>,
    pub template_usage: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub cells: Vec<Cell>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.cells.iter().map(|c| c.samples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self, hops: u32, context_len: u32) -> Option<&Cell> {
        self.cells.iter().find(|c| c.hops == hops && c.context_len == context_len)
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.cells.iter().flat_map(|c| c.samples.iter())
    }

    pub fn stats(&self, cfg: &DatasetConfig) -> DatasetStats {
        let mut template_usage = BTreeMap::new();
        let cells = self
            .cells
            .iter()
            .map(|cell| {
                let target = f64::from(cell.context_len);
                let n = cell.samples.len().max(1) as f64;
                let mut sum_tokens = 0.0;
                let mut sum_err = 0.0;
                let mut max_err: f64 = 0.0;
                for s in &cell.samples {
                    *template_usage.entry(s.template_id.clone()).or_insert(0) += 1;
                    let err = (s.token_count as f64 - target).abs() / target;
                    sum_tokens += s.token_count as f64;
                    sum_err += err;
                    max_err = max_err.max(err);
                }
                CellStats {
                    hops: cell.hops,
                    context_len: cell.context_len,
                    count: cell.samples.len(),
                    mean_token_count: sum_tokens / n,
                    mean_token_error: sum_err / n,
                    max_token_error: max_err,
                }
            })
            .collect();
        DatasetStats {
            rng_algorithm: rng::ALGORITHM.to_owned(),
            seed: cfg.seed,
            tokens_per_word: cfg.tokens_per_word,
            total_samples: self.len(),
            cells,
            template_usage,
        }
    }
}

pub fn build_dataset(cfg: &DatasetConfig, content: &Content) -> Result<Dataset> {
    build_dataset_with(cfg, content, Exec::default())
}

/// Builds every (hops, length) cell. Chain `i` uses template `i mod |T|` and is
/// shared by sample `i` of every cell; each sample then draws distractors and
/// placement from its own keyed stream.
pub fn build_dataset_with(cfg: &DatasetConfig, content: &Content, exec: Exec) -> Result<Dataset> {
    cfg.validate()?;
    if content.templates.is_empty() {
        return Err(BenchError::Config("no chain templates".into()));
    }
    let max_hops = cfg.hops.iter().copied().max().unwrap_or(0) as usize;
    if let Some(t) = content.templates.iter().find(|t| t.max_hops() < max_hops) {
        return Err(BenchError::Config(format!(
            "template `{}` supports at most {} hops but {max_hops} were requested",
            t.id,
            t.max_hops()
        )));
    }

    let chains: Vec<ReasoningChain> = par::map_range(cfg.n_per_cell, exec, |i| {
        let template = &content.templates[i % content.templates.len()];
        let mut rng = StreamRng::new(cfg.seed, rng::chain_stream(i as u64));
        generate_chain(template, &content.dictionary, &mut rng)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let cells: Vec<(u32, u32)> = cfg
        .hops
        .iter()
        .flat_map(|&h| cfg.lengths.iter().map(move |&l| (h, l)))
        .collect();
    let n = cfg.n_per_cell;
    let samples = par::map_range(cells.len() * n, exec, |flat| {
        let (h, l) = cells[flat / n];
        let i = flat % n;
        build_sample(cfg, content, &chains[i], h, l, i).map_err(|e| BenchError::Sample {
            hops: h,
            context_len: l,
            index: i,
            source: Box::new(e),
        })
    });

    let mut samples = samples.into_iter();
    let mut out = Vec::with_capacity(cells.len());
    for &(hops, context_len) in &cells {
        let cell_samples = samples.by_ref().take(n).collect::<Result<Vec<_>>>()?;
        out.push(Cell { hops, context_len, samples: cell_samples });
    }
    Ok(Dataset { cells: out })
}

fn build_sample(
    cfg: &DatasetConfig,
    content: &Content,
    chain: &ReasoningChain,
    hops: u32,
    context_len: u32,
    index: usize,
) -> Result<Sample> {
    let template = content
        .template(&chain.template_id)
        .ok_or_else(|| BenchError::Config(format!("unknown template `{}`", chain.template_id)))?;
    let h = hops as usize;
    let mut rng = StreamRng::new(cfg.seed, rng::sample_stream(hops, context_len, index as u64));
    let n_dist = scale_distractors(cfg.base_distractors(context_len), hops);
    let distractors = generate_distractors(
        chain,
        template,
        h,
        n_dist,
        cfg.n_var,
        cfg.noise_sentences(context_len),
        &content.dictionary,
        &content.noise,
        &mut rng,
    )?;
    let gold = chain.gold_evidence(h).to_vec();
    let layout = cfg.layout_for(hops)?;
    let placed = create_context(
        &gold,
        &distractors,
        layout,
        cfg.token_counter(),
        context_len,
        &content.noise,
        &mut rng,
    )?;
    if let Some(v) = find_guard_violation(&placed.context, chain, template, h) {
        return Err(BenchError::Generation(format!("answer-uniqueness guard: {v}")));
    }
    Ok(Sample {
        id: format!("{hops}hop-{context_len}-{index:04}"),
        question: template.nested_question(0, h, &chain.entities[0]),
        answer: chain.answer(h).to_owned(),
        hops,
        target_len: context_len,
        token_count: placed.token_count,
        word_count: placed.word_count,
        template_id: chain.template_id.clone(),
        chain_entities: chain.entities.clone(),
        gold_evidence: gold,
        evidence_spans: placed.evidence_spans.iter().map(|&(s, e)| [s, e]).collect(),
        context: placed.context,
    })
}

/// `500 -> "0.5k"`, `10000 -> "10k"`.
pub fn length_label(context_len: u32) -> String {
    format!("{}k", f64::from(context_len) / 1000.0)
}

pub fn cell_path(root: &Path, hops: u32, context_len: u32) -> PathBuf {
    root.join(format!("{hops}hop"))
        .join(format!("multi_hop_chain_{}.json", length_label(context_len)))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.display().to_string(), source }
}

fn to_json<T: Serialize>(value: &T, path: &Path) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| BenchError::Json { path: path.display().to_string(), source })?;
    text.push('\n');
    Ok(text)
}

/// Writes one JSON array per cell plus `stats.json`, returning the stats.
pub fn write_dataset(dataset: &Dataset, cfg: &DatasetConfig, root: &Path) -> Result<DatasetStats> {
    for cell in &dataset.cells {
        let path = cell_path(root, cell.hops, cell.context_len);
        let dir = path.parent().expect("cell path has a parent");
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let text = to_json(&cell.samples, &path)?;
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    let stats = dataset.stats(cfg);
    let path = root.join("stats.json");
    fs::write(&path, to_json(&stats, &path)?).map_err(io_err(&path))?;
    Ok(stats)
}

pub fn load_cell(path: &Path) -> Result<Vec<Sample>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| BenchError::Json { path: path.display().to_string(), source })
}

fn parse_cell_name(dir: &str, file: &str) -> Option<(u32, u32)> {
    let hops = dir.strip_suffix("hop")?.parse().ok()?;
    let label = file.strip_prefix("multi_hop_chain_")?.strip_suffix("k.json")?;
    let thousands: f64 = label.parse().ok()?;
    let len = (thousands * 1000.0).round();
    (len > 0.0 && len <= f64::from(u32::MAX)).then_some((hops, len as u32))
}

/// Loads every `{h}hop/multi_hop_chain_*.json` file under `root`, ordered by
/// (hops, length).
pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let mut cells = Vec::new();
    for entry in fs::read_dir(root).map_err(io_err(root))? {
        let entry = entry.map_err(io_err(root))?;
        let dir = entry.path();
        if !dir.is_dir() {
            continue;
        }
        let dir_name = entry.file_name().to_string_lossy().into_owned();
        for file in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let file = file.map_err(io_err(&dir))?;
            let name = file.file_name().to_string_lossy().into_owned();
            if let Some((hops, context_len)) = parse_cell_name(&dir_name, &name) {
                let samples = load_cell(&file.path())?;
                cells.push(Cell { hops, context_len, samples });
            }
        }
    }
    if cells.is_empty() {
        return Err(BenchError::Config(format!("no dataset files found under {}", root.display())));
    }
    cells.sort_by_key(|c| (c.hops, c.context_len));
    Ok(Dataset { cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> DatasetConfig {
        DatasetConfig {
            n_per_cell: 3,
            lengths: vec![500, 2000],
            hops: vec![1, 3],
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn labels_and_paths() {
        assert_eq!(length_label(500), "0.5k");
        assert_eq!(length_label(1000), "1k");
        assert_eq!(length_label(10000), "10k");
        assert_eq!(
            cell_path(Path::new("d"), 2, 500),
            Path::new("d/2hop/multi_hop_chain_0.5k.json")
        );
        assert_eq!(parse_cell_name("2hop", "multi_hop_chain_0.5k.json"), Some((2, 500)));
        assert_eq!(parse_cell_name("4hop", "multi_hop_chain_10k.json"), Some((4, 10000)));
        assert_eq!(parse_cell_name("4hops", "multi_hop_chain_10k.json"), None);
        assert_eq!(parse_cell_name("4hop", "stats.json"), None);
    }

    #[test]
    fn counting_example() {
        let cfg = DatasetConfig { n_per_cell: 2, lengths: vec![500], hops: vec![1, 2], ..DatasetConfig::default() };
        let ds = build_dataset(&cfg, &Content::bundled()).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.cells.len(), 2);
    }

    #[test]
    fn round_robin_templates_and_shared_chains() {
        let content = Content::bundled();
        let cfg = DatasetConfig { n_per_cell: 10, ..small_cfg() };
        let ds = build_dataset(&cfg, &content).unwrap();
        for cell in &ds.cells {
            for (i, s) in cell.samples.iter().enumerate() {
                assert_eq!(s.template_id, content.templates[i % content.templates.len()].id);
                assert_eq!(s.chain_entities, ds.cells[0].samples[i].chain_entities);
                assert_eq!(s.answer, s.chain_entities[s.hops as usize]);
                assert!(s.context.contains(&s.answer));
            }
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let content = Content::bundled();
        let cfg = small_cfg();
        let a = build_dataset_with(&cfg, &content, Exec::Sequential).unwrap();
        let b = build_dataset_with(&cfg, &content, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn write_and_load_round_trip() {
        let content = Content::bundled();
        let cfg = small_cfg();
        let ds = build_dataset(&cfg, &content).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let stats = write_dataset(&ds, &cfg, dir.path()).unwrap();
        assert_eq!(stats.total_samples, 12);
        assert_eq!(stats.template_usage.values().sum::<usize>(), 12);
        assert!(dir.path().join("1hop/multi_hop_chain_0.5k.json").exists());
        assert!(dir.path().join("3hop/multi_hop_chain_2k.json").exists());
        let text = fs::read_to_string(dir.path().join("3hop/multi_hop_chain_2k.json")).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.contains("\"evidence_spans\""));
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded, ds);
    }

    #[test]
    fn too_many_hops_is_a_config_error() {
        let mut cfg = small_cfg();
        cfg.hops = vec![5];
        cfg.layout.push(crate::benchgen::EvidenceLayout {
            hops: 5,
            order: vec![1, 2, 3, 4, 5],
            positions: vec![0.1, 0.2, 0.3, 0.4, 0.5],
        });
        let err = build_dataset(&cfg, &Content::bundled()).unwrap_err();
        assert!(matches!(err, BenchError::Config(_)));
    }

    #[test]
    fn sample_errors_carry_cell_coordinates() {
        let mut cfg = small_cfg();
        cfg.lengths = vec![6];
        cfg.hops = vec![3];
        let err = build_dataset(&cfg, &Content::bundled()).unwrap_err();
        match err {
            BenchError::Sample { hops, context_len, .. } => assert_eq!((hops, context_len), (3, 6)),
            other => panic!("unexpected {other}"),
        }
    }
}
