//! Answer extraction, token-level F1 and report aggregation.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

/// Marker every prompt asks the model to end its reply with.
pub const FINAL_ANSWER_MARKER: &str = "FINAL ANSWER:";

/// Lowercases, strips ASCII punctuation, drops the articles `a`, `an` and
/// `the`, and splits on whitespace.
pub fn normalize_answer(s: &str) -> Vec<String> {
    let cleaned: String = s
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .map(str::to_owned)
        .collect()
}

/// Multiset token F1 between normalized prediction and gold answer.
pub fn token_f1(prediction: &str, gold: &str) -> f64 {
    let pred = normalize_answer(prediction);
    let gold = normalize_answer(gold);
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    if pred.is_empty() || gold.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &pred {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Returns the text after the last `marker` (case-insensitive) on its line,
/// trimmed, if any line carries the marker.
pub fn find_marker(raw: &str, marker: &str) -> Option<String> {
    raw.lines().rev().find_map(|line| {
        line.char_indices()
            .map(|(i, _)| i)
            .filter(|&i| {
                line.get(i..i + marker.len())
                    .is_some_and(|s| s.eq_ignore_ascii_case(marker))
            })
            .last()
            .map(|at| line[at + marker.len()..].trim().to_owned())
    })
}

/// Extracts the answer `g(Y)` from a raw model output: the remainder of the
/// `FINAL ANSWER:` line when present, otherwise the last non-empty line.
pub fn extract_answer(raw_output: &str) -> String {
    if let Some(ans) = find_marker(raw_output, FINAL_ANSWER_MARKER) {
        return ans;
    }
    raw_output
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .last()
        .unwrap_or("")
        .to_owned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRun {
    pub method: String,
    pub hops: u32,
    pub context_len: u32,
    pub sample_id: String,
    pub prediction: String,
    pub gold: String,
    pub f1: f64,
}

impl ScoredRun {
    pub fn score(
        method: &str,
        hops: u32,
        context_len: u32,
        sample_id: &str,
        prediction: &str,
        gold: &str,
    ) -> Self {
        ScoredRun {
            method: method.to_owned(),
            hops,
            context_len,
            sample_id: sample_id.to_owned(),
            prediction: prediction.to_owned(),
            gold: gold.to_owned(),
            f1: token_f1(prediction, gold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub hops: u32,
    pub context_len: u32,
    pub f1: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopAverage {
    pub hops: u32,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextAverage {
    pub context_len: u32,
    pub f1: f64,
}

/// All aggregates for one method. Averages only cover cells that have runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub cells: Vec<CellScore>,
    pub hop_averages: Vec<HopAverage>,
    /// Per context length, over the 2-4 hop cells.
    pub context_averages: Vec<ContextAverage>,
    /// Mean over all 2-4 hop cells.
    pub overall_average: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub methods: Vec<MethodReport>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn is_multi_hop(hops: u32) -> bool {
    (2..=4).contains(&hops)
}

/// Groups runs into per-cell means and derives the row/column aggregates.
pub fn aggregate(runs: &[ScoredRun]) -> ReportTable {
    let mut by_method: BTreeMap<&str, BTreeMap<(u32, u32), Vec<f64>>> = BTreeMap::new();
    for r in runs {
        by_method
            .entry(r.method.as_str())
            .or_default()
            .entry((r.hops, r.context_len))
            .or_default()
            .push(r.f1);
    }
    // Sort per-cell values so the mean is independent of run order.
    let methods = by_method
        .into_iter()
        .map(|(method, cells)| {
            let cells: Vec<CellScore> = cells
                .into_iter()
                .map(|((hops, context_len), mut f1s)| {
                    f1s.sort_by(f64::total_cmp);
                    CellScore { hops, context_len, f1: mean(f1s.iter().copied()).unwrap_or(0.0), n_runs: f1s.len() }
                })
                .collect();

            let mut rows: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
            let mut cols: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
            for c in &cells {
                rows.entry(c.hops).or_default().push(c.f1);
                if is_multi_hop(c.hops) {
                    cols.entry(c.context_len).or_default().push(c.f1);
                }
            }
            let hop_averages = rows
                .into_iter()
                .filter_map(|(hops, v)| mean(v).map(|f1| HopAverage { hops, f1 }))
                .collect();
            let context_averages = cols
                .into_iter()
                .filter_map(|(context_len, v)| mean(v).map(|f1| ContextAverage { context_len, f1 }))
                .collect();
            let overall_average = mean(cells.iter().filter(|c| is_multi_hop(c.hops)).map(|c| c.f1));
            MethodReport { method: method.to_owned(), cells, hop_averages, context_averages, overall_average }
        })
        .collect();
    ReportTable { methods }
}

impl ReportTable {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn cell(&self, method: &str, hops: u32, context_len: u32) -> Option<f64> {
        self.method(method)?
            .cells
            .iter()
            .find(|c| c.hops == hops && c.context_len == context_len)
            .map(|c| c.f1)
    }

    pub fn is_empty(&self) -> bool {
        self.methods.is_empty()
    }

    /// Table-shaped CSV: one column per method, rows for cells followed by
    /// overall, per-hop and per-context averages. Absent values are blank.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["row".to_owned(), "hops".to_owned(), "context_len".to_owned()];
        header.extend(self.methods.iter().map(|m| m.method.clone()));
        w.write_record(&header)?;

        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
        let mut cell_keys: Vec<(u32, u32)> = self
            .methods
            .iter()
            .flat_map(|m| m.cells.iter().map(|c| (c.hops, c.context_len)))
            .collect();
        cell_keys.sort_unstable();
        cell_keys.dedup();
        for (h, l) in &cell_keys {
            let mut row = vec!["cell".to_owned(), h.to_string(), l.to_string()];
            row.extend(self.methods.iter().map(|m| fmt(self.cell(&m.method, *h, *l))));
            w.write_record(&row)?;
        }

        let mut row = vec!["overall_average_2_4_hop".to_owned(), String::new(), String::new()];
        row.extend(self.methods.iter().map(|m| fmt(m.overall_average)));
        w.write_record(&row)?;

        let mut hops: Vec<u32> = cell_keys.iter().map(|k| k.0).collect();
        hops.dedup();
        for h in hops {
            let mut row = vec!["hop_average".to_owned(), h.to_string(), String::new()];
            row.extend(self.methods.iter().map(|m| {
                fmt(m.hop_averages.iter().find(|a| a.hops == h).map(|a| a.f1))
            }));
            w.write_record(&row)?;
        }

        let mut lens: Vec<u32> = cell_keys.iter().filter(|k| is_multi_hop(k.0)).map(|k| k.1).collect();
        lens.sort_unstable();
        lens.dedup();
        for l in lens {
            let mut row = vec!["context_average_2_4_hop".to_owned(), String::new(), l.to_string()];
            row.extend(self.methods.iter().map(|m| {
                fmt(m.context_averages.iter().find(|a| a.context_len == l).map(|a| a.f1))
            }));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-cell means in the `method,hops,context_len,f1` layout read by the fitter.
    pub fn write_observations_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "hops", "context_len", "f1"])?;
        for m in &self.methods {
            for c in &m.cells {
                w.write_record([
                    m.method.clone(),
                    c.hops.to_string(),
                    c.context_len.to_string(),
                    c.f1.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
