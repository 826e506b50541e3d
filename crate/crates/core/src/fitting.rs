//! Exhaustive grid fit of the demand/capacity model to empirical F1 grids.
//!
//! The predicted F1 at `(h, L)` is `min(1, (C + 1) / max(beta(h, L), 1e-9))`
//! and the objective is the (optionally weighted) mean absolute error.
//!
//! The scan visits quadruples in the canonical order alpha, gamma, beta0, C
//! (outermost to innermost) and keeps the first strict minimum. The parallel
//! path splits the `(alpha, gamma)` plane across workers, each reporting its
//! local `(loss, canonical index)` minimum; the lexicographic reduction picks
//! exactly what the sequential scan picks, and per-quadruple losses are
//! summed in observation order either way, so both paths agree bit for bit.

use std::io::{Read, Write};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Exec};
use crate::scoring::ReportTable;
use crate::theory::{self, BoundParams, TaskPoint};

/// Lower clamp on the modelled demand before division.
pub const MIN_DEMAND: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("input error: {0}")]
    Input(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FitError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub point: TaskPoint,
    pub f1: f64,
    /// Relative weight in the loss; 1 unless overridden.
    pub weight: f64,
}

impl Observation {
    pub fn new(hops: u32, context_len: u32, f1: f64) -> Result<Self> {
        Self::weighted(hops, context_len, f1, 1.0)
    }

    pub fn weighted(hops: u32, context_len: u32, f1: f64, weight: f64) -> Result<Self> {
        let point = TaskPoint::new(hops, context_len).map_err(|e| FitError::Domain(e.to_string()))?;
        if !(0.0..=1.0).contains(&f1) {
            return Err(FitError::Domain(format!("f1 must lie in [0, 1], got {f1}")));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(FitError::Domain(format!("weight must be > 0, got {weight}")));
        }
        Ok(Observation { point, f1, weight })
    }
}

/// Evenly spaced values including both endpoints.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n)
                .map(|i| if i + 1 == n { stop } else { start + step * i as f64 })
                .collect()
        }
    }
}

/// Geometrically spaced values including both endpoints.
pub fn logspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    linspace(start.log10(), stop.log10(), n)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitGrid {
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub beta0s: Vec<f64>,
    pub capacities: Vec<f64>,
}

impl Default for FitGrid {
    fn default() -> Self {
        FitGrid {
            alphas: logspace(1e-4, 1e-2, 15),
            gammas: linspace(1.05, 3.00, 20),
            beta0s: linspace(0.0, 200.0, 21),
            capacities: linspace(20.0, 400.0, 25),
        }
    }
}

impl FitGrid {
    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("alphas", &self.alphas),
            ("gammas", &self.gammas),
            ("beta0s", &self.beta0s),
            ("capacities", &self.capacities),
        ];
        for (name, axis) in axes {
            if axis.is_empty() {
                return Err(FitError::Grid(format!("{name} is empty")));
            }
            if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(FitError::Grid(format!("{name} must be finite and strictly increasing")));
            }
        }
        if self.alphas[0] <= 0.0 {
            return Err(FitError::Grid("alphas must be > 0".into()));
        }
        if self.gammas[0] < 1.0 {
            return Err(FitError::Grid("gammas must be >= 1".into()));
        }
        if self.beta0s[0] < 0.0 || self.capacities[0] < 0.0 {
            return Err(FitError::Grid("beta0s and capacities must be >= 0".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.alphas.len() * self.gammas.len() * self.beta0s.len() * self.capacities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadruple at a canonical (alpha-outer, C-inner) flat index.
    pub fn params_at(&self, index: usize) -> BoundParams {
        let nc = self.capacities.len();
        let nb = self.beta0s.len();
        let ng = self.gammas.len();
        let c = index % nc;
        let b = (index / nc) % nb;
        let g = (index / (nc * nb)) % ng;
        let a = index / (nc * nb * ng);
        BoundParams {
            beta0: self.beta0s[b],
            alpha: self.alphas[a],
            gamma: self.gammas[g],
            capacity: self.capacities[c],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: BoundParams,
    pub mae: f64,
    pub n_obs: usize,
}

/// `min(1, (C + 1) / max(beta(h, L), 1e-9))`.
pub fn predict(params: &BoundParams, point: TaskPoint) -> f64 {
    let beta = theory::demand(params, point).max(MIN_DEMAND);
    ((params.capacity + 1.0) / beta).min(1.0)
}

fn check_obs(obs: &[Observation]) -> Result<()> {
    if obs.is_empty() {
        return Err(FitError::Domain("no observations".into()));
    }
    Ok(())
}

/// Weighted mean absolute error; the plain mean when all weights are 1.
pub fn mae(params: &BoundParams, obs: &[Observation]) -> Result<f64> {
    check_obs(obs)?;
    let (num, den) = obs.iter().fold((0.0, 0.0), |(n, d), o| {
        (n + o.weight * (predict(params, o.point) - o.f1).abs(), d + o.weight)
    });
    Ok(num / den)
}

#[derive(Debug, Clone, Copy)]
struct Best {
    loss: f64,
    index: usize,
}

impl Best {
    fn better_than(&self, other: &Best) -> bool {
        self.loss < other.loss || (self.loss == other.loss && self.index < other.index)
    }
}

/// Scans every `(beta0, C)` for one `(alpha, gamma)` cell.
fn scan_cell(grid: &FitGrid, obs: &[Observation], weight_sum: f64, a: usize, g: usize) -> Best {
    let alpha = grid.alphas[a];
    let gamma = grid.gammas[g];
    let base: Vec<f64> = obs.iter().map(|o| theory::context_burden(alpha, gamma, o.point)).collect();
    let mut beta = vec![0.0; obs.len()];
    let nb = grid.beta0s.len();
    let nc = grid.capacities.len();
    let cell_offset = (a * grid.gammas.len() + g) * nb * nc;
    let mut best = Best { loss: f64::INFINITY, index: usize::MAX };
    for (bi, &beta0) in grid.beta0s.iter().enumerate() {
        for (slot, b) in beta.iter_mut().zip(&base) {
            *slot = (b + beta0).max(MIN_DEMAND);
        }
        for (ci, &cap) in grid.capacities.iter().enumerate() {
            let mut num = 0.0;
            for (o, &bt) in obs.iter().zip(&beta) {
                num += o.weight * (((cap + 1.0) / bt).min(1.0) - o.f1).abs();
            }
            let loss = num / weight_sum;
            if loss < best.loss {
                best = Best { loss, index: cell_offset + bi * nc + ci };
            }
        }
    }
    best
}

/// Exhaustive grid fit using the default execution mode.
pub fn fit(obs: &[Observation], grid: &FitGrid) -> Result<FitResult> {
    fit_with(obs, grid, Exec::default())
}

pub fn fit_with(obs: &[Observation], grid: &FitGrid, exec: Exec) -> Result<FitResult> {
    check_obs(obs)?;
    grid.validate()?;
    let weight_sum: f64 = obs.iter().map(|o| o.weight).sum();
    let ng = grid.gammas.len();
    let cells = grid.alphas.len() * ng;
    let locals = par::map_range(cells, exec, |cell| scan_cell(grid, obs, weight_sum, cell / ng, cell % ng));
    let best = locals
        .into_iter()
        .reduce(|acc, b| if b.better_than(&acc) { b } else { acc })
        .expect("grid validated non-empty");
    Ok(FitResult { params: grid.params_at(best.index), mae: best.loss, n_obs: obs.len() })
}

/// Fits `n_resamples` with-replacement resamples of `obs`.
pub fn bootstrap_fit(obs: &[Observation], grid: &FitGrid, n_resamples: usize, seed: u64) -> Result<Vec<FitResult>> {
    check_obs(obs)?;
    if n_resamples == 0 {
        return Err(FitError::Domain("n_resamples must be >= 1".into()));
    }
    let resamples = bootstrap_indices(obs.len(), n_resamples, seed);
    par::map_slice(&resamples, Exec::default(), |idx| {
        let sample: Vec<Observation> = idx.iter().map(|&i| obs[i]).collect();
        // Each resample scans sequentially; the parallelism is across resamples.
        fit_with(&sample, grid, Exec::Sequential)
    })
    .into_iter()
    .collect()
}

/// Resample index sets drawn from one ChaCha8 stream seeded with `seed`.
pub fn bootstrap_indices(n: usize, n_resamples: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_resamples)
        .map(|_| (0..n).map(|_| ((rng.next_u64() as u128 * n as u128) >> 64) as usize).collect())
        .collect()
}

/// 2.5th and 97.5th percentiles of each fitted parameter across resamples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapInterval {
    pub alpha: (f64, f64),
    pub gamma: (f64, f64),
    pub beta0: (f64, f64),
    pub capacity: (f64, f64),
    pub mae: (f64, f64),
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn bootstrap_interval(results: &[FitResult]) -> Option<BootstrapInterval> {
    if results.is_empty() {
        return None;
    }
    let band = |f: fn(&FitResult) -> f64| {
        let mut v: Vec<f64> = results.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        (percentile(&v, 0.025), percentile(&v, 0.975))
    };
    Some(BootstrapInterval {
        alpha: band(|r| r.params.alpha),
        gamma: band(|r| r.params.gamma),
        beta0: band(|r| r.params.beta0),
        capacity: band(|r| r.params.capacity),
        mae: band(|r| r.mae),
    })
}

#[derive(Debug, Deserialize)]
struct ObservationRow {
    method: String,
    hops: u32,
    context_len: u32,
    f1: f64,
    #[serde(default)]
    weight: Option<f64>,
}

/// Observations grouped by method, in first-appearance order.
pub type MethodObservations = Vec<(String, Vec<Observation>)>;

fn push_grouped(groups: &mut MethodObservations, method: &str, obs: Observation) {
    match groups.iter_mut().find(|(m, _)| m == method) {
        Some((_, v)) => v.push(obs),
        None => groups.push((method.to_owned(), vec![obs])),
    }
}

/// Reads `method,hops,context_len,f1[,weight]` CSV.
pub fn read_observations_csv<R: Read>(input: R) -> Result<MethodObservations> {
    let mut groups = MethodObservations::new();
    let mut rdr = csv::Reader::from_reader(input);
    for (line, row) in rdr.deserialize::<ObservationRow>().enumerate() {
        let row = row?;
        let obs = Observation::weighted(row.hops, row.context_len, row.f1, row.weight.unwrap_or(1.0))
            .map_err(|e| FitError::Input(format!("data row {}: {e}", line + 1)))?;
        push_grouped(&mut groups, &row.method, obs);
    }
    Ok(groups)
}

/// Reads the per-cell means out of a report JSON written by the scoring step.
pub fn read_observations_report<R: Read>(input: R) -> Result<MethodObservations> {
    let table: ReportTable = serde_json::from_reader(input)?;
    let mut groups = MethodObservations::new();
    for m in &table.methods {
        for c in &m.cells {
            push_grouped(&mut groups, &m.method, Observation::new(c.hops, c.context_len, c.f1)?);
        }
    }
    Ok(groups)
}

pub fn write_fit_csv<W: Write>(
    out: W,
    rows: &[(String, FitResult, Option<BootstrapInterval>)],
) -> Result<()> {
    let with_ci = rows.iter().any(|r| r.2.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["method", "alpha", "gamma", "beta0", "capacity", "mae", "n_obs"];
    if with_ci {
        header.extend([
            "alpha_p2.5", "alpha_p97.5", "gamma_p2.5", "gamma_p97.5", "beta0_p2.5", "beta0_p97.5",
            "capacity_p2.5", "capacity_p97.5", "mae_p2.5", "mae_p97.5",
        ]);
    }
    w.write_record(&header)?;
    for (method, r, ci) in rows {
        let mut rec = vec![
            method.clone(),
            r.params.alpha.to_string(),
            r.params.gamma.to_string(),
            r.params.beta0.to_string(),
            r.params.capacity.to_string(),
            r.mae.to_string(),
            r.n_obs.to_string(),
        ];
        if with_ci {
            match ci {
                Some(ci) => {
                    for (lo, hi) in [ci.alpha, ci.gamma, ci.beta0, ci.capacity, ci.mae] {
                        rec.push(lo.to_string());
                        rec.push(hi.to_string());
                    }
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 10)),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlayPoint {
    pub beta: f64,
    pub f1_emp: f64,
    pub f1_bound: f64,
}

/// Empirical points against the fitted bound, sorted by modelled demand.
pub fn overlay_curve(params: &BoundParams, obs: &[Observation]) -> Vec<OverlayPoint> {
    let mut pts: Vec<OverlayPoint> = obs
        .iter()
        .map(|o| OverlayPoint {
            beta: theory::demand(params, o.point),
            f1_emp: o.f1,
            f1_bound: predict(params, o.point),
        })
        .collect();
    pts.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    pts
}

pub fn write_overlay_csv<W: Write>(out: W, pts: &[OverlayPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in pts {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// The default `(h, L)` design: hops 1-4 by the six standard context lengths.
pub fn default_points() -> Vec<TaskPoint> {
    let mut pts = Vec::with_capacity(24);
    for hops in 1..=4 {
        for context_len in [500, 1000, 2000, 4000, 8000, 10000] {
            pts.push(TaskPoint { hops, context_len });
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(params: &BoundParams) -> Vec<Observation> {
        default_points()
            .into_iter()
            .map(|p| Observation { point: p, f1: predict(params, p), weight: 1.0 })
            .collect()
    }

    fn small_grid() -> FitGrid {
        FitGrid {
            alphas: logspace(1e-4, 1e-2, 5),
            gammas: linspace(1.05, 3.0, 6),
            beta0s: linspace(0.0, 200.0, 5),
            capacities: linspace(20.0, 400.0, 7),
        }
    }

    #[test]
    fn default_grid_membership() {
        let g = FitGrid::default();
        assert_eq!(g.len(), 157_500);
        assert_eq!(*g.alphas.last().unwrap(), 0.01);
        assert_eq!(g.alphas[0], 1e-4);
        assert_eq!(*g.gammas.last().unwrap(), 3.0);
        assert!((g.capacities[3] - 67.5).abs() < 1e-12);
        assert!(g.beta0s.contains(&40.0));
        assert!(g.validate().is_ok());
    }

    #[test]
    fn predict_examples() {
        let direct = BoundParams { beta0: 40.0, alpha: 0.01, gamma: 3.0, capacity: 67.5 };
        assert_eq!(predict(&direct, TaskPoint { hops: 1, context_len: 500 }), 1.0);
        let at = TaskPoint { hops: 2, context_len: 1000 };
        assert_eq!(predict(&direct, at), theory::plugin_accuracy_bound(&direct, at).unwrap());
        let tiny = BoundParams { beta0: 0.0, alpha: 1e-300, gamma: 1.0, capacity: 0.0 };
        assert_eq!(predict(&tiny, TaskPoint { hops: 1, context_len: 0 }), 1.0);
    }

    #[test]
    fn mae_examples() {
        let p = BoundParams { beta0: 10.0, alpha: 0.005, gamma: 2.0, capacity: 30.0 };
        assert_eq!(mae(&p, &synth(&p)).unwrap(), 0.0);
        let one = [Observation::new(1, 0, 0.4).unwrap()];
        assert!((mae(&p, &one).unwrap() - 0.6).abs() < 1e-12);
        assert!(mae(&p, &[]).is_err());
    }

    #[test]
    fn weighted_mae() {
        let p = BoundParams { beta0: 10.0, alpha: 0.005, gamma: 2.0, capacity: 30.0 };
        let obs = [
            Observation::weighted(1, 0, 0.0, 3.0).unwrap(),
            Observation::weighted(1, 0, 1.0, 1.0).unwrap(),
        ];
        assert!((mae(&p, &obs).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn observation_validation() {
        assert!(Observation::new(1, 100, 1.2).is_err());
        assert!(Observation::new(0, 100, 0.5).is_err());
        assert!(Observation::weighted(1, 100, 0.5, 0.0).is_err());
    }

    #[test]
    fn fit_rejects_empty_inputs() {
        let obs = [Observation::new(1, 500, 1.0).unwrap()];
        assert!(fit(&[], &FitGrid::default()).is_err());
        let mut g = small_grid();
        g.capacities.clear();
        assert!(fit(&obs, &g).is_err());
        let mut g = small_grid();
        g.gammas = vec![0.5, 1.5];
        assert!(fit(&obs, &g).is_err());
    }

    #[test]
    fn recovers_on_grid_params() {
        let g = FitGrid::default();
        let truth = BoundParams { beta0: 50.0, alpha: g.alphas[12], gamma: g.gammas[10], capacity: g.capacities[2] };
        assert!((truth.alpha - 0.00518).abs() < 1e-5);
        assert!((truth.gamma - 2.076).abs() < 1e-3);
        assert!((truth.capacity - 51.7).abs() < 0.1);
        let obs = synth(&truth);
        let r = fit(&obs, &g).unwrap();
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.n_obs, 24);
        for o in &obs {
            assert_eq!(predict(&r.params, o.point), o.f1);
        }
    }

    #[test]
    fn all_ones_picks_first_capped_quadruple() {
        let g = FitGrid::default();
        let obs: Vec<Observation> = default_points()
            .into_iter()
            .map(|p| Observation { point: p, f1: 1.0, weight: 1.0 })
            .collect();
        // Oracle: walk the canonical order and stop at the first quadruple
        // whose demand never exceeds C + 1.
        let first = (0..g.len())
            .map(|i| g.params_at(i))
            .find(|p| obs.iter().all(|o| theory::demand(p, o.point) <= p.capacity + 1.0))
            .unwrap();
        let r = fit(&obs, &g).unwrap();
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.params, first);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let g = small_grid();
        let obs: Vec<Observation> = default_points()
            .into_iter()
            .enumerate()
            .map(|(i, p)| Observation { point: p, f1: ((i * 37) % 101) as f64 / 100.0, weight: 1.0 })
            .collect();
        let a = fit_with(&obs, &g, Exec::Sequential).unwrap();
        let b = fit_with(&obs, &g, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn canonical_index_round_trip() {
        let g = small_grid();
        let p = g.params_at(0);
        assert_eq!((p.alpha, p.gamma, p.beta0, p.capacity), (g.alphas[0], g.gammas[0], g.beta0s[0], g.capacities[0]));
        let last = g.params_at(g.len() - 1);
        assert_eq!(last.capacity, *g.capacities.last().unwrap());
        assert_eq!(last.alpha, *g.alphas.last().unwrap());
        // C varies fastest.
        assert_eq!(g.params_at(1).capacity, g.capacities[1]);
    }

    #[test]
    fn bootstrap_is_deterministic_and_exact_on_noise_free_data() {
        let g = small_grid();
        let truth = BoundParams { beta0: g.beta0s[1], alpha: g.alphas[3], gamma: g.gammas[3], capacity: g.capacities[1] };
        let obs = synth(&truth);
        let a = bootstrap_fit(&obs, &g, 6, 17).unwrap();
        let b = bootstrap_fit(&obs, &g, 6, 17).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.mae == 0.0));
        assert!(bootstrap_fit(&obs, &g, 0, 17).is_err());
        assert_eq!(bootstrap_indices(24, 3, 5), bootstrap_indices(24, 3, 5));
    }

    #[test]
    fn bootstrap_identity_resample_equals_fit() {
        // A single observation can only resample to itself.
        let g = small_grid();
        let obs = [Observation::new(3, 4000, 0.3).unwrap()];
        let boot = bootstrap_fit(&obs, &g, 1, 99).unwrap();
        assert_eq!(boot[0], fit(&obs, &g).unwrap());
    }

    #[test]
    fn raising_f1_never_hurts_all_capped_candidates() {
        // For quadruples predicting 1 everywhere, the loss is mean(1 - f1),
        // so raising any observation can only lower it.
        let g = small_grid();
        let low: Vec<Observation> = default_points()
            .into_iter()
            .enumerate()
            .map(|(i, p)| Observation { point: p, f1: (i % 5) as f64 / 10.0, weight: 1.0 })
            .collect();
        let high: Vec<Observation> = low.iter().map(|o| Observation { f1: (o.f1 + 0.25).min(1.0), ..*o }).collect();
        let capped: Vec<BoundParams> = (0..g.len())
            .map(|i| g.params_at(i))
            .filter(|p| low.iter().all(|o| predict(p, o.point) == 1.0))
            .collect();
        assert!(!capped.is_empty());
        let best = |obs: &[Observation]| {
            capped.iter().map(|p| mae(p, obs).unwrap()).fold(f64::INFINITY, f64::min)
        };
        assert!(best(&high) <= best(&low));
    }

    #[test]
    fn csv_round_trip_and_outputs() {
        let text = "method,hops,context_len,f1\nA,1,500,1.0\nB,2,1000,0.5\nA,2,500,0.25\n";
        let groups = read_observations_csv(text.as_bytes()).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].0, "A");
        assert_eq!(groups[0].1.len(), 2);
        assert!(read_observations_csv("method,hops,context_len,f1\nA,1,500,1.5\n".as_bytes()).is_err());

        let r = FitResult { params: BoundParams { beta0: 40.0, alpha: 0.01, gamma: 3.0, capacity: 67.5 }, mae: 0.1, n_obs: 24 };
        let mut buf = Vec::new();
        write_fit_csv(&mut buf, &[("Direct".into(), r, None)]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "method,alpha,gamma,beta0,capacity,mae,n_obs\nDirect,0.01,3,40,67.5,0.1,24\n"
        );
        let pts = overlay_curve(&r.params, &groups[0].1);
        assert!(pts.windows(2).all(|w| w[0].beta <= w[1].beta));
        let mut buf = Vec::new();
        write_overlay_csv(&mut buf, &pts).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("beta,f1_emp,f1_bound\n"));
    }
}
