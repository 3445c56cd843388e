//! Replicated simulation of schedule cells and the diagnostics computed
//! from them.
//!
//! Replications are split into fixed-size blocks. Each block owns a stable
//! mean/variance accumulator and blocks are merged in index order, so the
//! result does not depend on how many threads ran the blocks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{evaluate, evaluate_repeated, Estimate, EstimatorId, Status};
use crate::model::{draw_first_sample, simulate, FirstSample, HtUnit, ModelConfig, Observation};
use crate::regime::{Cell, RegimeSchedule};
use crate::rng::{cell_seed, RngState};
use crate::special::{ln_choose, normal_cdf};

/// Replications per accumulator block.
pub const BLOCK_SIZE: u64 = 512;
/// Outcome-space size below which a cell is enumerated exactly.
pub const DEFAULT_ENUMERATION_THRESHOLD: u64 = 1_000_000;
/// Minimum number of defined estimates for the normality statistic.
pub const MIN_KS_SAMPLE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    /// Rayon pool with the given number of threads; 0 picks the default.
    /// Runs sequentially when the crate is built without `parallel`.
    Parallel {
        threads: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub replications: u64,
    pub master_seed: u64,
    pub eps: Vec<f64>,
    pub execution: Execution,
    /// Cells whose outcome space is at most this large are enumerated
    /// exactly instead of simulated. 0 disables enumeration.
    pub enumeration_threshold: u64,
    /// Test hook: every replication reuses the stream of replication 0.
    #[doc(hidden)]
    pub force_identical_streams: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            replications: 10_000,
            master_seed: 0,
            eps: vec![0.5],
            execution: Execution::Parallel { threads: 0 },
            enumeration_threshold: DEFAULT_ENUMERATION_THRESHOLD,
            force_identical_streams: false,
        }
    }
}

impl RunOptions {
    pub fn new(replications: u64, master_seed: u64) -> Self {
        RunOptions { replications, master_seed, ..RunOptions::default() }
    }

    pub fn eps(mut self, eps: &[f64]) -> Self {
        self.eps = eps.to_vec();
        self
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn threads(self, threads: usize) -> Self {
        self.execution(Execution::Parallel { threads })
    }

    pub fn sequential(self) -> Self {
        self.execution(Execution::Sequential)
    }

    /// Always simulate, never enumerate.
    pub fn monte_carlo(mut self) -> Self {
        self.enumeration_threshold = 0;
        self
    }

    pub fn enumeration_threshold(mut self, threshold: u64) -> Self {
        self.enumeration_threshold = threshold;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMode {
    MonteCarlo,
    /// Exact weighted sum over the outcome space.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub t: usize,
    pub estimator: EstimatorId,
    pub k_t: u64,
    pub target: f64,
    pub mode: CellMode,
    /// Replications, or atoms of the outcome space in exact mode.
    pub replications: u64,
    /// Replications (atoms) with status other than undefined.
    pub valid: u64,
    /// Share of replications (probability mass) with undefined status.
    pub undefined_fraction: f64,
    pub boundary: u64,
    pub mean: f64,
    pub bias: f64,
    /// Sample variance (exact variance in exact mode).
    pub variance: f64,
    pub mse: f64,
    pub mc_se: f64,
    pub ks_stat: f64,
    /// `(ε, P(|δ - target| > ε))`, undefined estimates counted as outside.
    pub p_outside: Vec<(f64, f64)>,
    /// Root of the replication streams of this cell.
    pub seed: u64,
    pub degenerate: bool,
}

impl CellStats {
    pub fn p_outside_at(&self, eps: f64) -> Option<f64> {
        self.p_outside.iter().find(|(e, _)| *e == eps).map(|(_, p)| *p)
    }
}

/// Least-squares fit of `ln(mse)` against `ln(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Default)]
struct Acc {
    n: u64,
    mean: f64,
    m2: f64,
    outside: Vec<u64>,
    undefined: u64,
    boundary: u64,
    values: Vec<f64>,
}

impl Acc {
    fn new(n_eps: usize) -> Acc {
        Acc { outside: vec![0; n_eps], ..Acc::default() }
    }

    fn push(&mut self, e: &Estimate, target: f64, eps: &[f64]) {
        if !e.is_defined() {
            self.undefined += 1;
            for o in &mut self.outside {
                *o += 1;
            }
            return;
        }
        if e.status == Status::Boundary {
            self.boundary += 1;
        }
        let x = e.value;
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        let err = (x - target).abs();
        for (o, &ep) in self.outside.iter_mut().zip(eps) {
            if err > ep {
                *o += 1;
            }
        }
        self.values.push(x);
    }

    fn merge(mut self, other: Acc) -> Acc {
        if other.n > 0 {
            if self.n == 0 {
                self.mean = other.mean;
                self.m2 = other.m2;
            } else {
                let n = (self.n + other.n) as f64;
                let d = other.mean - self.mean;
                self.mean += d * other.n as f64 / n;
                self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n;
            }
        }
        self.n += other.n;
        for (a, b) in self.outside.iter_mut().zip(other.outside) {
            *a += b;
        }
        self.undefined += other.undefined;
        self.boundary += other.boundary;
        self.values.extend(other.values);
        self
    }
}

/// Draws the `k_t` samples of one replication and evaluates the estimators.
pub fn replicate(cfg: &ModelConfig, k_t: u64, ids: &[EstimatorId], state: RngState) -> Result<Vec<Estimate>> {
    let mut rng = state.rng();
    let first: Option<FirstSample> = match cfg {
        ModelConfig::Multiplier(c) if !c.redraw_first => Some(draw_first_sample(c, &mut rng)?),
        _ => None,
    };
    let samples = (0..k_t).map(|_| simulate(cfg, &mut rng, first.as_ref())).collect::<Result<Vec<_>>>()?;
    evaluate_repeated(cfg, &samples, ids)
}

fn run_block(
    cfg: &ModelConfig,
    k_t: u64,
    ids: &[EstimatorId],
    opts: &RunOptions,
    cell_index: u64,
    block: u64,
) -> Result<Vec<Acc>> {
    let target = cfg.target();
    let mut accs: Vec<Acc> = ids.iter().map(|_| Acc::new(opts.eps.len())).collect();
    let start = block * BLOCK_SIZE;
    let end = (start + BLOCK_SIZE).min(opts.replications);
    for rep in start..end {
        let stream_rep = if opts.force_identical_streams { 0 } else { rep };
        let state = RngState::derive(opts.master_seed, cell_index, stream_rep);
        let est = replicate(cfg, k_t, ids, state)?;
        for (acc, e) in accs.iter_mut().zip(&est) {
            acc.push(e, target, &opts.eps);
        }
    }
    Ok(accs)
}

fn merge_blocks(blocks: Vec<Vec<Acc>>, n_ids: usize, n_eps: usize) -> Vec<Acc> {
    let mut total: Vec<Acc> = (0..n_ids).map(|_| Acc::new(n_eps)).collect();
    for block in blocks {
        total = total.into_iter().zip(block).map(|(a, b)| a.merge(b)).collect();
    }
    total
}

fn run_blocks(
    cfg: &ModelConfig,
    k_t: u64,
    ids: &[EstimatorId],
    opts: &RunOptions,
    cell_index: u64,
) -> Result<Vec<Vec<Acc>>> {
    let n_blocks = opts.replications.div_ceil(BLOCK_SIZE);
    let body = |b: u64| run_block(cfg, k_t, ids, opts, cell_index, b);
    match opts.execution {
        Execution::Sequential => (0..n_blocks).map(body).collect(),
        Execution::Parallel { .. } => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..n_blocks).into_par_iter().map(body).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..n_blocks).map(body).collect()
            }
        }
    }
}

fn with_pool<T: Send>(execution: Execution, f: impl FnOnce() -> T + Send) -> Result<T> {
    match execution {
        Execution::Sequential => Ok(f()),
        Execution::Parallel { threads } => {
            #[cfg(feature = "parallel")]
            {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
                Ok(pool.install(f))
            }
            #[cfg(not(feature = "parallel"))]
            {
                let _ = threads;
                Ok(f())
            }
        }
    }
}

fn check_inputs(cfg: &ModelConfig, k_t: u64, ids: &[EstimatorId], opts: &RunOptions) -> Result<()> {
    cfg.validate()?;
    if k_t == 0 {
        return Err(Error::param("k_t must be >= 1"));
    }
    if ids.is_empty() {
        return Err(Error::param("no estimators requested"));
    }
    for &id in ids {
        if !id.compatible_with(cfg.family()) {
            return Err(Error::Unsupported(format!("estimator {id} does not apply to {}", cfg.family())));
        }
    }
    if opts.replications < 2 {
        return Err(Error::param("at least 2 replications are required"));
    }
    if opts.eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::param("every eps must be finite and > 0"));
    }
    Ok(())
}

/// Simulates (or enumerates) one cell. `cell_index` selects the stream
/// family; `t` is copied into the output.
pub fn run_cell_indexed(
    cfg: &ModelConfig,
    k_t: u64,
    ids: &[EstimatorId],
    opts: &RunOptions,
    cell_index: u64,
    t: usize,
) -> Result<Vec<CellStats>> {
    check_inputs(cfg, k_t, ids, opts)?;
    let seed = cell_seed(opts.master_seed, cell_index);
    if k_t == 1 && !opts.force_identical_streams {
        if let Some(space) = outcome_space(cfg) {
            if space <= opts.enumeration_threshold as u128 {
                let atoms = enumerate_outcomes(cfg, ids)?;
                return Ok(exact_stats(cfg, ids, &atoms, &opts.eps, t, seed));
            }
        }
    }
    let blocks = with_pool(opts.execution, || run_blocks(cfg, k_t, ids, opts, cell_index))??;
    let accs = merge_blocks(blocks, ids.len(), opts.eps.len());
    let target = cfg.target();
    Ok(ids.iter().zip(accs).map(|(&id, acc)| mc_stats(id, acc, target, k_t, opts, t, seed)).collect())
}

pub fn run_cell(cfg: &ModelConfig, k_t: u64, ids: &[EstimatorId], opts: &RunOptions) -> Result<Vec<CellStats>> {
    run_cell_indexed(cfg, k_t, ids, opts, 0, 1)
}

fn mc_stats(id: EstimatorId, acc: Acc, target: f64, k_t: u64, opts: &RunOptions, t: usize, seed: u64) -> CellStats {
    let r = opts.replications;
    let valid = acc.n;
    let (mean, variance, mse, mc_se) = if valid == 0 {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        let n = valid as f64;
        let variance = if valid > 1 { acc.m2 / (n - 1.0) } else { f64::NAN };
        let bias = acc.mean - target;
        let mse = bias * bias + acc.m2 / n;
        (acc.mean, variance, mse, (variance / n).sqrt())
    };
    let ks_stat = normality_stat(&acc.values).unwrap_or(f64::NAN);
    CellStats {
        t,
        estimator: id,
        k_t,
        target,
        mode: CellMode::MonteCarlo,
        replications: r,
        valid,
        undefined_fraction: acc.undefined as f64 / r as f64,
        boundary: acc.boundary,
        mean,
        bias: mean - target,
        variance,
        mse,
        mc_se,
        ks_stat,
        p_outside: opts.eps.iter().zip(&acc.outside).map(|(&e, &c)| (e, c as f64 / r as f64)).collect(),
        seed,
        degenerate: valid == 0,
    }
}

/// Runs every cell of a schedule in order. Cell `i` (0-based) draws from
/// stream family `i`.
pub fn run_schedule(schedule: &RegimeSchedule, ids: &[EstimatorId], opts: &RunOptions) -> Result<Vec<CellStats>> {
    let mut out = Vec::with_capacity(schedule.cells.len() * ids.len());
    for (i, cell) in schedule.cells.iter().enumerate() {
        out.extend(run_schedule_cell(cell, i as u64, ids, opts)?);
    }
    Ok(out)
}

fn run_schedule_cell(cell: &Cell, index: u64, ids: &[EstimatorId], opts: &RunOptions) -> Result<Vec<CellStats>> {
    run_cell_indexed(&cell.cfg, cell.k_t, ids, opts, index, cell.t)
}

/// Fits `ln y = intercept + slope · ln x`.
pub fn fit_loglog_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::param(format!("rate fit needs at least 3 cells, got {}", points.len())));
    }
    if points.iter().any(|&(x, y)| !(y > 0.0) || !(x > 0.0) || !y.is_finite()) {
        return Err(Error::Degenerate("rate fit needs positive x and finite mse > 0".into()));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("rate fit needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy <= f64::EPSILON * f64::EPSILON { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept, r_squared })
}

/// `(x, mse)` pairs for one estimator.
pub fn mse_points(cells: &[CellStats], estimator: EstimatorId, x: impl Fn(&CellStats) -> f64) -> Vec<(f64, f64)> {
    cells.iter().filter(|c| c.estimator == estimator).map(|c| (x(c), c.mse)).collect()
}

/// `(t, p_outside(ε))` in schedule order.
pub fn consistency_curve(cells: &[CellStats], eps: f64) -> Result<Vec<(usize, f64)>> {
    cells
        .iter()
        .map(|c| {
            c.p_outside_at(eps)
                .map(|p| (c.t, p))
                .ok_or_else(|| Error::param(format!("eps {eps} was not requested for cell t={}", c.t)))
        })
        .collect()
}

/// Largest gap between the empirical CDF of the standardised sample and the
/// standard normal CDF.
pub fn normality_stat(values: &[f64]) -> Result<f64> {
    if values.len() < MIN_KS_SAMPLE {
        return Err(Error::param(format!("normality statistic needs >= {MIN_KS_SAMPLE} values")));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::Degenerate("zero sample variance".into()));
    }
    let sd = var.sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let weighted: Vec<(f64, f64)> = sorted.into_iter().map(|v| (v, 1.0 / n)).collect();
    Ok(ks_weighted(&weighted, mean, sd))
}

/// KS gap for sorted `(value, weight)` atoms whose weights sum to 1.
fn ks_weighted(sorted: &[(f64, f64)], mean: f64, sd: f64) -> f64 {
    let mut d: f64 = 0.0;
    let mut below = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].0;
        let mut w = 0.0;
        while i < sorted.len() && sorted[i].0 == v {
            w += sorted[i].1;
            i += 1;
        }
        let phi = normal_cdf((v - mean) / sd);
        d = d.max((phi - below).abs()).max((below + w - phi).abs());
        below += w;
    }
    d.min(1.0)
}

/// Size of the outcome space enumerated in exact mode, for the families
/// that support it.
pub fn outcome_space(cfg: &ModelConfig) -> Option<u128> {
    let choose = |n: u64, k: u64| -> u128 {
        let v = ln_choose(n, k).exp();
        if v > 1e30 {
            u128::MAX
        } else {
            v.round() as u128
        }
    };
    match cfg {
        ModelConfig::Tank(c) => Some(choose(c.population, c.sample)),
        ModelConfig::Crc2(c) => Some((c.n1.min(c.n2) - (c.n1 + c.n2).saturating_sub(c.population) + 1) as u128),
        ModelConfig::Multiplier(c) => match c.benchmark {
            Some(x) => Some((x.min(c.sample) - (x + c.sample).saturating_sub(c.population) + 1) as u128),
            None => Some(
                (0..=c.population)
                    .map(|x| (x.min(c.sample) - (x + c.sample).saturating_sub(c.population) + 1) as u128)
                    .sum(),
            ),
        },
        ModelConfig::HtCluster(c) => {
            let min = *c.cluster_sizes.iter().min()?;
            if c.sample > min {
                return None;
            }
            (c.cluster_sizes.len() as u128).checked_pow(c.sample as u32).or(Some(u128::MAX))
        }
        _ => None,
    }
}

type Atom = (f64, Vec<Estimate>);

fn hyp_weights(total: u64, marked: u64, draws: u64) -> impl Iterator<Item = (u64, f64)> {
    let lo = (marked + draws).saturating_sub(total);
    let hi = marked.min(draws);
    let ln_den = ln_choose(total, draws);
    (lo..=hi).map(move |m| (m, (ln_choose(marked, m) + ln_choose(total - marked, draws - m) - ln_den).exp()))
}

/// Weighted outcome atoms. Tank outcomes are grouped by `(min, max)`,
/// which determine every serial-number estimator; each group is evaluated
/// on one representative sample.
fn enumerate_outcomes(cfg: &ModelConfig, ids: &[EstimatorId]) -> Result<Vec<Atom>> {
    let mut atoms = Vec::new();
    match cfg {
        ModelConfig::Tank(c) => {
            let (big_n, n) = (c.population, c.sample);
            let ln_total = ln_choose(big_n, n);
            if n == 1 {
                for x in 1..=big_n {
                    let obs = Observation::Tank { labels: vec![x + c.offset] };
                    atoms.push(((-ln_total).exp(), evaluate(cfg, &obs, ids)?));
                }
            } else {
                for lo in 1..=big_n - n + 1 {
                    for hi in lo + n - 1..=big_n {
                        let w = (ln_choose(hi - lo - 1, n - 2) - ln_total).exp();
                        let mut labels: Vec<u64> = (lo..lo + n - 1).collect();
                        labels.push(hi);
                        for l in &mut labels {
                            *l += c.offset;
                        }
                        atoms.push((w, evaluate(cfg, &Observation::Tank { labels }, ids)?));
                    }
                }
            }
        }
        ModelConfig::Crc2(c) => {
            for (m, w) in hyp_weights(c.population, c.n1, c.n2) {
                let obs = Observation::Crc2 { n1: c.n1, n2: c.n2, overlap: m };
                atoms.push((w, evaluate(cfg, &obs, ids)?));
            }
        }
        ModelConfig::Multiplier(c) => {
            let benchmarks: Vec<(u64, f64)> = match c.benchmark {
                Some(x) => vec![(x, 1.0)],
                None => (0..=c.population)
                    .map(|x| {
                        let ln = ln_choose(c.population, x)
                            + x as f64 * c.prevalence.ln()
                            + (c.population - x) as f64 * (-c.prevalence).ln_1p();
                        let w = if c.prevalence == 1.0 {
                            if x == c.population {
                                1.0
                            } else {
                                0.0
                            }
                        } else {
                            ln.exp()
                        };
                        (x, w)
                    })
                    .collect(),
            };
            for (x, wx) in benchmarks {
                for (m, w) in hyp_weights(c.population, x, c.sample) {
                    let obs = Observation::Multiplier { benchmark: x, overlap: m, sample: c.sample };
                    atoms.push((wx * w, evaluate(cfg, &obs, ids)?));
                }
            }
        }
        ModelConfig::HtCluster(c) => {
            // Cluster-count compositions with multinomial weights.
            let h = c.cluster_sizes.len();
            let n = c.sample;
            let ln_base = crate::special::ln_factorial(n) - n as f64 * (h as f64).ln();
            let mut counts = vec![0u64; h];
            #[allow(clippy::too_many_arguments)]
            fn rec(
                j: usize,
                left: u64,
                counts: &mut Vec<u64>,
                c: &crate::model::HtClusterConfig,
                ln_base: f64,
                cfg: &ModelConfig,
                ids: &[EstimatorId],
                atoms: &mut Vec<Atom>,
            ) -> Result<()> {
                let h = counts.len();
                if j == h - 1 {
                    counts[j] = left;
                    let ln_w = ln_base - counts.iter().map(|&k| crate::special::ln_factorial(k)).sum::<f64>();
                    let n = c.sample as f64;
                    let units: Vec<HtUnit> = counts
                        .iter()
                        .enumerate()
                        .flat_map(|(cl, &k)| {
                            let size = c.cluster_sizes[cl];
                            (0..k).map(move |_| HtUnit {
                                cluster: cl as u32,
                                cluster_size: size,
                                inclusion: n / (h as f64 * size as f64),
                            })
                        })
                        .collect();
                    atoms.push((ln_w.exp(), evaluate(cfg, &Observation::HtCluster { units }, ids)?));
                    return Ok(());
                }
                for k in 0..=left {
                    counts[j] = k;
                    rec(j + 1, left - k, counts, c, ln_base, cfg, ids, atoms)?;
                }
                Ok(())
            }
            rec(0, n, &mut counts, c, ln_base, cfg, ids, &mut atoms)?;
        }
        other => {
            return Err(Error::Unsupported(format!("no exact enumeration for {}", other.family())));
        }
    }
    Ok(atoms)
}

fn exact_stats(
    cfg: &ModelConfig,
    ids: &[EstimatorId],
    atoms: &[Atom],
    eps: &[f64],
    t: usize,
    seed: u64,
) -> Vec<CellStats> {
    let target = cfg.target();
    let total_w: f64 = atoms.iter().map(|a| a.0).sum();
    ids.iter()
        .enumerate()
        .map(|(j, &id)| {
            let defined: Vec<(f64, f64)> =
                atoms.iter().filter(|a| a.1[j].is_defined()).map(|a| (a.1[j].value, a.0)).collect();
            let w_def: f64 = defined.iter().map(|d| d.1).sum();
            let mean = defined.iter().map(|(v, w)| v * w).sum::<f64>() / w_def;
            let variance = defined.iter().map(|(v, w)| w * (v - mean) * (v - mean)).sum::<f64>() / w_def;
            let mse = defined.iter().map(|(v, w)| w * (v - target) * (v - target)).sum::<f64>() / w_def;
            let p_outside = eps
                .iter()
                .map(|&e| {
                    let out: f64 = atoms
                        .iter()
                        .filter(|a| !a.1[j].is_defined() || (a.1[j].value - target).abs() > e)
                        .map(|a| a.0)
                        .sum();
                    (e, (out / total_w).clamp(0.0, 1.0))
                })
                .collect();
            let ks_stat = if variance > 0.0 {
                let mut sorted: Vec<(f64, f64)> = defined.iter().map(|&(v, w)| (v, w / w_def)).collect();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                ks_weighted(&sorted, mean, variance.sqrt())
            } else {
                f64::NAN
            };
            let valid = defined.len() as u64;
            CellStats {
                t,
                estimator: id,
                k_t: 1,
                target,
                mode: CellMode::Exact,
                replications: atoms.len() as u64,
                valid,
                undefined_fraction: ((total_w - w_def) / total_w).max(0.0),
                boundary: atoms.iter().filter(|a| a.1[j].status == Status::Boundary).count() as u64,
                mean,
                bias: mean - target,
                variance,
                mse,
                mc_se: 0.0,
                ks_stat,
                p_outside,
                seed,
                degenerate: valid == 0,
            }
        })
        .collect()
}
