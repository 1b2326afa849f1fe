//! Limit objects of the sparse regime: the generation-weight martingale of a
//! marked branching tree, a population-dynamics sampler for the recursive
//! fixed point `Z`, samples of the limit vertex weight, Wasserstein-1
//! comparisons, and empirical equilibrium weight pools.

use crate::degrees::DegreeSequence;
use crate::graphmodel::Environment;
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::rng::{derive_seed, rng_from_seed};
use crate::walk::Distribution;
use rand::Rng;
use rand_distr::Distribution as _;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::io::Write;

pub const DEFAULT_T_MAX: u32 = 12;
pub const DEFAULT_N_TREES: u64 = 100_000;
pub const DEFAULT_NODE_BUDGET: f64 = 1e8;
pub const MIN_RDE_POOL: usize = 1_000;
pub const DEFAULT_HIST_BIN_WIDTH: f64 = 0.02;

#[derive(Debug, thiserror::Error)]
pub enum LimitsError {
    #[error("expected population {expected_nodes:.3e} exceeds node budget {budget:.3e}")]
    ExplosionGuard { expected_nodes: f64, budget: f64 },
    #[error("sample pool must be non-empty")]
    EmptyPool,
    #[error("pool value {value} at index {index} is not a finite non-negative number")]
    InvalidValue { index: usize, value: f64 },
    #[error("pool size {got} below minimum {min}")]
    PoolTooSmall { got: usize, min: usize },
    #[error("expected a pool labeled {expected}, got {got}")]
    WrongLabel { expected: &'static str, got: String },
    #[error("distribution belongs to a different environment")]
    ContextMismatch,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolLabel {
    /// Fixed-point variable of the recursive distributional equation.
    Z,
    /// Limit vertex weight.
    MStar,
    /// Generation weight of the branching tree at the given depth.
    MT(u32),
    /// Empirical equilibrium weights `n * pi(i)`.
    NPiStar,
}

impl std::fmt::Display for PoolLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PoolLabel::Z => write!(f, "Z"),
            PoolLabel::MStar => write!(f, "M_star"),
            PoolLabel::MT(t) => write!(f, "M_{t}"),
            PoolLabel::NPiStar => write!(f, "n_pi_star"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PoolMeta {
    pub seed: u64,
    pub iterations: u64,
}

/// A population of non-negative scalar samples standing for one law.
#[derive(Clone, Debug)]
pub struct SamplePool {
    values: Vec<f64>,
    label: PoolLabel,
    meta: PoolMeta,
}

impl SamplePool {
    pub fn new(values: Vec<f64>, label: PoolLabel, meta: PoolMeta) -> Result<Self, LimitsError> {
        if values.is_empty() {
            return Err(LimitsError::EmptyPool);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(LimitsError::InvalidValue { index, value: values[index] });
        }
        Ok(SamplePool { values, label, meta })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> PoolLabel {
        self.label
    }

    pub fn meta(&self) -> PoolMeta {
        self.meta
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) / self.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let m = self.mean();
        let ss = compensated_sum(self.values.iter().map(|v| (v - m) * (v - m)));
        ss / (self.len() - 1) as f64
    }

    pub fn std_error_of_mean(&self) -> f64 {
        (self.variance() / self.len() as f64).sqrt()
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, (ss / (n - 1.0) / n).sqrt())
}

/// Distinct degree pairs with their vertex counts; the two sampling laws used
/// by the branching process and fixed-point iteration.
struct PairClasses {
    dm: Vec<u32>,
    dp: Vec<u32>,
    /// index of dp[j] among the distinct out-degree values
    val_idx: Vec<usize>,
    vals: Vec<u32>,
    /// P(class) proportional to vertex count (uniform-vertex law)
    root_cum: Vec<f64>,
    /// P(class) proportional to vertex count * d^+ (out-degree law)
    out_cum: Vec<f64>,
}

impl PairClasses {
    fn build(seq: &DegreeSequence) -> Self {
        let mut counts: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        for &(dm, dp) in seq.entries() {
            *counts.entry((dm, dp)).or_insert(0) += 1;
        }
        let n = seq.n() as f64;
        let m = seq.m() as f64;
        let mut dm = Vec::new();
        let mut dp = Vec::new();
        let mut root_cum = Vec::new();
        let mut out_cum = Vec::new();
        let mut acc_root = 0.0;
        let mut acc_out = 0.0;
        for (&(a, b), &c) in &counts {
            dm.push(a);
            dp.push(b);
            acc_root += c as f64 / n;
            acc_out += c as f64 * b as f64 / m;
            root_cum.push(acc_root);
            out_cum.push(acc_out);
        }
        let mut vals: Vec<u32> = dp.clone();
        vals.sort_unstable();
        vals.dedup();
        let val_idx = dp
            .iter()
            .map(|d| vals.binary_search(d).expect("present"))
            .collect();
        PairClasses { dm, dp, val_idx, vals, root_cum, out_cum }
    }

    fn draw(&self, cum: &[f64], rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        for (j, &c) in cum.iter().enumerate() {
            if u < c {
                return j;
            }
        }
        cum.len() - 1
    }
}

/// Mean offspring count: expectation of d^- under the out-degree law.
pub fn offspring_mean(seq: &DegreeSequence) -> f64 {
    let s = compensated_sum(
        seq.entries()
            .iter()
            .map(|&(dm, dp)| dm as f64 * dp as f64),
    );
    s / seq.m() as f64
}

fn gamma_of(seq: &DegreeSequence) -> f64 {
    let s = compensated_sum(
        seq.entries()
            .iter()
            .map(|&(dm, dp)| dm as f64 * dm as f64 / dp as f64),
    );
    s / seq.m() as f64
}

#[derive(Clone, Copy, Debug)]
pub struct MartingaleOptions {
    pub t_max: u32,
    pub n_trees: u64,
    /// Refusal threshold on the expected total node count
    /// `offspring_mean^t_max * n_trees`.
    pub node_budget: f64,
}

impl Default for MartingaleOptions {
    fn default() -> Self {
        MartingaleOptions {
            t_max: DEFAULT_T_MAX,
            n_trees: DEFAULT_N_TREES,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

/// Per-generation weight pools of the marked branching trees, plus the
/// conditional-variance proxy of each generation.
#[derive(Clone, Debug)]
pub struct MartingaleRun {
    /// `pools[t]` holds the generation-`t` total weight of every tree.
    pub pools: Vec<SamplePool>,
    /// `sigma[t][tree]` = (gamma-1) * sum over generation-t nodes of
    /// weight^2 / d^-.
    pub sigma: Vec<Vec<f64>>,
    pub offspring_mean: f64,
}

impl MartingaleRun {
    pub fn t_max(&self) -> u32 {
        (self.pools.len() - 1) as u32
    }

    /// Mean and SE over trees of the increment at `t`.
    pub fn increment_stats(&self, t: u32) -> (f64, f64) {
        let a = self.pools[t as usize].values();
        let b = self.pools[t as usize + 1].values();
        let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        mean_and_se(&diffs)
    }

    /// Mean and SE over trees of the squared gap between the final and the
    /// generation-`t` weight.
    pub fn tail_square_stats(&self, t: u32) -> (f64, f64) {
        let a = self.pools[t as usize].values();
        let last = self.pools.last().expect("non-empty").values();
        let sq: Vec<f64> = a.iter().zip(last).map(|(x, y)| (y - x) * (y - x)).collect();
        mean_and_se(&sq)
    }

    /// Mean and SE over trees of the conditional-variance proxy at `t`.
    pub fn sigma_stats(&self, t: u32) -> (f64, f64) {
        mean_and_se(&self.sigma[t as usize])
    }
}

/// Exact per-node weight and per-class totals. Weights are ratios of integers
/// (`count * n * d^- over m * product of out-degrees`), evaluated in u128 so
/// balanced-degree runs yield exactly 1.0; falls back to log arithmetic on
/// overflow.
fn class_weights(
    n: u64,
    m: u64,
    dm: u32,
    counts: &[u16],
    vals: &[u32],
    count: u64,
) -> (f64, f64) {
    let numer = n as u128 * dm as u128;
    let mut denom = Some(m as u128);
    for (&c, &v) in counts.iter().zip(vals) {
        for _ in 0..c {
            denom = denom.and_then(|d| d.checked_mul(v as u128));
        }
    }
    match denom.and_then(|d| (count as u128).checked_mul(numer).map(|t| (d, t))) {
        Some((d, total_numer)) => (numer as f64 / d as f64, total_numer as f64 / d as f64),
        None => {
            let mut log_w = (n as f64 * dm as f64).ln() - (m as f64).ln();
            for (&c, &v) in counts.iter().zip(vals) {
                log_w -= c as f64 * (v as f64).ln();
            }
            let w = log_w.exp();
            (w, w * count as f64)
        }
    }
}

/// Simulates `n_trees` marked branching trees and returns the generation
/// weights `M_0..=M_t_max` per tree. Nodes are aggregated into
/// (degree-pair, out-degree-multiset) classes with multinomial child
/// splitting, which has exactly the law of node-by-node simulation, so the
/// per-tree cost stays polynomial even when generations grow geometrically.
pub fn simulate_martingale(
    seq: &DegreeSequence,
    options: &MartingaleOptions,
    seed: u64,
) -> Result<MartingaleRun, LimitsError> {
    assert!(options.n_trees >= 1);
    let nu = offspring_mean(seq);
    let expected_nodes = nu.powi(options.t_max as i32) * options.n_trees as f64;
    if expected_nodes > options.node_budget {
        return Err(LimitsError::ExplosionGuard {
            expected_nodes,
            budget: options.node_budget,
        });
    }
    let classes = PairClasses::build(seq);
    let gamma = gamma_of(seq);
    let n = seq.n() as u64;
    let m = seq.m();
    let t_max = options.t_max as usize;

    let per_tree: Vec<(Vec<f64>, Vec<f64>)> = (0..options.n_trees)
        .into_par_iter()
        .map(|tree| {
            let mut rng = rng_from_seed(derive_seed(seed, tree));
            let mut m_t = Vec::with_capacity(t_max + 1);
            let mut s_t = Vec::with_capacity(t_max + 1);
            let root = classes.draw(&classes.root_cum, &mut rng);
            let mut gen: BTreeMap<(usize, Vec<u16>), u64> = BTreeMap::new();
            gen.insert((root, vec![0u16; classes.vals.len()]), 1);
            for t in 0..=t_max {
                let mut total = CompensatedSum::new();
                let mut sigma = CompensatedSum::new();
                for ((p, counts), &count) in &gen {
                    let (w1, w_total) =
                        class_weights(n, m, classes.dm[*p], counts, &classes.vals, count);
                    total.add(w_total);
                    sigma.add(count as f64 * w1 * w1 / classes.dm[*p] as f64);
                }
                m_t.push(total.total());
                s_t.push((gamma - 1.0).max(0.0) * sigma.total());
                if t == t_max {
                    break;
                }
                let mut next: BTreeMap<(usize, Vec<u16>), u64> = BTreeMap::new();
                for ((p, counts), &count) in &gen {
                    let mut remaining = count * classes.dm[*p] as u64;
                    let mut rem_prob = 1.0f64;
                    let mut prev_cum = 0.0f64;
                    for j in 0..classes.dm.len() {
                        let q = classes.out_cum[j] - prev_cum;
                        prev_cum = classes.out_cum[j];
                        let take = if j + 1 == classes.dm.len() {
                            remaining
                        } else if remaining == 0 {
                            0
                        } else {
                            let p_j = (q / rem_prob).clamp(0.0, 1.0);
                            rand_distr::Binomial::new(remaining, p_j)
                                .expect("valid binomial")
                                .sample(&mut rng)
                        };
                        rem_prob -= q;
                        remaining -= take;
                        if take > 0 {
                            let mut child_counts = counts.clone();
                            child_counts[classes.val_idx[j]] += 1;
                            *next.entry((j, child_counts)).or_insert(0) += take;
                        }
                    }
                }
                gen = next;
            }
            (m_t, s_t)
        })
        .collect();

    let n_trees = options.n_trees as usize;
    let mut pools = Vec::with_capacity(t_max + 1);
    let mut sigma = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        let values: Vec<f64> = per_tree.iter().map(|(mt, _)| mt[t]).collect();
        debug_assert_eq!(values.len(), n_trees);
        pools.push(SamplePool::new(
            values,
            PoolLabel::MT(t as u32),
            PoolMeta { seed, iterations: t as u64 },
        )?);
        sigma.push(per_tree.iter().map(|(_, st)| st[t]).collect());
    }
    Ok(MartingaleRun { pools, sigma, offspring_mean: nu })
}

/// Convergence record of the population-dynamics iteration.
#[derive(Clone, Debug)]
pub struct RdeRun {
    pub pool: SamplePool,
    /// Pool mean after each iteration.
    pub mean_history: Vec<f64>,
    /// Pool standard deviation after each iteration.
    pub sd_history: Vec<f64>,
    /// Martingale-aware standard error of `mean - 1` after k iterations:
    /// resampling noise accumulates across iterations, so the SE grows like
    /// sd_k * sqrt(k) / sqrt(pool), not sd_k / sqrt(pool).
    pub accumulated_se: Vec<f64>,
    /// Wasserstein-1 distance between consecutive pools.
    pub w1_history: Vec<f64>,
}

/// Population dynamics for the fixed point `Z`: start from the constant pool
/// 1 and repeatedly resample every slot as `(1/d^+_J) * sum of d^-_J draws`
/// from the previous pool, with `J` from the out-degree law.
pub fn sample_rde_with_history(
    seq: &DegreeSequence,
    pool_size: usize,
    iterations: u32,
    seed: u64,
) -> Result<RdeRun, LimitsError> {
    if pool_size < MIN_RDE_POOL {
        return Err(LimitsError::PoolTooSmall { got: pool_size, min: MIN_RDE_POOL });
    }
    assert!(iterations >= 1);
    let classes = PairClasses::build(seq);
    let mut rng = rng_from_seed(seed);
    let mut pool = vec![1.0f64; pool_size];
    let mut prev_sorted = pool.clone();
    let mut mean_history = Vec::with_capacity(iterations as usize);
    let mut sd_history = Vec::with_capacity(iterations as usize);
    let mut accumulated_se = Vec::with_capacity(iterations as usize);
    let mut w1_history = Vec::with_capacity(iterations as usize);
    for k in 1..=iterations {
        let prev = pool.clone();
        for slot in pool.iter_mut() {
            let j = classes.draw(&classes.out_cum, &mut rng);
            let mut s = 0.0f64;
            for _ in 0..classes.dm[j] {
                s += prev[rng.random_range(0..pool_size)];
            }
            *slot = s / classes.dp[j] as f64;
        }
        let (mean, se1) = mean_and_se(&pool);
        mean_history.push(mean);
        let sd = se1 * (pool_size as f64).sqrt();
        sd_history.push(sd);
        accumulated_se.push(sd * (k as f64).sqrt() / (pool_size as f64).sqrt());
        let mut sorted = pool.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        w1_history.push(w1_sorted_equal(&prev_sorted, &sorted));
        prev_sorted = sorted;
    }
    let pool = SamplePool::new(
        pool,
        PoolLabel::Z,
        PoolMeta { seed, iterations: iterations as u64 },
    )?;
    Ok(RdeRun { pool, mean_history, sd_history, accumulated_se, w1_history })
}

/// Final pool of [`sample_rde_with_history`].
pub fn sample_rde(
    seq: &DegreeSequence,
    pool_size: usize,
    iterations: u32,
    seed: u64,
) -> Result<SamplePool, LimitsError> {
    Ok(sample_rde_with_history(seq, pool_size, iterations, seed)?.pool)
}

/// Samples of the limit vertex weight: draw a uniform vertex, sum `d^-` draws
/// from the fixed-point pool, scale by `n/m`.
pub fn sample_m_star(
    seq: &DegreeSequence,
    z_pool: &SamplePool,
    n_samples: u64,
    seed: u64,
) -> Result<SamplePool, LimitsError> {
    if z_pool.label() != PoolLabel::Z {
        return Err(LimitsError::WrongLabel {
            expected: "Z",
            got: z_pool.label().to_string(),
        });
    }
    assert!(n_samples >= 1);
    let classes = PairClasses::build(seq);
    let z = z_pool.values();
    let n = seq.n() as f64;
    let m = seq.m() as f64;
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(n_samples as usize);
    for _ in 0..n_samples {
        let j = classes.draw(&classes.root_cum, &mut rng);
        let mut s = 0.0f64;
        for _ in 0..classes.dm[j] {
            s += z[rng.random_range(0..z.len())];
        }
        values.push(s * n / m);
    }
    SamplePool::new(values, PoolLabel::MStar, PoolMeta { seed, iterations: 0 })
}

/// Empirical equilibrium weights `n * pi(i)` over all vertices.
pub fn equilibrium_weight_pool(
    env: &Environment,
    pi_star: &Distribution,
) -> Result<SamplePool, LimitsError> {
    if pi_star.env_fingerprint() != env.fingerprint() {
        return Err(LimitsError::ContextMismatch);
    }
    let n = env.n() as f64;
    let values = pi_star.probs().iter().map(|p| p * n).collect();
    SamplePool::new(
        values,
        PoolLabel::NPiStar,
        PoolMeta { seed: env.seed(), iterations: 0 },
    )
}

fn w1_sorted_equal(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (x, y) in a.iter().zip(b) {
        acc.add((x - y).abs());
    }
    acc.total() / a.len() as f64
}

/// Wasserstein-1 distance between two sample pools: the integral of the gap
/// between their quantile functions. Equal sizes reduce to the mean absolute
/// difference of sorted samples; unequal sizes integrate the piecewise
/// constant quantiles exactly, with breakpoints compared in integer
/// arithmetic.
pub fn wasserstein1(a: &SamplePool, b: &SamplePool) -> f64 {
    let mut xs = a.values().to_vec();
    let mut ys = b.values().to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);
    if xs.len() == ys.len() {
        return w1_sorted_equal(&xs, &ys);
    }
    let k = xs.len() as u128;
    let l = ys.len() as u128;
    // position in units of 1/(k*l)
    let mut pos: u128 = 0;
    let mut i = 0usize;
    let mut j = 0usize;
    let mut acc = CompensatedSum::new();
    while i < xs.len() && j < ys.len() {
        let next_i = (i as u128 + 1) * l;
        let next_j = (j as u128 + 1) * k;
        let next = next_i.min(next_j);
        acc.add((xs[i] - ys[j]).abs() * (next - pos) as f64);
        pos = next;
        if next == next_i {
            i += 1;
        }
        if next == next_j {
            j += 1;
        }
    }
    acc.total() / (k * l) as f64
}

/// Histogram with fixed-width bins `[k*w, (k+1)*w)` covering `[0, max]`.
pub fn histogram(pool: &SamplePool, bin_width: f64) -> Vec<(f64, f64, u64)> {
    assert!(bin_width > 0.0);
    let max = pool.values().iter().cloned().fold(0.0f64, f64::max);
    let n_bins = (max / bin_width).floor() as usize + 1;
    let mut counts = vec![0u64; n_bins];
    for &v in pool.values() {
        let idx = ((v / bin_width).floor() as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(kk, c)| (kk as f64 * bin_width, (kk + 1) as f64 * bin_width, c))
        .collect()
}

/// Single-column CSV with a metadata comment line.
pub fn write_pool_csv<W: Write>(pool: &SamplePool, mut writer: W) -> Result<(), LimitsError> {
    writeln!(
        writer,
        "# label={} size={} seed={} iterations={}",
        pool.label(),
        pool.len(),
        pool.meta().seed,
        pool.meta().iterations
    )?;
    writeln!(writer, "value")?;
    for v in pool.values() {
        writeln!(writer, "{v}")?;
    }
    Ok(())
}

/// `bin_left,bin_right,count` CSV with the same metadata comment line.
pub fn write_histogram_csv<W: Write>(
    pool: &SamplePool,
    bin_width: f64,
    mut writer: W,
) -> Result<(), LimitsError> {
    writeln!(
        writer,
        "# label={} size={} seed={} iterations={} bin_width={}",
        pool.label(),
        pool.len(),
        pool.meta().seed,
        pool.meta().iterations,
        bin_width
    )?;
    writeln!(writer, "bin_left,bin_right,count")?;
    for (left, right, count) in histogram(pool, bin_width) {
        writeln!(writer, "{left},{right},{count}")?;
    }
    Ok(())
}
