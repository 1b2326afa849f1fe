//! Exact evolution of walk distributions, total-variation distances, the
//! depth-`h` proxy for the equilibrium measure, the power-iteration
//! equilibrium solver, and per-start distance profiles.

use crate::degrees::{compute_stats, DegreeError, SeqStats};
use crate::graphmodel::{strongly_connected, tree_depth, Environment, GraphError};
use crate::numeric::{compensated_sum, CompensatedSum};
use rayon::prelude::*;
use std::collections::HashMap;

/// Start sets cover all of `V` up to this vertex count; larger graphs use a
/// seeded sample plus worst-case candidates.
pub const FULL_START_LIMIT: usize = 2000;
pub const DEFAULT_START_SAMPLE: usize = 50;
pub const DEFAULT_WORST_STARTS: usize = 10;
pub const DEFAULT_EQ_TOL: f64 = 1e-12;
pub const DEFAULT_EQ_MAX_ITERS: u64 = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum WalkError {
    #[error("distributions belong to different environments ({a:#x} vs {b:#x})")]
    ContextMismatch { a: u64, b: u64 },
    #[error("distribution invalid: {0}")]
    InvalidDistribution(String),
    #[error("environment is not strongly connected")]
    NotStronglyConnected,
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: u64, residual: f64 },
    #[error("rho = {rho} >= 1; the geometric bound needs rho < 1")]
    RhoOne { rho: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Degrees(#[from] DegreeError),
}

/// Dense probability vector over the vertices of one environment. The
/// fingerprint ties it to that environment so cross-environment arithmetic is
/// rejected instead of silently producing garbage.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
    env_fp: u64,
}

impl Distribution {
    /// Validates length, non-negativity, and unit mass (1e-12).
    pub fn try_new(env: &Environment, probs: Vec<f64>) -> Result<Self, WalkError> {
        if probs.len() != env.n() {
            return Err(WalkError::InvalidDistribution(format!(
                "length {} != n {}",
                probs.len(),
                env.n()
            )));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(WalkError::InvalidDistribution(format!(
                "entry {i} is {}",
                probs[i]
            )));
        }
        let sum = compensated_sum(probs.iter().copied());
        if (sum - 1.0).abs() > 1e-12 {
            return Err(WalkError::InvalidDistribution(format!("mass {sum} != 1")));
        }
        Ok(Distribution { probs, env_fp: env.fingerprint() })
    }

    fn unchecked(env: &Environment, probs: Vec<f64>) -> Self {
        Distribution { probs, env_fp: env.fingerprint() }
    }

    /// Point mass at `i`.
    pub fn delta(env: &Environment, i: u32) -> Self {
        let mut probs = vec![0.0; env.n()];
        probs[i as usize] = 1.0;
        Distribution::unchecked(env, probs)
    }

    /// The in-degree measure `i -> d_i^- / m`: the law of the end-point of a
    /// uniformly chosen head, and the canonical start of the solver.
    pub fn in_degree(env: &Environment) -> Self {
        let m = env.m() as f64;
        let probs = env.seq().entries().iter().map(|&(dm, _)| dm as f64 / m).collect();
        Distribution::unchecked(env, probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn env_fingerprint(&self) -> u64 {
        self.env_fp
    }

    pub fn mass(&self) -> f64 {
        compensated_sum(self.probs.iter().copied())
    }

    fn renormalize(&mut self) {
        let sum = self.mass();
        for p in &mut self.probs {
            *p /= sum;
        }
    }
}

fn assert_context(env: &Environment, dist: &Distribution) {
    assert_eq!(
        env.fingerprint(),
        dist.env_fp,
        "distribution used with a different environment"
    );
}

/// One application of the transition kernel: vertex `i` sends `probs[i]/d_i^+`
/// along each of its tail arcs. One pass over the arcs, deterministic
/// accumulation order.
pub fn step(env: &Environment, dist: &Distribution) -> Distribution {
    assert_context(env, dist);
    let mut next = vec![0.0f64; env.n()];
    for v in 0..env.n() as u32 {
        let p = dist.probs[v as usize];
        if p == 0.0 {
            continue;
        }
        let share = p / env.out_degree(v) as f64;
        for &t in env.out_arcs(v) {
            next[t as usize] += share;
        }
    }
    Distribution::unchecked(env, next)
}

/// Law of the walk after `t` steps from vertex `i`.
pub fn dist_from_vertex(env: &Environment, i: u32, t: u32) -> Distribution {
    let mut dist = Distribution::delta(env, i);
    for _ in 0..t {
        dist = step(env, &dist);
    }
    dist
}

/// Half L1 distance between two distributions on the same environment.
pub fn tv_distance(a: &Distribution, b: &Distribution) -> Result<f64, WalkError> {
    if a.env_fp != b.env_fp {
        return Err(WalkError::ContextMismatch { a: a.env_fp, b: b.env_fp });
    }
    Ok(tv_slices(&a.probs, &b.probs))
}

fn tv_slices(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (x, y) in a.iter().zip(b) {
        acc.add((x - y).abs());
    }
    0.5 * acc.total()
}

/// The in-degree measure advanced `h = floor(ln n / (10 ln delta_max))` steps:
/// a cheap stand-in for the equilibrium measure on locally tree-like graphs.
pub fn proxy_equilibrium(env: &Environment) -> Result<Distribution, WalkError> {
    let h = tree_depth(env.n(), env.seq().delta_max())?;
    let mut pi = Distribution::in_degree(env);
    for _ in 0..h {
        pi = step(env, &pi);
    }
    Ok(pi)
}

#[derive(Clone, Copy, Debug)]
pub struct EquilibriumOptions {
    pub tol: f64,
    pub max_iters: u64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions { tol: DEFAULT_EQ_TOL, max_iters: DEFAULT_EQ_MAX_ITERS }
    }
}

#[derive(Clone, Debug)]
pub struct EquilibriumSolve {
    pub pi: Distribution,
    /// Kernel applications performed, including the final stationarity check.
    pub iterations: u64,
    /// Times the oscillation fallback averaged two consecutive iterates.
    pub cesaro_activations: u64,
    /// TV between the returned measure and its image under one more step.
    pub residual: f64,
}

/// Power iteration from the in-degree measure until consecutive iterates agree
/// in TV below `tol`, with a verification step. Aperiodicity is not a given,
/// so stalled TV increments (a 2-cycle signature) trigger averaging of the two
/// consecutive iterates; activations are counted, not assumed.
pub fn equilibrium(
    env: &Environment,
    options: &EquilibriumOptions,
) -> Result<EquilibriumSolve, WalkError> {
    if !strongly_connected(env) {
        return Err(WalkError::NotStronglyConnected);
    }
    let mut pi = Distribution::in_degree(env);
    let mut iterations = 0u64;
    let mut cesaro_activations = 0u64;
    let mut prev_r = f64::INFINITY;
    loop {
        let mut next = step(env, &pi);
        next.renormalize();
        iterations += 1;
        let r = tv_slices(&pi.probs, &next.probs);
        if r < options.tol {
            let mut check = step(env, &next);
            check.renormalize();
            iterations += 1;
            let r2 = tv_slices(&next.probs, &check.probs);
            if r2 < options.tol {
                return Ok(EquilibriumSolve {
                    pi: next,
                    iterations,
                    cesaro_activations,
                    residual: r2,
                });
            }
            pi = check;
            prev_r = r2;
        } else if iterations >= options.max_iters {
            return Err(WalkError::NoConvergence { iterations, residual: r });
        } else if iterations >= 4 && r >= prev_r * (1.0 - 1e-9) {
            for (p, q) in pi.probs.iter_mut().zip(&next.probs) {
                *p = 0.5 * (*p + q);
            }
            pi.renormalize();
            cesaro_activations += 1;
            prev_r = r;
        } else {
            pi = next;
            prev_r = r;
        }
    }
}

/// Closed-form bound on the TV distance between the `t`-step law started from
/// the in-degree measure and the equilibrium measure:
/// `sqrt(n (gamma-1) rho^t / (m (1-rho))) / 2`. Vanishes identically when
/// in- and out-degrees agree (gamma = 1) and decays geometrically otherwise.
pub fn tv_convergence_bound(
    stats: &SeqStats,
    n: usize,
    m: u64,
    t: u32,
) -> Result<f64, WalkError> {
    if stats.rho >= 1.0 {
        return Err(WalkError::RhoOne { rho: stats.rho });
    }
    let excess = (stats.gamma - 1.0).max(0.0);
    let value = (n as f64 * excess * stats.rho.powi(t as i32) / (m as f64 * (1.0 - stats.rho)))
        .sqrt()
        / 2.0;
    Ok(value)
}

#[derive(Clone, Debug)]
pub enum ProfileTarget {
    /// Distance to the depth-`h` proxy.
    Proxy,
    /// Distance to the solved equilibrium measure.
    Exact(EquilibriumOptions),
}

/// Per-start TV trajectories against a fixed target measure, with window
/// coordinates `lambda_t = (t - t_star)/w_star` (NaN when `w_star` is 0).
#[derive(Clone, Debug)]
pub struct WalkProfile {
    pub times: Vec<u32>,
    pub start_set: Vec<u32>,
    /// `tv[s][k]` = distance from start `start_set[s]` at time `times[k]`.
    pub tv: Vec<Vec<f64>>,
    pub tv_min: Vec<f64>,
    pub tv_mean: Vec<f64>,
    pub tv_max: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl WalkProfile {
    /// Merges profiles over the same time grid (e.g. independent
    /// environments) into one start population.
    pub fn pool(profiles: &[WalkProfile]) -> Option<WalkProfile> {
        let first = profiles.first()?;
        let times = first.times.clone();
        if profiles.iter().any(|p| p.times != times) {
            return None;
        }
        let mut start_set = Vec::new();
        let mut tv = Vec::new();
        for p in profiles {
            start_set.extend_from_slice(&p.start_set);
            tv.extend(p.tv.iter().cloned());
        }
        let (tv_min, tv_mean, tv_max) = summarize(&tv, times.len());
        Some(WalkProfile {
            times,
            start_set,
            tv,
            tv_min,
            tv_mean,
            tv_max,
            lambda: first.lambda.clone(),
        })
    }

    /// Largest increase of any per-start row along time; contraction toward a
    /// fixed target means this stays at rounding scale.
    pub fn max_monotonicity_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.tv {
            for w in row.windows(2) {
                worst = worst.max(w[1] - w[0]);
            }
        }
        worst
    }
}

fn summarize(tv: &[Vec<f64>], n_times: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut mins = vec![f64::INFINITY; n_times];
    let mut maxs = vec![f64::NEG_INFINITY; n_times];
    let mut means = Vec::with_capacity(n_times);
    for k in 0..n_times {
        let mut acc = CompensatedSum::new();
        for row in tv {
            mins[k] = mins[k].min(row[k]);
            maxs[k] = maxs[k].max(row[k]);
            acc.add(row[k]);
        }
        means.push(acc.total() / tv.len() as f64);
    }
    (mins, means, maxs)
}

/// Evolves a point mass from every start and records TV to the target at each
/// time `0..=t_max`. Starts run in parallel; results are keyed by start index
/// and reduced in start order, so summaries are bit-stable.
pub fn distance_profile(
    env: &Environment,
    start_set: &[u32],
    t_max: u32,
    target: &ProfileTarget,
) -> Result<WalkProfile, WalkError> {
    assert!(!start_set.is_empty(), "empty start set");
    let stats = compute_stats(env.seq())?;
    let target_dist = match target {
        ProfileTarget::Proxy => proxy_equilibrium(env)?,
        ProfileTarget::Exact(options) => equilibrium(env, options)?.pi,
    };
    let tv: Vec<Vec<f64>> = start_set
        .par_iter()
        .map(|&s| {
            let mut dist = Distribution::delta(env, s);
            let mut row = Vec::with_capacity(t_max as usize + 1);
            row.push(tv_slices(&dist.probs, &target_dist.probs));
            for _ in 0..t_max {
                dist = step(env, &dist);
                row.push(tv_slices(&dist.probs, &target_dist.probs));
            }
            row
        })
        .collect();
    let times: Vec<u32> = (0..=t_max).collect();
    let lambda = times
        .iter()
        .map(|&t| {
            if stats.w_star > 0.0 {
                (t as f64 - stats.t_star) / stats.w_star
            } else {
                f64::NAN
            }
        })
        .collect();
    let (tv_min, tv_mean, tv_max) = summarize(&tv, times.len());
    Ok(WalkProfile {
        times,
        start_set: start_set.to_vec(),
        tv,
        tv_min,
        tv_mean,
        tv_max,
        lambda,
    })
}

/// Start-set policy: the whole vertex set up to [`FULL_START_LIMIT`]; beyond
/// that, `sample_size` seeded uniform draws without replacement plus the
/// `worst_count` vertices of lowest target mass (worst-case candidates).
/// Returns a sorted, deduplicated list.
pub fn select_starts(
    env: &Environment,
    pi_star: Option<&Distribution>,
    sample_size: usize,
    worst_count: usize,
    seed: u64,
) -> Vec<u32> {
    let n = env.n();
    if n <= FULL_START_LIMIT {
        return (0..n as u32).collect();
    }
    let mut rng = crate::rng::rng_from_seed(seed);
    let mut picks = sample_without_replacement(&mut rng, n, sample_size.min(n));
    if let Some(pi) = pi_star {
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_unstable_by(|&a, &b| {
            pi.probs[a as usize]
                .total_cmp(&pi.probs[b as usize])
                .then(a.cmp(&b))
        });
        picks.extend(order.into_iter().take(worst_count));
    }
    picks.sort_unstable();
    picks.dedup();
    picks
}

fn sample_without_replacement(
    rng: &mut impl rand::Rng,
    n: usize,
    k: usize,
) -> Vec<u32> {
    let mut displaced: HashMap<usize, usize> = HashMap::new();
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let pick = rng.random_range(j..n);
        let chosen = *displaced.get(&pick).unwrap_or(&pick);
        let at_j = *displaced.get(&j).unwrap_or(&j);
        displaced.insert(pick, at_j);
        out.push(chosen as u32);
    }
    out
}
