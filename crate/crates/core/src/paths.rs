//! Path-weight statistics: the probability that a `t`-step walk follows a
//! path whose weight (product of reciprocal out-degrees along its states)
//! exceeds a threshold, under a fixed environment (quenched) or under the
//! i.i.d. size-biased out-degree law (annealed); plus the Gaussian upper tail
//! and the window-profile comparison.
//!
//! All weight comparisons happen in log domain, so nothing underflows even at
//! millions of steps. Weight sets are discrete, so the strict `> theta` rule
//! carries a small tolerance: values within [`TIE_TOL`] of the threshold count
//! as *not* exceeding, which keeps the classification platform-independent.

use crate::degrees::{DegreeSequence, SeqStats};
use crate::graphmodel::Environment;
use crate::numeric::CompensatedSum;
use crate::rng::rng_from_seed;
use crate::walk::WalkProfile;
use rand::Rng;
use std::collections::BTreeMap;

/// Half-width of the cutoff window in `w_star` units: the profile is compared
/// against the Gaussian tail at every integer time with |lambda| at most this.
pub const WINDOW_HALF_WIDTH: f64 = 4.0;

/// Log-domain slack for the strict `weight > theta` comparison; ties within
/// this margin count as not exceeding.
pub const TIE_TOL: f64 = 1e-12;

/// State-count ceiling above which the exact propagation refuses to run.
pub const EXACT_CLASS_LIMIT: f64 = 1e5;

#[derive(Debug, thiserror::Error)]
pub enum PathsError {
    #[error("theta = {theta} outside (0, 1]")]
    ThetaOutOfRange { theta: f64 },
    #[error("t = {t}; weight queries need t >= 1")]
    TimeOutOfRange { t: u32 },
    #[error("exact propagation needs <= {limit:.0} weight classes, got {classes:.3e}")]
    InfeasibleExact { classes: f64, limit: f64 },
    #[error("window comparison undefined when sigma^2 = 0")]
    DegenerateWindow,
    #[error("no profile time falls inside the window grid")]
    EmptyWindow,
}

/// A threshold query: walk length `t` and weight threshold `theta`, kept in
/// both linear and log form (`theta == exp(log_theta)`).
#[derive(Clone, Copy, Debug)]
pub struct WeightQuery {
    t: u32,
    theta: f64,
    log_theta: f64,
}

impl WeightQuery {
    pub fn from_theta(t: u32, theta: f64) -> Result<Self, PathsError> {
        if t < 1 {
            return Err(PathsError::TimeOutOfRange { t });
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(PathsError::ThetaOutOfRange { theta });
        }
        Ok(WeightQuery { t, theta, log_theta: theta.ln() })
    }

    pub fn from_log_theta(t: u32, log_theta: f64) -> Result<Self, PathsError> {
        if t < 1 {
            return Err(PathsError::TimeOutOfRange { t });
        }
        if !(log_theta <= 0.0) {
            return Err(PathsError::ThetaOutOfRange { theta: log_theta.exp() });
        }
        Ok(WeightQuery { t, theta: log_theta.exp(), log_theta })
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn log_theta(&self) -> f64 {
        self.log_theta
    }

    /// Strict exceedance with the tie rule: true iff
    /// `log_weight > log_theta + TIE_TOL`.
    pub fn exceeds(&self, log_weight: f64) -> bool {
        log_weight - self.log_theta > TIE_TOL
    }
}

/// A Monte Carlo proportion with its binomial standard error; counts are kept
/// so independent blocks merge exactly.
#[derive(Clone, Copy, Debug)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub exceed_count: u64,
    pub n_samples: u64,
}

impl MonteCarloEstimate {
    fn from_counts(exceed_count: u64, n_samples: u64) -> Self {
        let p = exceed_count as f64 / n_samples as f64;
        MonteCarloEstimate {
            estimate: p,
            std_error: (p * (1.0 - p) / n_samples as f64).sqrt(),
            exceed_count,
            n_samples,
        }
    }
}

/// Probability that a `t`-step walk from `i` in this environment follows a
/// path of weight exceeding `theta`, by simulating walks: the chance of
/// drawing a path equals its weight, so the indicator average is unbiased.
pub fn quenched_q(
    env: &Environment,
    i: u32,
    query: &WeightQuery,
    n_samples: u64,
    seed: u64,
) -> MonteCarloEstimate {
    assert!(n_samples >= 1);
    let ln_dplus: Vec<f64> = (0..env.n() as u32)
        .map(|v| (env.out_degree(v) as f64).ln())
        .collect();
    let mut rng = rng_from_seed(seed);
    let mut hits = 0u64;
    for _ in 0..n_samples {
        let mut v = i;
        let mut log_w = CompensatedSum::new();
        for _ in 0..query.t {
            log_w.add(-ln_dplus[v as usize]);
            let arcs = env.out_arcs(v);
            v = arcs[rng.random_range(0..arcs.len())];
        }
        hits += query.exceeds(log_w.total()) as u64;
    }
    MonteCarloEstimate::from_counts(hits, n_samples)
}

fn distinct_out_degrees(env: &Environment) -> (Vec<u32>, Vec<u8>) {
    let mut vals: Vec<u32> = env.seq().entries().iter().map(|&(_, dp)| dp).collect();
    vals.sort_unstable();
    vals.dedup();
    let index = |d: u32| vals.binary_search(&d).expect("degree present") as u8;
    let per_vertex: Vec<u8> =
        env.seq().entries().iter().map(|&(_, dp)| index(dp)).collect();
    (vals, per_vertex)
}

/// Number of multisets of size `t` over `d` distinct values, saturating in f64.
fn weight_class_count(t: u32, d: usize) -> f64 {
    // C(t + d - 1, d - 1)
    let mut acc = 1.0f64;
    for j in 1..d {
        acc *= (t as f64 + j as f64) / j as f64;
    }
    acc
}

/// Exact quenched exceedance probability, propagating the joint law of
/// (position, multiset of out-degrees seen so far). Log-weights take one value
/// per multiset, so the state space stays small when the environment has few
/// distinct out-degrees; refuses when the class count passes
/// [`EXACT_CLASS_LIMIT`].
pub fn quenched_q_exact(
    env: &Environment,
    i: u32,
    query: &WeightQuery,
) -> Result<f64, PathsError> {
    let (vals, per_vertex) = distinct_out_degrees(env);
    let classes = weight_class_count(query.t, vals.len());
    if classes > EXACT_CLASS_LIMIT {
        return Err(PathsError::InfeasibleExact { classes, limit: EXACT_CLASS_LIMIT });
    }
    let ln_vals: Vec<f64> = vals.iter().map(|&d| (d as f64).ln()).collect();
    let mut cur: BTreeMap<(u32, Vec<u16>), f64> = BTreeMap::new();
    cur.insert((i, vec![0u16; vals.len()]), 1.0);
    for _ in 0..query.t {
        let mut next: BTreeMap<(u32, Vec<u16>), f64> = BTreeMap::new();
        for ((v, counts), p) in cur {
            let share = p / env.out_degree(v) as f64;
            let mut bumped = counts;
            bumped[per_vertex[v as usize] as usize] += 1;
            for &u in env.out_arcs(v) {
                *next.entry((u, bumped.clone())).or_insert(0.0) += share;
            }
        }
        cur = next;
    }
    let mut total = CompensatedSum::new();
    for ((_, counts), p) in cur {
        let mut log_w = CompensatedSum::new();
        for (c, lv) in counts.iter().zip(&ln_vals) {
            log_w.add(-(*c as f64) * lv);
        }
        if query.exceeds(log_w.total()) {
            total.add(p);
        }
    }
    Ok(total.total())
}

/// Size-biased out-degree law of a sequence: value `d` carries probability
/// `(1/m) sum of d_i^- over i with d_i^+ = d`.
fn size_biased_out_law(seq: &DegreeSequence) -> Vec<(u32, f64)> {
    let mut mass: BTreeMap<u32, u64> = BTreeMap::new();
    for &(dm, dp) in seq.entries() {
        *mass.entry(dp).or_insert(0) += dm as u64;
    }
    mass.into_iter()
        .map(|(d, w)| (d, w as f64 / seq.m() as f64))
        .collect()
}

/// Annealed exceedance probability: the walk's log-weight increments become
/// i.i.d. draws from the size-biased out-degree law.
pub fn annealed_q(
    seq: &DegreeSequence,
    query: &WeightQuery,
    n_samples: u64,
    seed: u64,
) -> MonteCarloEstimate {
    assert!(n_samples >= 1);
    let law = size_biased_out_law(seq);
    let table: Vec<(f64, f64)> = {
        let mut acc = 0.0;
        law.iter()
            .map(|&(d, p)| {
                acc += p;
                (acc, -((d as f64).ln()))
            })
            .collect()
    };
    let mut rng = rng_from_seed(seed);
    let mut hits = 0u64;
    for _ in 0..n_samples {
        let mut log_w = CompensatedSum::new();
        for _ in 0..query.t {
            let u: f64 = rng.random();
            let mut inc = table[table.len() - 1].1;
            for &(cum, lw) in &table {
                if u < cum {
                    inc = lw;
                    break;
                }
            }
            log_w.add(inc);
        }
        hits += query.exceeds(log_w.total()) as u64;
    }
    MonteCarloEstimate::from_counts(hits, n_samples)
}

/// Exact annealed exceedance probability by summing the multinomial law over
/// count vectors of the distinct out-degree values. Runs whenever the count
/// lattice has at most [`EXACT_CLASS_LIMIT`] points.
pub fn annealed_q_exact(seq: &DegreeSequence, query: &WeightQuery) -> Result<f64, PathsError> {
    let law = size_biased_out_law(seq);
    let d = law.len();
    let classes = weight_class_count(query.t, d);
    if classes > EXACT_CLASS_LIMIT {
        return Err(PathsError::InfeasibleExact { classes, limit: EXACT_CLASS_LIMIT });
    }
    let ln_p: Vec<f64> = law.iter().map(|&(_, p)| p.ln()).collect();
    let ln_d: Vec<f64> = law.iter().map(|&(v, _)| (v as f64).ln()).collect();
    let lgamma_t1 = libm::lgamma(query.t as f64 + 1.0);
    let mut total = CompensatedSum::new();
    let mut counts = vec![0u32; d];
    // enumerate all count vectors summing to t over the d values
    fn recurse(
        j: usize,
        remaining: u32,
        counts: &mut Vec<u32>,
        query: &WeightQuery,
        ln_p: &[f64],
        ln_d: &[f64],
        lgamma_t1: f64,
        total: &mut CompensatedSum,
    ) {
        if j == counts.len() - 1 {
            counts[j] = remaining;
            let mut log_prob = lgamma_t1;
            let mut log_w = CompensatedSum::new();
            for (k, &c) in counts.iter().enumerate() {
                log_prob -= libm::lgamma(c as f64 + 1.0);
                log_prob += c as f64 * ln_p[k];
                log_w.add(-(c as f64) * ln_d[k]);
            }
            if query.exceeds(log_w.total()) {
                total.add(log_prob.exp());
            }
            return;
        }
        for c in 0..=remaining {
            counts[j] = c;
            recurse(j + 1, remaining - c, counts, query, ln_p, ln_d, lgamma_t1, total);
        }
    }
    recurse(0, query.t, &mut counts, query, &ln_p, &ln_d, lgamma_t1, &mut total);
    Ok(total.total())
}

/// Standard normal upper tail `P(N > lambda)`, absolute error below 1e-12.
pub fn gaussian_tail(lambda: f64) -> f64 {
    0.5 * libm::erfc(lambda / std::f64::consts::SQRT_2)
}

/// Window comparison of a profile against the Gaussian tail.
#[derive(Clone, Debug)]
pub struct WindowReport {
    pub times: Vec<u32>,
    pub lambda_grid: Vec<f64>,
    /// Max-over-starts TV at each grid time.
    pub tv_values: Vec<f64>,
    pub gaussian_values: Vec<f64>,
    pub gaps: Vec<f64>,
    pub sup_gap: f64,
}

/// Compares `tv_max` against `gaussian_tail(lambda_t)` at every profile time
/// with |lambda| <= [`WINDOW_HALF_WIDTH`] and reports the supremum gap.
pub fn window_profile_check(
    profile: &WalkProfile,
    stats: &SeqStats,
) -> Result<WindowReport, PathsError> {
    if !(stats.w_star > 0.0) {
        return Err(PathsError::DegenerateWindow);
    }
    let mut report = WindowReport {
        times: Vec::new(),
        lambda_grid: Vec::new(),
        tv_values: Vec::new(),
        gaussian_values: Vec::new(),
        gaps: Vec::new(),
        sup_gap: 0.0,
    };
    for (k, &t) in profile.times.iter().enumerate() {
        let lambda = (t as f64 - stats.t_star) / stats.w_star;
        if lambda.abs() > WINDOW_HALF_WIDTH {
            continue;
        }
        let tail = gaussian_tail(lambda);
        let gap = (profile.tv_max[k] - tail).abs();
        report.times.push(t);
        report.lambda_grid.push(lambda);
        report.tv_values.push(profile.tv_max[k]);
        report.gaussian_values.push(tail);
        report.gaps.push(gap);
        report.sup_gap = report.sup_gap.max(gap);
    }
    if report.times.is_empty() {
        return Err(PathsError::EmptyWindow);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrees::{benchmark_mixture, compute_stats, from_groups};
    use crate::graphmodel::sample_environment;

    #[test]
    fn weight_query_validation() {
        assert!(matches!(
            WeightQuery::from_theta(0, 0.5),
            Err(PathsError::TimeOutOfRange { t: 0 })
        ));
        assert!(matches!(
            WeightQuery::from_theta(3, 0.0),
            Err(PathsError::ThetaOutOfRange { .. })
        ));
        assert!(matches!(
            WeightQuery::from_theta(3, 1.5),
            Err(PathsError::ThetaOutOfRange { .. })
        ));
        let q = WeightQuery::from_theta(3, 1.0).unwrap();
        assert_eq!(q.log_theta(), 0.0);
        let q = WeightQuery::from_log_theta(5, -2.5).unwrap();
        assert_eq!(q.theta(), (-2.5f64).exp());
        assert!(WeightQuery::from_log_theta(5, 0.5).is_err());
    }

    #[test]
    fn tie_rule_breaks_toward_not_exceeding() {
        let q = WeightQuery::from_log_theta(1, -1.0).unwrap();
        assert!(!q.exceeds(-1.0));
        assert!(!q.exceeds(-1.0 + 5e-13));
        assert!(!q.exceeds(-1.0 - 5e-13));
        assert!(q.exceeds(-1.0 + 1e-11));
        assert!(!q.exceeds(-1.5));
    }

    #[test]
    fn constant_out_degree_weight_is_degenerate() {
        let seq = from_groups(&[(100, 3, 3)]).unwrap();
        let env = sample_environment(&seq, 8);
        let below = WeightQuery::from_theta(3, 0.9 / 27.0).unwrap();
        let at = WeightQuery::from_theta(3, 1.0 / 27.0).unwrap();
        let est = quenched_q(&env, 5, &below, 200, 1);
        assert_eq!(est.estimate, 1.0);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(quenched_q(&env, 5, &at, 200, 1).estimate, 0.0);
        assert_eq!(quenched_q_exact(&env, 5, &below).unwrap(), 1.0);
        assert_eq!(quenched_q_exact(&env, 5, &at).unwrap(), 0.0);
        // annealed mirrors the indicator
        assert_eq!(annealed_q(&seq, &below, 200, 2).estimate, 1.0);
        assert_eq!(annealed_q_exact(&seq, &at).unwrap(), 0.0);
    }

    #[test]
    fn theta_one_never_exceeded() {
        let seq = from_groups(&[(4, 2, 3), (4, 4, 3), (4, 4, 4)]).unwrap();
        let env = sample_environment(&seq, 21);
        let q = WeightQuery::from_theta(4, 1.0).unwrap();
        assert_eq!(quenched_q(&env, 0, &q, 500, 3).estimate, 0.0);
        assert_eq!(quenched_q_exact(&env, 0, &q).unwrap(), 0.0);
    }

    #[test]
    fn exact_propagation_matches_monte_carlo() {
        let seq = from_groups(&[(3, 2, 3), (3, 4, 3), (3, 4, 4)]).unwrap();
        let env = sample_environment(&seq, 12);
        let stats = compute_stats(&seq).unwrap();
        for (i, c) in [(0u32, -0.8f64), (4, 0.0), (7, 0.9)] {
            let t = 4u32;
            let log_theta = -stats.mu * t as f64 + c * stats.sigma2.sqrt() * (t as f64).sqrt();
            let q = WeightQuery::from_log_theta(t, log_theta).unwrap();
            let exact = quenched_q_exact(&env, i, &q).unwrap();
            let mc = quenched_q(&env, i, &q, 40_000, 99 + i as u64);
            assert!(
                (mc.estimate - exact).abs() <= 3.0 * mc.std_error + 1e-9,
                "i={i} c={c}: mc {} vs exact {exact} (se {})",
                mc.estimate,
                mc.std_error
            );
        }
    }

    #[test]
    fn estimates_monotone_in_theta_with_common_seed() {
        let seq = from_groups(&[(3, 2, 3), (3, 4, 3), (3, 4, 4)]).unwrap();
        let env = sample_environment(&seq, 5);
        let mut last_q = f64::INFINITY;
        let mut last_a = f64::INFINITY;
        for log_theta in [-6.0, -5.0, -4.4, -4.0, -3.0] {
            let q = WeightQuery::from_log_theta(4, log_theta).unwrap();
            let eq = quenched_q(&env, 2, &q, 5_000, 42).estimate;
            let ea = annealed_q(&seq, &q, 5_000, 43).estimate;
            assert!(eq <= last_q);
            assert!(ea <= last_a);
            last_q = eq;
            last_a = ea;
        }
    }

    #[test]
    fn exact_propagation_refuses_blowup() {
        let seq =
            from_groups(&[(1, 4, 1), (1, 4, 2), (1, 4, 3), (1, 3, 4), (1, 3, 5), (1, 3, 6)])
                .unwrap();
        let env = sample_environment(&seq, 1);
        let q = WeightQuery::from_log_theta(30, -20.0).unwrap();
        assert!(matches!(
            quenched_q_exact(&env, 0, &q),
            Err(PathsError::InfeasibleExact { .. })
        ));
    }

    #[test]
    fn annealed_exact_matches_frozen_gaussian_window_values() {
        let seq = benchmark_mixture(15000).unwrap();
        let stats = compute_stats(&seq).unwrap();
        let t = 200u32;
        let sigma = stats.sigma2.sqrt();
        let cases = [
            (-1.0, 0.826071396777648),
            (0.0, 0.4731557256723585),
            (1.0, 0.17422832990466502),
        ];
        for (c, want) in cases {
            let log_theta = -stats.mu * t as f64 + c * sigma * (t as f64).sqrt();
            let q = WeightQuery::from_log_theta(t, log_theta).unwrap();
            let got = annealed_q_exact(&seq, &q).unwrap();
            assert!((got - want).abs() <= 1e-10, "c={c}: got {got}, want {want}");
        }
        let q8 = WeightQuery::from_log_theta(8, -stats.mu * 8.0).unwrap();
        let got = annealed_q_exact(&seq, &q8).unwrap();
        assert!((got - 0.5940864).abs() <= 1e-12, "got {got}");
    }

    #[test]
    fn annealed_monte_carlo_agrees_with_exact() {
        let seq = benchmark_mixture(15000).unwrap();
        let stats = compute_stats(&seq).unwrap();
        let q = WeightQuery::from_log_theta(8, -stats.mu * 8.0).unwrap();
        let mc = annealed_q(&seq, &q, 100_000, 7);
        assert!((mc.estimate - 0.5940864).abs() <= 3.0 * mc.std_error);
        assert!((mc.estimate - 0.5).abs() <= 0.1);
    }

    #[test]
    fn gaussian_tail_matches_reference_table() {
        let table = [
            (-3.0, 0.9986501019683699),
            (-2.0, 0.9772498680518208),
            (-1.0, 0.8413447460685429),
            (-0.5, 0.6914624612740131),
            (0.0, 0.5),
            (0.5, 0.3085375387259869),
            (1.0, 0.15865525393145707),
            (1.6449, 0.04999521746834630),
            (2.0, 0.022750131948179207),
            (3.0, 0.0013498980316300946),
            (5.0, 2.866515718791939e-7),
        ];
        for (l, want) in table {
            let got = gaussian_tail(l);
            assert!((got - want).abs() <= 1e-12, "lambda={l}: got {got}, want {want}");
            assert!((gaussian_tail(-l) - (1.0 - want)).abs() <= 1e-12);
        }
        assert!((gaussian_tail(1.6449) - 0.05).abs() <= 1e-4);
        for w in table.windows(2) {
            assert!(gaussian_tail(w[1].0) < gaussian_tail(w[0].0));
        }
    }

    #[test]
    fn window_check_reports_sup_gap() {
        let seq = benchmark_mixture(15000).unwrap();
        let stats = compute_stats(&seq).unwrap();
        let times: Vec<u32> = (0..=20).collect();
        let tv_row: Vec<f64> = times
            .iter()
            .map(|&t| if t < 8 { 0.97 } else { 0.03 })
            .collect();
        let profile = WalkProfile {
            times: times.clone(),
            start_set: vec![0],
            tv: vec![tv_row.clone()],
            tv_min: tv_row.clone(),
            tv_mean: tv_row.clone(),
            tv_max: tv_row,
            lambda: times.iter().map(|&t| (t as f64 - stats.t_star) / stats.w_star).collect(),
        };
        let report = window_profile_check(&profile, &stats).unwrap();
        // window [t* - 4w*, t* + 4w*] = [6.62, 9.23] -> integer grid {7, 8, 9}
        assert_eq!(report.times, vec![7, 8, 9]);
        for w in report.gaussian_values.windows(2) {
            assert!(w[1] < w[0]);
        }
        let expect_sup = (0.97 - gaussian_tail(report.lambda_grid[0]))
            .abs()
            .max((0.03 - gaussian_tail(report.lambda_grid[1])).abs())
            .max((0.03 - gaussian_tail(report.lambda_grid[2])).abs());
        assert!((report.sup_gap - expect_sup).abs() <= 1e-15);
    }

    #[test]
    fn window_check_degenerate_and_empty() {
        let reg = compute_stats(&from_groups(&[(100, 3, 3)]).unwrap()).unwrap();
        let fig = compute_stats(&benchmark_mixture(15000).unwrap()).unwrap();
        let profile = WalkProfile {
            times: vec![0, 1],
            start_set: vec![0],
            tv: vec![vec![1.0, 0.9]],
            tv_min: vec![1.0, 0.9],
            tv_mean: vec![1.0, 0.9],
            tv_max: vec![1.0, 0.9],
            lambda: vec![f64::NAN, f64::NAN],
        };
        assert!(matches!(
            window_profile_check(&profile, &reg),
            Err(PathsError::DegenerateWindow)
        ));
        assert!(matches!(
            window_profile_check(&profile, &fig),
            Err(PathsError::EmptyWindow)
        ));
    }
}
