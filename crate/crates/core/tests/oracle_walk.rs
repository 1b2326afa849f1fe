//! Cross-validation of the production walk and path-weight machinery against
//! the independent brute-force references: exhaustive path enumeration and a
//! dense linear solve.

use dirmix::degrees::build_degree_sequence;
use dirmix::graphmodel::{sample_environment, strongly_connected, Environment};
use dirmix::paths::{quenched_q, quenched_q_exact, WeightQuery};
use dirmix::reference::{
    quenched_q_by_paths, stationary_dense_solve, walk_distribution_by_paths,
};
use dirmix::rng::{derive_seed, rng_from_seed};
use dirmix::walk::{dist_from_vertex, equilibrium, step, tv_distance, EquilibriumOptions};
use rand::Rng;

/// Balanced degree sequence with `2..=n_max` vertices and degrees in
/// `lo..=hi`: out-degrees are a shuffle of the in-degrees, so the sums match
/// by construction.
fn random_environment(case: u64, n_max: usize, lo: u32, hi: u32) -> Environment {
    let mut rng = rng_from_seed(derive_seed(0xA11CE, case));
    let n = rng.random_range(2..=n_max);
    let d_minus: Vec<u32> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    let mut d_plus = d_minus.clone();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        d_plus.swap(i, j);
    }
    let entries: Vec<(u32, u32)> = d_minus.into_iter().zip(d_plus).collect();
    let seq = build_degree_sequence(entries).expect("balanced by construction");
    sample_environment(&seq, derive_seed(0x0E27, case))
}

fn strongly_connected_environment(case: u64, n_max: usize) -> Environment {
    let mut rng = rng_from_seed(derive_seed(0x5CC0, case));
    let n = rng.random_range(2..=n_max);
    let d_minus: Vec<u32> = (0..n).map(|_| rng.random_range(2..=3)).collect();
    let mut d_plus = d_minus.clone();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        d_plus.swap(i, j);
    }
    let entries: Vec<(u32, u32)> = d_minus.into_iter().zip(d_plus).collect();
    let seq = build_degree_sequence(entries).expect("balanced by construction");
    (0..)
        .map(|s| sample_environment(&seq, derive_seed2(case, s)))
        .take(10_000)
        .find(strongly_connected)
        .expect("a strongly connected sample among 10k seeds")
}

fn derive_seed2(a: u64, b: u64) -> u64 {
    derive_seed(derive_seed(0xD15C, a), b)
}

#[test]
fn walk_distribution_matches_path_enumeration_everywhere() {
    let mut worst: f64 = 0.0;
    for case in 0..100u64 {
        let env = random_environment(case, 6, 1, 3);
        for start in 0..env.n() {
            for t in 0..=4u32 {
                let fast = dist_from_vertex(&env, start as u32, t);
                let slow = walk_distribution_by_paths(&env, start, t);
                for (a, b) in fast.probs().iter().zip(&slow) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    assert!(worst <= 1e-12, "sup deviation {worst}");
}

#[test]
fn power_iteration_matches_dense_solve() {
    let mut worst: f64 = 0.0;
    for case in 0..50u64 {
        let env = strongly_connected_environment(case, 8);
        let solve = equilibrium(&env, &EquilibriumOptions::default()).unwrap();
        let direct = stationary_dense_solve(&env).unwrap();
        for (a, b) in solve.pi.probs().iter().zip(&direct) {
            worst = worst.max((a - b).abs());
        }
        // returned measure is stationary under one more kernel application
        let moved = step(&env, &solve.pi);
        let residual = tv_distance(&moved, &solve.pi).unwrap();
        assert!(residual <= 1e-11, "case {case}: residual {residual}");
    }
    assert!(worst <= 1e-9, "sup deviation {worst}");
}

#[test]
fn exact_weight_tail_matches_path_enumeration() {
    let mut worst: f64 = 0.0;
    for case in 0..100u64 {
        let env = random_environment(case, 6, 1, 3);
        for t in 1..=3u32 {
            for theta in [0.9, 0.5, 0.2, 0.05] {
                let query = WeightQuery::from_theta(t, theta).unwrap();
                for start in 0..env.n() {
                    let dp = quenched_q_exact(&env, start as u32, &query).unwrap();
                    let slow = quenched_q_by_paths(&env, start, &query);
                    worst = worst.max((dp - slow).abs());
                }
            }
        }
    }
    assert!(worst <= 1e-12, "sup deviation {worst}");
}

#[test]
fn sampled_weight_tail_agrees_with_enumeration() {
    for case in 0..20u64 {
        let env = random_environment(case, 6, 1, 3);
        let query = WeightQuery::from_theta(3, 0.3).unwrap();
        let exact = quenched_q_by_paths(&env, 0, &query);
        let mc = quenched_q(&env, 0, &query, 20_000, derive_seed(0xACC, case));
        let tol = 3.5 * mc.std_error + 1e-12;
        assert!(
            (mc.estimate - exact).abs() <= tol,
            "case {case}: mc {} vs exact {exact} (tol {tol})",
            mc.estimate
        );
    }
}
