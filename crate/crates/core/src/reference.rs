//! Independent reference implementations used to validate the production
//! code in tests: exhaustive path enumeration for walk laws and weight
//! queries, a dense linear solve for the equilibrium, node-by-node branching
//! trees, and depth-limited recursive sampling of the fixed point. These
//! favor obviousness over speed and share no algorithmic structure with the
//! optimized implementations.

use crate::degrees::DegreeSequence;
use crate::graphmodel::Environment;
use crate::paths::WeightQuery;
use crate::rng::{derive_seed, rng_from_seed};
use rand::Rng;
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum ReferenceError {
    #[error("linear system is singular (pivot {pivot:.3e}); equilibrium not unique")]
    Singular { pivot: f64 },
}

/// Distribution of the walk after `t` steps from `start`, by enumerating all
/// out-arc paths. Cost grows like (max out-degree)^t; intended for tiny
/// environments.
pub fn walk_distribution_by_paths(env: &Environment, start: usize, t: u32) -> Vec<f64> {
    fn go(env: &Environment, v: usize, left: u32, weight: f64, out: &mut [f64]) {
        if left == 0 {
            out[v] += weight;
            return;
        }
        let arcs = env.out_arcs(v as u32);
        let share = weight / arcs.len() as f64;
        for &w in arcs {
            go(env, w as usize, left - 1, share, out);
        }
    }
    let mut out = vec![0.0; env.n()];
    go(env, start, t, 1.0, &mut out);
    out
}

/// Equilibrium distribution by dense Gaussian elimination with partial
/// pivoting: solve `x (P - I) = 0` with one equation replaced by
/// `sum x = 1`. Intended for environments with at most a few dozen vertices.
pub fn stationary_dense_solve(env: &Environment) -> Result<Vec<f64>, ReferenceError> {
    let n = env.n();
    // rows of `a` are equations of the transposed system
    let mut a = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        let arcs = env.out_arcs(i as u32);
        let share = 1.0 / arcs.len() as f64;
        for &j in arcs {
            a[j as usize][i] += share;
        }
    }
    for i in 0..n {
        a[i][i] -= 1.0;
    }
    // the dropped stationarity equation is implied by the others; replace it
    // with the normalization
    for c in 0..n {
        a[n - 1][c] = 1.0;
    }
    let mut b = vec![0.0f64; n];
    b[n - 1] = 1.0;

    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("non-empty range");
        if a[piv][col].abs() < 1e-12 {
            return Err(ReferenceError::Singular { pivot: a[piv][col] });
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0f64; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col][c] * x[c];
        }
        x[col] = s / a[col][col];
    }
    Ok(x)
}

/// Probability that the `t`-step path weight exceeds the query threshold, by
/// enumerating every path with its exact probability.
pub fn quenched_q_by_paths(env: &Environment, start: usize, query: &WeightQuery) -> f64 {
    fn go(
        env: &Environment,
        v: usize,
        left: u32,
        prob: f64,
        log_w: f64,
        query: &WeightQuery,
        acc: &mut f64,
    ) {
        if left == 0 {
            if query.exceeds(log_w) {
                *acc += prob;
            }
            return;
        }
        let arcs = env.out_arcs(v as u32);
        let share = prob / arcs.len() as f64;
        let log_next = log_w - (arcs.len() as f64).ln();
        for &w in arcs {
            go(env, w as usize, left - 1, share, log_next, query, acc);
        }
    }
    let mut acc = 0.0;
    go(env, start, query.t(), 1.0, 0.0, query, &mut acc);
    acc
}

/// Generation weights from literal node-by-node trees: every node draws its
/// children's marks one at a time. Statistically equivalent to the
/// class-aggregated simulator but shares none of its code.
#[derive(Clone, Debug)]
pub struct NodeSimRun {
    /// `m[t][tree]` = generation-`t` total weight
    pub m: Vec<Vec<f64>>,
    /// `sigma[t][tree]` = (gamma-1) * sum of weight^2 / d^- over generation t
    pub sigma: Vec<Vec<f64>>,
}

pub fn martingale_by_node_simulation(
    seq: &DegreeSequence,
    t_max: u32,
    n_trees: u64,
    seed: u64,
) -> NodeSimRun {
    let entries = seq.entries();
    let n = seq.n() as f64;
    let m_arcs = seq.m() as f64;
    let gamma = {
        let s: f64 = entries
            .iter()
            .map(|&(dm, dp)| dm as f64 * dm as f64 / dp as f64)
            .sum();
        s / m_arcs
    };
    // uniform-vertex law and out-degree law over degree pairs
    let mut pairs: Vec<(u32, u32)> = entries.to_vec();
    pairs.sort_unstable();
    pairs.dedup();
    let mut root_cum = Vec::with_capacity(pairs.len());
    let mut out_cum = Vec::with_capacity(pairs.len());
    let mut acc_r = 0.0;
    let mut acc_o = 0.0;
    for &(dm, dp) in &pairs {
        let count = entries.iter().filter(|&&e| e == (dm, dp)).count() as f64;
        acc_r += count / n;
        acc_o += count * dp as f64 / m_arcs;
        root_cum.push(acc_r);
        out_cum.push(acc_o);
    }
    let draw = |cum: &[f64], rng: &mut rand_chacha::ChaCha8Rng| -> usize {
        let u: f64 = rng.random();
        cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
    };

    let per_tree: Vec<(Vec<f64>, Vec<f64>)> = (0..n_trees)
        .into_par_iter()
        .map(|tree| {
            let mut rng = rng_from_seed(derive_seed(seed, tree));
            let root = draw(&root_cum, &mut rng);
            let mut gen: Vec<(usize, f64)> =
                vec![(root, n * pairs[root].0 as f64 / m_arcs)];
            let mut m_t = Vec::with_capacity(t_max as usize + 1);
            let mut s_t = Vec::with_capacity(t_max as usize + 1);
            for t in 0..=t_max {
                m_t.push(gen.iter().map(|&(_, w)| w).sum());
                s_t.push(
                    (gamma - 1.0).max(0.0)
                        * gen
                            .iter()
                            .map(|&(p, w)| w * w / pairs[p].0 as f64)
                            .sum::<f64>(),
                );
                if t == t_max {
                    break;
                }
                let mut next = Vec::new();
                for &(p, w) in &gen {
                    let (dm_p, _) = pairs[p];
                    for _ in 0..dm_p {
                        let c = draw(&out_cum, &mut rng);
                        let (dm_c, dp_c) = pairs[c];
                        next.push((c, w * (dm_c as f64 / dp_c as f64) / dm_p as f64));
                    }
                }
                gen = next;
            }
            (m_t, s_t)
        })
        .collect();

    let mut m = vec![Vec::with_capacity(n_trees as usize); t_max as usize + 1];
    let mut sigma = vec![Vec::with_capacity(n_trees as usize); t_max as usize + 1];
    for (m_t, s_t) in &per_tree {
        for t in 0..=t_max as usize {
            m[t].push(m_t[t]);
            sigma[t].push(s_t[t]);
        }
    }
    NodeSimRun { m, sigma }
}

/// Samples of the depth-`depth` truncation of the fixed point `Z`, drawn by
/// literal recursive expansion with independent subtrees (no pool reuse).
pub fn rde_by_depth_recursion(
    seq: &DegreeSequence,
    depth: u32,
    n_samples: usize,
    seed: u64,
) -> Vec<f64> {
    let entries = seq.entries();
    let m_arcs = seq.m() as f64;
    let mut pairs: Vec<(u32, u32)> = entries.to_vec();
    pairs.sort_unstable();
    pairs.dedup();
    let mut out_cum = Vec::with_capacity(pairs.len());
    let mut acc = 0.0;
    for &(dm, dp) in &pairs {
        let count = entries.iter().filter(|&&e| e == (dm, dp)).count() as f64;
        acc += count * dp as f64 / m_arcs;
        out_cum.push(acc);
    }
    fn sample(
        pairs: &[(u32, u32)],
        out_cum: &[f64],
        depth: u32,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> f64 {
        if depth == 0 {
            return 1.0;
        }
        let u: f64 = rng.random();
        let j = out_cum.iter().position(|&c| u < c).unwrap_or(out_cum.len() - 1);
        let (dm, dp) = pairs[j];
        let mut s = 0.0;
        for _ in 0..dm {
            s += sample(pairs, out_cum, depth - 1, rng);
        }
        s / dp as f64
    }
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            sample(&pairs, &out_cum, depth, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrees::from_groups;
    use crate::graphmodel::read_graph;

    fn tiny(text: &str) -> Environment {
        read_graph(std::io::Cursor::new(text)).unwrap()
    }

    #[test]
    fn path_enumeration_on_a_two_cycle() {
        let env = tiny("2 2 7\n0: 1\n1: 0\n");
        assert_eq!(walk_distribution_by_paths(&env, 0, 0), vec![1.0, 0.0]);
        assert_eq!(walk_distribution_by_paths(&env, 0, 1), vec![0.0, 1.0]);
        assert_eq!(walk_distribution_by_paths(&env, 0, 2), vec![1.0, 0.0]);
    }

    #[test]
    fn path_enumeration_splits_mass_across_arcs() {
        let env = tiny("2 3 7\n0: 0 1\n1: 0\n");
        let d1 = walk_distribution_by_paths(&env, 0, 1);
        assert_eq!(d1, vec![0.5, 0.5]);
        let d2 = walk_distribution_by_paths(&env, 0, 2);
        assert!((d2[0] - 0.75).abs() < 1e-15 && (d2[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn dense_solve_hand_cases() {
        let cycle = tiny("2 2 7\n0: 1\n1: 0\n");
        let pi = stationary_dense_solve(&cycle).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-14 && (pi[1] - 0.5).abs() < 1e-14);

        // P = [[1/2, 1/2], [1, 0]] has stationary law (2/3, 1/3)
        let skewed = tiny("2 3 7\n0: 0 1\n1: 0\n");
        let pi = stationary_dense_solve(&skewed).unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-14, "pi = {pi:?}");
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn dense_solve_rejects_disconnected_graphs() {
        // two disjoint self-loop vertices: stationary law not unique
        let env = tiny("2 2 7\n0: 0\n1: 1\n");
        assert!(matches!(
            stationary_dense_solve(&env),
            Err(ReferenceError::Singular { .. })
        ));
    }

    #[test]
    fn exhaustive_weight_query_hand_case() {
        let env = tiny("2 3 7\n0: 0 1\n1: 0\n");
        // every 1-step path from vertex 0 has log-weight -ln 2
        let loose = WeightQuery::from_theta(1, 0.4).unwrap();
        assert_eq!(quenched_q_by_paths(&env, 0, &loose), 1.0);
        let tight = WeightQuery::from_theta(1, 0.6).unwrap();
        assert_eq!(quenched_q_by_paths(&env, 0, &tight), 0.0);
        // from vertex 1 the first step costs nothing (out-degree one)
        let q = WeightQuery::from_theta(1, 0.6).unwrap();
        assert_eq!(quenched_q_by_paths(&env, 1, &q), 1.0);
        // two steps from vertex 1 pass through vertex 0 exactly once
        let two = WeightQuery::from_theta(2, 0.4).unwrap();
        assert_eq!(quenched_q_by_paths(&env, 1, &two), 1.0);
        let two_tight = WeightQuery::from_theta(2, 0.6).unwrap();
        assert_eq!(quenched_q_by_paths(&env, 1, &two_tight), 0.0);
    }

    #[test]
    fn node_simulation_balanced_degrees_give_weight_one() {
        let seq = from_groups(&[(30, 2, 2)]).unwrap();
        let run = martingale_by_node_simulation(&seq, 4, 50, 3);
        for t in 0..=4usize {
            for &v in &run.m[t] {
                assert!((v - 1.0).abs() < 1e-12, "t={t} v={v}");
            }
            for &s in &run.sigma[t] {
                assert!(s.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn depth_recursion_balanced_degrees_give_one() {
        let seq = from_groups(&[(30, 3, 3)]).unwrap();
        let samples = rde_by_depth_recursion(&seq, 5, 100, 4);
        assert!(samples.iter().all(|&z| z == 1.0));
    }
}
