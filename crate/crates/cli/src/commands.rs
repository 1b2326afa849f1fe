//! The five data-producing subcommands: `stats`, `gen`, `profile`,
//! `equilibrium`, and `limits`.
//!
//! Each command returns the text it wants on stdout and writes its CSV
//! files under the configured output directory. All randomness flows from
//! the single run seed through tagged stream derivation, so a command is a
//! pure function of its configuration.

use std::collections::BTreeSet;
use std::path::Path;

use dirmix::degrees::{compute_stats, write_degrees, DegreeSequence, SeqStats};
use dirmix::graphmodel::{
    sample_environment, sample_with_collision_trace, strongly_connected, tree_depth, v_star,
    write_graph, Environment,
};
use dirmix::limits::{
    equilibrium_weight_pool, offspring_mean, sample_m_star, sample_rde_with_history,
    simulate_martingale, wasserstein1, write_histogram_csv, write_pool_csv, MartingaleOptions,
    PoolLabel, PoolMeta, SamplePool,
};
use dirmix::paths::gaussian_tail;
use dirmix::rng::{derive_seed, derive_seed2, rng_from_seed};
use dirmix::walk::{
    distance_profile, equilibrium, select_starts, step, tv_convergence_bound, tv_distance,
    Distribution, EquilibriumOptions, ProfileTarget, WalkProfile,
};
use rand::Rng as _;

use crate::config::{Config, StartPolicy};
use crate::output::{num, write_atomic, CsvBuilder};
use crate::CliError;

// Stream tags: every concurrent task family gets its own label so streams
// never collide when counts change.
const TAG_ENV: u64 = 0x0e67;
const TAG_ATTEMPT: u64 = 0xa77e;
const TAG_START: u64 = 0x57a2;
const TAG_MART: u64 = 0x0a27;
const TAG_RDE: u64 = 0x2de0;
const TAG_MSTAR: u64 = 0x057a;

/// One accepted environment draw plus how many attempts were discarded.
pub struct EnvDraw {
    pub env: Environment,
    pub rejections: u64,
}

/// Draw environments until one is strongly connected, burning at most
/// `cap` attempts. The attempt index is folded into the seed stream, so
/// rejected draws never shift later randomness.
pub fn sample_connected_env(
    seq: &DegreeSequence,
    base_seed: u64,
    cap: u64,
) -> Result<EnvDraw, CliError> {
    for attempt in 0..cap {
        let env = sample_environment(seq, derive_seed2(base_seed, TAG_ATTEMPT, attempt));
        if strongly_connected(&env) {
            return Ok(EnvDraw { env, rejections: attempt });
        }
    }
    Err(CliError::ResampleCap { cap, rejections: cap })
}

fn env_base_seed(cfg: &Config, index: u64) -> u64 {
    derive_seed2(cfg.seed, TAG_ENV, index)
}

fn equilibrium_options(cfg: &Config) -> EquilibriumOptions {
    EquilibriumOptions { tol: cfg.eq_tol, max_iters: cfg.eq_max_iters }
}

/// Walk horizon: the configured value, or a cutoff-scale default covering
/// both twice the mixing location and the far edge of the window.
pub fn resolve_t_max(cfg: &Config, stats: &SeqStats) -> u32 {
    if cfg.t_max > 0 {
        return cfg.t_max;
    }
    let past_mixing = (2.0 * stats.t_star).ceil();
    let past_window = (stats.t_star + cfg.window_half_width * stats.w_star).ceil() + 1.0;
    past_mixing.max(past_window).max(1.0) as u32
}

/// Start set under the explicit `sampled` policy: `start_sample` uniform
/// picks plus the `start_worst` vertices with the least equilibrium mass.
fn sampled_starts(
    env: &Environment,
    pi: &Distribution,
    sample: usize,
    worst: usize,
    seed: u64,
) -> Vec<u32> {
    let n = env.n();
    let mut rng = rng_from_seed(seed);
    let mut idx: Vec<u32> = (0..n as u32).collect();
    let k = sample.min(n);
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut chosen: BTreeSet<u32> = idx[..k].iter().copied().collect();
    let mut by_mass: Vec<u32> = (0..n as u32).collect();
    by_mass.sort_by(|&a, &b| {
        pi.probs()[a as usize]
            .total_cmp(&pi.probs()[b as usize])
            .then(a.cmp(&b))
    });
    chosen.extend(by_mass.iter().take(worst.min(n)));
    chosen.into_iter().collect()
}

fn start_set(cfg: &Config, env: &Environment, pi: &Distribution, index: u64) -> Vec<u32> {
    let seed = derive_seed2(cfg.seed, TAG_START, index);
    match cfg.start_policy {
        StartPolicy::Auto => select_starts(
            env,
            Some(pi),
            cfg.start_sample as usize,
            cfg.start_worst as usize,
            seed,
        ),
        StartPolicy::Full => (0..env.n() as u32).collect(),
        StartPolicy::Sampled => sampled_starts(
            env,
            pi,
            cfg.start_sample as usize,
            cfg.start_worst as usize,
            seed,
        ),
    }
}

/// Scalar statistics plus the window-regime diagnostic, printed as
/// `key=value` lines.
pub fn cmd_stats(cfg: &Config) -> Result<String, CliError> {
    let seq = cfg.degree_sequence()?;
    let stats = compute_stats(&seq)?;
    let diag = stats.window_diagnostic(seq.n());
    let mut out = crate::output::header(cfg);
    out.push_str(&format!("n={}\n", seq.n()));
    out.push_str(&format!("m={}\n", seq.m()));
    out.push_str(&format!("mu={}\n", num(stats.mu)));
    out.push_str(&format!("sigma2={}\n", num(stats.sigma2)));
    out.push_str(&format!("sigma={}\n", num(stats.sigma2.sqrt())));
    out.push_str(&format!("rho={}\n", num(stats.rho)));
    out.push_str(&format!("gamma={}\n", num(stats.gamma)));
    out.push_str(&format!("t_star={}\n", num(stats.t_star)));
    out.push_str(&format!("w_star={}\n", num(stats.w_star)));
    out.push_str(&format!("window_lhs={}\n", num(diag.lhs)));
    out.push_str(&format!("window_rhs={}\n", num(diag.rhs)));
    out.push_str(&format!("window_narrow={}\n", diag.narrow));
    Ok(out)
}

/// Sample `n_env` strongly connected environments, write their arc lists
/// and the degree file, and tabulate structure statistics per draw.
pub fn cmd_gen(cfg: &Config) -> Result<String, CliError> {
    let seq = cfg.degree_sequence()?;
    let out_dir = &cfg.out_dir;

    let mut buf = Vec::new();
    write_degrees(&seq, &mut buf)?;
    let degrees_text = crate::output::header(cfg) + std::str::from_utf8(&buf).unwrap();
    write_atomic(&out_dir.join("degrees.txt"), &degrees_text)?;

    let depth = tree_depth(seq.n(), seq.delta_max()).ok();
    let mut table = CsvBuilder::new(cfg);
    table.comment(&format!("n={} m={} n_env={}", seq.n(), seq.m(), cfg.n_env));
    table.columns(&[
        "env",
        "seed",
        "rejections",
        "strongly_connected",
        "collisions",
        "tree_depth",
        "v_star_count",
        "v_star_fraction",
    ]);

    let mut total_rejections = 0u64;
    for i in 0..cfg.n_env {
        let draw = sample_connected_env(&seq, env_base_seed(cfg, i), cfg.resample_cap)?;
        total_rejections += draw.rejections;
        let env = &draw.env;

        let mut buf = Vec::new();
        write_graph(env, &mut buf)?;
        let text = crate::output::header(cfg) + std::str::from_utf8(&buf).unwrap();
        write_atomic(&out_dir.join(format!("graph_{i:02}.txt")), &text)?;

        // Re-run the matcher over the full arc set to count collisions; the
        // prefix property makes this the same draw the environment came from.
        let (_, trace) = sample_with_collision_trace(&seq, env.seed(), seq.m())?;
        let (vs_count, vs_fraction) = match v_star(env) {
            Ok(vs) => (
                vs.len().to_string(),
                num(vs.len() as f64 / env.n() as f64),
            ),
            Err(_) => ("NA".to_string(), "NA".to_string()),
        };
        table.row(&[
            i.to_string(),
            env.seed().to_string(),
            draw.rejections.to_string(),
            strongly_connected(env).to_string(),
            trace.collisions().to_string(),
            depth.map_or("NA".to_string(), |h| h.to_string()),
            vs_count,
            vs_fraction,
        ]);
    }
    write_atomic(&out_dir.join("env_summary.csv"), &table.finish())?;

    let mut out = crate::output::header(cfg);
    out.push_str(&format!("wrote {} environments (n={} m={})\n", cfg.n_env, seq.n(), seq.m()));
    out.push_str(&format!("total_rejections={total_rejections}\n"));
    Ok(out)
}

struct ProfiledEnv {
    draw: EnvDraw,
    profile: WalkProfile,
}

fn profile_environments(cfg: &Config, seq: &DegreeSequence) -> Result<Vec<ProfiledEnv>, CliError> {
    let stats = compute_stats(seq)?;
    let t_max = resolve_t_max(cfg, &stats);
    let opts = equilibrium_options(cfg);
    let mut runs = Vec::with_capacity(cfg.n_env as usize);
    for i in 0..cfg.n_env {
        let draw = sample_connected_env(seq, env_base_seed(cfg, i), cfg.resample_cap)?;
        let solve = equilibrium(&draw.env, &opts)?;
        let starts = start_set(cfg, &draw.env, &solve.pi, i);
        let profile = distance_profile(&draw.env, &starts, t_max, &ProfileTarget::Exact(opts))?;
        runs.push(ProfiledEnv { draw, profile });
    }
    Ok(runs)
}

fn write_profile_csv(
    cfg: &Config,
    path: &Path,
    profile: &WalkProfile,
    extra: &str,
) -> Result<(), CliError> {
    let mut b = CsvBuilder::new(cfg);
    b.comment(extra);
    b.columns(&["t", "lambda", "tv_min", "tv_mean", "tv_max"]);
    for (k, &t) in profile.times.iter().enumerate() {
        b.row(&[
            t.to_string(),
            num(profile.lambda[k]),
            num(profile.tv_min[k]),
            num(profile.tv_mean[k]),
            num(profile.tv_max[k]),
        ]);
    }
    write_atomic(path, &b.finish())?;
    Ok(())
}

/// Cutoff-window table over the pooled profile: worst-case distance next
/// to the Gaussian tail value at the same window coordinate.
struct WindowTable {
    rows: Vec<(u32, f64, f64, f64, f64)>,
    sup_gap: f64,
}

fn window_table(profile: &WalkProfile, half_width: f64) -> WindowTable {
    let mut rows = Vec::new();
    let mut sup_gap = 0.0f64;
    for (k, &t) in profile.times.iter().enumerate() {
        let lambda = profile.lambda[k];
        if lambda.abs() > half_width {
            continue;
        }
        let gauss = gaussian_tail(lambda);
        let gap = (profile.tv_max[k] - gauss).abs();
        sup_gap = sup_gap.max(gap);
        rows.push((t, lambda, profile.tv_max[k], gauss, gap));
    }
    WindowTable { rows, sup_gap }
}

/// Distance-to-equilibrium profiles per environment, their pool, and the
/// cutoff-window comparison table.
pub fn cmd_profile(cfg: &Config) -> Result<String, CliError> {
    let seq = cfg.degree_sequence()?;
    let stats = compute_stats(&seq)?;
    let runs = profile_environments(cfg, &seq)?;
    for (i, run) in runs.iter().enumerate() {
        write_profile_csv(
            cfg,
            &cfg.out_dir.join(format!("profile_{i:02}.csv")),
            &run.profile,
            &format!(
                "env={} env_seed={} rejections={} starts={}",
                i,
                run.draw.env.seed(),
                run.draw.rejections,
                run.profile.start_set.len()
            ),
        )?;
    }
    let profiles: Vec<WalkProfile> = runs.iter().map(|r| r.profile.clone()).collect();
    let pooled = WalkProfile::pool(&profiles)
        .ok_or_else(|| CliError::Internal("environment profiles disagree on times".into()))?;
    write_profile_csv(
        cfg,
        &cfg.out_dir.join("profile_pooled.csv"),
        &pooled,
        &format!("pooled_envs={}", runs.len()),
    )?;

    let table = window_table(&pooled, cfg.window_half_width);
    let mut b = CsvBuilder::new(cfg);
    b.comment(&format!(
        "half_width={} t_star={} w_star={} sup_gap={}",
        num(cfg.window_half_width),
        num(stats.t_star),
        num(stats.w_star),
        num(table.sup_gap)
    ));
    b.columns(&["t", "lambda", "tv_max", "gaussian", "gap"]);
    for &(t, lambda, tv, gauss, gap) in &table.rows {
        b.row(&[t.to_string(), num(lambda), num(tv), num(gauss), num(gap)]);
    }
    write_atomic(&cfg.out_dir.join("window.csv"), &b.finish())?;

    let drop_time = pooled
        .times
        .iter()
        .zip(&pooled.tv_mean)
        .find(|(_, &tv)| tv < 0.5)
        .map(|(&t, _)| t);
    let mut out = crate::output::header(cfg);
    out.push_str(&format!(
        "profiled {} environments, t_max={} (t_star={} w_star={})\n",
        runs.len(),
        resolve_t_max(cfg, &stats),
        num(stats.t_star),
        num(stats.w_star)
    ));
    out.push_str(&match drop_time {
        Some(t) => format!("mean distance first drops below 1/2 at t={t}\n"),
        None => "mean distance never drops below 1/2 in the horizon\n".to_string(),
    });
    out.push_str(&format!("window sup gap = {}\n", num(table.sup_gap)));
    Ok(out)
}

/// Equilibrium weight pools per environment, a pooled histogram, and the
/// annealed convergence-bound table against measured distances.
pub fn cmd_equilibrium(cfg: &Config) -> Result<String, CliError> {
    let seq = cfg.degree_sequence()?;
    let stats = compute_stats(&seq)?;
    let opts = equilibrium_options(cfg);
    let t_bound = resolve_t_max(cfg, &stats).max(30);

    let mut combined = Vec::new();
    let mut tv_rows: Vec<Vec<f64>> = Vec::new();
    let mut residual_sum = 0.0f64;
    for i in 0..cfg.n_env {
        let draw = sample_connected_env(&seq, env_base_seed(cfg, i), cfg.resample_cap)?;
        let solve = equilibrium(&draw.env, &opts)?;
        residual_sum += solve.residual;
        let pool = equilibrium_weight_pool(&draw.env, &solve.pi)?;
        combined.extend_from_slice(pool.values());

        let mut buf = Vec::new();
        write_pool_csv(&pool, &mut buf)?;
        let text = crate::output::header(cfg) + std::str::from_utf8(&buf).unwrap();
        write_atomic(&cfg.out_dir.join(format!("weights_{i:02}.csv")), &text)?;

        // Distance of the in-degree start evolved t steps, against the
        // solved equilibrium of the same environment.
        let mut dist = Distribution::in_degree(&draw.env);
        let mut tvs = Vec::with_capacity(t_bound as usize + 1);
        for _ in 0..=t_bound {
            tvs.push(tv_distance(&dist, &solve.pi)?);
            dist = step(&draw.env, &dist);
        }
        tv_rows.push(tvs);
    }

    let combined_pool = SamplePool::new(
        combined,
        PoolLabel::NPiStar,
        PoolMeta { seed: cfg.seed, iterations: cfg.n_env },
    )?;
    let mut buf = Vec::new();
    write_histogram_csv(&combined_pool, cfg.hist_bin_width, &mut buf)?;
    let text = crate::output::header(cfg) + std::str::from_utf8(&buf).unwrap();
    write_atomic(&cfg.out_dir.join("weights_hist.csv"), &text)?;

    let mut b = CsvBuilder::new(cfg);
    b.comment(&format!("envs={} n={} m={}", cfg.n_env, seq.n(), seq.m()));
    b.columns(&["t", "bound", "tv_mean", "tv_max"]);
    for t in 0..=t_bound {
        let bound = tv_convergence_bound(&stats, seq.n(), seq.m(), t)?;
        let col: Vec<f64> = tv_rows.iter().map(|row| row[t as usize]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let max = col.iter().cloned().fold(0.0f64, f64::max);
        b.row(&[t.to_string(), num(bound), num(mean), num(max)]);
    }
    write_atomic(&cfg.out_dir.join("bound_table.csv"), &b.finish())?;

    let mut out = crate::output::header(cfg);
    out.push_str(&format!(
        "equilibrium solved on {} environments, mean residual {}\n",
        cfg.n_env,
        num(residual_sum / cfg.n_env as f64)
    ));
    out.push_str(&format!(
        "pooled weight histogram over {} values written\n",
        combined_pool.len()
    ));
    Ok(out)
}

/// Branching-tree martingale tables, the distributional fixed-point pool,
/// the limit weight pool, and the finite-graph coupling distances.
pub fn cmd_limits(cfg: &Config) -> Result<String, CliError> {
    let seq = cfg.degree_sequence()?;
    let nu = offspring_mean(&seq);

    // The tree simulation runs first: its feasibility guard must refuse the
    // whole command before any file is written.
    let mart_opts = MartingaleOptions {
        t_max: cfg.mart_t_max,
        n_trees: cfg.mart_trees,
        node_budget: cfg.node_budget,
    };
    let mart = simulate_martingale(&seq, &mart_opts, derive_seed(cfg.seed, TAG_MART))?;

    let n = seq.n() as f64;
    let m = seq.m() as f64;
    let stats = compute_stats(&seq)?;
    let (rho, gamma) = (stats.rho, stats.gamma);
    let sigma_scale = n * (gamma - 1.0) / m;

    let mut b = CsvBuilder::new(cfg);
    b.comment(&format!(
        "trees={} t_max={} offspring_mean={}",
        cfg.mart_trees,
        cfg.mart_t_max,
        num(nu)
    ));
    b.columns(&[
        "t",
        "m_mean",
        "m_se",
        "increment_mean",
        "increment_se",
        "tail_sq_mean",
        "tail_sq_se",
        "tail_sq_pred",
        "sigma_mean",
        "sigma_se",
        "sigma_pred",
    ]);
    for t in 0..=mart.t_max() {
        let pool = &mart.pools[t as usize];
        let (inc_mean, inc_se) = if t < mart.t_max() {
            mart.increment_stats(t)
        } else {
            (f64::NAN, f64::NAN)
        };
        let (tail_mean, tail_se) = mart.tail_square_stats(t);
        let tail_pred = sigma_scale * rho.powi(t as i32) / (1.0 - rho)
            * (1.0 - rho.powi((mart.t_max() - t) as i32));
        let (sig_mean, sig_se) = mart.sigma_stats(t);
        let sig_pred = sigma_scale * rho.powi(t as i32);
        let fmt_opt = |x: f64| if x.is_nan() { "NA".to_string() } else { num(x) };
        b.row(&[
            t.to_string(),
            num(pool.mean()),
            num(pool.std_error_of_mean()),
            fmt_opt(inc_mean),
            fmt_opt(inc_se),
            num(tail_mean),
            num(tail_se),
            num(tail_pred),
            num(sig_mean),
            num(sig_se),
            num(sig_pred),
        ]);
    }
    write_atomic(&cfg.out_dir.join("martingale.csv"), &b.finish())?;

    let rde = sample_rde_with_history(
        &seq,
        cfg.pool_size as usize,
        cfg.rde_iterations,
        derive_seed(cfg.seed, TAG_RDE),
    )?;
    let mut buf = Vec::new();
    write_pool_csv(&rde.pool, &mut buf)?;
    let text = crate::output::header(cfg) + std::str::from_utf8(&buf).unwrap();
    write_atomic(&cfg.out_dir.join("z_pool.csv"), &text)?;

    let mut b = CsvBuilder::new(cfg);
    b.comment(&format!("pool_size={} iterations={}", cfg.pool_size, cfg.rde_iterations));
    b.columns(&["iteration", "mean", "sd", "accumulated_se", "w1_step"]);
    for k in 0..rde.mean_history.len() {
        b.row(&[
            (k + 1).to_string(),
            num(rde.mean_history[k]),
            num(rde.sd_history[k]),
            num(rde.accumulated_se[k]),
            num(rde.w1_history[k]),
        ]);
    }
    write_atomic(&cfg.out_dir.join("rde_history.csv"), &b.finish())?;

    let m_star = sample_m_star(
        &seq,
        &rde.pool,
        cfg.pool_size,
        derive_seed(cfg.seed, TAG_MSTAR),
    )?;
    let mut buf = Vec::new();
    write_pool_csv(&m_star, &mut buf)?;
    let text = crate::output::header(cfg) + std::str::from_utf8(&buf).unwrap();
    write_atomic(&cfg.out_dir.join("m_star_pool.csv"), &text)?;
    let mut buf = Vec::new();
    write_histogram_csv(&m_star, cfg.hist_bin_width, &mut buf)?;
    let text = crate::output::header(cfg) + std::str::from_utf8(&buf).unwrap();
    write_atomic(&cfg.out_dir.join("m_star_hist.csv"), &text)?;

    let opts = equilibrium_options(cfg);
    let mut b = CsvBuilder::new(cfg);
    b.comment("w1 between the environment weight pool {n pi(i)} and the limit pool, per environment");
    b.columns(&["env", "rejections", "w1"]);
    let mut w1_sum = 0.0f64;
    for i in 0..cfg.n_env {
        let draw = sample_connected_env(&seq, env_base_seed(cfg, i), cfg.resample_cap)?;
        let solve = equilibrium(&draw.env, &opts)?;
        let pool = equilibrium_weight_pool(&draw.env, &solve.pi)?;
        let w1 = wasserstein1(&pool, &m_star);
        w1_sum += w1;
        b.row(&[i.to_string(), draw.rejections.to_string(), num(w1)]);
    }
    write_atomic(&cfg.out_dir.join("w1_table.csv"), &b.finish())?;

    let last = rde.mean_history.len() - 1;
    let mut out = crate::output::header(cfg);
    out.push_str(&format!("offspring_mean={}\n", num(nu)));
    out.push_str(&format!(
        "fixed-point pool mean after {} iterations: {} (accumulated se {})\n",
        cfg.rde_iterations,
        num(rde.mean_history[last]),
        num(rde.accumulated_se[last])
    ));
    out.push_str(&format!(
        "mean coupling distance over {} environments: {}\n",
        cfg.n_env,
        num(w1_sum / cfg.n_env as f64)
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Overrides, RawConfig};
    use dirmix::paths::window_profile_check;

    fn small_config(dir: &Path, extra: &str) -> Config {
        let text = format!(
            "groups = [[60, 2, 3], [60, 4, 3], [60, 4, 4]]\nseed = 11\nn_env = 3\n{extra}"
        );
        toml::from_str::<RawConfig>(&text)
            .unwrap()
            .resolve(&Overrides { seed: None, out_dir: Some(dir.to_path_buf()) })
            .unwrap()
    }

    #[test]
    fn stats_output_lists_every_scalar() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path(), "");
        let out = cmd_stats(&cfg).unwrap();
        for key in
            ["n=", "m=", "mu=", "sigma2=", "rho=", "gamma=", "t_star=", "w_star=", "window_"]
        {
            assert!(out.contains(key), "missing {key} in {out}");
        }
    }

    #[test]
    fn gen_writes_graphs_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path(), "");
        cmd_gen(&cfg).unwrap();
        for name in ["degrees.txt", "graph_00.txt", "graph_02.txt", "env_summary.csv"] {
            assert!(dir.path().join(name).exists(), "missing {name}");
        }
        let summary = std::fs::read_to_string(dir.path().join("env_summary.csv")).unwrap();
        assert!(summary.starts_with("# config="));
        // Three data rows, all strongly connected after resampling.
        assert_eq!(summary.lines().filter(|l| l.contains(",true,")).count(), 3);
    }

    #[test]
    fn profile_outputs_are_reproducible_bytes() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg_a = small_config(dir_a.path(), "t_max = 6\n");
        let cfg_b = small_config(dir_b.path(), "t_max = 6\n");
        cmd_profile(&cfg_a).unwrap();
        cmd_profile(&cfg_b).unwrap();
        for name in ["profile_00.csv", "profile_pooled.csv", "window.csv"] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn window_table_matches_core_check_at_default_width() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path(), "t_max = 8\n");
        let seq = cfg.degree_sequence().unwrap();
        let stats = compute_stats(&seq).unwrap();
        let runs = profile_environments(&cfg, &seq).unwrap();
        let profiles: Vec<WalkProfile> = runs.iter().map(|r| r.profile.clone()).collect();
        let pooled = WalkProfile::pool(&profiles).unwrap();
        let table = window_table(&pooled, 4.0);
        let report = window_profile_check(&pooled, &stats).unwrap();
        assert_eq!(table.rows.len(), report.times.len());
        assert_eq!(table.sup_gap, report.sup_gap);
        for (row, (&t, (&gap, &gauss))) in table
            .rows
            .iter()
            .zip(report.times.iter().zip(report.gaps.iter().zip(&report.gaussian_values)))
        {
            assert_eq!(row.0, t);
            assert_eq!(row.4, gap);
            assert_eq!(row.3, gauss);
        }
    }

    #[test]
    fn equilibrium_bound_table_has_full_horizon() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path(), "");
        cmd_equilibrium(&cfg).unwrap();
        let table = std::fs::read_to_string(dir.path().join("bound_table.csv")).unwrap();
        let data_rows = table.lines().filter(|l| !l.starts_with('#')).count();
        // t = 0..=30 plus the column header.
        assert_eq!(data_rows, 32);
        assert!(dir.path().join("weights_hist.csv").exists());
        assert!(dir.path().join("weights_00.csv").exists());
    }

    #[test]
    fn limits_respects_the_node_budget_guard() {
        let dir = tempfile::tempdir().unwrap();
        // Default mart_t_max=12 with 1e5 trees far exceeds the default 1e8
        // node budget for this mixture (offspring mean 3.4).
        let cfg = small_config(dir.path(), "");
        let err = cmd_limits(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(!dir.path().join("martingale.csv").exists());
    }

    #[test]
    fn limits_writes_all_tables_when_feasible() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(
            dir.path(),
            "mart_t_max = 3\nmart_trees = 2000\npool_size = 2000\nrde_iterations = 5\nmc_samples = 1000\n",
        );
        let out = cmd_limits(&cfg).unwrap();
        assert!(out.contains("offspring_mean="));
        for name in [
            "martingale.csv",
            "z_pool.csv",
            "rde_history.csv",
            "m_star_pool.csv",
            "m_star_hist.csv",
            "w1_table.csv",
        ] {
            assert!(dir.path().join(name).exists(), "missing {name}");
        }
        let mart = std::fs::read_to_string(dir.path().join("martingale.csv")).unwrap();
        // Final row carries NA increments (no next generation).
        assert!(mart.lines().last().unwrap().contains("NA"));
    }

    #[test]
    fn start_policies_shape_the_start_set() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path(), "start_sample = 7\nstart_worst = 4\n");
        let seq = cfg.degree_sequence().unwrap();
        let draw = sample_connected_env(&seq, env_base_seed(&cfg, 0), cfg.resample_cap).unwrap();
        let solve = equilibrium(&draw.env, &equilibrium_options(&cfg)).unwrap();

        // Auto on a small graph: every vertex.
        let auto = start_set(&cfg, &draw.env, &solve.pi, 0);
        assert_eq!(auto.len(), draw.env.n());

        let mut cfg_full = cfg.clone();
        cfg_full.start_policy = StartPolicy::Full;
        assert_eq!(start_set(&cfg_full, &draw.env, &solve.pi, 0).len(), draw.env.n());

        let mut cfg_sampled = cfg.clone();
        cfg_sampled.start_policy = StartPolicy::Sampled;
        let sampled = start_set(&cfg_sampled, &draw.env, &solve.pi, 0);
        assert!(sampled.len() <= 11 && sampled.len() >= 7, "got {}", sampled.len());
        // Sorted unique vertices.
        assert!(sampled.windows(2).all(|w| w[0] < w[1]));
        // The lowest-mass vertex is always included.
        let worst = (0..draw.env.n())
            .min_by(|&a, &b| solve.pi.probs()[a].total_cmp(&solve.pi.probs()[b]))
            .unwrap() as u32;
        assert!(sampled.contains(&worst));
    }

    #[test]
    fn resample_cap_failure_is_exit_three() {
        // A 1-in 1-out sequence on 8 vertices is a random functional
        // digraph of permutations: a single 8-cycle has probability 1/8
        // per draw, so most seeds reject at cap 1.
        let seq = dirmix::degrees::from_groups(&[(8, 1, 1)]).unwrap();
        let mut saw_cap = false;
        for base in 0..20u64 {
            match sample_connected_env(&seq, base, 1) {
                Ok(_) => {}
                Err(e) => {
                    assert_eq!(e.exit_code(), 3);
                    saw_cap = true;
                }
            }
        }
        assert!(saw_cap, "no draw hit the resample cap");
    }
}
