//! The release gate: one test per verification criterion, at the
//! tolerances pinned inside `dirmix_cli::verify`. The whole suite is
//! computed once per test process and shared, so each test line reports
//! exactly one criterion's verdict with its measured numbers.
//!
//! Two criteria are red at this problem size and are left red on purpose
//! rather than re-tuned to pass; their failure messages and the report
//! carry the measured numbers and the analysis:
//!   - criterion 5: the cutoff window is narrower than one time step at
//!     n=15000, so the worst start over the pooled population (which by
//!     design includes the lowest-mass vertices) sits a first-step
//!     out-degree shift away from the limit curve;
//!   - criterion 9: the annealed central threshold falls exactly on a
//!     weight-lattice atom at every finite horizon, so the strict tail is
//!     about half that atom below 1/2 while both flanks pass and the
//!     sampler matches its exact oracle.
//! The auxiliary checks are non-gating diagnostics; red is acceptable for
//! them, but only with an embedded analysis.

use std::sync::OnceLock;

use dirmix_cli::verify::{run_suite, SuiteReport};

const ACCEPTANCE_SEED: u64 = 42;

fn report() -> &'static SuiteReport {
    static REPORT: OnceLock<SuiteReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let report = run_suite(ACCEPTANCE_SEED).expect("verification suite must compute");
        // Surface the full text once for `--nocapture` runs; individual
        // assertions below carry their own lines on failure.
        eprintln!("{}", report.text);
        report
    })
}

fn criterion(index: usize, name: &str) {
    let c = &report().criteria[index];
    assert_eq!(c.name, name, "criterion {:02} changed identity", index + 1);
    assert!(c.passed, "criterion {:02} {}: {}", index + 1, c.name, c.details);
}

/// Auxiliary checks are diagnostics, not release gates: they may be red at
/// this problem size, but a red line must explain itself.
fn auxiliary(index: usize, name: &str) {
    let a = &report().aux[index];
    assert_eq!(a.name, name, "aux {} changed identity", index + 1);
    assert!(!a.details.is_empty());
    if !a.passed {
        assert!(
            a.details.contains("analysis:"),
            "aux {} {} is red without analysis: {}",
            index + 1,
            a.name,
            a.details
        );
    }
}

#[test]
fn criterion_01_walk_law_matches_path_enumeration() {
    criterion(0, "walk law vs path enumeration");
}

#[test]
fn criterion_02_equilibrium_matches_dense_solve() {
    criterion(1, "equilibrium vs dense solve");
}

#[test]
fn criterion_03_convergence_bound_holds() {
    criterion(2, "equilibrium convergence bound");
}

#[test]
fn criterion_04_cutoff_location() {
    criterion(3, "cutoff location");
}

#[test]
fn criterion_05_gaussian_window_profile() {
    criterion(4, "gaussian window profile");
}

#[test]
fn criterion_06_martingale_moments() {
    criterion(5, "branching martingale moments");
}

#[test]
fn criterion_07_fixed_point_and_weight_coupling() {
    criterion(6, "fixed point and weight coupling");
}

#[test]
fn criterion_08_collision_bound() {
    criterion(7, "matcher collision bound");
}

#[test]
fn criterion_09_annealed_tail_limit() {
    criterion(8, "annealed weight tail limit");
}

#[test]
fn criterion_10_deterministic_reruns() {
    criterion(9, "deterministic reruns");
}

#[test]
fn aux_1_proxy_equilibrium_distance() {
    auxiliary(0, "proxy equilibrium distance");
}

#[test]
fn aux_2_quenched_vs_annealed_agreement() {
    auxiliary(1, "quenched vs annealed agreement");
}

#[test]
fn report_text_carries_one_line_per_check() {
    let r = report();
    let lines: Vec<&str> = r.text.lines().collect();
    assert_eq!(lines[0], format!("verification seed={ACCEPTANCE_SEED}"));
    assert_eq!(lines.iter().filter(|l| l.starts_with("criterion ")).count(), 10);
    assert_eq!(lines.iter().filter(|l| l.starts_with("aux ")).count(), 2);
    assert!(lines.last().unwrap().starts_with("result: "));
    for line in &lines[1..lines.len() - 1] {
        assert!(
            line.contains(" PASS ") || line.contains(" FAIL "),
            "check line lacks a verdict: {line}"
        );
    }
}
