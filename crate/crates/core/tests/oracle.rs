mod common;

use common::suites;

#[test]
fn compiled_execution_matches_oracle() {
    suites::oracle_equivalence();
}

#[test]
fn every_pass_preserves_results() {
    suites::pass_soundness();
}

#[test]
fn optimize_is_idempotent() {
    suites::pass_idempotence();
}

#[test]
fn lanes_do_not_change_results() {
    suites::lane_invariance();
}

#[test]
fn index_scan_equals_full_scan() {
    suites::index_equivalence();
}
