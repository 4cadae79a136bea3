//! Acceptance suite: one test per criterion, each printing its verdict line.

use crosstaxis::acceptance::*;

fn assert_criterion(result: CriterionResult) {
    println!("{result}");
    assert!(result.passed, "{result}");
}

#[test]
fn criterion_1_steady_state_oracle() {
    assert_criterion(steady_state_closed_form_matches_newton());
}

#[test]
fn criterion_2_cancellation_identities() {
    assert_criterion(cancellation_weights_annihilate_cross_terms());
}

#[test]
fn criterion_3_conservation_and_monotone_decay() {
    assert_criterion(conserved_masses_and_monotone_decay_without_kinetics());
}

#[test]
fn criterion_4_coexistence_exponential_decay() {
    assert_criterion(coexistence_decays_exponentially());
}

#[test]
fn criterion_5_degenerate_algebraic_decay() {
    assert_criterion(degenerate_regime_decays_algebraically());
}

#[test]
fn criterion_6_strict_exclusion_exponential_decay() {
    assert_criterion(strict_exclusion_decays_exponentially());
}

#[test]
fn criterion_7_inequality_campaign() {
    assert_criterion(discrete_inequality_constants());
}

#[test]
fn criterion_8_solver_orders() {
    assert_criterion(solver_convergence_orders());
}

#[test]
fn criterion_9_determinism() {
    assert_criterion(reruns_are_byte_identical());
}
