//! Dense, Davidson, Lanczos and shift-invert paths against each other.

mod common;

use common::{rel, resonant};
use gtb_core::hamiltonians::Limits;
use gtb_core::spectrum::{converge_gap, lowest_gap_for, ConvergenceConfig, SolverConfig};
use gtb_core::spectrum::{davidson, lanczos, IterativeOptions};
use gtb_core::{eigensolve_symmetric, Gauge, TensorHamiltonian};

fn dense_lowest(op: &TensorHamiltonian) -> Vec<f64> {
    eigensolve_symmetric(&op.to_dense()).unwrap()[..3].to_vec()
}

#[test]
fn iterative_solvers_agree_with_dense() {
    for gauge in [Gauge::Coulomb, Gauge::CField] {
        for g in [0.1, 0.5, 1.0] {
            let op = TensorHamiltonian::realified(&resonant(g, 12, 40, gauge), &Limits::default())
                .unwrap();
            let exact = dense_lowest(&op);
            let opts = IterativeOptions::default();
            let d = davidson(&op, 3, &opts).unwrap();
            let l = lanczos(&op, 3, &opts).unwrap();
            let gap = exact[1] - exact[0];
            for (name, values) in [("davidson", &d.values), ("lanczos", &l.values)] {
                let got = values[1] - values[0];
                assert!(
                    rel(got, gap) < 1e-8,
                    "{gauge} g={g} {name}: gap {got} vs {gap}"
                );
            }
        }
    }
}

#[test]
fn shift_invert_escalation_matches_dense() {
    for gauge in [Gauge::Coulomb, Gauge::CField] {
        let op = TensorHamiltonian::realified(&resonant(2.0, 10, 48, gauge), &Limits::default())
            .unwrap();
        let exact = dense_lowest(&op);
        let opts = IterativeOptions {
            escalate_after: 1,
            ..IterativeOptions::default()
        };
        let out = davidson(&op, 3, &opts).unwrap();
        let scale = exact[2].abs().max(exact[0].abs());
        for (a, b) in out.values.iter().zip(&exact) {
            assert!((a - b).abs() <= 1e-9 * scale, "{gauge}: {a} vs {b}");
        }
    }
}

#[test]
fn escalation_beats_diagonal_preconditioning_at_strong_coupling() {
    let op =
        TensorHamiltonian::realified(&resonant(1.5, 32, 96, Gauge::CField), &Limits::default())
            .unwrap();
    let jacobi = IterativeOptions {
        escalate_after: 0,
        ..IterativeOptions::default()
    };
    let plain = davidson(&op, 3, &jacobi).unwrap();
    let boosted = davidson(&op, 3, &IterativeOptions::default()).unwrap();
    assert!(
        rel(
            plain.values[1] - plain.values[0],
            boosted.values[1] - boosted.values[0]
        ) < 1e-8
    );
    assert!(
        boosted.iterations <= plain.iterations,
        "escalated {} vs plain {}",
        boosted.iterations,
        plain.iterations
    );
}

#[test]
fn dense_and_matrix_free_dispatch_agree() {
    let params = resonant(0.7, 16, 24, Gauge::Coulomb);
    let dense = lowest_gap_for(
        &params,
        &SolverConfig {
            dense_threshold: 10_000,
            ..SolverConfig::default()
        },
    )
    .unwrap();
    let sparse = lowest_gap_for(
        &params,
        &SolverConfig {
            dense_threshold: 0,
            ..SolverConfig::default()
        },
    )
    .unwrap();
    assert_ne!(dense.method, sparse.method);
    assert!(rel(sparse.gap, dense.gap) < 1e-8);
}

#[test]
fn gauges_converge_to_the_same_gap() {
    let config = ConvergenceConfig::default();
    let c = converge_gap(&resonant(0.3, 2, 2, Gauge::Coulomb), 1e-7, &config).unwrap();
    let m = converge_gap(&resonant(0.3, 2, 2, Gauge::CField), 1e-7, &config).unwrap();
    assert!(m.converged);
    assert!(
        rel(c.gap, m.gap) < 1e-6,
        "coulomb {} vs cfield {}",
        c.gap,
        m.gap
    );
}
