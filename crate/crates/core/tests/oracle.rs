//! Two-bus relaxation against a one-dimensional brute-force oracle.

mod common;

use bfm_relax::bfm::ObjectiveSpec;
use bfm_relax::experiments::{flip_experiment, ExperimentOptions};
use bfm_relax::recovery::{ac_residuals, build_admittance, recover_angles, AcPoint};
use bfm_relax::solver::{SolveStatus, SolverSettings};
use common::oracle::*;

#[test]
fn reference_case_is_not_flat() {
    let (r, x, pd, qd) = CASES[0];
    assert_eq!(tolerance(r, &oracle(r, x, pd, qd)), 1e-7);
}

#[test]
fn cr_optimum_matches_oracle() {
    for &(r, x, pd, qd) in &CASES {
        let net = two_bus(r, x, pd, qd);
        let sol = solve_cr(&net);
        let o = oracle(r, x, pd, qd);
        compare(&sol, &o, r, pd);
        // The oracle's point is on the cone.
        assert!((o.l * V1 - o.f * o.f - o.h * o.h).abs() < 1e-10);
    }
}

#[test]
fn recovered_angles_satisfy_ac_equations() {
    for &(r, x, pd, qd) in &CASES {
        let net = two_bus(r, x, pd, qd);
        let sol = solve_cr(&net);
        let rec = recover_angles(&net, &sol, 1e-6, false).unwrap();
        assert!(rec.recoverable);
        let y = build_admittance(&net).unwrap();
        let res = ac_residuals(&net, &y, &AcPoint::from_recovery(&rec, &sol)).unwrap();
        assert!(res.max() <= 1e-6, "{r} {x}: {}", res.max());
    }
}

#[test]
fn flipped_branch_matches_oracle_with_negated_reactance() {
    for &(r, x, pd, qd) in &CASES {
        let net = two_bus(r, x, pd, qd);
        let cmp = flip_experiment(
            &net,
            0,
            &ObjectiveSpec::default(),
            &SolverSettings::default(),
            &ExperimentOptions::default(),
        )
        .unwrap();
        assert!(cmp.before.conditions.all_pass());
        assert_eq!(cmp.before.gaps.as_ref().unwrap().num_nonbinding, 0);
        assert_eq!(cmp.after.conditions.failed(), vec!["v"]);
        assert_eq!(cmp.after.status, SolveStatus::Optimal);

        let flipped = net.negate_reactance(0).unwrap();
        let sol = solve_cr(&flipped);
        let o = oracle(r, -x, pd, qd);
        compare(&sol, &o, r, pd);
        let gap = cmp.after.gaps.unwrap().branches[0].gap;
        assert!((gap - (o.l * V1 - o.f * o.f - o.h * o.h)).abs() < 1e-7, "{gap}");
    }
}
