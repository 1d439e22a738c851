mod common;

use bfm_relax::bfm::check_feasibility;
use bfm_relax::recovery::{ac_residuals, branch_angle, build_admittance, recover_angles, wrap, AcPoint};
use common::{ac_case, CaseOptions, Draw};
use proptest::prelude::*;

fn pool() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 64..256)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Recovered angles reproduce the drawn ones and satisfy the AC equations.
    #[test]
    fn radial_round_trip(u in pool(), buses in 2usize..12, taps: bool, shunts: bool) {
        let mut d = Draw::new(&u);
        let case = ac_case(&mut d, CaseOptions { buses, taps, shunts, negative_x: 0.2, ..Default::default() });
        let feas = check_feasibility(&case.net, &case.sol, 1e-9).unwrap();
        prop_assert!(feas.ar_feasible, "{:?}", feas);
        let rec = recover_angles(&case.net, &case.sol, 1e-6, false).unwrap();
        prop_assert!(rec.recoverable && rec.mismatch.is_empty());
        prop_assert_eq!(rec.theta[0], 0.0);
        for (a, b) in rec.theta.iter().zip(&case.theta) {
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
        let y = build_admittance(&case.net).unwrap();
        let res = ac_residuals(&case.net, &y, &AcPoint::from_recovery(&rec, &case.sol)).unwrap();
        prop_assert!(res.max() <= 1e-9, "{}", res.max());
    }

    #[test]
    fn consistent_mesh_closes_every_cycle(u in pool(), buses in 3usize..10, extra in 1usize..4, taps: bool) {
        let mut d = Draw::new(&u);
        let case = ac_case(&mut d, CaseOptions { buses, extra_branches: extra, taps, ..Default::default() });
        let rec = recover_angles(&case.net, &case.sol, 1e-6, false).unwrap();
        prop_assert_eq!(rec.mismatch.len(), extra);
        prop_assert!(rec.recoverable, "{}", rec.max_mismatch);
        let y = build_admittance(&case.net).unwrap();
        let res = ac_residuals(&case.net, &y, &AcPoint::from_recovery(&rec, &case.sol)).unwrap();
        prop_assert!(res.max() <= 1e-9);
    }

    #[test]
    fn broken_cycle_is_not_recoverable(u in pool(), buses in 3usize..8) {
        let mut d = Draw::new(&u);
        let case = ac_case(&mut d, CaseOptions { buses, extra_branches: 1, break_cycle: true, ..Default::default() });
        let feas = check_feasibility(&case.net, &case.sol, 1e-9).unwrap();
        prop_assert!(feas.ar_feasible);
        let rec = recover_angles(&case.net, &case.sol, 1e-6, false).unwrap();
        prop_assert!(!rec.recoverable);
        prop_assert!(rec.max_mismatch >= 0.04);
    }

    /// Reversing a branch and using the receiving-end flows negates beta.
    #[test]
    fn beta_antisymmetric_under_reversal(u in pool(), buses in 2usize..8) {
        let mut d = Draw::new(&u);
        let case = ac_case(&mut d, CaseOptions { buses, ..Default::default() });
        let ends = case.net.endpoints().unwrap();
        for k in 0..case.net.branches.len() {
            let br = &case.net.branches[k];
            let fwd = branch_angle(&case.net, &case.sol, ends[k].from, k);
            let mut net = case.net.clone();
            let mut sol = case.sol.clone();
            net.branches[k].from_bus = br.to_bus;
            net.branches[k].to_bus = br.from_bus;
            sol.f[k] = -(case.sol.f[k] - br.r * case.sol.l[k]);
            sol.h[k] = -(case.sol.h[k] - br.x * case.sol.l[k]);
            let back = branch_angle(&net, &sol, ends[k].to, k);
            prop_assert!((fwd + back).abs() < 1e-9, "{} {}", fwd, back);
        }
    }

    #[test]
    fn wrap_is_idempotent(a in -100.0..100.0f64) {
        let w = wrap(a);
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        prop_assert_eq!(wrap(w), w);
    }
}

#[test]
fn admittance_of_series_network_is_symmetric_with_zero_row_sums() {
    let u: Vec<f64> = (0..97).map(|k| (k as f64 * 0.618).fract()).collect();
    let case = ac_case(
        &mut Draw::new(&u),
        CaseOptions {
            buses: 9,
            extra_branches: 3,
            ..Default::default()
        },
    );
    let y = build_admittance(&case.net).unwrap();
    for i in 0..y.n {
        let mut sum = num_complex::Complex64::new(0.0, 0.0);
        for j in 0..y.n {
            assert_eq!(y.get(i, j), y.get(j, i));
            sum += y.get(i, j);
        }
        assert!(sum.norm() < 1e-9);
    }
}
