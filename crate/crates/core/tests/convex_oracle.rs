//! Agreement with an interior-point solution of the same convex problem,
//! computed independently by `fixtures/gen_convex_oracle.py`.

mod common;

use vcselect::{fit_double_penalty, kkt_residual, objective, SolverConfig};

#[test]
fn design_matches_fixture() {
    let fx = common::load_oracle();
    for case in &fx.cases {
        let d = case.design(&fx);
        for i in 0..fx.n {
            for c in 0..fx.p * (fx.n_internal + fx.order) {
                assert!((d.z()[(i, c)] - case.z[i][c]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn objective_coefficients_and_kkt_match_oracle() {
    let fx = common::load_oracle();
    assert!(fx.cases.len() >= 20);
    let cfg = SolverConfig::default();
    for (i, case) in fx.cases.iter().enumerate() {
        assert_eq!(case.status, "optimal");
        let d = case.design(&fx);
        let w = case.weights();
        let fit = fit_double_penalty(&case.y, &d, case.lambda1, case.lambda2, &w, &cfg, None).unwrap();
        let obj = objective(&case.y, &d, &fit.coef, case.lambda1, case.lambda2, &w).unwrap();
        assert!(
            obj <= case.objective * (1.0 + 1e-6),
            "case {i}: objective {obj} vs oracle {}",
            case.objective
        );
        let dist: f64 = fit
            .coef
            .values()
            .iter()
            .zip(&case.coef)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(dist <= 1e-3, "case {i}: coefficient distance {dist}");
        assert!(fit.converged, "case {i}");
        let kkt = kkt_residual(&case.y, &d, &fit.coef, case.lambda1, case.lambda2, &w).unwrap();
        assert!(kkt <= 1e-5, "case {i}: kkt {kkt}");
        assert!((kkt - fit.kkt).abs() <= 1e-12 * (1.0 + kkt));
        assert!(fit.trace_is_monotone(1e-10), "case {i}");
    }
}
