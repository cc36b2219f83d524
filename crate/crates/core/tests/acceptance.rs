//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. The Monte Carlo parts take several minutes.

mod common;

use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcselect::simulation::{FitDiagnostics, MethodSummary};
use vcselect::spline::eval_coef_function;
use vcselect::{
    build_design, centered_norm, cn_value, compute_bic, eval_basis, fit_double_penalty, make_knots, objective,
    run_monte_carlo, CoefState, CriterionMode, FitResult, Method, PenaltyWeights, SimConfig, SimReport,
    SolverConfig,
};

const KKT_TOL: f64 = 1e-5;

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, id: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("[{}] criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn summary(report: &SimReport, m: Method) -> &MethodSummary {
    report.summary(m).expect("method missing from report")
}

fn error_of(s: &MethodSummary, j: usize) -> f64 {
    s.errors.iter().find(|(i, _)| *i == j).map(|(_, e)| *e).unwrap()
}

fn in_band(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn table_criteria(gate: &mut Gate, report: &SimReport) {
    let a = summary(report, Method::AglassoBicEbic);
    gate.report(
        "1",
        a.correct_zeros >= 39.0 && a.incorrect_zeros <= 0.3 && a.correct_constants >= 4.5 && a.incorrect_constants <= 1.6,
        format!(
            "aglasso-BIC-EBIC p=50 n=100 reps={}: correct zeros {:.2} (>= 39.0), incorrect zeros {:.2} (<= 0.3), \
             correct constants {:.2} (>= 4.5), incorrect constants {:.2} (<= 1.6)",
            report.reps_completed, a.correct_zeros, a.incorrect_zeros, a.correct_constants, a.incorrect_constants
        ),
    );

    let ge = summary(report, Method::GlassoEbic);
    let gb = summary(report, Method::GlassoBic);
    gate.report(
        "2",
        in_band(ge.incorrect_zeros, 2.0, 8.0) && gb.incorrect_zeros <= 0.5,
        format!(
            "incorrect zeros glasso-EBIC {:.2} (in [2, 8]), glasso-BIC {:.2} (<= 0.5)",
            ge.incorrect_zeros, gb.incorrect_zeros
        ),
    );

    let o = summary(report, Method::Oracle);
    let (o1, o4, o10) = (error_of(o, 1), error_of(o, 4), error_of(o, 10));
    gate.report(
        "3",
        in_band(o1, 0.02, 0.08) && in_band(o4, 0.007, 0.03) && o10 == 0.0,
        format!("oracle L2 errors beta1 {o1:.4} (in [0.02, 0.08]), beta4 {o4:.4} (in [0.007, 0.03]), beta10 {o10:.4} (= 0)"),
    );

    let (a1, a4) = (error_of(a, 1), error_of(a, 4));
    gate.report(
        "4",
        in_band(a1, 0.0445 / 2.0, 0.0445 * 2.0) && in_band(a4, 0.0197 / 2.0, 0.0197 * 2.0),
        format!(
            "aglasso-BIC-EBIC L2 errors beta1 {a1:.4} (in [{:.4}, {:.4}]), beta4 {a4:.4} (in [{:.4}, {:.4}])",
            0.0445 / 2.0,
            0.0445 * 2.0,
            0.0197 / 2.0,
            0.0197 * 2.0
        ),
    );
}

/// Returns the diagnostics of the oracle-comparison fits.
fn convex_oracle(gate: &mut Gate) -> FitDiagnostics {
    let start = Instant::now();
    let fx = common::load_oracle();
    let cfg = SolverConfig::default();
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut worst_dist: f64 = 0.0;
    let mut ok = fx.cases.len() >= 20;
    let mut diag = FitDiagnostics::default();
    for case in &fx.cases {
        let d = case.design(&fx);
        let w = case.weights();
        let fit = fit_double_penalty(&case.y, &d, case.lambda1, case.lambda2, &w, &cfg, None).unwrap();
        let obj = objective(&case.y, &d, &fit.coef, case.lambda1, case.lambda2, &w).unwrap();
        let dist = fit
            .coef
            .values()
            .iter()
            .zip(&case.coef)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst_ratio = worst_ratio.max(obj / case.objective - 1.0);
        worst_dist = worst_dist.max(dist);
        ok &= case.status == "optimal" && obj <= case.objective * (1.0 + 1e-6) && dist <= 1e-3;
        diag.fits += 1;
        if fit.converged {
            diag.max_kkt = diag.max_kkt.max(fit.kkt);
        } else {
            diag.nonconverged += 1;
        }
        if !fit.trace_is_monotone(1e-10) {
            diag.trace_violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    gate.report(
        "5",
        ok && secs < 60.0,
        format!(
            "{} instances n={} p={} K={}: max objective excess {worst_ratio:.2e} (<= 1e-6), \
             max coefficient distance {worst_dist:.2e} (<= 1e-3), {secs:.1}s (< 60s)",
            fx.cases.len(),
            fx.n,
            fx.p,
            fx.n_internal + fx.order
        ),
    );
    diag
}

fn kkt_certification(gate: &mut Gate, diags: &[FitDiagnostics]) {
    let mut total = FitDiagnostics::default();
    for d in diags {
        total.fits += d.fits;
        total.nonconverged += d.nonconverged;
        total.max_kkt = total.max_kkt.max(d.max_kkt);
        total.trace_violations += d.trace_violations;
    }
    gate.report(
        "6",
        total.max_kkt <= KKT_TOL && total.trace_violations == 0,
        format!(
            "{} fit records: max kkt of converged fits {:.2e} (<= 1e-5), trace violations {} (= 0), \
             not converged {}",
            total.fits, total.max_kkt, total.trace_violations, total.nonconverged
        ),
    );
}

fn basis_identities(gate: &mut Gate) {
    let spec = make_knots(6, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut unity: f64 = 0.0;
    for _ in 0..1000 {
        let t = rng.random_range(0.0..=1.0);
        let s: f64 = eval_basis(&spec, t).unwrap().iter().sum();
        unity = unity.max((s - 1.0).abs());
    }
    let (n, p) = (200, 5);
    let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-3.0..3.0));
    let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
    let d = build_design(&x, &t, &spec).unwrap();
    let mut collapse: f64 = 0.0;
    for j in 0..p {
        let block = d.block(j);
        for i in 0..n {
            collapse = collapse.max((block.row(i).sum() - x[(i, j)]).abs());
        }
    }
    let grid: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
    let mut recon: f64 = 0.0;
    for c in [-7.25, 0.1, 3.0, 1e3] {
        for v in eval_coef_function(&vec![c; spec.dim()], &spec, &grid).unwrap() {
            recon = recon.max((v - c).abs() / c.abs().max(1.0));
        }
    }
    let cn0 = [0.1, -3.7, 1e10, 1.0 / 3.0]
        .iter()
        .map(|&c| centered_norm(&[c; 10]))
        .fold(0.0, f64::max);
    gate.report(
        "7",
        unity <= 1e-12 && collapse <= 1e-12 && recon <= 1e-12 && cn0 == 0.0,
        format!(
            "partition of unity {unity:.1e}, collapse identity {collapse:.1e}, constant reconstruction {recon:.1e} \
             (all <= 1e-12), centered norm of constants {cn0} (= 0)"
        ),
    );
}

fn formulas(gate: &mut Gate) {
    let k = 10;
    let mut vals = Vec::new();
    for j in 0..12 {
        match j {
            0..6 => vals.extend(vec![1.0 + j as f64; k]),
            6..9 => vals.extend((0..k).map(|i| i as f64 * (j as f64))),
            _ => vals.extend(vec![0.0; k]),
        }
    }
    let fit = FitResult {
        coef: CoefState::from_values(vals, k).unwrap(),
        lambda1: 0.0,
        lambda2: 0.0,
        weights: PenaltyWeights::unit(12),
        rss: 10.0,
        n_iter: 0,
        converged: true,
        kkt: 0.0,
        objective_trace: vec![],
        jitter_events: 0,
    };
    let bic = compute_bic(&fit, 100, k, 1.0);
    let cn = cn_value(CriterionMode::Ebic, 50, 10).unwrap();
    gate.report(
        "8",
        (bic + 1.335499).abs() <= 1e-6 && (cn - 2.4930).abs() <= 1e-4,
        format!("worked criterion value {bic:.7} (-1.335499 +- 1e-6), cn(EBIC, 50, 10) {cn:.5} (2.4930 +- 1e-4)"),
    );
}

fn consistency(gate: &mut Gate, small: &SimReport, large: &SimReport) {
    let (a, b) = (
        summary(small, Method::AglassoBicEbic).exact_recovery,
        summary(large, Method::AglassoBicEbic).exact_recovery,
    );
    gate.report(
        "9",
        b >= a,
        format!(
            "exact structure recovery aglasso-BIC-EBIC over {} reps: n=400 {b:.2} >= n=100 {a:.2}",
            large.reps_completed
        ),
    );
}

fn determinism(gate: &mut Gate) {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, workers) in ["1", "1", "2", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_vcselect"))
            .args(["simulate", "--reps", "3", "--seed", "7", "--n", "80", "--p", "12", "--out"])
            .arg(&out)
            .env("VCSELECT_WORKERS", workers)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        outputs.push((
            std::fs::read(out.join("report.json")).unwrap(),
            std::fs::read(out.join("report.txt")).unwrap(),
        ));
    }
    let same = outputs.iter().all(|o| *o == outputs[0]);
    gate.report(
        "10",
        same,
        "simulate reports byte-identical across two runs and 1, 2, 4 workers".to_string(),
    );
}

fn main() -> ExitCode {
    let mut gate = Gate { failed: 0 };
    let start = Instant::now();

    basis_identities(&mut gate);
    formulas(&mut gate);
    let oracle_diag = convex_oracle(&mut gate);

    let table = SimConfig {
        n: 100,
        p: 50,
        reps: 100,
        seed: 1,
        ..SimConfig::default()
    };
    let report = run_monte_carlo(&table).unwrap();
    table_criteria(&mut gate, &report);

    let trend = |n: usize| SimConfig {
        n,
        reps: 50,
        seed: 2,
        methods: vec![Method::AglassoBicEbic],
        ..table.clone()
    };
    let small = run_monte_carlo(&trend(100)).unwrap();
    let large = run_monte_carlo(&trend(400)).unwrap();
    consistency(&mut gate, &small, &large);

    let mut diags = vec![oracle_diag];
    for r in [&report, &small, &large] {
        diags.extend(r.methods.iter().map(|m| m.diagnostics));
    }
    kkt_certification(&mut gate, &diags);

    determinism(&mut gate);

    println!(
        "{} of 10 criteria failed ({:.0}s)",
        gate.failed,
        start.elapsed().as_secs_f64()
    );
    if gate.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
