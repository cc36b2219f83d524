//! Monte Carlo study of the selection pipeline on synthetic data with three
//! varying, six constant and `p - 9` zero coefficient functions.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::penalty::{CoefState, GroupClass, PenaltyWeights};
use crate::solver::{compute_adaptive_weights, FitResult, Problem, SolverConfig};
use crate::spline::{build_design, eval_coef_function, make_knots, BasisSpec};
use crate::tuning::{
    fit_lambda0_path, fit_pair_grid, gcv_select_k, lambda1_max, lambda2_max, log_grid,
    CriterionMode, GridFits, GridOptions,
};

/// Pipeline variants compared in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "glasso-BIC")]
    GlassoBic,
    #[serde(rename = "glasso-EBIC")]
    GlassoEbic,
    #[serde(rename = "aglasso-BIC-BIC")]
    AglassoBicBic,
    #[serde(rename = "aglasso-BIC-EBIC")]
    AglassoBicEbic,
    #[serde(rename = "oracle")]
    Oracle,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::GlassoBic,
        Method::GlassoEbic,
        Method::AglassoBicBic,
        Method::AglassoBicEbic,
        Method::Oracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::GlassoBic => "glasso-BIC",
            Method::GlassoEbic => "glasso-EBIC",
            Method::AglassoBicBic => "aglasso-BIC-BIC",
            Method::AglassoBicEbic => "aglasso-BIC-EBIC",
            Method::Oracle => "oracle",
        }
    }

    fn is_adaptive(&self) -> bool {
        matches!(self, Method::AglassoBicBic | Method::AglassoBicEbic)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

/// Number of truly nonzero coefficient functions.
pub const N_NONZERO: usize = 9;

/// Coefficients whose estimation error is reported (1-based).
pub const REPORTED_COEFS: [usize; 7] = [1, 2, 3, 4, 6, 8, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    /// Covariates 2..p have correlation `rho^|j1 - j2|`.
    pub rho: f64,
    pub noise_var: f64,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub error_grid_size: usize,
    /// Basis dimension for the penalized fits.
    pub n_basis: usize,
    pub order: usize,
    pub grid_points: usize,
    pub grid_ratio: f64,
    /// Candidate basis dimensions for the oracle fit.
    pub oracle_k: Vec<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 100,
            p: 50,
            rho: 0.5,
            noise_var: 0.1,
            reps: 100,
            seed: 1,
            methods: Method::ALL.to_vec(),
            error_grid_size: 201,
            n_basis: 10,
            order: 4,
            grid_points: GridOptions::default().points,
            grid_ratio: GridOptions::default().ratio,
            oracle_k: (4..=15).collect(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n < 1 {
            return bad("n must be at least 1");
        }
        if self.p < N_NONZERO {
            return bad("p must be at least 9: the true model has 9 nonzero coefficients");
        }
        if self.reps < 1 {
            return bad("reps must be at least 1");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if !(self.rho.abs() < 1.0) {
            return bad("rho must lie in (-1, 1)");
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return bad("noise variance must be finite and nonnegative");
        }
        if self.error_grid_size < 2 {
            return bad("error grid needs at least 2 points");
        }
        if self.order < 1 || self.n_basis < self.order {
            return bad("basis dimension must be at least the spline order");
        }
        if self.grid_points < 1 || !(self.grid_ratio > 0.0 && self.grid_ratio <= 1.0) {
            return bad("grid needs at least one point and a ratio in (0, 1]");
        }
        if self.oracle_k.iter().any(|&k| k < 4) || self.oracle_k.is_empty() {
            return bad("oracle basis candidates must be nonempty and at least 4");
        }
        Ok(())
    }

    fn grid(&self) -> GridOptions {
        GridOptions {
            points: self.grid_points,
            ratio: self.grid_ratio,
        }
    }
}

/// The data-generating coefficient functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub p: usize,
}

impl TruthSpec {
    /// Classification of coefficient `j` (1-based).
    pub fn class(&self, j: usize) -> GroupClass {
        match j {
            1..=3 => GroupClass::Varying,
            4 | 5 => GroupClass::Constant(1.5),
            6 | 7 => GroupClass::Constant(0.5),
            8 | 9 => GroupClass::Constant(0.1),
            _ => GroupClass::Zero,
        }
    }

    /// Per-group structure, 0-based.
    pub fn structure(&self) -> Vec<GroupClass> {
        (1..=self.p).map(|j| self.class(j)).collect()
    }

    fn value(&self, j: usize, t: f64) -> f64 {
        match j {
            1 => 3.0 * (2.0 * PI * t).sin(),
            2 => 8.0 * t * (1.0 - t),
            3 => ((2.0 * PI * t).powi(2)).cos(),
            _ => match self.class(j) {
                GroupClass::Constant(c) => c,
                _ => 0.0,
            },
        }
    }
}

/// `beta_j(t)` of the data-generating model, `j` 1-based.
pub fn true_coefficient(truth: &TruthSpec, j: usize, t: f64) -> Result<f64> {
    if j < 1 || j > truth.p {
        return Err(Error::InvalidConfig(format!(
            "coefficient index {j} outside 1..={}",
            truth.p
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange {
            what: "t".into(),
            value: t,
        });
    }
    Ok(truth.value(j, t))
}

/// Independent stream for replication `rep` of the master seed.
fn rep_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// Draws one synthetic dataset. Rows are generated independently: `t`
/// uniform, an intercept column, an AR(1) chain of standard normals for the
/// remaining covariates, then Gaussian noise.
pub fn gen_dataset(config: &SimConfig, rep: usize) -> Result<(Dataset, TruthSpec)> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let truth = TruthSpec { p };
    let mut rng = rep_rng(config.seed, rep);
    let innov = (1.0 - config.rho * config.rho).sqrt();
    let sd = config.noise_var.sqrt();
    let mut x = DMatrix::zeros(n, p);
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let ti: f64 = rng.random_range(0.0..=1.0);
        x[(i, 0)] = 1.0;
        let mut prev: f64 = 0.0;
        for j in 1..p {
            let z: f64 = rng.sample(StandardNormal);
            prev = if j == 1 { z } else { config.rho * prev + innov * z };
            x[(i, j)] = prev;
        }
        let eps: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
        let signal: f64 = (1..=N_NONZERO).map(|j| x[(i, j - 1)] * truth.value(j, ti)).sum();
        t.push(ti);
        y.push(signal + eps);
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Ok((Dataset::new(y, t, x, names)?, truth))
}

/// Table-style selection counts for one fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionCounts {
    pub correct_zeros: usize,
    pub incorrect_zeros: usize,
    pub correct_constants: usize,
    pub incorrect_constants: usize,
}

pub fn selection_metrics(fitted: &[GroupClass], truth: &TruthSpec) -> SelectionCounts {
    let mut c = SelectionCounts::default();
    for (j0, est) in fitted.iter().enumerate() {
        let actual = truth.class(j0 + 1);
        match (actual, est) {
            (GroupClass::Zero, GroupClass::Zero) => c.correct_zeros += 1,
            (_, GroupClass::Zero) => c.incorrect_zeros += 1,
            (GroupClass::Constant(_), e) if e.is_constant() => c.correct_constants += 1,
            (GroupClass::Varying, e) if e.is_constant() => c.incorrect_constants += 1,
            _ => {}
        }
    }
    c
}

/// Whether every group has its true zero / constant / varying label.
pub fn exact_structure(fitted: &[GroupClass], truth: &TruthSpec) -> bool {
    fitted.iter().enumerate().all(|(j0, est)| {
        match truth.class(j0 + 1) {
            GroupClass::Zero => est.is_zero(),
            GroupClass::Constant(_) => est.is_constant(),
            GroupClass::Varying => est.is_varying(),
        }
    })
}

/// `sqrt(int_0^1 (f - g)^2 dt)` by the trapezoidal rule on a uniform grid.
pub fn l2_error(fitted: &[f64], truth: &[f64]) -> f64 {
    let m = fitted.len().min(truth.len());
    if m < 2 {
        return fitted
            .iter()
            .zip(truth)
            .map(|(a, b)| (a - b).abs())
            .next()
            .unwrap_or(0.0);
    }
    let h = 1.0 / (m - 1) as f64;
    let sq: Vec<f64> = fitted.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).collect();
    let inner: f64 = sq[1..m - 1].iter().sum();
    (h * (inner + 0.5 * (sq[0] + sq[m - 1]))).sqrt()
}

/// Solver health over all fits a replication performed for one method.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub fits: usize,
    pub nonconverged: usize,
    /// Largest scaled KKT residual among converged penalized fits.
    pub max_kkt: f64,
    /// Fits whose objective trace increased by more than 1e-10.
    pub trace_violations: usize,
}

impl FitDiagnostics {
    fn record(&mut self, fits: &[FitResult]) {
        for f in fits {
            self.fits += 1;
            if f.converged {
                self.max_kkt = self.max_kkt.max(f.kkt);
            } else {
                self.nonconverged += 1;
            }
            if !f.trace_is_monotone(1e-10) {
                self.trace_violations += 1;
            }
        }
    }

    fn merge(&mut self, other: &FitDiagnostics) {
        self.fits += other.fits;
        self.nonconverged += other.nonconverged;
        self.max_kkt = self.max_kkt.max(other.max_kkt);
        self.trace_violations += other.trace_violations;
    }
}

/// One method's result on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub method: Method,
    pub counts: SelectionCounts,
    pub exact: bool,
    /// L2 errors for [`REPORTED_COEFS`] that exist at this `p`.
    pub errors: Vec<f64>,
    pub classes: Vec<GroupClass>,
    pub diagnostics: FitDiagnostics,
}

fn coefficient_errors(
    coef: &CoefState,
    spec: &BasisSpec,
    truth: &TruthSpec,
    grid: &[f64],
) -> Result<Vec<f64>> {
    REPORTED_COEFS
        .iter()
        .filter(|&&j| j <= truth.p)
        .map(|&j| {
            let est = eval_coef_function(coef.group(j - 1), spec, grid)?;
            let actual: Vec<f64> = grid.iter().map(|&t| truth.value(j, t)).collect();
            Ok(l2_error(&est, &actual))
        })
        .collect()
}

fn outcome(
    method: Method,
    coef: &CoefState,
    spec: &BasisSpec,
    truth: &TruthSpec,
    grid: &[f64],
    diagnostics: FitDiagnostics,
) -> Result<ReplicationOutcome> {
    Ok(ReplicationOutcome {
        method,
        counts: selection_metrics(coef.classes(), truth),
        exact: exact_structure(coef.classes(), truth),
        errors: coefficient_errors(coef, spec, truth, grid)?,
        classes: coef.classes().to_vec(),
        diagnostics,
    })
}

/// Runs every configured method on replication `rep`, sharing the group-Lasso
/// path and the adaptive grid between the methods that use them.
pub fn run_replication_all(config: &SimConfig, rep: usize) -> Result<Vec<ReplicationOutcome>> {
    let (data, truth) = gen_dataset(config, rep)?;
    let grid: Vec<f64> = (0..config.error_grid_size)
        .map(|i| i as f64 / (config.error_grid_size - 1) as f64)
        .collect();
    let spec = make_knots(config.n_basis - config.order, config.order)?;
    let design = build_design(&data.x, &data.t, &spec)?;
    let problem = Problem::new(&data.y, &design)?;
    let solver = SolverConfig::default();
    let (n, p, k) = (design.n(), design.p(), design.k());
    let opts = config.grid();

    let wants = |m: Method| config.methods.contains(&m);
    let mut out = Vec::new();

    let needs_path = config.methods.iter().any(|m| *m != Method::Oracle);
    let mut path_diag = FitDiagnostics::default();
    let mut initial: Option<FitResult> = None;
    let mut path: Option<GridFits> = None;
    if needs_path {
        let unit = PenaltyWeights::unit(p);
        let grid0 = log_grid(lambda1_max(&data.y, &design, &unit), opts.points, opts.ratio);
        let fits = fit_lambda0_path(&problem, &grid0, &solver)?;
        path_diag.record(&fits.fits);
        initial = Some(fits.select(CriterionMode::Bic, n, p, k)?.0);
        path = Some(fits);
    }

    for (method, mode) in [(Method::GlassoBic, CriterionMode::Bic), (Method::GlassoEbic, CriterionMode::Ebic)] {
        if wants(method) {
            let fit = path.as_ref().unwrap().select(mode, n, p, k)?.0;
            out.push(outcome(method, &fit.coef, &spec, &truth, &grid, path_diag)?);
        }
    }

    if config.methods.iter().any(Method::is_adaptive) {
        let initial = initial.as_ref().unwrap();
        let w = compute_adaptive_weights(initial, 0.0);
        let grid1 = log_grid(lambda1_max(&data.y, &design, &w), opts.points, opts.ratio);
        let grid2 = log_grid(lambda2_max(&data.y, &design, &w), opts.points, opts.ratio);
        let fits = fit_pair_grid(&problem, &w, &grid1, &grid2, &solver)?;
        let mut diag = path_diag;
        let mut pair_diag = FitDiagnostics::default();
        pair_diag.record(&fits.fits);
        diag.merge(&pair_diag);
        for (method, mode) in [
            (Method::AglassoBicBic, CriterionMode::Bic),
            (Method::AglassoBicEbic, CriterionMode::Ebic),
        ] {
            if wants(method) {
                let fit = fits.select(mode, n, p, k)?.0;
                out.push(outcome(method, &fit.coef, &spec, &truth, &grid, diag)?);
            }
        }
    }

    if wants(Method::Oracle) {
        let (oracle_spec, fit) =
            gcv_select_k(&data.y, &data.x, &data.t, &truth.structure(), &config.oracle_k)?;
        let mut diag = FitDiagnostics::default();
        diag.record(std::slice::from_ref(&fit));
        out.push(outcome(Method::Oracle, &fit.coef, &oracle_spec, &truth, &grid, diag)?);
    }

    out.sort_by_key(|o| config.methods.iter().position(|m| *m == o.method));
    Ok(out)
}

/// Runs one method on replication `rep`.
pub fn run_replication(config: &SimConfig, method: Method, rep: usize) -> Result<ReplicationOutcome> {
    let cfg = SimConfig {
        methods: vec![method],
        ..config.clone()
    };
    Ok(run_replication_all(&cfg, rep)?.remove(0))
}

/// Averages for one method over all replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub correct_zeros: f64,
    pub incorrect_zeros: f64,
    pub correct_constants: f64,
    pub incorrect_constants: f64,
    /// Fraction of replications with the exact true structure.
    pub exact_recovery: f64,
    /// `(j, mean L2 error of beta_j)` for the reported coefficients.
    pub errors: Vec<(usize, f64)>,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub software: String,
    pub config: SimConfig,
    pub reps_completed: usize,
    pub methods: Vec<MethodSummary>,
}

fn summarize(method: Method, outcomes: &[&ReplicationOutcome], p: usize) -> MethodSummary {
    let reps = outcomes.len() as f64;
    let mean = |f: &dyn Fn(&ReplicationOutcome) -> f64| outcomes.iter().map(|o| f(o)).sum::<f64>() / reps;
    let coefs: Vec<usize> = REPORTED_COEFS.iter().copied().filter(|&j| j <= p).collect();
    let mut diagnostics = FitDiagnostics::default();
    for o in outcomes {
        diagnostics.merge(&o.diagnostics);
    }
    MethodSummary {
        method,
        correct_zeros: mean(&|o| o.counts.correct_zeros as f64),
        incorrect_zeros: mean(&|o| o.counts.incorrect_zeros as f64),
        correct_constants: mean(&|o| o.counts.correct_constants as f64),
        incorrect_constants: mean(&|o| o.counts.incorrect_constants as f64),
        exact_recovery: mean(&|o| if o.exact { 1.0 } else { 0.0 }),
        errors: coefs
            .iter()
            .enumerate()
            .map(|(i, &j)| (j, mean(&|o| o.errors[i])))
            .collect(),
        diagnostics,
    }
}

/// Runs `config.reps` replications on the current rayon pool and averages them
/// in replication order, so the report does not depend on the worker count.
pub fn run_monte_carlo(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let per_rep: Vec<Vec<ReplicationOutcome>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| run_replication_all(config, rep))
        .collect::<Result<_>>()?;
    let methods = config
        .methods
        .iter()
        .map(|&m| {
            let outs: Vec<&ReplicationOutcome> = per_rep
                .iter()
                .filter_map(|r| r.iter().find(|o| o.method == m))
                .collect();
            summarize(m, &outs, config.p)
        })
        .collect();
    Ok(SimReport {
        software: crate::SOFTWARE.to_string(),
        config: config.clone(),
        reps_completed: per_rep.len(),
        methods,
    })
}

impl SimReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Selection table followed by the estimation-error table.
    pub fn render_tables(&self) -> String {
        let c = &self.config;
        let zeros = c.p - N_NONZERO;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Model selection, n = {}, p = {}, {} replications (truth: {} zero, 6 constant)",
            c.n, c.p, self.reps_completed, zeros
        );
        let _ = writeln!(
            s,
            "{:<18} {:>10} {:>10} {:>10} {:>10} {:>8}",
            "method", "zero ok", "zero bad", "const ok", "const bad", "exact"
        );
        for m in &self.methods {
            let _ = writeln!(
                s,
                "{:<18} {:>10.2} {:>10.2} {:>10.2} {:>10.2} {:>8.2}",
                m.method.name(),
                m.correct_zeros,
                m.incorrect_zeros,
                m.correct_constants,
                m.incorrect_constants,
                m.exact_recovery
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "Mean L2 estimation error");
        let _ = write!(s, "{:<8}", "coef");
        for m in &self.methods {
            let _ = write!(s, " {:>17}", m.method.name());
        }
        let _ = writeln!(s);
        let coefs: Vec<usize> = self
            .methods
            .first()
            .map(|m| m.errors.iter().map(|e| e.0).collect())
            .unwrap_or_default();
        for (i, j) in coefs.iter().enumerate() {
            let _ = write!(s, "{:<8}", format!("beta{j}"));
            for m in &self.methods {
                let _ = write!(s, " {:>17.4}", m.errors[i].1);
            }
            let _ = writeln!(s);
        }
        s
    }

    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn truth_values() {
        let truth = TruthSpec { p: 50 };
        assert_abs_diff_eq!(true_coefficient(&truth, 1, 0.25).unwrap(), 3.0, epsilon = 1e-15);
        assert_eq!(true_coefficient(&truth, 2, 0.5).unwrap(), 2.0);
        assert_eq!(true_coefficient(&truth, 4, 0.7).unwrap(), 1.5);
        assert_eq!(true_coefficient(&truth, 10, 0.3).unwrap(), 0.0);
        assert!(true_coefficient(&truth, 51, 0.3).is_err());
        assert!(true_coefficient(&truth, 0, 0.3).is_err());
    }

    #[test]
    fn selection_count_examples() {
        let truth = TruthSpec { p: 50 };
        assert_eq!(
            selection_metrics(&truth.structure(), &truth),
            SelectionCounts {
                correct_zeros: 41,
                incorrect_zeros: 0,
                correct_constants: 6,
                incorrect_constants: 0
            }
        );
        assert!(exact_structure(&truth.structure(), &truth));
        assert_eq!(
            selection_metrics(&[GroupClass::Varying; 50], &truth),
            SelectionCounts::default()
        );
        assert_eq!(
            selection_metrics(&[GroupClass::Zero; 50], &truth),
            SelectionCounts {
                correct_zeros: 41,
                incorrect_zeros: 9,
                correct_constants: 0,
                incorrect_constants: 0
            }
        );
        let mut wrong = truth.structure();
        wrong[0] = GroupClass::Constant(0.3);
        assert_eq!(selection_metrics(&wrong, &truth).incorrect_constants, 1);
        assert!(!exact_structure(&wrong, &truth));
    }

    #[test]
    fn l2_error_examples() {
        let grid: Vec<f64> = (0..201).map(|i| i as f64 / 200.0).collect();
        let f: Vec<f64> = grid.iter().map(|t| t * t).collect();
        assert_eq!(l2_error(&f, &f), 0.0);
        let shifted: Vec<f64> = f.iter().map(|v| v - 0.37).collect();
        assert_abs_diff_eq!(l2_error(&f, &shifted), 0.37, epsilon = 1e-12);
        let s: Vec<f64> = grid.iter().map(|t| (2.0 * PI * t).sin()).collect();
        let zero = vec![0.0; 201];
        assert_abs_diff_eq!(l2_error(&s, &zero), 0.5f64.sqrt(), epsilon = 1e-4);
    }

    #[test]
    fn covariance_structure() {
        let cfg = SimConfig {
            n: 100_000,
            p: 9,
            ..SimConfig::default()
        };
        let (d, _) = gen_dataset(&cfg, 3).unwrap();
        let col = |j: usize| d.x.column(j).iter().copied().collect::<Vec<f64>>();
        let (a, b) = (col(1), col(3));
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov = a.iter().zip(&b).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>() / n;
        assert!((cov - 0.25).abs() < 0.01, "cov = {cov}");
        let var = a.iter().map(|u| (u - ma) * (u - ma)).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.02, "var = {var}");
        assert!(d.x.column(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn datasets_are_reproducible() {
        let cfg = SimConfig::default();
        let (a, _) = gen_dataset(&cfg, 7).unwrap();
        let (b, _) = gen_dataset(&cfg, 7).unwrap();
        let (c, _) = gen_dataset(&cfg, 8).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.x, b.x);
        assert_ne!(a.y, c.y);
        let quiet = SimConfig { noise_var: 0.0, ..cfg };
        let (q, truth) = gen_dataset(&quiet, 0).unwrap();
        for i in 0..q.n() {
            let signal: f64 = (1..=9).map(|j| q.x[(i, j - 1)] * truth.value(j, q.t[i])).sum();
            assert_eq!(q.y[i], signal);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig { p: 8, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { reps: 0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig::default().validate().is_ok());
        assert_eq!("AGLASSO-bic-ebic".parse::<Method>().unwrap(), Method::AglassoBicEbic);
    }
}
