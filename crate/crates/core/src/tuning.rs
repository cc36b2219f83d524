//! Information-criterion tuning of the penalty levels and GCV choice of the
//! basis dimension for the unpenalized structured fit.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::{centered_norm, group_norm, GroupClass, PenaltyWeights};
use crate::solver::{FitResult, Problem, SolverConfig};
use crate::spline::{build_design, BasisSpec, GroupedDesign};

/// Ordinary BIC (`C_n = 1`) or the extended version (`C_n = sqrt(log(pK))`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionMode {
    Bic,
    Ebic,
}

impl CriterionMode {
    pub fn label(&self) -> &'static str {
        match self {
            CriterionMode::Bic => "BIC",
            CriterionMode::Ebic => "EBIC",
        }
    }
}

impl std::str::FromStr for CriterionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bic" => Ok(CriterionMode::Bic),
            "ebic" => Ok(CriterionMode::Ebic),
            other => Err(Error::InvalidConfig(format!("unknown criterion '{other}'"))),
        }
    }
}

/// Inflation factor `C_n`.
pub fn cn_value(mode: CriterionMode, p: usize, k: usize) -> Result<f64> {
    if p == 0 || k == 0 {
        return Err(Error::InvalidConfig("p and K must be at least 1".into()));
    }
    match mode {
        CriterionMode::Bic => Ok(1.0),
        CriterionMode::Ebic => {
            let pk = (p * k) as f64;
            if pk <= 1.0 {
                return Err(Error::InvalidConfig(
                    "EBIC needs pK > 1 so that log(pK) is positive".into(),
                ));
            }
            Ok(pk.ln().sqrt())
        }
    }
}

const RSS_FLOOR: f64 = 1e-300;

/// `log(rss/n) + d1 log(n)/n C_n + d2 log(n/K)/(n/K) C_n` from model size counts.
pub fn bic_from_counts(rss: f64, n: usize, k: usize, d1: usize, d2: usize, cn: f64) -> f64 {
    let nf = n as f64;
    let nk = nf / k as f64;
    (rss / nf).max(RSS_FLOOR).ln()
        + d1 as f64 * nf.ln() / nf * cn
        + d2 as f64 * nk.ln() / nk * cn
}

/// BIC-type criterion of a fit: `d1` counts nonzero constant groups and `d2`
/// varying groups.
pub fn compute_bic(fit: &FitResult, n: usize, k: usize, cn: f64) -> f64 {
    let d1 = fit.coef.count(GroupClass::is_constant);
    let d2 = fit.coef.count(GroupClass::is_varying);
    bic_from_counts(fit.rss, n, k, d1, d2, cn)
}

/// Log-spaced decreasing grid from `max` down to `max * ratio`.
pub fn log_grid(max: f64, points: usize, ratio: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![max],
        _ => {
            let step = ratio.ln() / (points - 1) as f64;
            (0..points).map(|i| max * (step * i as f64).exp()).collect()
        }
    }
}

/// Smallest `lambda1` at which the all-zero fit is stationary when
/// `lambda2 = 0`: `max_j ||Z_j'y|| / (n w1_j)`.
pub fn lambda1_max(y: &[f64], design: &GroupedDesign, w: &PenaltyWeights) -> f64 {
    group_scores(y, design, w, |g| group_norm(g), |w, j| w.w1[j])
}

/// `max_j ||Q_L Z_j'y|| / (n w2_j)` over groups that may vary.
pub fn lambda2_max(y: &[f64], design: &GroupedDesign, w: &PenaltyWeights) -> f64 {
    group_scores(y, design, w, |g| centered_norm(g), |w, j| {
        if w.forced_constant[j] {
            f64::INFINITY
        } else {
            w.w2[j]
        }
    })
}

fn group_scores(
    y: &[f64],
    design: &GroupedDesign,
    w: &PenaltyWeights,
    norm: impl Fn(&[f64]) -> f64,
    weight: impl Fn(&PenaltyWeights, usize) -> f64,
) -> f64 {
    let yv = nalgebra::DVector::from_column_slice(y);
    let n = design.n() as f64;
    (0..design.p())
        .filter(|&j| !w.forced_zero[j])
        .map(|j| {
            let g = design.block(j).tr_mul(&yv);
            norm(g.as_slice()) / (n * weight(w, j))
        })
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
}

/// Grid resolution used when grids are built automatically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub points: usize,
    /// Smallest grid value as a fraction of the largest.
    pub ratio: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            points: 15,
            ratio: 1e-3,
        }
    }
}

/// Every grid point that was fitted, with its criterion value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuningReport {
    /// `(lambda1, lambda2)` per point; `lambda2 = 0` for the group-Lasso path.
    pub grid: Vec<(f64, f64)>,
    /// `None` where the fit did not converge.
    pub criterion_values: Vec<Option<f64>>,
    pub chosen: usize,
    pub criterion_mode: CriterionMode,
    pub cn: f64,
}

/// All fits along a tuning grid, reusable for several criteria.
#[derive(Debug, Clone)]
pub struct GridFits {
    pub fits: Vec<FitResult>,
}

impl GridFits {
    /// Picks the criterion minimizer among converged fits. Ties go to the larger
    /// `lambda1`, then the larger `lambda2`.
    pub fn select(&self, mode: CriterionMode, n: usize, p: usize, k: usize) -> Result<(FitResult, TuningReport)> {
        let cn = cn_value(mode, p, k)?;
        let values: Vec<Option<f64>> = self
            .fits
            .iter()
            .map(|f| f.converged.then(|| compute_bic(f, n, k, cn)))
            .collect();
        let mut best: Option<usize> = None;
        for (i, v) in values.iter().enumerate() {
            let Some(v) = v else { continue };
            let better = match best {
                None => true,
                Some(b) => {
                    let bv = values[b].unwrap();
                    let (fi, fb) = (&self.fits[i], &self.fits[b]);
                    v < &bv
                        || (*v == bv
                            && (fi.lambda1, fi.lambda2)
                                .partial_cmp(&(fb.lambda1, fb.lambda2))
                                .is_some_and(|o| o.is_gt()))
                }
            };
            if better {
                best = Some(i);
            }
        }
        let chosen = best.ok_or(Error::NoConvergedFit)?;
        let report = TuningReport {
            grid: self.fits.iter().map(|f| (f.lambda1, f.lambda2)).collect(),
            criterion_values: values,
            chosen,
            criterion_mode: mode,
            cn,
        };
        Ok((self.fits[chosen].clone(), report))
    }
}

fn sorted_desc(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("tuning grid is empty".into()));
    }
    if grid.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidConfig("grid values must be finite and nonnegative".into()));
    }
    let mut g = grid.to_vec();
    g.sort_by(|a, b| b.total_cmp(a));
    Ok(g)
}

/// Fits every `(lambda1, lambda2)` pair. Each `lambda2` value defines a path
/// traversed in decreasing `lambda1` with warm starts; paths run in parallel.
pub fn fit_pair_grid(
    problem: &Problem<'_>,
    w: &PenaltyWeights,
    grid1: &[f64],
    grid2: &[f64],
    cfg: &SolverConfig,
) -> Result<GridFits> {
    let g1 = sorted_desc(grid1)?;
    let g2 = sorted_desc(grid2)?;
    let paths: Vec<Result<Vec<FitResult>>> = g2
        .par_iter()
        .map(|&l2| {
            let mut out = Vec::with_capacity(g1.len());
            let mut warm: Option<crate::penalty::CoefState> = None;
            for &l1 in &g1 {
                let fit = problem.fit_double_penalty(l1, l2, w, cfg, warm.as_ref())?;
                warm = Some(fit.coef.clone());
                out.push(fit);
            }
            Ok(out)
        })
        .collect();
    let mut fits = Vec::with_capacity(g1.len() * g2.len());
    for p in paths {
        fits.extend(p?);
    }
    Ok(GridFits { fits })
}

/// Group-Lasso fits along a decreasing `lambda0` path with warm starts.
pub fn fit_lambda0_path(problem: &Problem<'_>, grid0: &[f64], cfg: &SolverConfig) -> Result<GridFits> {
    let g0 = sorted_desc(grid0)?;
    let mut fits = Vec::with_capacity(g0.len());
    let mut warm: Option<crate::penalty::CoefState> = None;
    for &l0 in &g0 {
        let fit = problem.fit_group_lasso(l0, cfg, warm.as_ref())?;
        warm = Some(fit.coef.clone());
        fits.push(fit);
    }
    Ok(GridFits { fits })
}

/// Chooses `(lambda1, lambda2)` on the given grids by the criterion.
pub fn select_lambda_pair(
    y: &[f64],
    design: &GroupedDesign,
    w: &PenaltyWeights,
    grid1: &[f64],
    grid2: &[f64],
    mode: CriterionMode,
    cfg: &SolverConfig,
) -> Result<(FitResult, TuningReport)> {
    let problem = Problem::new(y, design)?;
    fit_pair_grid(&problem, w, grid1, grid2, cfg)?.select(mode, design.n(), design.p(), design.k())
}

/// Chooses the group-Lasso level `lambda0` by the criterion, counting every
/// nonzero group as varying.
pub fn select_lambda0(
    y: &[f64],
    design: &GroupedDesign,
    grid0: &[f64],
    mode: CriterionMode,
    cfg: &SolverConfig,
) -> Result<(FitResult, TuningReport)> {
    let problem = Problem::new(y, design)?;
    fit_lambda0_path(&problem, grid0, cfg)?.select(mode, design.n(), design.p(), design.k())
}

/// `(rss/n) / (1 - df/n)^2`.
pub fn gcv_score(rss: f64, n: usize, df: usize) -> Option<f64> {
    let nf = n as f64;
    (df < n).then(|| (rss / nf) / (1.0 - df as f64 / nf).powi(2))
}

/// Effective degrees of freedom of a structured unpenalized fit.
pub fn structure_df(structure: &[GroupClass], k: usize) -> usize {
    structure
        .iter()
        .map(|c| match c {
            GroupClass::Varying => k,
            GroupClass::Constant(_) => 1,
            GroupClass::Zero => 0,
        })
        .sum()
}

/// Picks the cubic-spline basis dimension for the structured unpenalized fit
/// by generalized cross-validation. Ties go to the smaller dimension.
pub fn gcv_select_k(
    y: &[f64],
    x: &DMatrix<f64>,
    t: &[f64],
    structure: &[GroupClass],
    k_candidates: &[usize],
) -> Result<(BasisSpec, FitResult)> {
    const ORDER: usize = 4;
    let n = y.len();
    let mut best: Option<(f64, BasisSpec, FitResult)> = None;
    for &k in k_candidates {
        let spec = BasisSpec::with_dim(k, ORDER)?;
        let Some(_) = gcv_score(1.0, n, structure_df(structure, k)) else {
            continue;
        };
        let design = build_design(x, t, &spec)?;
        let fit = Problem::new(y, &design)?.fit_constrained_ls(structure)?;
        let score = gcv_score(fit.rss, n, structure_df(structure, k)).unwrap();
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, spec, fit));
        }
    }
    best.map(|(_, spec, fit)| (spec, fit)).ok_or_else(|| {
        Error::InvalidConfig("no candidate basis dimension leaves positive residual degrees of freedom".into())
    })
}
