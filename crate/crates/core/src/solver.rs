//! Locally quadratic approximation (LQA) solver for the doubly penalized
//! criterion, with explicit bookkeeping of zero and constant groups.
//!
//! Each iteration majorizes `A||b_j||` by `A||b_j||^2 / (2||b_j0||)` and
//! `B||b_j||_c` by `B||b_j||_c^2 / (2||b_j0||_c)` at the current iterate and
//! solves the resulting block-ridge normal equations. Groups whose norm
//! collapses are dropped, and groups whose centered norm collapses are
//! reparameterized by a single constant; during the majorizer iterations
//! neither re-enters as varying. If the stationarity certificate is still
//! short of tolerance, exact block coordinate descent finishes the fit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::penalty::{
    centered_norm, group_kkt, group_norm, mean, penalty_value, residual, CoefState,
    GroupClass, PenaltyWeights,
};
use crate::spline::{BasisSpec, GroupedDesign};

/// Iteration limits and thresholds for [`fit_double_penalty`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Relative change in the coefficient vector that counts as converged.
    pub tol: f64,
    /// Relative objective change that counts as converged.
    pub obj_tol: f64,
    /// Relative group-norm threshold below which a group is dropped.
    pub zero_threshold: f64,
    /// Ratio `||b_j||_c / ||b_j||` below which a group becomes constant.
    pub constant_threshold: f64,
    /// Ridge used for the initial iterate, relative to the mean diagonal of `Z'Z`.
    pub ridge_init: f64,
    /// Scaled KKT residual a fit must reach to be reported as converged.
    pub kkt_tol: f64,
    /// Extra iterations allowed for the final refit on the settled structure.
    pub polish_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 200,
            tol: 1e-7,
            obj_tol: 1e-10,
            zero_threshold: 1e-4,
            constant_threshold: 1e-4,
            ridge_init: 1e-6,
            kkt_tol: 1e-5,
            polish_iter: 2000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.tol,
            self.obj_tol,
            self.zero_threshold,
            self.constant_threshold,
            self.ridge_init,
            self.kkt_tol,
        ];
        if self.max_iter == 0 || pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(
                "solver limits must be positive".into(),
            ));
        }
        if self.tol >= 1.0 || self.zero_threshold >= 1.0 || self.constant_threshold >= 1.0 {
            return Err(Error::InvalidConfig(
                "tolerance and thresholds must be below one".into(),
            ));
        }
        Ok(())
    }
}

/// Output of one penalized (or constrained) least-squares fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub coef: CoefState,
    pub lambda1: f64,
    pub lambda2: f64,
    pub weights: PenaltyWeights,
    /// `||y - Z b||^2`.
    pub rss: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Scaled KKT residual of `coef`.
    pub kkt: f64,
    pub objective_trace: Vec<f64>,
    /// Number of linear solves that needed diagonal jitter.
    pub jitter_events: usize,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }

    /// Whether `objective_trace` never increases by more than `slack`.
    pub fn trace_is_monotone(&self, slack: f64) -> bool {
        self.objective_trace.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

/// One column block of the reduced parameterization.
#[derive(Debug, Clone, Copy)]
enum Slot {
    /// `K` free coefficients with penalty curvature `a I + c Q_L`.
    Varying { group: usize, a: f64, c: f64 },
    /// One coefficient multiplying the collapsed column `x_j`, curvature `d`.
    Constant { group: usize, d: f64 },
}

impl Slot {
    fn width(&self, k: usize) -> usize {
        match self {
            Slot::Varying { .. } => k,
            Slot::Constant { .. } => 1,
        }
    }

    fn invertible(&self) -> bool {
        match *self {
            Slot::Varying { a, .. } => a > 0.0,
            Slot::Constant { d, .. } => d > 0.0,
        }
    }
}

/// Response and design prepared once and shared by every fit on them.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    design: &'a GroupedDesign,
    y: &'a [f64],
    yv: DVector<f64>,
    ridge: f64,
    grams: Vec<DMatrix<f64>>,
}

impl<'a> Problem<'a> {
    pub fn new(y: &'a [f64], design: &'a GroupedDesign) -> Result<Self> {
        if y.len() != design.n() {
            return Err(Error::dims(format!(
                "y has {} entries, design has {} rows",
                y.len(),
                design.n()
            )));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("response value {v}")));
        }
        let z = design.z();
        let mean_diag = if z.ncols() == 0 {
            1.0
        } else {
            z.norm_squared() / z.ncols() as f64
        };
        Ok(Problem {
            design,
            y,
            yv: DVector::from_column_slice(y),
            ridge: mean_diag.max(f64::MIN_POSITIVE),
            grams: (0..design.p())
                .map(|j| design.block(j).tr_mul(&design.block(j)))
                .collect(),
        })
    }

    pub fn design(&self) -> &GroupedDesign {
        self.design
    }

    pub fn y(&self) -> &[f64] {
        self.y
    }

    fn n(&self) -> usize {
        self.design.n()
    }

    fn p(&self) -> usize {
        self.design.p()
    }

    fn k(&self) -> usize {
        self.design.k()
    }

    /// Reduced design: `Z_j` for varying slots, `x_j` for constant slots.
    fn reduced_design(&self, slots: &[Slot]) -> DMatrix<f64> {
        let k = self.k();
        let m: usize = slots.iter().map(|s| s.width(k)).sum();
        let mut zr = DMatrix::zeros(self.n(), m);
        let mut col = 0;
        for s in slots {
            match *s {
                Slot::Varying { group, .. } => {
                    zr.columns_mut(col, k).copy_from(&self.design.block(group));
                    col += k;
                }
                Slot::Constant { group, .. } => {
                    zr.column_mut(col).copy_from(&self.design.raw_x().column(group));
                    col += 1;
                }
            }
        }
        zr
    }

    /// Solves `(Zr'Zr + D) theta = Zr'y` for the block-diagonal penalty `D`.
    fn solve(&self, slots: &[Slot], jitter: &mut usize) -> Vec<f64> {
        let k = self.k();
        let n = self.n();
        let zr = self.reduced_design(slots);
        let m = zr.ncols();
        if m == 0 {
            return Vec::new();
        }
        if m > n && slots.iter().all(Slot::invertible) {
            return self.solve_push_through(slots, &zr, jitter);
        }
        let mut lhs = zr.tr_mul(&zr);
        let rhs = zr.tr_mul(&self.yv);
        let mut col = 0;
        for s in slots {
            match *s {
                Slot::Varying { a, c, .. } => {
                    let kf = k as f64;
                    for r in 0..k {
                        for q in 0..k {
                            let delta = if r == q { 1.0 } else { 0.0 };
                            lhs[(col + r, col + q)] += a * delta + c * (delta - 1.0 / kf);
                        }
                    }
                    col += k;
                }
                Slot::Constant { d, .. } => {
                    lhs[(col, col)] += d;
                    col += 1;
                }
            }
        }
        spd_solve(lhs, rhs, jitter).as_slice().to_vec()
    }

    /// `theta = D^-1 Zr' (I + Zr D^-1 Zr')^-1 y`, used when the reduced design is
    /// wider than tall.
    fn solve_push_through(&self, slots: &[Slot], zr: &DMatrix<f64>, jitter: &mut usize) -> Vec<f64> {
        let k = self.k();
        let kf = k as f64;
        let n = self.n();
        // zd = Zr D^-1. For a varying slot D^-1 = I/(a+c) + (1/a - 1/(a+c)) 11'/K.
        let mut zd = zr.clone();
        let mut col = 0;
        for s in slots {
            match *s {
                Slot::Varying { group, a, c } => {
                    let inv_full = 1.0 / (a + c);
                    let extra = (1.0 / a - inv_full) / kf;
                    let xj = self.design.raw_x().column(group);
                    let mut block = zd.columns_mut(col, k);
                    block.scale_mut(inv_full);
                    if extra != 0.0 {
                        for q in 0..k {
                            block.column_mut(q).axpy(extra, &xj, 1.0);
                        }
                    }
                    col += k;
                }
                Slot::Constant { d, .. } => {
                    zd.column_mut(col).scale_mut(1.0 / d);
                    col += 1;
                }
            }
        }
        let mut cap = DMatrix::identity(n, n);
        cap.gemm(1.0, &zd, &zr.transpose(), 1.0);
        let u = spd_solve(cap, self.yv.clone(), jitter);
        zd.tr_mul(&u).as_slice().to_vec()
    }

    fn slots_for(&self, state: &CoefState, lambda1: f64, lambda2: f64, w: &PenaltyWeights, floor: f64) -> Vec<Slot> {
        let n = self.n();
        let kf = self.k() as f64;
        (0..self.p())
            .filter_map(|j| {
                let (a, b) = w.scaled(j, n, lambda1, lambda2);
                match state.class(j) {
                    GroupClass::Zero => None,
                    GroupClass::Constant(c) => Some(Slot::Constant {
                        group: j,
                        d: a * kf.sqrt() / c.abs().max(floor),
                    }),
                    GroupClass::Varying => {
                        let g = state.group(j);
                        Some(Slot::Varying {
                            group: j,
                            a: a / group_norm(g).max(floor),
                            c: if b == 0.0 { 0.0 } else { b / centered_norm(g).max(floor) },
                        })
                    }
                }
            })
            .collect()
    }

    /// Writes a reduced solution back into a full coefficient state with the
    /// same classification pattern as `slots`.
    fn expand(&self, slots: &[Slot], theta: &[f64]) -> CoefState {
        let k = self.k();
        let mut out = CoefState::zeros(self.p(), k);
        let mut col = 0;
        for s in slots {
            match *s {
                Slot::Varying { group, .. } => {
                    out.set_varying(group, &theta[col..col + k]);
                    col += k;
                }
                Slot::Constant { group, .. } => {
                    out.set_constant(group, theta[col]);
                    col += 1;
                }
            }
        }
        out
    }

    fn objective(&self, state: &CoefState, lambda1: f64, lambda2: f64, w: &PenaltyWeights) -> f64 {
        let r = residual(self.y, self.design, state);
        0.5 * r.norm_squared() + penalty_value(state, self.n(), lambda1, lambda2, w)
    }

    fn group_kkts(&self, state: &CoefState, lambda1: f64, lambda2: f64, w: &PenaltyWeights) -> Vec<f64> {
        let r = residual(self.y, self.design, state);
        let n = self.n();
        (0..self.p())
            .map(|j| {
                let g = self.design.block(j).tr_mul(&r);
                let (a, b) = w.scaled(j, n, lambda1, lambda2);
                group_kkt(
                    g.as_slice(),
                    state.group(j),
                    state.class(j),
                    a,
                    b,
                    w.forced_zero[j],
                    w.forced_constant[j],
                    n,
                )
            })
            .collect()
    }

    /// Ridge solution on the structure implied by the forced flags alone.
    fn ridge_start(&self, w: &PenaltyWeights, cfg: &SolverConfig, jitter: &mut usize) -> CoefState {
        let ridge = self.ridge * cfg.ridge_init;
        let slots: Vec<Slot> = (0..self.p())
            .filter(|&j| !w.forced_zero[j])
            .map(|j| {
                if w.forced_constant[j] {
                    Slot::Constant { group: j, d: ridge }
                } else {
                    Slot::Varying {
                        group: j,
                        a: ridge,
                        c: 0.0,
                    }
                }
            })
            .collect();
        let theta = self.solve(&slots, jitter);
        self.expand(&slots, &theta)
    }

    fn check_inputs(&self, lambda1: f64, lambda2: f64, w: &PenaltyWeights, cfg: &SolverConfig) -> Result<()> {
        cfg.validate()?;
        w.validate(self.p())?;
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        Ok(())
    }

    /// Minimizes the doubly penalized criterion; see [`fit_double_penalty`].
    pub fn fit_double_penalty(
        &self,
        lambda1: f64,
        lambda2: f64,
        w: &PenaltyWeights,
        cfg: &SolverConfig,
        warm: Option<&CoefState>,
    ) -> Result<FitResult> {
        self.check_inputs(lambda1, lambda2, w, cfg)?;
        if let Some(ws) = warm {
            if ws.p() != self.p() || ws.k() != self.k() {
                return Err(Error::dims("warm start does not match the design"));
            }
        }
        Ok(self.run(lambda1, lambda2, w, cfg, warm, true))
    }

    /// Group-Lasso fit with unit weights and no constant detection.
    pub fn fit_group_lasso(&self, lambda0: f64, cfg: &SolverConfig, warm: Option<&CoefState>) -> Result<FitResult> {
        let w = PenaltyWeights::unit(self.p());
        self.check_inputs(lambda0, 0.0, &w, cfg)?;
        Ok(self.run(lambda0, 0.0, &w, cfg, warm, false))
    }

    fn initial_state(
        &self,
        lambda1: f64,
        lambda2: f64,
        w: &PenaltyWeights,
        cfg: &SolverConfig,
        warm: Option<&CoefState>,
        jitter: &mut usize,
    ) -> CoefState {
        let ridge = self.ridge_start(w, cfg, jitter);
        let p = self.p();
        let mut state = CoefState::zeros(p, self.k());
        let warm_gradient = warm.map(|ws| {
            let r = residual(self.y, self.design, ws);
            (0..p)
                .map(|j| self.design.block(j).tr_mul(&r))
                .collect::<Vec<_>>()
        });
        for j in 0..p {
            if w.forced_zero[j] {
                continue;
            }
            let rj = ridge.group(j);
            let fresh = |state: &mut CoefState| {
                if w.forced_constant[j] {
                    state.set_constant(j, mean(rj));
                } else {
                    state.set_varying(j, rj);
                }
            };
            let Some(ws) = warm else {
                fresh(&mut state);
                continue;
            };
            match ws.class(j) {
                GroupClass::Varying => {
                    if w.forced_constant[j] {
                        state.set_constant(j, mean(ws.group(j)));
                    } else {
                        state.set_varying(j, ws.group(j));
                    }
                }
                GroupClass::Constant(c) => {
                    if w.forced_constant[j] {
                        state.set_constant(j, c);
                    } else {
                        let rm = mean(rj);
                        let g: Vec<f64> = rj.iter().map(|v| c + v - rm).collect();
                        state.set_varying(j, &g);
                    }
                }
                GroupClass::Zero => {
                    // Keep the group out if the zero subgradient condition holds
                    // with margin at the warm start; the final block sweeps
                    // revisit it.
                    let g = warm_gradient.as_ref().map(|gs| gs[j].as_slice()).unwrap_or(&[]);
                    let (a, b) = w.scaled(j, self.n(), lambda1, lambda2);
                    let kkt = group_kkt(
                        g,
                        ws.group(j),
                        GroupClass::Zero,
                        a * 0.9,
                        b * 0.9,
                        false,
                        w.forced_constant[j],
                        self.n(),
                    );
                    if kkt > 0.0 || a == 0.0 {
                        fresh(&mut state);
                    }
                }
            }
        }
        state
    }

    /// Applies the zero / constant thresholds, accepting a reclassification
    /// only if it does not raise the objective.
    #[allow(clippy::too_many_arguments)]
    fn reclassify(
        &self,
        state: &mut CoefState,
        current_obj: &mut f64,
        scale: f64,
        collapse: bool,
        lambda1: f64,
        lambda2: f64,
        w: &PenaltyWeights,
        cfg: &SolverConfig,
    ) -> bool {
        let kf = self.k() as f64;
        let zero_cut = cfg.zero_threshold * scale;
        let hard_cut = 1e-13 * scale;
        let mut candidates: Vec<(usize, GroupClass)> = Vec::new();
        for j in 0..state.p() {
            match state.class(j) {
                GroupClass::Zero => {}
                GroupClass::Constant(c) => {
                    if c.abs() * kf.sqrt() < zero_cut {
                        candidates.push((j, GroupClass::Zero));
                    }
                }
                GroupClass::Varying => {
                    let g = state.group(j);
                    let norm = group_norm(g);
                    if norm < zero_cut {
                        candidates.push((j, GroupClass::Zero));
                    } else if collapse && centered_norm(g) < cfg.constant_threshold * norm {
                        candidates.push((j, GroupClass::Constant(mean(g))));
                    }
                }
            }
        }
        if candidates.is_empty() {
            return false;
        }
        let apply = |s: &mut CoefState, (j, class): (usize, GroupClass)| match class {
            GroupClass::Zero => s.set_zero(j),
            GroupClass::Constant(c) => s.set_constant(j, c),
            GroupClass::Varying => {}
        };
        let slack = 1e-13 * current_obj.abs().max(1.0);
        let mut trial = state.clone();
        for &cand in &candidates {
            apply(&mut trial, cand);
        }
        let obj = self.objective(&trial, lambda1, lambda2, w);
        if obj <= *current_obj + slack {
            *state = trial;
            *current_obj = obj.min(*current_obj);
            return true;
        }
        let mut changed = false;
        for cand in candidates {
            let mut trial = state.clone();
            apply(&mut trial, cand);
            let obj = self.objective(&trial, lambda1, lambda2, w);
            let tiny = matches!(cand.1, GroupClass::Zero) && group_norm(state.group(cand.0)) < hard_cut;
            if obj <= *current_obj + slack || tiny {
                *state = trial;
                *current_obj = obj.min(*current_obj);
                changed = true;
            }
        }
        changed
    }

    #[allow(clippy::too_many_arguments)]
    fn lqa_loop(
        &self,
        state: &mut CoefState,
        trace: &mut Vec<f64>,
        scale: f64,
        collapse: bool,
        lambda1: f64,
        lambda2: f64,
        w: &PenaltyWeights,
        cfg: &SolverConfig,
        max_iter: usize,
        jitter: &mut usize,
    ) -> (usize, bool) {
        let floor = 1e-300_f64.max(1e-14 * scale);
        let mut obj = *trace.last().unwrap();
        for it in 1..=max_iter {
            if self.reclassify(state, &mut obj, scale, collapse, lambda1, lambda2, w, cfg) {
                trace.push(obj);
            }
            let slots = self.slots_for(state, lambda1, lambda2, w, floor);
            let theta = self.solve(&slots, jitter);
            let next = self.expand(&slots, &theta);
            let next_obj = self.objective(&next, lambda1, lambda2, w);
            if !(next_obj <= obj) {
                // Rounding-level increase: the majorizer can make no progress.
                return (it, true);
            }
            let diff: f64 = next
                .values()
                .iter()
                .zip(state.values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let size = group_norm(state.values()).max(1e-300);
            let obj_change = (obj - next_obj).abs();
            *state = next;
            obj = next_obj;
            trace.push(obj);
            if diff <= cfg.tol * size || obj_change <= cfg.obj_tol * obj.abs().max(1e-300) {
                return (it, true);
            }
        }
        (max_iter, false)
    }

    fn run(
        &self,
        lambda1: f64,
        lambda2: f64,
        w: &PenaltyWeights,
        cfg: &SolverConfig,
        warm: Option<&CoefState>,
        collapse: bool,
    ) -> FitResult {
        let mut jitter = 0;
        let mut state = self.initial_state(lambda1, lambda2, w, cfg, warm, &mut jitter);
        let scale = (group_norm(state.values()) / (self.p() as f64).sqrt()).max(1.0);
        let mut trace = vec![self.objective(&state, lambda1, lambda2, w)];
        let (mut n_iter, _) =
            self.lqa_loop(&mut state, &mut trace, scale, collapse, lambda1, lambda2, w, cfg, cfg.max_iter, &mut jitter);

        let mut kkt = self.group_kkts(&state, lambda1, lambda2, w).into_iter().fold(0.0, f64::max);
        if kkt > cfg.kkt_tol {
            // Finish with exact block updates; these also revisit screened
            // and dropped groups.
            let (sweeps, k) = self.polish(&mut state, &mut trace, lambda1, lambda2, w, collapse, cfg);
            n_iter += sweeps;
            kkt = k;
        }

        let rss = residual(self.y, self.design, &state).norm_squared();
        let converged = kkt <= cfg.kkt_tol;
        FitResult {
            coef: state,
            lambda1,
            lambda2,
            weights: w.clone(),
            rss,
            n_iter,
            converged,
            kkt,
            objective_trace: trace,
            jitter_events: jitter,
        }
    }

    /// Block coordinate descent until the KKT certificate holds, at most
    /// `polish_iter` sweeps. Returns the sweep count and the final residual.
    #[allow(clippy::too_many_arguments)]
    fn polish(
        &self,
        state: &mut CoefState,
        trace: &mut Vec<f64>,
        lambda1: f64,
        lambda2: f64,
        w: &PenaltyWeights,
        collapse: bool,
        cfg: &SolverConfig,
    ) -> (usize, f64) {
        let n = self.n();
        let blocks: Vec<_> = (0..self.p()).map(|j| self.design.block(j)).collect();
        let mut r = residual(self.y, self.design, state);
        let scaled = |j: usize| w.scaled(j, n, lambda1, lambda2);
        let mut kkt = f64::INFINITY;
        let mut last = *trace.last().unwrap();
        let mut stop = |s: &CoefState, _: &DVector<f64>| {
            let obj = self.objective(s, lambda1, lambda2, w);
            trace.push(obj);
            kkt = self.group_kkts(s, lambda1, lambda2, w).into_iter().fold(0.0, f64::max);
            let stalled = obj >= last;
            last = obj;
            kkt <= 0.5 * cfg.kkt_tol || stalled
        };
        let sweeps = crate::bcd::descend(
            &blocks,
            &self.grams,
            &mut r,
            state,
            &scaled,
            w,
            collapse,
            cfg.polish_iter,
            &mut stop,
        );
        (sweeps, kkt)
    }

    /// One majorize-minimize update on the current structure.
    pub fn lqa_step(
        &self,
        current: &CoefState,
        lambda1: f64,
        lambda2: f64,
        w: &PenaltyWeights,
        cfg: &SolverConfig,
    ) -> Result<CoefState> {
        self.check_inputs(lambda1, lambda2, w, cfg)?;
        if current.p() != self.p() || current.k() != self.k() {
            return Err(Error::dims("current state does not match the design"));
        }
        let mut jitter = 0;
        let slots = self.slots_for(current, lambda1, lambda2, w, f64::MIN_POSITIVE);
        let theta = self.solve(&slots, &mut jitter);
        Ok(self.expand(&slots, &theta))
    }

    /// Unpenalized least squares on a fixed zero / constant / varying structure.
    pub fn fit_constrained_ls(&self, structure: &[GroupClass]) -> Result<FitResult> {
        if structure.len() != self.p() {
            return Err(Error::dims(format!(
                "structure has {} entries for {} groups",
                structure.len(),
                self.p()
            )));
        }
        let slots: Vec<Slot> = structure
            .iter()
            .enumerate()
            .filter_map(|(j, c)| match c {
                GroupClass::Zero => None,
                GroupClass::Constant(_) => Some(Slot::Constant { group: j, d: 0.0 }),
                GroupClass::Varying => Some(Slot::Varying { group: j, a: 0.0, c: 0.0 }),
            })
            .collect();
        let mut jitter = 0;
        let theta = self.solve(&slots, &mut jitter);
        let state = self.expand(&slots, &theta);
        let weights = PenaltyWeights {
            w1: vec![1.0; self.p()],
            w2: vec![1.0; self.p()],
            forced_zero: structure.iter().map(|c| c.is_zero()).collect(),
            forced_constant: structure
                .iter()
                .map(|c| matches!(c, GroupClass::Constant(_)))
                .collect(),
        };
        let rss = residual(self.y, self.design, &state).norm_squared();
        let kkt = self.group_kkts(&state, 0.0, 0.0, &weights).into_iter().fold(0.0, f64::max);
        Ok(FitResult {
            coef: state,
            lambda1: 0.0,
            lambda2: 0.0,
            weights,
            rss,
            n_iter: 1,
            converged: jitter == 0,
            kkt,
            objective_trace: vec![0.5 * rss],
            jitter_events: jitter,
        })
    }
}

/// Cholesky solve, retrying with growing diagonal jitter if the matrix is not
/// numerically positive definite.
fn spd_solve(mut lhs: DMatrix<f64>, rhs: DVector<f64>, jitter: &mut usize) -> DVector<f64> {
    let m = lhs.nrows();
    let trace = lhs.trace().abs().max(f64::MIN_POSITIVE);
    let mut bump = 1e-10 * trace;
    loop {
        if let Some(ch) = lhs.clone().cholesky() {
            let sol = ch.solve(&rhs);
            if sol.iter().all(|v| v.is_finite()) {
                return sol;
            }
        }
        *jitter += 1;
        for i in 0..m {
            lhs[(i, i)] += bump;
        }
        bump *= 100.0;
    }
}

/// Minimizes `0.5||y - Zb||^2 + n*l1*sum w1_j||b_j|| + n*l2*sum w2_j||b_j||_c`
/// by locally quadratic approximation with zero / constant tracking.
///
/// A fit that fails to settle within `cfg.max_iter` iterations, or whose KKT
/// residual stays above `cfg.kkt_tol`, is returned with `converged = false`.
pub fn fit_double_penalty(
    y: &[f64],
    design: &GroupedDesign,
    lambda1: f64,
    lambda2: f64,
    w: &PenaltyWeights,
    cfg: &SolverConfig,
    warm: Option<&CoefState>,
) -> Result<FitResult> {
    Problem::new(y, design)?.fit_double_penalty(lambda1, lambda2, w, cfg, warm)
}

/// Group-Lasso initial estimator: unit weights, single penalty `lambda0`.
pub fn fit_group_lasso(y: &[f64], design: &GroupedDesign, lambda0: f64, cfg: &SolverConfig) -> Result<FitResult> {
    Problem::new(y, design)?.fit_group_lasso(lambda0, cfg, None)
}

pub fn lqa_step(
    y: &[f64],
    design: &GroupedDesign,
    current: &CoefState,
    lambda1: f64,
    lambda2: f64,
    w: &PenaltyWeights,
    cfg: &SolverConfig,
) -> Result<CoefState> {
    Problem::new(y, design)?.lqa_step(current, lambda1, lambda2, w, cfg)
}

/// Adaptive weights `w1_j = 1/||b_j||`, `w2_j = 1/||b_j||_c` from an initial fit.
/// Groups with a zero norm are forced to zero; groups with a zero centered norm
/// are forced constant. Norms at or below `floor` count as zero.
pub fn compute_adaptive_weights(initial: &FitResult, floor: f64) -> PenaltyWeights {
    let coef = &initial.coef;
    let p = coef.p();
    let mut w = PenaltyWeights {
        w1: vec![f64::INFINITY; p],
        w2: vec![f64::INFINITY; p],
        forced_zero: vec![false; p],
        forced_constant: vec![false; p],
    };
    for j in 0..p {
        let g = coef.group(j);
        let norm = group_norm(g);
        if coef.class(j).is_zero() || norm <= floor {
            w.forced_zero[j] = true;
            continue;
        }
        w.w1[j] = 1.0 / norm;
        let cnorm = centered_norm(g);
        if matches!(coef.class(j), GroupClass::Constant(_)) || cnorm <= floor {
            w.forced_constant[j] = true;
        } else {
            w.w2[j] = 1.0 / cnorm;
        }
    }
    w
}

/// Least squares with a known structure: varying groups keep `K` columns,
/// constant groups contribute their collapsed column, zero groups are dropped.
pub fn fit_constrained_ls(
    y: &[f64],
    design: &GroupedDesign,
    structure: &[GroupClass],
    spec: &BasisSpec,
) -> Result<FitResult> {
    if spec.dim() != design.k() {
        return Err(Error::dims(format!(
            "basis has dimension {}, design was built with {}",
            spec.dim(),
            design.k()
        )));
    }
    Problem::new(y, design)?.fit_constrained_ls(structure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::objective;
    use crate::spline::{build_design, make_knots};
    use crate::tuning::lambda1_max;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(n: usize, p: usize, n_internal: usize, seed: u64) -> (Vec<f64>, GroupedDesign) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(-2.0..2.0) });
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let s = (6.0 * t[i]).sin();
                s + 1.5 * x[(i, 1.min(p - 1))] + 0.3 * rng.random_range(-1.0..1.0)
            })
            .collect();
        let design = build_design(&x, &t, &make_knots(n_internal, 4).unwrap()).unwrap();
        (y, design)
    }

    #[test]
    fn zero_penalty_matches_normal_equations() {
        let (y, d) = random_problem(60, 3, 1, 1);
        let fit = fit_double_penalty(&y, &d, 0.0, 0.0, &PenaltyWeights::unit(3), &SolverConfig::default(), None).unwrap();
        let z = d.z();
        let beta = (z.transpose() * z)
            .lu()
            .solve(&(z.transpose() * DVector::from_column_slice(&y)))
            .unwrap();
        for (a, b) in fit.coef.values().iter().zip(beta.iter()) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn penalty_above_max_kills_everything() {
        let (y, d) = random_problem(50, 4, 2, 2);
        let w = PenaltyWeights::unit(4);
        let lmax = lambda1_max(&y, &d, &w);
        for l in [lmax, 2.0 * lmax] {
            let fit = fit_double_penalty(&y, &d, l, 0.3, &w, &SolverConfig::default(), None).unwrap();
            assert!(fit.coef.classes().iter().all(|c| c.is_zero()));
            assert!(fit.converged);
        }
        let fit = fit_double_penalty(&y, &d, 0.9 * lmax, 0.0, &w, &SolverConfig::default(), None).unwrap();
        assert!(fit.coef.classes().iter().any(|c| !c.is_zero()));
    }

    #[test]
    fn lqa_step_never_increases_objective() {
        let cfg = SolverConfig::default();
        for seed in 0..100 {
            let (y, d) = random_problem(40, 3, 2, 100 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = d.k();
            let w = PenaltyWeights {
                w1: (0..3).map(|_| rng.random_range(0.5..2.0)).collect(),
                w2: (0..3).map(|_| rng.random_range(0.5..2.0)).collect(),
                forced_zero: vec![false; 3],
                forced_constant: vec![false; 3],
            };
            let vals: Vec<f64> = (0..3 * k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b = CoefState::from_values(vals, k).unwrap();
            let (l1, l2) = (rng.random_range(0.0..0.3), rng.random_range(0.0..0.3));
            let next = lqa_step(&y, &d, &b, l1, l2, &w, &cfg).unwrap();
            let before = objective(&y, &d, &b, l1, l2, &w).unwrap();
            let after = objective(&y, &d, &next, l1, l2, &w).unwrap();
            assert!(after <= before + 1e-10 * before.abs(), "seed {seed}: {after} > {before}");
        }
    }

    #[test]
    fn solution_is_a_fixed_point_of_the_step() {
        let (y, d) = random_problem(80, 3, 3, 5);
        let w = PenaltyWeights::unit(3);
        let cfg = SolverConfig::default();
        let fit = fit_double_penalty(&y, &d, 0.01, 0.01, &w, &cfg, None).unwrap();
        assert!(fit.converged);
        let next = lqa_step(&y, &d, &fit.coef, 0.01, 0.01, &w, &cfg).unwrap();
        let diff: f64 = next
            .values()
            .iter()
            .zip(fit.coef.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-4 * group_norm(fit.coef.values()), "{diff}");
    }

    #[test]
    fn traces_are_monotone_and_warm_start_agrees() {
        let (y, d) = random_problem(70, 5, 4, 9);
        let w = PenaltyWeights::unit(5);
        let cfg = SolverConfig::default();
        let problem = Problem::new(&y, &d).unwrap();
        let first = problem.fit_double_penalty(0.05, 0.02, &w, &cfg, None).unwrap();
        let cold = problem.fit_double_penalty(0.03, 0.02, &w, &cfg, None).unwrap();
        let warm = problem.fit_double_penalty(0.03, 0.02, &w, &cfg, Some(&first.coef)).unwrap();
        for f in [&first, &cold, &warm] {
            assert!(f.converged);
            assert!(f.trace_is_monotone(1e-10));
        }
        let rel = (cold.objective() - warm.objective()).abs() / cold.objective();
        assert!(rel <= 1e-8, "{rel}");
    }

    #[test]
    fn adaptive_weight_examples() {
        let fit_of = |vals: Vec<f64>| FitResult {
            coef: CoefState::from_values(vals, 4).unwrap(),
            lambda1: 0.0,
            lambda2: 0.0,
            weights: PenaltyWeights::unit(1),
            rss: 0.0,
            n_iter: 0,
            converged: true,
            kkt: 0.0,
            objective_trace: vec![],
            jitter_events: 0,
        };
        let w = compute_adaptive_weights(&fit_of(vec![2.0; 4]), 0.0);
        assert_eq!(w.w1[0], 0.25);
        assert!(w.forced_constant[0] && !w.forced_zero[0]);
        let w = compute_adaptive_weights(&fit_of(vec![1.0, 0.0, 0.0, 0.0]), 0.0);
        assert_eq!(w.w1[0], 1.0);
        assert!((w.w2[0] - 1.0 / 0.75f64.sqrt()).abs() < 1e-15);
        let w = compute_adaptive_weights(&fit_of(vec![0.0; 4]), 0.0);
        assert!(w.forced_zero[0]);
        let w = compute_adaptive_weights(&fit_of(vec![1e-9, 0.0, 0.0, 0.0]), 1e-6);
        assert!(w.forced_zero[0]);
    }

    #[test]
    fn forced_groups_respect_their_class() {
        let (y, d) = random_problem(60, 3, 2, 11);
        let w = PenaltyWeights {
            w1: vec![1.0, 1.0, f64::INFINITY],
            w2: vec![f64::INFINITY, 1.0, f64::INFINITY],
            forced_zero: vec![false, false, true],
            forced_constant: vec![true, false, false],
        };
        let fit = fit_double_penalty(&y, &d, 0.001, 0.001, &w, &SolverConfig::default(), None).unwrap();
        assert!(fit.converged);
        assert!(fit.coef.class(0).is_constant());
        assert!(fit.coef.class(2).is_zero());
    }

    #[test]
    fn constrained_ls_recovers_noiseless_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 40;
        let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let y: Vec<f64> = (0..n).map(|i| 0.7 - 1.3 * x[(i, 1)]).collect();
        let spec = make_knots(3, 4).unwrap();
        let d = build_design(&x, &t, &spec).unwrap();
        let structure = [GroupClass::Constant(1.0), GroupClass::Constant(1.0), GroupClass::Zero];
        let fit = fit_constrained_ls(&y, &d, &structure, &spec).unwrap();
        assert!(fit.converged);
        assert!(matches!(fit.coef.class(0), GroupClass::Constant(c) if (c - 0.7).abs() < 1e-8));
        assert!(matches!(fit.coef.class(1), GroupClass::Constant(c) if (c + 1.3).abs() < 1e-8));
        assert!(fit.coef.class(2).is_zero());
        let wrong = make_knots(2, 4).unwrap();
        assert!(fit_constrained_ls(&y, &d, &structure, &wrong).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let (y, d) = random_problem(30, 2, 1, 3);
        let w = PenaltyWeights::unit(2);
        let cfg = SolverConfig::default();
        assert!(fit_double_penalty(&y, &d, -1.0, 0.0, &w, &cfg, None).is_err());
        assert!(fit_double_penalty(&y, &d, f64::NAN, 0.0, &w, &cfg, None).is_err());
        assert!(fit_double_penalty(&y[..10], &d, 0.1, 0.0, &w, &cfg, None).is_err());
        assert!(fit_double_penalty(&y, &d, 0.1, 0.0, &PenaltyWeights::unit(3), &cfg, None).is_err());
        let bad = SolverConfig { max_iter: 0, ..cfg };
        assert!(fit_double_penalty(&y, &d, 0.1, 0.0, &w, &bad, None).is_err());
    }

    #[test]
    fn collinear_covariates_stay_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 30;
        let col: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = DMatrix::from_fn(n, 3, |i, j| if j == 0 { 1.0 } else { col[i] });
        let t: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| 1.0 + col[i]).collect();
        let d = build_design(&x, &t, &make_knots(2, 4).unwrap()).unwrap();
        let fit = fit_double_penalty(&y, &d, 0.0, 0.0, &PenaltyWeights::unit(3), &SolverConfig::default(), None).unwrap();
        assert!(fit.coef.values().iter().all(|v| v.is_finite()));
        assert!(fit.rss < 1e-6);
    }
}
