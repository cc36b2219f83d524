//! Group norms, the doubly penalized least-squares objective and its KKT
//! stationarity residuals.
//!
//! For a coefficient group `b_j` of length `K` the objective charges
//! `n*lambda1*w1_j*||b_j|| + n*lambda2*w2_j*||b_j||_c`, where `||.||_c` is the
//! distance from `b_j` to the span of the all-ones vector.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::GroupedDesign;

/// Euclidean norm.
pub fn group_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn mean(a: &[f64]) -> f64 {
    if a.is_empty() {
        0.0
    } else {
        a.iter().sum::<f64>() / a.len() as f64
    }
}

/// `||a - mean(a) * 1||`, i.e. `||Q_L a||` with `Q_L = I - 11'/K`.
pub fn centered_norm(a: &[f64]) -> f64 {
    // the rounded mean of identical entries need not equal them
    if a.iter().all(|v| *v == a[0]) {
        return 0.0;
    }
    let m = mean(a);
    a.iter().map(|v| (v - m) * (v - m)).sum::<f64>().sqrt()
}

/// Classification of one coefficient group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GroupClass {
    Varying,
    Constant(f64),
    Zero,
}

impl GroupClass {
    pub fn is_zero(&self) -> bool {
        matches!(self, GroupClass::Zero)
    }

    /// Constant with a nonzero value.
    pub fn is_constant(&self) -> bool {
        matches!(self, GroupClass::Constant(c) if *c != 0.0)
    }

    pub fn is_varying(&self) -> bool {
        matches!(self, GroupClass::Varying)
    }

    pub fn label(&self) -> &'static str {
        match self {
            GroupClass::Varying => "varying",
            GroupClass::Constant(_) => "constant",
            GroupClass::Zero => "zero",
        }
    }
}

/// `p` coefficient groups of length `K` with their classifications.
///
/// A `Zero` group holds exact zeros and a `Constant(c)` group holds `c` in
/// every entry; the setters maintain this.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefState {
    k: usize,
    values: Vec<f64>,
    class: Vec<GroupClass>,
}

impl CoefState {
    pub fn zeros(p: usize, k: usize) -> Self {
        CoefState {
            k,
            values: vec![0.0; p * k],
            class: vec![GroupClass::Zero; p],
        }
    }

    /// Builds a state from flat group-major values, classifying groups that
    /// are exactly zero or exactly constant.
    pub fn from_values(values: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 || values.len() % k != 0 {
            return Err(Error::dims(format!(
                "{} values do not split into groups of {k}",
                values.len()
            )));
        }
        let p = values.len() / k;
        let mut state = CoefState::zeros(p, k);
        for j in 0..p {
            let g = &values[j * k..(j + 1) * k];
            if g.iter().all(|&v| v == 0.0) {
                state.set_zero(j);
            } else if g.iter().all(|&v| v == g[0]) {
                state.set_constant(j, g[0]);
            } else {
                state.set_varying(j, g);
            }
        }
        Ok(state)
    }

    pub fn p(&self) -> usize {
        self.class.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn group(&self, j: usize) -> &[f64] {
        &self.values[j * self.k..(j + 1) * self.k]
    }

    pub fn class(&self, j: usize) -> GroupClass {
        self.class[j]
    }

    pub fn classes(&self) -> &[GroupClass] {
        &self.class
    }

    pub fn set_varying(&mut self, j: usize, group: &[f64]) {
        self.values[j * self.k..(j + 1) * self.k].copy_from_slice(group);
        self.class[j] = GroupClass::Varying;
    }

    /// `Constant(0)` is stored as `Zero`.
    pub fn set_constant(&mut self, j: usize, c: f64) {
        if c == 0.0 {
            self.set_zero(j);
            return;
        }
        self.values[j * self.k..(j + 1) * self.k].fill(c);
        self.class[j] = GroupClass::Constant(c);
    }

    pub fn set_zero(&mut self, j: usize) {
        self.values[j * self.k..(j + 1) * self.k].fill(0.0);
        self.class[j] = GroupClass::Zero;
    }

    /// Whether the stored values agree with the classifications.
    pub fn is_consistent(&self) -> bool {
        (0..self.p()).all(|j| match self.class[j] {
            GroupClass::Zero => self.group(j).iter().all(|&v| v == 0.0),
            GroupClass::Constant(c) => c != 0.0 && self.group(j).iter().all(|&v| v == c),
            GroupClass::Varying => true,
        })
    }

    pub fn count(&self, pred: impl Fn(&GroupClass) -> bool) -> usize {
        self.class.iter().filter(|c| pred(c)).count()
    }
}

/// Per-group adaptive weights plus groups pinned at zero or at a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub forced_zero: Vec<bool>,
    pub forced_constant: Vec<bool>,
}

impl PenaltyWeights {
    /// All weights one, nothing forced.
    pub fn unit(p: usize) -> Self {
        PenaltyWeights {
            w1: vec![1.0; p],
            w2: vec![1.0; p],
            forced_zero: vec![false; p],
            forced_constant: vec![false; p],
        }
    }

    pub fn p(&self) -> usize {
        self.w1.len()
    }

    /// Checks lengths and that every weight that can matter is finite and
    /// positive.
    pub fn validate(&self, p: usize) -> Result<()> {
        if [self.w2.len(), self.forced_zero.len(), self.forced_constant.len(), self.w1.len()]
            .iter()
            .any(|&len| len != p)
        {
            return Err(Error::dims(format!("weights do not all have length {p}")));
        }
        for j in 0..p {
            if self.forced_zero[j] {
                continue;
            }
            let ok = |w: f64| w.is_finite() && w > 0.0;
            if !ok(self.w1[j]) || (!self.forced_constant[j] && !ok(self.w2[j])) {
                return Err(Error::InvalidConfig(format!(
                    "weights for group {j} must be finite and positive (w1 = {}, w2 = {})",
                    self.w1[j], self.w2[j]
                )));
            }
        }
        Ok(())
    }

    /// Penalty multipliers `(n*lambda1*w1_j, n*lambda2*w2_j)` for group `j`,
    /// zero where the group is forced so no infinite weight leaks out.
    pub(crate) fn scaled(&self, j: usize, n: usize, lambda1: f64, lambda2: f64) -> (f64, f64) {
        let nf = n as f64;
        let a = if self.forced_zero[j] { 0.0 } else { nf * lambda1 * self.w1[j] };
        let b = if self.forced_zero[j] || self.forced_constant[j] {
            0.0
        } else {
            nf * lambda2 * self.w2[j]
        };
        (a, b)
    }
}

fn check_dims(y: &[f64], design: &GroupedDesign, b: &CoefState, w: &PenaltyWeights) -> Result<()> {
    if y.len() != design.n() {
        return Err(Error::dims(format!(
            "y has {} entries, design has {} rows",
            y.len(),
            design.n()
        )));
    }
    if b.p() != design.p() || b.k() != design.k() {
        return Err(Error::dims(format!(
            "coefficients are {}x{}, design is {}x{}",
            b.p(),
            b.k(),
            design.p(),
            design.k()
        )));
    }
    if w.p() != design.p() {
        return Err(Error::dims(format!(
            "{} weights for {} groups",
            w.p(),
            design.p()
        )));
    }
    Ok(())
}

/// `y - Z b`, skipping zero groups.
pub fn residual(y: &[f64], design: &GroupedDesign, b: &CoefState) -> DVector<f64> {
    let mut r = DVector::from_column_slice(y);
    for j in 0..b.p() {
        if b.class(j).is_zero() {
            continue;
        }
        let g = DVector::from_column_slice(b.group(j));
        r.gemv(-1.0, &design.block(j), &g, 1.0);
    }
    r
}

/// Penalty part of the objective.
pub fn penalty_value(b: &CoefState, n: usize, lambda1: f64, lambda2: f64, w: &PenaltyWeights) -> f64 {
    (0..b.p())
        .map(|j| {
            let (a, c) = w.scaled(j, n, lambda1, lambda2);
            let g = b.group(j);
            let mut v = 0.0;
            if a != 0.0 {
                v += a * group_norm(g);
            }
            if c != 0.0 {
                v += c * centered_norm(g);
            }
            v
        })
        .sum()
}

/// `0.5 ||y - Z b||^2 + n l1 sum w1_j ||b_j|| + n l2 sum w2_j ||b_j||_c`.
pub fn objective(
    y: &[f64],
    design: &GroupedDesign,
    b: &CoefState,
    lambda1: f64,
    lambda2: f64,
    w: &PenaltyWeights,
) -> Result<f64> {
    check_dims(y, design, b, w)?;
    let r = residual(y, design, b);
    Ok(0.5 * r.norm_squared() + penalty_value(b, design.n(), lambda1, lambda2, w))
}

/// Distance from `h` to `{B * Q_L v : ||v|| <= 1}`.
fn dist_to_centered_ball(h: &[f64], radius: f64) -> f64 {
    let k = h.len() as f64;
    let m = mean(h);
    let along_ones_sq = m * m * k;
    let excess = (centered_norm(h) - radius).max(0.0);
    (along_ones_sq + excess * excess).sqrt()
}

/// Scaled stationarity violation of one group given `g = Z_j' r`.
pub(crate) fn group_kkt(
    g: &[f64],
    group: &[f64],
    class: GroupClass,
    a: f64,
    b: f64,
    forced_zero: bool,
    forced_constant: bool,
    n: usize,
) -> f64 {
    let nf = n as f64;
    let k = g.len() as f64;
    if forced_zero {
        return 0.0;
    }
    let sum_g: f64 = g.iter().sum();
    let class = match class {
        GroupClass::Constant(c) if c == 0.0 => GroupClass::Zero,
        other => other,
    };
    match class {
        GroupClass::Zero => {
            if forced_constant {
                (sum_g.abs() - a * k.sqrt()).max(0.0) / nf
            } else {
                (dist_to_centered_ball(g, b) - a).max(0.0) / nf
            }
        }
        GroupClass::Constant(c) => {
            let along = (sum_g - a * k.sqrt() * c.signum()).abs() / nf;
            if forced_constant {
                along
            } else {
                let m = sum_g / k;
                let centered = g.iter().map(|v| (v - m) * (v - m)).sum::<f64>().sqrt();
                along.max((centered - b).max(0.0) / nf)
            }
        }
        GroupClass::Varying => {
            let norm = group_norm(group);
            let cnorm = centered_norm(group);
            let m = mean(group);
            let h: Vec<f64> = g
                .iter()
                .zip(group)
                .map(|(gi, bi)| if norm > 0.0 { gi - a * bi / norm } else { *gi })
                .collect();
            if b == 0.0 {
                group_norm(&h) / nf
            } else if cnorm > 0.0 {
                let v: Vec<f64> = h
                    .iter()
                    .zip(group)
                    .map(|(hi, bi)| hi - b * (bi - m) / cnorm)
                    .collect();
                group_norm(&v) / nf
            } else {
                dist_to_centered_ball(&h, b) / nf
            }
        }
    }
}

/// Per-group scaled KKT violations, `Z_j' r` computed from the full design.
pub fn kkt_group_residuals(
    y: &[f64],
    design: &GroupedDesign,
    b: &CoefState,
    lambda1: f64,
    lambda2: f64,
    w: &PenaltyWeights,
) -> Result<Vec<f64>> {
    check_dims(y, design, b, w)?;
    let r = residual(y, design, b);
    let n = design.n();
    Ok((0..b.p())
        .map(|j| {
            let g = design.block(j).tr_mul(&r);
            let (a, c) = w.scaled(j, n, lambda1, lambda2);
            group_kkt(
                g.as_slice(),
                b.group(j),
                b.class(j),
                a,
                c,
                w.forced_zero[j],
                w.forced_constant[j],
                n,
            )
        })
        .collect())
}

/// Largest scaled KKT violation over all groups; zero exactly at a global
/// minimizer of [`objective`].
pub fn kkt_residual(
    y: &[f64],
    design: &GroupedDesign,
    b: &CoefState,
    lambda1: f64,
    lambda2: f64,
    w: &PenaltyWeights,
) -> Result<f64> {
    Ok(kkt_group_residuals(y, design, b, lambda1, lambda2, w)?
        .into_iter()
        .fold(0.0, f64::max))
}
