//! B-spline bases on `[0, 1]` and the grouped varying-coefficient design.
//!
//! Knots are equally spaced with both boundary knots repeated `order` times,
//! so the basis is a partition of unity and a coefficient group represents a
//! constant function exactly when all of its entries are equal.

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};

/// Order, knot vector and dimension of a clamped B-spline basis on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    order: usize,
    n_internal: usize,
    knots: Vec<f64>,
}

impl BasisSpec {
    /// Polynomial order (degree + 1).
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_internal(&self) -> usize {
        self.n_internal
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, `n_internal + order`.
    pub fn dim(&self) -> usize {
        self.n_internal + self.order
    }

    /// Spec with `dim` basis functions of the given order.
    pub fn with_dim(dim: usize, order: usize) -> Result<Self> {
        if dim < order {
            return Err(Error::InvalidBasis(format!(
                "basis dimension {dim} is smaller than the order {order}"
            )));
        }
        make_knots(dim - order, order)
    }

    /// Index `i` of the knot span `[knots[i], knots[i+1])` containing `t`.
    /// `t = 1` falls into the last non-empty span.
    fn span(&self, t: f64) -> usize {
        let last = self.dim() - 1;
        if t >= self.knots[self.dim()] {
            return last;
        }
        // knots[order-1] = 0 <= t < 1 = knots[dim]
        let mut lo = self.order - 1;
        let mut hi = self.dim();
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Writes the `order` possibly-nonzero basis values at `t` into `out`
    /// and returns the index of the first of them.
    fn eval_local(&self, t: f64, out: &mut [f64], left: &mut [f64], right: &mut [f64]) -> usize {
        let d = self.order;
        let span = self.span(t);
        out[0] = 1.0;
        for j in 1..d {
            left[j] = t - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { out[r] / denom };
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        span + 1 - d
    }

    fn eval_unchecked(&self, t: f64, values: &mut [f64], scratch: &mut Scratch) {
        values.iter_mut().for_each(|v| *v = 0.0);
        let first = self.eval_local(t, &mut scratch.local, &mut scratch.left, &mut scratch.right);
        values[first..first + self.order].copy_from_slice(&scratch.local);
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            local: vec![0.0; self.order],
            left: vec![0.0; self.order],
            right: vec![0.0; self.order],
        }
    }
}

struct Scratch {
    local: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

fn check_unit(what: &str, t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::NonFinite(format!("{what} = {t}")));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange {
            what: what.to_string(),
            value: t,
        });
    }
    Ok(())
}

/// Equally spaced clamped knot vector with `n_internal` interior knots at
/// `k / (n_internal + 1)`.
pub fn make_knots(n_internal: usize, order: usize) -> Result<BasisSpec> {
    if order < 1 {
        return Err(Error::InvalidBasis("order must be at least 1".into()));
    }
    let mut knots = Vec::with_capacity(n_internal + 2 * order);
    knots.extend(std::iter::repeat_n(0.0, order));
    let denom = (n_internal + 1) as f64;
    knots.extend((1..=n_internal).map(|k| k as f64 / denom));
    knots.extend(std::iter::repeat_n(1.0, order));
    Ok(BasisSpec {
        order,
        n_internal,
        knots,
    })
}

/// All `K` basis values at `t`.
pub fn eval_basis(spec: &BasisSpec, t: f64) -> Result<Vec<f64>> {
    check_unit("t", t)?;
    let mut values = vec![0.0; spec.dim()];
    spec.eval_unchecked(t, &mut values, &mut spec.scratch());
    Ok(values)
}

/// `sum_k group[k] * B_k(t)` at every grid point.
pub fn eval_coef_function(group: &[f64], spec: &BasisSpec, grid: &[f64]) -> Result<Vec<f64>> {
    if group.len() != spec.dim() {
        return Err(Error::dims(format!(
            "coefficient group has length {}, basis has dimension {}",
            group.len(),
            spec.dim()
        )));
    }
    let mut scratch = spec.scratch();
    grid.iter()
        .map(|&t| {
            check_unit("grid value", t)?;
            let first =
                spec.eval_local(t, &mut scratch.local, &mut scratch.left, &mut scratch.right);
            Ok(scratch
                .local
                .iter()
                .zip(&group[first..first + spec.order])
                .map(|(b, c)| b * c)
                .sum())
        })
        .collect()
}

/// Design matrix `Z = (Z_1, ..., Z_p)` with `Z_j[i, k] = x[i, j] * B_k(t[i])`,
/// together with the raw covariates and index values it was built from.
#[derive(Debug, Clone)]
pub struct GroupedDesign {
    spec: BasisSpec,
    z: DMatrix<f64>,
    x: DMatrix<f64>,
    t: Vec<f64>,
}

impl GroupedDesign {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Basis dimension `K`.
    pub fn k(&self) -> usize {
        self.spec.dim()
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    /// Full `n x pK` design; group `j` occupies columns `j*K .. (j+1)*K`.
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Block `Z_j`.
    pub fn block(&self, j: usize) -> DMatrixView<'_, f64> {
        let k = self.k();
        self.z.columns(j * k, k)
    }

    pub fn raw_x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn index(&self) -> &[f64] {
        &self.t
    }
}

/// Builds the grouped design for covariates `x` (`n x p`) observed at `t`.
pub fn build_design(x: &DMatrix<f64>, t: &[f64], spec: &BasisSpec) -> Result<GroupedDesign> {
    let (n, p) = x.shape();
    if t.len() != n {
        return Err(Error::dims(format!(
            "x has {n} rows but t has {} entries",
            t.len()
        )));
    }
    for (i, &ti) in t.iter().enumerate() {
        check_unit(&format!("t[{i}]"), ti)?;
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("covariate value {bad}")));
    }
    let k = spec.dim();
    let mut z = DMatrix::zeros(n, p * k);
    let mut scratch = spec.scratch();
    for (i, &ti) in t.iter().enumerate() {
        let first = spec.eval_local(ti, &mut scratch.local, &mut scratch.left, &mut scratch.right);
        for j in 0..p {
            let xij = x[(i, j)];
            for (r, b) in scratch.local.iter().enumerate() {
                z[(i, j * k + first + r)] = xij * b;
            }
        }
    }
    Ok(GroupedDesign {
        spec: spec.clone(),
        z,
        x: x.clone(),
        t: t.to_vec(),
    })
}
