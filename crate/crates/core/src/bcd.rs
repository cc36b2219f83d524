//! Exact block coordinate descent, used to finish fits that the majorizer
//! leaves short of the stationarity tolerance.
//!
//! Each block update minimizes the criterion over one group with the others
//! fixed: the zero and constant candidates are tested through their
//! subgradient conditions and otherwise a damped Newton iteration solves the
//! smooth varying case.

use nalgebra::{DMatrix, DVector};

use crate::penalty::{centered_norm, group_norm, mean, CoefState, PenaltyWeights};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum BlockSolution {
    Zero,
    Constant(f64),
    Varying(Vec<f64>),
}

/// Distance from `g` to `{B Q_L v : ||v|| <= 1}`.
fn dist_to_centered_ball(g: &[f64], b: f64) -> f64 {
    let m = mean(g);
    let excess = (centered_norm(g) - b).max(0.0);
    (m * m * g.len() as f64 + excess * excess).sqrt()
}

/// `0.5 x'Hx - g'x + a||x|| + b||x||_c`.
fn block_objective(h: &DMatrix<f64>, g0: &[f64], x: &[f64], a: f64, b: f64) -> f64 {
    let k = x.len();
    let mut quad = 0.0;
    for i in 0..k {
        let mut row = 0.0;
        for l in 0..k {
            row += h[(i, l)] * x[l];
        }
        quad += x[i] * row;
    }
    let lin: f64 = g0.iter().zip(x).map(|(g, v)| g * v).sum();
    0.5 * quad - lin + a * group_norm(x) + b * centered_norm(x)
}

/// Minimizes the block criterion above. `h` is `Z_j'Z_j`, `g0 = Z_j'(r + Z_j b_j)`.
pub(crate) fn solve_block(
    h: &DMatrix<f64>,
    g0: &[f64],
    start: &[f64],
    a: f64,
    b: f64,
    collapse: bool,
    forced_constant: bool,
) -> BlockSolution {
    let k = g0.len();
    let kf = k as f64;
    let sum_g: f64 = g0.iter().sum();
    if forced_constant {
        if sum_g.abs() <= a * kf.sqrt() {
            return BlockSolution::Zero;
        }
    } else if dist_to_centered_ball(g0, b) <= a {
        return BlockSolution::Zero;
    }

    let h1: Vec<f64> = (0..k).map(|i| h.row(i).sum()).collect();
    let h11: f64 = h1.iter().sum();
    if forced_constant || collapse {
        let c = if h11 > 0.0 {
            sum_g.signum() * (sum_g.abs() - a * kf.sqrt()).max(0.0) / h11
        } else {
            0.0
        };
        if forced_constant {
            return if c == 0.0 { BlockSolution::Zero } else { BlockSolution::Constant(c) };
        }
        let q: Vec<f64> = g0.iter().zip(&h1).map(|(g, hv)| g - hv * c).collect();
        if c != 0.0 && centered_norm(&q) <= b {
            return BlockSolution::Constant(c);
        }
    }
    BlockSolution::Varying(newton_varying(h, g0, start, a, b))
}

fn newton_varying(h: &DMatrix<f64>, g0: &[f64], start: &[f64], a: f64, b: f64) -> Vec<f64> {
    let k = g0.len();
    let gv = DVector::from_column_slice(g0);
    let trace = h.trace().max(f64::MIN_POSITIVE);
    let mut x = if group_norm(start) > 0.0 && (b == 0.0 || centered_norm(start) > 0.0) {
        DVector::from_column_slice(start)
    } else {
        let reg = h + DMatrix::identity(k, k) * (1e-8 * trace / k as f64);
        let mut x0 = reg
            .cholesky()
            .map(|c| c.solve(&gv))
            .unwrap_or_else(|| gv.clone() / trace);
        if b > 0.0 && centered_norm(x0.as_slice()) == 0.0 {
            x0[0] += 1e-8 * (group_norm(x0.as_slice()) + 1e-8);
        }
        x0
    };
    let scale = group_norm(g0) + a + b + 1e-300;
    let mut fx = block_objective(h, g0, x.as_slice(), a, b);
    for _ in 0..60 {
        let norm = x.norm();
        let m = x.mean();
        let qx = x.add_scalar(-m);
        let cnorm = qx.norm();
        if norm == 0.0 || (b > 0.0 && cnorm == 0.0) {
            break;
        }
        let mut grad = h * &x - &gv + &x * (a / norm);
        let mut hess = h.clone();
        let xh = &x / norm;
        hess += (DMatrix::identity(k, k) - &xh * xh.transpose()) * (a / norm);
        if b > 0.0 {
            grad += &qx * (b / cnorm);
            let u = &qx / cnorm;
            let q = DMatrix::identity(k, k) - DMatrix::from_element(k, k, 1.0 / k as f64);
            hess += (q - &u * u.transpose()) * (b / cnorm);
        }
        if grad.norm() <= 1e-13 * scale {
            break;
        }
        let mut jitter = 1e-12 * hess.trace().abs().max(f64::MIN_POSITIVE);
        let dir = loop {
            if let Some(ch) = hess.clone().cholesky() {
                break -ch.solve(&grad);
            }
            hess += DMatrix::identity(k, k) * jitter;
            jitter *= 100.0;
        };
        let slope = grad.dot(&dir);
        if slope >= 0.0 {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &x + &dir * t;
            let ft = block_objective(h, g0, trial.as_slice(), a, b);
            if ft <= fx + 1e-4 * t * slope {
                x = trial;
                fx = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted || -slope <= 1e-28 * scale * scale {
            break;
        }
    }
    x.as_slice().to_vec()
}

/// Cyclic exact block updates over all groups until `stop` returns true
/// after a sweep or `max_sweeps` is reached. Returns the number of sweeps.
#[allow(clippy::too_many_arguments)]
pub(crate) fn descend(
    z_blocks: &[nalgebra::DMatrixView<'_, f64>],
    grams: &[DMatrix<f64>],
    r: &mut DVector<f64>,
    state: &mut CoefState,
    scaled: &dyn Fn(usize) -> (f64, f64),
    w: &PenaltyWeights,
    collapse: bool,
    max_sweeps: usize,
    stop: &mut dyn FnMut(&CoefState, &DVector<f64>) -> bool,
) -> usize {
    let p = state.p();
    for sweep in 1..=max_sweeps {
        for j in 0..p {
            if w.forced_zero[j] {
                continue;
            }
            let zj = &z_blocks[j];
            let old = state.group(j).to_vec();
            let hb = &grams[j] * DVector::from_column_slice(&old);
            let g0: Vec<f64> = zj
                .tr_mul(r)
                .iter()
                .zip(hb.iter())
                .map(|(u, v)| u + v)
                .collect();
            let (a, b) = scaled(j);
            let sol = solve_block(&grams[j], &g0, &old, a, b, collapse, w.forced_constant[j]);
            let before = block_objective(&grams[j], &g0, &old, a, b);
            let new: Vec<f64> = match &sol {
                BlockSolution::Zero => vec![0.0; old.len()],
                BlockSolution::Constant(c) => vec![*c; old.len()],
                BlockSolution::Varying(v) => v.clone(),
            };
            if block_objective(&grams[j], &g0, &new, a, b) > before {
                continue;
            }
            let delta = DVector::from_iterator(old.len(), new.iter().zip(&old).map(|(n, o)| n - o));
            if delta.iter().all(|d| *d == 0.0) {
                continue;
            }
            r.gemv(-1.0, zj, &delta, 1.0);
            match sol {
                BlockSolution::Zero => state.set_zero(j),
                BlockSolution::Constant(c) => state.set_constant(j, c),
                BlockSolution::Varying(v) => state.set_varying(j, &v),
            }
        }
        if stop(state, r) {
            return sweep;
        }
    }
    max_sweeps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram(k: usize, seed: u64) -> DMatrix<f64> {
        let m = DMatrix::from_fn(3 * k, k, |i, j| (((i * 7 + j * 13) as u64 * 2654435761 + seed) % 1000) as f64 / 500.0 - 1.0);
        m.transpose() * m
    }

    fn brute_min(h: &DMatrix<f64>, g0: &[f64], a: f64, b: f64, x: &[f64]) -> bool {
        // no coordinate perturbation lowers the objective
        let f0 = block_objective(h, g0, x, a, b);
        for i in 0..x.len() {
            for s in [1e-4, -1e-4] {
                let mut y = x.to_vec();
                y[i] += s;
                if block_objective(h, g0, &y, a, b) < f0 - 1e-12 {
                    return false;
                }
            }
        }
        let mut y = x.to_vec();
        let m = mean(x);
        for v in &mut y {
            *v = m + 1.0001 * (*v - m);
        }
        block_objective(h, g0, &y, a, b) >= f0 - 1e-12
    }

    #[test]
    fn large_penalty_gives_zero() {
        let h = gram(4, 1);
        assert_eq!(solve_block(&h, &[1.0, 2.0, -1.0, 0.5], &[0.0; 4], 10.0, 0.0, true, false), BlockSolution::Zero);
    }

    #[test]
    fn constant_when_centered_penalty_dominates() {
        let h = gram(4, 2);
        let g = [3.0, 3.2, 2.9, 3.1];
        match solve_block(&h, &g, &[0.0; 4], 0.1, 50.0, true, false) {
            BlockSolution::Constant(c) => assert!(c > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn varying_solution_is_a_minimum() {
        for seed in 0..20 {
            let h = gram(5, seed);
            let g: Vec<f64> = (0..5).map(|i| ((i as f64 + seed as f64) * 1.7).sin() * 4.0).collect();
            let (a, b) = (0.3, 0.4);
            if let BlockSolution::Varying(x) = solve_block(&h, &g, &[0.0; 5], a, b, true, false) {
                assert!(brute_min(&h, &g, a, b, &x), "seed {seed}");
            }
        }
    }
}
