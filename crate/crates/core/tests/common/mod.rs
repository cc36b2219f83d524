#![allow(dead_code)]

use nalgebra::DMatrix;
use serde::Deserialize;
use vcselect::{build_design, make_knots, GroupedDesign, PenaltyWeights};

#[derive(Debug, Deserialize)]
pub struct OracleFixture {
    pub n: usize,
    pub p: usize,
    pub order: usize,
    pub n_internal: usize,
    pub cases: Vec<OracleCase>,
}

#[derive(Debug, Deserialize)]
pub struct OracleCase {
    pub x: Vec<Vec<f64>>,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub objective: f64,
    pub coef: Vec<f64>,
    pub status: String,
}

impl OracleCase {
    pub fn design(&self, fx: &OracleFixture) -> GroupedDesign {
        let x = DMatrix::from_fn(fx.n, fx.p, |i, j| self.x[i][j]);
        let spec = make_knots(fx.n_internal, fx.order).unwrap();
        build_design(&x, &self.t, &spec).unwrap()
    }

    pub fn weights(&self) -> PenaltyWeights {
        PenaltyWeights {
            w1: self.w1.clone(),
            w2: self.w2.clone(),
            forced_zero: vec![false; self.w1.len()],
            forced_constant: vec![false; self.w1.len()],
        }
    }
}

pub fn load_oracle() -> OracleFixture {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/convex_oracle.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
