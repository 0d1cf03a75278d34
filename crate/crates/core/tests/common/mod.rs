#![allow(dead_code)]

use std::sync::Arc;

use phasemix::action_angle::{ChartSpec, OrbitChart};
use phasemix::moments::{SpatialGrid, VelocityQuadrature};
use phasemix::potential::PotentialParams;
use phasemix::transport::{ActionAngleSolution, InitialData};

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn chart(epsilon: f64, n_k: usize, n_chi: usize) -> Arc<OrbitChart> {
    let params = PotentialParams::new(epsilon).unwrap();
    Arc::new(OrbitChart::build(&params, ChartSpec::for_support(0.5, 0.05, n_k, n_chi)).unwrap())
}

/// The reference data `c_s = 0.5`, `m = 1` on a default-resolution chart.
pub fn data(epsilon: f64, alpha: f64) -> InitialData {
    InitialData::new(0.5, alpha, 1, chart(epsilon, 64, 256)).unwrap()
}

pub fn solution(epsilon: f64, alpha: f64) -> ActionAngleSolution {
    ActionAngleSolution { f0: data(epsilon, alpha) }
}

pub fn grid(epsilon: f64, points: usize) -> SpatialGrid {
    SpatialGrid::for_support(&PotentialParams::new(epsilon).unwrap(), 0.5, points).unwrap()
}

pub fn quad(nodes: usize) -> VelocityQuadrature {
    VelocityQuadrature::new(nodes).unwrap()
}
