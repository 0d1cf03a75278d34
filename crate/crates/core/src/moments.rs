//! Velocity moments of the solution and the potential they generate.
//!
//! With `−∂²ₓφ = ρ` and `φ(0) = ∂ₓφ(0) = 0`,
//! `φ(x) = −∫₀ˣ (x − y) ρ(y) dy` and, by the continuity equation,
//! `∂ₜφ(x) = ∫₀ˣ (j(y) − j(0)) dy`.
//!
//! Cumulative integrals along the grid use a Gauss rule inside each grid
//! interval, so the moments are also sampled between nodes.

use rayon::prelude::*;
use thiserror::Error;

use crate::potential::{PhasePoint, PotentialParams};
use crate::quadrature::GaussRule;
use crate::transport::{Evaluator, TransportError};

pub const MIN_GRID_POINTS: usize = 101;
pub const MIN_VELOCITY_NODES: usize = 64;

/// Gauss points per grid interval in the cumulative `x` integrals.
const SUBNODES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("grid needs an odd number of at least {MIN_GRID_POINTS} points, got {0}")]
    GridCount(usize),
    #[error("grid half-width must be positive and finite, got {0}")]
    GridWidth(f64),
    #[error("velocity quadrature needs at least {MIN_VELOCITY_NODES} nodes, got {0}")]
    VelocityNodes(usize),
    #[error("time step must be positive and finite, got {0}")]
    TimeStep(f64),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Uniform grid on `[−x_max, x_max]` with `0` as its middle node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    nodes: Vec<f64>,
    x_max: f64,
}

impl SpatialGrid {
    pub fn new(x_max: f64, count: usize) -> Result<Self, MomentError> {
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(MomentError::GridWidth(x_max));
        }
        if count < MIN_GRID_POINTS || count % 2 == 0 {
            return Err(MomentError::GridCount(count));
        }
        let half = (count / 2) as f64;
        let nodes = (0..count)
            .map(|i| x_max * (i as f64 - half) / half)
            .collect();
        Ok(Self { nodes, x_max })
    }

    /// Grid reaching the outermost turning point of the support, `Φ(x_max) = 1/c_s`.
    pub fn for_support(params: &PotentialParams, c_s: f64, count: usize) -> Result<Self, MomentError> {
        let x_max = params
            .invert_phi(1.0 / c_s)
            .map_err(|_| MomentError::GridWidth(f64::NAN))?;
        Self::new(x_max, count)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn step(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }

    pub fn center(&self) -> usize {
        self.nodes.len() / 2
    }
}

/// Gauss–Legendre rule applied on each connected velocity interval of the support.
#[derive(Debug, Clone)]
pub struct VelocityQuadrature {
    rule: GaussRule,
}

impl VelocityQuadrature {
    pub fn new(nodes: usize) -> Result<Self, MomentError> {
        if nodes < MIN_VELOCITY_NODES {
            return Err(MomentError::VelocityNodes(nodes));
        }
        Ok(Self {
            rule: GaussRule::new(nodes),
        })
    }

    pub fn nodes(&self) -> usize {
        self.rule.len()
    }

    /// `(∫ f dv, ∫ v f dv)` at `(t, x)`.
    ///
    /// Only `|v|` with `H ∈ [h_lo, h_hi]` can carry mass; when `Φ(x) < h_lo`
    /// that set is two intervals and each gets the full rule.
    pub fn moments<E: Evaluator + ?Sized>(&self, eval: &E, t: f64, x: f64) -> Result<(f64, f64), TransportError> {
        let (h_lo, h_hi) = eval.energy_support();
        let phi = eval.params().phi(x);
        if phi >= h_hi {
            return Ok((0.0, 0.0));
        }
        let v_hi = (2.0 * (h_hi - phi)).sqrt();
        let mut rho = 0.0;
        let mut j = 0.0;
        let mut accumulate = |a: f64, b: f64| -> Result<(), TransportError> {
            for (v, w) in self.rule.mapped(a, b) {
                let f = eval.value(t, PhasePoint::new(x, v))?;
                rho += w * f;
                j += w * v * f;
            }
            Ok(())
        };
        if phi < h_lo {
            let v_lo = (2.0 * (h_lo - phi)).sqrt();
            accumulate(-v_hi, -v_lo)?;
            accumulate(v_lo, v_hi)?;
        } else {
            accumulate(-v_hi, v_hi)?;
        }
        Ok((rho, j))
    }
}

pub fn density<E: Evaluator + ?Sized>(
    eval: &E,
    t: f64,
    x: f64,
    quad: &VelocityQuadrature,
) -> Result<f64, TransportError> {
    Ok(quad.moments(eval, t, x)?.0)
}

pub fn current<E: Evaluator + ?Sized>(
    eval: &E,
    t: f64,
    x: f64,
    quad: &VelocityQuadrature,
) -> Result<f64, TransportError> {
    Ok(quad.moments(eval, t, x)?.1)
}

/// All moment fields on the grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSnapshot {
    pub t: f64,
    pub rho: Vec<f64>,
    pub j: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_t: Vec<f64>,
}

impl MomentSnapshot {
    /// `max |φ_t|` over the grid.
    pub fn sup_phi_t(&self) -> f64 {
        self.phi_t.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Slope `|j(0)|` of the affine continuation of `φ_t` beyond the support.
    pub fn tail_slope(&self) -> f64 {
        self.j[self.j.len() / 2].abs()
    }
}

/// Snapshots at successive times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MomentSeries {
    pub x: Vec<f64>,
    pub snapshots: Vec<MomentSnapshot>,
}

impl MomentSeries {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}

/// Grid nodes followed by the Gauss subnodes of every interval.
struct SamplePlan {
    points: Vec<f64>,
    // subnode weights on an interval of the grid step
    weights: [f64; SUBNODES],
    n: usize,
}

impl SamplePlan {
    fn new(grid: &SpatialGrid) -> Self {
        let rule = GaussRule::new(SUBNODES);
        let n = grid.len();
        let mut points = grid.nodes().to_vec();
        let mut weights = [0.0; SUBNODES];
        for i in 0..n - 1 {
            let (a, b) = (grid.nodes()[i], grid.nodes()[i + 1]);
            for (s, (y, w)) in rule.mapped(a, b).enumerate() {
                points.push(y);
                weights[s] = w;
            }
        }
        Self { points, weights, n }
    }

    fn sub(&self, interval: usize, s: usize) -> usize {
        self.n + SUBNODES * interval + s
    }
}

fn sample<E: Evaluator + ?Sized>(
    eval: &E,
    t: f64,
    plan: &SamplePlan,
    quad: &VelocityQuadrature,
) -> Result<Vec<(f64, f64)>, TransportError> {
    plan.points
        .par_iter()
        .map(|&x| quad.moments(eval, t, x))
        .collect()
}

/// Prefix integrals `∫₀^{x_i} g` and `∫₀^{x_i} y·g` at every node.
fn cumulative(plan: &SamplePlan, grid: &SpatialGrid, g: impl Fn(usize) -> f64) -> (Vec<f64>, Vec<f64>) {
    let n = plan.n;
    let c = grid.center();
    let mut i0 = vec![0.0; n];
    let mut i1 = vec![0.0; n];
    let interval = |k: usize| -> (f64, f64) {
        (0..SUBNODES).fold((0.0, 0.0), |(a, b), s| {
            let idx = plan.sub(k, s);
            let w = plan.weights[s] * g(idx);
            (a + w, b + w * plan.points[idx])
        })
    };
    for k in c..n - 1 {
        let (a, b) = interval(k);
        i0[k + 1] = i0[k] + a;
        i1[k + 1] = i1[k] + b;
    }
    for k in (0..c).rev() {
        let (a, b) = interval(k);
        i0[k] = i0[k + 1] - a;
        i1[k] = i1[k + 1] - b;
    }
    (i0, i1)
}

fn phi_from(plan: &SamplePlan, grid: &SpatialGrid, m: &[(f64, f64)]) -> Vec<f64> {
    let (r0, r1) = cumulative(plan, grid, |i| m[i].0);
    grid.nodes()
        .iter()
        .zip(r0.iter().zip(&r1))
        .map(|(&x, (&a, &b))| b - x * a)
        .collect()
}

fn phi_t_from(plan: &SamplePlan, grid: &SpatialGrid, m: &[(f64, f64)]) -> Vec<f64> {
    let j0 = m[grid.center()].1;
    let (cum, _) = cumulative(plan, grid, |i| m[i].1 - j0);
    cum
}

pub fn snapshot<E: Evaluator + ?Sized>(
    eval: &E,
    t: f64,
    grid: &SpatialGrid,
    quad: &VelocityQuadrature,
) -> Result<MomentSnapshot, MomentError> {
    let plan = SamplePlan::new(grid);
    snapshot_with(eval, t, grid, &plan, quad)
}

fn snapshot_with<E: Evaluator + ?Sized>(
    eval: &E,
    t: f64,
    grid: &SpatialGrid,
    plan: &SamplePlan,
    quad: &VelocityQuadrature,
) -> Result<MomentSnapshot, MomentError> {
    let m = sample(eval, t, plan, quad)?;
    Ok(MomentSnapshot {
        t,
        rho: m[..plan.n].iter().map(|p| p.0).collect(),
        j: m[..plan.n].iter().map(|p| p.1).collect(),
        phi: phi_from(plan, grid, &m),
        phi_t: phi_t_from(plan, grid, &m),
    })
}

/// `∬ f dx dv` over the grid span.
pub fn total_mass<E: Evaluator + ?Sized>(
    eval: &E,
    t: f64,
    grid: &SpatialGrid,
    quad: &VelocityQuadrature,
) -> Result<f64, MomentError> {
    let plan = SamplePlan::new(grid);
    let m = sample(eval, t, &plan, quad)?;
    let (r0, _) = cumulative(&plan, grid, |i| m[i].0);
    Ok(r0[plan.n - 1] - r0[0])
}

/// Snapshots at each of `times`, in order.
pub fn moment_series<E: Evaluator + ?Sized>(
    eval: &E,
    times: &[f64],
    grid: &SpatialGrid,
    quad: &VelocityQuadrature,
) -> Result<MomentSeries, MomentError> {
    let plan = SamplePlan::new(grid);
    let snapshots = times
        .iter()
        .map(|&t| snapshot_with(eval, t, grid, &plan, quad))
        .collect::<Result<_, _>>()?;
    Ok(MomentSeries {
        x: grid.nodes().to_vec(),
        snapshots,
    })
}

pub fn phi<E: Evaluator + ?Sized>(
    eval: &E,
    t: f64,
    grid: &SpatialGrid,
    quad: &VelocityQuadrature,
) -> Result<Vec<f64>, MomentError> {
    let plan = SamplePlan::new(grid);
    let m = sample(eval, t, &plan, quad)?;
    Ok(phi_from(&plan, grid, &m))
}

pub fn phi_t_reconstruct<E: Evaluator + ?Sized>(
    eval: &E,
    t: f64,
    grid: &SpatialGrid,
    quad: &VelocityQuadrature,
) -> Result<Vec<f64>, MomentError> {
    let plan = SamplePlan::new(grid);
    let m = sample(eval, t, &plan, quad)?;
    Ok(phi_t_from(&plan, grid, &m))
}

/// Centered difference `(φ(t + dt) − φ(t − dt))/(2dt)`.
pub fn phi_t_fd<E: Evaluator + ?Sized>(
    eval: &E,
    t: f64,
    dt: f64,
    grid: &SpatialGrid,
    quad: &VelocityQuadrature,
) -> Result<Vec<f64>, MomentError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(MomentError::TimeStep(dt));
    }
    let plan = SamplePlan::new(grid);
    let ahead = phi_from(&plan, grid, &sample(eval, t + dt, &plan, quad)?);
    let behind = phi_from(&plan, grid, &sample(eval, t - dt, &plan, quad)?);
    Ok(ahead
        .iter()
        .zip(&behind)
        .map(|(a, b)| (a - b) / (2.0 * dt))
        .collect())
}
