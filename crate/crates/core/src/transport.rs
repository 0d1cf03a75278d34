//! Exact solutions of the transport equation.
//!
//! The solution is evaluated two ways: by pulling the initial data back along
//! the characteristic flow, and by translating it in the action-angle chart,
//! `f(t, Q, K) = f₀(Q + c(K)t, K)`. The chart route is the fast production
//! path; the characteristic route validates it.

use std::f64::consts::TAU;
use std::sync::Arc;

use thiserror::Error;

use crate::action_angle::{wrap_angle, ChartError, OrbitChart};
use crate::flow::{flow_map, FlowError, FlowSpec};
use crate::potential::{PhasePoint, PotentialParams};
use crate::quadrature::{periodic_trapezoid, GaussRule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("support parameter c_s must lie in (0, 1), got {0}")]
    InvalidSupport(f64),
    #[error("modulation amplitude alpha must lie in [0, 1), got {0}")]
    InvalidAmplitude(f64),
    #[error("angular mode must be at least 1")]
    InvalidMode,
    #[error("chart range [{k_min}, {k_max}] does not cover the support [{lo}, {hi}]")]
    ChartTooNarrow { k_min: f64, k_max: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Smooth initial data `f₀ = B(H)·(1 + α sin(mQ))` on the annulus `c_s ≤ H ≤ 1/c_s`.
///
/// `B(H) = exp(−1/(1 − s²))` with `s = (2H − (c_s + 1/c_s))/(1/c_s − c_s)`
/// vanishes to all orders at both edges of the annulus.
#[derive(Debug, Clone)]
pub struct InitialData {
    c_s: f64,
    alpha: f64,
    mode: u32,
    chart: Arc<OrbitChart>,
}

pub fn make_initial_data(
    c_s: f64,
    alpha: f64,
    mode: u32,
    chart: Arc<OrbitChart>,
) -> Result<InitialData, TransportError> {
    InitialData::new(c_s, alpha, mode, chart)
}

impl InitialData {
    pub fn new(c_s: f64, alpha: f64, mode: u32, chart: Arc<OrbitChart>) -> Result<Self, TransportError> {
        if !(c_s > 0.0 && c_s < 1.0) {
            return Err(TransportError::InvalidSupport(c_s));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(TransportError::InvalidAmplitude(alpha));
        }
        if mode == 0 {
            return Err(TransportError::InvalidMode);
        }
        let (k_min, k_max) = chart.k_range();
        if k_min > c_s || k_max < 1.0 / c_s {
            return Err(TransportError::ChartTooNarrow {
                k_min,
                k_max,
                lo: c_s,
                hi: 1.0 / c_s,
            });
        }
        Ok(Self {
            c_s,
            alpha,
            mode,
            chart,
        })
    }

    pub fn c_s(&self) -> f64 {
        self.c_s
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> u32 {
        self.mode
    }

    pub fn chart(&self) -> &OrbitChart {
        &self.chart
    }

    pub fn params(&self) -> &PotentialParams {
        self.chart.params()
    }

    /// Energy annulus `[c_s, 1/c_s]` containing the support.
    pub fn energy_support(&self) -> (f64, f64) {
        (self.c_s, 1.0 / self.c_s)
    }

    #[inline]
    fn bump_coordinate(&self, h: f64) -> f64 {
        let hi = 1.0 / self.c_s;
        (2.0 * h - (self.c_s + hi)) / (hi - self.c_s)
    }

    /// Radial profile `B(H)`.
    #[inline]
    pub fn bump(&self, h: f64) -> f64 {
        let s = self.bump_coordinate(h);
        let gap = 1.0 - s * s;
        if gap <= 0.0 {
            0.0
        } else {
            (-1.0 / gap).exp()
        }
    }

    /// `dB/dH`, used for the closed forms of the commuted fields.
    pub fn bump_slope(&self, h: f64) -> f64 {
        let s = self.bump_coordinate(h);
        let gap = 1.0 - s * s;
        if gap <= 0.0 {
            return 0.0;
        }
        let ds_dh = 2.0 / (1.0 / self.c_s - self.c_s);
        (-1.0 / gap).exp() * (-2.0 * s / (gap * gap)) * ds_dh
    }

    /// `f₀` in action-angle coordinates.
    #[inline]
    pub fn value_qk(&self, q: f64, k: f64) -> f64 {
        let b = self.bump(k);
        if b == 0.0 {
            return 0.0;
        }
        b * (1.0 + self.alpha * (self.mode as f64 * q).sin())
    }

    /// `f₀(x, v)`; points off the annulus never touch the chart.
    pub fn value(&self, p: PhasePoint) -> Result<f64, TransportError> {
        let h = self.params().hamiltonian(p);
        if self.bump(h) == 0.0 {
            return Ok(0.0);
        }
        let aa = self.chart.to_action_angle(p)?;
        Ok(self.value_qk(aa.q, aa.k))
    }

    /// `∬ f̄(t) dx dv` evaluated in action-angle variables, where
    /// `dx dv = dQ dK / c(K)`.
    pub fn mass_action_angle(&self, t: f64, k_nodes: usize, q_nodes: usize) -> f64 {
        self.weighted_integral(t, k_nodes, q_nodes, |c| 1.0 / c)
    }

    /// `∬ f̄(t) w(c(K)) dQ dK` over the annulus: Gauss in `K`, trapezoid in `Q`.
    pub fn weighted_integral(&self, t: f64, k_nodes: usize, q_nodes: usize, w: impl Fn(f64) -> f64) -> f64 {
        let rule = GaussRule::new(k_nodes);
        let (lo, hi) = self.energy_support();
        rule.integrate(lo, hi, |k| {
            let c = self.chart.frequency_unchecked(k).0;
            w(c) * periodic_trapezoid(q_nodes, |q| self.value_qk(advance_angle(q, c, t), k))
        })
    }

    /// Largest value of `f₀`, `e⁻¹(1 + α)`.
    pub fn max_value(&self) -> f64 {
        (-1.0f64).exp() * (1.0 + self.alpha)
    }
}

/// `f(t, p) = f₀(Φ₋ₜ(p))`, pulling the data back along the characteristics.
pub fn evaluate_f_characteristic(
    params: &PotentialParams,
    f0: &InitialData,
    t: f64,
    p: PhasePoint,
    spec: &FlowSpec,
) -> Result<f64, TransportError> {
    let origin = flow_map(params, p, -t, spec)?;
    f0.value(origin)
}

/// `f(t, Q, K) = f₀(Q + c(K)t, K)` through the chart.
pub fn evaluate_f_actionangle(f0: &InitialData, t: f64, p: PhasePoint) -> Result<f64, TransportError> {
    let chart = f0.chart();
    let h = chart.params().hamiltonian(p);
    if f0.bump(h) == 0.0 {
        return Ok(0.0);
    }
    let aa = chart.to_action_angle(p)?;
    Ok(f0.value_qk(advance_angle(aa.q, chart.frequency_unchecked(aa.k).0, t), aa.k))
}

/// `Q + c·t` reduced to `(−π, π]`, splitting `c·t` to keep long times accurate.
#[inline]
pub(crate) fn advance_angle(q: f64, c: f64, t: f64) -> f64 {
    let turns = (c * t / TAU).trunc();
    let shift = c.mul_add(t, -TAU * turns);
    wrap_angle(q + shift)
}

/// A solution of the transport equation that can be sampled in phase space.
pub trait Evaluator: Sync {
    fn params(&self) -> &PotentialParams;

    /// Energies outside this band carry no mass at any time.
    fn energy_support(&self) -> (f64, f64);

    fn value(&self, t: f64, p: PhasePoint) -> Result<f64, TransportError>;
}

/// Production evaluator: translation in the action-angle chart.
#[derive(Debug, Clone)]
pub struct ActionAngleSolution {
    pub f0: InitialData,
}

impl Evaluator for ActionAngleSolution {
    fn params(&self) -> &PotentialParams {
        self.f0.params()
    }

    fn energy_support(&self) -> (f64, f64) {
        self.f0.energy_support()
    }

    fn value(&self, t: f64, p: PhasePoint) -> Result<f64, TransportError> {
        evaluate_f_actionangle(&self.f0, t, p)
    }
}

/// Validation evaluator: backward integration of the characteristics.
#[derive(Debug, Clone)]
pub struct CharacteristicSolution {
    pub f0: InitialData,
    pub spec: FlowSpec,
}

impl Evaluator for CharacteristicSolution {
    fn params(&self) -> &PotentialParams {
        self.f0.params()
    }

    fn energy_support(&self) -> (f64, f64) {
        self.f0.energy_support()
    }

    fn value(&self, t: f64, p: PhasePoint) -> Result<f64, TransportError> {
        evaluate_f_characteristic(self.f0.params(), &self.f0, t, p, &self.spec)
    }
}

/// Wraps a closure as an evaluator, e.g. for synthetic moment tests.
pub struct FnEvaluator<F> {
    pub params: PotentialParams,
    pub support: (f64, f64),
    pub f: F,
}

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(f64, PhasePoint) -> f64 + Sync,
{
    fn params(&self) -> &PotentialParams {
        &self.params
    }

    fn energy_support(&self) -> (f64, f64) {
        self.support
    }

    fn value(&self, t: f64, p: PhasePoint) -> Result<f64, TransportError> {
        Ok((self.f)(t, p))
    }
}
