//! Characteristic flow `ẋ = v, v̇ = −Φ′(x)`.
//!
//! Two integrators are provided. The kick-drift-kick leapfrog is the
//! long-time workhorse: it is symplectic, so the energy error stays bounded.
//! The adaptive Dormand–Prince 5(4) pair is the accuracy oracle used to
//! cross-check the action-angle solution and to measure orbit periods.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::{PhasePoint, PotentialParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("leapfrog step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("adaptive tolerance must lie in (0, 1e-3], got {0}")]
    InvalidTolerance(f64),
    #[error("non-finite phase point or time")]
    NonFinite,
    #[error("tolerance {tolerance} unreachable: step fell below {floor:e} at t = {t}")]
    StepUnderflow { tolerance: f64, floor: f64, t: f64 },
    #[error("orbit period requires positive energy, got {0}")]
    NonPositiveEnergy(f64),
    #[error("no return to the section within t = {0}")]
    NoReturn(f64),
}

/// Integration method for the characteristic flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum FlowSpec {
    /// Second-order symplectic splitting with a fixed maximal step.
    SymplecticSecondOrder { step: f64 },
    /// Dormand–Prince 5(4) with mixed absolute/relative error control.
    HighOrderAdaptive { tolerance: f64 },
}

impl FlowSpec {
    pub fn leapfrog(step: f64) -> Result<Self, FlowError> {
        let spec = Self::SymplecticSecondOrder { step };
        spec.check()?;
        Ok(spec)
    }

    pub fn adaptive(tolerance: f64) -> Result<Self, FlowError> {
        let spec = Self::HighOrderAdaptive { tolerance };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), FlowError> {
        match *self {
            Self::SymplecticSecondOrder { step } if !(step.is_finite() && step > 0.0) => {
                Err(FlowError::InvalidStep(step))
            }
            Self::HighOrderAdaptive { tolerance } if !(tolerance > 0.0 && tolerance <= 1e-3) => {
                Err(FlowError::InvalidTolerance(tolerance))
            }
            _ => Ok(()),
        }
    }
}

type State = [f64; 2];

#[inline]
fn rhs(params: &PotentialParams, y: &State) -> State {
    [y[1], -params.dphi(y[0])]
}

#[inline]
fn leapfrog_step(params: &PotentialParams, y: State, dt: f64) -> State {
    let v_half = y[1] - 0.5 * dt * params.dphi(y[0]);
    let x = y[0] + dt * v_half;
    [x, v_half - 0.5 * dt * params.dphi(x)]
}

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes c_i drop out.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One Dormand–Prince step: fifth-order solution and embedded error estimate.
fn dopri_step(params: &PotentialParams, y: &State, h: f64) -> (State, State) {
    let k1 = rhs(params, y);
    let stage = |coef: &[(f64, &State)]| -> State {
        let mut s = *y;
        for (a, k) in coef {
            s[0] += h * a * k[0];
            s[1] += h * a * k[1];
        }
        s
    };
    let k2 = rhs(params, &stage(&[(A21, &k1)]));
    let k3 = rhs(params, &stage(&[(A31, &k1), (A32, &k2)]));
    let k4 = rhs(params, &stage(&[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(
        params,
        &stage(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = rhs(
        params,
        &stage(&[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y_new = stage(&[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = rhs(params, &y_new);
    let mut err = [0.0; 2];
    for i in 0..2 {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y_new, err)
}

fn error_norm(y: &State, y_new: &State, err: &State, tol: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..2 {
        let scale = tol * (1.0 + y[i].abs().max(y_new[i].abs()));
        acc += (err[i] / scale).powi(2);
    }
    (acc / 2.0).sqrt()
}

/// Local error target relative to the requested tolerance. Phase errors of
/// an oscillator accumulate over the steps of a period, so the per-step target
/// is tightened to keep the global error per unit time near the tolerance.
const LOCAL_TOLERANCE_FACTOR: f64 = 1e-2;

/// Time-stepping state of the adaptive integrator.
struct AdaptiveStepper<'a> {
    params: &'a PotentialParams,
    tol: f64,
    t: f64,
    y: State,
    h: f64,
}

impl<'a> AdaptiveStepper<'a> {
    fn new(params: &'a PotentialParams, y: State, tol: f64, direction: f64) -> Self {
        Self {
            params,
            tol: LOCAL_TOLERANCE_FACTOR * tol,
            t: 0.0,
            y,
            h: direction * 0.1 * tol.powf(0.2),
        }
    }

    /// Takes one accepted step, never stepping past `t_end` when given.
    fn advance(&mut self, t_end: Option<f64>) -> Result<(), FlowError> {
        let floor = 1e-13 * (1.0 + self.t.abs());
        loop {
            let mut h = self.h;
            let mut clipped = false;
            if let Some(end) = t_end {
                let remaining = end - self.t;
                if remaining.abs() <= h.abs() {
                    h = remaining;
                    clipped = true;
                }
            }
            let (y_new, err) = dopri_step(self.params, &self.y, h);
            let norm = error_norm(&self.y, &y_new, &err, self.tol);
            if !norm.is_finite() {
                self.h *= 0.2;
            } else if norm <= 1.0 {
                self.t = if clipped { t_end.unwrap() } else { self.t + h };
                self.y = y_new;
                let growth = if norm == 0.0 {
                    5.0
                } else {
                    (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                // a clipped final step says nothing about the natural step size
                if !clipped || growth < 1.0 {
                    self.h = h * growth;
                }
                return Ok(());
            } else {
                self.h = h * (0.9 * norm.powf(-0.2)).clamp(0.2, 1.0);
            }
            if self.h.abs() < floor {
                return Err(FlowError::StepUnderflow {
                    tolerance: self.tol / LOCAL_TOLERANCE_FACTOR,
                    floor,
                    t: self.t,
                });
            }
        }
    }
}

/// Transports `p` for time `t` (either sign) along the Hamiltonian flow.
pub fn flow_map(
    params: &PotentialParams,
    p: PhasePoint,
    t: f64,
    spec: &FlowSpec,
) -> Result<PhasePoint, FlowError> {
    spec.check()?;
    if !(p.is_finite() && t.is_finite()) {
        return Err(FlowError::NonFinite);
    }
    if t == 0.0 {
        return Ok(p);
    }
    let y = match *spec {
        FlowSpec::SymplecticSecondOrder { step } => {
            let n = (t.abs() / step).ceil().max(1.0) as usize;
            let dt = t / n as f64;
            let mut y = [p.x, p.v];
            for _ in 0..n {
                y = leapfrog_step(params, y, dt);
            }
            y
        }
        FlowSpec::HighOrderAdaptive { tolerance } => {
            let mut st = AdaptiveStepper::new(params, [p.x, p.v], tolerance, t.signum());
            while st.t != t {
                st.advance(Some(t))?;
            }
            st.y
        }
    };
    Ok(PhasePoint::new(y[0], y[1]))
}

/// Single step of the method from `y` of length `h`; used to polish crossings.
fn single_step(params: &PotentialParams, spec: &FlowSpec, y: State, h: f64) -> State {
    match *spec {
        FlowSpec::SymplecticSecondOrder { .. } => leapfrog_step(params, y, h),
        FlowSpec::HighOrderAdaptive { .. } => dopri_step(params, &y, h).0,
    }
}

/// Root in `[0, h]` of the cubic Hermite interpolant of `x(τ)` with `ẋ = v`.
fn hermite_crossing(y0: &State, y1: &State, h: f64) -> f64 {
    let eval = |tau: f64| {
        let s = tau / h;
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0[0]
            + (s3 - 2.0 * s2 + s) * h * y0[1]
            + (-2.0 * s3 + 3.0 * s2) * y1[0]
            + (s3 - s2) * h * y1[1]
    };
    let (mut lo, mut hi) = (0.0, h);
    let mut f_lo = eval(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = eval(mid);
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < 1e-16 * h.abs().max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Period of the closed orbit of energy `h`.
///
/// The orbit starts on the section `x = 0` moving right and the period is the
/// time of the next upward crossing of that section. The crossing is located
/// on the bracketing step by cubic Hermite interpolation of `x(τ)` and then
/// polished by Newton iterations on single steps of the method.
pub fn orbit_period(params: &PotentialParams, h: f64, spec: &FlowSpec) -> Result<f64, FlowError> {
    spec.check()?;
    if !(h.is_finite() && h > 0.0) {
        return Err(FlowError::NonPositiveEnergy(h));
    }
    let y0: State = [0.0, (2.0 * h).sqrt()];
    // an orbit never takes longer than the harmonic one
    let t_cap = 1e3 * std::f64::consts::TAU;
    let (t_start, y_start, y_end, step) = match *spec {
        FlowSpec::SymplecticSecondOrder { step } => {
            let mut y = y0;
            let mut t = 0.0;
            loop {
                let y_next = leapfrog_step(params, y, step);
                if y[0] < 0.0 && y_next[0] >= 0.0 {
                    break (t, y, y_next, step);
                }
                y = y_next;
                t += step;
                if t > t_cap {
                    return Err(FlowError::NoReturn(t_cap));
                }
            }
        }
        FlowSpec::HighOrderAdaptive { tolerance } => {
            let mut st = AdaptiveStepper::new(params, y0, tolerance, 1.0);
            loop {
                let (t, y) = (st.t, st.y);
                st.advance(None)?;
                if y[0] < 0.0 && st.y[0] >= 0.0 {
                    break (t, y, st.y, st.t - t);
                }
                if st.t > t_cap {
                    return Err(FlowError::NoReturn(t_cap));
                }
            }
        }
    };
    let mut tau = hermite_crossing(&y_start, &y_end, step);
    for _ in 0..8 {
        let y = single_step(params, spec, y_start, tau);
        let delta = y[0] / y[1];
        tau -= delta;
        if delta.abs() <= 1e-15 * (t_start + tau) {
            break;
        }
    }
    Ok(t_start + tau)
}
