//! Action-angle coordinates for `H = v²/2 + Φ(x)`.
//!
//! Two changes of variables are composed:
//!
//! 1. `(x, v) → (χ, H)`, with `sin χ = v/√(2H)` and `cos χ = sign(x)·√(Φ(x)/H)`.
//!    The turning point `x > 0, v = 0` sits at `χ = 0`; along the flow `χ`
//!    decreases at the rate `a(χ, H) = |Φ′(x)|/√(2Φ(x))`.
//! 2. `(χ, H) → (Q, K)` with `K = H` and `dQ/dχ = c(K)/a(χ, K)`, `Q(0) = 0`,
//!    where the frequency `c(K)` makes `Q` advance by exactly `2π` per orbit.
//!
//! In `(Q, K)` the transport equation is `∂ₜf − c(K)∂_Q f = 0`.
//!
//! On the rate convention: the closed form of `a` is also quoted with an extra
//! constant factor `√2`. A constant factor cancels in `Q` but rescales `c`;
//! the rate used here is the one obtained by differentiating `χ` along the
//! flow, so `c ≡ 1` in the harmonic limit and `2π/c` is the orbit period in
//! physical time.
//!
//! [`OrbitChart`] tabulates `c`, `c′`, `c″` and `Q(χ, K)` on a uniform
//! `(χ, K)` grid. `c` is interpolated in `K` by quintic Hermite splines (two
//! continuous derivatives, so `c′` is the exact derivative of the interpolated
//! `c`). `Q` is a bicubic Hermite patch built from exact values of `Q`,
//! `∂_χQ`, `∂_KQ` and `∂_χ∂_KQ`; the interpolation error is `O(Δχ⁴ + ΔK⁴)`.
//! The inverse `χ(Q, K)` solves the same patch with a bracketed Newton
//! iteration, so forward and inverse charts round-trip to solver precision.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::{PhasePoint, PotentialParams};
use crate::quadrature::{periodic_trapezoid, GaussRule};

/// Node count used for closed-orbit integrals when none is given.
pub const DEFAULT_N_QUAD: usize = 128;

/// Gauss points per χ-cell in the cumulative `Q` integral.
const CELL_GAUSS_POINTS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("the elliptic fixed point (0, 0) has no angle")]
    Origin,
    #[error("non-finite phase point")]
    NonFinite,
    #[error("energy must be positive, got {0}")]
    NonPositiveEnergy(f64),
    #[error("invalid chart parameter: {0}")]
    InvalidParameter(String),
    #[error("energy {k} outside chart range [{k_min}, {k_max}]")]
    OutOfRange { k: f64, k_min: f64, k_max: f64 },
    #[error("chart table not monotone at K = {k}, chi = {chi}")]
    NonMonotone { k: f64, chi: f64 },
}

/// Angle-energy coordinates `(χ, H)`, with `χ ∈ (−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleEnergy {
    pub chi: f64,
    pub h: f64,
}

/// Action-angle coordinates `(Q, K)`, with `Q ∈ (−π, π]` and `K = H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionAngle {
    pub q: f64,
    pub k: f64,
}

/// Reduces an angle to `(−π, π]`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

pub fn to_angle_energy(params: &PotentialParams, p: PhasePoint) -> Result<AngleEnergy, ChartError> {
    if !p.is_finite() {
        return Err(ChartError::NonFinite);
    }
    let h = params.hamiltonian(p);
    if h <= 0.0 {
        return Err(ChartError::Origin);
    }
    let sin_part = p.v / (2.0 * h).sqrt();
    let cos_part = (params.phi(p.x) / h).sqrt().copysign(p.x);
    let mut chi = sin_part.atan2(cos_part);
    if chi <= -PI {
        chi = PI;
    }
    Ok(AngleEnergy { chi, h })
}

pub fn from_angle_energy(params: &PotentialParams, ae: AngleEnergy) -> PhasePoint {
    let (s, c) = ae.chi.sin_cos();
    let x = params.turning_point_sq(ae.h * c * c).sqrt().copysign(c);
    PhasePoint::new(x, (2.0 * ae.h).sqrt() * s)
}

/// `x²` on the orbit of energy `h` at angle `χ`.
#[inline]
fn x_sq(params: &PotentialParams, chi: f64, h: f64) -> f64 {
    let c = chi.cos();
    params.turning_point_sq(h * c * c)
}

/// `1/a` as a function of `u = x²`: `√(1+εu)/(1+2εu)`.
#[inline]
fn inverse_rate(eps: f64, u: f64) -> f64 {
    (1.0 + eps * u).sqrt() / (1.0 + 2.0 * eps * u)
}

/// `F(u) = (3ε + 2ε²u) / (√(1+εu)(1+2εu)³)`, so that `−∂_H(1/a) = cos²χ·F(x²)`.
#[inline]
fn stiffening(eps: f64, u: f64) -> f64 {
    let g = 1.0 + 2.0 * eps * u;
    (3.0 * eps + 2.0 * eps * eps * u) / ((1.0 + eps * u).sqrt() * g * g * g)
}

/// `dF/du`, written without division by `ε`.
#[inline]
fn stiffening_slope(eps: f64, u: f64) -> f64 {
    let s = 1.0 + eps * u;
    let g = 1.0 + 2.0 * eps * u;
    let n = 3.0 * eps + 2.0 * eps * eps * u;
    let num = 2.0 * eps * eps * s * g - n * (0.5 * eps * g + 6.0 * eps * s);
    num / (s.powf(1.5) * g.powi(4))
}

/// `−∂_H(1/a)` at fixed `χ`, using `∂_H x = cos²χ/Φ′(x)`.
#[inline]
fn minus_dinv_rate_dh(eps: f64, chi: f64, u: f64) -> f64 {
    let c = chi.cos();
    c * c * stiffening(eps, u)
}

/// Angular speed `|dχ/dt| = (1+2εx²)/√(1+εx²)` on the orbit.
pub fn rate_a(params: &PotentialParams, ae: AngleEnergy) -> f64 {
    1.0 / inverse_rate(params.epsilon(), x_sq(params, ae.chi, ae.h))
}

fn check_quad(h: f64, n_quad: usize) -> Result<(), ChartError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(ChartError::NonPositiveEnergy(h));
    }
    if n_quad < 16 {
        return Err(ChartError::InvalidParameter(format!(
            "n_quad must be at least 16, got {n_quad}"
        )));
    }
    Ok(())
}

/// Orbital frequency `c(h) = 2π / ∮ dχ/a`.
pub fn compute_c(params: &PotentialParams, h: f64, n_quad: usize) -> Result<f64, ChartError> {
    check_quad(h, n_quad)?;
    let eps = params.epsilon();
    let loop_integral = periodic_trapezoid(n_quad, |chi| inverse_rate(eps, x_sq(params, chi, h)));
    Ok(TAU / loop_integral)
}

/// `c′(h) = (c²/2π) ∮ cos²χ·F(x²) dχ`, from the analytic integrand.
pub fn compute_c_prime(params: &PotentialParams, h: f64, n_quad: usize) -> Result<f64, ChartError> {
    let c = compute_c(params, h, n_quad)?;
    Ok(c * c / TAU * loop_stiffening(params, h, n_quad))
}

fn loop_stiffening(params: &PotentialParams, h: f64, n_quad: usize) -> f64 {
    let eps = params.epsilon();
    periodic_trapezoid(n_quad, |chi| minus_dinv_rate_dh(eps, chi, x_sq(params, chi, h)))
}

/// `c″(h)`, differentiating the `c′` integral once more under the integral sign.
pub fn compute_c_second(params: &PotentialParams, h: f64, n_quad: usize) -> Result<f64, ChartError> {
    let c = compute_c(params, h, n_quad)?;
    let eps = params.epsilon();
    let j = loop_stiffening(params, h, n_quad);
    let dj = periodic_trapezoid(n_quad, |chi| {
        let u = x_sq(params, chi, h);
        let c2 = chi.cos().powi(2);
        // ∂_H(x²) = 2cos²χ/(1+2εx²)
        2.0 * c2 * c2 * stiffening_slope(eps, u) / (1.0 + 2.0 * eps * u)
    });
    let c_prime = c * c / TAU * j;
    Ok(2.0 * c_prime * c_prime / c + c * c / TAU * dj)
}

/// Resolution of an [`OrbitChart`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
    pub n_chi: usize,
    pub n_quad: usize,
}

impl ChartSpec {
    /// Range `[c_s(1 − margin), c_s⁻¹(1 + margin)]` around the support annulus.
    pub fn for_support(c_s: f64, margin: f64, n_k: usize, n_chi: usize) -> Self {
        Self {
            k_min: c_s * (1.0 - margin),
            k_max: (1.0 + margin) / c_s,
            n_k,
            n_chi,
            n_quad: DEFAULT_N_QUAD,
        }
    }

    fn check(&self) -> Result<(), ChartError> {
        let bad = |msg: String| Err(ChartError::InvalidParameter(msg));
        if !(self.k_min > 0.0 && self.k_max > self.k_min && self.k_max.is_finite()) {
            return bad(format!(
                "need 0 < k_min < k_max, got [{}, {}]",
                self.k_min, self.k_max
            ));
        }
        if self.n_k < 8 {
            return bad(format!("n_k must be at least 8, got {}", self.n_k));
        }
        if self.n_chi < 64 {
            return bad(format!("n_chi must be at least 64, got {}", self.n_chi));
        }
        if self.n_quad < 16 {
            return bad(format!("n_quad must be at least 16, got {}", self.n_quad));
        }
        Ok(())
    }
}

/// Exact chart data at one `(χ, K)` grid node.
#[derive(Debug, Clone, Copy, Default)]
struct QNode {
    q: f64,
    q_chi: f64,
    q_k: f64,
    q_chi_k: f64,
}

/// Precomputed action-angle chart over an energy band.
///
/// Immutable once built; share it freely between threads.
#[derive(Debug, Clone)]
pub struct OrbitChart {
    params: PotentialParams,
    spec: ChartSpec,
    k_grid: Vec<f64>,
    k_step: f64,
    chi_step: f64,
    c: Vec<f64>,
    c_prime: Vec<f64>,
    c_second: Vec<f64>,
    /// Row-major `[k][chi]`, `n_chi + 1` χ-nodes per row covering `[0, π]`.
    table: Vec<QNode>,
    delta: f64,
}

#[inline]
fn hermite3(u: f64) -> [f64; 4] {
    let u2 = u * u;
    let u3 = u2 * u;
    [
        2.0 * u3 - 3.0 * u2 + 1.0,
        -2.0 * u3 + 3.0 * u2,
        u3 - 2.0 * u2 + u,
        u3 - u2,
    ]
}

#[inline]
fn hermite3_prime(u: f64) -> [f64; 4] {
    let u2 = u * u;
    [
        6.0 * u2 - 6.0 * u,
        -6.0 * u2 + 6.0 * u,
        3.0 * u2 - 4.0 * u + 1.0,
        3.0 * u2 - 2.0 * u,
    ]
}

/// Quintic Hermite basis: left value, slope, curvature, then the right ones.
#[inline]
fn hermite5(w: f64) -> [f64; 6] {
    let w2 = w * w;
    let w3 = w2 * w;
    let w4 = w3 * w;
    let w5 = w4 * w;
    [
        1.0 - 10.0 * w3 + 15.0 * w4 - 6.0 * w5,
        w - 6.0 * w3 + 8.0 * w4 - 3.0 * w5,
        0.5 * (w2 - 3.0 * w3 + 3.0 * w4 - w5),
        10.0 * w3 - 15.0 * w4 + 6.0 * w5,
        -4.0 * w3 + 7.0 * w4 - 3.0 * w5,
        0.5 * (w3 - 2.0 * w4 + w5),
    ]
}

#[inline]
fn hermite5_prime(w: f64) -> [f64; 6] {
    let w2 = w * w;
    let w3 = w2 * w;
    let w4 = w3 * w;
    [
        -30.0 * w2 + 60.0 * w3 - 30.0 * w4,
        1.0 - 18.0 * w2 + 32.0 * w3 - 15.0 * w4,
        0.5 * (2.0 * w - 9.0 * w2 + 12.0 * w3 - 5.0 * w4),
        30.0 * w2 - 60.0 * w3 + 30.0 * w4,
        -12.0 * w2 + 28.0 * w3 - 15.0 * w4,
        0.5 * (3.0 * w2 - 8.0 * w3 + 5.0 * w4),
    ]
}

/// Builds the chart over `[k_min, k_max]` with `n_k` energies and `n_chi` angle cells.
pub fn build_chart(
    params: &PotentialParams,
    k_min: f64,
    k_max: f64,
    n_k: usize,
    n_chi: usize,
) -> Result<OrbitChart, ChartError> {
    OrbitChart::build(
        params,
        ChartSpec {
            k_min,
            k_max,
            n_k,
            n_chi,
            n_quad: DEFAULT_N_QUAD,
        },
    )
}

impl OrbitChart {
    pub fn build(params: &PotentialParams, spec: ChartSpec) -> Result<Self, ChartError> {
        spec.check()?;
        let eps = params.epsilon();
        let n_k = spec.n_k;
        let n_chi = spec.n_chi;
        let k_step = (spec.k_max - spec.k_min) / (n_k - 1) as f64;
        let chi_step = PI / n_chi as f64;
        let k_grid: Vec<f64> = (0..n_k)
            .map(|j| if j == n_k - 1 { spec.k_max } else { spec.k_min + k_step * j as f64 })
            .collect();
        let gauss = GaussRule::new(CELL_GAUSS_POINTS);

        let mut c = Vec::with_capacity(n_k);
        let mut c_prime = Vec::with_capacity(n_k);
        let mut c_second = Vec::with_capacity(n_k);
        let mut table = Vec::with_capacity(n_k * (n_chi + 1));
        for &k in &k_grid {
            let ck = compute_c(params, k, spec.n_quad)?;
            let cpk = compute_c_prime(params, k, spec.n_quad)?;
            c.push(ck);
            c_prime.push(cpk);
            c_second.push(compute_c_second(params, k, spec.n_quad)?);

            let node = |chi: f64, inv_int: f64, dk_int: f64| {
                let u = x_sq(params, chi, k);
                let inv_a = inverse_rate(eps, u);
                let d_inv_a = -minus_dinv_rate_dh(eps, chi, u);
                QNode {
                    q: ck * inv_int,
                    q_chi: ck * inv_a,
                    q_k: cpk * inv_int + ck * dk_int,
                    q_chi_k: cpk * inv_a + ck * d_inv_a,
                }
            };
            let (mut inv_int, mut dk_int) = (0.0, 0.0);
            table.push(node(0.0, 0.0, 0.0));
            for i in 0..n_chi {
                let lo = chi_step * i as f64;
                let hi = if i == n_chi - 1 { PI } else { chi_step * (i + 1) as f64 };
                for (chi, w) in gauss.mapped(lo, hi) {
                    let u = x_sq(params, chi, k);
                    inv_int += w * inverse_rate(eps, u);
                    dk_int -= w * minus_dinv_rate_dh(eps, chi, u);
                }
                table.push(node(hi, inv_int, dk_int));
            }
        }
        let delta = c_prime.iter().copied().fold(f64::INFINITY, f64::min);
        let chart = Self {
            params: *params,
            spec,
            k_grid,
            k_step,
            chi_step,
            c,
            c_prime,
            c_second,
            table,
            delta,
        };
        chart.verify_monotone()?;
        Ok(chart)
    }

    /// Rejects tables whose `Q(χ)` interpolant could fail to be increasing.
    fn verify_monotone(&self) -> Result<(), ChartError> {
        let n_chi = self.spec.n_chi;
        for (j, &k) in self.k_grid.iter().enumerate() {
            let row = &self.table[j * (n_chi + 1)..(j + 1) * (n_chi + 1)];
            for i in 0..n_chi {
                let (a, b) = (row[i], row[i + 1]);
                let secant = (b.q - a.q) / self.chi_step;
                let ok = secant > 0.0
                    && a.q_chi > 0.0
                    && b.q_chi > 0.0
                    && a.q_chi <= 3.0 * secant
                    && b.q_chi <= 3.0 * secant;
                if !ok {
                    return Err(ChartError::NonMonotone {
                        k,
                        chi: self.chi_step * i as f64,
                    });
                }
            }
        }
        // between energy nodes the patch mixes rows; sample its χ-slope there
        for j in 0..self.spec.n_k - 1 {
            let k = self.k_grid[j] + 0.5 * self.k_step;
            for i in 0..=2 * n_chi {
                let chi = 0.5 * self.chi_step * i as f64;
                let (_, slope) = self.q_reduced(chi.min(PI), k);
                if !(slope > 0.0) {
                    return Err(ChartError::NonMonotone { k, chi });
                }
            }
        }
        Ok(())
    }

    pub fn params(&self) -> &PotentialParams {
        &self.params
    }

    pub fn spec(&self) -> &ChartSpec {
        &self.spec
    }

    pub fn k_range(&self) -> (f64, f64) {
        (self.spec.k_min, self.spec.k_max)
    }

    pub fn k_grid(&self) -> &[f64] {
        &self.k_grid
    }

    pub fn c_nodes(&self) -> &[f64] {
        &self.c
    }

    pub fn c_prime_nodes(&self) -> &[f64] {
        &self.c_prime
    }

    /// Smallest tabulated `c′`: the measured lower bound on the anisochronism.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn contains(&self, k: f64) -> bool {
        k >= self.spec.k_min && k <= self.spec.k_max
    }

    fn check_k(&self, k: f64) -> Result<(), ChartError> {
        if self.contains(k) {
            Ok(())
        } else {
            Err(ChartError::OutOfRange {
                k,
                k_min: self.spec.k_min,
                k_max: self.spec.k_max,
            })
        }
    }

    #[inline]
    fn k_cell(&self, k: f64) -> (usize, f64) {
        let s = (k - self.spec.k_min) / self.k_step;
        let j = (s.floor().max(0.0) as usize).min(self.spec.n_k - 2);
        (j, s - j as f64)
    }

    /// `c(K)` and `c′(K)` from the quintic Hermite interpolant (no range check).
    #[inline]
    pub(crate) fn frequency_unchecked(&self, k: f64) -> (f64, f64) {
        let (j, w) = self.k_cell(k);
        let h = self.k_step;
        let coef = [
            self.c[j],
            h * self.c_prime[j],
            h * h * self.c_second[j],
            self.c[j + 1],
            h * self.c_prime[j + 1],
            h * h * self.c_second[j + 1],
        ];
        let b = hermite5(w);
        let db = hermite5_prime(w);
        let value = coef.iter().zip(&b).map(|(a, b)| a * b).sum();
        let slope = coef.iter().zip(&db).map(|(a, b)| a * b).sum::<f64>() / h;
        (value, slope)
    }

    pub fn c(&self, k: f64) -> Result<f64, ChartError> {
        self.check_k(k)?;
        Ok(self.frequency_unchecked(k).0)
    }

    pub fn c_prime(&self, k: f64) -> Result<f64, ChartError> {
        self.check_k(k)?;
        Ok(self.frequency_unchecked(k).1)
    }

    /// `Q(χ, K)` and `∂_χQ` for `χ ∈ [0, π]` from the bicubic patch.
    #[inline]
    fn q_reduced(&self, chi: f64, k: f64) -> (f64, f64) {
        let n_chi = self.spec.n_chi;
        let s = chi / self.chi_step;
        let i = (s.floor().max(0.0) as usize).min(n_chi - 1);
        let u = s - i as f64;
        let (j, w) = self.k_cell(k);
        let hu = hermite3(u);
        let dhu = hermite3_prime(u);
        let hw = hermite3(w);
        let (dc, dk) = (self.chi_step, self.k_step);
        let mut q = 0.0;
        let mut q_chi = 0.0;
        for b in 0..2 {
            let row = (j + b) * (n_chi + 1);
            for a in 0..2 {
                let n = self.table[row + i + a];
                let wv = hw[b];
                let wd = dk * hw[2 + b];
                q += (n.q * wv + n.q_k * wd) * hu[a] + dc * (n.q_chi * wv + n.q_chi_k * wd) * hu[2 + a];
                q_chi += (n.q * wv + n.q_k * wd) * dhu[a] / dc
                    + (n.q_chi * wv + n.q_chi_k * wd) * dhu[2 + a];
            }
        }
        (q, q_chi)
    }

    /// Solves `Q(χ, K) = q` for `χ ∈ [0, π]`, given `q ∈ [0, π]`.
    fn chi_reduced(&self, q: f64, k: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, PI);
        let mut chi = q.clamp(lo, hi);
        for _ in 0..100 {
            let (value, slope) = self.q_reduced(chi, k);
            let r = value - q;
            if r == 0.0 {
                return chi;
            }
            if r < 0.0 {
                lo = chi;
            } else {
                hi = chi;
            }
            let mut next = chi - r / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - chi).abs() <= 4.0 * f64::EPSILON * (1.0 + chi) {
                return next;
            }
            chi = next;
        }
        chi
    }

    /// `Q` for any angle `χ` at energy `k`, odd in `χ`, returned in `(−π, π]`.
    pub fn q_of_chi(&self, chi: f64, k: f64) -> Result<f64, ChartError> {
        self.check_k(k)?;
        Ok(self.q_of_chi_unchecked(chi, k))
    }

    #[inline]
    fn q_of_chi_unchecked(&self, chi: f64, k: f64) -> f64 {
        let r = wrap_angle(chi);
        let q = self.q_reduced(r.abs(), k).0.clamp(0.0, PI).copysign(r);
        wrap_angle(q)
    }

    /// Inverse of [`Self::q_of_chi`], returned in `(−π, π]`.
    pub fn chi_of_q(&self, q: f64, k: f64) -> Result<f64, ChartError> {
        self.check_k(k)?;
        let r = wrap_angle(q);
        Ok(wrap_angle(self.chi_reduced(r.abs(), k).copysign(r)))
    }

    pub fn to_action_angle(&self, p: PhasePoint) -> Result<ActionAngle, ChartError> {
        let ae = to_angle_energy(&self.params, p)?;
        self.check_k(ae.h)?;
        Ok(ActionAngle {
            q: self.q_of_chi_unchecked(ae.chi, ae.h),
            k: ae.h,
        })
    }

    pub fn from_action_angle(&self, aa: ActionAngle) -> Result<PhasePoint, ChartError> {
        let chi = self.chi_of_q(aa.q, aa.k)?;
        Ok(from_angle_energy(&self.params, AngleEnergy { chi, h: aa.k }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn eps(e: f64) -> PotentialParams {
        PotentialParams::new(e).unwrap()
    }

    #[test]
    fn angle_at_turning_points_and_axis() {
        let p = eps(0.1);
        let ae = to_angle_energy(&p, PhasePoint::new(1.3, 0.0)).unwrap();
        assert_eq!(ae.chi, 0.0);
        assert!((ae.h - p.phi(1.3)).abs() < 1e-15);
        let ae = to_angle_energy(&p, PhasePoint::new(0.0, 0.8)).unwrap();
        assert!((ae.chi - FRAC_PI_2).abs() < 1e-15);
        assert!((ae.h - 0.32).abs() < 1e-15);
        let ae = to_angle_energy(&p, PhasePoint::new(-1.3, 0.0)).unwrap();
        assert_eq!(ae.chi, PI);
        let ae = to_angle_energy(&p, PhasePoint::new(-1.3, -0.0)).unwrap();
        assert_eq!(ae.chi, PI);
        assert_eq!(to_angle_energy(&p, PhasePoint::new(0.0, 0.0)), Err(ChartError::Origin));
    }

    #[test]
    fn angle_reconstruction_identities() {
        let p = eps(0.1);
        for &(x, v) in &[(0.4, 1.1), (-0.9, 0.2), (-0.1, -1.7), (1.5, -0.6)] {
            let ae = to_angle_energy(&p, PhasePoint::new(x, v)).unwrap();
            assert!((ae.chi.sin() - v / (2.0 * ae.h).sqrt()).abs() < 1e-14);
            let cos = (p.phi(x) / ae.h).sqrt().copysign(x);
            assert!((ae.chi.cos() - cos).abs() < 1e-14);
            if x > 0.0 {
                assert!(ae.chi.abs() < FRAC_PI_2);
            } else {
                assert!(ae.chi.abs() > FRAC_PI_2);
            }
        }
    }

    #[test]
    fn inverse_angle_chart() {
        let p = eps(0.1);
        let q = from_angle_energy(&p, AngleEnergy { chi: 0.0, h: 2.0 });
        assert!((q.x - p.invert_phi(2.0).unwrap()).abs() < 1e-15 && q.v == 0.0);
        let q = from_angle_energy(&p, AngleEnergy { chi: FRAC_PI_2, h: 2.0 });
        assert!(q.x.abs() < 1e-7 && (q.v - 2.0).abs() < 1e-15);
        let q = from_angle_energy(&p, AngleEnergy { chi: PI / 4.0, h: 2.8 });
        assert!((q.x - p.invert_phi(1.4).unwrap()).abs() < 1e-14);
        assert!((q.v - 5.6f64.sqrt() / 2f64.sqrt()).abs() < 1e-14);
        let back = to_angle_energy(&p, q).unwrap();
        assert!((back.chi - PI / 4.0).abs() < 1e-14 && (back.h - 2.8).abs() < 1e-14);
    }

    #[test]
    fn rate_examples() {
        for chi in [0.0, 0.4, 2.0, -3.0] {
            assert_eq!(rate_a(&eps(0.0), AngleEnergy { chi, h: 3.0 }), 1.0);
        }
        for h in [0.3, 1.0, 5.0] {
            let r = rate_a(&eps(0.1), AngleEnergy { chi: FRAC_PI_2, h });
            assert!((r - 1.0).abs() < 1e-15);
        }
        // x = 1 is the turning point of h = Φ(1) = 0.55
        let r = rate_a(&eps(0.1), AngleEnergy { chi: 0.0, h: 0.55 });
        assert!((r - 1.2 / 1.1f64.sqrt()).abs() < 1e-14);
        assert!((r - 1.144155).abs() < 1e-6);
    }

    #[test]
    fn rate_matches_angular_velocity_along_flow() {
        // dχ/dt = −a, checked by differencing χ along the exact vector field
        let p = eps(0.1);
        let point = PhasePoint::new(0.9, 0.5);
        let dt = 1e-6;
        let fwd = PhasePoint::new(point.x + dt * point.v, point.v - dt * p.dphi(point.x));
        let bwd = PhasePoint::new(point.x - dt * point.v, point.v + dt * p.dphi(point.x));
        let rate = (to_angle_energy(&p, fwd).unwrap().chi - to_angle_energy(&p, bwd).unwrap().chi) / (2.0 * dt);
        let ae = to_angle_energy(&p, point).unwrap();
        assert!((rate + rate_a(&p, ae)).abs() < 1e-7, "{rate}");
    }

    #[test]
    fn harmonic_frequency_is_one() {
        for h in [0.1, 1.0, 9.0] {
            assert!((compute_c(&eps(0.0), h, 16).unwrap() - 1.0).abs() < 1e-15);
            assert_eq!(compute_c_prime(&eps(0.0), h, 16).unwrap(), 0.0);
        }
    }

    #[test]
    fn frequency_first_order() {
        let c = compute_c(&eps(0.01), 1.0, 64).unwrap();
        assert!((c - 1.015).abs() < 1e-3, "{c}");
    }

    #[test]
    fn trapezoid_converges_under_doubling() {
        let p = eps(0.1);
        for h in [0.475, 1.0, 2.1] {
            let a = compute_c(&p, h, 64).unwrap();
            let b = compute_c(&p, h, 128).unwrap();
            assert!((a - b).abs() <= 1e-12);
            let a = compute_c_prime(&p, h, 64).unwrap();
            let b = compute_c_prime(&p, h, 128).unwrap();
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn c_derivatives_match_finite_differences() {
        let p = eps(0.1);
        let step = 1e-4;
        for h in [0.5, 1.0, 1.7] {
            let fd = (compute_c(&p, h + step, 128).unwrap() - compute_c(&p, h - step, 128).unwrap()) / (2.0 * step);
            let cp = compute_c_prime(&p, h, 128).unwrap();
            assert!((fd - cp).abs() < 1e-8, "{fd} vs {cp}");
            let fd2 = (compute_c_prime(&p, h + step, 128).unwrap() - compute_c_prime(&p, h - step, 128).unwrap())
                / (2.0 * step);
            let cpp = compute_c_second(&p, h, 128).unwrap();
            assert!((fd2 - cpp).abs() < 1e-8, "{fd2} vs {cpp}");
        }
    }

    #[test]
    fn compute_c_rejects_bad_input() {
        assert!(compute_c(&eps(0.1), 0.0, 64).is_err());
        assert!(compute_c(&eps(0.1), 1.0, 8).is_err());
    }

    #[test]
    fn stiffening_slope_matches_difference() {
        let e = 0.1;
        for u in [0.0, 0.5, 3.0] {
            let d = 1e-6;
            let fd = (stiffening(e, u + d) - stiffening(e, u - d)) / (2.0 * d);
            assert!((fd - stiffening_slope(e, u)).abs() < 1e-9);
        }
    }

    fn chart(e: f64) -> OrbitChart {
        build_chart(&eps(e), 0.475, 2.1, 32, 128).unwrap()
    }

    #[test]
    fn chart_rejects_bad_resolution() {
        assert!(build_chart(&eps(0.1), 0.475, 2.1, 4, 128).is_err());
        assert!(build_chart(&eps(0.1), 0.475, 2.1, 16, 8).is_err());
        assert!(build_chart(&eps(0.1), 2.0, 1.0, 16, 128).is_err());
        assert!(build_chart(&eps(0.1), 0.0, 1.0, 16, 128).is_err());
    }

    #[test]
    fn harmonic_chart_is_identity() {
        let ch = chart(0.0);
        for i in 0..=50 {
            let chi = PI * i as f64 / 50.0;
            for k in [0.475, 1.0, 1.33, 2.1] {
                assert!((ch.q_of_chi(chi, k).unwrap() - chi).abs() < 1e-13);
            }
        }
        assert_eq!(ch.delta(), 0.0);
    }

    #[test]
    fn chart_symmetry_points() {
        let ch = chart(0.1);
        for &k in ch.k_grid() {
            assert!((ch.q_of_chi(FRAC_PI_2, k).unwrap() - FRAC_PI_2).abs() <= 1e-10);
            assert!((ch.q_of_chi(-FRAC_PI_2, k).unwrap() + FRAC_PI_2).abs() <= 1e-10);
            assert_eq!(ch.q_of_chi(0.0, k).unwrap(), 0.0);
            assert!((ch.q_of_chi(PI - 1e-15, k).unwrap() - PI).abs() <= 1e-10);
        }
    }

    #[test]
    fn chart_inverse_round_trip() {
        let ch = chart(0.1);
        let q = ch.q_of_chi(1.0, 1.0).unwrap();
        assert!((ch.chi_of_q(q, 1.0).unwrap() - 1.0).abs() <= 1e-9);
        // the angular speed peaks at the turning point, so Q lags χ on (0, π/2)
        assert!(q < 1.0);
    }

    #[test]
    fn chart_matches_direct_integration() {
        let p = eps(0.1);
        let ch = chart(0.1);
        let gauss = GaussRule::new(40);
        for &(chi, k) in &[(0.37, 0.81), (1.2, 1.555), (2.9, 2.03)] {
            let c = compute_c(&p, k, 128).unwrap();
            let direct = c * gauss.integrate(0.0, chi, |s| inverse_rate(0.1, x_sq(&p, s, k)));
            assert!((ch.q_of_chi(chi, k).unwrap() - direct).abs() < 1e-9);
            assert!((ch.c(k).unwrap() - c).abs() < 1e-12);
        }
    }

    #[test]
    fn chart_out_of_range() {
        let ch = chart(0.1);
        assert!(matches!(ch.c(3.0), Err(ChartError::OutOfRange { .. })));
        assert!(ch.to_action_angle(PhasePoint::new(0.0, 0.1)).is_err());
    }

    #[test]
    fn action_angle_examples() {
        let ch = chart(0.1);
        let aa = ch.to_action_angle(PhasePoint::new(0.0, 1.5)).unwrap();
        assert!((aa.q - FRAC_PI_2).abs() < 1e-10 && (aa.k - 1.125).abs() < 1e-15);
        let xt = ch.params().invert_phi(1.2).unwrap();
        let aa = ch.to_action_angle(PhasePoint::new(xt, 0.0)).unwrap();
        assert!(aa.q.abs() < 1e-15 && (aa.k - 1.2).abs() < 1e-14);
        let p = ch.from_action_angle(ActionAngle { q: FRAC_PI_2, k: 1.125 }).unwrap();
        assert!(p.x.abs() < 1e-7 && (p.v - 1.5).abs() < 1e-12);
        let p = ch.from_action_angle(ActionAngle { q: 0.0, k: 1.2 }).unwrap();
        assert!((p.x - xt).abs() < 1e-14 && p.v.abs() < 1e-15);
        let p = ch.from_action_angle(ActionAngle { q: 0.7, k: 1.3 }).unwrap();
        let aa = ch.to_action_angle(p).unwrap();
        assert!((aa.q - 0.7).abs() < 1e-9 && (aa.k - 1.3).abs() < 1e-12);
    }

    #[test]
    fn interpolated_frequency_is_smooth_and_consistent() {
        let ch = chart(0.1);
        let step = 1e-5;
        for i in 0..40 {
            let k = 0.5 + 0.04 * i as f64 + 0.0123;
            let fd = (ch.c(k + step).unwrap() - ch.c(k - step).unwrap()) / (2.0 * step);
            assert!((fd - ch.c_prime(k).unwrap()).abs() < 1e-9);
            let exact = compute_c_prime(ch.params(), k, 128).unwrap();
            assert!((exact - ch.c_prime(k).unwrap()).abs() < 1e-9);
        }
    }
}
