//! Measurements of phase mixing.
//!
//! * decay of `sup_x |∂ₜφ|` and a power-law fit to its envelope,
//! * sup norms of the commuted fields `Yℓf̄` with `Y = t·c′(K)∂_Q − ∂_K`,
//! * Fourier coefficients of `Q ↦ f̄(t, Q, K)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moments::{moment_series, MomentError, SpatialGrid, VelocityQuadrature};
use crate::transport::{advance_angle, Evaluator, InitialData};

/// Late/early envelope ratio at or below which a run counts as decaying.
pub const DECAY_RATIO_THRESHOLD: f64 = 0.05;

/// Relative change of a probe norm allowed when both FD steps are halved.
pub const FD_HALVING_BUDGET: f64 = 0.01;

pub const MIN_FIT_POINTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixingError {
    #[error("time samples must be non-empty, finite and strictly increasing")]
    BadTimes,
    #[error("fit window [{0}, {1}] is empty or inverted")]
    BadWindow(f64, f64),
    #[error("oscillation period must be positive, got {0}")]
    BadPeriod(f64),
    #[error("fit window holds {have} envelope points, need at least {need}")]
    InsufficientPoints { have: usize, need: usize },
    #[error("envelope contains non-positive values, log-log fit undefined")]
    NonPositiveEnvelope,
    #[error("finite differences of order {order} changed by {change:.3e} under step halving (budget {budget})")]
    FdValidation { order: usize, change: f64, budget: f64 },
    #[error("spectrum needs n_q >= 4·k_max and k_max >= 1, got n_q = {n_q}, k_max = {k_max}")]
    BadSpectrum { n_q: usize, k_max: usize },
    #[error("energy {0} is outside the chart")]
    OffChart(f64),
    #[error(transparent)]
    Moment(#[from] MomentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub t: f64,
    pub value: f64,
}

/// Least-squares line through `(log t, log value)` of the envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub window: (f64, f64),
    pub envelope: Vec<EnvelopePoint>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    /// `sup_x |φ_t|` on the compact grid.
    pub sup_values: Vec<f64>,
    /// `|j(0, t)|`, the slope of `φ_t` outside the support.
    pub tail_slopes: Vec<f64>,
    /// `sup_x |∂ₓφ_t| = sup_x |j − j(0)|`.
    pub sup_dx_values: Vec<f64>,
    pub fit: Option<PowerLawFit>,
    pub dx_fit: Option<PowerLawFit>,
}

impl DecayReport {
    pub fn slope(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.slope)
    }

    pub fn residual(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.residual)
    }
}

fn check_times(times: &[f64]) -> Result<(), MixingError> {
    let ordered = times.windows(2).all(|w| w[0] < w[1]);
    if times.is_empty() || !ordered || !times.iter().all(|t| t.is_finite()) {
        return Err(MixingError::BadTimes);
    }
    Ok(())
}

/// Sup of `|φ_t|` and the tail slopes at each time (no fit).
pub fn sup_phi_t<E: Evaluator + ?Sized>(
    eval: &E,
    grid: &SpatialGrid,
    times: &[f64],
    quad: &VelocityQuadrature,
) -> Result<DecayReport, MixingError> {
    check_times(times)?;
    let series = moment_series(eval, times, grid, quad)?;
    let mut report = DecayReport {
        times: times.to_vec(),
        ..Default::default()
    };
    for s in &series.snapshots {
        let j0 = s.j[grid.center()];
        report.sup_values.push(s.sup_phi_t());
        report.tail_slopes.push(s.tail_slope());
        report
            .sup_dx_values
            .push(s.j.iter().fold(0.0f64, |m, &j| m.max((j - j0).abs())));
    }
    Ok(report)
}

/// Maxima over successive periods `[t_lo + nP, t_lo + (n+1)P)` inside the window.
pub fn envelope(
    times: &[f64],
    values: &[f64],
    window: (f64, f64),
    period: f64,
) -> Result<Vec<EnvelopePoint>, MixingError> {
    let (t_lo, t_hi) = window;
    if !(t_lo.is_finite() && t_hi.is_finite() && t_lo < t_hi) {
        return Err(MixingError::BadWindow(t_lo, t_hi));
    }
    if !(period.is_finite() && period > 0.0) {
        return Err(MixingError::BadPeriod(period));
    }
    let mut out = Vec::new();
    let mut start = t_lo;
    while start + period <= t_hi * (1.0 + 1e-12) {
        let end = start + period;
        let best = times
            .iter()
            .zip(values)
            .filter(|(&t, _)| t >= start && t < end)
            .fold(None::<EnvelopePoint>, |acc, (&t, &value)| match acc {
                Some(p) if p.value >= value => Some(p),
                _ => Some(EnvelopePoint { t, value }),
            });
        out.extend(best);
        start = end;
    }
    Ok(out)
}

/// Fits `log v = slope·log t + intercept` to the envelope of `values`.
pub fn fit_power_law(
    times: &[f64],
    values: &[f64],
    window: (f64, f64),
    period: f64,
) -> Result<PowerLawFit, MixingError> {
    let env = envelope(times, values, window, period)?;
    if env.len() < MIN_FIT_POINTS {
        return Err(MixingError::InsufficientPoints {
            have: env.len(),
            need: MIN_FIT_POINTS,
        });
    }
    if env.iter().any(|p| !(p.value > 0.0 && p.t > 0.0)) {
        return Err(MixingError::NonPositiveEnvelope);
    }
    let n = env.len() as f64;
    let xs: Vec<f64> = env.iter().map(|p| p.t.ln()).collect();
    let ys: Vec<f64> = env.iter().map(|p| p.value.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PowerLawFit {
        slope,
        intercept,
        residual,
        window,
        envelope: env,
    })
}

/// Attaches envelope fits of `sup |φ_t|` and `sup |∂ₓφ_t|` to the report.
pub fn fit_decay(mut report: DecayReport, window: (f64, f64), period: f64) -> Result<DecayReport, MixingError> {
    report.fit = Some(fit_power_law(&report.times, &report.sup_values, window, period)?);
    report.dx_fit = fit_power_law(&report.times, &report.sup_dx_values, window, period).ok();
    Ok(report)
}

fn max_in(times: &[f64], values: &[f64], lo: f64, hi: f64) -> f64 {
    times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= lo && t <= hi)
        .fold(0.0f64, |m, (_, &v)| m.max(v))
}

/// `max over [t_end − span, t_end]` divided by `max over [0, span]`.
///
/// `None` when the early maximum vanishes.
pub fn late_early_ratio(times: &[f64], values: &[f64], t_end: f64, span: f64) -> Option<f64> {
    let early = max_in(times, values, 0.0, span);
    let late = max_in(times, values, t_end - span, t_end);
    (early > 0.0).then(|| late / early)
}

/// Uniform samples `period/per_period` apart on `[0, t_max]`, merged with
/// `per_decade` log-spaced samples per decade from `t = 1`.
pub fn decay_schedule(t_max: f64, per_decade: usize, period: f64, per_period: usize) -> Vec<f64> {
    let mut times = Vec::new();
    let step = period / per_period.max(1) as f64;
    let count = (t_max / step).floor() as usize;
    times.extend((0..=count).map(|i| i as f64 * step));
    if per_decade > 0 {
        let n = (t_max.log10() * per_decade as f64).floor().max(0.0) as usize;
        times.extend((0..=n).map(|i| 10f64.powf(i as f64 / per_decade as f64)));
    }
    times.push(t_max);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    times
}

/// Central-difference steps in `Q` and `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSteps {
    pub dq: f64,
    pub dk: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self { dq: 1e-3, dk: 1e-3 }
    }
}

impl FdSteps {
    pub fn halved(self) -> Self {
        Self {
            dq: 0.5 * self.dq,
            dk: 0.5 * self.dk,
        }
    }
}

/// Tensor sample of the support in `(Q, K)`: equispaced `Q`, cell-centred `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct QkSamples {
    pub q: Vec<f64>,
    pub k: Vec<f64>,
}

impl QkSamples {
    pub fn for_support(f0: &InitialData, n_q: usize, n_k: usize) -> Self {
        let (lo, hi) = f0.energy_support();
        Self {
            q: (0..n_q).map(|i| -PI + TAU * i as f64 / n_q as f64).collect(),
            k: (0..n_k)
                .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n_k as f64)
                .collect(),
        }
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.k
            .iter()
            .flat_map(|&k| self.q.iter().map(move |&q| (q, k)))
            .collect()
    }
}

/// `f̄(t, Q, K) = f₀(Q + c(K)t, K)`.
#[inline]
pub fn translated(f0: &InitialData, t: f64, q: f64, k: f64) -> f64 {
    let c = f0.chart().frequency_unchecked(k).0;
    f0.value_qk(advance_angle(q, c, t), k)
}

/// `(Yℓ f̄)(t, Q, K)` for `ℓ ≤ 2` by nested central differences.
pub fn apply_y(f0: &InitialData, t: f64, q: f64, k: f64, order: usize, steps: FdSteps) -> f64 {
    if order == 0 {
        return translated(f0, t, q, k);
    }
    let inner = |q: f64, k: f64| apply_y(f0, t, q, k, order - 1, steps);
    let d_q = (inner(q + steps.dq, k) - inner(q - steps.dq, k)) / (2.0 * steps.dq);
    let d_k = (inner(q, k + steps.dk) - inner(q, k - steps.dk)) / (2.0 * steps.dk);
    t * f0.chart().frequency_unchecked(k).1 * d_q - d_k
}

fn partials(f0: &InitialData, t: f64, q: f64, k: f64, steps: FdSteps) -> (f64, f64) {
    let d_q = (translated(f0, t, q + steps.dq, k) - translated(f0, t, q - steps.dq, k)) / (2.0 * steps.dq);
    let d_k = (translated(f0, t, q, k + steps.dk) - translated(f0, t, q, k - steps.dk)) / (2.0 * steps.dk);
    (d_q, d_k)
}

/// Sup norms over the samples at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorFieldNorms {
    pub t: f64,
    /// `sup |Yℓ f̄|` for `ℓ = 0, 1, 2`.
    pub sup: [f64; 3],
    pub sup_dq: f64,
    pub sup_dk: f64,
    /// Relative change of `sup` when both steps are halved.
    pub fd_change: [f64; 3],
}

fn sup_norms(f0: &InitialData, t: f64, pts: &[(f64, f64)], steps: FdSteps) -> ([f64; 3], f64, f64) {
    pts.par_iter()
        .map(|&(q, k)| {
            let (dq, dk) = partials(f0, t, q, k, steps);
            let y = [0, 1, 2].map(|l| apply_y(f0, t, q, k, l, steps).abs());
            (y, dq.abs(), dk.abs())
        })
        .reduce(
            || ([0.0; 3], 0.0, 0.0),
            |a, b| {
                (
                    [a.0[0].max(b.0[0]), a.0[1].max(b.0[1]), a.0[2].max(b.0[2])],
                    a.1.max(b.1),
                    a.2.max(b.2),
                )
            },
        )
}

/// Sup norms of `Yℓ f̄`, `∂_Q f̄` and `∂_K f̄`, validated by halving the steps.
pub fn vector_field_norms(
    f0: &InitialData,
    t: f64,
    steps: FdSteps,
    samples: &QkSamples,
) -> Result<VectorFieldNorms, MixingError> {
    let pts = samples.points();
    let (sup, sup_dq, sup_dk) = sup_norms(f0, t, &pts, steps);
    let (fine, _, _) = sup_norms(f0, t, &pts, steps.halved());
    let mut fd_change = [0.0; 3];
    for l in 0..3 {
        fd_change[l] = if fine[l] > 0.0 {
            (sup[l] - fine[l]).abs() / fine[l]
        } else {
            0.0
        };
        if fd_change[l] > FD_HALVING_BUDGET {
            return Err(MixingError::FdValidation {
                order: l,
                change: fd_change[l],
                budget: FD_HALVING_BUDGET,
            });
        }
    }
    Ok(VectorFieldNorms {
        t,
        sup: fine,
        sup_dq,
        sup_dk,
        fd_change,
    })
}

/// Time history of `sup |Yℓ f̄|` for one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorFieldProbe {
    pub order: usize,
    pub times: Vec<f64>,
    pub sup_norms: Vec<f64>,
}

pub fn vector_field_probes(
    f0: &InitialData,
    times: &[f64],
    steps: FdSteps,
    samples: &QkSamples,
) -> Result<Vec<VectorFieldProbe>, MixingError> {
    let norms = times
        .iter()
        .map(|&t| vector_field_norms(f0, t, steps, samples))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..3)
        .map(|order| VectorFieldProbe {
            order,
            times: times.to_vec(),
            sup_norms: norms.iter().map(|n| n.sup[order]).collect(),
        })
        .collect())
}

/// Fourier coefficients `f̂_k`, `k = −k_max..=k_max`, at one `(t, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEntry {
    pub t: f64,
    pub energy: f64,
    pub coefficients: Vec<Complex64>,
    /// `ĝ_k = f̂_k/(ik)`; the `k = 0` slot holds `None`.
    pub g_coefficients: Vec<Option<Complex64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub k_max: usize,
    pub entries: Vec<SpectrumEntry>,
}

impl SpectrumEntry {
    pub fn mode(&self, k: i64) -> Complex64 {
        let k_max = (self.coefficients.len() / 2) as i64;
        self.coefficients[(k + k_max) as usize]
    }
}

impl SpectrumReport {
    pub fn modes(&self) -> std::ops::RangeInclusive<i64> {
        -(self.k_max as i64)..=self.k_max as i64
    }
}

/// DFT of `Q ↦ f̄(t, Q, K)` on `n_q` angles `Q_j = 2πj/n_q`.
pub fn q_fourier_spectrum(
    f0: &InitialData,
    t: f64,
    energy: f64,
    k_max: usize,
    n_q: usize,
) -> Result<SpectrumEntry, MixingError> {
    if k_max == 0 || n_q < 4 * k_max {
        return Err(MixingError::BadSpectrum { n_q, k_max });
    }
    if !f0.chart().contains(energy) {
        return Err(MixingError::OffChart(energy));
    }
    let samples: Vec<f64> = (0..n_q)
        .map(|j| translated(f0, t, TAU * j as f64 / n_q as f64, energy))
        .collect();
    let kk = k_max as i64;
    let coefficients: Vec<Complex64> = (-kk..=kk)
        .map(|k| {
            let sum: Complex64 = samples
                .iter()
                .enumerate()
                .map(|(j, &f)| {
                    // reduce k·j mod n_q so the twiddle angle stays in [0, 2π)
                    let r = (k * j as i64).rem_euclid(n_q as i64) as f64;
                    f * Complex64::from_polar(1.0, -TAU * r / n_q as f64)
                })
                .sum();
            sum / n_q as f64
        })
        .collect();
    let g_coefficients = (-kk..=kk)
        .zip(&coefficients)
        .map(|(k, &f)| (k != 0).then(|| f / Complex64::new(0.0, k as f64)))
        .collect();
    Ok(SpectrumEntry {
        t,
        energy,
        coefficients,
        g_coefficients,
    })
}

pub fn spectrum_report(
    f0: &InitialData,
    times: &[f64],
    energies: &[f64],
    k_max: usize,
    n_q: usize,
) -> Result<SpectrumReport, MixingError> {
    let entries = times
        .iter()
        .flat_map(|&t| energies.iter().map(move |&k| (t, k)))
        .map(|(t, k)| q_fourier_spectrum(f0, t, k, k_max, n_q))
        .collect::<Result<_, _>>()?;
    Ok(SpectrumReport { k_max, entries })
}
