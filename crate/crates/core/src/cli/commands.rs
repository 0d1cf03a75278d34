use std::f64::consts::{PI, TAU};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::checks::{run_checks, ValidationReport};
use super::config::{ConfigError, ExperimentConfig};
use super::{CliError, SelfTest};
use crate::action_angle::{compute_c, compute_c_prime, ActionAngle, ChartError, ChartSpec, OrbitChart};
use crate::flow::FlowSpec;
use crate::mixing::{
    decay_schedule, fit_decay, fit_power_law, late_early_ratio, sup_phi_t, EnvelopePoint, DECAY_RATIO_THRESHOLD,
};
use crate::moments::{moment_series, SpatialGrid, VelocityQuadrature};
use crate::potential::{PhasePoint, PotentialParams};
use crate::transport::{evaluate_f_actionangle, evaluate_f_characteristic, ActionAngleSolution, InitialData};

/// Largest change of `c` or `c′` at a chart node allowed when the closed-orbit
/// node count doubles.
pub const CHART_CONVERGENCE_TOLERANCE: f64 = 1e-12;

/// Cross-solver agreement required by `evolve --validate`.
pub const CROSS_SOLVER_TOLERANCE: f64 = 1e-4;

/// Everything derived from a configuration before a run.
pub struct Setup {
    pub params: PotentialParams,
    pub chart: Arc<OrbitChart>,
    pub f0: InitialData,
    pub grid: SpatialGrid,
    pub quad: VelocityQuadrature,
}

fn chart_error(e: ChartError) -> CliError {
    match e {
        ChartError::InvalidParameter(msg) => CliError::Config(ConfigError::Key {
            key: "n_k/n_chi".into(),
            message: msg,
        }),
        other => CliError::Convergence(format!("chart construction failed: {other}")),
    }
}

pub fn chart_spec(cfg: &ExperimentConfig) -> ChartSpec {
    ChartSpec::for_support(cfg.c_s, cfg.chart_margin, cfg.n_k, cfg.n_chi)
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        Self::with_epsilon(cfg, cfg.epsilon)
    }

    pub fn with_epsilon(cfg: &ExperimentConfig, epsilon: f64) -> Result<Self, CliError> {
        let config_error = |key: &str, message: String| {
            CliError::Config(ConfigError::Key {
                key: key.into(),
                message,
            })
        };
        let params = PotentialParams::new(epsilon).map_err(|e| config_error("epsilon", e.to_string()))?;
        let chart = Arc::new(OrbitChart::build(&params, chart_spec(cfg)).map_err(chart_error)?);
        let f0 = InitialData::new(cfg.c_s, cfg.alpha, cfg.m, chart.clone())
            .map_err(|e| config_error("chart_margin", e.to_string()))?;
        let grid = SpatialGrid::for_support(&params, cfg.c_s, cfg.grid_points)
            .map_err(|e| config_error("grid_points", e.to_string()))?;
        let quad =
            VelocityQuadrature::new(cfg.velocity_nodes).map_err(|e| config_error("velocity_nodes", e.to_string()))?;
        Ok(Self {
            params,
            chart,
            f0,
            grid,
            quad,
        })
    }

    pub fn evaluator(&self) -> ActionAngleSolution {
        ActionAngleSolution { f0: self.f0.clone() }
    }

    /// Orbital period at the middle of the support annulus.
    pub fn mid_period(&self) -> f64 {
        let (lo, hi) = self.f0.energy_support();
        TAU / self.chart.c(0.5 * (lo + hi)).expect("support inside chart")
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(dir: &Path, name: &str, body: &[u8]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(body).and_then(|_| w.flush()).map_err(|e| io_error(&path, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut body = serde_json::to_vec_pretty(value).expect("report serializes");
    body.push(b'\n');
    write_file(dir, name, &body)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartSummary {
    pub epsilon: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
    pub n_chi: usize,
    pub n_quad: usize,
    /// Smallest `c′` over the nodes.
    pub min_c_prime: f64,
    pub max_c_prime: f64,
    pub c_strictly_increasing: bool,
    /// Largest node change of `c` and `c′` when the orbit node count doubles.
    pub c_doubling_delta: f64,
    pub c_prime_doubling_delta: f64,
    pub converged: bool,
}

pub fn cmd_chart(cfg: &ExperimentConfig) -> Result<ChartSummary, CliError> {
    let setup = Setup::new(cfg)?;
    let chart = &setup.chart;
    let spec = *chart.spec();
    let mut csv = String::from("K,c,c_prime\n");
    for ((k, c), cp) in chart.k_grid().iter().zip(chart.c_nodes()).zip(chart.c_prime_nodes()) {
        csv.push_str(&format!("{},{},{}\n", num(*k), num(*c), num(*cp)));
    }
    let doubled = 2 * spec.n_quad;
    let deltas = chart
        .k_grid()
        .par_iter()
        .zip(chart.c_nodes())
        .zip(chart.c_prime_nodes())
        .map(|((&k, &c), &cp)| {
            let c2 = compute_c(&setup.params, k, doubled).unwrap_or(f64::NAN);
            let cp2 = compute_c_prime(&setup.params, k, doubled).unwrap_or(f64::NAN);
            ((c2 - c).abs(), (cp2 - cp).abs())
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    let cp = chart.c_prime_nodes();
    let summary = ChartSummary {
        epsilon: cfg.epsilon,
        k_min: spec.k_min,
        k_max: spec.k_max,
        n_k: spec.n_k,
        n_chi: spec.n_chi,
        n_quad: spec.n_quad,
        min_c_prime: cp.iter().copied().fold(f64::INFINITY, f64::min),
        max_c_prime: cp.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        c_strictly_increasing: chart.c_nodes().windows(2).all(|w| w[1] > w[0]),
        c_doubling_delta: deltas.0,
        c_prime_doubling_delta: deltas.1,
        converged: deltas.0 <= CHART_CONVERGENCE_TOLERANCE && deltas.1 <= CHART_CONVERGENCE_TOLERANCE,
    };
    write_file(&cfg.output_dir, "chart.csv", csv.as_bytes())?;
    write_json(&cfg.output_dir, "chart_summary.json", &summary)?;
    if !summary.converged {
        return Err(CliError::Convergence(format!(
            "closed-orbit quadrature not converged: doubling changes c by {:.3e} and c' by {:.3e}",
            deltas.0, deltas.1
        )));
    }
    Ok(summary)
}

/// `t = 0` followed by `samples_per_decade` log-spaced times per decade from `t = 1`.
pub fn evolve_times(cfg: &ExperimentConfig) -> Vec<f64> {
    if let Some(times) = &cfg.evolve_times {
        return times.clone();
    }
    let per = cfg.samples_per_decade.max(1) as f64;
    let n = (cfg.t_max.log10() * per).floor().max(0.0) as usize;
    let mut times = vec![0.0];
    times.extend((0..=n).map(|i| 10f64.powf(i as f64 / per)).filter(|&t| t < cfg.t_max));
    times.push(cfg.t_max);
    times.dedup();
    times
}

/// Stratified jittered sample of the support annulus, `n × n` cells in `(Q, K)`.
pub fn support_sample(f0: &InitialData, n: usize, seed: u64) -> Vec<PhasePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = f0.energy_support();
    let mut points = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let k = lo + (hi - lo) * (i as f64 + rng.random::<f64>()) / n as f64;
            let q = -PI + TAU * (j as f64 + rng.random::<f64>()) / n as f64;
            let p = f0
                .chart()
                .from_action_angle(ActionAngle { q, k })
                .expect("support inside chart");
            points.push(p);
        }
    }
    points
}

/// `max |f_characteristic − f_chart|` over `points` at time `t`.
pub fn cross_solver_error(
    f0: &InitialData,
    points: &[PhasePoint],
    t: f64,
    spec: &FlowSpec,
) -> Result<f64, CliError> {
    points
        .par_iter()
        .map(|&p| {
            let a = evaluate_f_actionangle(f0, t, p);
            let c = evaluate_f_characteristic(f0.params(), f0, t, p, spec);
            match (a, c) {
                (Ok(a), Ok(c)) => Ok((a - c).abs()),
                (Err(e), _) | (_, Err(e)) => Err(CliError::Convergence(e.to_string())),
            }
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

#[derive(Debug, Clone, Serialize)]
struct EvolveValidation {
    tolerance: f64,
    samples: usize,
    times: Vec<f64>,
    max_errors: Vec<f64>,
    passed: bool,
}

/// Writes `evolve.csv`; returns the number of data rows.
pub fn cmd_evolve(cfg: &ExperimentConfig, validate: bool) -> Result<usize, CliError> {
    let setup = Setup::new(cfg)?;
    let times = evolve_times(cfg);
    let series = moment_series(&setup.evaluator(), &times, &setup.grid, &setup.quad)
        .map_err(|e| CliError::Convergence(e.to_string()))?;
    let mut csv = String::from("t,x,rho,j,phi,phi_t\n");
    let mut rows = 0;
    for s in &series.snapshots {
        for (i, x) in series.x.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                num(s.t),
                num(*x),
                num(s.rho[i]),
                num(s.j[i]),
                num(s.phi[i]),
                num(s.phi_t[i])
            ));
            rows += 1;
        }
    }
    let validation = if validate {
        let spec = FlowSpec::adaptive(cfg.flow_tolerance).map_err(|e| CliError::Convergence(e.to_string()))?;
        let points = support_sample(&setup.f0, cfg.validation_samples, cfg.seed);
        let max_errors = times
            .iter()
            .map(|&t| cross_solver_error(&setup.f0, &points, t, &spec))
            .collect::<Result<Vec<_>, _>>()?;
        let passed = max_errors.iter().all(|&e| e <= CROSS_SOLVER_TOLERANCE);
        Some(EvolveValidation {
            tolerance: CROSS_SOLVER_TOLERANCE,
            samples: points.len(),
            times: times.clone(),
            max_errors,
            passed,
        })
    } else {
        None
    };
    write_file(&cfg.output_dir, "evolve.csv", csv.as_bytes())?;
    if let Some(v) = validation {
        write_json(&cfg.output_dir, "evolve_validation.json", &v)?;
        if !v.passed {
            let worst = v.max_errors.iter().copied().fold(0.0, f64::max);
            return Err(CliError::Convergence(format!(
                "solver cross-validation failed: max difference {worst:.3e} exceeds {CROSS_SOLVER_TOLERANCE:e}"
            )));
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlOutput {
    pub epsilon: f64,
    pub late_early_ratio: Option<f64>,
    pub decays: bool,
    /// Largest relative change of `sup |φ_t|` between `t` and `t + 2π`.
    pub periodicity_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayOutput {
    pub epsilon: f64,
    pub period: f64,
    pub slope: f64,
    pub window: (f64, f64),
    pub residual: f64,
    pub envelope: Vec<EnvelopePoint>,
    pub times: Vec<f64>,
    pub sup_values: Vec<f64>,
    pub tail_slope: Vec<f64>,
    /// Envelope slope of `sup |∂ₓφ_t|`.
    pub dx_slope: Option<f64>,
    pub late_early_ratio: Option<f64>,
    pub decays: bool,
    pub control: Option<ControlOutput>,
}

fn decays(ratio: Option<f64>) -> bool {
    ratio.is_some_and(|r| r <= DECAY_RATIO_THRESHOLD)
}

/// Harmonic run sampled on `[0, 2π]`, one revolution later, and on `[t_max − 2π, t_max]`.
pub fn harmonic_control(cfg: &ExperimentConfig) -> Result<ControlOutput, CliError> {
    let setup = Setup::with_epsilon(cfg, 0.0)?;
    let n = cfg.samples_per_period.max(2);
    let early: Vec<f64> = (0..=n).map(|i| TAU * i as f64 / n as f64).collect();
    let late_start = (cfg.t_max - TAU).max(0.0);
    let mut times: Vec<f64> = early.iter().flat_map(|&t| [t, t + TAU, late_start + t]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    let report = sup_phi_t(&setup.evaluator(), &setup.grid, &times, &setup.quad)
        .map_err(|e| CliError::Convergence(e.to_string()))?;
    let at = |t: f64| {
        let i = report
            .times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
            .expect("sampled time");
        report.sup_values[i]
    };
    let scale = early.iter().map(|&t| at(t)).fold(0.0, f64::max);
    let periodicity_error = early
        .iter()
        .map(|&t| (at(t + TAU) - at(t)).abs() / scale.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let ratio = late_early_ratio(&report.times, &report.sup_values, cfg.t_max, TAU);
    Ok(ControlOutput {
        epsilon: 0.0,
        late_early_ratio: ratio,
        decays: decays(ratio),
        periodicity_error,
    })
}

pub fn cmd_decay(cfg: &ExperimentConfig) -> Result<DecayOutput, CliError> {
    let setup = Setup::new(cfg)?;
    let period = setup.mid_period();
    let times = decay_schedule(cfg.t_max, cfg.samples_per_decade, period, cfg.samples_per_period);
    let report = sup_phi_t(&setup.evaluator(), &setup.grid, &times, &setup.quad)
        .map_err(|e| CliError::Convergence(e.to_string()))?;
    let report = fit_decay(report, cfg.fit_window, period).map_err(|e| CliError::Convergence(e.to_string()))?;
    let fit = report.fit.clone().expect("fitted");
    let ratio = late_early_ratio(&report.times, &report.sup_values, cfg.t_max, TAU);
    let control = if cfg.control { Some(harmonic_control(cfg)?) } else { None };
    let out = DecayOutput {
        epsilon: cfg.epsilon,
        period,
        slope: fit.slope,
        window: fit.window,
        residual: fit.residual,
        envelope: fit.envelope,
        dx_slope: report.dx_fit.as_ref().map(|f| f.slope),
        times: report.times,
        sup_values: report.sup_values,
        tail_slope: report.tail_slopes,
        late_early_ratio: ratio,
        decays: decays(ratio),
        control,
    };
    write_json(&cfg.output_dir, "decay.json", &out)?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfTestOutput {
    pub mode: String,
    pub expected_slope: f64,
    pub tolerance: f64,
    pub slope: f64,
    pub window: (f64, f64),
    pub residual: f64,
    pub passed: bool,
}

/// Fits a synthetic series with a known exponent through the decay pipeline.
pub fn cmd_self_test(cfg: &ExperimentConfig, mode: SelfTest) -> Result<SelfTestOutput, CliError> {
    let period = TAU;
    let times = decay_schedule(cfg.t_max, cfg.samples_per_decade, period, cfg.samples_per_period.max(32));
    let (name, expected, tolerance, values): (_, _, _, Vec<f64>) = match mode {
        SelfTest::PowerLaw => ("power-law", -2.0, 1e-10, times.iter().map(|t| t.powi(-2)).collect()),
        SelfTest::Oscillating => (
            "oscillating",
            -1.0,
            0.05,
            times.iter().map(|t| (2.0 + t.sin()) / t).collect(),
        ),
    };
    let fit = fit_power_law(&times, &values, cfg.fit_window, period).map_err(|e| CliError::Convergence(e.to_string()))?;
    let out = SelfTestOutput {
        mode: name.to_string(),
        expected_slope: expected,
        tolerance,
        slope: fit.slope,
        window: fit.window,
        residual: fit.residual,
        passed: (fit.slope - expected).abs() <= tolerance,
    };
    write_json(&cfg.output_dir, "self_test.json", &out)?;
    if !out.passed {
        return Err(CliError::Convergence(format!(
            "self-test slope {} differs from {expected} by more than {tolerance:e}",
            out.slope
        )));
    }
    Ok(out)
}

pub fn cmd_validate(cfg: &ExperimentConfig) -> Result<ValidationReport, CliError> {
    let report = run_checks(cfg);
    write_json(&cfg.output_dir, "validate.json", &report)?;
    Ok(report)
}
