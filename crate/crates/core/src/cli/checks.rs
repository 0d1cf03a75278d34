//! Invariant checks run by `phasemix validate`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::commands::{chart_spec, cross_solver_error, support_sample};
use super::config::ExperimentConfig;
use crate::action_angle::{compute_c, from_angle_energy, wrap_angle, ActionAngle, AngleEnergy, OrbitChart};
use crate::flow::{flow_map, orbit_period, FlowSpec};
use crate::mixing::{
    apply_y, fit_power_law, q_fourier_spectrum, vector_field_norms, FdSteps, QkSamples,
};
use crate::moments::{
    phi_t_fd, phi_t_reconstruct, snapshot, total_mass, SpatialGrid, VelocityQuadrature,
};
use crate::potential::{PhasePoint, PotentialParams};
use crate::transport::{advance_angle, evaluate_f_actionangle, ActionAngleSolution, InitialData};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub tolerance: f64,
    pub measured: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

type Outcome = Result<(f64, Option<String>), String>;

pub struct CheckDef {
    pub name: &'static str,
    pub description: &'static str,
    pub tolerance: f64,
    run: fn(&Context) -> Outcome,
}

struct Context {
    cfg: ExperimentConfig,
    params: Option<PotentialParams>,
    chart: Result<Arc<OrbitChart>, String>,
}

impl Context {
    fn new(cfg: &ExperimentConfig) -> Self {
        let params = PotentialParams::new(cfg.epsilon).ok();
        let chart = match params {
            Some(p) => OrbitChart::build(&p, chart_spec(cfg))
                .map(Arc::new)
                .map_err(|e| e.to_string()),
            None => Err("invalid epsilon".into()),
        };
        Self {
            cfg: cfg.clone(),
            params,
            chart,
        }
    }

    fn params(&self) -> Result<PotentialParams, String> {
        self.params.ok_or_else(|| "invalid epsilon".to_string())
    }

    fn chart(&self) -> Result<Arc<OrbitChart>, String> {
        self.chart
            .clone()
            .map_err(|e| format!("chart unavailable: {e}"))
    }

    fn data_with_alpha(&self, alpha: f64) -> Result<InitialData, String> {
        InitialData::new(self.cfg.c_s, alpha, self.cfg.m, self.chart()?).map_err(|e| e.to_string())
    }

    fn data(&self) -> Result<InitialData, String> {
        self.data_with_alpha(self.cfg.alpha)
    }

    fn grid(&self) -> Result<SpatialGrid, String> {
        SpatialGrid::for_support(&self.params()?, self.cfg.c_s, self.cfg.grid_points).map_err(|e| e.to_string())
    }

    fn quad(&self) -> Result<VelocityQuadrature, String> {
        VelocityQuadrature::new(self.cfg.velocity_nodes).map_err(|e| e.to_string())
    }

    fn adaptive(&self) -> Result<FlowSpec, String> {
        FlowSpec::adaptive(self.cfg.flow_tolerance).map_err(|e| e.to_string())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub const CHECKS: &[CheckDef] = &[
    CheckDef {
        name: "potential.round_trip",
        description: "relative error of phi(invert_phi(h)) for h in [1e-6, 1e3]",
        tolerance: 1e-12,
        run: potential_round_trip,
    },
    CheckDef {
        name: "potential.parity",
        description: "phi even and dphi odd, exactly",
        tolerance: 0.0,
        run: potential_parity,
    },
    CheckDef {
        name: "potential.monotone_inverse",
        description: "number of decreasing steps of invert_phi on a log grid",
        tolerance: 0.0,
        run: potential_monotone,
    },
    CheckDef {
        name: "flow.reversibility",
        description: "distance after flowing forward and back (adaptive)",
        tolerance: 1e-8,
        run: flow_reversibility,
    },
    CheckDef {
        name: "flow.energy_drift",
        description: "relative energy drift of leapfrog, step 1e-3, to t = 1000",
        tolerance: 1e-6,
        run: flow_energy_drift,
    },
    CheckDef {
        name: "flow.group_property",
        description: "distance between flow(s + t) and flow(t) of flow(s)",
        tolerance: 1e-7,
        run: flow_group,
    },
    CheckDef {
        name: "flow.period_duality",
        description: "relative deviation of c(h)·T(h) from 2π",
        tolerance: 1e-6,
        run: flow_period_duality,
    },
    CheckDef {
        name: "chart.build",
        description: "chart construction including monotonicity verification",
        tolerance: 0.0,
        run: chart_build,
    },
    CheckDef {
        name: "chart.quarter_angle",
        description: "|Q(π/2, K) − π/2| and |Q(π, K) − π| at chart nodes",
        tolerance: 1e-10,
        run: chart_quarter_angle,
    },
    CheckDef {
        name: "chart.round_trip",
        description: "angle and phase-space round trips through the chart",
        tolerance: 1e-9,
        run: chart_round_trip,
    },
    CheckDef {
        name: "chart.c_prime_floor",
        description: "nodes with c' <= 0 (epsilon > 0) or |c'| > 1e-12 (epsilon = 0)",
        tolerance: 0.0,
        run: chart_c_prime_floor,
    },
    CheckDef {
        name: "chart.c_prime_fd",
        description: "analytic c' against centred differences of c, step 1e-4",
        tolerance: 1e-6,
        run: chart_c_prime_fd,
    },
    CheckDef {
        name: "chart.flow_conjugacy",
        description: "angle error of Q(flow(p, t)) against Q(p) − c t, t ≤ 100",
        tolerance: 1e-6,
        run: chart_flow_conjugacy,
    },
    CheckDef {
        name: "transport.cross_solver",
        description: "chart solution against backward characteristics at t = 1, 10, 100",
        tolerance: 1e-4,
        run: transport_cross_solver,
    },
    CheckDef {
        name: "transport.range",
        description: "overshoot of f(t) beyond [0, max f0]",
        tolerance: 1e-12,
        run: transport_range,
    },
    CheckDef {
        name: "transport.support",
        description: "largest |f(t)| off the energy annulus",
        tolerance: 0.0,
        run: transport_support,
    },
    CheckDef {
        name: "moments.mass_conservation",
        description: "relative mass change for t ≤ 100",
        tolerance: 1e-6,
        run: moments_mass_conservation,
    },
    CheckDef {
        name: "moments.mass_jacobian",
        description: "mass in (x, v) against the mass in (Q, K) with dx dv = dQ dK / c(K)",
        tolerance: 1e-6,
        run: moments_mass_jacobian,
    },
    CheckDef {
        name: "moments.positivity",
        description: "negated minimum density",
        tolerance: 1e-12,
        run: moments_positivity,
    },
    CheckDef {
        name: "moments.phi_t_routes",
        description: "|ratio − 4| of route differences when dt halves, at t = 5",
        tolerance: 0.5,
        run: moments_phi_t_routes,
    },
    CheckDef {
        name: "moments.continuity",
        description: "second difference of phi_t against −d_t rho, relative",
        tolerance: 1e-2,
        run: moments_continuity,
    },
    CheckDef {
        name: "mixing.tail_affine",
        description: "second differences of phi_t beyond the support",
        tolerance: 1e-10,
        run: mixing_tail_affine,
    },
    CheckDef {
        name: "mixing.unmodulated_stationary",
        description: "sup |phi_t| for alpha = 0 data at t = 10",
        tolerance: 1e-10,
        run: mixing_stationary,
    },
    CheckDef {
        name: "mixing.y_fields",
        description: "largest sup |Y^l f|(t)/sup |Y^l f|(0), l = 1, 2, t = 1, 10, 100",
        tolerance: 2.0,
        run: mixing_y_fields,
    },
    CheckDef {
        name: "mixing.commutation",
        description: "Y f(t) against the translate of Y f(0), relative",
        tolerance: 1e-3,
        run: mixing_commutation,
    },
    CheckDef {
        name: "mixing.spectrum_modulus",
        description: "change of |f_k| between t = 0 and t = 10",
        tolerance: 1e-10,
        run: mixing_spectrum_modulus,
    },
    CheckDef {
        name: "mixing.spectrum_phase",
        description: "phase advance of the m-th mode against m c(K) t at t = 10",
        tolerance: 1e-8,
        run: mixing_spectrum_phase,
    },
    CheckDef {
        name: "mixing.fit_sanity",
        description: "slope error of the envelope fit on an exact t^-2 series",
        tolerance: 1e-10,
        run: mixing_fit_sanity,
    },
];

pub fn run_checks(cfg: &ExperimentConfig) -> ValidationReport {
    let ctx = Context::new(cfg);
    let checks: Vec<CheckResult> = CHECKS
        .iter()
        .map(|def| match (def.run)(&ctx) {
            Ok((measured, detail)) => CheckResult {
                name: def.name,
                tolerance: def.tolerance,
                measured,
                passed: measured <= def.tolerance,
                detail,
            },
            Err(detail) => CheckResult {
                name: def.name,
                tolerance: def.tolerance,
                measured: f64::NAN,
                passed: false,
                detail: Some(detail),
            },
        })
        .collect();
    ValidationReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    // NaN propagates so that a broken measurement cannot pass
    it.fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

fn potential_round_trip(ctx: &Context) -> Outcome {
    let p = ctx.params()?;
    Ok((
        max_of((0..=400).map(|i| {
            let h = 1e-6 * 1e9f64.powf(i as f64 / 400.0);
            (p.phi(p.invert_phi(h).expect("h > 0")) - h).abs() / h
        })),
        None,
    ))
}

fn potential_parity(ctx: &Context) -> Outcome {
    let p = ctx.params()?;
    Ok((
        max_of((0..=200).map(|i| {
            let x = -10.0 + 0.1 * i as f64;
            (p.phi(x) - p.phi(-x)).abs().max((p.dphi(x) + p.dphi(-x)).abs())
        })),
        None,
    ))
}

fn potential_monotone(ctx: &Context) -> Outcome {
    let p = ctx.params()?;
    let xs: Vec<f64> = (0..2000)
        .map(|i| p.invert_phi(1e-6 * 1e9f64.powf(i as f64 / 1999.0)).expect("h > 0"))
        .collect();
    Ok((xs.windows(2).filter(|w| w[1] <= w[0]).count() as f64, None))
}

fn flow_probes() -> [PhasePoint; 3] {
    [
        PhasePoint::new(1.0, 0.0),
        PhasePoint::new(0.3, -1.2),
        PhasePoint::new(-1.4, 0.6),
    ]
}

fn flow_reversibility(ctx: &Context) -> Outcome {
    let p = ctx.params()?;
    let spec = ctx.adaptive()?;
    let mut worst = 0.0f64;
    for q in flow_probes() {
        for t in [10.0, 37.5, 60.0] {
            let back = flow_map(&p, flow_map(&p, q, t, &spec).map_err(err)?, -t, &spec).map_err(err)?;
            worst = worst.max(back.distance(&q));
        }
    }
    Ok((worst, None))
}

fn flow_energy_drift(ctx: &Context) -> Outcome {
    let p = ctx.params()?;
    let spec = FlowSpec::leapfrog(1e-3).map_err(err)?;
    let drifts = flow_probes()
        .par_iter()
        .map(|&q| {
            let end = flow_map(&p, q, 1000.0, &spec).map_err(err)?;
            let h = p.hamiltonian(q);
            Ok((p.hamiltonian(end) - h).abs() / h)
        })
        .collect::<Result<Vec<f64>, String>>()?;
    Ok((max_of(drifts.into_iter()), None))
}

fn flow_group(ctx: &Context) -> Outcome {
    let p = ctx.params()?;
    let spec = ctx.adaptive()?;
    let mut worst = 0.0f64;
    for q in flow_probes() {
        let whole = flow_map(&p, q, 19.4, &spec).map_err(err)?;
        let split = flow_map(&p, flow_map(&p, q, 7.3, &spec).map_err(err)?, 12.1, &spec).map_err(err)?;
        worst = worst.max(whole.distance(&split));
    }
    Ok((worst, None))
}

fn flow_period_duality(ctx: &Context) -> Outcome {
    let p = ctx.params()?;
    let spec = FlowSpec::adaptive(1e-12).map_err(err)?;
    let mut worst = 0.0f64;
    for h in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let period = orbit_period(&p, h, &spec).map_err(err)?;
        let c = compute_c(&p, h, 256).map_err(err)?;
        worst = worst.max((c * period / TAU - 1.0).abs());
    }
    Ok((worst, None))
}

fn chart_build(ctx: &Context) -> Outcome {
    ctx.chart()?;
    Ok((0.0, None))
}

fn chart_quarter_angle(ctx: &Context) -> Outcome {
    let chart = ctx.chart()?;
    let mut worst = 0.0f64;
    for &k in chart.k_grid() {
        worst = worst
            .max((chart.q_of_chi(FRAC_PI_2, k).map_err(err)? - FRAC_PI_2).abs())
            .max((chart.q_of_chi(PI, k).map_err(err)? - PI).abs());
    }
    Ok((worst, None))
}

fn chart_round_trip(ctx: &Context) -> Outcome {
    let chart = ctx.chart()?;
    let (lo, hi) = chart.k_range();
    let mut worst = 0.0f64;
    // interior energies: the energy recomputed from (x, v) may round past the range ends
    for i in 0..25 {
        let k = lo + (hi - lo) * (i as f64 + 0.5) / 25.0;
        for j in 0..=48 {
            let chi = -PI + TAU * (j as f64 + 0.37) / 49.0;
            let q = chart.q_of_chi(chi, k).map_err(err)?;
            let back = chart.chi_of_q(q, k).map_err(err)?;
            worst = worst.max(wrap_angle(back - chi).abs());
            let p = chart.from_action_angle(ActionAngle { q, k }).map_err(err)?;
            let aa = chart.to_action_angle(p).map_err(err)?;
            let p2 = chart.from_action_angle(aa).map_err(err)?;
            worst = worst.max(p.distance(&p2));
        }
    }
    Ok((worst, None))
}

fn chart_c_prime_floor(ctx: &Context) -> Outcome {
    let chart = ctx.chart()?;
    let nodes = chart.c_prime_nodes();
    let violations = if ctx.params()?.is_harmonic() {
        nodes.iter().filter(|c| c.abs() > 1e-12).count()
    } else {
        nodes.iter().filter(|&&c| c <= 0.0).count()
    };
    Ok((violations as f64, Some(format!("delta = min c' = {:.6e}", chart.delta()))))
}

fn chart_c_prime_fd(ctx: &Context) -> Outcome {
    let chart = ctx.chart()?;
    let p = ctx.params()?;
    let n = chart.spec().n_quad;
    let step = 1e-4;
    let mut worst = 0.0f64;
    for (&k, &cp) in chart.k_grid().iter().zip(chart.c_prime_nodes()) {
        let fd = (compute_c(&p, k + step, n).map_err(err)? - compute_c(&p, k - step, n).map_err(err)?) / (2.0 * step);
        worst = worst.max((fd - cp).abs());
    }
    Ok((worst, None))
}

fn chart_flow_conjugacy(ctx: &Context) -> Outcome {
    let chart = ctx.chart()?;
    let f0 = ctx.data()?;
    let p = ctx.params()?;
    let spec = ctx.adaptive()?;
    let points = support_sample(&f0, 4, ctx.cfg.seed);
    let errors = points
        .par_iter()
        .map(|&q0| {
            let aa = chart.to_action_angle(q0).map_err(err)?;
            let c = chart.c(aa.k).map_err(err)?;
            let mut worst = 0.0f64;
            for t in [1.0, 10.0, 100.0] {
                let moved = chart.to_action_angle(flow_map(&p, q0, t, &spec).map_err(err)?).map_err(err)?;
                worst = worst.max(wrap_angle(moved.q - advance_angle(aa.q, -c, t)).abs());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>, String>>()?;
    Ok((max_of(errors.into_iter()), None))
}

fn transport_cross_solver(ctx: &Context) -> Outcome {
    let f0 = ctx.data()?;
    let spec = ctx.adaptive()?;
    let points = support_sample(&f0, ctx.cfg.validation_samples, ctx.cfg.seed);
    let mut worst = 0.0f64;
    for t in [1.0, 10.0, 100.0] {
        worst = worst.max(cross_solver_error(&f0, &points, t, &spec).map_err(err)?);
    }
    Ok((worst, Some(format!("{} sample points", points.len()))))
}

fn transport_range(ctx: &Context) -> Outcome {
    let f0 = ctx.data()?;
    let points = support_sample(&f0, ctx.cfg.validation_samples, ctx.cfg.seed);
    let top = f0.max_value();
    let mut worst = 0.0f64;
    for t in [0.0, 10.0, 100.0] {
        for &p in &points {
            let v = evaluate_f_actionangle(&f0, t, p).map_err(err)?;
            worst = worst.max(-v).max(v - top);
        }
    }
    Ok((worst, None))
}

fn transport_support(ctx: &Context) -> Outcome {
    let f0 = ctx.data()?;
    let (lo, hi) = f0.energy_support();
    let mut worst = 0.0f64;
    for h in [0.5 * lo, 0.999 * lo, 1.001 * hi, 3.0 * hi] {
        for j in 0..16 {
            let chi = TAU * j as f64 / 16.0;
            let p = from_angle_energy(f0.params(), AngleEnergy { chi, h });
            for t in [0.0, 10.0, 100.0] {
                worst = worst.max(evaluate_f_actionangle(&f0, t, p).map_err(err)?.abs());
            }
        }
    }
    Ok((worst, None))
}

fn moments_mass_conservation(ctx: &Context) -> Outcome {
    let eval = ActionAngleSolution { f0: ctx.data()? };
    let (grid, quad) = (ctx.grid()?, ctx.quad()?);
    let m0 = total_mass(&eval, 0.0, &grid, &quad).map_err(err)?;
    let mut worst = 0.0f64;
    for t in [10.0, 50.0, 100.0] {
        worst = worst.max((total_mass(&eval, t, &grid, &quad).map_err(err)? / m0 - 1.0).abs());
    }
    Ok((worst, Some(format!("mass = {m0:.12e}"))))
}

fn moments_mass_jacobian(ctx: &Context) -> Outcome {
    let f0 = ctx.data()?;
    let (grid, quad) = (ctx.grid()?, ctx.quad()?);
    let xv = total_mass(&ActionAngleSolution { f0: f0.clone() }, 0.0, &grid, &quad).map_err(err)?;
    let qk = f0.mass_action_angle(0.0, 256, 256);
    Ok(((xv / qk - 1.0).abs(), Some(format!("(x, v) {xv:.12e}, (Q, K) {qk:.12e}"))))
}

fn moments_positivity(ctx: &Context) -> Outcome {
    let eval = ActionAngleSolution { f0: ctx.data()? };
    let (grid, quad) = (ctx.grid()?, ctx.quad()?);
    let mut worst = 0.0f64;
    for t in [0.0, 10.0, 100.0] {
        let s = snapshot(&eval, t, &grid, &quad).map_err(err)?;
        worst = worst.max(s.rho.iter().fold(0.0f64, |m, &r| m.max(-r)));
    }
    Ok((worst, None))
}

fn route_error(eval: &ActionAngleSolution, t: f64, dt: f64, grid: &SpatialGrid, quad: &VelocityQuadrature) -> Result<f64, String> {
    let r = phi_t_reconstruct(eval, t, grid, quad).map_err(err)?;
    let fd = phi_t_fd(eval, t, dt, grid, quad).map_err(err)?;
    Ok(max_of(r.iter().zip(&fd).map(|(a, b)| (a - b).abs())))
}

fn moments_phi_t_routes(ctx: &Context) -> Outcome {
    let eval = ActionAngleSolution { f0: ctx.data()? };
    let (grid, quad) = (ctx.grid()?, ctx.quad()?);
    let dt = ctx.cfg.dt_fd;
    let coarse = route_error(&eval, 5.0, 2.0 * dt, &grid, &quad)?;
    let fine = route_error(&eval, 5.0, dt, &grid, &quad)?;
    if coarse < 1e-14 {
        return Ok((0.0, Some("stationary data, routes agree to rounding".into())));
    }
    let ratio = coarse / fine;
    Ok(((ratio - 4.0).abs(), Some(format!("ratio {ratio:.4}, errors {coarse:.3e} / {fine:.3e}"))))
}

fn moments_continuity(ctx: &Context) -> Outcome {
    let eval = ActionAngleSolution { f0: ctx.data()? };
    let (grid, quad) = (ctx.grid()?, ctx.quad()?);
    let (t, dt) = (5.0, ctx.cfg.dt_fd);
    let now = snapshot(&eval, t, &grid, &quad).map_err(err)?;
    let ahead = snapshot(&eval, t + dt, &grid, &quad).map_err(err)?;
    let behind = snapshot(&eval, t - dt, &grid, &quad).map_err(err)?;
    let h = grid.step();
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for i in 1..grid.len() - 1 {
        let second = (now.phi_t[i + 1] - 2.0 * now.phi_t[i] + now.phi_t[i - 1]) / (h * h);
        let rho_t = (ahead.rho[i] - behind.rho[i]) / (2.0 * dt);
        diff = diff.max((second + rho_t).abs());
        scale = scale.max(rho_t.abs());
    }
    if scale == 0.0 {
        return Ok((diff, None));
    }
    Ok((diff / scale, None))
}

fn mixing_tail_affine(ctx: &Context) -> Outcome {
    let eval = ActionAngleSolution { f0: ctx.data()? };
    let quad = ctx.quad()?;
    let x_max = ctx.grid()?.x_max();
    let wide = SpatialGrid::new(1.5 * x_max, 301).map_err(err)?;
    let mut worst = 0.0f64;
    for t in [10.0, 100.0] {
        let s = snapshot(&eval, t, &wide, &quad).map_err(err)?;
        let x = wide.nodes();
        for i in 1..x.len() - 1 {
            if x[i - 1].abs().min(x[i + 1].abs()) >= x_max && x[i - 1].signum() == x[i + 1].signum() {
                worst = worst.max((s.phi_t[i + 1] - 2.0 * s.phi_t[i] + s.phi_t[i - 1]).abs());
            }
        }
    }
    Ok((worst, None))
}

fn mixing_stationary(ctx: &Context) -> Outcome {
    let eval = ActionAngleSolution {
        f0: ctx.data_with_alpha(0.0)?,
    };
    let (grid, quad) = (ctx.grid()?, ctx.quad()?);
    let s = snapshot(&eval, 10.0, &grid, &quad).map_err(err)?;
    Ok((s.sup_phi_t(), None))
}

fn mixing_y_fields(ctx: &Context) -> Outcome {
    let f0 = ctx.data()?;
    let samples = QkSamples::for_support(&f0, 48, 48);
    let steps = FdSteps::default();
    let base = vector_field_norms(&f0, 0.0, steps, &samples).map_err(err)?;
    let mut worst = 0.0f64;
    for t in [1.0, 10.0, 100.0] {
        let n = vector_field_norms(&f0, t, steps, &samples).map_err(err)?;
        for l in 1..3 {
            worst = worst.max(n.sup[l] / base.sup[l]);
        }
    }
    Ok((worst, None))
}

fn mixing_commutation(ctx: &Context) -> Outcome {
    let f0 = ctx.data()?;
    let samples = QkSamples::for_support(&f0, 24, 24);
    let steps = FdSteps::default();
    let t = 10.0;
    let pairs: Vec<(f64, f64)> = samples
        .k
        .iter()
        .flat_map(|&k| samples.q.iter().map(move |&q| (q, k)))
        .collect();
    let (diff, scale) = pairs
        .par_iter()
        .map(|&(q, k)| {
            let c = f0.chart().c(k).expect("support inside chart");
            let evolved = apply_y(&f0, t, q, k, 1, steps);
            let moved = apply_y(&f0, 0.0, advance_angle(q, c, t), k, 1, steps);
            ((evolved - moved).abs(), moved.abs())
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok((diff / scale, None))
}

fn spectrum_energies(f0: &InitialData) -> Vec<f64> {
    let (lo, hi) = f0.energy_support();
    (1..8).map(|i| lo + (hi - lo) * i as f64 / 8.0).collect()
}

fn spectrum_k_max(cfg: &ExperimentConfig) -> usize {
    (2 * cfg.m as usize).max(4)
}

fn mixing_spectrum_modulus(ctx: &Context) -> Outcome {
    let f0 = ctx.data()?;
    let k_max = spectrum_k_max(&ctx.cfg);
    let mut worst = 0.0f64;
    for k in spectrum_energies(&f0) {
        let a = q_fourier_spectrum(&f0, 0.0, k, k_max, 16 * k_max).map_err(err)?;
        let b = q_fourier_spectrum(&f0, 10.0, k, k_max, 16 * k_max).map_err(err)?;
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            worst = worst.max((x.norm() - y.norm()).abs());
        }
    }
    Ok((worst, None))
}

fn mixing_spectrum_phase(ctx: &Context) -> Outcome {
    let f0 = ctx.data()?;
    if f0.alpha() == 0.0 {
        return Ok((0.0, Some("no modulated mode".into())));
    }
    let k_max = spectrum_k_max(&ctx.cfg);
    let m = ctx.cfg.m as i64;
    let t = 10.0;
    let mut worst = 0.0f64;
    for k in spectrum_energies(&f0) {
        let a = q_fourier_spectrum(&f0, 0.0, k, k_max, 16 * k_max).map_err(err)?;
        let b = q_fourier_spectrum(&f0, t, k, k_max, 16 * k_max).map_err(err)?;
        let advance = (b.mode(m) / a.mode(m)).arg();
        let expected = advance_angle(0.0, m as f64 * f0.chart().c(k).map_err(err)?, t);
        worst = worst.max(wrap_angle(advance - expected).abs());
    }
    Ok((worst, None))
}

fn mixing_fit_sanity(_: &Context) -> Outcome {
    let times: Vec<f64> = (1..=4000).map(|i| 0.05 * i as f64).collect();
    let values: Vec<f64> = times.iter().map(|t| t.powi(-2)).collect();
    let fit = fit_power_law(&times, &values, (20.0, 200.0), TAU).map_err(err)?;
    Ok(((fit.slope + 2.0).abs(), None))
}
