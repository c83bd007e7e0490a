//! Self-checks of the discrete invariants, grouped into suites.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::adjoint::solve_adjoint;
use crate::error::Result;
use crate::field::ops::{dot_samples, vdot};
use crate::field::{div, grad, inner, laplacian, leray_project, norm_l2, Grid, ScalarField, VectorField};
use crate::forward::{solve_forward, Control, SolverConfig, State};
use crate::io::Setup;
use crate::random::{smooth_field, solenoidal_field, unit_direction};
use crate::tangent::solve_tangent;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Ops,
    Energy,
    Mass,
    Duality,
    Projection,
    All,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "ops" => Suite::Ops,
            "energy" => Suite::Energy,
            "mass" => Suite::Mass,
            "duality" => Suite::Duality,
            "projection" => Suite::Projection,
            "all" => Suite::All,
            _ => return Err(format!("unknown suite {s:?}")),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, limit: f64) -> Self {
        Check {
            name,
            value,
            limit,
            passed: value <= limit,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<32} {:.3e} (limit {:.1e})", self.name, self.value, self.limit)
    }
}

fn sup_diff(a: &ScalarField<f64>, b: &ScalarField<f64>) -> f64 {
    (a - b).max_abs()
}

fn ops(g: &Arc<Grid<f64>>, seed: u64) -> Result<Vec<Check>> {
    let (sx, sy) = (2.0 * std::f64::consts::PI / g.lx(), 2.0 * std::f64::consts::PI / g.ly());
    let f = ScalarField::from_fn(g, |x, y| (sx * x).sin() * (2.0 * sy * y).cos());
    let df = grad(&f)?;
    let dfx = ScalarField::from_fn(g, |x, y| sx * (sx * x).cos() * (2.0 * sy * y).cos());
    let dfy = ScalarField::from_fn(g, |x, y| -2.0 * sy * (sx * x).sin() * (2.0 * sy * y).sin());
    let lap = ScalarField::from_fn(g, |x, y| -(sx * sx + 4.0 * sy * sy) * (sx * x).sin() * (2.0 * sy * y).cos());
    let r = smooth_field(g, 6, 1.0, seed);
    let dr = grad(&r)?;
    let dg = (sup_diff(&df.x, &dfx).max(sup_diff(&df.y, &dfy))) / (1.0 + dfx.max_abs());
    let lap_err = sup_diff(&laplacian(&f)?, &lap) / (1.0 + lap.max_abs());
    let comp = sup_diff(&div(&dr)?, &laplacian(&r)?) / (1.0 + laplacian(&r)?.max_abs());
    let means = dr.x.mean().abs().max(dr.y.mean().abs()).max(laplacian(&r)?.mean().abs());
    let parseval = {
        let s = r.spectrum();
        let spec: f64 = s.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() * g.cell_area() / g.len() as f64;
        let phys = inner(&r, &r)?;
        (spec - phys).abs() / phys
    };
    Ok(vec![
        Check::at_most("grad analytic", dg, 1e-10),
        Check::at_most("laplacian analytic", lap_err, 1e-10),
        Check::at_most("div grad = laplacian", comp, 1e-12),
        Check::at_most("derivative means", means, 1e-13),
        Check::at_most("parseval", parseval, 1e-12),
    ])
}

fn projection(g: &Arc<Grid<f64>>, seed: u64) -> Result<Vec<Check>> {
    let raw = |s: u64| VectorField {
        x: smooth_field(g, 8, 1.0, s),
        y: smooth_field(g, 8, 1.0, s + 1),
    };
    let (v, w) = (raw(seed), raw(seed + 7));
    let pv = leray_project(&v)?;
    let ppv = leray_project(&pv)?;
    let pw = leray_project(&w)?;
    let sym = (inner(&pv, &w)? - inner(&v, &pw)?).abs() / (norm_l2(&v) * norm_l2(&w));
    Ok(vec![
        Check::at_most("projection divergence", div(&pv)?.max_abs(), 1e-12),
        Check::at_most("projection idempotent", (&ppv - &pv).max_abs(), 1e-13),
        Check::at_most("projection self-adjoint", sym, 1e-12),
    ])
}

fn short_cfg(s: &Setup, t_final: f64, dt: f64) -> Result<SolverConfig<f64>> {
    let mut cfg = s.cfg.clone();
    cfg.dt = dt;
    cfg.t_final = t_final;
    cfg.forcing = None;
    cfg.diagnostics = true;
    cfg.validate()?;
    Ok(cfg)
}

fn energy(s: &Setup, seed: u64) -> Result<Vec<Check>> {
    // The config's initial data may sit in a stiff initial layer where the
    // residual is not yet asymptotic; a low-mode state is used instead.
    let init = State::new(solenoidal_field(&s.grid, 2, 0.5, seed), smooth_field(&s.grid, 2, 0.5, seed + 1), 0.0)?;
    let mut worst = Vec::new();
    let mut increase = 0.0f64;
    for dt in [2e-3, 1e-3, 5e-4] {
        let cfg = short_cfg(s, 0.2, dt)?;
        let traj = solve_forward(&init, &Control::zeros(&s.grid, cfg.steps(), dt), &cfg, &s.kernel, &s.potential)?;
        let res = traj.energy_residuals(cfg.nu, dt);
        worst.push(res.iter().fold(0.0f64, |m, r| m.max(r.abs())));
        for w in traj.diagnostics[1..].windows(2) {
            increase = increase.max(w[1].energy - w[0].energy);
        }
    }
    let ratios: Vec<f64> = worst.windows(2).map(|w| w[0] / w[1].max(f64::MIN_POSITIVE)).collect();
    let order = |name, r: f64| Check {
        name,
        value: r,
        limit: 1.6,
        passed: (1.6..=2.4).contains(&r),
    };
    Ok(vec![
        Check::at_most("energy increase after step 1", increase, 1e-10),
        order("energy residual ratio 2e-3/1e-3", ratios[0]),
        order("energy residual ratio 1e-3/5e-4", ratios[1]),
    ])
}

fn mass(s: &Setup) -> Result<Vec<Check>> {
    let cfg = short_cfg(s, s.cfg.t_final, s.cfg.dt)?;
    let traj = solve_forward(&s.init, &Control::zeros(&s.grid, cfg.steps(), cfg.dt), &cfg, &s.kernel, &s.potential)?;
    let m0 = s.init.phi.mean().abs();
    Ok(vec![
        Check::at_most("mass drift", traj.mass_drift() / (1.0 + m0), 1e-10),
        Check::at_most("velocity divergence", traj.max_divergence(), 1e-11),
    ])
}

fn duality(s: &Setup, seed: u64) -> Result<Vec<Check>> {
    let cfg = &s.cfg;
    let n = cfg.steps();
    let u = unit_direction(&s.grid, n, cfg.dt, 3, seed);
    let v = unit_direction(&s.grid, n, cfg.dt, 3, seed + 1);
    let base = solve_forward(&s.init, &u, cfg, &s.kernel, &s.potential)?;
    let adj = solve_adjoint(&base, &s.targets, &s.kernel, &s.potential, cfg)?;
    let tan = solve_tangent(&base, &v, &s.kernel, &s.potential, cfg)?;
    let t = &s.targets;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for k in 0..n {
        lhs += cfg.dt * vdot(v.slice(k), &adj[k].p);
        let du = &base.states[k].u - &t.u_d[k];
        let dp = &base.states[k].phi - &t.phi_d[k];
        rhs += cfg.dt * (t.alpha * vdot(&tan[k].w, &du) + t.beta * dot_samples(&tan[k].psi, &dp));
    }
    let adj_div = adj.iter().map(|a| crate::field::ops::div_unchecked(&a.p).max_abs()).fold(0.0, f64::max);
    Ok(vec![
        Check::at_most("tangent-adjoint duality", (lhs - rhs).abs() / rhs.abs().max(1e-14), 1e-8),
        Check::at_most("adjoint divergence", adj_div, 1e-11),
        Check::at_most(
            "adjoint terminal value",
            adj[n].p.max_abs().max(adj[n].eta.max_abs()),
            0.0,
        ),
    ])
}

/// Runs `suite` against the objects built from a config.
pub fn run_suite(suite: Suite, setup: &Setup, seed: u64) -> Result<Vec<Check>> {
    let g = &setup.grid;
    let mut out = Vec::new();
    if matches!(suite, Suite::Ops | Suite::All) {
        out.extend(ops(g, seed)?);
    }
    if matches!(suite, Suite::Projection | Suite::All) {
        out.extend(projection(g, seed)?);
    }
    if matches!(suite, Suite::Mass | Suite::All) {
        out.extend(mass(setup)?);
    }
    if matches!(suite, Suite::Energy | Suite::All) {
        out.extend(energy(setup, seed)?);
    }
    if matches!(suite, Suite::Duality | Suite::All) {
        out.extend(duality(setup, seed)?);
    }
    Ok(out)
}

/// Random divergence-free initial state used when a suite needs motion.
pub fn random_state(g: &Arc<Grid<f64>>, seed: u64) -> Result<State<f64>> {
    State::new(solenoidal_field(g, 4, 1.0, seed), smooth_field(g, 4, 0.8, seed + 1), 0.0)
}
