//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chns::field::{convolve, div, grad, inner, laplacian, leray_project, norm_l2};
use chns::io::{load_config, load_snapshot, save_snapshot, FieldSnapshot, RunConfig, Setup};
use chns::optimize::Evaluation;
use chns::random::{rng, smooth_field, solenoidal_field, solenoidal_field_with, unit_direction};
use chns::{
    curvature_study, hamiltonian_gap, optimize, solve_forward, solve_tangent, Control, ControlProblem, Grid, Kernel,
    KernelSpec, OptimOptions, OptimReport, Potential, ScalarField, SolverConfig, State, VectorField,
};

const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn default_setup() -> (RunConfig, Setup) {
    let rc = load_config(CONFIG).expect("default config");
    let s = rc.build().expect("default setup");
    (rc, s)
}

fn gaussian(g: &Arc<Grid>) -> Kernel {
    Kernel::build(&KernelSpec::Gaussian { sigma: 0.5, mass: Some(5.0) }, g).unwrap()
}

fn problem(s: &Setup) -> ControlProblem {
    ControlProblem::new(s.init.clone(), s.cfg.clone(), s.kernel.clone(), s.potential.clone(), s.targets.clone()).unwrap()
}

fn sup(a: &ScalarField, b: &ScalarField) -> f64 {
    (a - b).max_abs()
}

fn operators() -> Outcome {
    let g = Grid::square(64).unwrap();
    let f = ScalarField::from_fn(&g, |x, y| (3.0 * x).sin() * (2.0 * y).cos() + 0.5 * (x + 4.0 * y).cos());
    let fx = ScalarField::from_fn(&g, |x, y| 3.0 * (3.0 * x).cos() * (2.0 * y).cos() - 0.5 * (x + 4.0 * y).sin());
    let fy = ScalarField::from_fn(&g, |x, y| -2.0 * (3.0 * x).sin() * (2.0 * y).sin() - 2.0 * (x + 4.0 * y).sin());
    let lap = ScalarField::from_fn(&g, |x, y| -13.0 * (3.0 * x).sin() * (2.0 * y).cos() - 8.5 * (x + 4.0 * y).cos());
    let df = grad(&f).unwrap();
    let e_grad = sup(&df.x, &fx).max(sup(&df.y, &fy)) / fx.max_abs().max(fy.max_abs());
    let e_lap = sup(&laplacian(&f).unwrap(), &lap) / lap.max_abs();
    let e_div = sup(&div(&df).unwrap(), &lap) / lap.max_abs();

    let raw = VectorField::new(smooth_field(&g, 10, 1.0, 3), smooth_field(&g, 10, 1.0, 4)).unwrap();
    let pv = leray_project(&raw).unwrap();
    let p_div = div(&pv).unwrap().max_abs() / raw.max_abs();
    let p_idem = (&leray_project(&pv).unwrap() - &pv).max_abs() / raw.max_abs();
    let ok = e_grad <= 1e-10 && e_lap <= 1e-10 && e_div <= 1e-10 && p_div <= 1e-12 && p_idem <= 1e-12;
    outcome(
        ok,
        format!(
            "64^2 grad {e_grad:.1e} lap {e_lap:.1e} div grad {e_div:.1e} (<= 1e-10); projection div {p_div:.1e} idempotence {p_idem:.1e} (<= 1e-12)"
        ),
    )
}

fn convolution() -> Outcome {
    let g = Grid::square(16).unwrap();
    let k = gaussian(&g);
    let f = smooth_field(&g, 5, 1.0, 21);
    let h = smooth_field(&g, 5, 1.0, 22);
    let n = g.nx();
    let j = k.samples();
    let area = g.cell_area();
    let mut direct = vec![0.0; n * n];
    for iy in 0..n {
        for ix in 0..n {
            let mut acc = 0.0;
            for jy in 0..n {
                for jx in 0..n {
                    acc += j.at((ix + n - jx) % n, (iy + n - jy) % n) * f.at(jx, jy);
                }
            }
            direct[g.index(ix, iy)] = acc * area;
        }
    }
    let direct = ScalarField::new(g.clone(), direct).unwrap();
    let fast = convolve(&k, &f).unwrap();
    let rel = sup(&fast, &direct) / direct.max_abs();
    let jf_h = inner(&fast, &h).unwrap();
    let f_jh = inner(&f, &convolve(&k, &h).unwrap()).unwrap();
    let pair = (jf_h - f_jh).abs() / jf_h.abs().max(f_jh.abs());
    outcome(
        rel <= 1e-12 && pair <= 1e-12,
        format!("16^2 fft vs direct sum {rel:.1e}, pairing gap {pair:.1e} (<= 1e-12)"),
    )
}

fn energy_functional() -> Outcome {
    let g = Grid::square(8).unwrap();
    let k = gaussian(&g);
    let pot = Potential::double_well();
    let u = solenoidal_field(&g, 2, 1.0, 31);
    let phi = smooth_field(&g, 3, 0.9, 32);
    let n = g.nx();
    let area = g.cell_area();
    let j = k.samples();
    let mut kinetic = 0.0;
    let mut bulk = 0.0;
    let mut nonlocal = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            let (a, b) = (u.x.at(ix, iy), u.y.at(ix, iy));
            kinetic += 0.5 * (a * a + b * b) * area;
            bulk += pot.f(phi.at(ix, iy)) * area;
            for jy in 0..n {
                for jx in 0..n {
                    let d = phi.at(ix, iy) - phi.at(jx, jy);
                    nonlocal += 0.25 * j.at((ix + n - jx) % n, (iy + n - jy) % n) * d * d * area * area;
                }
            }
        }
    }
    let brute = kinetic + nonlocal + bulk;
    let fast = chns::physics::energy(&u, &phi, &k, &pot).unwrap();
    let rel = (fast - brute).abs() / brute.abs();
    outcome(rel <= 1e-10, format!("8^2 spectral {fast:.12e} vs double sum {brute:.12e}, rel {rel:.1e} (<= 1e-10)"))
}

fn conservation() -> Outcome {
    let g = Grid::square(64).unwrap();
    let k = gaussian(&g);
    let pot = Potential::double_well();
    let cfg = SolverConfig::new(0.1, 1e-3, 1.0, &k, &pot).unwrap();
    let phi = &smooth_field(&g, 6, 0.8, 41) + &ScalarField::constant(&g, 0.2);
    let init = State::new(solenoidal_field(&g, 6, 1.0, 42), phi, 0.0).unwrap();
    let zero = Control::zeros(&g, cfg.steps(), cfg.dt);
    let traj = solve_forward(&init, &zero, &cfg, &k, &pot).map_err(|f| f.error).unwrap();
    let m0 = init.phi.mean();
    let drift = traj.mass_drift() / (1.0 + m0.abs());
    let dv = traj.max_divergence();
    outcome(
        traj.steps() == 1000 && drift <= 1e-10 && dv <= 1e-11,
        format!("{} steps on 64^2: mass drift {drift:.1e} (<= 1e-10), max div {dv:.1e} (<= 1e-11)", traj.steps()),
    )
}

fn energy_identity() -> Outcome {
    let (_, s) = default_setup();
    let init = State::new(solenoidal_field(&s.grid, 2, 0.5, 51), smooth_field(&s.grid, 2, 0.5, 52), 0.0).unwrap();
    let mut worst = Vec::new();
    let mut increase = 0.0f64;
    for dt in [2e-3, 1e-3, 5e-4] {
        let mut cfg = s.cfg.clone();
        cfg.dt = dt;
        cfg.t_final = 0.2;
        cfg.diagnostics = true;
        let zero = Control::zeros(&s.grid, cfg.steps(), dt);
        let traj = solve_forward(&init, &zero, &cfg, &s.kernel, &s.potential).map_err(|f| f.error).unwrap();
        worst.push(traj.energy_residuals(cfg.nu, dt).iter().fold(0.0f64, |m, r| m.max(r.abs())));
        for w in traj.diagnostics[1..].windows(2) {
            increase = increase.max(w[1].energy - w[0].energy);
        }
    }
    let ratios: Vec<f64> = worst.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|r| (1.6..=2.4).contains(r)) && increase <= 1e-10;
    outcome(
        ok,
        format!(
            "max residual {:.3e}, {:.3e}, {:.3e}; ratios {:.3}, {:.3} (in [1.6, 2.4]); largest increase after step 1 {increase:.1e} (<= 1e-10)",
            worst[0], worst[1], worst[2], ratios[0], ratios[1]
        ),
    )
}

fn taylor_green() -> Outcome {
    let g = Grid::square(64).unwrap();
    let k = gaussian(&g);
    let pot = Potential::double_well();
    let nu = 0.1;
    let mut cfg = SolverConfig::new(nu, 1e-3, 1.0, &k, &pot).unwrap();
    cfg.diagnostics = true;
    let u = VectorField::from_fn(&g, |x, y| x.sin() * y.cos(), |x, y| -x.cos() * y.sin());
    let init = State::new(u, ScalarField::constant(&g, 1.0), 0.0).unwrap();
    let zero = Control::zeros(&g, cfg.steps(), cfg.dt);
    let traj = solve_forward(&init, &zero, &cfg, &k, &pot).map_err(|f| f.error).unwrap();
    // least-squares slope of log |u| against t
    let pts: Vec<(f64, f64)> = traj.diagnostics.iter().map(|d| (d.t, d.max_speed.ln())).collect();
    let m = pts.len() as f64;
    let (st, sl) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (tm, lm) = (st / m, sl / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - tm) * (p.1 - lm), a.1 + (p.0 - tm).powi(2)));
    let rate = -num / den;
    let rel = (rate - 2.0 * nu).abs() / (2.0 * nu);
    outcome(rel <= 1e-2, format!("fitted rate {rate:.6} vs 2 nu = {:.3}, rel {rel:.1e} (<= 1e-2)", 2.0 * nu))
}

fn tangent_norm(du: &[VectorField], dphi: &[ScalarField]) -> f64 {
    du.iter().map(|v| norm_l2(v).powi(2)).sum::<f64>() + dphi.iter().map(|f| norm_l2(f).powi(2)).sum::<f64>()
}

fn tangent_consistency() -> Outcome {
    let (_, s) = default_setup();
    let mut cfg = s.cfg.clone();
    cfg.t_final = 0.05;
    let n = cfg.steps();
    let base_u = unit_direction(&s.grid, n, cfg.dt, 3, 61).scale(2.0);
    let v1 = unit_direction(&s.grid, n, cfg.dt, 3, 62);
    let v2 = unit_direction(&s.grid, n, cfg.dt, 4, 63);
    let solve = |c: &Control| solve_forward(&s.init, c, &cfg, &s.kernel, &s.potential).map_err(|f| f.error).unwrap();
    let base = solve(&base_u);
    let t1 = solve_tangent(&base, &v1, &s.kernel, &s.potential, &cfg).unwrap();
    let scale = tangent_norm(
        &t1.iter().map(|t| t.w.clone()).collect::<Vec<_>>(),
        &t1.iter().map(|t| t.psi.clone()).collect::<Vec<_>>(),
    )
    .sqrt();

    let mut errs = Vec::new();
    for lam in [1e-2, 1e-3, 1e-4] {
        let other = solve(&base_u.plus(lam, &v1));
        let du: Vec<VectorField> = (0..=n)
            .map(|k| &(&other.states[k].u - &base.states[k].u).scale(1.0 / lam) - &t1[k].w)
            .collect();
        let dphi: Vec<ScalarField> = (0..=n)
            .map(|k| &(&other.states[k].phi - &base.states[k].phi).scale(1.0 / lam) - &t1[k].psi)
            .collect();
        errs.push(tangent_norm(&du, &dphi).sqrt() / scale);
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();

    let t2 = solve_tangent(&base, &v2, &s.kernel, &s.potential, &cfg).unwrap();
    let t12 = solve_tangent(&base, &v1.plus(-3.0, &v2), &s.kernel, &s.potential, &cfg).unwrap();
    let sw: Vec<VectorField> = (0..=n).map(|k| &t12[k].w - &(&t1[k].w - &t2[k].w.scale(3.0))).collect();
    let sp: Vec<ScalarField> = (0..=n).map(|k| &t12[k].psi - &(&t1[k].psi - &t2[k].psi.scale(3.0))).collect();
    let sup_err = tangent_norm(&sw, &sp).sqrt() / scale;
    let ok = ratios.iter().all(|r| (8.0..=12.0).contains(r)) && sup_err <= 1e-12;
    outcome(
        ok,
        format!(
            "linearization error {:.2e}, {:.2e}, {:.2e} for lambda 1e-2..1e-4, ratios {:.2}, {:.2} (in [8, 12]); superposition {sup_err:.1e} (<= 1e-12)",
            errs[0], errs[1], errs[2], ratios[0], ratios[1]
        ),
    )
}

fn max_gradient_gap(s: &Setup, seed: u64, eps: f64) -> f64 {
    let pb = problem(s);
    let n = pb.steps();
    let u = unit_direction(&s.grid, n, s.cfg.dt, 3, seed).scale(2.0);
    let dirs: Vec<Control> = (0..5).map(|d| unit_direction(&s.grid, n, s.cfg.dt, 3, seed + 1 + d)).collect();
    let rows = chns::gradient_check(&pb, &u, &dirs, &[eps]).unwrap();
    rows.iter().map(|r| r.rel_err).fold(0.0, f64::max)
}

fn gradient_check() -> Outcome {
    let (mut rc, s) = default_setup();
    let gap = max_gradient_gap(&s, 71, 1e-4);
    rc.time.dt /= 2.0;
    let half = max_gradient_gap(&rc.build().unwrap(), 71, 1e-4);
    // The gradient is the exact derivative of the discrete cost, so both gaps
    // sit at the finite-difference floor and no dt-trend is left to observe.
    let floor = 1e-6;
    let trend = if gap <= floor && half <= floor {
        format!("both gaps below fd floor {floor:.0e}, dt-trend not observable")
    } else {
        format!("dt-halving ratio {:.2}", gap / half)
    };
    let shrinks = (gap <= floor && half <= floor) || gap / half >= 1.6;
    outcome(
        gap <= 1e-3 && shrinks,
        format!("32^2 T=0.25: max rel err over 5 directions {gap:.2e} (dt 1e-3), {half:.2e} (dt 5e-4), limit 1e-3; {trend}"),
    )
}

fn run_twin(s: &Setup, opts: &OptimOptions) -> (ControlProblem, OptimReport) {
    let pb = problem(s);
    let rep = optimize(&pb.zero_control(), &pb, opts).unwrap();
    (pb, rep)
}

fn twin_experiment(s: &Setup) -> Outcome {
    let (_, rep) = run_twin(s, &s.opts);
    let h = &rep.history;
    let monotone = h.windows(2).all(|w| w[1].cost <= w[0].cost);
    let armijo = h
        .windows(2)
        .all(|w| w[1].cost <= w[0].cost - s.opts.armijo_c1 * w[1].step * w[0].grad_norm.powi(2));
    let iters = h.len() - 1;
    let ok = monotone && armijo && rep.failure.is_none() && iters <= 50 && rep.residual <= 1e-2;
    outcome(
        ok,
        format!(
            "{iters} iterations, J {:.4e} -> {:.4e}, monotone {monotone}, armijo {armijo}, residual {:.2e} (<= 1e-2)",
            h[0].cost,
            h[iters].cost,
            rep.residual
        ),
    )
}

fn converged(s: &Setup) -> (ControlProblem, OptimReport) {
    let opts = OptimOptions {
        max_iters: 300,
        grad_tol: 1e-9,
        ..s.opts
    };
    run_twin(s, &opts)
}

fn minimum_principle(s: &Setup, rep: &OptimReport) -> Outcome {
    let n = rep.control.len();
    let mut r = rng(81);
    let (mut worst, mut min_gap) = (0.0f64, f64::INFINITY);
    for i in 0..10 {
        let k = i * n / 10;
        let p = &rep.last.adjoint[k].p;
        for _ in 0..100 {
            let w = solenoidal_field_with(&s.grid, 4, 1.0, &mut r);
            let gap = hamiltonian_gap(rep.control.slice(k), p, &w).unwrap();
            let wp = &w + p;
            let half = 0.5 * inner(&wp, &wp).unwrap();
            worst = worst.max((gap - half).abs() / half.max(1.0));
            min_gap = min_gap.min(gap);
        }
    }
    outcome(
        worst <= 1e-12 && min_gap >= 0.0,
        format!(
            "1000 samples (10 times x 100 W) at residual {:.1e}: |gap - |W+p|^2/2| {worst:.1e} (<= 1e-12), min gap {min_gap:.3e} (>= 0)",
            rep.residual
        ),
    )
}

fn second_order(pb: &ControlProblem, at: &Evaluation<f64>) -> Outcome {
    let seeds: Vec<u64> = (0..20).map(|d| 900 + d).collect();
    let s = 1e-2;
    let rows = curvature_study(pb, at, &seeds, &[s], 3).unwrap();
    let q_min = rows.iter().map(|r| r.q / (s * s)).fold(f64::INFINITY, f64::min);
    let fd_min = rows.iter().map(|r| r.fd_curvature).fold(f64::INFINITY, f64::min);
    let cross = rows
        .iter()
        .map(|r| (r.q - r.two_delta_j).abs() / r.two_delta_j.abs().max(1e-12))
        .fold(0.0, f64::max);
    outcome(
        q_min >= -1e-6 && fd_min >= -1e-6 && cross <= 1e-2,
        format!(
            "20 directions at s = 1e-2: min Q/s^2 {q_min:.4e}, min fd curvature {fd_min:.4e} (>= -1e-6), max |Q - 2dJ|/|2dJ| {cross:.1e} (<= 1e-2)"
        ),
    )
}

fn io_round_trip() -> Outcome {
    let g = Grid::square(32).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let f = smooth_field(&g, 8, 1.0, 91);
    let v = solenoidal_field(&g, 8, 1.0, 92);
    let (pf, pv) = (dir.path().join("phi.chns"), dir.path().join("u.chns"));
    save_snapshot(&FieldSnapshot::from_scalar(&f, 0.125), &pf).unwrap();
    save_snapshot(&FieldSnapshot::from_vector(&v, 0.125), &pv).unwrap();
    let bits = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
    let fb = load_snapshot(&pf).unwrap().to_scalar(&g).unwrap();
    let vb = load_snapshot(&pv).unwrap().to_vector(&g).unwrap();
    let exact = bits(f.values(), fb.values()) && bits(v.x.values(), vb.x.values()) && bits(v.y.values(), vb.y.values());

    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let status = Command::new(env!("CARGO_BIN_EXE_chns"))
        .args(["verify", "--suite", "all"])
        .current_dir(&root)
        .output()
        .expect("run chns verify");
    let code = status.status.code();
    outcome(
        exact && code == Some(0),
        format!("snapshot round trip bit-exact {exact}; `chns verify --suite all` exit {code:?}"),
    )
}

fn timed(budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let t0 = Instant::now();
    let mut o = f();
    let took = t0.elapsed();
    o.detail.push_str(&format!("; {:.1} s", took.as_secs_f64()));
    if let Some(b) = budget {
        if took > b {
            o.passed = false;
            o.detail.push_str(&format!(" exceeds {} s budget", b.as_secs()));
        }
    }
    o
}

fn main() -> ExitCode {
    chns::init_threads();
    let mins = |m: u64| Some(Duration::from_secs(60 * m));
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut record = |name, o: Outcome| {
        println!("{} {:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, results.len() + 1, o.detail);
        results.push((name, o));
    };
    record("spectral operators", timed(None, operators));
    record("convolution oracle", timed(Some(Duration::from_secs(10)), convolution));
    record("energy functional", timed(None, energy_functional));
    record("conservation", timed(None, conservation));
    record("energy identity", timed(None, energy_identity));
    record("taylor-green decay", timed(mins(1), taylor_green));
    record("tangent consistency", timed(None, tangent_consistency));
    record("adjoint gradient check", timed(mins(5), gradient_check));
    let (_, s) = default_setup();
    record("twin optimization", timed(mins(15), || twin_experiment(&s)));
    let t0 = Instant::now();
    let (pb, rep) = converged(&s);
    let prep = t0.elapsed();
    record("minimum principle", timed(None, || minimum_principle(&s, &rep)));
    record(
        "second-order conditions",
        timed(mins(15).map(|b| b.saturating_sub(prep)), || second_order(&pb, &rep.last)),
    );
    record("snapshot io and verify", timed(None, io_round_trip));

    let failed = results.iter().filter(|r| !r.1.passed).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
