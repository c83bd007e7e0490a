use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chns::io::csv::{write_curvature, write_diagnostics, write_gradcheck, write_history, write_table};
use chns::io::{load_config, parse_config, save_snapshot, FieldSnapshot, RunConfig, Setup};
use chns::optimize::{optimize, ControlProblem};
use chns::random::{rng, solenoidal_field_with, unit_direction};
use chns::verify::{run_suite, Suite};
use chns::{curvature_study, hamiltonian_gap, solve_forward, gradient_check, Error};

const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

#[derive(Parser)]
#[command(name = "chns", version, about = "Nonlocal CHNS solver and optimal-control toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` of the config
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve with zero control; writes diagnostics and snapshots
    Simulate(Common),
    /// Steepest descent on the tracking problem
    Optimize(Common),
    /// Adjoint gradient against central differences
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        dirs: usize,
    },
    /// Check discrete invariants
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
        /// Defaults to the shipped default config
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Second-order study at the optimized control
    Curvature {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1e-2")]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        dirs: usize,
    },
    /// Minimum-principle gaps at the optimized control
    Hamiltonian {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

enum Failure {
    Validation(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn prepare(common: &Common) -> Result<(RunConfig, Setup, PathBuf), Failure> {
    let cfg = load_config(&common.config)?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.toml"), &cfg.source_text)?;
    fs::write(out.join("seed.txt"), format!("{}\n", cfg.seed))?;
    let setup = cfg.build()?;
    Ok((cfg, setup, out))
}

fn problem(s: &Setup) -> Result<ControlProblem<f64>, Failure> {
    Ok(ControlProblem::new(
        s.init.clone(),
        s.cfg.clone(),
        s.kernel.clone(),
        s.potential.clone(),
        s.targets.clone(),
    )?)
}

fn simulate(common: &Common) -> Outcome {
    let (_, s, out) = prepare(common)?;
    let zero = chns::forward::Control::zeros(&s.grid, s.cfg.steps(), s.cfg.dt);
    let snaps = out.join("snapshots");
    fs::create_dir_all(&snaps)?;
    let (traj, err) = match solve_forward(&s.init, &zero, &s.cfg, &s.kernel, &s.potential) {
        Ok(t) => (t, None),
        Err(f) => match f.partial {
            Some(p) => (p, Some(f.error)),
            None => return Err(f.error.into()),
        },
    };
    write_diagnostics(out.join("diagnostics.csv"), &traj.diagnostics)?;
    for (n, st) in traj.states.iter().enumerate().step_by(s.cfg.record_every) {
        let t = st.t;
        save_snapshot(&FieldSnapshot::from_vector(&st.u, t), snaps.join(format!("u_{n:06}.chns")))?;
        save_snapshot(&FieldSnapshot::from_scalar(&st.phi, t), snaps.join(format!("phi_{n:06}.chns")))?;
    }
    if let Some(e) = err {
        return Err(e.into());
    }
    let last = traj.diagnostics.last().copied();
    if let Some(d) = last {
        println!("t = {}  energy = {:.6e}  mass = {:.6e}  max|u| = {:.4e}", d.t, d.energy, d.mass, d.max_speed);
    }
    Ok(())
}

fn run_optimizer(s: &Setup) -> Result<(ControlProblem<f64>, chns::OptimReport), Failure> {
    let pb = problem(s)?;
    let rep = optimize(&pb.zero_control(), &pb, &s.opts)?;
    Ok((pb, rep))
}

fn save_control(dir: &Path, c: &chns::Control) -> Outcome {
    fs::create_dir_all(dir)?;
    for (n, v) in c.slices().iter().enumerate() {
        let t = n as f64 * c.dt();
        save_snapshot(&FieldSnapshot::from_vector(v, t), dir.join(format!("U_{n:06}.chns")))?;
    }
    Ok(())
}

fn optimize_cmd(common: &Common) -> Outcome {
    let (_, s, out) = prepare(common)?;
    let (_, rep) = run_optimizer(&s)?;
    write_history(out.join("history.csv"), &rep.history)?;
    save_control(&out.join("control"), &rep.control)?;
    let last = rep.history.last().expect("initial iterate");
    println!(
        "iterations = {}  J = {:.6e}  residual = {:.3e}  converged = {}",
        last.iter, last.cost, rep.residual, rep.converged
    );
    if let Some(msg) = rep.failure {
        return Err(Failure::Numerical(msg));
    }
    Ok(())
}

fn gradcheck(common: &Common, eps: &[f64], dirs: usize) -> Outcome {
    let (cfg, s, out) = prepare(common)?;
    let pb = problem(&s)?;
    let n = pb.steps();
    let directions: Vec<_> = (0..dirs as u64)
        .map(|d| unit_direction(&s.grid, n, s.cfg.dt, 3, cfg.seed.wrapping_add(100 + d)))
        .collect();
    let rows = gradient_check(&pb, &pb.zero_control(), &directions, eps)?;
    write_gradcheck(out.join("gradcheck.csv"), &rows)?;
    println!("{:>4} {:>10} {:>22} {:>22} {:>10}", "dir", "eps", "fd_value", "adjoint_value", "rel_err");
    for r in &rows {
        println!(
            "{:>4} {:>10.1e} {:>22.14e} {:>22.14e} {:>10.2e}",
            r.direction, r.eps, r.fd_value, r.adjoint_value, r.rel_err
        );
    }
    Ok(())
}

fn verify(suite: Suite, config: Option<&Path>) -> Outcome {
    let cfg = match config {
        Some(p) => load_config(p)?,
        None => parse_config(DEFAULT_CONFIG, Path::new("."))?,
    };
    let s = cfg.build()?;
    let checks = run_suite(suite, &s, cfg.seed)?;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure::Validation(format!("{failed} of {} checks failed", checks.len())));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

fn curvature(common: &Common, scales: &[f64], dirs: usize) -> Outcome {
    let (cfg, s, out) = prepare(common)?;
    let (pb, rep) = run_optimizer(&s)?;
    let seeds: Vec<u64> = (0..dirs as u64).map(|d| cfg.seed.wrapping_add(1000 + d)).collect();
    let rows = curvature_study(&pb, &rep.last, &seeds, scales, 3)?;
    write_curvature(out.join("curvature.csv"), &rows)?;
    println!("{:>6} {:>8} {:>14} {:>14} {:>14}", "seed", "s", "Q", "2dJ", "fd_curvature");
    for r in &rows {
        println!(
            "{:>6} {:>8.1e} {:>14.6e} {:>14.6e} {:>14.6e}",
            r.seed, r.s, r.q, r.two_delta_j, r.fd_curvature
        );
    }
    Ok(())
}

fn hamiltonian(common: &Common, samples: usize) -> Outcome {
    let (cfg, s, out) = prepare(common)?;
    let (_, rep) = run_optimizer(&s)?;
    let n = rep.control.len();
    let mut r = rng(cfg.seed.wrapping_add(7));
    let mut rows = Vec::with_capacity(samples);
    for k in 0..samples {
        let step = (k * 7919) % n;
        let w = solenoidal_field_with(&s.grid, 4, 1.0, &mut r);
        let p = &rep.last.adjoint[step].p;
        let gap = hamiltonian_gap(rep.control.slice(step), p, &w)?;
        let wp = &w + p;
        let half = 0.5 * chns::field::inner(&wp, &wp)?;
        rows.push((step, gap, half));
    }
    write_table(out.join("hamiltonian.csv"), &["step", "gap", "half_norm_sq"], &rows, |r| {
        vec![r.0.to_string(), format!("{:?}", r.1), format!("{:?}", r.2)]
    })?;
    let min_gap = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let max_dev = rows.iter().map(|r| (r.1 - r.2).abs()).fold(0.0, f64::max);
    println!("samples = {samples}  residual = {:.3e}", rep.residual);
    println!("min gap = {min_gap:.6e}  max |gap - |W + p|^2 / 2| = {max_dev:.3e}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    chns::init_threads();
    let res = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Optimize(c) => optimize_cmd(c),
        Command::Gradcheck { common, eps, dirs } => gradcheck(common, eps, *dirs),
        Command::Verify { suite, config } => verify(*suite, config.as_deref()),
        Command::Curvature { common, scales, dirs } => curvature(common, scales, *dirs),
        Command::Hamiltonian { common, samples } => hamiltonian(common, *samples),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
