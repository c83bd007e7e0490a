//! Run configuration in TOML syntax.
//!
//! Loading collects every problem it finds, each named by its key path, and
//! reports them together.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use toml::{Table, Value};

use crate::adjoint::TargetSpec;
use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, VectorField};
use crate::forward::{default_stabilization, solve_forward, Control, SolverConfig, State};
use crate::io::snapshot::load_snapshot;
use crate::optimize::OptimOptions;
use crate::physics::{Kernel, KernelSpec, Potential};
use crate::random;

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelConfig {
    Gaussian { sigma: f64, mass: Option<f64> },
    Delta,
    File(PathBuf),
}

/// Prescribed `a(x)`.
#[derive(Clone, Debug, PartialEq)]
pub enum SyntheticA {
    /// `mean + amplitude * cos(kx x + ky y)` on `[0, 2pi)^2`-scaled
    /// coordinates.
    Cosine { mean: f64, amplitude: f64, kx: i64, ky: i64 },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicsConfig {
    pub nu: f64,
    pub kernel: KernelConfig,
    /// `potential[k]` multiplies `s^k`.
    pub potential: Vec<f64>,
    pub potential_bound: f64,
    pub growth_r: Option<f64>,
    pub synthetic_a: Option<SyntheticA>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_final: f64,
    /// `None` selects the default stabilization.
    pub stabilization: Option<f64>,
    pub record_every: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VelocityInit {
    Zero,
    TaylorGreen { amplitude: f64 },
    Random { amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialConfig {
    Constant { phi: f64, velocity: VelocityInit },
    /// `phi = tanh((ly/4 - |y - ly/2|) / width)`: a band of `+1` in `-1`.
    TanhStripe { width: f64, velocity: VelocityInit },
    Random { kmax: usize, amplitude: f64, mean: f64, velocity: VelocityInit },
    Files { u: PathBuf, phi: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub enum TargetConfig {
    /// Targets produced by the known control `amplitude * V`, with `V` a
    /// unit random direction drawn from `seed + 1`.
    Twin { amplitude: f64, kmax: usize },
    /// Steady targets read from snapshots.
    Files { u: PathBuf, phi: PathBuf },
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub physics: PhysicsConfig,
    pub time: TimeConfig,
    pub initial: InitialConfig,
    pub targets: TargetConfig,
    pub optimizer: OptimizerConfig,
    /// Exact text the config was parsed from.
    pub source_text: String,
}

struct Reader<'a> {
    root: &'a Table,
    base: &'a Path,
    errors: Vec<String>,
}

fn lookup<'t>(root: &'t Table, path: &str) -> Option<&'t Value> {
    let mut parts = path.split('.');
    let mut cur = root.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

impl<'a> Reader<'a> {
    fn get(&self, path: &str) -> Option<&'a Value> {
        lookup(self.root, path)
    }

    fn has(&self, path: &str) -> bool {
        self.get(path).is_some()
    }

    fn float_opt(&mut self, path: &str) -> Option<f64> {
        match self.get(path)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.errors.push(format!("{path} must be a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn float(&mut self, path: &str, default: f64) -> f64 {
        self.float_opt(path).unwrap_or(default)
    }

    fn required_float(&mut self, path: &str) -> f64 {
        if !self.has(path) {
            self.errors.push(format!("{path} is missing"));
            return f64::NAN;
        }
        self.float_opt(path).unwrap_or(f64::NAN)
    }

    fn int_opt(&mut self, path: &str) -> Option<i64> {
        match self.get(path)? {
            Value::Integer(i) => Some(*i),
            other => {
                self.errors.push(format!("{path} must be an integer, got {}", other.type_str()));
                None
            }
        }
    }

    fn uint(&mut self, path: &str, default: usize) -> usize {
        match self.int_opt(path) {
            Some(i) if i >= 0 => i as usize,
            Some(i) => {
                self.errors.push(format!("{path} must be >= 0, got {i}"));
                default
            }
            None => default,
        }
    }

    fn required_uint(&mut self, path: &str) -> usize {
        if !self.has(path) {
            self.errors.push(format!("{path} is missing"));
            return 0;
        }
        self.uint(path, 0)
    }

    fn string(&mut self, path: &str) -> Option<&'a str> {
        match self.get(path)? {
            Value::String(s) => Some(s.as_str()),
            other => {
                self.errors.push(format!("{path} must be a string, got {}", other.type_str()));
                None
            }
        }
    }

    /// Resolves a file path relative to the config file and checks it exists.
    fn file(&mut self, path: &str) -> PathBuf {
        match self.string(path) {
            Some(s) => {
                let p = self.base.join(s);
                if !p.is_file() {
                    self.errors.push(format!("{path}: file {} does not exist", p.display()));
                }
                p
            }
            None => {
                if !self.has(path) {
                    self.errors.push(format!("{path} is missing"));
                }
                PathBuf::new()
            }
        }
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0) && !v.is_nan() {
            self.errors.push(format!("{path} must be > 0"));
        }
    }

    fn nonnegative(&mut self, path: &str, v: f64) {
        if !(v >= 0.0) && !v.is_nan() {
            self.errors.push(format!("{path} must be >= 0"));
        }
    }

    fn velocity(&mut self, prefix: &str) -> VelocityInit {
        let key = format!("{prefix}.velocity");
        let amp_key = format!("{prefix}.velocity_amplitude");
        let amplitude = self.float(&amp_key, 1.0);
        match self.string(&key).unwrap_or("zero") {
            "zero" => VelocityInit::Zero,
            "taylor_green" => VelocityInit::TaylorGreen { amplitude },
            "random" => VelocityInit::Random { amplitude },
            other => {
                self.errors.push(format!(
                    "{key} must be one of zero, taylor_green, random; got {other:?}"
                ));
                VelocityInit::Zero
            }
        }
    }
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Parses and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

/// Parses config text; relative file paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![format!("syntax: {}", e.message())]))?;
    let mut r = Reader {
        root: &root,
        base,
        errors: Vec::new(),
    };

    let seed = match r.int_opt("seed") {
        Some(s) if s >= 0 => s as u64,
        Some(s) => {
            r.errors.push(format!("seed must be >= 0, got {s}"));
            0
        }
        None => 0,
    };
    let output_dir = PathBuf::from(r.string("output_dir").unwrap_or("out"));

    let nx = r.required_uint("grid.nx");
    let ny = r.required_uint("grid.ny");
    for (k, n) in [("grid.nx", nx), ("grid.ny", ny)] {
        if r.has(k) && (n < 8 || !n.is_power_of_two()) {
            r.errors.push(format!("{k} must be a power of two >= 8, got {n}"));
        }
    }
    let lx = r.float("grid.lx", TWO_PI);
    let ly = r.float("grid.ly", TWO_PI);
    r.positive("grid.lx", lx);
    r.positive("grid.ly", ly);

    let nu = r.required_float("physics.nu");
    r.positive("physics.nu", nu);
    let kernel = match r.string("physics.kernel.type").unwrap_or("gaussian") {
        "gaussian" => {
            let sigma = r.float("physics.kernel.sigma", 0.5);
            r.positive("physics.kernel.sigma", sigma);
            let mass = r.float("physics.kernel.mass", 5.0);
            r.positive("physics.kernel.mass", mass);
            KernelConfig::Gaussian { sigma, mass: Some(mass) }
        }
        "delta" => KernelConfig::Delta,
        "file" => KernelConfig::File(r.file("physics.kernel.path")),
        other => {
            r.errors.push(format!(
                "physics.kernel.type must be one of gaussian, delta, file; got {other:?}"
            ));
            KernelConfig::Delta
        }
    };
    let potential = match r.get("physics.potential") {
        None => vec![1.0, 0.0, -2.0, 0.0, 1.0],
        Some(Value::Array(a)) => {
            let mut out = Vec::new();
            for (i, v) in a.iter().enumerate() {
                match v {
                    Value::Float(f) => out.push(*f),
                    Value::Integer(n) => out.push(*n as f64),
                    _ => r.errors.push(format!("physics.potential[{i}] must be a number")),
                }
            }
            if out.is_empty() || out.len() > 7 {
                r.errors.push(format!(
                    "physics.potential needs 1 to 7 coefficients, got {}",
                    out.len()
                ));
            }
            out
        }
        Some(_) => {
            r.errors.push("physics.potential must be an array of coefficients".into());
            Vec::new()
        }
    };
    let potential_bound = r.float("physics.potential_bound", 2.0);
    r.positive("physics.potential_bound", potential_bound);
    let growth_r = r.float_opt("physics.growth_exponent");
    let synthetic_a = if r.has("physics.synthetic_a") {
        if r.has("physics.synthetic_a.path") {
            Some(SyntheticA::File(r.file("physics.synthetic_a.path")))
        } else {
            let mean = r.float("physics.synthetic_a.mean", 5.0);
            let amplitude = r.float("physics.synthetic_a.amplitude", 0.5);
            let kx = r.int_opt("physics.synthetic_a.kx").unwrap_or(1);
            let ky = r.int_opt("physics.synthetic_a.ky").unwrap_or(0);
            if mean - amplitude.abs() < 0.0 {
                r.errors.push("physics.synthetic_a: mean - |amplitude| must be >= 0".into());
            }
            Some(SyntheticA::Cosine { mean, amplitude, kx, ky })
        }
    } else {
        None
    };

    let dt = r.required_float("time.dt");
    r.positive("time.dt", dt);
    let t_final = r.required_float("time.t_final");
    r.positive("time.t_final", t_final);
    if dt > 0.0 && t_final > 0.0 {
        let n = (t_final / dt).round();
        if n < 1.0 || (n * dt - t_final).abs() > 1e-12 * t_final.max(1.0) {
            r.errors.push(format!("time.dt = {dt} must divide time.t_final = {t_final}"));
        }
    }
    let stabilization = match r.get("time.stabilization") {
        None => None,
        Some(Value::String(s)) if s == "auto" => None,
        Some(_) => {
            let s = r.float("time.stabilization", 0.0);
            r.nonnegative("time.stabilization", s);
            Some(s)
        }
    };
    let record_every = r.uint("time.record_every", 1);
    if record_every == 0 {
        r.errors.push("time.record_every must be >= 1".into());
    }

    let initial = match r.string("initial.type").unwrap_or("random") {
        "constant" => InitialConfig::Constant {
            phi: r.float("initial.phi", 0.0),
            velocity: r.velocity("initial"),
        },
        "tanh_stripe" => {
            let width = r.float("initial.width", 0.3);
            r.positive("initial.width", width);
            InitialConfig::TanhStripe {
                width,
                velocity: r.velocity("initial"),
            }
        }
        "random" => InitialConfig::Random {
            kmax: r.uint("initial.kmax", 4),
            amplitude: r.float("initial.amplitude", 0.8),
            mean: r.float("initial.mean", 0.0),
            velocity: r.velocity("initial"),
        },
        "files" => InitialConfig::Files {
            u: r.file("initial.u_path"),
            phi: r.file("initial.phi_path"),
        },
        other => {
            r.errors.push(format!(
                "initial.type must be one of constant, tanh_stripe, random, files; got {other:?}"
            ));
            InitialConfig::Constant {
                phi: 0.0,
                velocity: VelocityInit::Zero,
            }
        }
    };

    let targets = match r.string("targets.type").unwrap_or("twin") {
        "twin" => TargetConfig::Twin {
            amplitude: r.float("targets.amplitude", 5.0),
            kmax: r.uint("targets.kmax", 3),
        },
        "files" => TargetConfig::Files {
            u: r.file("targets.u_path"),
            phi: r.file("targets.phi_path"),
        },
        "zero" => TargetConfig::Zero,
        other => {
            r.errors.push(format!("targets.type must be one of twin, files, zero; got {other:?}"));
            TargetConfig::Zero
        }
    };

    let optimizer = OptimizerConfig {
        max_iters: r.uint("optimizer.max_iters", 50),
        grad_tol: r.float("optimizer.grad_tol", 1e-6),
        armijo_c1: r.float("optimizer.armijo_c1", 1e-4),
        backtrack: r.float("optimizer.backtrack", 0.5),
        alpha: r.float("optimizer.alpha", 1.0),
        beta: r.float("optimizer.beta", 1.0),
        gamma: r.float("optimizer.gamma", 1.0),
    };
    r.positive("optimizer.grad_tol", optimizer.grad_tol);
    for (k, v) in [("optimizer.armijo_c1", optimizer.armijo_c1), ("optimizer.backtrack", optimizer.backtrack)] {
        if !(v > 0.0 && v < 1.0) {
            r.errors.push(format!("{k} must lie in (0, 1)"));
        }
    }
    for (k, v) in [
        ("optimizer.alpha", optimizer.alpha),
        ("optimizer.beta", optimizer.beta),
        ("optimizer.gamma", optimizer.gamma),
    ] {
        r.nonnegative(k, v);
    }

    if !r.errors.is_empty() {
        return Err(Error::Config(r.errors));
    }
    Ok(RunConfig {
        seed,
        output_dir,
        grid: GridConfig { nx, ny, lx, ly },
        physics: PhysicsConfig {
            nu,
            kernel,
            potential,
            potential_bound,
            growth_r,
            synthetic_a,
        },
        time: TimeConfig {
            dt,
            t_final,
            stabilization,
            record_every,
        },
        initial,
        targets,
        optimizer,
        source_text: text.to_string(),
    })
}

/// Objects built from a [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Setup {
    pub grid: Arc<Grid<f64>>,
    pub kernel: Kernel<f64>,
    pub potential: Potential<f64>,
    pub cfg: SolverConfig<f64>,
    pub init: State<f64>,
    pub targets: TargetSpec<f64>,
    /// The generating control of a twin experiment.
    pub true_control: Option<Control<f64>>,
    pub opts: OptimOptions,
}

fn velocity(g: &Arc<Grid<f64>>, v: VelocityInit, seed: u64) -> VectorField<f64> {
    match v {
        VelocityInit::Zero => VectorField::zeros(g),
        VelocityInit::TaylorGreen { amplitude } => {
            let (sx, sy) = (TWO_PI / g.lx(), TWO_PI / g.ly());
            VectorField::from_fn(
                g,
                |x, y| amplitude * (sx * x).sin() * (sy * y).cos(),
                |x, y| -amplitude * (sx / sy) * (sx * x).cos() * (sy * y).sin(),
            )
        }
        VelocityInit::Random { amplitude } => random::solenoidal_field(g, 4, amplitude, seed.wrapping_add(2)),
    }
}

impl RunConfig {
    pub fn build_grid(&self) -> Result<Arc<Grid<f64>>> {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)
    }

    pub fn build(&self) -> Result<Setup> {
        let g = self.build_grid()?;
        let spec = match &self.physics.kernel {
            KernelConfig::Gaussian { sigma, mass } => KernelSpec::Gaussian { sigma: *sigma, mass: *mass },
            KernelConfig::Delta => KernelSpec::Delta,
            KernelConfig::File(p) => KernelSpec::Custom(load_snapshot(p)?.to_scalar(&g)?),
        };
        let mut kernel = Kernel::build(&spec, &g)?;
        if let Some(a) = &self.physics.synthetic_a {
            let field = match a {
                SyntheticA::Cosine { mean, amplitude, kx, ky } => {
                    let (sx, sy) = (TWO_PI / g.lx(), TWO_PI / g.ly());
                    let (kx, ky) = (*kx as f64, *ky as f64);
                    ScalarField::from_fn(&g, |x, y| mean + amplitude * (kx * sx * x + ky * sy * y).cos())
                }
                SyntheticA::File(p) => load_snapshot(p)?.to_scalar(&g)?,
            };
            kernel = kernel.with_synthetic_a(field)?;
        }
        let potential = Potential::new(&self.physics.potential, self.physics.potential_bound)?;
        let mut cfg = SolverConfig::new(self.physics.nu, self.time.dt, self.time.t_final, &kernel, &potential)?;
        cfg.stabilization = self
            .time
            .stabilization
            .unwrap_or_else(|| default_stabilization(&kernel, &potential));
        cfg.record_every = self.time.record_every;
        cfg.validate()?;

        let init = match &self.initial {
            InitialConfig::Constant { phi, velocity: v } => {
                State::projected(velocity(&g, *v, self.seed), ScalarField::constant(&g, *phi), 0.0)?
            }
            InitialConfig::TanhStripe { width, velocity: v } => {
                let ly = g.ly();
                let phi = ScalarField::from_fn(&g, |_, y| ((0.25 * ly - (y - 0.5 * ly).abs()) / width).tanh());
                State::projected(velocity(&g, *v, self.seed), phi, 0.0)?
            }
            InitialConfig::Random {
                kmax,
                amplitude,
                mean,
                velocity: v,
            } => {
                let phi = &random::smooth_field(&g, *kmax, *amplitude, self.seed) + &ScalarField::constant(&g, *mean);
                State::projected(velocity(&g, *v, self.seed), phi, 0.0)?
            }
            InitialConfig::Files { u, phi } => State::projected(
                load_snapshot(u)?.to_vector(&g)?,
                load_snapshot(phi)?.to_scalar(&g)?,
                0.0,
            )?,
        };

        let steps = cfg.steps();
        let (targets, true_control) = match &self.targets {
            TargetConfig::Twin { amplitude, kmax } => {
                let u_true =
                    random::unit_direction(&g, steps, cfg.dt, *kmax, self.seed.wrapping_add(1)).scale(*amplitude);
                let traj = solve_forward(&init, &u_true, &cfg, &kernel, &potential)?;
                (TargetSpec::from_trajectory(&traj), Some(u_true))
            }
            TargetConfig::Files { u, phi } => (
                TargetSpec::steady(load_snapshot(u)?.to_vector(&g)?, load_snapshot(phi)?.to_scalar(&g)?, steps)?,
                None,
            ),
            TargetConfig::Zero => (TargetSpec::zeros(&g, steps), None),
        };
        let o = &self.optimizer;
        let targets = targets.with_weights(o.alpha, o.beta, o.gamma)?;
        let opts = OptimOptions {
            max_iters: o.max_iters,
            grad_tol: o.grad_tol,
            armijo_c1: o.armijo_c1,
            backtrack: o.backtrack,
            ..OptimOptions::default()
        };
        Ok(Setup {
            grid: g,
            kernel,
            potential,
            cfg,
            init,
            targets,
            true_control,
            opts,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[grid]
nx = 16
ny = 16
[physics]
nu = 0.1
[time]
dt = 0.01
t_final = 0.1
";

    fn errors(text: &str) -> Vec<String> {
        match parse_config(text, Path::new(".")) {
            Err(Error::Config(e)) => e,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL, Path::new(".")).unwrap();
        assert_eq!((c.optimizer.alpha, c.optimizer.beta, c.optimizer.gamma), (1.0, 1.0, 1.0));
        assert_eq!(c.time.stabilization, None);
        assert_eq!(c.grid.lx, TWO_PI);
        let s = c.build().unwrap();
        // max |F''| on [-2, 2] is 44, a = 5
        assert!((s.cfg.stabilization - 39.0).abs() < 1e-12);
        assert_eq!(s.targets.len(), 11);
    }

    #[test]
    fn zero_dt_is_named() {
        let e = errors(&MINIMAL.replace("dt = 0.01", "dt = 0"));
        assert!(e.iter().any(|m| m == "time.dt must be > 0"), "{e:?}");
    }

    #[test]
    fn all_errors_are_reported() {
        let text = MINIMAL
            .replace("nx = 16", "nx = 12")
            .replace("nu = 0.1", "nu = -1.0")
            .replace("t_final = 0.1", "");
        let e = errors(&text);
        assert!(e.iter().any(|m| m.contains("grid.nx")), "{e:?}");
        assert!(e.iter().any(|m| m.contains("physics.nu")), "{e:?}");
        assert!(e.iter().any(|m| m == "time.t_final is missing"), "{e:?}");
    }

    #[test]
    fn missing_target_file_is_listed() {
        let text = format!("{MINIMAL}\n[targets]\ntype = \"files\"\nu_path = \"nope_u.chns\"\nphi_path = \"nope_phi.chns\"\n");
        let e = errors(&text);
        assert!(e.iter().any(|m| m.contains("targets.u_path") && m.contains("nope_u.chns")), "{e:?}");
        assert!(e.iter().any(|m| m.contains("targets.phi_path")), "{e:?}");
    }

    #[test]
    fn synthetic_a_preset() {
        let text = format!("{MINIMAL}\n[physics.synthetic_a]\nmean = 6.0\namplitude = 1.0\n");
        let s = parse_config(&text, Path::new(".")).unwrap().build().unwrap();
        assert!(s.kernel.is_synthetic());
        assert!((s.kernel.a().at(0, 0) - 7.0).abs() < 1e-12);
    }
}
