//! Command-line front end: integrate single runs, classify them, sweep
//! parameter grids, and run the verification battery.
//!
//! Exit codes are a stable scripting contract: 0 success or theorem match,
//! 1 usage error, 2 numerical breakdown, 3 theorem mismatch.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::classify::{classify, completeness, sweep, Completeness, SweepRow, TheoremMatch};
use crate::geometry::FiberModel;
use crate::integrate::{
    full_line_seed, integrate_full_line, integrate_pole_start, IntegrateError, IntegratorConfig,
    Trajectory,
};
use crate::odes::{residual, BoundaryCase, PoleBranch, SolitonParams};
use crate::verify::run_suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_BREAKDOWN: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Parser)]
#[command(name = "yamabe-lab", version, about = "Warped-product Yamabe soliton laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one soliton profile and emit the trajectory.
    Integrate(RunArgs),
    /// Integrate and compare the outcome against the classification table.
    Classify(RunArgs),
    /// Classify a grid of parameters into a table.
    Sweep(SweepArgs),
    /// Run the verification battery.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FiberArg {
    Circle,
    Sphere2,
    Euclid2,
    Hyper2,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CaseArg {
    Pole,
    Line,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BranchArg {
    A,
    B,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct CommonArgs {
    /// Soliton dimension (2 or 3).
    #[arg(long)]
    dim: Option<u32>,
    /// Soliton constant lambda.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Fiber scalar curvature (3D; implies a constant-curvature fiber).
    #[arg(long, allow_hyphen_values = true)]
    rbar: Option<f64>,
    /// Fiber geometry.
    #[arg(long, value_enum)]
    fiber: Option<FiberArg>,
    /// Boundary data: smooth pole or full-line seed.
    #[arg(long, value_enum)]
    case: Option<CaseArg>,
    /// Pole branch (sign of rho' at the pole).
    #[arg(long, value_enum)]
    branch: Option<BranchArg>,
    /// Seed warp value at r = 0 (line case).
    #[arg(long, allow_hyphen_values = true)]
    rho0: Option<f64>,
    /// Seed slope at r = 0 (line case).
    #[arg(long, allow_hyphen_values = true)]
    drho0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r_min: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    pole_offset: Option<f64>,
    /// Output format.
    #[arg(long, value_enum)]
    out: Option<OutFormat>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Inclusive lambda grid a:b:step.
    #[arg(long, allow_hyphen_values = true)]
    lambda_grid: Option<String>,
    /// Full-line seed grid "rho,rho,..xdrho,drho,..".
    #[arg(long, allow_hyphen_values = true)]
    seed_grid: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run a single criterion by name.
    #[arg(long)]
    only: Option<String>,
    /// Multiply all acceptance tolerances.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
}

/// Parse argv and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Integrate(args) => cmd_integrate(&args),
        Command::Classify(args) => cmd_classify(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Verify(args) => cmd_verify(&args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

/// Fully resolved run setup after merging config file and flags.
struct Resolved {
    params: SolitonParams,
    seed: Option<(f64, f64)>,
    config: IntegratorConfig,
    out: OutFormat,
    output: Option<PathBuf>,
}

fn load_config(path: &PathBuf) -> Result<HashMap<String, String>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut map = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(format!("{}:{}: expected key=value", path.display(), idx + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn cfg_parse<T: std::str::FromStr>(
    map: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, String> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| format!("config key {key}: cannot parse {raw:?}")),
    }
}

impl CommonArgs {
    fn resolve(&self) -> Result<Resolved, String> {
        let file = match &self.config {
            Some(path) => load_config(path)?,
            None => HashMap::new(),
        };
        let dim = self
            .dim
            .or(cfg_parse(&file, "dim")?)
            .ok_or("missing --dim")?;
        let lambda = self
            .lambda
            .or(cfg_parse(&file, "lambda")?)
            .ok_or("missing --lambda")?;
        let rbar = self.rbar.or(cfg_parse(&file, "rbar")?);
        let fiber_arg = self.fiber.or(match file.get("fiber").map(String::as_str) {
            None => None,
            Some("circle") => Some(FiberArg::Circle),
            Some("sphere2") => Some(FiberArg::Sphere2),
            Some("euclid2") => Some(FiberArg::Euclid2),
            Some("hyper2") => Some(FiberArg::Hyper2),
            Some(other) => return Err(format!("config key fiber: unknown value {other:?}")),
        });
        let case_arg = self.case.or(match file.get("case").map(String::as_str) {
            None => None,
            Some("pole") => Some(CaseArg::Pole),
            Some("line") => Some(CaseArg::Line),
            Some(other) => return Err(format!("config key case: unknown value {other:?}")),
        });
        let branch = self.branch.or(match file.get("branch").map(String::as_str) {
            None => None,
            Some("A") | Some("a") => Some(BranchArg::A),
            Some("B") | Some("b") => Some(BranchArg::B),
            Some(other) => return Err(format!("config key branch: unknown value {other:?}")),
        });

        let fiber = match (dim, fiber_arg, rbar) {
            (2, None | Some(FiberArg::Circle), _) => FiberModel::circle(),
            (2, Some(_), _) => return Err("2D solitons use the circle fiber".into()),
            (3, Some(FiberArg::Sphere2), _) => FiberModel::round_sphere2(),
            (3, Some(FiberArg::Euclid2), _) => FiberModel::euclidean2(),
            (3, Some(FiberArg::Hyper2), r) => {
                FiberModel::hyperbolic2(r.unwrap_or(-2.0)).map_err(|e| e.to_string())?
            }
            (3, Some(FiberArg::Circle), _) => {
                return Err("the circle fiber only makes sense in dimension 2".into())
            }
            (3, None, Some(r)) => FiberModel::const_scal(r),
            (3, None, None) => return Err("dimension 3 needs --fiber or --rbar".into()),
            (d, _, _) => return Err(format!("unsupported dimension {d}")),
        };

        let case = match case_arg.ok_or("missing --case")? {
            CaseArg::Pole => BoundaryCase::PoleStart {
                branch: match branch.unwrap_or(BranchArg::A) {
                    BranchArg::A => PoleBranch::A,
                    BranchArg::B => PoleBranch::B,
                },
            },
            CaseArg::Line => BoundaryCase::FullLine,
        };
        let params = SolitonParams::new(dim, lambda, fiber, case).map_err(|e| e.to_string())?;

        let seed = match case {
            BoundaryCase::FullLine => {
                let rho0 = self
                    .rho0
                    .or(cfg_parse(&file, "rho0")?)
                    .ok_or("line case needs --rho0")?;
                let drho0 = self
                    .drho0
                    .or(cfg_parse(&file, "drho0")?)
                    .ok_or("line case needs --drho0")?;
                Some((rho0, drho0))
            }
            BoundaryCase::PoleStart { .. } => None,
        };

        let defaults = IntegratorConfig::default();
        let config = IntegratorConfig {
            r_max: self.r_max.or(cfg_parse(&file, "r-max")?).unwrap_or(defaults.r_max),
            r_min: self.r_min.or(cfg_parse(&file, "r-min")?).unwrap_or(defaults.r_min),
            rel_tol: self.rel_tol.or(cfg_parse(&file, "rel-tol")?).unwrap_or(defaults.rel_tol),
            abs_tol: self.abs_tol.or(cfg_parse(&file, "abs-tol")?).unwrap_or(defaults.abs_tol),
            pole_offset: self
                .pole_offset
                .or(cfg_parse(&file, "pole-offset")?)
                .unwrap_or(defaults.pole_offset),
            ..defaults
        };
        config.validate().map_err(|e| e.to_string())?;

        let out = self
            .out
            .or(match file.get("out").map(String::as_str) {
                None => None,
                Some("csv") => Some(OutFormat::Csv),
                Some("json") => Some(OutFormat::Json),
                Some(other) => return Err(format!("config key out: unknown value {other:?}")),
            })
            .unwrap_or(OutFormat::Csv);
        let output =
            self.output.clone().or(file.get("output").map(PathBuf::from));
        Ok(Resolved { params, seed, config, out, output })
    }
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| e.to_string())
        }
    }
}

fn run_trajectory(r: &Resolved) -> Result<Trajectory, String> {
    let traj = match r.seed {
        Some((rho0, drho0)) => {
            let seed = full_line_seed(&r.params, rho0, drho0).map_err(|e| e.to_string())?;
            integrate_full_line(&r.params, &seed.state, &r.config)
        }
        None => integrate_pole_start(&r.params, &r.config),
    };
    match traj {
        Ok(t) => Ok(t),
        // A stiff stop is still a classifiable outcome.
        Err(e @ IntegrateError::StepUnderflow { .. }) => Ok(e.into_trajectory().unwrap()),
        Err(e) => Err(e.to_string()),
    }
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("r,rho,drho,ddrho,F,R,K,k_rad,k_fib,C_steady,residual\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in &traj.samples {
        let res = residual(&s.state, s.ddrho, &traj.params).unwrap_or(f64::NAN);
        let c = s.curvature;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            s.state.r,
            s.state.rho,
            s.state.drho,
            s.ddrho,
            s.state.f_pot,
            c.scalar_r,
            opt(c.k_gauss),
            opt(c.k_rad),
            opt(c.k_fib),
            opt(s.c_steady),
            res,
        ));
    }
    for e in &traj.events {
        out.push_str(&format!(
            "# event: {:?} at r = {} (rho = {}, drho = {})\n",
            e.kind, e.r, e.state.rho, e.state.drho
        ));
    }
    if traj.stiff_stop {
        out.push_str("# stiff stop: step size underflow\n");
    }
    out
}

fn cmd_integrate(args: &RunArgs) -> Result<i32, String> {
    let resolved = args.common.resolve()?;
    let traj = run_trajectory(&resolved)?;
    let text = match resolved.out {
        OutFormat::Csv => trajectory_csv(&traj),
        OutFormat::Json => {
            serde_json::to_string_pretty(&traj).map_err(|e| e.to_string())? + "\n"
        }
    };
    emit(&resolved.output, &text)?;
    Ok(if completeness(&traj) == Completeness::CompleteWithinHorizon {
        EXIT_OK
    } else {
        EXIT_BREAKDOWN
    })
}

fn cmd_classify(args: &RunArgs) -> Result<i32, String> {
    let resolved = args.common.resolve()?;
    let traj = run_trajectory(&resolved)?;
    let report = classify(&traj).map_err(|e| e.to_string())?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())? + "\n";
    emit(&resolved.output, &text)?;
    Ok(match report.theorem_match {
        TheoremMatch::Match | TheoremMatch::NotApplicable => EXIT_OK,
        TheoremMatch::Mismatch => EXIT_MISMATCH,
    })
}

/// Inclusive arithmetic grid "a:b:step".
fn parse_lambda_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, step] = parts[..] else {
        return Err(format!("lambda grid {spec:?}: expected a:b:step"));
    };
    let a: f64 = a.parse().map_err(|_| format!("bad grid start {a:?}"))?;
    let b: f64 = b.parse().map_err(|_| format!("bad grid end {b:?}"))?;
    let step: f64 = step.parse().map_err(|_| format!("bad grid step {step:?}"))?;
    if step <= 0.0 || b < a {
        return Err(format!("lambda grid {spec:?}: need a <= b and step > 0"));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| a + i as f64 * step).collect())
}

/// Seed grid "rho,..xdrho,..": the cross product of the two lists.
fn parse_seed_grid(spec: &str) -> Result<Vec<(f64, f64)>, String> {
    let (rhos, drhos) = spec
        .split_once('x')
        .ok_or(format!("seed grid {spec:?}: expected rholist x drholist"))?;
    let list = |s: &str| -> Result<Vec<f64>, String> {
        s.split(',')
            .map(|v| v.trim().parse().map_err(|_| format!("bad seed value {v:?}")))
            .collect()
    };
    let rhos = list(rhos)?;
    let drhos = list(drhos)?;
    Ok(rhos.iter().flat_map(|&r| drhos.iter().map(move |&d| (r, d))).collect())
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "lambda,rho0,drho0,scalar_sign,k_monotonicity,k_min,k_max,completeness,theorem_match,error\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        match &row.report {
            Some(rep) => out.push_str(&format!(
                "{},{},{},{:?},{:?},{},{},{:?},{:?},\n",
                row.lambda,
                opt(row.rho0),
                opt(row.drho0),
                rep.scalar_sign,
                rep.k_monotonicity,
                rep.k_range.0,
                rep.k_range.1,
                rep.completeness,
                rep.theorem_match,
            )),
            None => out.push_str(&format!(
                "{},{},{},,,,,,,{}\n",
                row.lambda,
                opt(row.rho0),
                opt(row.drho0),
                row.error.clone().unwrap_or_default().replace(',', ";"),
            )),
        }
    }
    out
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32, String> {
    let resolved = args.common.resolve_for_sweep()?;
    let lambda_grid = match &args.lambda_grid {
        Some(spec) => parse_lambda_grid(spec)?,
        None => vec![args
            .common
            .lambda
            .ok_or("sweep needs --lambda-grid or a single --lambda")?],
    };
    let seeds = match &args.seed_grid {
        Some(spec) => parse_seed_grid(spec)?,
        None => Vec::new(),
    };
    let rows = sweep(&resolved.params, &lambda_grid, &seeds, &resolved.config)
        .map_err(|e| e.to_string())?;
    let text = match resolved.out {
        OutFormat::Csv => sweep_csv(&rows),
        OutFormat::Json => {
            serde_json::to_string_pretty(&rows).map_err(|e| e.to_string())? + "\n"
        }
    };
    emit(&resolved.output, &text)?;
    Ok(EXIT_OK)
}

impl CommonArgs {
    /// Sweep templates supply lambda and seeds through the grids.
    fn resolve_for_sweep(&self) -> Result<Resolved, String> {
        let mut patched = CommonArgs {
            dim: self.dim,
            lambda: Some(self.lambda.unwrap_or(0.0)),
            rbar: self.rbar,
            fiber: self.fiber,
            case: self.case,
            branch: self.branch,
            rho0: Some(self.rho0.unwrap_or(1.0)),
            drho0: Some(self.drho0.unwrap_or(0.0)),
            r_max: self.r_max,
            r_min: self.r_min,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            pole_offset: self.pole_offset,
            out: self.out,
            output: self.output.clone(),
            config: self.config.clone(),
        };
        // The template's own lambda never runs; params validation of
        // grid points happens per row inside the sweep.
        if patched.case == Some(CaseArg::Pole) && patched.dim == Some(3) {
            patched.rbar = patched.rbar.or(Some(2.0));
        }
        patched.resolve()
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32, String> {
    if args.tol_scale <= 0.0 {
        return Err("tol-scale must be positive".into());
    }
    let outcomes = run_suite(args.tol_scale, args.only.as_deref());
    if outcomes.is_empty() {
        return Err(format!("no criterion named {:?}", args.only.as_deref().unwrap_or("")));
    }
    let mut all_ok = true;
    for o in &outcomes {
        println!("{:2}  {:22} {}  {}", o.id, o.name, if o.passed { "PASS" } else { "FAIL" }, o.details);
        all_ok &= o.passed;
    }
    Ok(if all_ok { EXIT_OK } else { EXIT_MISMATCH })
}
