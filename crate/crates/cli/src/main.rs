//! `cbo`: command-line access to rendering, membership, rays and solvers.
//!
//! Exit codes: 0 success or Accept, 1 Reject or a failed computation,
//! 2 usage error, 3 IO error, 4 Indeterminate.

mod config;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use cbo_core::family::{MonicOdd, Unicritical};
use cbo_core::loci::{membership_pm, select_branch, Outcome, PmParams};
use cbo_core::pcf::{
    solve_center_bicritical, solve_center_unicritical, solve_cut_point, solve_misiurewicz_unicritical,
};
use cbo_core::rays::{trace_ray, Angle, RayParams};
use cbo_core::render::{self, Coloring, Plane, RenderJob, Viewport};
use cbo_core::verify::run_invariants;
use cbo_core::C64;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_INDETERMINATE: u8 = 4;

/// A complex number written `RE,IM`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ComplexArg(C64);

impl FromStr for ComplexArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (re, im) = s.split_once(',').ok_or_else(|| format!("expected RE,IM, got {s:?}"))?;
        let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let z = C64::new(parse(re)?, parse(im)?);
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(format!("{s:?} is not finite"));
        }
        Ok(ComplexArg(z))
    }
}

impl fmt::Display for ComplexArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0.re, self.0.im)
    }
}

impl Serialize for ComplexArg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Image size written `WxH`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PixelSize(u32, u32);

impl FromStr for PixelSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s.split_once('x').ok_or_else(|| format!("expected WxH, got {s:?}"))?;
        let parse = |t: &str| match t.parse::<u32>() {
            Ok(0) | Err(_) => Err(format!("bad dimension {t:?}")),
            Ok(n) => Ok(n),
        };
        Ok(PixelSize(parse(w)?, parse(h)?))
    }
}

impl Serialize for PixelSize {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&format_args!("{}x{}", self.0, self.1))
    }
}

fn parse_supersample(s: &str) -> Result<u32, String> {
    match s {
        "1" | "2" | "4" => Ok(s.parse().unwrap()),
        _ => Err(format!("supersample must be 1, 2 or 4, got {s:?}")),
    }
}

fn serialize_display<T: fmt::Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LocusFamily {
    /// `z^(d+1) + c`.
    Multibrot,
    /// `p_{a,d}` in the `a`-plane.
    Cbo,
    /// Monic representatives in the `s`-plane.
    Mbo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ColoringArg {
    Binary,
    Smooth,
    Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum CenterFamily {
    Multibrot,
    Cbo,
}

#[derive(Parser, Debug)]
#[command(name = "cbo", version, about = "Bicritical odd and unicritical polynomial explorer")]
struct Cli {
    /// Read defaults from a flat `key = value` file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a parameter-plane locus (or any JSON render job) to PPM.
    RenderLocus(RenderArgs),
    /// Decide membership in the separated locus; prints a verdict.
    Membership(MembershipArgs),
    /// Trace a dynamical external ray.
    TraceRay(RayArgs),
    /// Solve for a center or Misiurewicz parameter by Newton.
    FindCenter(CenterArgs),
    /// Solve for a parameter whose right critical orbit reaches 0.
    CutPoint(CutPointArgs),
    /// Run the invariant suite.
    Verify(VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::RenderLocus(_) => "render-locus",
            Command::Membership(_) => "membership",
            Command::TraceRay(_) => "trace-ray",
            Command::FindCenter(_) => "find-center",
            Command::CutPoint(_) => "cut-point",
            Command::Verify(_) => "verify",
        }
    }

    fn resolved(&self) -> serde_json::Value {
        let v = match self {
            Command::RenderLocus(a) => serde_json::to_value(a),
            Command::Membership(a) => serde_json::to_value(a),
            Command::TraceRay(a) => serde_json::to_value(a),
            Command::FindCenter(a) => serde_json::to_value(a),
            Command::CutPoint(a) => serde_json::to_value(a),
            Command::Verify(a) => serde_json::to_value(a),
        };
        v.expect("arguments serialize")
    }
}

#[derive(clap::Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct RenderArgs {
    #[arg(long, value_enum, required_unless_present = "job")]
    family: Option<LocusFamily>,
    /// `d`; the multibrot family has degree `d + 1`.
    #[arg(long, required_unless_present = "job", value_parser = clap::value_parser!(u32).range(1..))]
    d: Option<u32>,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    center: ComplexArg,
    #[arg(long, default_value_t = 6.0)]
    width: f64,
    #[arg(long, default_value = "1024x1024")]
    px: PixelSize,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long)]
    escape_radius: Option<f64>,
    #[arg(long, value_enum, default_value = "binary")]
    coloring: ColoringArg,
    #[arg(long, default_value_t = 1, value_parser = parse_supersample)]
    supersample: u32,
    /// A JSON render job; replaces the geometry flags.
    #[arg(long, value_name = "FILE")]
    job: Option<PathBuf>,
    #[arg(long, value_name = "FILE.ppm")]
    out: PathBuf,
}

#[derive(clap::Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct MembershipArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    d: u32,
    #[arg(long, allow_hyphen_values = true)]
    a: ComplexArg,
    #[arg(long, default_value_t = 200)]
    orbit_len: usize,
    #[arg(long, default_value_t = 1e-8)]
    eps0: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Separatrix resolution band; derived from the traced rays when unset.
    #[arg(long)]
    eps_sep: Option<f64>,
    #[arg(long, default_value_t = 8.0)]
    eta: f64,
}

#[derive(clap::Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct RayArgs {
    #[arg(long, value_enum, default_value = "cbo")]
    family: LocusFamily,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    d: u32,
    /// Parameter of `p_{a,d}`; the landing branch is used when one exists.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<ComplexArg>,
    /// Monic parameter `s`; overrides the branch choice.
    #[arg(long, allow_hyphen_values = true)]
    s: Option<ComplexArg>,
    /// Parameter of `z^(d+1) + c`.
    #[arg(long, allow_hyphen_values = true)]
    c: Option<ComplexArg>,
    #[arg(long)]
    #[serde(serialize_with = "serialize_display")]
    angle: Angle,
    #[arg(long, default_value_t = 8.0)]
    eta: f64,
    #[arg(long, default_value_t = 0.5)]
    step_ratio: f64,
    #[arg(long, default_value_t = 200)]
    max_levels: usize,
    #[arg(long, default_value_t = 1e-9)]
    newton_tol: f64,
}

#[derive(clap::Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct CenterArgs {
    #[arg(long, value_enum)]
    family: CenterFamily,
    /// `d`; the multibrot family has degree `d + 1`.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    d: u32,
    #[arg(long)]
    period: u32,
    /// Solve for a Misiurewicz parameter with this preperiod (multibrot only).
    #[arg(long)]
    preperiod: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    seed: ComplexArg,
}

#[derive(clap::Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct CutPointArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    d: u32,
    #[arg(long)]
    k: u32,
    #[arg(long, allow_hyphen_values = true)]
    seed: ComplexArg,
}

#[derive(clap::Args, Debug, Serialize)]
struct VerifyArgs {}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Failed(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

fn failed(e: impl fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out).map_err(|e| CliError::Io(e.to_string()))
}

fn render_job(args: &RenderArgs) -> Result<RenderJob, CliError> {
    if let Some(path) = &args.job {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        return serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())));
    }
    let (family, d) = (args.family.expect("required by clap"), args.d.expect("required by clap"));
    let plane = match family {
        LocusFamily::Multibrot => Plane::ParameterMultibrot { degree: d + 1 },
        LocusFamily::Cbo => Plane::ParameterCbo { d },
        LocusFamily::Mbo => Plane::ParameterMbo { d },
    };
    let viewport = Viewport::new(args.center.0, args.width, args.px.0, args.px.1)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let coloring = match args.coloring {
        ColoringArg::Binary => Coloring::Binary,
        ColoringArg::Smooth => Coloring::SmoothPotential,
        ColoringArg::Verdict => Coloring::PmVerdictOverlay,
    };
    Ok(RenderJob {
        plane,
        viewport,
        max_iter: args.max_iter,
        escape_radius: args.escape_radius,
        coloring,
        supersample: args.supersample,
    })
}

fn cmd_render(args: &RenderArgs, threads: Option<usize>) -> Result<u8, CliError> {
    let job = render_job(args)?;
    job.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let output = match threads {
        Some(n) => render::render_with_threads(&job, n),
        None => render::render(&job),
    }
    .map_err(failed)?;
    for w in &output.warnings {
        eprintln!("warning: {}", serde_json::to_string(w).unwrap());
    }
    render::write_ppm(&output.image, &args.out).map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    log::info!("wrote {}", args.out.display());
    Ok(0)
}

fn cmd_membership(args: &MembershipArgs) -> Result<u8, CliError> {
    let params = PmParams {
        rays: RayParams { eta: args.eta, ..RayParams::default() },
        eps0: args.eps0,
        orbit_len: args.orbit_len,
        max_iter: args.max_iter,
        eps_sep: args.eps_sep,
    };
    let verdict = membership_pm(args.a.0, args.d, &params).map_err(|e| CliError::Usage(e.to_string()))?;
    eprintln!("orbit budget: {} points, {} escape iterations", args.orbit_len, args.max_iter);
    print_json(&verdict)?;
    Ok(match verdict.outcome {
        Outcome::Accept => 0,
        Outcome::Reject => EXIT_FAILURE,
        Outcome::Indeterminate => EXIT_INDETERMINATE,
    })
}

fn cmd_ray(args: &RayArgs) -> Result<u8, CliError> {
    let params = RayParams {
        eta: args.eta,
        step_ratio: args.step_ratio,
        max_levels: args.max_levels,
        newton_tol: args.newton_tol,
        ..RayParams::default()
    };
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let trace = match args.family {
        LocusFamily::Multibrot => {
            let c = args.c.ok_or_else(|| CliError::Usage("--c is required for multibrot".into()))?;
            let map = Unicritical::new(args.d, c.0).map_err(|e| CliError::Usage(e.to_string()))?;
            trace_ray(&map, &args.angle, &params)
        }
        LocusFamily::Cbo | LocusFamily::Mbo => {
            let map = match (args.s, args.a) {
                (Some(s), _) => MonicOdd::from_s(args.d, s.0),
                (None, Some(a)) => {
                    let s = select_branch(a.0, args.d, &params).map_err(failed)?;
                    match s {
                        Some(s) => MonicOdd::from_root(args.d, a.0, s),
                        None => {
                            log::warn!("no branch lands at 0; using the first monic root");
                            let roots = cbo_core::family::monic_roots(args.d, a.0).map_err(failed)?;
                            MonicOdd::from_root(args.d, a.0, roots[0])
                        }
                    }
                }
                (None, None) => return Err(CliError::Usage("--a or --s is required".into())),
            }
            .map_err(|e| CliError::Usage(e.to_string()))?;
            eprintln!("s = {}", ComplexArg(map.s()));
            trace_ray(&map, &args.angle, &params)
        }
    }
    .map_err(failed)?;
    print_json(&trace)?;
    Ok(0)
}

fn cmd_center(args: &CenterArgs) -> Result<u8, CliError> {
    let spec = match (args.family, args.preperiod) {
        (CenterFamily::Multibrot, None) => solve_center_unicritical(args.d + 1, args.period, args.seed.0),
        (CenterFamily::Multibrot, Some(l)) => solve_misiurewicz_unicritical(args.d + 1, l, args.period, args.seed.0),
        (CenterFamily::Cbo, None) => solve_center_bicritical(args.d, args.period, args.seed.0),
        (CenterFamily::Cbo, Some(_)) => {
            return Err(CliError::Usage("--preperiod applies to the multibrot family".into()))
        }
    }
    .map_err(failed)?;
    print_json(&spec)?;
    Ok(0)
}

fn cmd_cut_point(args: &CutPointArgs) -> Result<u8, CliError> {
    let spec = solve_cut_point(args.d, args.k, args.seed.0).map_err(failed)?;
    print_json(&spec)?;
    Ok(0)
}

fn cmd_verify() -> Result<u8, CliError> {
    let reports = run_invariants();
    let mut ok = true;
    for r in &reports {
        eprintln!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        ok &= r.passed;
    }
    print_json(&reports)?;
    Ok(if ok { 0 } else { EXIT_FAILURE })
}

/// Arguments with the config file's entries spliced in before the user's
/// own flags.
fn merged_args() -> Result<Vec<String>, CliError> {
    let mut args: Vec<String> = std::env::args().collect();
    let Some(path) = config::take_config_flag(&mut args) else {
        return Ok(args);
    };
    if path.is_empty() {
        return Err(CliError::Usage("--config needs a file".into()));
    }
    let text = config::read(path.as_ref()).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    let entries = config::parse(&text).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
    // The subcommand is the first argument that is not a global flag.
    let mut k = 1;
    while k < args.len() && args[k].starts_with("--") {
        k += if args[k] == "--threads" { 2 } else { 1 };
    }
    if k >= args.len() {
        return Ok(args);
    }
    let (mut global, mut local) = (Vec::new(), Vec::new());
    for (key, value) in entries {
        if key == "threads" {
            global.push((key, value));
        } else {
            local.push((key, value));
        }
    }
    let mut merged = args[..=k].to_vec();
    merged.extend(config::to_args(&local));
    merged.extend(config::to_args(&global));
    merged.extend_from_slice(&args[k + 1..]);
    Ok(merged)
}

fn run() -> Result<u8, CliError> {
    let args = merged_args()?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return Ok(code);
        }
    };
    let mut header = config::render(cli.command.name(), &cli.command.resolved());
    if let Some(n) = cli.threads {
        header.push_str(&format!("threads = {n}\n"));
    }
    eprint!("{header}");
    match &cli.command {
        Command::RenderLocus(a) => cmd_render(a, cli.threads),
        Command::Membership(a) => cmd_membership(a),
        Command::TraceRay(a) => cmd_ray(a),
        Command::FindCenter(a) => cmd_center(a),
        Command::CutPoint(a) => cmd_cut_point(a),
        Command::Verify(_) => cmd_verify(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
