//! Command-line front end. [`run`] is the whole program; `main` only wires
//! it to the process.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use combwalk::coupling::sample_coupled_path;
use combwalk::densities::{
    cdf_table, eta_absw_density, joint_density_uz, local_time_laplace, write_cdf_csv, DensityModel,
    ModelId,
};
use combwalk::experiments::{ExperimentId, ExperimentPlan, HistogramCell, TestReport};
use combwalk::format::fmt_f64;
use combwalk::limitset::{d2_contains, trace_boundary, DomainSpec};
use combwalk::localtime::LocalTimeTable;
use combwalk::quadrature::QuadratureSpec;
use combwalk::walk::{sample_comb_path, sample_simple_walk};
use combwalk::{Error, RngStream};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GATE: i32 = 3;

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "COMBWALK_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "combwalk",
    version,
    about = "Random walks on the 2D comb lattice"
)]
struct Cli {
    /// Root seed; COMBWALK_SEED takes precedence when set.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write 0 for duration_ms so reports are byte-comparable.
    #[arg(long, global = true)]
    no_timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a path and dump it.
    Simulate(SimulateArgs),
    /// Tabulate a limiting density or the local-time Laplace transform.
    Density(DensityArgs),
    /// Trace the limit domain or test membership.
    Domain(DomainArgs),
    /// Run a Monte Carlo check or diagnostic.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    /// Use the two-walk coupling instead of the direct sampler.
    #[arg(long, conflicts_with = "simple")]
    coupled: bool,
    /// Sample a one-dimensional simple walk and its local times.
    #[arg(long)]
    simple: bool,
}

#[derive(Args, Debug)]
struct DensityArgs {
    /// dobrushin, joint-uz, eta-abs-w or laplace.
    #[arg(long)]
    model: String,
    /// Grid as start:stop:step.
    #[arg(long, default_value = "-10:10:0.01", allow_hyphen_values = true)]
    grid: String,
    /// First-coordinate CDF table for the two-dimensional models.
    #[arg(long)]
    marginal: bool,
    /// Comma-separated theta values for the Laplace transform.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    theta: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
}

#[derive(Args, Debug)]
struct DomainArgs {
    /// Write the boundary polyline (default when no query is given).
    #[arg(long)]
    trace: bool,
    #[arg(long, default_value_t = 256)]
    points: usize,
    /// Membership query for the point (U, V).
    #[arg(long, num_args = 2, value_names = ["U", "V"], allow_negative_numbers = true)]
    query: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    id: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "R")]
    replicas: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    /// Number of seeds for the pilot.
    #[arg(long)]
    seeds: Option<usize>,
}

/// Outcome of a command before it becomes an exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
    Gate,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::UniformOutOfRange(_)
            | Error::HorizonOutOfRange { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

struct Ctx {
    seed: u64,
    out: PathBuf,
    format: Format,
    no_timing: bool,
    stdout: Vec<u8>,
}

impl Ctx {
    fn create(&self, name: &str) -> io::Result<(PathBuf, BufWriter<File>)> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        let f = File::create(&path)?;
        Ok((path, BufWriter::new(f)))
    }

    fn ext(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Runs the program on `args` (including the program name) and returns the
/// exit code. `env_seed` is the value of [`SEED_ENV`], if set.
pub fn run<I, T>(
    args: I,
    env_seed: Option<String>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let seed = match env_seed {
        Some(s) => match s.trim().parse::<u64>() {
            Ok(v) => v,
            Err(_) => {
                let _ = writeln!(stderr, "error: {SEED_ENV}={s:?} is not a u64");
                return EXIT_USAGE;
            }
        },
        None => cli.seed,
    };
    let threads = match cli.threads {
        Some(0) => {
            let _ = writeln!(stderr, "error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let mut ctx = Ctx {
        seed,
        out: cli.out,
        format: cli.format,
        no_timing: cli.no_timing,
        stdout: Vec::new(),
    };
    let result = pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate(&mut ctx, a),
        Command::Density(a) => density(&mut ctx, a),
        Command::Domain(a) => domain(&mut ctx, a),
        Command::Experiment(a) => experiment(&mut ctx, a),
    });
    let _ = stdout.write_all(&ctx.stdout);
    let _ = stdout.flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Gate) => EXIT_GATE,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_RUNTIME
        }
    }
}

fn simulate(ctx: &mut Ctx, a: &SimulateArgs) -> CmdResult {
    let rng = RngStream::new(ctx.seed, 0);
    let json = ctx.format == Format::Json;
    let (path, summary) = if a.simple {
        let walk = sample_simple_walk(a.n, rng);
        let table = LocalTimeTable::from_path(&walk, a.n)?;
        let (p, mut w) = ctx.create(&format!("simple_path.{}", ctx.ext()))?;
        if json {
            serde_json::to_writer(&mut w, &json!({ "n": a.n, "values": walk.values() }))
                .map_err(io::Error::from)?;
            writeln!(w)?;
        } else {
            writeln!(w, "step,value")?;
            for (i, v) in walk.values().iter().enumerate() {
                writeln!(w, "{i},{v}")?;
            }
        }
        w.flush()?;
        let (_, mut lt) = ctx.create(&format!("local_time.{}", ctx.ext()))?;
        if json {
            let rows: Vec<Value> = table
                .iter()
                .map(|(k, c)| json!({ "level": k, "count": c }))
                .collect();
            serde_json::to_writer(&mut lt, &rows).map_err(io::Error::from)?;
            writeln!(lt)?;
        } else {
            table.write_csv(&mut lt)?;
        }
        lt.flush()?;
        (p, format!("n={} endpoint={}", a.n, walk.endpoint()))
    } else if a.coupled {
        let cp = sample_coupled_path(a.n, &rng);
        cp.path.validate()?;
        cp.check_phase_structure()?;
        let (p, mut w) = ctx.create(&format!("coupled_path.{}", ctx.ext()))?;
        if json {
            let rows: Vec<Value> = cp
                .path
                .sites()
                .iter()
                .zip(&cp.phases)
                .enumerate()
                .map(|(i, (s, ph))| {
                    json!({
                        "step": i, "x": s.x, "y": s.y,
                        "phase": if ph.is_axis() { "axis" } else { "tooth" },
                        "N": ph.index()
                    })
                })
                .collect();
            serde_json::to_writer(&mut w, &rows).map_err(io::Error::from)?;
            writeln!(w)?;
        } else {
            cp.write_csv(&mut w)?;
        }
        w.flush()?;
        let e = cp.path.endpoint();
        (
            p,
            format!(
                "n={} endpoint=({},{}) phases={}",
                a.n,
                e.x,
                e.y,
                cp.phases[a.n].index() + 1
            ),
        )
    } else {
        let path = sample_comb_path(a.n, rng);
        let (p, mut w) = ctx.create(&format!("path.{}", ctx.ext()))?;
        if json {
            let rows: Vec<Value> = path
                .sites()
                .iter()
                .enumerate()
                .map(|(i, s)| json!({ "step": i, "x": s.x, "y": s.y }))
                .collect();
            serde_json::to_writer(&mut w, &rows).map_err(io::Error::from)?;
            writeln!(w)?;
        } else {
            path.write_csv(&mut w)?;
        }
        w.flush()?;
        let e = path.endpoint();
        (p, format!("n={} endpoint=({},{})", a.n, e.x, e.y))
    };
    writeln!(ctx.stdout, "{summary} file={}", path.display())?;
    Ok(())
}

fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("grid {s:?} is not start:stop:step"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let [a, b, h] = parts[..] else {
        return Err(bad());
    };
    if !(a.is_finite() && b.is_finite() && h > 0.0 && b >= a) {
        return Err(bad());
    }
    let count = ((b - a) / h + 1e-9).floor() as usize;
    if count > 10_000_000 {
        return Err(Failure::Usage("grid has too many points".into()));
    }
    // index-based so the points do not drift
    Ok((0..=count).map(|i| a + i as f64 * h).collect())
}

fn density(ctx: &mut Ctx, a: &DensityArgs) -> CmdResult {
    let json = ctx.format == Format::Json;
    if a.model == "laplace" {
        let mut rows = Vec::new();
        for &theta in &a.theta {
            rows.push((theta, local_time_laplace(theta, a.t)?));
        }
        let (p, mut w) = ctx.create(&format!("laplace.{}", ctx.ext()))?;
        if json {
            let v: Vec<Value> = rows
                .iter()
                .map(|(th, v)| json!({ "theta": th, "t": a.t, "value": v }))
                .collect();
            serde_json::to_writer(&mut w, &v).map_err(io::Error::from)?;
            writeln!(w)?;
        } else {
            writeln!(w, "theta,t,value")?;
            for (th, v) in &rows {
                writeln!(w, "{},{},{}", fmt_f64(*th), fmt_f64(a.t), fmt_f64(*v))?;
            }
        }
        w.flush()?;
        for (th, v) in &rows {
            writeln!(ctx.stdout, "theta={th} t={} value={v}", a.t)?;
        }
        writeln!(ctx.stdout, "file={}", p.display())?;
        return Ok(());
    }
    let id = ModelId::parse(&a.model).ok_or_else(|| {
        Failure::Usage(format!(
            "unknown model {:?}; expected dobrushin, joint-uz, eta-abs-w or laplace",
            a.model
        ))
    })?;
    let grid = parse_grid(&a.grid)?;
    let spec = QuadratureSpec::default();
    let name = format!("density_{}.{}", id.name(), ctx.ext());
    let (p, mut w) = ctx.create(&name)?;
    if id == ModelId::Dobrushin || a.marginal {
        let model = DensityModel::build(id, spec)?;
        let rows = cdf_table(&model, &grid)?;
        if json {
            serde_json::to_writer(&mut w, &rows).map_err(io::Error::from)?;
            writeln!(w)?;
        } else {
            write_cdf_csv(&rows, &mut w)?;
        }
        let last = rows.last().expect("grid is non-empty");
        writeln!(
            ctx.stdout,
            "model={} points={} final_cdf={}",
            id.name(),
            rows.len(),
            last.cdf
        )?;
    } else {
        let (c0, c1) = if id == ModelId::JointUz {
            ("u", "z")
        } else {
            ("y", "z")
        };
        let firsts: Vec<f64> = if id == ModelId::EtaAbsW {
            grid.iter().copied().filter(|&y| y >= 0.0).collect()
        } else {
            grid.clone()
        };
        let mut rows = Vec::with_capacity(firsts.len() * grid.len());
        for &x in &firsts {
            for &z in &grid {
                let d = match id {
                    ModelId::JointUz => joint_density_uz(x, z, &spec)?,
                    _ => eta_absw_density(x, z)?,
                };
                rows.push((x, z, d));
            }
        }
        if json {
            let v: Vec<Value> = rows
                .iter()
                .map(|(x, z, d)| json!({ c0: x, c1: z, "density": d }))
                .collect();
            serde_json::to_writer(&mut w, &v).map_err(io::Error::from)?;
            writeln!(w)?;
        } else {
            writeln!(w, "{c0},{c1},density")?;
            for (x, z, d) in &rows {
                writeln!(w, "{},{},{}", fmt_f64(*x), fmt_f64(*z), fmt_f64(*d))?;
            }
        }
        writeln!(ctx.stdout, "model={} points={}", id.name(), rows.len())?;
    }
    w.flush()?;
    writeln!(ctx.stdout, "file={}", p.display())?;
    Ok(())
}

fn domain(ctx: &mut Ctx, a: &DomainArgs) -> CmdResult {
    let spec = DomainSpec::default();
    if let Some(q) = &a.query {
        let (u, v) = (q[0], q[1]);
        if !(u.is_finite() && v.is_finite()) {
            return Err(Failure::Usage("query coordinates must be finite".into()));
        }
        writeln!(ctx.stdout, "{}", d2_contains(u, v, &spec)?)?;
        if !a.trace {
            return Ok(());
        }
    }
    let b = trace_boundary(&spec, a.points)?;
    let (p, mut w) = ctx.create(&format!("domain_boundary.{}", ctx.ext()))?;
    if ctx.format == Format::Json {
        let pts: Vec<Value> = b
            .four_quadrants()
            .iter()
            .map(|(u, v)| json!({ "u": u, "v": v }))
            .collect();
        serde_json::to_writer(&mut w, &pts).map_err(io::Error::from)?;
        writeln!(w)?;
    } else {
        b.write_csv(&mut w)?;
    }
    w.flush()?;
    let first = b.points[0];
    let last = b.points[b.points.len() - 1];
    writeln!(
        ctx.stdout,
        "boundary from ({},{}) to ({},{}) file={}",
        first.u,
        first.v,
        last.u,
        last.v,
        p.display()
    )?;
    Ok(())
}

fn write_report_files(ctx: &Ctx, report: &TestReport) -> io::Result<PathBuf> {
    let (p, mut w) = ctx.create(&format!("{}.json", report.experiment))?;
    w.write_all(report.to_json().as_bytes())?;
    writeln!(w)?;
    w.flush()?;
    if let Some(series) = &report.series {
        let (_, mut w) = ctx.create(&format!("{}_series.{}", report.experiment, ctx.ext()))?;
        match ctx.format {
            Format::Csv => series.write_csv(&mut w)?,
            Format::Json => {
                serde_json::to_writer(&mut w, series)?;
                writeln!(w)?;
            }
        }
        w.flush()?;
    }
    if !report.histogram.is_empty() {
        let (_, mut w) = ctx.create(&format!("{}_histogram.{}", report.experiment, ctx.ext()))?;
        match ctx.format {
            Format::Csv => HistogramCell::write_csv(&report.histogram, &mut w)?,
            Format::Json => {
                serde_json::to_writer(&mut w, &report.histogram)?;
                writeln!(w)?;
            }
        }
        w.flush()?;
    }
    Ok(p)
}

fn experiment(ctx: &mut Ctx, a: &ExperimentArgs) -> CmdResult {
    let id = ExperimentId::parse(&a.id).ok_or_else(|| {
        let names: Vec<&str> = ExperimentId::ALL.iter().map(|i| i.name()).collect();
        Failure::Usage(format!(
            "unknown experiment {:?}; expected one of {}",
            a.id,
            names.join(", ")
        ))
    })?;
    let mut plan = ExperimentPlan::defaults(id, ctx.seed);
    if let Some(n) = a.n {
        plan.n = n;
    }
    if let Some(r) = a.replicas {
        plan.replicas = r;
    }
    if let Some(m) = a.n_max {
        plan.n_max = m;
    }
    if let Some(t) = &a.theta {
        plan.thetas = t.clone();
    }
    if let Some(s) = a.seeds {
        plan.seeds = s;
    }
    let mut report = plan.run()?;
    if ctx.no_timing {
        report.duration_ms = 0;
    }
    let path = write_report_files(ctx, &report)?;
    for s in &report.statistics {
        let verdict = match s.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "info",
        };
        let tol = s.tolerance.map_or(String::new(), |t| format!(" tol={t}"));
        writeln!(ctx.stdout, "{verdict} {} = {}{tol}", s.name, s.value)?;
    }
    writeln!(ctx.stdout, "report={}", path.display())?;
    if !id.report_only() && !report.gated_pass() {
        return Err(Failure::Gate);
    }
    Ok(())
}

/// Convenience for tests: run with a directory and capture stdout.
pub fn run_captured(args: &[&str], env_seed: Option<&str>) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["combwalk"];
    full.extend_from_slice(args);
    let code = run(full, env_seed.map(String::from), &mut out, &mut err);
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}
