//! Command-line front end: `run`, `gh`, `flow` and `verify`.
//!
//! Every invocation ends in an [`InvocationResult`] whose exit code is one of
//! [`EXIT_PASS`], [`EXIT_ASSERTION`], [`EXIT_CONFIG`] or [`EXIT_INTERNAL`].

pub mod config;
pub mod verify;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use rfcollapse::flow::{
    gauss_curvature, integrate_nil, integrate_warped_surface, nil_similarity_solution, stable_dt, NilMetric,
    WarpedSurfaceMetric,
};
use rfcollapse::gh::{gh_brute_force, gh_upper_bound_with, EpsGrid, GhError, SearchOptions};
use rfcollapse::metric::{read_matrix_file, MetricError};
use rfcollapse::scenarios::{self, ConfigError, ScenarioError, WarpSpec};
use rfcollapse::{Assertion, Report};

pub use config::{config_to_toml, parse_config, parse_config_str};
pub use verify::Suite;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

pub const REPORT_FILE: &str = "report.json";
pub const SERIES_FILE: &str = "series.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error in `{}`: {}", .0.field, .0.message)]
    Config(#[from] ConfigError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Config(c) => CliError::Config(c),
            other => CliError::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rfcollapse",
    version,
    about = "Collapse experiments for Ricci flow at finite scale"
)]
pub struct Cli {
    /// Root seed; overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for report.json and series.csv.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario described by a TOML config.
    Run { config: PathBuf },
    /// Pointed GH estimate between two distance-matrix files.
    Gh(GhArgs),
    /// Integrate one flow and summarize it.
    #[command(subcommand)]
    Flow(FlowCommand),
    /// Run a fixed verification suite.
    Verify {
        #[arg(value_parser = clap::builder::ValueParser::new(|s: &str| s.parse::<Suite>()))]
        suite: Suite,
    },
}

#[derive(Debug, Args)]
pub struct GhArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Exhaustive oracle (at most six points per space).
    #[arg(long, conflicts_with = "search")]
    pub brute: bool,
    /// Search-based upper bound (the default).
    #[arg(long)]
    pub search: bool,
    #[arg(long, default_value_t = 2000)]
    pub budget: u64,
}

#[derive(Debug, Subcommand)]
pub enum FlowCommand {
    /// Left-invariant Nil metric `A, B, C`.
    Nil {
        #[arg(long, allow_hyphen_values = true)]
        a0: f64,
        #[arg(long, allow_hyphen_values = true)]
        b0: f64,
        #[arg(long, allow_hyphen_values = true)]
        c0: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Warped torus `dr² + (f(r)/√i)² ds²`.
    Torus {
        #[arg(long, default_value = "2+cos")]
        f: String,
        #[arg(long, default_value_t = 1)]
        i: u64,
        #[arg(long, default_value_t = 256)]
        nr: usize,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        dt: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvocationResult {
    pub exit_code: i32,
    pub report_path: Option<PathBuf>,
    pub summary: Vec<String>,
}

impl InvocationResult {
    fn failed(e: CliError) -> Self {
        Self {
            exit_code: e.exit_code(),
            report_path: None,
            summary: vec![e.to_string()],
        }
    }
}

/// Parse arguments and execute. Argument errors map to [`EXIT_CONFIG`]
/// (help and version requests to [`EXIT_PASS`]) with clap's message as the
/// summary.
pub fn invoke_args<I, T>(args: I) -> InvocationResult
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => invoke(&cli),
        Err(e) => InvocationResult {
            exit_code: if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS },
            report_path: None,
            summary: vec![e.render().to_string()],
        },
    }
}

pub fn invoke(cli: &Cli) -> InvocationResult {
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => return InvocationResult::failed(CliError::Internal(e.to_string())),
    };
    pool.install(|| dispatch(cli)).unwrap_or_else(InvocationResult::failed)
}

fn dispatch(cli: &Cli) -> Result<InvocationResult, CliError> {
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = parse_config(config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let report = scenarios::run(&cfg)?;
            finish(report, &cli.out_dir)
        }
        Command::Verify { suite } => finish(suite.run(cli.seed.unwrap_or(0))?, &cli.out_dir),
        Command::Gh(args) => gh(args, cli.seed.unwrap_or(0), &cli.out_dir),
        Command::Flow(FlowCommand::Nil { a0, b0, c0, t, dt }) => flow_nil([*a0, *b0, *c0], *t, *dt, &cli.out_dir),
        Command::Flow(FlowCommand::Torus { f, i, nr, t, dt }) => flow_torus(f, *i, *nr, *t, *dt, &cli.out_dir),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("cannot write {}: {e}", path.display()))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

fn timestamp() -> String {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    format!("{}.{:09}", now.as_secs(), now.subsec_nanos())
}

/// One line per assertion: status, name, both sides and the margin.
pub fn summary_lines(report: &Report) -> Vec<String> {
    let mut lines = vec![format!(
        "{} {} ({} assertions, grid_slack {:.3e})",
        if report.pass { "PASS" } else { "FAIL" },
        report.scenario,
        report.assertions.len(),
        report.grid_slack
    )];
    lines.extend(report.assertions.iter().map(assertion_line));
    lines
}

fn assertion_line(a: &Assertion) -> String {
    let mut line = format!(
        "  {} {} lhs={:.6e} rhs={:.6e} margin={:.3e}",
        if a.pass { "ok  " } else { "FAIL" },
        a.name,
        a.lhs,
        a.rhs,
        a.margin
    );
    if !a.context.is_empty() {
        line.push_str(&format!(" [{}]", a.context));
    }
    line
}

/// Stamp, write `report.json` and `series.csv`, and summarize.
fn finish(mut report: Report, out_dir: &Path) -> Result<InvocationResult, CliError> {
    report.timestamp = timestamp();
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    let path = write_file(out_dir, REPORT_FILE, &(json + "\n"))?;
    write_file(out_dir, SERIES_FILE, &report.series_csv())?;
    let mut summary = summary_lines(&report);
    summary.push(format!("report written to {}", path.display()));
    Ok(InvocationResult {
        exit_code: if report.pass { EXIT_PASS } else { EXIT_ASSERTION },
        report_path: Some(path),
        summary,
    })
}

fn gh(args: &GhArgs, seed: u64, out_dir: &Path) -> Result<InvocationResult, CliError> {
    let read = |p: &Path| {
        read_matrix_file(p).map_err(|e| {
            let message = e.to_string();
            match e {
                MetricError::Io(_)
                | MetricError::Parse(_)
                | MetricError::InvalidMatrix(_)
                | MetricError::TooLarge { .. } => CliError::Config(ConfigError::new(p.display().to_string(), message)),
                _ => CliError::Internal(message),
            }
        })
    };
    let x = read(&args.a)?;
    let y = read(&args.b)?;
    let grid = EpsGrid::default();
    let est = if args.brute {
        gh_brute_force(&x, &y, &grid)
    } else {
        gh_upper_bound_with(&x, &y, &SearchOptions::new(args.budget, seed).with_grid(grid.clone()))
    }
    .map_err(|e| match e {
        GhError::Usage(m) => CliError::Config(ConfigError::new(if args.brute { "brute" } else { "budget" }, m)),
        other => CliError::Internal(other.to_string()),
    })?;
    let mut report = Report::new(
        "gh",
        serde_json::json!({
            "a": args.a, "b": args.b, "method": if args.brute { "brute" } else { "search" },
            "budget": args.budget, "seed": seed,
        }),
        grid.step_at(est.upper),
    );
    report.assert(Assertion::le("lower_le_upper", est.lower, est.upper));
    report.note("estimate", &est);
    let mut result = finish(report, out_dir)?;
    result
        .summary
        .insert(1, format!("  gh_lower={:.6e} gh_upper={:.6e}", est.lower, est.upper));
    Ok(result)
}

fn flow_nil(abc: [f64; 3], t: f64, dt: f64, out_dir: &Path) -> Result<InvocationResult, CliError> {
    let bad = |field: &'static str| {
        move |e: rfcollapse::flow::FlowError| CliError::Config(ConfigError::new(field, e.to_string()))
    };
    let m0 = NilMetric::new(abc[0], abc[1], abc[2]).map_err(bad("a0"))?;
    let trace = integrate_nil(m0, t, dt).map_err(bad("dt"))?;
    let m = *trace.last();
    let exact = nil_similarity_solution(&m0, t).map_err(|e| CliError::Internal(e.to_string()))?;
    let rel = [(m.a, exact.a), (m.b, exact.b), (m.c, exact.c)]
        .iter()
        .map(|(n, x)| (n / x - 1.0).abs())
        .fold(0.0, f64::max);
    let mut report = Report::new(
        "flow_nil",
        serde_json::json!({ "a0": abc[0], "b0": abc[1], "c0": abc[2], "t": t, "dt": dt }),
        0.0,
    );
    report.assert(Assertion::le("similarity_rel_err", rel, 1e-8));
    report.note("final", m);
    let csv_path = write_file(out_dir, "trace.csv", &trace.to_csv(&["A", "B", "C"]))?;
    let mut result = finish(report, out_dir)?;
    result.summary.insert(
        1,
        format!("  A({t}) = {:.10} B({t}) = {:.10} C({t}) = {:.10}", m.a, m.b, m.c),
    );
    result
        .summary
        .insert(2, format!("  max curvature norm {:.6e}", trace.max_k()));
    result.summary.push(format!("trace written to {}", csv_path.display()));
    Ok(result)
}

fn flow_torus(
    f: &str,
    i: u64,
    nr: usize,
    t: f64,
    dt: Option<f64>,
    out_dir: &Path,
) -> Result<InvocationResult, CliError> {
    let spec: WarpSpec = f.parse()?;
    if i == 0 {
        return Err(ConfigError::new("i", "must be positive").into());
    }
    let m0 = WarpedSurfaceMetric::from_fn(nr, (i as f64).powf(-0.5), |r| spec.eval(r))
        .map_err(|e| CliError::Config(ConfigError::new("nr", e.to_string())))?;
    let dt = dt.unwrap_or_else(|| stable_dt(&m0));
    let trace =
        integrate_warped_surface(&m0, t, dt).map_err(|e| CliError::Config(ConfigError::new("t", e.to_string())))?;
    let last = trace.last();
    let gauss_bonnet = trace
        .states
        .iter()
        .map(|s| s.total_curvature().abs())
        .fold(0.0, f64::max);
    let mut report = Report::new(
        "flow_torus",
        serde_json::json!({ "f": spec.to_string(), "i": i, "nr": nr, "t": t, "dt": dt }),
        m0.spacing(),
    );
    report.assert(Assertion::le("gauss_bonnet", gauss_bonnet, 1e-4));
    let k_end = gauss_curvature(last).iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let mut csv = String::from("time,c_hat,area,total_curvature,K_max\n");
    for ((t, s), k) in trace.times.iter().zip(&trace.states).zip(&trace.k_max) {
        csv.push_str(&format!(
            "{t:.17e},{:.17e},{:.17e},{:.17e},{k:.17e}\n",
            s.r_circumference(),
            s.area(),
            s.total_curvature()
        ));
    }
    let csv_path = write_file(out_dir, "trace.csv", &csv)?;
    let mut result = finish(report, out_dir)?;
    result.summary.insert(
        1,
        format!(
            "  c_hat(0) = {:.10} c_hat({t}) = {:.10} area = {:.10} max|K| = {:.6e} -> {:.6e}",
            m0.r_circumference(),
            last.r_circumference(),
            last.area(),
            trace.k_max[0],
            k_end
        ),
    );
    result.summary.push(format!("trace written to {}", csv_path.display()));
    Ok(result)
}
