mod config;
mod input;
mod output;
mod points;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcor_core::empirical::{self, SampleMatrix};
use dcor_core::population::{self, DcorSummary};
use dcor_core::series::DEFAULT_TOL;
use dcor_core::verify::{self, MonteCarlo, PointReport};
use dcor_core::{DistributionSpec, QuadratureConfig};
use nalgebra::DMatrix;
use serde::Serialize;

use config::Config;
use output::{num, opt_num, Format};

#[derive(Debug)]
pub enum CliError {
    /// Exit 1.
    Failed,
    /// Exit 2.
    Usage(String),
    /// Exit 3.
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Failed => f.write_str("verification failed"),
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<population::PopulationError> for CliError {
    fn from(e: population::PopulationError) -> Self {
        match e {
            population::PopulationError::InvalidParameter(m) => CliError::Usage(m),
            other => CliError::Usage(other.to_string()),
        }
    }
}

/// Population and sample distance correlation for Lancaster-type laws.
#[derive(Parser, Debug)]
#[command(name = "dcor", version)]
struct Cli {
    /// `key = value` defaults (tol, points_per_axis, cutoff, seed, mc_n,
    /// mc_replicates, budget, threads); flags override.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Population V² and R for one distribution.
    Pop(PopArgs),
    /// Distance correlation of the Kibble–Moran gamma against the normal.
    Figure1(FigureArgs),
    /// Series against closed forms, the quadrature oracle and Monte Carlo.
    Verify(VerifyArgs),
    /// Sample V²_n and R_n from CSV columns.
    Empirical(EmpiricalArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    Bvnormal,
    Mixture,
    Mvn,
    Gamma,
    Poisson,
    Negbinomial,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Bvnormal => "bvnormal",
            Family::Mixture => "mixture",
            Family::Mvn => "mvn",
            Family::Gamma => "gamma",
            Family::Poisson => "poisson",
            Family::Negbinomial => "negbinomial",
        }
    }
}

#[derive(Args, Debug)]
struct PopArgs {
    family: Family,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    /// mvn: `Λ = ρ I_p` together with --rho.
    #[arg(long)]
    p: Option<usize>,
    /// mvn: cross-correlation rows separated by `;`, e.g. `0.3,0;0,0.2`.
    #[arg(long, allow_hyphen_values = true)]
    lambda_xy: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct FigureArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
    alphas: Vec<f64>,
    /// `start:stop:step`, inclusive of both ends.
    #[arg(long, default_value = "0:1:0.01")]
    grid: String,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    family: Family,
    /// `preset`, a file (JSON array or one `k=v,…` point per line), or an
    /// inline point such as `alpha=beta=1,lambda=0.5`.
    #[arg(long, default_value = "preset")]
    points: String,
    /// Wall-clock limit in seconds; exceeding it fails the run.
    #[arg(long)]
    budget: Option<f64>,
    /// Skip the Monte Carlo check for the bivariate normal.
    #[arg(long)]
    no_monte_carlo: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct EmpiricalArgs {
    #[arg(long)]
    input: PathBuf,
    /// Header names or 1-based positions; `a:b` is an inclusive range.
    #[arg(long)]
    x_cols: String,
    #[arg(long)]
    y_cols: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

fn required(name: &str, v: Option<f64>, family: Family) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("{} needs --{name}", family.name())))
}

fn parse_matrix(text: &str) -> Result<DMatrix<f64>, CliError> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Usage(format!("bad matrix entry {v:?}")))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let q = rows[0].len();
    if rows.iter().any(|r| r.len() != q) {
        return Err(CliError::Usage("matrix rows differ in length".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), q, |i, j| rows[i][j]))
}

fn build_spec(args: &PopArgs) -> Result<(DistributionSpec, BTreeMap<String, f64>), CliError> {
    let f = args.family;
    let mut params = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        params.insert(k.to_string(), v);
        v
    };
    let spec = match f {
        Family::Bvnormal => {
            DistributionSpec::bivariate_normal(put("rho", required("rho", args.rho, f)?))?
        }
        Family::Mixture => {
            DistributionSpec::mixture_bvn(put("rho", required("rho", args.rho, f)?))?
        }
        Family::Mvn => {
            let m = match (&args.lambda_xy, args.p) {
                (Some(text), _) => parse_matrix(text)?,
                (None, Some(p)) => {
                    let rho = put("rho", required("rho", args.rho, f)?);
                    put("p", p as f64);
                    if p == 0 {
                        return Err(CliError::Usage("p must be at least 1".into()));
                    }
                    DMatrix::from_diagonal_element(p, p, rho)
                }
                (None, None) => {
                    return Err(CliError::Usage(
                        "mvn needs --lambda-xy or --p with --rho".into(),
                    ))
                }
            };
            if args.lambda_xy.is_some() {
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        put(&format!("lambda_{}_{}", i + 1, j + 1), m[(i, j)]);
                    }
                }
            }
            DistributionSpec::multivariate_normal(m)?
        }
        Family::Gamma => {
            let alpha = put("alpha", required("alpha", args.alpha, f)?);
            let beta = put("beta", args.beta.unwrap_or(alpha));
            let lambda = put("lambda", required("lambda", args.lambda, f)?);
            DistributionSpec::bivariate_gamma(alpha, beta, lambda)?
        }
        Family::Poisson => DistributionSpec::bivariate_poisson(
            put("a", required("a", args.a, f)?),
            put("lambda", required("lambda", args.lambda, f)?),
        )?,
        Family::Negbinomial => DistributionSpec::bivariate_negbinomial(
            put("beta", required("beta", args.beta, f)?),
            put("c", required("c", args.c, f)?),
            put("lambda", required("lambda", args.lambda, f)?),
        )?,
    };
    Ok((spec, params))
}

#[derive(Serialize)]
struct PopReport {
    command: &'static str,
    family: &'static str,
    parameters: BTreeMap<String, f64>,
    tol: f64,
    #[serde(flatten)]
    summary: DcorSummary,
}

fn params_text(p: &BTreeMap<String, f64>) -> String {
    p.iter()
        .map(|(k, v)| format!("{k}={}", num(*v)))
        .collect::<Vec<_>>()
        .join(";")
}

fn cmd_pop(args: PopArgs, cfg: &Config) -> Result<(), CliError> {
    let tol = args.tol.or(cfg.tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(CliError::Usage(format!("tol = {tol} must lie in (0, 1)")));
    }
    let (spec, parameters) = build_spec(&args)?;
    let summary = population::dcor(&spec, tol)?;
    let report = PopReport {
        command: "pop",
        family: args.family.name(),
        parameters,
        tol,
        summary,
    };
    match args.format {
        Format::Json => output::print_json(&report),
        Format::Csv => {
            let s = &report.summary;
            output::print_rows(
                &[
                    "family",
                    "parameters",
                    "tol",
                    "v2_xy",
                    "v2_xx",
                    "v2_yy",
                    "r",
                    "note",
                ],
                [vec![
                    report.family.to_string(),
                    params_text(&report.parameters),
                    num(tol),
                    num(s.v2_xy),
                    num(s.v2_xx),
                    num(s.v2_yy),
                    opt_num(s.r),
                    s.note.clone().unwrap_or_default(),
                ]],
            )
        }
    }
}

fn alpha_label(a: f64) -> String {
    let s = num(a);
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

fn cmd_figure1(args: FigureArgs) -> Result<(), CliError> {
    let parts: Vec<f64> = args
        .grid
        .split(':')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("grid {:?} is not start:stop:step", args.grid)))?;
    let [start, stop, step] = parts[..] else {
        return Err(CliError::Usage(format!(
            "grid {:?} is not start:stop:step",
            args.grid
        )));
    };
    if args.alphas.is_empty() || args.alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(CliError::Usage("alphas must be positive".into()));
    }
    let grid = verify::linear_grid(start, stop, step)?;
    let file = match &args.out {
        Some(path) => Some(
            std::fs::File::create(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    let fig = verify::figure1(&args.alphas, &grid)?;
    let labels: Vec<String> = args.alphas.iter().map(|&a| alpha_label(a)).collect();
    let mut header = vec!["rho".to_string(), "dcor_bvn".to_string()];
    header.extend(labels.iter().map(|l| format!("dcor_gamma_alpha{l}")));
    header.extend(labels.iter().map(|l| format!("diff_alpha{l}")));
    let diffs: Vec<Vec<f64>> = (0..args.alphas.len()).map(|i| fig.difference(i)).collect();
    let rows = (0..grid.len()).map(|k| {
        let mut row = vec![num(fig.rho[k]), num(fig.dcor_bvn[k])];
        row.extend(fig.dcor_gamma.iter().map(|c| num(c[k])));
        row.extend(diffs.iter().map(|d| num(d[k])));
        row
    });
    match file {
        Some(file) => {
            output::write_rows(std::io::BufWriter::new(file), &header, rows)?;
            let mut err = std::io::stderr().lock();
            for (i, l) in labels.iter().enumerate() {
                let _ = writeln!(
                    err,
                    "alpha={l} max|diff|={}",
                    num(fig.max_abs_difference(i))
                );
            }
            Ok(())
        }
        None => output::write_rows(std::io::stdout().lock(), &header, rows),
    }
}

#[derive(Serialize)]
struct VerifyReport {
    command: &'static str,
    family: &'static str,
    passed: bool,
    budget: Option<f64>,
    seconds: f64,
    points: Vec<PointReport>,
}

fn cmd_verify(args: VerifyArgs, cfg: &Config) -> Result<(), CliError> {
    let family = args.family.name();
    let points = if args.points == "preset" {
        verify::preset_points(family).expect("every family has presets")
    } else if std::path::Path::new(&args.points).is_file() {
        points::parse_file(std::path::Path::new(&args.points))?
    } else {
        vec![points::parse_inline(&args.points)?]
    };
    let defaults = QuadratureConfig::default();
    let quad = QuadratureConfig {
        points_per_axis: cfg.points_per_axis.unwrap_or(defaults.points_per_axis),
        cutoff: cfg.cutoff.unwrap_or(defaults.cutoff),
        ..defaults
    };
    let mc_defaults = MonteCarlo::default();
    let mc = MonteCarlo {
        n: cfg.mc_n.unwrap_or(mc_defaults.n),
        replicates: cfg.mc_replicates.unwrap_or(mc_defaults.replicates),
        seed: args.seed.or(cfg.seed).unwrap_or(mc_defaults.seed),
    };
    let mc = (!args.no_monte_carlo).then_some(&mc);
    let budget = args.budget.or(cfg.budget);
    let started = Instant::now();
    let mut reports = Vec::with_capacity(points.len());
    for point in &points {
        let rep = verify::verify_point(family, point, &quad, mc).map_err(|e| match e {
            verify::VerifyError::Population(p) => CliError::from(p),
            other => CliError::Usage(other.to_string()),
        })?;
        reports.push(rep);
    }
    let seconds = started.elapsed().as_secs_f64();
    let within_budget = budget.map_or(true, |b| seconds <= b);
    let passed = within_budget && reports.iter().all(PointReport::passed);
    let report = VerifyReport {
        command: "verify",
        family,
        passed,
        budget,
        seconds,
        points: reports,
    };
    match args.format {
        Format::Json => output::print_json(&report)?,
        Format::Csv => output::print_rows(
            &[
                "family",
                "parameters",
                "check",
                "lhs",
                "rhs",
                "discrepancy",
                "statistic",
                "measure",
                "tolerance",
                "passed",
                "seconds",
            ],
            report.points.iter().flat_map(|p| {
                p.checks.iter().map(move |c| {
                    vec![
                        p.family.clone(),
                        params_text(&p.parameters),
                        c.name.clone(),
                        num(c.lhs),
                        num(c.rhs),
                        num(c.discrepancy),
                        num(c.statistic),
                        serde_json::to_value(c.measure)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_string))
                            .unwrap_or_default(),
                        num(c.tolerance),
                        c.passed.to_string(),
                        num(p.seconds),
                    ]
                })
            }),
        )?,
    }
    if !within_budget {
        eprintln!(
            "budget of {} s exceeded ({} s)",
            num(budget.unwrap_or(0.0)),
            num(seconds)
        );
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed)
    }
}

#[derive(Serialize)]
struct EmpiricalReport {
    command: &'static str,
    input: String,
    x_cols: Vec<String>,
    y_cols: Vec<String>,
    #[serde(flatten)]
    summary: empirical::EmpiricalSummary,
}

fn cmd_empirical(args: EmpiricalArgs) -> Result<(), CliError> {
    let table = input::read_blocks(&args.input, &args.x_cols, &args.y_cols)?;
    let pick = |spec: &str| -> Result<Vec<String>, CliError> {
        Ok(input::resolve_columns(spec, &table.header)?
            .into_iter()
            .map(|c| table.header[c].clone())
            .collect())
    };
    let (x_cols, y_cols) = (pick(&args.x_cols)?, pick(&args.y_cols)?);
    let (p, q) = (x_cols.len(), y_cols.len());
    let sm = SampleMatrix::new(table.n, p, q, table.x, table.y)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let report = EmpiricalReport {
        command: "empirical",
        input: args.input.display().to_string(),
        x_cols,
        y_cols,
        summary: empirical::dcor_empirical(&sm),
    };
    match args.format {
        Format::Json => output::print_json(&report),
        Format::Csv => {
            let s = &report.summary;
            output::print_rows(
                &["n", "v2_xy", "v2_xx", "v2_yy", "r", "degenerate"],
                [vec![
                    s.n.to_string(),
                    num(s.v2_xy),
                    num(s.v2_xx),
                    num(s.v2_yy),
                    num(s.r),
                    s.degenerate.to_string(),
                ]],
            )
        }
    }
}

fn init_threads(cfg: &Config) -> Result<(), CliError> {
    let threads = match std::env::var("DCOR_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("DCOR_THREADS={v:?} is not a count")))?,
        Err(_) => cfg.threads.unwrap_or(0),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    init_threads(&cfg)?;
    match cli.command {
        Command::Pop(a) => cmd_pop(a, &cfg),
        Command::Figure1(a) => cmd_figure1(a),
        Command::Verify(a) => cmd_verify(a, &cfg),
        Command::Empirical(a) => cmd_empirical(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dcor: {e}");
            ExitCode::from(e.code())
        }
    }
}
