//! `legendre-pcg`: experiment driver for the Legendre-Galerkin PCG solver.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use legendre_pcg::oracle::{offdiag_rank_experiment_with, RankConvention, RankTarget};
use legendre_pcg::{
    pcg_solve, run_benchmark, BenchmarkRow, CoefficientField, Error, Example, GalerkinOperator,
    ProblemSpec, SolveReport, SpectralCoeffs, SweepOptions, TransformMode, TransformPlan,
};
use serde::Serialize;

use crate::config::{RhsKind, SolveJob};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration (exit 1).
    Usage(String),
    /// Iteration cap reached (exit 2).
    NotConverged(String),
    /// ILU breakdown, indefiniteness and similar (exit 3).
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::NotConverged(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::ZeroPivot { .. }
            | Error::ZeroDiagonal { .. }
            | Error::Indefinite { .. }
            | Error::Singular(_)
            | Error::GaussNoConvergence { .. }
            | Error::InsufficientQuadrature { .. }
            | Error::EmptyMatrix => CliError::Numerical(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Pretty,
}

#[derive(Debug, Parser)]
#[command(name = "legendre-pcg", version, about = "Legendre-Galerkin PCG solver experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format (default: pretty for solve, csv otherwise).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for table sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Seed of random vectors.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem described by a JSON config file.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Iteration-count sweep of a named example.
    Table {
        /// example1a .. example4b
        example: String,
        /// Cutoffs N (default: the reference column set).
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        /// Truncations as `t1:t2` or `t11-t12-t13:t2` (default: reference rows).
        #[arg(long = "t", value_delimiter = ',')]
        t: Option<Vec<String>>,
        /// auto, reference or accelerated.
        #[arg(long, default_value = "auto")]
        transform: String,
        #[arg(long, default_value_t = 1e-12)]
        epsilon: f64,
        #[arg(long, default_value_t = 10_000)]
        kmax: usize,
    },
    /// Median wall time of the matrix-free A and B products.
    BenchMatvec {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Coefficient used for both β and α.
        #[arg(long, default_value = "quartic")]
        preset: String,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        #[arg(long, default_value = "accelerated")]
        transform: String,
    },
    /// Numerical ranks of the off-diagonal block of the 1D A or B matrix.
    Rank {
        #[arg(long)]
        preset: String,
        /// A (field as β) or B (field as α).
        #[arg(long, default_value = "B")]
        which: String,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1e-6,1e-12")]
        tau: Vec<f64>,
        /// absolute (σ >= τ) or relative (σ >= τ σ_1).
        #[arg(long, default_value = "absolute")]
        convention: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = match &e {
                CliError::Usage(m) | CliError::NotConverged(m) | CliError::Numerical(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::Usage("--threads: must be at least 1".into()));
    }
    match &cli.command {
        Command::Solve { config } => {
            let job = config::load(config, cli.seed)?;
            cmd_solve(&cli, job)
        }
        Command::Table {
            example,
            n,
            t,
            transform,
            epsilon,
            kmax,
        } => cmd_table(&cli, example, n.as_deref(), t.as_deref(), transform, *epsilon, *kmax),
        Command::BenchMatvec {
            dim,
            n,
            preset,
            repetitions,
            transform,
        } => cmd_bench_matvec(&cli, *dim, n, preset, *repetitions, transform),
        Command::Rank {
            preset,
            which,
            n,
            tau,
            convention,
        } => cmd_rank(&cli, preset, which, n, tau, convention),
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::Usage(format!("csv output: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Usage(format!("csv output: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Usage(format!("json output: {e}")))
}

fn parse_mode(s: &str, order: usize) -> Result<TransformMode, CliError> {
    if s == "auto" {
        return Ok(TransformMode::auto(order));
    }
    s.parse()
        .map_err(|_| CliError::Usage(format!("--transform: '{s}' must be auto, reference or accelerated")))
}

/// One line of the iteration tables.
#[derive(Debug, Serialize)]
struct TableLine {
    example: String,
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    t1: String,
    t2: usize,
    iterations: usize,
    converged: bool,
    rel_residual: f64,
    setup_s: f64,
    iter_mean_s: f64,
}

impl TableLine {
    fn new(example: &str, t1: String, t2: usize, r: &SolveReport) -> Self {
        Self {
            example: example.to_string(),
            d: r.dim,
            n: r.n,
            t1,
            t2,
            iterations: r.iterations,
            converged: r.converged,
            rel_residual: r.final_relative_residual,
            setup_s: r.setup_s,
            iter_mean_s: r.iter_mean_s,
        }
    }
}

fn cmd_solve(cli: &Cli, job: SolveJob) -> Result<(), CliError> {
    let SolveJob {
        label,
        spec,
        config,
        mode,
        rhs,
        seed,
        output,
    } = job;
    let plan = TransformPlan::new(spec.grid_order(), mode)?;
    let f = match rhs {
        RhsKind::Ones => SpectralCoeffs::filled(spec.dim(), spec.modes(), 1.0),
        RhsKind::Random => SpectralCoeffs::random(spec.dim(), spec.modes(), seed),
        RhsKind::Load => GalerkinOperator::new(&spec, &plan)?.assemble_rhs(),
    };
    let x0 = SpectralCoeffs::zeros_for(&spec);
    let (_, report) = pcg_solve(&spec, &config, &plan, &f, &x0)?;
    if let Some(path) = &output {
        std::fs::write(path, to_json(&report)?)?;
    }
    let (t1, t2) = match &config.preconditioner {
        legendre_pcg::PreconditionerChoice::None => ("none".to_string(), 0),
        legendre_pcg::PreconditionerChoice::Truncated(t) => (t.beta_label(), t.alpha),
    };
    let text = match cli.format.unwrap_or(Format::Pretty) {
        Format::Json => to_json(&report)?,
        Format::Csv => to_csv(&[TableLine::new(&label, t1, t2, &report)])?,
        Format::Pretty => {
            let pre = match &config.preconditioner {
                legendre_pcg::PreconditionerChoice::None => "none".to_string(),
                legendre_pcg::PreconditionerChoice::Truncated(t) => {
                    format!("truncated(t1={}, t2={})", t.beta_label(), t.alpha)
                }
            };
            format!(
                "problem: {label}\ndim: {}\nN: {}\nunknowns: {}\ntransform: {:?}\npreconditioner: {pre}\n\
                 iterations: {}\nconverged: {}\nfinal relative residual: {:.3e}\n\
                 setup: {:.4} s\niteration mean: {:.6} s\n",
                spec.dim(),
                spec.n(),
                spec.unknowns(),
                report.transform_mode,
                report.iterations,
                report.converged,
                report.final_relative_residual,
                report.setup_s,
                report.iter_mean_s,
            )
        }
    };
    emit(cli, &text)?;
    if !report.converged {
        return Err(CliError::NotConverged(format!(
            "no convergence after {} iterations (relative residual {:.3e})",
            report.iterations, report.final_relative_residual
        )));
    }
    Ok(())
}

fn cmd_table(
    cli: &Cli,
    example: &str,
    n: Option<&[usize]>,
    t: Option<&[String]>,
    transform: &str,
    epsilon: f64,
    kmax: usize,
) -> Result<(), CliError> {
    let ex: Example = example.parse()?;
    let n_list = n.map(<[usize]>::to_vec).unwrap_or_else(|| ex.n_list());
    if n_list.is_empty() {
        return Err(CliError::Usage("--n: empty N list".into()));
    }
    let truncations = match t {
        Some(list) => list
            .iter()
            .map(|s| config::parse_truncation(s))
            .collect::<Result<Vec<_>, _>>()?,
        None => ex.truncations(),
    };
    let mode = match transform {
        "auto" => None,
        other => Some(parse_mode(other, 0)?),
    };
    let mut options = SweepOptions {
        mode,
        threads: cli.threads,
        ..SweepOptions::default()
    };
    options.config.epsilon = epsilon;
    options.config.k_max = kmax;
    options.config.validate()?;
    let start = Instant::now();
    let rows = run_benchmark(ex, &n_list, &truncations, &options)?;
    let text = match cli.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&rows)?,
        Format::Csv => to_csv(&table_lines(&rows))?,
        Format::Pretty => pretty_table(ex, &n_list, &rows, start.elapsed().as_secs_f64()),
    };
    emit(cli, &text)
}

fn table_lines(rows: &[BenchmarkRow]) -> Vec<TableLine> {
    rows.iter()
        .map(|r| {
            TableLine::new(
                r.example.name(),
                r.truncation.beta_label(),
                r.truncation.alpha,
                &r.report,
            )
        })
        .collect()
}

/// Reference layout: one line per truncation, one column per `N`, with the
/// tabulated value in brackets when known.
fn pretty_table(ex: Example, n_list: &[usize], rows: &[BenchmarkRow], seconds: f64) -> String {
    let mut s = format!("{ex}  (d = {})\n{:<14}", ex.dim(), "t1 / t2");
    for n in n_list {
        s += &format!("{:>14}", format!("N={n}"));
    }
    s.push('\n');
    for chunk in rows.chunks(n_list.len()) {
        let t = &chunk[0].truncation;
        s += &format!("{:<14}", format!("{} / {}", t.beta_label(), t.alpha));
        for r in chunk {
            let mark = if r.report.converged { "" } else { "*" };
            let cell = match r.reference_iterations {
                Some(p) => format!("{}{mark} [{p}]", r.report.iterations),
                None => format!("{}{mark}", r.report.iterations),
            };
            s += &format!("{cell:>14}");
        }
        s.push('\n');
    }
    s += &format!("[reference value]; * = not converged; {seconds:.1} s\n");
    s
}

#[derive(Debug, Serialize)]
struct MatvecLine {
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    op: &'static str,
    time_s: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn cmd_bench_matvec(
    cli: &Cli,
    dim: usize,
    n_list: &[usize],
    preset: &str,
    repetitions: usize,
    transform: &str,
) -> Result<(), CliError> {
    if repetitions < 3 {
        return Err(CliError::Usage(format!(
            "--repetitions: {repetitions} is too few, need at least 3"
        )));
    }
    if n_list.is_empty() {
        return Err(CliError::Usage("--n: empty N list".into()));
    }
    let seed = cli.seed.unwrap_or(42);
    let field = CoefficientField::parse(preset, dim)?;
    let mut lines = Vec::new();
    for &n in n_list {
        let spec = ProblemSpec::isotropic(n, field.clone(), field.clone())?;
        let plan = TransformPlan::new(spec.grid_order(), parse_mode(transform, spec.grid_order())?)?;
        let op = GalerkinOperator::new(&spec, &plan)?;
        let u = SpectralCoeffs::random(dim, spec.modes(), seed);
        for (name, is_a) in [("A", true), ("B", false)] {
            let apply = |u: &SpectralCoeffs| if is_a { op.apply_a(u) } else { op.apply_b(u) };
            apply(&u)?;
            let mut times = Vec::with_capacity(repetitions);
            for _ in 0..repetitions {
                let t = Instant::now();
                std::hint::black_box(apply(&u)?);
                times.push(t.elapsed().as_secs_f64());
            }
            lines.push(MatvecLine {
                d: dim,
                n,
                op: name,
                time_s: median(times),
            });
        }
    }
    let text = match cli.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&lines)?,
        Format::Csv => to_csv(&lines)?,
        Format::Pretty => {
            let mut s = format!("{:>3} {:>8} {:>3} {:>14}\n", "d", "N", "op", "median s");
            for l in &lines {
                s += &format!("{:>3} {:>8} {:>3} {:>14.6e}\n", l.d, l.n, l.op, l.time_s);
            }
            s
        }
    };
    emit(cli, &text)
}

#[derive(Debug, Serialize)]
struct RankLine {
    preset: String,
    which: String,
    #[serde(rename = "N")]
    n: usize,
    tau: f64,
    rank: usize,
}

fn cmd_rank(
    cli: &Cli,
    preset: &str,
    which: &str,
    n_list: &[usize],
    tau: &[f64],
    convention: &str,
) -> Result<(), CliError> {
    if n_list.is_empty() {
        return Err(CliError::Usage("--n: empty N list".into()));
    }
    if tau.is_empty() {
        return Err(CliError::Usage("--tau: empty tolerance list".into()));
    }
    let target: RankTarget = which.parse()?;
    let field = CoefficientField::parse(preset, 1)?;
    let convention: RankConvention = convention
        .parse()
        .map_err(|e: legendre_pcg::Error| CliError::Usage(format!("--convention: {e}")))?;
    let rows = offdiag_rank_experiment_with(&field, target, n_list, tau, convention)?;
    let lines: Vec<RankLine> = rows
        .iter()
        .map(|r| RankLine {
            preset: preset.to_string(),
            which: which.to_ascii_uppercase(),
            n: r.n,
            tau: r.tau,
            rank: r.rank,
        })
        .collect();
    let text = match cli.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&lines)?,
        Format::Csv => to_csv(&lines)?,
        Format::Pretty => {
            let mut s = format!("{preset} ({})\n{:>8} {:>10} {:>6}\n", which.to_ascii_uppercase(), "N", "tau", "rank");
            for l in &lines {
                s += &format!("{:>8} {:>10.0e} {:>6}\n", l.n, l.tau, l.rank);
            }
            s
        }
    };
    emit(cli, &text)
}
