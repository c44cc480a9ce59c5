use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spherebuckle::bounds::{bound_next, dominance_gap, log_spaced, BoundReport, BoundsError};
use spherebuckle::harness::{
    run_campaign, CampaignConfig, HarnessError, ReportFormat, EXIT_INPUT, EXIT_PASS, EXIT_SOLVER,
    EXIT_VIOLATION,
};
use spherebuckle::solver::{
    convergence_study, solve_cap, solve_mode_pair, SolveOptions, SolverError,
};
use spherebuckle::spectrum::sig17;
use spherebuckle::{CapDomain, Execution, Spectrum, SpectrumError};

#[derive(Parser)]
#[command(
    name = "spherebuckle",
    version,
    about = "Clamped buckling spectra of spherical caps and universal inequality checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the lowest k eigenvalues of a cap.
    Solve(SolveArgs),
    /// Evaluate every bound for a spectrum file.
    Bounds(BoundsArgs),
    /// Run a verification campaign from a JSON config.
    Verify(VerifyArgs),
    /// Sweep delta and compare the one-parameter family with the delta-free bound.
    Compare(CompareArgs),
    /// Observed convergence order under grid doubling.
    Convergence(ConvergenceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    theta0: f64,
    #[arg(long)]
    k: usize,
    /// Initial grid size.
    #[arg(long, default_value_t = SolveOptions::default().n0)]
    grid: usize,
    #[arg(long, default_value_t = SolveOptions::default().max_refinements)]
    max_refinements: usize,
    #[arg(long, default_value_t = SolveOptions::default().rel_tol)]
    rel_tol: f64,
    #[arg(long, default_value_t = SolveOptions::default().max_grid)]
    max_grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Also write the radial profile of mode M, eigenvalue INDEX (0-based) as `M:INDEX`.
    #[arg(long, value_parser = parse_mode_index, requires = "eigenfunction_out")]
    eigenfunction: Option<(usize, usize)>,
    #[arg(long)]
    eigenfunction_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    spectrum: PathBuf,
    #[arg(long)]
    k: usize,
    /// Defaults to the (k+1)-th eigenvalue of the file, or the upper bound if absent.
    #[arg(long)]
    lambda_next: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    spectrum: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    lambda_next: f64,
    #[arg(long, default_value_t = 1e-2)]
    delta_min: f64,
    #[arg(long, default_value_t = 1e2)]
    delta_max: f64,
    #[arg(long, default_value_t = 50)]
    delta_points: usize,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    theta0: f64,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[arg(long, default_value_t = 64)]
    n0: usize,
}

fn parse_mode_index(s: &str) -> Result<(usize, usize), String> {
    let (m, i) = s.split_once(':').ok_or("expected M:INDEX")?;
    Ok((
        m.trim().parse().map_err(|e| format!("mode: {e}"))?,
        i.trim().parse().map_err(|e| format!("index: {e}"))?,
    ))
}

/// An error with the exit code it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let code = match e {
            SolverError::GridTooCoarse(_)
            | SolverError::InvalidOptions(_)
            | SolverError::Spectrum(_)
            | SolverError::UnsupportedMode(_) => EXIT_INPUT,
            SolverError::Eigen(_) | SolverError::NoConvergence { .. } => EXIT_SOLVER,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<SpectrumError> for Failure {
    fn from(e: SpectrumError) -> Self {
        Failure::input(e)
    }
}

impl From<BoundsError> for Failure {
    fn from(e: BoundsError) -> Self {
        Failure::input(e)
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::input(e)
    }
}

fn write_output(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn jobs_or_default(jobs: usize) -> usize {
    if jobs == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        jobs
    }
}

fn warn_below_dimension(s: &Spectrum) {
    if s.below_lemma_bound() {
        eprintln!(
            "warning: lowest eigenvalue {} is below the dimension {}",
            s.values()[0],
            s.n()
        );
    }
}

fn solve(args: SolveArgs) -> Result<i32, Failure> {
    let domain = CapDomain::new(args.n, args.theta0)?;
    if args.k == 0 {
        return Err(Failure::input("k must be at least 1"));
    }
    let run = |execution: Execution| {
        let opts = SolveOptions {
            n0: args.grid,
            max_refinements: args.max_refinements,
            rel_tol: args.rel_tol,
            max_grid: args.max_grid,
            execution,
        };
        solve_cap(&domain, args.k, &opts)
    };
    let solution = Execution::default().with_jobs(jobs_or_default(args.jobs), run)?;
    let spectrum = &solution.spectrum;
    let text = match args.format {
        Format::Json => spectrum.to_json()? + "\n",
        Format::Csv => spectrum.to_csv(),
    };
    write_output(args.out.as_ref(), &text)?;
    if let (Some((m, index)), Some(path)) = (args.eigenfunction, args.eigenfunction_out.as_ref()) {
        let cells = solution.pairs[0].grid.cells();
        let pair = solve_mode_pair(&domain, m, index, cells)?;
        write_output(Some(path), &pair.to_csv())?;
    }
    warn_below_dimension(spectrum);
    Ok(EXIT_PASS)
}

fn bounds(args: BoundsArgs) -> Result<i32, Failure> {
    let spectrum = Spectrum::read(&args.spectrum)?;
    warn_below_dimension(&spectrum);
    let lambda_next = match args.lambda_next {
        Some(v) => v,
        None if spectrum.len() > args.k => spectrum.values()[args.k],
        None => bound_next(&spectrum, args.k)?.upper_next,
    };
    let report = BoundReport::evaluate(
        &spectrum,
        args.k,
        lambda_next,
        &spherebuckle::bounds::default_delta_grid(),
    )?;
    match args.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(Failure::input)?
        ),
        Format::Csv => {
            println!("{}", BoundReport::CSV_HEADER);
            for row in report.csv_rows() {
                println!("{row}");
            }
        }
    }
    Ok(if report.all_hold() {
        EXIT_PASS
    } else {
        EXIT_VIOLATION
    })
}

fn verify(args: VerifyArgs) -> Result<i32, Failure> {
    let cfg = CampaignConfig::read(&args.config)?;
    let report = Execution::default()
        .with_jobs(jobs_or_default(args.jobs), |exec| run_campaign(&cfg, exec))?;
    let format = match args.format {
        Some(Format::Json) => ReportFormat::Json,
        Some(Format::Csv) => ReportFormat::Csv,
        None => cfg.output.as_ref().map_or(ReportFormat::Json, |o| o.format),
    };
    let path = args
        .out
        .or_else(|| cfg.output.as_ref().map(|o| o.path.clone()));
    let text = match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => report.to_csv(),
    };
    write_output(path.as_ref(), &text)?;
    let s = &report.summary;
    eprintln!(
        "cases {} (solver failures {}), checks {}, failed {} (inconclusive {}, violated {}), worst relative slack {}",
        s.cases,
        s.failed_cases,
        s.total_checks,
        s.failures,
        s.inconclusive,
        s.violated,
        s.worst_relative_slack.map_or("n/a".to_string(), sig17)
    );
    for case in report.cases.iter().filter(|c| c.error.is_some()) {
        eprintln!(
            "n={} theta0={}: {}",
            case.n,
            case.theta0,
            case.error.as_deref().unwrap_or_default()
        );
    }
    Ok(report.exit_code())
}

fn compare(args: CompareArgs) -> Result<i32, Failure> {
    let spectrum = Spectrum::read(&args.spectrum)?;
    let grid = log_spaced(args.delta_min, args.delta_max, args.delta_points)?;
    let rows = dominance_gap(&spectrum, args.k, args.lambda_next, &grid)?;
    println!("delta,wx_rhs,new_rhs,gap");
    let mut dominated = true;
    for r in &rows {
        println!(
            "{},{},{},{}",
            sig17(r.delta),
            sig17(r.wx_rhs),
            sig17(r.new_rhs),
            sig17(r.gap)
        );
        dominated &= r.gap >= -1e-10 * r.wx_rhs.abs().max(r.new_rhs.abs()).max(1.0);
    }
    Ok(if dominated { EXIT_PASS } else { EXIT_VIOLATION })
}

fn convergence(args: ConvergenceArgs) -> Result<i32, Failure> {
    let domain = CapDomain::new(args.n, args.theta0)?;
    let study = convergence_study(&domain, args.k, args.n0, args.levels, Execution::default())?;
    println!("N,m,index,lambda,observed_order");
    for (level, cells) in study.cells.iter().enumerate() {
        for (i, &(m, index)) in study.labels.iter().enumerate() {
            let order = if level >= 2 {
                sig17(study.orders[level - 2][i])
            } else {
                String::new()
            };
            println!(
                "{cells},{m},{index},{},{order}",
                sig17(study.values[level][i])
            );
        }
    }
    Ok(EXIT_PASS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_INPUT as u8
            } else {
                EXIT_PASS as u8
            });
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Bounds(a) => bounds(a),
        Command::Verify(a) => verify(a),
        Command::Compare(a) => compare(a),
        Command::Convergence(a) => convergence(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
