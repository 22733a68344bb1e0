//! Command-line front end: refinement studies over the problem catalog,
//! built-in self-checks, and norm evaluation of stored trajectories.
//!
//! Exit status: 0 on success, 2 when `study --assert-rates` finds a rate
//! outside its expected window, 1 on any other failure.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use parafem::norms::{h1_norm, l2_norm};
use parafem::study::{
    check_expected_rates, run_study, StudyConfig, TimeMode, DEFAULT_BASE_STEPS,
};
use parafem::trajectory::Trajectory;
use parafem::verify::run_all_checks;

#[derive(Parser)]
#[command(
    name = "parafem",
    version,
    about = "Parabolic finite element studies: convergence tables, self-checks, trajectory norms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a refinement study and print the convergence table.
    Study(StudyArgs),
    /// Run the built-in self-checks and print one PASS/FAIL line each.
    Verify,
    /// Print the norms of a trajectory stored with the text format.
    Norms(NormsArgs),
}

#[derive(Args)]
struct StudyArgs {
    /// Config file with one key=value pair per line; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Catalog problem name (smooth1d, smooth2d, spectral-p2, spectral-p32,
    /// checkerboard).
    #[arg(long)]
    problem: Option<String>,

    /// Number of refinement levels.
    #[arg(long)]
    levels: Option<usize>,

    /// Double the step count whenever the mesh is refined (the default).
    #[arg(long, conflicts_with_all = ["fixed_steps", "tol_time"])]
    couple_tau: bool,

    /// Step count on the coarsest level of a coupled study.
    #[arg(long, conflicts_with_all = ["fixed_steps", "tol_time"])]
    base_steps: Option<usize>,

    /// Use the same step count on every level.
    #[arg(long, conflicts_with = "tol_time")]
    fixed_steps: Option<usize>,

    /// Per level, double the step count until two consecutive runs agree
    /// to this tolerance in the discrete energy norm.
    #[arg(long)]
    tol_time: Option<f64>,

    /// Relative tolerance of the inner linear solves.
    #[arg(long)]
    solver_tol: Option<f64>,

    /// Write the table as CSV to this path.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Record wall-clock seconds per level. Off by default so identical
    /// configs produce byte-identical CSV.
    #[arg(long)]
    timings: bool,

    /// Exit with status 2 if a fitted rate misses its expected window.
    #[arg(long)]
    assert_rates: bool,

    /// Problem parameter: checkerboard contrast or series decay epsilon.
    #[arg(long)]
    eps: Option<f64>,

    /// Truncation override for the series problems.
    #[arg(long)]
    n_max: Option<usize>,
}

#[derive(Args)]
struct NormsArgs {
    /// Trajectory file written by the text serializer.
    #[arg(long)]
    traj: PathBuf,
}

fn main() -> ExitCode {
    // Argument errors exit with status 1 so that 2 stays reserved for
    // rate-assertion failures; --help and --version exit with 0.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Study(args) => study(args),
        Command::Verify => verify(),
        Command::Norms(args) => norms(args),
    }
}

fn study(args: StudyArgs) -> ExitCode {
    let mut cfg = StudyConfig::new("");
    if let Some(path) = &args.config {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read config {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                eprintln!("error: config line {} is not key=value: '{line}'", i + 1);
                return ExitCode::FAILURE;
            };
            if let Err(e) = cfg.apply_setting(key.trim(), value.trim()) {
                eprintln!("error: config line {}: {e}", i + 1);
                return ExitCode::FAILURE;
            }
        }
    }
    if let Some(p) = args.problem {
        cfg.problem = p;
    }
    if let Some(k) = args.levels {
        cfg.levels = k;
    }
    if args.couple_tau {
        cfg.time_mode = TimeMode::CoupledSteps {
            base_steps: DEFAULT_BASE_STEPS,
        };
    }
    if let Some(n) = args.base_steps {
        cfg.time_mode = TimeMode::CoupledSteps { base_steps: n };
    }
    if let Some(n) = args.fixed_steps {
        cfg.time_mode = TimeMode::FixedSteps(n);
    }
    if let Some(tol) = args.tol_time {
        cfg.time_mode = TimeMode::TimeConverged { tol };
    }
    if let Some(tol) = args.solver_tol {
        cfg.solver_tol = tol;
    }
    if let Some(path) = args.out {
        cfg.out = Some(path);
    }
    if args.timings {
        cfg.timings = true;
    }
    if let Some(eps) = args.eps {
        cfg.eps = Some(eps);
    }
    if let Some(n) = args.n_max {
        cfg.n_max = Some(n);
    }
    if cfg.problem.is_empty() {
        eprintln!("error: no problem given (use --problem or a config file)");
        return ExitCode::FAILURE;
    }
    let report = match run_study(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    print!("{}", report.text_table());
    if args.assert_rates {
        if let Err(msg) = check_expected_rates(&report) {
            eprintln!("rate assertion failed: {msg}");
            return ExitCode::from(2);
        }
        println!("rates within expectations");
    }
    ExitCode::SUCCESS
}

fn verify() -> ExitCode {
    let outcomes = run_all_checks();
    let mut all_passed = true;
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag}  {} ({:.2}s) — {}", o.name, o.seconds, o.detail);
        all_passed &= o.passed;
    }
    if all_passed {
        println!("all {} checks passed", outcomes.len());
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn norms(args: NormsArgs) -> ExitCode {
    let file = match File::open(&args.traj) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: cannot open {}: {e}", args.traj.display());
            return ExitCode::FAILURE;
        }
    };
    let traj = match Trajectory::read_text(&mut BufReader::new(file)) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mesh = traj.mesh();
    let times = traj.times();
    println!("mesh: dim {}, {} cells, {} interior vertices", mesh.dim(), mesh.n_cells(), mesh.n_free());
    println!(
        "steps: {} over t in [{}, {}]",
        traj.n_steps(),
        times[0],
        times[times.len() - 1]
    );
    let last = traj.last();
    println!("final L2 norm: {:.10e}", l2_norm(mesh, last));
    println!("final H1 norm: {:.10e}", h1_norm(mesh, last));
    match traj.discrete_energy_norm() {
        Ok(v) => println!("discrete energy norm: {:.10e}", v),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    ExitCode::SUCCESS
}
