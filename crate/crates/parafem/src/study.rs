//! Refinement studies: run a catalog problem over a ladder of uniformly
//! refined meshes, collect the error measures per level, fit convergence
//! rates, and emit the table as CSV or aligned text.
//!
//! Study runs are deterministic: levels execute in order, the solvers are
//! deterministic, and wall-clock measurements are zeroed unless timings
//! are explicitly requested, so identical configs produce byte-identical
//! CSV output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::energy_error::error_bundle;
use crate::error::{Error, Result};
use crate::linalg::DEFAULT_SOLVER_TOL;
use crate::problems::{by_name_configured, Problem};
use crate::stepping::{run_problem, semi_discrete_reference};

/// Default agreement tolerance of the step-doubling ladder in
/// time-converged studies.
pub const DEFAULT_TIME_TOL: f64 = 1e-4;
/// Default step count on the coarsest level of step-coupled studies.
pub const DEFAULT_BASE_STEPS: usize = 16;

/// How the step count evolves over the mesh levels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeMode {
    /// N doubles when h halves, starting from `base_steps`: first order in
    /// both discretization parameters.
    CoupledSteps { base_steps: usize },
    /// The same step count on every level; isolates the spatial error.
    FixedSteps(usize),
    /// Per level, double the step count until two consecutive runs agree
    /// to `tol` in the discrete energy norm; isolates the spatial error
    /// without guessing a step count.
    TimeConverged { tol: f64 },
}

/// Configuration of one refinement study.
#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub problem: String,
    /// Number of refinement levels (rows of the report).
    pub levels: usize,
    pub time_mode: TimeMode,
    pub solver_tol: f64,
    /// CSV output path; partial rows are flushed here if a level fails.
    pub out: Option<PathBuf>,
    /// Record wall-clock seconds per level. Off by default so reports are
    /// reproducible byte for byte.
    pub timings: bool,
    /// Contrast / decay parameter override for problems that take one.
    pub eps: Option<f64>,
    /// Series truncation override for the sine-series problems.
    pub n_max: Option<usize>,
}

impl StudyConfig {
    pub fn new(problem: &str) -> StudyConfig {
        StudyConfig {
            problem: problem.into(),
            levels: 4,
            time_mode: TimeMode::CoupledSteps {
                base_steps: DEFAULT_BASE_STEPS,
            },
            solver_tol: DEFAULT_SOLVER_TOL,
            out: None,
            timings: false,
            eps: None,
            n_max: None,
        }
    }

    /// Applies one `key=value` setting; used for both config files and
    /// command-line overrides. Unknown keys are rejected.
    pub fn apply_setting(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Parse(format!("bad value '{value}' for {what}"));
        match key {
            "problem" => self.problem = value.into(),
            "levels" => self.levels = value.parse().map_err(|_| bad("levels"))?,
            "couple_tau" => {
                let on: bool = value.parse().map_err(|_| bad("couple_tau"))?;
                if on {
                    self.time_mode = TimeMode::CoupledSteps {
                        base_steps: DEFAULT_BASE_STEPS,
                    };
                }
            }
            "base_steps" => {
                self.time_mode = TimeMode::CoupledSteps {
                    base_steps: value.parse().map_err(|_| bad("base_steps"))?,
                }
            }
            "fixed_steps" => {
                self.time_mode = TimeMode::FixedSteps(value.parse().map_err(|_| bad("fixed_steps"))?)
            }
            "tol_time" => {
                self.time_mode = TimeMode::TimeConverged {
                    tol: value.parse().map_err(|_| bad("tol_time"))?,
                }
            }
            "solver_tol" => self.solver_tol = value.parse().map_err(|_| bad("solver_tol"))?,
            "out" => self.out = Some(PathBuf::from(value)),
            "timings" => self.timings = value.parse().map_err(|_| bad("timings"))?,
            "eps" => self.eps = Some(value.parse().map_err(|_| bad("eps"))?),
            "n_max" => self.n_max = Some(value.parse().map_err(|_| bad("n_max"))?),
            other => {
                return Err(Error::Parse(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }
}

/// One row of a convergence report.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRow {
    pub level: usize,
    pub h: f64,
    pub tau: f64,
    pub dofs: usize,
    pub e_w: f64,
    pub e_linf_l2: f64,
    pub e_l2_h1: f64,
    pub seconds: f64,
}

const CSV_HEADER: &str = "level,h,tau,dofs,e_W,e_LinfL2,e_L2H1,seconds";

/// Per-level error measures of a study, in refinement order (decreasing h).
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub problem: String,
    pub rows: Vec<LevelRow>,
}

impl ConvergenceReport {
    fn fit_column<F: Fn(&LevelRow) -> f64>(&self, pick: F) -> Result<f64> {
        let hs: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        let errs: Vec<f64> = self.rows.iter().map(&pick).collect();
        fit_rate(&hs, &errs)
    }

    pub fn rate_e_w(&self) -> Result<f64> {
        self.fit_column(|r| r.e_w)
    }

    pub fn rate_e_linf_l2(&self) -> Result<f64> {
        self.fit_column(|r| r.e_linf_l2)
    }

    pub fn rate_e_l2_h1(&self) -> Result<f64> {
        self.fit_column(|r| r.e_l2_h1)
    }

    /// CSV serialization at 17 significant digits: parsing it back
    /// reproduces every float bit for bit.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.level, r.h, r.tau, r.dofs, r.e_w, r.e_linf_l2, r.e_l2_h1, r.seconds
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<Vec<LevelRow>> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header '{CSV_HEADER}', found {other:?}"
                )))
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(Error::Parse(format!(
                    "row {}: expected 8 fields, found {}",
                    i + 1,
                    fields.len()
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number '{s}'")))
            };
            let int = |s: &str| -> Result<usize> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad integer '{s}'")))
            };
            rows.push(LevelRow {
                level: int(fields[0])?,
                h: num(fields[1])?,
                tau: num(fields[2])?,
                dofs: int(fields[3])?,
                e_w: num(fields[4])?,
                e_linf_l2: num(fields[5])?,
                e_l2_h1: num(fields[6])?,
                seconds: num(fields[7])?,
            });
        }
        Ok(rows)
    }

    /// Aligned text table with the fitted rate under each error column.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "problem: {}", self.problem);
        let _ = writeln!(
            out,
            "{:>5} {:>11} {:>11} {:>8} {:>11} {:>11} {:>11} {:>9}",
            "level", "h", "tau", "dofs", "e_W", "e_LinfL2", "e_L2H1", "seconds"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>5} {:>11.4e} {:>11.4e} {:>8} {:>11.4e} {:>11.4e} {:>11.4e} {:>9.2}",
                r.level, r.h, r.tau, r.dofs, r.e_w, r.e_linf_l2, r.e_l2_h1, r.seconds
            );
        }
        if self.rows.len() >= 2 {
            let fmt = |r: Result<f64>| match r {
                Ok(v) => format!("{v:>11.2}"),
                Err(_) => format!("{:>11}", "-"),
            };
            let _ = writeln!(
                out,
                "{:>5} {:>11} {:>11} {:>8} {} {} {} {:>9}",
                "rate",
                "",
                "",
                "",
                fmt(self.rate_e_w()),
                fmt(self.rate_e_linf_l2()),
                fmt(self.rate_e_l2_h1()),
                ""
            );
        }
        out
    }
}

/// Least-squares slope of log(err) against log(h). Needs at least two
/// points; every h and err must be positive. Invariant under scaling of
/// the error column.
pub fn fit_rate(hs: &[f64], errs: &[f64]) -> Result<f64> {
    if hs.len() != errs.len() {
        return Err(Error::InvalidInput(format!(
            "{} mesh sizes against {} errors",
            hs.len(),
            errs.len()
        )));
    }
    if hs.len() < 2 {
        return Err(Error::InvalidInput(
            "a rate fit needs at least two points".into(),
        ));
    }
    for (&h, &e) in hs.iter().zip(errs) {
        if !(h > 0.0) || !(e > 0.0) {
            return Err(Error::InvalidInput(format!(
                "rate fits need positive data, got h = {h}, err = {e}"
            )));
        }
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - x_mean) * (y - y_mean);
        den += (x - x_mean) * (x - x_mean);
    }
    if den == 0.0 {
        return Err(Error::InvalidInput(
            "rate fits need at least two distinct mesh sizes".into(),
        ));
    }
    Ok(num / den)
}

/// Runs a refinement study for a catalog problem name.
pub fn run_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let problem = by_name_configured(&cfg.problem, cfg.eps, cfg.n_max)?;
    run_study_with(&problem, cfg)
}

/// Runs a refinement study for an explicitly constructed problem. Levels
/// execute in order; if one fails, the rows finished so far are flushed to
/// the configured output path before the error is returned.
pub fn run_study_with(problem: &Problem, cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let exact = problem.exact.as_ref().ok_or_else(|| {
        Error::InvalidInput(format!(
            "problem '{}' declares no exact solution to measure against",
            problem.name
        ))
    })?;
    let mut report = ConvergenceReport {
        problem: problem.name.clone(),
        rows: Vec::with_capacity(cfg.levels),
    };
    for level in 0..cfg.levels {
        match run_level(problem, exact, cfg, level) {
            Ok(row) => report.rows.push(row),
            Err(e) => {
                if let Some(path) = &cfg.out {
                    let _ = report.write_csv(path);
                }
                return Err(e);
            }
        }
    }
    if let Some(path) = &cfg.out {
        report.write_csv(path)?;
    }
    Ok(report)
}

fn run_level(
    problem: &Problem,
    exact: &crate::problems::ExactSolution,
    cfg: &StudyConfig,
    level: usize,
) -> Result<LevelRow> {
    let started = Instant::now();
    let mesh: Arc<crate::mesh::Mesh> = problem.base_mesh(level)?;
    let traj = match cfg.time_mode {
        TimeMode::CoupledSteps { base_steps } => {
            let n = base_steps.checked_shl(level as u32).ok_or_else(|| {
                Error::InvalidInput(format!("step count overflows at level {level}"))
            })?;
            run_problem(problem, &mesh, n, cfg.solver_tol)?
        }
        TimeMode::FixedSteps(n) => run_problem(problem, &mesh, n, cfg.solver_tol)?,
        TimeMode::TimeConverged { tol } => {
            semi_discrete_reference(problem, &mesh, tol, cfg.solver_tol)?
        }
    };
    let bundle = error_bundle(&traj, exact)?;
    let tau = traj
        .uniform_tau()
        .unwrap_or(problem.t_end / traj.n_steps() as f64);
    Ok(LevelRow {
        level,
        h: mesh.h_max(),
        tau,
        dofs: mesh.n_free(),
        e_w: bundle.e_w,
        e_linf_l2: bundle.e_linf_l2,
        e_l2_h1: bundle.e_l2_h1,
        seconds: if cfg.timings {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        },
    })
}

/// Checks the fitted rates of a finished study against the expectations
/// for its problem: the energy rate must sit in [0.85, 1.15] everywhere;
/// the checkerboard L-infinity-L2 rate must clear 1.5, while the rough
/// series solutions must stay at or below 1.3 in that column. Returns all
/// violations joined into one message.
pub fn check_expected_rates(report: &ConvergenceReport) -> std::result::Result<(), String> {
    let mut failures = Vec::new();
    match report.rate_e_w() {
        Ok(r) if (0.85..=1.15).contains(&r) => {}
        Ok(r) => failures.push(format!("e_W rate {r:.3} outside [0.85, 1.15]")),
        Err(e) => failures.push(format!("e_W rate unavailable: {e}")),
    }
    if report.problem == "checkerboard" {
        match report.rate_e_linf_l2() {
            Ok(r) if r >= 1.5 => {}
            Ok(r) => failures.push(format!("e_LinfL2 rate {r:.3} below 1.5")),
            Err(e) => failures.push(format!("e_LinfL2 rate unavailable: {e}")),
        }
    }
    if report.problem.starts_with("spectral") {
        match report.rate_e_linf_l2() {
            Ok(r) if r <= 1.3 => {}
            Ok(r) => failures.push(format!("e_LinfL2 rate {r:.3} above 1.3")),
            Err(e) => failures.push(format!("e_LinfL2 rate unavailable: {e}")),
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures.join("; "))
    }
}
