//! Backward Euler time stepping for the semi-discrete parabolic system
//!   M du/dt + A(t) u = F(t),  u(0) = u0,
//! on the interior vertices of a mesh.
//!
//! Each step solves (M + tau A(t_{n+1})) u_{n+1} = M u_n + tau F(t_{n+1}),
//! warm-started from the previous snapshot. The step size must satisfy
//! tau < 1 / eta, where eta is the coercivity shift of the form; this is the
//! condition under which the shifted scheme remains dissipative.
//!
//! On top of the raw stepper sit `run_problem`, which wires a catalog
//! problem to the stepper (projected initial data, assembled loads), a
//! step-doubling ladder `semi_discrete_reference` that refines in time
//! until two consecutive runs agree in the discrete energy norm, and
//! `galerkin_residual`, which measures how far any trajectory is from
//! satisfying the stepping equations.

use std::sync::Arc;

use crate::assembly::{assemble_form, mass_matrix, Coefficients};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::mesh::Mesh;
use crate::norms::dual_norm_with_guess;
use crate::problems::Problem;
use crate::projection::l2_projection;
use crate::trajectory::Trajectory;

/// Step count of the first rung of the time-refinement ladder.
pub const REFERENCE_BASE_STEPS: usize = 8;
/// The ladder gives up beyond this many steps per run.
pub const REFERENCE_STEP_CAP: usize = 1 << 20;

/// Largest admissible step size for the given coefficients: 1 / eta.
pub fn max_step_size(coeffs: &Coefficients) -> f64 {
    1.0 / coeffs.garding_shift()
}

/// Runs backward Euler with `n_steps` uniform steps on [0, t_end].
///
/// `load` maps a time to the assembled load vector at that time; it is
/// called once per step at the new time level.
pub fn backward_euler<F>(
    mesh: &Arc<Mesh>,
    coeffs: &Coefficients,
    u0: Vec<f64>,
    t_end: f64,
    n_steps: usize,
    solver_tol: f64,
    mut load: F,
) -> Result<Trajectory>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    if n_steps == 0 {
        return Err(Error::InvalidInput("need at least one time step".into()));
    }
    if !(t_end > 0.0) {
        return Err(Error::InvalidInput(format!(
            "final time must be positive, got {t_end}"
        )));
    }
    if u0.len() != mesh.n_free() {
        return Err(Error::InvalidInput(format!(
            "initial vector has {} values, mesh has {} interior vertices",
            u0.len(),
            mesh.n_free()
        )));
    }
    let tau = t_end / n_steps as f64;
    let bound = max_step_size(coeffs);
    if tau >= bound {
        return Err(Error::InvalidInput(format!(
            "step size {tau} is not below the admissible bound {bound} \
             (1 over the coercivity shift)"
        )));
    }

    let m = mass_matrix(mesh);
    let symmetric = !coeffs.has_convection();
    let frozen_system: Option<SparseMatrix> = if coeffs.time_dependent {
        None
    } else {
        let a = assemble_form(mesh, coeffs, 0.0)?;
        Some(m.add_scaled(&a, tau))
    };

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut snapshots = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    snapshots.push(u0);

    for n in 1..=n_steps {
        let t = n as f64 * tau;
        let prev = snapshots.last().unwrap();
        let f = load(t)?;
        if f.len() != mesh.n_free() {
            return Err(Error::InvalidInput(format!(
                "load at t = {t} has {} values, expected {}",
                f.len(),
                mesh.n_free()
            )));
        }
        let mut rhs = m.matvec(prev);
        for (r, fv) in rhs.iter_mut().zip(&f) {
            *r += tau * fv;
        }
        let fresh;
        let system = match &frozen_system {
            Some(s) => s,
            None => {
                let a = assemble_form(mesh, coeffs, t)?;
                fresh = m.add_scaled(&a, tau);
                &fresh
            }
        };
        let (u, _) = if symmetric {
            system.solve_spd_guess(&rhs, solver_tol, Some(prev))?
        } else {
            system.solve_general_guess(&rhs, solver_tol, Some(prev))?
        };
        times.push(t);
        snapshots.push(u);
    }

    Trajectory::new(Arc::clone(mesh), times, snapshots)
}

/// Backward Euler for a catalog problem on the given mesh: the initial
/// state is the L2 projection of the problem's initial data, the load is
/// the problem's own assembler.
pub fn run_problem(
    problem: &Problem,
    mesh: &Arc<Mesh>,
    n_steps: usize,
    solver_tol: f64,
) -> Result<Trajectory> {
    let u0 = l2_projection(mesh, |x| (problem.initial)(x))?;
    let assembler = problem.load_assembler(mesh)?;
    backward_euler(
        mesh,
        &problem.coefficients,
        u0.into_values(),
        problem.t_end,
        n_steps,
        solver_tol,
        |t| Ok(assembler.assemble(t)),
    )
}

/// Time-refined solution on a fixed mesh: doubles the step count, starting
/// from `REFERENCE_BASE_STEPS`, until two consecutive runs differ by at
/// most `tol_time` in the discrete energy norm, and returns the finer of
/// the two. An infinite tolerance returns the first admissible run; the
/// ladder fails once a run would exceed `REFERENCE_STEP_CAP` steps.
pub fn semi_discrete_reference(
    problem: &Problem,
    mesh: &Arc<Mesh>,
    tol_time: f64,
    solver_tol: f64,
) -> Result<Trajectory> {
    let mut n = REFERENCE_BASE_STEPS;
    while problem.t_end / n as f64 >= max_step_size(&problem.coefficients) {
        n *= 2;
    }
    let mut coarse = run_problem(problem, mesh, n, solver_tol)?;
    if !tol_time.is_finite() {
        return Ok(coarse);
    }
    let mut deviation = f64::INFINITY;
    while n < REFERENCE_STEP_CAP {
        n *= 2;
        let fine = run_problem(problem, mesh, n, solver_tol)?;
        deviation = fine
            .restrict_every(2)?
            .difference(&coarse)?
            .discrete_energy_norm()?;
        if deviation <= tol_time {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(Error::NoConvergence {
        context: format!(
            "time refinement for '{}' down to tolerance {tol_time:e}",
            problem.name
        ),
        iterations: n,
        residual_rel: deviation,
    })
}

/// Dual norms of the stepping residual M (u_n - u_{n-1}) / tau + A(t_n) u_n
/// minus F(t_n), one per step. Output of `backward_euler` satisfies these
/// equations to solver accuracy; for other trajectories the residual
/// measures the distance from being a backward Euler solution.
pub fn galerkin_residual<F>(
    traj: &Trajectory,
    coeffs: &Coefficients,
    mut load: F,
) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let mesh = traj.mesh();
    let times = traj.times();
    let m = mass_matrix(mesh);
    let frozen = if coeffs.time_dependent {
        None
    } else {
        Some(assemble_form(mesh, coeffs, 0.0)?)
    };
    let mut out = Vec::with_capacity(traj.n_steps());
    let mut guess = vec![0.0; mesh.n_free()];
    for n in 1..=traj.n_steps() {
        let tau = times[n] - times[n - 1];
        let cur = traj.snapshot(n);
        let prev = traj.snapshot(n - 1);
        let f = load(times[n])?;
        let fresh;
        let a = match &frozen {
            Some(a) => a,
            None => {
                fresh = assemble_form(mesh, coeffs, times[n])?;
                &fresh
            }
        };
        let w: Vec<f64> = cur.iter().zip(prev).map(|(&c, &p)| (c - p) / tau).collect();
        let mut r = m.matvec(&w);
        let au = a.matvec(cur);
        for ((ri, ai), fi) in r.iter_mut().zip(&au).zip(&f) {
            *ri += ai - fi;
        }
        out.push(dual_norm_with_guess(mesh, &r, Some(&mut guess))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::stiffness_matrix;
    use crate::function::FeFunction;
    use crate::linalg::DEFAULT_SOLVER_TOL;
    use crate::norms::l2_norm;
    use std::f64::consts::PI;

    #[test]
    fn stationary_solution_is_a_fixed_point() {
        // with F = A u*, stepping from u* stays at u* at every level
        let mesh = Arc::new(Mesh::square(4, 0.0, 1.0).unwrap());
        let coeffs = Coefficients::laplacian();
        let ustar: Vec<f64> = (0..mesh.n_free()).map(|i| ((i % 5) as f64) - 2.0).collect();
        let f = assemble_form(&mesh, &coeffs, 0.0).unwrap().matvec(&ustar);
        let traj = backward_euler(
            &mesh,
            &coeffs,
            ustar.clone(),
            1.0,
            8,
            DEFAULT_SOLVER_TOL,
            |_| Ok(f.clone()),
        )
        .unwrap();
        for n in 0..=traj.n_steps() {
            let drift: f64 = traj
                .snapshot(n)
                .iter()
                .zip(&ustar)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(drift < 1e-9, "level {n} drifted by {drift}");
        }
    }

    #[test]
    fn single_dof_recursion_is_exact() {
        // one interior vertex: M = 1/3, A = 4, so each factor-free step
        // multiplies by (1/3) / (1/3 + 4 tau)
        let mesh = Arc::new(Mesh::interval(2, 0.0, 1.0).unwrap());
        let coeffs = Coefficients::laplacian();
        let tau = 0.0625;
        let traj = backward_euler(&mesh, &coeffs, vec![1.0], 0.25, 4, 1e-14, |_| Ok(vec![0.0]))
            .unwrap();
        let factor: f64 = (1.0 / 3.0) / (1.0 / 3.0 + 4.0 * tau);
        for n in 0..=4 {
            let want = factor.powi(n as i32);
            let got = traj.snapshot(n)[0];
            assert!((got - want).abs() < 1e-12, "level {n}: {got} vs {want}");
        }
    }

    #[test]
    fn too_large_steps_are_rejected() {
        // for the Laplacian the shift is 1/2, so steps must stay below 2
        let mesh = Arc::new(Mesh::interval(4, 0.0, 1.0).unwrap());
        let coeffs = Coefficients::laplacian();
        assert!((max_step_size(&coeffs) - 2.0).abs() < 1e-15);
        let r = backward_euler(&mesh, &coeffs, vec![0.0; 3], 10.0, 4, 1e-12, |_| {
            Ok(vec![0.0; 3])
        });
        assert!(matches!(r, Err(Error::InvalidInput(_))));
        // just below the bound is fine
        assert!(
            backward_euler(&mesh, &coeffs, vec![0.0; 3], 7.6, 4, 1e-12, |_| Ok(vec![0.0; 3]))
                .is_ok()
        );
    }

    #[test]
    fn homogeneous_heat_flow_decays_monotonically_in_l2() {
        let mesh = Arc::new(Mesh::square(4, 0.0, 1.0).unwrap());
        let coeffs = Coefficients::laplacian();
        let u0 = FeFunction::interpolate(Arc::clone(&mesh), |p| {
            (PI * p[0]).sin() * (PI * p[1]).sin()
        });
        let traj = backward_euler(
            &mesh,
            &coeffs,
            u0.into_values(),
            0.5,
            16,
            DEFAULT_SOLVER_TOL,
            |_| Ok(vec![0.0; 9]),
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for n in 0..=traj.n_steps() {
            let norm = l2_norm(&mesh, traj.snapshot(n));
            assert!(norm <= prev * (1.0 + 1e-12), "norm grew at level {n}");
            prev = norm;
        }
        // and it actually decays
        assert!(l2_norm(&mesh, traj.last()) < 0.5 * l2_norm(&mesh, traj.snapshot(0)));
    }

    #[test]
    fn first_order_self_convergence_in_time() {
        // same mesh, halved steps: differences against a fine reference
        // shrink by about a factor 2
        let mesh = Arc::new(Mesh::interval(16, 0.0, 1.0).unwrap());
        let coeffs = Coefficients::laplacian();
        let u0 = FeFunction::interpolate(Arc::clone(&mesh), |p| (PI * p[0]).sin());
        let run = |n: usize| {
            backward_euler(
                &mesh,
                &coeffs,
                u0.clone().into_values(),
                0.5,
                n,
                1e-13,
                |_| Ok(vec![0.0; 15]),
            )
            .unwrap()
        };
        let coarse = run(32);
        let mid = run(64);
        let fine = run(1024);
        let at_end = |t: &Trajectory| t.last().to_vec();
        let err = |t: &Trajectory| {
            let d: Vec<f64> = at_end(t)
                .iter()
                .zip(at_end(&fine).iter())
                .map(|(a, b)| a - b)
                .collect();
            l2_norm(&mesh, &d)
        };
        let ratio = err(&coarse) / err(&mid);
        assert!(
            (1.75..2.35).contains(&ratio),
            "first-order stepping should halve the error, ratio {ratio}"
        );
    }

    #[test]
    fn maximum_principle_holds_for_admissible_steps() {
        // with the unlumped mass matrix, the system matrix M + tau S is an
        // M-matrix once its off-diagonals h/6 - tau/h turn nonpositive,
        // i.e. for tau >= h^2 / 6; then positivity is preserved
        let mesh = Arc::new(Mesh::interval(8, 0.0, 1.0).unwrap());
        let coeffs = Coefficients::laplacian();
        let mut u0 = vec![0.0; mesh.n_free()];
        u0[3] = 1.0;
        // h = 1/8, h^2/6 = 1/384; tau = 1/128
        let traj = backward_euler(&mesh, &coeffs, u0, 0.0625, 8, 1e-13, |_| {
            Ok(vec![0.0; 7])
        })
        .unwrap();
        for n in 0..=traj.n_steps() {
            for &v in traj.snapshot(n) {
                assert!(v >= -1e-12, "negative value {v} at level {n}");
            }
        }
    }

    #[test]
    fn time_dependent_reaction_uses_fresh_matrices() {
        // a reaction that switches on halfway must change the dynamics
        // relative to the frozen-coefficient run
        let mesh = Arc::new(Mesh::interval(8, 0.0, 1.0).unwrap());
        let frozen = Coefficients::laplacian();
        let switched = Coefficients::new(Arc::new(|_, _| 1.0), 1.0, 1.0)
            .unwrap()
            .with_reaction(Arc::new(|t: f64, _| if t > 0.25 { 5.0 } else { 0.0 }), 5.0)
            .with_time_dependence();
        let u0: Vec<f64> = (0..7).map(|i| 1.0 + i as f64).collect();
        let run = |c: &Coefficients| {
            backward_euler(&mesh, c, u0.clone(), 0.5, 16, 1e-13, |_| Ok(vec![0.0; 7]))
                .unwrap()
        };
        let a = run(&frozen);
        let b = run(&switched);
        // identical before the switch
        let d_early: f64 = a
            .snapshot(4)
            .iter()
            .zip(b.snapshot(4))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(d_early < 1e-10);
        // damped harder after it
        assert!(l2_norm(&mesh, b.last()) < 0.9 * l2_norm(&mesh, a.last()));
    }

    #[test]
    fn stiffness_cache_is_shared_between_calls() {
        let mesh = Arc::new(Mesh::interval(4, 0.0, 1.0).unwrap());
        let s1 = stiffness_matrix(&mesh);
        let s2 = stiffness_matrix(&mesh);
        assert!(Arc::ptr_eq(&s1, &s2));
    }

    #[test]
    fn run_problem_projects_the_initial_data() {
        let problem = crate::problems::make_smooth_1d();
        let mesh = Arc::new(Mesh::interval(16, 0.0, 1.0).unwrap());
        let traj = run_problem(&problem, &mesh, 8, DEFAULT_SOLVER_TOL).unwrap();
        assert_eq!(traj.n_steps(), 8);
        // zero initial data projects to the zero vector
        for &v in traj.snapshot(0) {
            assert_eq!(v, 0.0);
        }
        // and the solution moves away from it
        assert!(l2_norm(&mesh, traj.last()) > 0.1);
    }

    #[test]
    fn stepper_output_satisfies_its_own_equations() {
        let problem = crate::problems::make_smooth_1d();
        let mesh = Arc::new(Mesh::interval(16, 0.0, 1.0).unwrap());
        let traj = run_problem(&problem, &mesh, 16, 1e-12).unwrap();
        let assembler = problem.load_assembler(&mesh).unwrap();
        let residuals =
            galerkin_residual(&traj, &problem.coefficients, |t| Ok(assembler.assemble(t)))
                .unwrap();
        let mut guess = vec![0.0; mesh.n_free()];
        let mut load_scale = 0.0_f64;
        for &t in &traj.times()[1..] {
            let f = assembler.assemble(t);
            load_scale =
                load_scale.max(dual_norm_with_guess(&mesh, &f, Some(&mut guess)).unwrap());
        }
        let worst = residuals.iter().fold(0.0_f64, |m, &r| m.max(r));
        assert!(
            worst <= 1e-9 * (1.0 + load_scale),
            "worst residual {worst} against load scale {load_scale}"
        );
    }

    #[test]
    fn interpolant_injection_residual_converges_at_first_order() {
        // injecting the nodal interpolant of the exact solution into the
        // stepping equations leaves a residual of size O(h + tau)
        let problem = crate::problems::make_smooth_1d();
        let exact = problem.exact.as_ref().unwrap();
        let worst_at = |level: usize| {
            let n_cells = 8 << level;
            let mesh = Arc::new(Mesh::interval(n_cells, 0.0, 1.0).unwrap());
            let n_steps = 8 << level;
            let mut times = Vec::new();
            let mut snaps = Vec::new();
            for n in 0..=n_steps {
                let t = n as f64 / n_steps as f64;
                times.push(t);
                let f = FeFunction::interpolate(Arc::clone(&mesh), |x| exact.eval(t, x));
                snaps.push(f.into_values());
            }
            let traj = Trajectory::new(Arc::clone(&mesh), times, snaps).unwrap();
            let assembler = problem.load_assembler(&mesh).unwrap();
            galerkin_residual(&traj, &problem.coefficients, |t| Ok(assembler.assemble(t)))
                .unwrap()
                .into_iter()
                .fold(0.0_f64, f64::max)
        };
        let r0 = worst_at(0);
        let r1 = worst_at(1);
        let r2 = worst_at(2);
        assert!(r0 > 1.6 * r1, "level 0 -> 1: {r0} vs {r1}");
        assert!(r1 > 1.6 * r2, "level 1 -> 2: {r1} vs {r2}");
    }

    #[test]
    fn reference_ladder_returns_the_base_run_for_infinite_tolerance() {
        let problem = crate::problems::make_smooth_1d();
        let mesh = Arc::new(Mesh::interval(16, 0.0, 1.0).unwrap());
        let traj =
            semi_discrete_reference(&problem, &mesh, f64::INFINITY, DEFAULT_SOLVER_TOL).unwrap();
        assert_eq!(traj.n_steps(), REFERENCE_BASE_STEPS);
    }

    #[test]
    fn reference_ladder_refines_until_runs_agree() {
        let problem = crate::problems::make_smooth_1d();
        let mesh = Arc::new(Mesh::interval(32, 0.0, 1.0).unwrap());
        let tol = 1e-3;
        let traj = semi_discrete_reference(&problem, &mesh, tol, DEFAULT_SOLVER_TOL).unwrap();
        let n = traj.n_steps();
        assert!(n > REFERENCE_BASE_STEPS, "ladder stopped at the base rung");
        // the returned run and its predecessor agree below the tolerance
        let coarse = run_problem(&problem, &mesh, n / 2, DEFAULT_SOLVER_TOL).unwrap();
        let dev = traj
            .restrict_every(2)
            .unwrap()
            .difference(&coarse)
            .unwrap()
            .discrete_energy_norm()
            .unwrap();
        assert!(dev <= tol, "deviation {dev} above {tol}");
    }
}
