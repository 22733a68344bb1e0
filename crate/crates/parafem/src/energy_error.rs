//! Space-time error measures between an exact solution and a discrete
//! trajectory.
//!
//! The headline quantity is the discrete energy error e_W: the time
//! integral of the squared discrete dual norm of the residual pairing of
//! the time derivative plus the squared full H1 norm, both taken for the
//! difference between the exact solution and the piecewise-linear-in-time
//! extension of the trajectory. Alongside it the bundle carries the
//! largest nodal L2 error, the H1 part of e_W on its own, and a purely
//! nodal dual-norm measure of the time-derivative mismatch.
//!
//! Product solutions sigma(t) U(x) get a fast path: every space integral
//! against U is precomputed once per mesh and each interval needs a single
//! Riesz solve. Sine-series solutions route to the mode-wise engine in
//! `modal`, which integrates the oscillatory time factors in closed form.
//! `error_bundle_sampled` is the direct reference implementation that
//! samples the solution in time by Gauss quadrature; it is accurate only
//! while three points per step resolve the time variation, which is what
//! the fast paths are checked against in tests.

use std::sync::Arc;

use crate::assembly::{assemble_load_fn, h1_matrix, mass_matrix};
use crate::error::Result;
use crate::linalg::{dot, DEFAULT_SOLVER_TOL};
use crate::mesh::{Mesh, Point};
use crate::problems::ExactSolution;
use crate::quadrature::QuadratureRule;
use crate::trajectory::Trajectory;

/// Error measures of one trajectory against one exact solution.
#[derive(Clone, Copy, Debug)]
pub struct ErrorBundle {
    /// Discrete energy norm of the error: dual-norm part plus H1 part.
    pub e_w: f64,
    /// Largest L2 error over the time nodes.
    pub e_linf_l2: f64,
    /// L2-in-time full-H1 error of the piecewise linear extension.
    pub e_l2_h1: f64,
    /// Nodal dual-norm error of the backward difference quotients.
    pub e_dt_hm1_discrete: f64,
}

/// Computes the error bundle, picking the engine suited to the solution:
/// precomputed space integrals for products, closed-form time integrals
/// for sine series.
pub fn error_bundle(traj: &Trajectory, exact: &ExactSolution) -> Result<ErrorBundle> {
    match exact {
        ExactSolution::Separable { .. } => separable_bundle(traj, exact),
        ExactSolution::Series(sol) => crate::modal::series_error_bundle(traj, sol),
    }
}

/// Gauss points in time on [t0, t1]: (t, fraction toward t1, weight).
fn time_gauss(rule: &QuadratureRule, t0: f64, t1: f64) -> Vec<(f64, f64, f64)> {
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(p, &w)| (p[0] * t0 + p[1] * t1, p[1], w * (t1 - t0)))
        .collect()
}

fn separable_bundle(traj: &Trajectory, exact: &ExactSolution) -> Result<ErrorBundle> {
    let ExactSolution::Separable {
        sigma,
        dsigma,
        space,
        space_grad,
    } = exact
    else {
        unreachable!("separable engine called with a non-product solution");
    };
    let mesh = traj.mesh();
    let times = traj.times();
    let rule = QuadratureRule::fine_for_dim(mesh.dim());
    let gauss = QuadratureRule::segment_gauss3();
    let m = mass_matrix(mesh);
    let g = h1_matrix(mesh);

    // Space integrals against U, done once.
    let m_u = assemble_load_fn(mesh, &rule, |x| space(x));
    let h1_u = h1_pairing(mesh, &rule, |x| space(x), |x| space_grad(x));
    let (u_l2_sq, u_h1_sq) = squared_norms_of(mesh, &rule, |x| space(x), |x| space_grad(x));
    let (z_m, _) = g.solve_spd_guess(&m_u, DEFAULT_SOLVER_TOL, None)?;
    let p_mm = dot(&m_u, &z_m);

    let nodal_l2_sq = |t: f64, u: &[f64], mu: &[f64]| -> f64 {
        let s = sigma(t);
        (s * s * u_l2_sq - 2.0 * s * dot(&m_u, u) + dot(u, mu)).max(0.0)
    };

    let mut prev = traj.snapshot(0).to_vec();
    let mut mu_prev = m.matvec(&prev);
    let mut d_prev = dot(&h1_u, &prev);
    let mut gpp = dot(&prev, &g.matvec(&prev));
    let mut linf_sq = nodal_l2_sq(times[0], &prev, &mu_prev);

    let mut acc_dual = 0.0;
    let mut acc_h1 = 0.0;
    let mut acc_dt = 0.0;
    let mut guess = vec![0.0; mesh.n_free()];
    for n in 1..=traj.n_steps() {
        let (t0, t1) = (times[n - 1], times[n]);
        let tau = t1 - t0;
        let cur = traj.snapshot(n);
        let mu_cur = m.matvec(cur);
        let g_cur = g.matvec(cur);
        let d_cur = dot(&h1_u, cur);
        let gcc = dot(cur, &g_cur);
        let gpc = dot(&prev, &g_cur);

        // Riesz representative of the mass pairing of the difference
        // quotient; with it, every dual norm on this interval is a closed
        // quadratic in the time factor.
        let mw: Vec<f64> = mu_cur
            .iter()
            .zip(&mu_prev)
            .map(|(&a, &b)| (a - b) / tau)
            .collect();
        let (z_w, _) = g.solve_spd_guess(&mw, DEFAULT_SOLVER_TOL, Some(&guess))?;
        guess = z_w;
        let p_mw = dot(&m_u, &guess);
        let p_ww = dot(&mw, &guess);

        for (t, theta, w) in time_gauss(&gauss, t0, t1) {
            let ds = dsigma(t);
            let dual_sq = (ds * ds * p_mm - 2.0 * ds * p_mw + p_ww).max(0.0);
            let s = sigma(t);
            let pair = theta * d_cur + (1.0 - theta) * d_prev;
            let disc = theta * theta * gcc
                + 2.0 * theta * (1.0 - theta) * gpc
                + (1.0 - theta) * (1.0 - theta) * gpp;
            let h1_sq = (s * s * u_h1_sq - 2.0 * s * pair + disc).max(0.0);
            acc_dual += w * dual_sq;
            acc_h1 += w * h1_sq;
        }

        linf_sq = linf_sq.max(nodal_l2_sq(t1, cur, &mu_cur));
        let c = (sigma(t1) - sigma(t0)) / tau;
        acc_dt += tau * (c * c * p_mm - 2.0 * c * p_mw + p_ww).max(0.0);

        prev = cur.to_vec();
        mu_prev = mu_cur;
        d_prev = d_cur;
        gpp = gcc;
    }
    Ok(ErrorBundle {
        e_w: (acc_dual + acc_h1).sqrt(),
        e_linf_l2: linf_sq.sqrt(),
        e_l2_h1: acc_h1.sqrt(),
        e_dt_hm1_discrete: acc_dt.sqrt(),
    })
}

/// Reference engine: samples the exact solution pointwise at three Gauss
/// times per step and assembles every space integral by quadrature. Valid
/// whenever the solution varies mildly within single steps.
pub fn error_bundle_sampled(traj: &Trajectory, exact: &ExactSolution) -> Result<ErrorBundle> {
    let mesh = traj.mesh();
    let times = traj.times();
    let rule = QuadratureRule::fine_for_dim(mesh.dim());
    let gauss = QuadratureRule::segment_gauss3();
    let m = mass_matrix(mesh);
    let g = h1_matrix(mesh);

    let pairing_at = |t: f64| assemble_load_fn(mesh, &rule, |x| exact.eval(t, x));
    let nodal_l2_sq = |t: f64, u: &[f64], mu: &[f64], pair: &[f64]| -> f64 {
        let (l2_sq, _) = squared_norms_of(mesh, &rule, |x| exact.eval(t, x), |x| exact.grad(t, x));
        (l2_sq - 2.0 * dot(pair, u) + dot(u, mu)).max(0.0)
    };

    let mut prev = traj.snapshot(0).to_vec();
    let mut mu_prev = m.matvec(&prev);
    let mut pair_prev = pairing_at(times[0]);
    let mut linf_sq = nodal_l2_sq(times[0], &prev, &mu_prev, &pair_prev);

    let mut acc_dual = 0.0;
    let mut acc_h1 = 0.0;
    let mut acc_dt = 0.0;
    let mut dual_guess = vec![0.0; mesh.n_free()];
    let mut dt_guess = vec![0.0; mesh.n_free()];
    for n in 1..=traj.n_steps() {
        let (t0, t1) = (times[n - 1], times[n]);
        let tau = t1 - t0;
        let cur = traj.snapshot(n);
        let mu_cur = m.matvec(cur);
        let mw: Vec<f64> = mu_cur
            .iter()
            .zip(&mu_prev)
            .map(|(&a, &b)| (a - b) / tau)
            .collect();

        for (t, theta, w) in time_gauss(&gauss, t0, t1) {
            let f_dt = assemble_load_fn(mesh, &rule, |x| exact.dt(t, x));
            let residual: Vec<f64> = f_dt.iter().zip(&mw).map(|(&a, &b)| a - b).collect();
            let dual =
                crate::norms::dual_norm_with_guess(mesh, &residual, Some(&mut dual_guess))?;

            let h1_vec = h1_pairing(mesh, &rule, |x| exact.eval(t, x), |x| exact.grad(t, x));
            let (_, h1_sq_exact) =
                squared_norms_of(mesh, &rule, |x| exact.eval(t, x), |x| exact.grad(t, x));
            let interp: Vec<f64> = cur
                .iter()
                .zip(&prev)
                .map(|(&a, &b)| theta * a + (1.0 - theta) * b)
                .collect();
            let h1_sq = (h1_sq_exact - 2.0 * dot(&h1_vec, &interp)
                + dot(&interp, &g.matvec(&interp)))
            .max(0.0);
            acc_dual += w * dual * dual;
            acc_h1 += w * h1_sq;
        }

        let pair_cur = pairing_at(t1);
        linf_sq = linf_sq.max(nodal_l2_sq(t1, cur, &mu_cur, &pair_cur));
        let r: Vec<f64> = pair_cur
            .iter()
            .zip(&pair_prev)
            .zip(&mw)
            .map(|((&a, &b), &c)| (a - b) / tau - c)
            .collect();
        let dt_dual = crate::norms::dual_norm_with_guess(mesh, &r, Some(&mut dt_guess))?;
        acc_dt += tau * dt_dual * dt_dual;

        prev = cur.to_vec();
        mu_prev = mu_cur;
        pair_prev = pair_cur;
    }
    Ok(ErrorBundle {
        e_w: (acc_dual + acc_h1).sqrt(),
        e_linf_l2: linf_sq.sqrt(),
        e_l2_h1: acc_h1.sqrt(),
        e_dt_hm1_discrete: acc_dt.sqrt(),
    })
}

/// Vector of H1 pairings <f, phi_i> = integral of grad f . grad phi_i
/// + f phi_i over the free-vertex basis.
pub(crate) fn h1_pairing<F, G>(
    mesh: &Arc<Mesh>,
    rule: &QuadratureRule,
    f: F,
    grad_f: G,
) -> Vec<f64>
where
    F: Fn(Point) -> f64,
    G: Fn(Point) -> [f64; 2],
{
    let nloc = if mesh.dim() == 1 { 2 } else { 3 };
    let mut out = vec![0.0; mesh.n_free()];
    for cell in 0..mesh.n_cells() {
        let measure = mesh.cell_measure(cell);
        let grads = mesh.cell_gradients(cell);
        let ids = mesh.cell_vertex_ids(cell);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.point_in_cell(cell, p);
            let fv = f(x);
            let gf = grad_f(x);
            for k in 0..nloc {
                let Some(fi) = mesh.free_index(ids[k]) else { continue };
                out[fi] += w
                    * measure
                    * (gf[0] * grads[k][0] + gf[1] * grads[k][1] + fv * p[k]);
            }
        }
    }
    out
}

/// (squared L2 norm, squared full H1 norm) of a smooth function by
/// quadrature over the mesh.
pub(crate) fn squared_norms_of<F, G>(
    mesh: &Arc<Mesh>,
    rule: &QuadratureRule,
    f: F,
    grad_f: G,
) -> (f64, f64)
where
    F: Fn(Point) -> f64,
    G: Fn(Point) -> [f64; 2],
{
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for cell in 0..mesh.n_cells() {
        let measure = mesh.cell_measure(cell);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.point_in_cell(cell, p);
            let fv = f(x);
            let gf = grad_f(x);
            l2 += w * measure * fv * fv;
            h1 += w * measure * (fv * fv + gf[0] * gf[0] + gf[1] * gf[1]);
        }
    }
    (l2, h1)
}
