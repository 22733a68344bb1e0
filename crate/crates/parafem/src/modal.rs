//! Mode-wise error engine for truncated sine-series solutions.
//!
//! High series modes oscillate far too fast in time for pointwise Gauss
//! sampling of the error integrals, so every time integral is done in
//! closed form per mode (or mode pair) instead: the spatial pairings of a
//! mode with the hat basis are exact, and sin/cos antiderivatives handle
//! the time factors. Each step then costs two Riesz solves plus a few
//! mode-length dot products, independent of how fast the modes spin.

use crate::assembly::{h1_matrix, mass_matrix};
use crate::energy_error::ErrorBundle;
use crate::error::{Error, Result};
use crate::linalg::{dot, DEFAULT_SOLVER_TOL};
use crate::problems::{hat_sine_integrals, SpectralSolution};
use crate::trajectory::Trajectory;

/// sin(theta) with exact zeros at integer multiples of pi. Mode frequency
/// differences are often exact multiples of pi (always, for integer
/// frequency exponents), and the analytic zero must not be polluted by the
/// large-argument rounding of the libm sine, which would otherwise be
/// amplified by the resonance denominators.
fn snapped_sin(theta: f64) -> f64 {
    let r = theta / std::f64::consts::PI;
    if (r - r.round()).abs() < 1e-9 {
        0.0
    } else {
        theta.sin()
    }
}

/// Integral of cos(delta t) over [a, b], stable at delta = 0.
fn int_cos(delta: f64, a: f64, b: f64) -> f64 {
    if delta == 0.0 {
        b - a
    } else {
        (snapped_sin(delta * b) - snapped_sin(delta * a)) / delta
    }
}

/// Integral of cos(w1 t) cos(w2 t) over [a, b].
fn int_cos_cos(w1: f64, w2: f64, a: f64, b: f64) -> f64 {
    0.5 * (int_cos(w1 - w2, a, b) + int_cos(w1 + w2, a, b))
}

/// Integral of sin^2(w t) over [a, b].
fn int_sin_sq(w: f64, a: f64, b: f64) -> f64 {
    (b - a) / 2.0 - ((2.0 * w * b).sin() - (2.0 * w * a).sin()) / (4.0 * w)
}

/// Error bundle of a trajectory against a truncated sine series; 1D only.
pub fn series_error_bundle(traj: &Trajectory, sol: &SpectralSolution) -> Result<ErrorBundle> {
    let mesh = traj.mesh();
    if mesh.dim() != 1 {
        return Err(Error::InvalidInput(
            "series solutions live on 1D meshes".into(),
        ));
    }
    let times = traj.times();
    let (t_first, t_last) = (times[0], *times.last().unwrap());
    let amps = sol.amps();
    let omegas = sol.omegas();
    let kappas = sol.kappas();
    let n_modes = sol.n_max();
    let m = mass_matrix(mesh);
    let g = h1_matrix(mesh);

    // Exact pairings of each mode with the hat basis and their Riesz
    // representatives.
    let pairings: Vec<Vec<f64>> = kappas
        .iter()
        .map(|&kappa| hat_sine_integrals(mesh, kappa))
        .collect::<Result<_>>()?;
    let riesz: Vec<Vec<f64>> = pairings
        .iter()
        .map(|p| Ok(g.solve_spd_guess(p, DEFAULT_SOLVER_TOL, None)?.0))
        .collect::<Result<_>>()?;

    // Squared L2-in-time H1 norm of the exact solution over the horizon.
    let mut u_h1_sq = 0.0;
    for k in 0..n_modes {
        let factor = 1.0 + kappas[k] * kappas[k];
        u_h1_sq += 0.5 * amps[k] * amps[k] * factor * int_sin_sq(omegas[k], t_first, t_last);
    }

    // Global dual-norm energy of the exact time derivative: a double mode
    // sum over the Riesz products, with most pairs dropped because their
    // frequency beat integrates to zero over the horizon.
    let mut dt_dual_sq = 0.0;
    for k in 0..n_modes {
        let ck = amps[k] * omegas[k];
        for mm in k..n_modes {
            let e = int_cos_cos(omegas[k], omegas[mm], t_first, t_last);
            if e == 0.0 {
                continue;
            }
            let w_km = dot(&pairings[k], &riesz[mm]);
            let c = ck * amps[mm] * omegas[mm] * w_km * e;
            dt_dual_sq += if mm == k { c } else { 2.0 * c };
        }
    }

    let nodal_exact_l2_sq = |sins: &[f64]| -> f64 {
        (0..n_modes)
            .map(|k| 0.5 * amps[k] * amps[k] * sins[k] * sins[k])
            .sum()
    };

    let mut prev = traj.snapshot(0).to_vec();
    let mut mu_prev = m.matvec(&prev);
    let mut d_prev: Vec<f64> = pairings.iter().map(|p| dot(p, &prev)).collect();
    let mut sin_prev: Vec<f64> = omegas.iter().map(|&w| (w * t_first).sin()).collect();
    let mut gpp = dot(&prev, &g.matvec(&prev));
    let cross0: f64 = (0..n_modes)
        .map(|k| amps[k] * sin_prev[k] * d_prev[k])
        .sum();
    let mut linf_sq =
        (nodal_exact_l2_sq(&sin_prev) - 2.0 * cross0 + dot(&prev, &mu_prev)).max(0.0);

    // Interval accumulators: the mixed and trajectory parts of the H1
    // error, the mixed and trajectory parts of the dual-norm error, and
    // the nodal difference-quotient error.
    let mut h1_cross = 0.0;
    let mut h1_disc = 0.0;
    let mut dual_cross = 0.0;
    let mut dual_disc = 0.0;
    let mut acc_dt = 0.0;
    let mut guess_w = vec![0.0; mesh.n_free()];
    let mut guess_r = vec![0.0; mesh.n_free()];
    for n in 1..=traj.n_steps() {
        let (t0, t1) = (times[n - 1], times[n]);
        let tau = t1 - t0;
        let cur = traj.snapshot(n);
        let mu_cur = m.matvec(cur);
        let g_cur = g.matvec(cur);
        let d_cur: Vec<f64> = pairings.iter().map(|p| dot(p, cur)).collect();
        let sin_cur: Vec<f64> = omegas.iter().map(|&w| (w * t1).sin()).collect();
        let gcc = dot(cur, &g_cur);
        let gpc = dot(&prev, &g_cur);

        let mw: Vec<f64> = mu_cur
            .iter()
            .zip(&mu_prev)
            .map(|(&a, &b)| (a - b) / tau)
            .collect();
        let (z_w, _) = g.solve_spd_guess(&mw, DEFAULT_SOLVER_TOL, Some(&guess_w))?;
        guess_w = z_w;

        // y = integral of the pairing of u' over the interval
        let mut y = vec![0.0; mesh.n_free()];
        for k in 0..n_modes {
            let coeff = amps[k] * (sin_cur[k] - sin_prev[k]);
            for (yi, &pi) in y.iter_mut().zip(&pairings[k]) {
                *yi += coeff * pi;
            }
        }
        dual_cross += dot(&y, &guess_w);
        dual_disc += tau * dot(&mw, &guess_w);

        // mixed H1 term: per mode, exact integral of sin(w t) against the
        // two linear-in-time weights of the trajectory interpolation
        for k in 0..n_modes {
            let w = omegas[k];
            let dsin = sin_cur[k] - sin_prev[k];
            let p_w = (w * t0).cos() / w - dsin / (w * w * tau);
            let q_w = -(w * t1).cos() / w + dsin / (w * w * tau);
            h1_cross += amps[k]
                * (1.0 + kappas[k] * kappas[k])
                * (p_w * d_prev[k] + q_w * d_cur[k]);
        }
        h1_disc += tau / 3.0 * (gpp + gpc + gcc);

        let cross: f64 = (0..n_modes)
            .map(|k| amps[k] * sin_cur[k] * d_cur[k])
            .sum();
        linf_sq =
            linf_sq.max((nodal_exact_l2_sq(&sin_cur) - 2.0 * cross + dot(cur, &mu_cur)).max(0.0));

        // nodal difference-quotient residual y/tau - Mw in the dual norm
        let r: Vec<f64> = y.iter().zip(&mw).map(|(&a, &b)| a / tau - b).collect();
        let (z_r, _) = g.solve_spd_guess(&r, DEFAULT_SOLVER_TOL, Some(&guess_r))?;
        acc_dt += tau * dot(&r, &z_r).max(0.0);
        guess_r = z_r;

        prev = cur.to_vec();
        mu_prev = mu_cur;
        d_prev = d_cur;
        sin_prev = sin_cur;
        gpp = gcc;
    }

    let e_h1_sq = (u_h1_sq - 2.0 * h1_cross + h1_disc).max(0.0);
    let e_dual_sq = (dt_dual_sq - 2.0 * dual_cross + dual_disc).max(0.0);
    Ok(ErrorBundle {
        e_w: (e_dual_sq + e_h1_sq).sqrt(),
        e_linf_l2: linf_sq.sqrt(),
        e_l2_h1: e_h1_sq.sqrt(),
        e_dt_hm1_discrete: acc_dt.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy_error::error_bundle_sampled;
    use crate::function::FeFunction;
    use crate::mesh::Mesh;
    use crate::problems::{declared_norm, make_spectral, ExactSolution, NormSlot};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn interpolated_trajectory(
        mesh: &Arc<Mesh>,
        sol: &SpectralSolution,
        n_steps: usize,
    ) -> Trajectory {
        let t_end = sol.t_end();
        let mut times = Vec::with_capacity(n_steps + 1);
        let mut snaps = Vec::with_capacity(n_steps + 1);
        for n in 0..=n_steps {
            let t = t_end * n as f64 / n_steps as f64;
            times.push(t);
            let f = FeFunction::interpolate(Arc::clone(mesh), |x| sol.eval(t, x[0]));
            snaps.push(f.into_values());
        }
        Trajectory::new(Arc::clone(mesh), times, snaps).unwrap()
    }

    #[test]
    fn closed_form_time_integrals_match_quadrature() {
        let rule = crate::quadrature::QuadratureRule::segment_gauss3().subdivided(1, 8);
        let (a, b) = (0.2, 0.9);
        let span = b - a;
        for &(w1, w2) in &[(PI, PI), (PI, 4.0 * PI), (2.5, 7.1)] {
            let got = int_cos_cos(w1, w2, a, b);
            let want = rule.mean(|p| {
                let t = a + p[1] * span;
                (w1 * t).cos() * (w2 * t).cos()
            }) * span;
            assert!((got - want).abs() < 1e-12, "({w1},{w2}): {got} vs {want}");
        }
        let got = int_sin_sq(3.0 * PI, a, b);
        let want = rule.mean(|p| {
            let t = a + p[1] * span;
            (3.0 * PI * t).sin().powi(2)
        }) * span;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn beats_between_integer_frequencies_integrate_to_zero() {
        // over [0, 1] the product of cos(4 pi t) and cos(9 pi t) integrates
        // to zero exactly; the snapped sine must deliver that zero even
        // though the naive evaluation leaves rounding residue
        assert_eq!(int_cos_cos(4.0 * PI, 9.0 * PI, 0.0, 1.0), 0.0);
        assert_eq!(int_cos_cos(16.0 * PI, 25.0 * PI, 0.0, 1.0), 0.0);
        // while incommensurate pairs keep their true value
        assert!(int_cos_cos(PI, 1.5f64.sqrt() * PI, 0.0, 1.0).abs() > 1e-4);
    }

    #[test]
    fn mode_engine_matches_the_sampled_reference_for_slow_series() {
        // with few modes and many steps, three Gauss points per step
        // resolve the time factors, so the sampled engine is trustworthy
        let problem = make_spectral(2.0, 0.05, 3).unwrap();
        let exact = problem.exact.as_ref().unwrap();
        let sol = exact.series().unwrap();
        let mesh = Arc::new(Mesh::interval(16, 0.0, 1.0).unwrap());
        let traj = interpolated_trajectory(&mesh, sol, 256);
        let modal = series_error_bundle(&traj, sol).unwrap();
        let sampled = error_bundle_sampled(&traj, exact).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + a.abs());
        assert!(close(modal.e_w, sampled.e_w), "{} vs {}", modal.e_w, sampled.e_w);
        assert!(
            close(modal.e_linf_l2, sampled.e_linf_l2),
            "{} vs {}",
            modal.e_linf_l2,
            sampled.e_linf_l2
        );
        assert!(
            close(modal.e_l2_h1, sampled.e_l2_h1),
            "{} vs {}",
            modal.e_l2_h1,
            sampled.e_l2_h1
        );
        assert!(
            close(modal.e_dt_hm1_discrete, sampled.e_dt_hm1_discrete),
            "{} vs {}",
            modal.e_dt_hm1_discrete,
            sampled.e_dt_hm1_discrete
        );
    }

    #[test]
    fn mode_engine_handles_irrational_frequency_ratios() {
        let problem = make_spectral(1.5, 0.05, 3).unwrap();
        let exact = problem.exact.as_ref().unwrap();
        let sol = exact.series().unwrap();
        let mesh = Arc::new(Mesh::interval(16, 0.0, 1.0).unwrap());
        let traj = interpolated_trajectory(&mesh, sol, 128);
        let modal = series_error_bundle(&traj, sol).unwrap();
        let sampled = error_bundle_sampled(&traj, exact).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + a.abs());
        assert!(close(modal.e_w, sampled.e_w));
        assert!(close(modal.e_linf_l2, sampled.e_linf_l2));
        assert!(close(modal.e_l2_h1, sampled.e_l2_h1));
        assert!(close(modal.e_dt_hm1_discrete, sampled.e_dt_hm1_discrete));
    }

    #[test]
    fn zero_trajectory_reports_the_declared_h1_norm() {
        let problem = make_spectral(2.0, 0.1, 32).unwrap();
        let sol = problem.exact.as_ref().unwrap().series().unwrap();
        let mesh = Arc::new(Mesh::interval(32, 0.0, 1.0).unwrap());
        let n_steps = 16;
        let times: Vec<f64> = (0..=n_steps).map(|n| n as f64 / n_steps as f64).collect();
        let snaps = vec![vec![0.0; mesh.n_free()]; n_steps + 1];
        let traj = Trajectory::new(Arc::clone(&mesh), times, snaps).unwrap();
        let bundle = series_error_bundle(&traj, sol).unwrap();
        let want = declared_norm(2.0, 0.1, 32, 1.0, NormSlot::UL2H1).value;
        assert!(
            (bundle.e_l2_h1 - want).abs() < 1e-12 * want,
            "{} vs {}",
            bundle.e_l2_h1,
            want
        );
        assert!(bundle.e_w >= bundle.e_l2_h1);
        assert!(bundle.e_dt_hm1_discrete > 0.0);
    }

    #[test]
    fn series_errors_are_rejected_on_2d_meshes() {
        let problem = make_spectral(2.0, 0.05, 4).unwrap();
        let sol = problem.exact.as_ref().unwrap().series().unwrap();
        let mesh = Arc::new(Mesh::square(3, 0.0, 1.0).unwrap());
        let times = vec![0.0, 0.5, 1.0];
        let snaps = vec![vec![0.0; mesh.n_free()]; 3];
        let traj = Trajectory::new(Arc::clone(&mesh), times, snaps).unwrap();
        assert!(series_error_bundle(&traj, sol).is_err());
    }

    #[test]
    fn dispatch_routes_series_solutions_to_the_mode_engine() {
        let problem = make_spectral(2.0, 0.05, 3).unwrap();
        let exact = problem.exact.as_ref().unwrap();
        let sol = match exact {
            ExactSolution::Series(s) => Arc::clone(s),
            _ => unreachable!(),
        };
        let mesh = Arc::new(Mesh::interval(8, 0.0, 1.0).unwrap());
        let traj = interpolated_trajectory(&mesh, &sol, 32);
        let via_dispatch = crate::energy_error::error_bundle(&traj, exact).unwrap();
        let direct = series_error_bundle(&traj, &sol).unwrap();
        assert_eq!(via_dispatch.e_w, direct.e_w);
        assert_eq!(via_dispatch.e_linf_l2, direct.e_linf_l2);
    }
}
