//! Named self-checks of the library's core guarantees: projection
//! identities, approximation rate floors, form constants under random
//! coefficients, stepper residuals, iterative solves against a dense
//! factorization, unforced decay, and the declared series norms.
//!
//! Each check either returns a short summary of what it measured or a
//! message describing the first violated bound. The command-line `verify`
//! subcommand prints one PASS/FAIL line per check.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{
    assemble_form, assemble_load_fn, h1_matrix, mass_matrix, stiffness_matrix, Coefficients,
};
use crate::function::FeFunction;
use crate::linalg::{dot, solve_dense_oracle, DenseMatrix};
use crate::mesh::Mesh;
use crate::norms::{dual_norm, h1_error_fn, l2_error_fn, l2_norm};
use crate::problems::{by_name_configured, declared_norm, NormSlot};
use crate::projection::{h1_projection, l2_project_from_fine, l2_projection};
use crate::quadrature::QuadratureRule;
use crate::stepping::{backward_euler, galerkin_residual, run_problem};
use crate::study::fit_rate;

/// Result of one named check.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type CheckResult = std::result::Result<String, String>;
type Check = (&'static str, fn() -> CheckResult);

fn lib<T>(r: crate::error::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Runs every check in order and collects the outcomes.
pub fn run_all_checks() -> Vec<CheckOutcome> {
    let checks: [Check; 7] = [
        ("projection identities", check_projection_identities),
        ("approximation rate floors", check_rate_floors),
        ("form constants on random samples", check_form_constants),
        ("stepper residuals", check_stepper_residuals),
        ("iterative vs dense solves", check_solvers_against_dense),
        ("unforced decay is monotone", check_unforced_decay),
        ("declared series norms", check_series_declarations),
    ];
    checks
        .iter()
        .map(|&(name, f)| {
            let start = std::time::Instant::now();
            let result = f();
            let seconds = start.elapsed().as_secs_f64();
            match result {
                Ok(detail) => CheckOutcome {
                    name,
                    passed: true,
                    detail,
                    seconds,
                },
                Err(detail) => CheckOutcome {
                    name,
                    passed: false,
                    detail,
                    seconds,
                },
            }
        })
        .collect()
}

fn check_projection_identities() -> CheckResult {
    let mut details = Vec::new();
    let meshes: [Arc<Mesh>; 2] = [
        Arc::new(lib(Mesh::interval(16, 0.0, 1.0))?),
        Arc::new(lib(Mesh::square(5, 0.0, 1.0))?),
    ];
    for mesh in &meshes {
        let dim = mesh.dim();
        let f = move |x: [f64; 2]| {
            let base = (std::f64::consts::PI * x[0]).sin() * (1.0 + 0.5 * x[0]);
            if dim == 1 {
                base
            } else {
                base * (std::f64::consts::PI * x[1]).sin() + 3.0 * x[0] * x[1] * (1.0 - x[0]) * (1.0 - x[1])
            }
        };
        // applying the projector to its own output must not move it
        let proj = lib(l2_projection(mesh, f))?;
        let again = lib(l2_project_from_fine(mesh, &proj))?;
        let scale = 1.0 + proj.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let drift = proj
            .values()
            .iter()
            .zip(again.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if drift > 1e-9 * scale {
            return Err(format!(
                "{dim}D idempotence drift {drift:.2e} exceeds 1e-9 relative"
            ));
        }
        // the residual f - proj must be orthogonal to every hat function
        let oversampled = QuadratureRule::fine_for_dim(dim).subdivided(dim, 3);
        let load = assemble_load_fn(mesh, &oversampled, f);
        let m = mass_matrix(mesh);
        let mproj = m.matvec(proj.values());
        let load_scale = 1.0 + load.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let worst = load
            .iter()
            .zip(&mproj)
            .fold(0.0f64, |s, (a, b)| s.max((a - b).abs()));
        if worst > 1e-9 * load_scale {
            return Err(format!(
                "{dim}D orthogonality residual {worst:.2e} exceeds 1e-9 relative"
            ));
        }
        details.push(format!(
            "{dim}D drift {drift:.1e}, orthogonality {worst:.1e}"
        ));
    }
    Ok(details.join("; "))
}

fn check_rate_floors() -> CheckResult {
    let pi = std::f64::consts::PI;
    let f = |x: [f64; 2]| (pi * x[0]).sin();
    let grad = |x: [f64; 2]| [pi * (pi * x[0]).cos(), 0.0];
    let mut hs = Vec::new();
    let mut l2 = Vec::new();
    let mut h1 = Vec::new();
    let mut duals = Vec::new();
    for level in 0..3usize {
        let mesh = Arc::new(lib(Mesh::interval(8 << level, 0.0, 1.0))?);
        hs.push(mesh.h_max());
        let proj = lib(l2_projection(&mesh, f))?;
        l2.push(l2_error_fn(&mesh, proj.values(), f));
        let ritz = lib(h1_projection(&mesh, f, grad))?;
        h1.push(h1_error_fn(&mesh, ritz.values(), f, grad));
        // residual functional of the projection error on a twice-refined
        // probe mesh; its dual norm gains an extra order over the L2 error
        let probe = mesh.refine_uniform().refine_uniform();
        let mut residual = assemble_load_fn(&probe, &QuadratureRule::fine_for_dim(1), f);
        let pairing = descendant_pairing(&probe, &proj)?;
        for (r, p) in residual.iter_mut().zip(&pairing) {
            *r -= p;
        }
        duals.push(lib(dual_norm(&probe, &residual))?);
    }
    let l2_rate = lib(fit_rate(&hs, &l2))?;
    let h1_rate = lib(fit_rate(&hs, &h1))?;
    let dual_rate = lib(fit_rate(&hs, &duals))?;
    if l2_rate < 1.9 {
        return Err(format!("L2 projection rate {l2_rate:.3} below 1.9"));
    }
    if h1_rate < 0.9 {
        return Err(format!("H1 projection rate {h1_rate:.3} below 0.9"));
    }
    if dual_rate < 2.8 {
        return Err(format!("dual-norm residual rate {dual_rate:.3} below 2.8"));
    }
    Ok(format!(
        "L2 {l2_rate:.2}, H1 {h1_rate:.2}, dual {dual_rate:.2}"
    ))
}

/// Pairing (v, phi_i) of a coarse function against the hats of a
/// descendant mesh; exact because both factors are linear per cell.
fn descendant_pairing(fine: &Arc<Mesh>, coarse_fn: &FeFunction) -> std::result::Result<Vec<f64>, String> {
    let rule = QuadratureRule::base_for_dim(fine.dim());
    let coarse = coarse_fn.mesh();
    let mut load = vec![0.0; fine.n_free()];
    for cell in 0..fine.n_cells() {
        let anc = fine
            .ancestor_cell(cell, coarse)
            .ok_or_else(|| "probe mesh is not a descendant".to_string())?;
        let measure = fine.cell_measure(cell);
        let ids = fine.cell_vertex_ids(cell);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = fine.point_in_cell(cell, p);
            let bary = coarse.barycentric(anc, x);
            let fv = coarse_fn.eval_in_cell(anc, &bary) * w * measure;
            for (k, &v) in ids.iter().enumerate() {
                if let Some(fi) = fine.free_index(v) {
                    load[fi] += fv * p[k];
                }
            }
        }
    }
    Ok(load)
}

fn check_form_constants() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mesh_1d = Arc::new(lib(Mesh::interval(9, 0.0, 1.0))?);
    let mesh_2d = Arc::new(lib(Mesh::square(5, -1.0, 1.0))?);
    let samples = 200;
    let mut worst_margin = f64::INFINITY;
    for _ in 0..samples {
        let mesh = if rng.gen_bool(0.5) {
            &mesh_1d
        } else {
            &mesh_2d
        };
        let a0: f64 = rng.gen_range(0.3..3.0);
        let rho: f64 = rng.gen_range(0.0..0.9);
        let ka: f64 = rng.gen_range(0.0..5.0);
        let diffusion = move |t: f64, x: [f64; 2]| a0 * (1.0 + rho * (ka * (x[0] + x[1]) + 0.7 * t).sin());
        let mut coeffs = lib(Coefficients::new(
            Arc::new(diffusion),
            a0 * (1.0 - rho),
            a0 * (1.0 + rho),
        ))?;
        if rng.gen_bool(0.7) {
            let b1: f64 = rng.gen_range(-3.0..3.0);
            let b2: f64 = rng.gen_range(-3.0..3.0);
            coeffs = coeffs.with_convection(Arc::new(move |_, _| [b1, b2]), b1.hypot(b2));
        }
        if rng.gen_bool(0.7) {
            let c0: f64 = rng.gen_range(-2.0..2.0);
            coeffs = coeffs.with_reaction(
                Arc::new(move |t: f64, x: [f64; 2]| c0 * (2.0 * x[0] + t).cos()),
                c0.abs(),
            );
        }
        let t: f64 = rng.gen_range(0.0..1.0);
        let a = lib(assemble_form(mesh, &coeffs, t))?;
        let m = mass_matrix(mesh);
        let s = stiffness_matrix(mesh);
        let v: Vec<f64> = (0..mesh.n_free()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..mesh.n_free()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vav = dot(&v, &a.matvec(&v));
        let vmv = dot(&v, &m.matvec(&v));
        let vsv = dot(&v, &s.matvec(&v));
        let lhs = vav + coeffs.garding_shift() * vmv;
        let rhs = coeffs.coercivity() * (vsv + vmv);
        let slack = 1e-12 * (vav.abs() + coeffs.garding_shift() * vmv + rhs);
        if lhs + slack < rhs {
            return Err(format!(
                "shifted form not coercive: {lhs:.6e} < {rhs:.6e} (a0 {a0:.3}, rho {rho:.3})"
            ));
        }
        if rhs > 0.0 {
            worst_margin = worst_margin.min((lhs - rhs) / rhs);
        }
        let vaw = dot(&v, &a.matvec(&w));
        let wsw = dot(&w, &s.matvec(&w));
        let wmw = dot(&w, &m.matvec(&w));
        let bound = coeffs.continuity() * ((vsv + vmv) * (wsw + wmw)).sqrt();
        if vaw.abs() > bound * (1.0 + 1e-12) + 1e-13 {
            return Err(format!(
                "form value {:.6e} exceeds continuity bound {bound:.6e}",
                vaw.abs()
            ));
        }
    }
    Ok(format!(
        "{samples} samples, worst coercivity margin {worst_margin:.3}"
    ))
}

fn check_stepper_residuals() -> CheckResult {
    let cases: [(&str, Option<usize>, usize, usize); 4] = [
        ("smooth1d", None, 2, 16),
        ("smooth2d", None, 1, 8),
        ("spectral-p2", Some(16), 0, 16),
        ("checkerboard", None, 0, 8),
    ];
    let mut details = Vec::new();
    for (name, n_max, level, n_steps) in cases {
        let problem = lib(by_name_configured(name, None, n_max))?;
        let mesh = lib(problem.base_mesh(level))?;
        let traj = lib(run_problem(&problem, &mesh, n_steps, 1e-12))?;
        let assembler = lib(problem.load_assembler(&mesh))?;
        let residuals = lib(galerkin_residual(&traj, &problem.coefficients, |t| {
            Ok(assembler.assemble(t))
        }))?;
        let mut load_scale = 1.0f64;
        for &t in &traj.times()[1..] {
            load_scale = load_scale.max(lib(dual_norm(&mesh, &assembler.assemble(t)))?);
        }
        let worst = residuals.iter().fold(0.0f64, |m, r| m.max(*r));
        if worst > 1e-9 * load_scale {
            return Err(format!(
                "{name}: residual {worst:.2e} above 1e-9 x load scale {load_scale:.2e}"
            ));
        }
        details.push(format!("{name} {worst:.1e}"));
    }
    Ok(details.join(", "))
}

fn check_solvers_against_dense() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let rel_diff = |a: &[f64], b: &[f64]| {
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, y) in a.iter().zip(b) {
            num += (x - y) * (x - y);
            den += y * y;
        }
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    };
    // symmetric positive definite systems up to n = 500
    for n_cells in [61usize, 251, 501] {
        let mesh = Arc::new(lib(Mesh::interval(n_cells, 0.0, 1.0))?);
        let g = h1_matrix(&mesh);
        let b: Vec<f64> = (0..g.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x_it, _) = lib(g.solve_spd(&b, 1e-13))?;
        let x_dense = lib(solve_dense_oracle(&DenseMatrix::from_sparse(&g), &b))?;
        let d = rel_diff(&x_it, &x_dense);
        if d > 1e-8 {
            return Err(format!(
                "SPD n = {}: iterative and dense differ by {d:.2e}",
                g.n()
            ));
        }
        worst = worst.max(d);
    }
    // nonsymmetric convection forms
    for n_side in [15usize, 22] {
        let mesh = Arc::new(lib(Mesh::square(n_side, 0.0, 1.0))?);
        let coeffs = lib(Coefficients::new(Arc::new(|_, _| 1.0), 1.0, 1.0))?
            .with_convection(Arc::new(|_, x: [f64; 2]| [2.0 + x[1], -1.5 * x[0]]), 3.5);
        let a = lib(assemble_form(&mesh, &coeffs, 0.0))?;
        let b: Vec<f64> = (0..a.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x_it, _) = lib(a.solve_general(&b, 1e-12))?;
        let x_dense = lib(solve_dense_oracle(&DenseMatrix::from_sparse(&a), &b))?;
        let d = rel_diff(&x_it, &x_dense);
        if d > 1e-8 {
            return Err(format!(
                "general n = {}: iterative and dense differ by {d:.2e}",
                a.n()
            ));
        }
        worst = worst.max(d);
    }
    Ok(format!("largest deviation {worst:.1e} (bound 1e-8)"))
}

fn check_unforced_decay() -> CheckResult {
    let pi = std::f64::consts::PI;
    let mut details = Vec::new();
    let cases: [(Arc<Mesh>, f64, usize); 2] = [
        (Arc::new(lib(Mesh::interval(64, 0.0, 1.0))?), 1.0, 64),
        (Arc::new(lib(Mesh::square(6, 0.0, 1.0))?), 0.5, 16),
    ];
    for (mesh, t_end, n_steps) in cases {
        let dim = mesh.dim();
        let u0 = FeFunction::interpolate(mesh.clone(), |x: [f64; 2]| {
            let s = (pi * x[0]).sin() + 0.3 * (3.0 * pi * x[0]).sin();
            if dim == 1 {
                s
            } else {
                s * (pi * x[1]).sin()
            }
        })
        .into_values();
        let coeffs = Coefficients::laplacian();
        let zero = vec![0.0; mesh.n_free()];
        let traj = lib(backward_euler(
            &mesh,
            &coeffs,
            u0,
            t_end,
            n_steps,
            1e-12,
            |_| Ok(zero.clone()),
        ))?;
        let norms: Vec<f64> = (0..=traj.n_steps())
            .map(|n| l2_norm(&mesh, traj.snapshot(n)))
            .collect();
        for w in norms.windows(2) {
            if w[1] > w[0] * (1.0 + 1e-14) {
                return Err(format!(
                    "{dim}D norm grew from {:.6e} to {:.6e} in one unforced step",
                    w[0], w[1]
                ));
            }
        }
        if !(norms[norms.len() - 1] < 0.9 * norms[0]) {
            return Err(format!("{dim}D norm barely decayed"));
        }
        details.push(format!(
            "{dim}D {:.3e} -> {:.3e}",
            norms[0],
            norms[norms.len() - 1]
        ));
    }
    Ok(details.join(", "))
}

fn check_series_declarations() -> CheckResult {
    let n = 4096usize;
    for &p in &[2.0, 1.5] {
        for slot in NormSlot::all() {
            let d1 = declared_norm(p, 0.05, n, 1.0, slot);
            let d2 = declared_norm(p, 0.05, 2 * n, 1.0, slot);
            if d2.value + 1e-13 < d1.value {
                return Err(format!(
                    "{} at p = {p}: norm shrank when doubling the truncation",
                    slot.label()
                ));
            }
            if d1.tail_bound.is_finite() {
                if d2.value - d1.value > d1.tail_bound * (1.0 + 1e-12) {
                    return Err(format!(
                        "{} at p = {p}: gain {:.3e} exceeds the tail bound {:.3e}",
                        slot.label(),
                        d2.value - d1.value,
                        d1.tail_bound
                    ));
                }
            } else if d1.certified {
                return Err(format!(
                    "{} at p = {p}: divergent slot claims certification",
                    slot.label()
                ));
            }
        }
    }
    // at the catalog's own truncation, the certified slot moves by less
    // than 1e-10 relative when the truncation doubles
    let big = 1usize << 17;
    let d1 = declared_norm(2.0, 0.05, big, 1.0, NormSlot::UL2L2);
    if !d1.certified {
        return Err("solution norm fails to certify at the catalog truncation".into());
    }
    let d2 = declared_norm(2.0, 0.05, 2 * big, 1.0, NormSlot::UL2L2);
    if (d2.value - d1.value).abs() > 1e-10 * d1.value {
        return Err(format!(
            "certified norm moved by {:.3e} relative when doubling the truncation",
            (d2.value - d1.value).abs() / d1.value
        ));
    }
    Ok(format!(
        "7 slots at two exponents; certified value stable to {:.1e} relative",
        (d2.value - d1.value).abs() / d1.value
    ))
}
