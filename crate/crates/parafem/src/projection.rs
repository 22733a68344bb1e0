//! L2 and H1 projections onto the P1 space with zero boundary values.
//!
//! Both are Galerkin solves: the L2 projection inverts the mass matrix, the
//! H1 projection inverts stiffness + mass. Right-hand sides are integrated
//! with the composite degree-5 rule. For functions already living on a
//! refinement of the target mesh the projection is assembled exactly,
//! cell by fine cell, with no quadrature error at all.

use std::sync::Arc;

use crate::assembly::{assemble_load_fn, h1_matrix, mass_matrix};
use crate::energy_error::squared_norms_of;
use crate::error::{Error, Result};
use crate::function::FeFunction;
use crate::linalg::DEFAULT_SOLVER_TOL;
use crate::mesh::{Mesh, Point};
use crate::norms::h1_norm;
use crate::quadrature::QuadratureRule;

/// Best approximation of `f` in L2.
pub fn l2_projection<F: Fn(Point) -> f64>(mesh: &Arc<Mesh>, f: F) -> Result<FeFunction> {
    let rule = QuadratureRule::fine_for_dim(mesh.dim());
    let load = assemble_load_fn(mesh, &rule, f);
    let m = mass_matrix(mesh);
    let (x, _) = m.solve_spd(&load, DEFAULT_SOLVER_TOL)?;
    FeFunction::new(Arc::clone(mesh), x)
}

/// Best approximation of `f` in the full H1 inner product; needs the
/// gradient of `f`.
pub fn h1_projection<F, G>(mesh: &Arc<Mesh>, f: F, grad_f: G) -> Result<FeFunction>
where
    F: Fn(Point) -> f64,
    G: Fn(Point) -> [f64; 2],
{
    let rule = QuadratureRule::fine_for_dim(mesh.dim());
    let mut load = vec![0.0; mesh.n_free()];
    for cell in 0..mesh.n_cells() {
        let measure = mesh.cell_measure(cell);
        let ids = mesh.cell_vertex_ids(cell);
        let grads = mesh.cell_gradients(cell);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.point_in_cell(cell, p);
            let fv = f(x);
            let gv = grad_f(x);
            for (k, &v) in ids.iter().enumerate() {
                if let Some(fi) = mesh.free_index(v) {
                    load[fi] +=
                        w * measure * (gv[0] * grads[k][0] + gv[1] * grads[k][1] + fv * p[k]);
                }
            }
        }
    }
    let g = h1_matrix(mesh);
    let (x, _) = g.solve_spd(&load, DEFAULT_SOLVER_TOL)?;
    FeFunction::new(Arc::clone(mesh), x)
}

/// H1 norm of the L2 projection divided by the H1 norm of the function:
/// the discrete stability constant of the projection in H1, which stays
/// bounded across uniform refinements. The denominator is integrated with
/// an oversampled rule so oscillatory inputs are measured honestly.
pub fn h1_stability_ratio<F, G>(mesh: &Arc<Mesh>, f: F, grad_f: G) -> Result<f64>
where
    F: Fn(Point) -> f64,
    G: Fn(Point) -> [f64; 2],
{
    let rule = QuadratureRule::fine_for_dim(mesh.dim()).subdivided(mesh.dim(), 2);
    let (_, h1_sq) = squared_norms_of(mesh, &rule, &f, &grad_f);
    if !(h1_sq > 0.0) || !h1_sq.is_finite() {
        return Err(Error::InvalidInput(
            "the stability ratio needs a function with a nonzero H1 norm".into(),
        ));
    }
    let proj = l2_projection(mesh, f)?;
    Ok(h1_norm(mesh, proj.values()) / h1_sq.sqrt())
}

/// L2 projection of a P1 function living on a refinement of `coarse` onto
/// `coarse` itself. On every fine cell both the function and the coarse
/// hats are linear, so a degree-2 rule per fine cell assembles the load
/// without quadrature error.
pub fn l2_project_from_fine(coarse: &Arc<Mesh>, fine: &FeFunction) -> Result<FeFunction> {
    let fmesh = fine.mesh();
    let rule = QuadratureRule::base_for_dim(coarse.dim());
    let mut load = vec![0.0; coarse.n_free()];
    for cell in 0..fmesh.n_cells() {
        let anc = fmesh.ancestor_cell(cell, coarse).ok_or_else(|| {
            Error::InvalidInput(
                "the function's mesh is not a refinement of the target mesh".into(),
            )
        })?;
        let measure = fmesh.cell_measure(cell);
        let ids = coarse.cell_vertex_ids(anc);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = fmesh.point_in_cell(cell, p);
            let uv = fine.eval_in_cell(cell, p);
            let bary = coarse.barycentric(anc, x);
            for (k, &v) in ids.iter().enumerate() {
                if let Some(fi) = coarse.free_index(v) {
                    load[fi] += w * measure * uv * bary[k];
                }
            }
        }
    }
    let m = mass_matrix(coarse);
    let (x, _) = m.solve_spd(&load, DEFAULT_SOLVER_TOL)?;
    FeFunction::new(Arc::clone(coarse), x)
}
