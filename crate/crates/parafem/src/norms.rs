//! Discrete norms on coefficient vectors and quadrature errors against
//! smooth functions.
//!
//! The dual norm of a functional F on the P1 space is sqrt(F' G^{-1} F)
//! with G = stiffness + mass, i.e. the norm of its Riesz representative in
//! the discrete H1 inner product.

use std::sync::Arc;

use crate::assembly::{h1_matrix, mass_matrix, stiffness_matrix};
use crate::error::Result;
use crate::linalg::{dot, DEFAULT_SOLVER_TOL};
use crate::mesh::{Mesh, Point};
use crate::quadrature::QuadratureRule;

/// sqrt(v' M v): the L2 norm of the P1 function with coefficients `v`.
pub fn l2_norm(mesh: &Arc<Mesh>, v: &[f64]) -> f64 {
    let m = mass_matrix(mesh);
    dot(v, &m.matvec(v)).sqrt().max(0.0)
}

/// sqrt(v' S v): the H1 seminorm.
pub fn h1_seminorm(mesh: &Arc<Mesh>, v: &[f64]) -> f64 {
    let s = stiffness_matrix(mesh);
    dot(v, &s.matvec(v)).sqrt().max(0.0)
}

/// sqrt(v' (S + M) v): the full H1 norm.
pub fn h1_norm(mesh: &Arc<Mesh>, v: &[f64]) -> f64 {
    let g = h1_matrix(mesh);
    dot(v, &g.matvec(v)).sqrt().max(0.0)
}

/// Dual norm sqrt(f' G^{-1} f) of a functional given by its values on the
/// free-vertex basis.
pub fn dual_norm(mesh: &Arc<Mesh>, f: &[f64]) -> Result<f64> {
    dual_norm_with_guess(mesh, f, None)
}

/// `dual_norm` with a warm-start guess for the Riesz solve; on success the
/// guess is overwritten with the representative for reuse in sweeps.
pub fn dual_norm_with_guess(
    mesh: &Arc<Mesh>,
    f: &[f64],
    guess: Option<&mut Vec<f64>>,
) -> Result<f64> {
    let g = h1_matrix(mesh);
    let x0 = guess.as_ref().map(|g| g.as_slice());
    let (x, _) = g.solve_spd_guess(f, DEFAULT_SOLVER_TOL, x0)?;
    let val = dot(f, &x).max(0.0).sqrt();
    if let Some(gbuf) = guess {
        *gbuf = x;
    }
    Ok(val)
}

fn eval_free(mesh: &Mesh, values: &[f64], cell: usize, bary: &[f64; 3]) -> f64 {
    let ids = mesh.cell_vertex_ids(cell);
    ids.iter()
        .enumerate()
        .map(|(k, &v)| match mesh.free_index(v) {
            Some(fi) => bary[k] * values[fi],
            None => 0.0,
        })
        .sum()
}

fn grad_free(mesh: &Mesh, values: &[f64], cell: usize) -> [f64; 2] {
    let ids = mesh.cell_vertex_ids(cell);
    let grads = mesh.cell_gradients(cell);
    let mut g = [0.0, 0.0];
    for (k, &v) in ids.iter().enumerate() {
        if let Some(fi) = mesh.free_index(v) {
            g[0] += values[fi] * grads[k][0];
            g[1] += values[fi] * grads[k][1];
        }
    }
    g
}

/// L2 distance between the P1 function `values` and a smooth `f`, by
/// composite degree-5 quadrature.
pub fn l2_error_fn<F: Fn(Point) -> f64>(mesh: &Arc<Mesh>, values: &[f64], f: F) -> f64 {
    let rule = QuadratureRule::fine_for_dim(mesh.dim());
    let mut acc = 0.0;
    for cell in 0..mesh.n_cells() {
        let measure = mesh.cell_measure(cell);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.point_in_cell(cell, p);
            let e = eval_free(mesh, values, cell, p) - f(x);
            acc += w * measure * e * e;
        }
    }
    acc.sqrt()
}

/// Full H1 distance between the P1 function `values` and a smooth `f`.
pub fn h1_error_fn<F, G>(mesh: &Arc<Mesh>, values: &[f64], f: F, grad_f: G) -> f64
where
    F: Fn(Point) -> f64,
    G: Fn(Point) -> [f64; 2],
{
    let rule = QuadratureRule::fine_for_dim(mesh.dim());
    let mut acc = 0.0;
    for cell in 0..mesh.n_cells() {
        let measure = mesh.cell_measure(cell);
        let gu = grad_free(mesh, values, cell);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.point_in_cell(cell, p);
            let e = eval_free(mesh, values, cell, p) - f(x);
            let gf = grad_f(x);
            let gx = gu[0] - gf[0];
            let gy = gu[1] - gf[1];
            acc += w * measure * (e * e + gx * gx + gy * gy);
        }
    }
    acc.sqrt()
}
