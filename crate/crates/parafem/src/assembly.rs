//! Assembly of mass, stiffness, and general second-order form matrices on
//! the interior (free) vertices, plus load vectors.
//!
//! The bilinear form is
//!   B(t; u, v) = integral of a(t,x) grad u . grad v
//!              + (b(t,x) . grad u) v + c(t,x) u v,
//! with a bounded below by a positive constant. Mass and stiffness are
//! assembled from exact element matrices; general forms use an interior
//! degree-2 rule, which reproduces them exactly for constant coefficients.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::mesh::{Mesh, Point};
use crate::quadrature::QuadratureRule;

pub type ScalarField = Arc<dyn Fn(f64, Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(f64, Point) -> [f64; 2] + Send + Sync>;

/// Coefficients of the spatial form, with the uniform bounds that drive the
/// coercivity shift and the admissible time step.
#[derive(Clone)]
pub struct Coefficients {
    diffusion: ScalarField,
    convection: Option<VectorField>,
    reaction: Option<ScalarField>,
    pub a_lower: f64,
    pub a_upper: f64,
    pub b_sup: f64,
    pub c_sup: f64,
    pub time_dependent: bool,
}

impl std::fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Coefficients")
            .field("a_lower", &self.a_lower)
            .field("a_upper", &self.a_upper)
            .field("b_sup", &self.b_sup)
            .field("c_sup", &self.c_sup)
            .field("time_dependent", &self.time_dependent)
            .finish()
    }
}

impl Coefficients {
    pub fn new(diffusion: ScalarField, a_lower: f64, a_upper: f64) -> Result<Coefficients> {
        if !(a_lower > 0.0) || !(a_upper >= a_lower) {
            return Err(Error::Coefficient(format!(
                "diffusion bounds must satisfy 0 < a_lower <= a_upper, got [{a_lower}, {a_upper}]"
            )));
        }
        Ok(Coefficients {
            diffusion,
            convection: None,
            reaction: None,
            a_lower,
            a_upper,
            b_sup: 0.0,
            c_sup: 0.0,
            time_dependent: false,
        })
    }

    /// The pure Laplacian: a = 1, no convection or reaction.
    pub fn laplacian() -> Coefficients {
        Coefficients::new(Arc::new(|_, _| 1.0), 1.0, 1.0).unwrap()
    }

    pub fn with_convection(mut self, b: VectorField, b_sup: f64) -> Coefficients {
        self.convection = Some(b);
        self.b_sup = b_sup;
        self
    }

    pub fn with_reaction(mut self, c: ScalarField, c_sup: f64) -> Coefficients {
        self.reaction = Some(c);
        self.c_sup = c_sup;
        self
    }

    pub fn with_time_dependence(mut self) -> Coefficients {
        self.time_dependent = true;
        self
    }

    pub fn has_convection(&self) -> bool {
        self.convection.is_some()
    }

    pub fn diffusion_at(&self, t: f64, x: Point) -> f64 {
        (self.diffusion)(t, x)
    }

    pub fn convection_at(&self, t: f64, x: Point) -> Option<[f64; 2]> {
        self.convection.as_ref().map(|f| f(t, x))
    }

    pub fn reaction_at(&self, t: f64, x: Point) -> Option<f64> {
        self.reaction.as_ref().map(|f| f(t, x))
    }

    /// Shift eta making B + eta <.,.> coercive: a_lower/2 + b_sup^2/(2 a_lower) + c_sup.
    pub fn garding_shift(&self) -> f64 {
        self.a_lower / 2.0 + self.b_sup * self.b_sup / (2.0 * self.a_lower) + self.c_sup
    }

    /// Coercivity constant of the shifted form: a_lower / 2.
    pub fn coercivity(&self) -> f64 {
        self.a_lower / 2.0
    }

    /// Continuity constant of B on H1: a_upper + b_sup + c_sup.
    pub fn continuity(&self) -> f64 {
        self.a_upper + self.b_sup + self.c_sup
    }
}

fn element_mass(mesh: &Mesh, cell: usize) -> [[f64; 3]; 3] {
    let m = mesh.cell_measure(cell);
    match mesh.dim() {
        1 => {
            let s = m / 6.0;
            [
                [2.0 * s, s, 0.0],
                [s, 2.0 * s, 0.0],
                [0.0, 0.0, 0.0],
            ]
        }
        _ => {
            let s = m / 12.0;
            [
                [2.0 * s, s, s],
                [s, 2.0 * s, s],
                [s, s, 2.0 * s],
            ]
        }
    }
}

fn element_stiffness(mesh: &Mesh, cell: usize) -> [[f64; 3]; 3] {
    let m = mesh.cell_measure(cell);
    let g = mesh.cell_gradients(cell);
    let mut e = [[0.0; 3]; 3];
    let nloc = if mesh.dim() == 1 { 2 } else { 3 };
    for i in 0..nloc {
        for j in 0..nloc {
            e[i][j] = m * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    e
}

fn scatter(
    mesh: &Mesh,
    cell: usize,
    element: &[[f64; 3]; 3],
    triplets: &mut Vec<(usize, usize, f64)>,
) {
    let ids = mesh.cell_vertex_ids(cell);
    for (i, &vi) in ids.iter().enumerate() {
        let Some(fi) = mesh.free_index(vi) else { continue };
        for (j, &vj) in ids.iter().enumerate() {
            let Some(fj) = mesh.free_index(vj) else { continue };
            triplets.push((fi, fj, element[i][j]));
        }
    }
}

/// Exact mass matrix on the free vertices (cached per mesh).
pub fn mass_matrix(mesh: &Arc<Mesh>) -> Arc<SparseMatrix> {
    Arc::clone(mesh.cache.mass.get_or_init(|| {
        let mut triplets = Vec::new();
        for cell in 0..mesh.n_cells() {
            let e = element_mass(mesh, cell);
            scatter(mesh, cell, &e, &mut triplets);
        }
        Arc::new(SparseMatrix::from_triplets(mesh.n_free(), &triplets).expect("valid triplets"))
    }))
}

/// Exact stiffness matrix (unit diffusion) on the free vertices (cached).
pub fn stiffness_matrix(mesh: &Arc<Mesh>) -> Arc<SparseMatrix> {
    Arc::clone(mesh.cache.stiffness.get_or_init(|| {
        let mut triplets = Vec::new();
        for cell in 0..mesh.n_cells() {
            let e = element_stiffness(mesh, cell);
            scatter(mesh, cell, &e, &mut triplets);
        }
        Arc::new(SparseMatrix::from_triplets(mesh.n_free(), &triplets).expect("valid triplets"))
    }))
}

/// Stiffness + mass: the Gram matrix of the full H1 inner product, which
/// also realizes the discrete dual norm (cached).
pub fn h1_matrix(mesh: &Arc<Mesh>) -> Arc<SparseMatrix> {
    Arc::clone(mesh.cache.h1.get_or_init(|| {
        let s = stiffness_matrix(mesh);
        let m = mass_matrix(mesh);
        Arc::new(s.add_scaled(&m, 1.0))
    }))
}

/// Form matrix A(t) on the free vertices, sampled with the interior
/// degree-2 rule. Fails if the diffusion dips below its declared lower bound
/// at any sample point.
pub fn assemble_form(mesh: &Arc<Mesh>, coeffs: &Coefficients, t: f64) -> Result<SparseMatrix> {
    let rule = QuadratureRule::base_for_dim(mesh.dim());
    let nloc = if mesh.dim() == 1 { 2 } else { 3 };
    let tol = 1e-12 * coeffs.a_lower.max(1.0);
    let mut triplets = Vec::new();
    for cell in 0..mesh.n_cells() {
        let measure = mesh.cell_measure(cell);
        let grads = mesh.cell_gradients(cell);
        let mut e = [[0.0; 3]; 3];
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.point_in_cell(cell, p);
            let a = (coeffs.diffusion)(t, x);
            if a < coeffs.a_lower - tol {
                return Err(Error::Coefficient(format!(
                    "diffusion {a} at ({}, {}) below declared lower bound {}",
                    x[0], x[1], coeffs.a_lower
                )));
            }
            let b = coeffs.convection.as_ref().map(|f| f(t, x));
            let c = coeffs.reaction.as_ref().map_or(0.0, |f| f(t, x));
            let scale = w * measure;
            for i in 0..nloc {
                for j in 0..nloc {
                    let mut v = a * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                    if let Some(bv) = b {
                        v += (bv[0] * grads[j][0] + bv[1] * grads[j][1]) * p[i];
                    }
                    if c != 0.0 {
                        v += c * p[i] * p[j];
                    }
                    e[i][j] += scale * v;
                }
            }
        }
        scatter(mesh, cell, &e, &mut triplets);
    }
    SparseMatrix::from_triplets(mesh.n_free(), &triplets)
}

/// Load vector F_i = integral of f * phi_i over the free vertices, using the
/// given quadrature rule.
pub fn assemble_load_fn<F: Fn(Point) -> f64>(
    mesh: &Mesh,
    rule: &QuadratureRule,
    f: F,
) -> Vec<f64> {
    let mut load = vec![0.0; mesh.n_free()];
    for cell in 0..mesh.n_cells() {
        let measure = mesh.cell_measure(cell);
        let ids = mesh.cell_vertex_ids(cell);
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.point_in_cell(cell, p);
            let fv = f(x) * w * measure;
            for (k, &v) in ids.iter().enumerate() {
                if let Some(fi) = mesh.free_index(v) {
                    load[fi] += fv * p[k];
                }
            }
        }
    }
    load
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn max_entry_diff(a: &SparseMatrix, b: &SparseMatrix) -> f64 {
        let d = a.add_scaled(b, -1.0);
        (0..d.n())
            .map(|i| {
                let (_, vals) = d.row(i);
                vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn interval_mass_and_stiffness_entries() {
        let mesh = Arc::new(Mesh::interval(3, 0.0, 1.0).unwrap());
        let h = 1.0 / 3.0;
        let m = mass_matrix(&mesh);
        let s = stiffness_matrix(&mesh);
        assert_eq!(m.n(), 2);
        // M = (h/6) [[4, 1], [1, 4]], S = (1/h) [[2, -1], [-1, 2]]
        let dense_m = crate::linalg::DenseMatrix::from_sparse(&m);
        let dense_s = crate::linalg::DenseMatrix::from_sparse(&s);
        assert!((dense_m.get(0, 0) - 4.0 * h / 6.0).abs() < 1e-15);
        assert!((dense_m.get(0, 1) - h / 6.0).abs() < 1e-15);
        assert!((dense_s.get(0, 0) - 2.0 / h).abs() < 1e-12);
        assert!((dense_s.get(1, 0) + 1.0 / h).abs() < 1e-12);
    }

    #[test]
    fn square_stiffness_is_the_five_point_stencil() {
        // on the single-diagonal right-isoceles triangulation the assembled
        // stiffness has 4 on the diagonal, -1 to axis neighbors, and exactly
        // 0 to the diagonal neighbors, independent of h
        let mesh = Arc::new(Mesh::square(4, 0.0, 1.0).unwrap());
        let s = stiffness_matrix(&mesh);
        let center = mesh
            .free_vertices()
            .iter()
            .position(|&v| mesh.vertex(v) == [0.5, 0.5])
            .unwrap();
        let dense = crate::linalg::DenseMatrix::from_sparse(&s);
        assert!((dense.get(center, center) - 4.0).abs() < 1e-12);
        let mut minus_ones = 0;
        let mut zeros = 0;
        for j in 0..s.n() {
            if j == center {
                continue;
            }
            let v = dense.get(center, j);
            if (v + 1.0).abs() < 1e-12 {
                minus_ones += 1;
            } else if v.abs() < 1e-12 {
                zeros += 1;
            } else {
                panic!("unexpected stencil entry {v}");
            }
        }
        assert_eq!(minus_ones, 4);
        assert_eq!(zeros, s.n() - 5);
    }

    #[test]
    fn square_mass_row_matches_hat_integral() {
        let mesh = Arc::new(Mesh::square(4, 0.0, 1.0).unwrap());
        let m = mass_matrix(&mesh);
        let h: f64 = 0.25;
        let center = mesh
            .free_vertices()
            .iter()
            .position(|&v| mesh.vertex(v) == [0.5, 0.5])
            .unwrap();
        let (_, vals) = m.row(center);
        let row_sum: f64 = vals.iter().sum();
        // all neighbors of the center vertex are interior, so the row sum is
        // the full integral of the hat: one third of its support area
        assert!((row_sum - h * h).abs() < 1e-15);
        let dense = crate::linalg::DenseMatrix::from_sparse(&m);
        assert!((dense.get(center, center) - h * h / 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_coefficients_reduce_to_stiffness_and_mass() {
        let mesh = Arc::new(Mesh::square(3, 0.0, 1.0).unwrap());
        let coeffs = Coefficients::new(Arc::new(|_, _| 2.0), 2.0, 2.0)
            .unwrap()
            .with_reaction(Arc::new(|_, _| 3.0), 3.0);
        let a = assemble_form(&mesh, &coeffs, 0.0).unwrap();
        let s = stiffness_matrix(&mesh);
        let expected = s.add_scaled(&s, 1.0).add_scaled(&mass_matrix(&mesh), 3.0);
        // 2 S + 3 M, which the degree-2 rule assembles exactly
        assert!(max_entry_diff(&a, &expected) < 1e-13);
    }

    #[test]
    fn quadratic_diffusion_is_integrated_exactly() {
        // a(x) = 1 + x^2 against constant gradients is a degree-2 integrand,
        // so the assembly rule is exact and the entries match the closed-form
        // antiderivative
        let mesh = Arc::new(Mesh::interval(4, 0.0, 1.0).unwrap());
        let coeffs = Coefficients::new(Arc::new(|_, p: Point| 1.0 + p[0] * p[0]), 1.0, 2.0).unwrap();
        let a = assemble_form(&mesh, &coeffs, 0.0).unwrap();
        // oracle: exact integral of (1+x^2) phi_i' phi_j' on each cell
        // for the uniform mesh: diagonal entry i = sum over the two adjacent
        // cells of (1/h^2) * int (1+x^2) dx
        let h = 0.25;
        let prim = |x: f64| x + x * x * x / 3.0;
        let dense = crate::linalg::DenseMatrix::from_sparse(&a);
        for (fi, &v) in mesh.free_vertices().iter().enumerate() {
            let x = mesh.vertex(v)[0];
            let want = (prim(x + h) - prim(x - h)) / (h * h);
            assert!(
                (dense.get(fi, fi) - want).abs() < 1e-12,
                "diagonal at x={x}"
            );
        }
    }

    #[test]
    fn diffusion_below_declared_bound_is_rejected() {
        let mesh = Arc::new(Mesh::interval(8, 0.0, 1.0).unwrap());
        let coeffs = Coefficients::new(Arc::new(|_, p: Point| 1.0 - p[0]), 0.5, 1.0).unwrap();
        match assemble_form(&mesh, &coeffs, 0.0) {
            Err(Error::Coefficient(_)) => {}
            other => panic!("expected a coefficient error, got {other:?}"),
        }
    }

    fn wiggly_coefficients() -> Coefficients {
        Coefficients::new(
            Arc::new(|t: f64, p: Point| 1.0 + 0.5 * (3.0 * p[0] + t).sin() * (2.0 * p[1]).cos()),
            0.5,
            1.5,
        )
        .unwrap()
        .with_convection(
            Arc::new(|_t: f64, p: Point| [p[1], -p[0]]),
            2.0f64.sqrt(),
        )
        .with_reaction(Arc::new(|t: f64, p: Point| -0.5 * (p[0] + p[1] + t).cos()), 0.5)
        .with_time_dependence()
    }

    #[test]
    fn garding_inequality_holds_discretely() {
        // with eta = a_lower/2 + b_sup^2/(2 a_lower) + c_sup and
        // alpha = a_lower/2, the shifted form dominates alpha * H1 for every
        // coefficient vector, exactly at the quadrature level
        let mesh = Arc::new(Mesh::square(6, -1.0, 1.0).unwrap());
        let coeffs = wiggly_coefficients();
        let t = 0.37;
        let a = assemble_form(&mesh, &coeffs, t).unwrap();
        let m = mass_matrix(&mesh);
        let g = h1_matrix(&mesh);
        let eta = coeffs.garding_shift();
        let alpha = coeffs.coercivity();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let v: Vec<f64> = (0..a.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let quad = dot(&v, &a.matvec(&v));
            let vmv = dot(&v, &m.matvec(&v));
            let vgv = dot(&v, &g.matvec(&v));
            assert!(
                quad + eta * vmv >= alpha * vgv - 1e-12 * vgv.max(1.0),
                "shifted form {} below {} * H1 energy {}",
                quad + eta * vmv,
                alpha,
                vgv
            );
        }
    }

    #[test]
    fn form_is_continuous_in_the_h1_norm() {
        let mesh = Arc::new(Mesh::square(5, -1.0, 1.0).unwrap());
        let coeffs = wiggly_coefficients();
        let a = assemble_form(&mesh, &coeffs, 1.2).unwrap();
        let g = h1_matrix(&mesh);
        let ca = coeffs.continuity();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let u: Vec<f64> = (0..a.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..a.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let uav = dot(&u, &a.matvec(&v));
            let nu = dot(&u, &g.matvec(&u)).sqrt();
            let nv = dot(&v, &g.matvec(&v)).sqrt();
            assert!(
                uav.abs() <= ca * nu * nv * (1.0 + 1e-12),
                "form value {uav} exceeds {ca} * {nu} * {nv}"
            );
        }
    }

    #[test]
    fn constant_load_gives_hat_integrals() {
        let mesh1 = Arc::new(Mesh::interval(5, 0.0, 1.0).unwrap());
        let rule1 = QuadratureRule::fine_for_dim(1);
        let f1 = assemble_load_fn(&mesh1, &rule1, |_| 1.0);
        for &v in &f1 {
            assert!((v - 0.2).abs() < 1e-14);
        }

        let mesh2 = Arc::new(Mesh::square(4, 0.0, 1.0).unwrap());
        let rule2 = QuadratureRule::fine_for_dim(2);
        let f2 = assemble_load_fn(&mesh2, &rule2, |_| 1.0);
        for &v in &f2 {
            assert!((v - 0.0625).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_load_matches_closed_form_in_1d() {
        // int x phi_i = x_i * h on a uniform interior stencil
        let mesh = Arc::new(Mesh::interval(8, 0.0, 1.0).unwrap());
        let rule = QuadratureRule::fine_for_dim(1);
        let f = assemble_load_fn(&mesh, &rule, |p| p[0]);
        for (fi, &v) in mesh.free_vertices().iter().enumerate() {
            let want = mesh.vertex(v)[0] * 0.125;
            assert!((f[fi] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn convection_free_forms_are_symmetric() {
        let mesh = Arc::new(Mesh::square(4, -1.0, 1.0).unwrap());
        let coeffs = Coefficients::new(
            Arc::new(|_, x: crate::mesh::Point| 1.0 + 0.5 * (x[0] * x[1]).cos()),
            0.5,
            1.5,
        )
        .unwrap()
        .with_reaction(Arc::new(|_, x: crate::mesh::Point| x[0] * x[0]), 1.0);
        let a = assemble_form(&mesh, &coeffs, 0.3).unwrap();
        for i in 0..a.n() {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let (cols_j, vals_j) = a.row(j);
                let pos = cols_j.iter().position(|&c| c == i).unwrap();
                assert!(
                    (v - vals_j[pos]).abs() < 1e-13,
                    "entry ({i},{j}) asymmetric: {v} vs {}",
                    vals_j[pos]
                );
            }
        }
    }
}
