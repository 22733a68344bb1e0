//! Piecewise linear functions on a mesh, vanishing on the boundary.
//!
//! Only the interior vertex values are stored; the coefficient vector is
//! ordered like `Mesh::free_vertices`, which is the ordering every matrix in
//! this crate uses.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// A P1 function with homogeneous Dirichlet boundary values.
#[derive(Debug, Clone)]
pub struct FeFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl FeFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<FeFunction> {
        if values.len() != mesh.n_free() {
            return Err(Error::InvalidInput(format!(
                "coefficient vector has length {}, mesh has {} interior vertices",
                values.len(),
                mesh.n_free()
            )));
        }
        Ok(FeFunction { mesh, values })
    }

    pub fn zero(mesh: Arc<Mesh>) -> FeFunction {
        let n = mesh.n_free();
        FeFunction {
            mesh,
            values: vec![0.0; n],
        }
    }

    /// Nodal interpolant: samples `f` at the interior vertices.
    pub fn interpolate<F: Fn(Point) -> f64>(mesh: Arc<Mesh>, f: F) -> FeFunction {
        let values = mesh
            .free_vertices()
            .iter()
            .map(|&v| f(mesh.vertex(v)))
            .collect();
        FeFunction { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at a vertex; zero on the boundary.
    pub fn vertex_value(&self, v: usize) -> f64 {
        match self.mesh.free_index(v) {
            Some(i) => self.values[i],
            None => 0.0,
        }
    }

    /// Value at a barycentric point of a cell.
    pub fn eval_in_cell(&self, cell: usize, bary: &[f64; 3]) -> f64 {
        let ids = self.mesh.cell_vertex_ids(cell);
        ids.iter()
            .enumerate()
            .map(|(k, &v)| bary[k] * self.vertex_value(v))
            .sum()
    }

    /// Constant gradient on a cell.
    pub fn grad_in_cell(&self, cell: usize) -> [f64; 2] {
        let ids = self.mesh.cell_vertex_ids(cell);
        let grads = self.mesh.cell_gradients(cell);
        let mut g = [0.0, 0.0];
        for (k, &v) in ids.iter().enumerate() {
            let u = self.vertex_value(v);
            g[0] += u * grads[k][0];
            g[1] += u * grads[k][1];
        }
        g
    }
}
