//! Simplicial meshes: 1D segment chains and 2D structured triangulations,
//! with uniform refinement lineage and homogeneous-Dirichlet dof bookkeeping.
//!
//! Conventions: vertices are ordered lexicographically by coordinates, free
//! (interior) vertices inherit that order, triangles are counterclockwise,
//! and the inscribed-radius convention for a segment is half its length.

use std::io::{BufRead, Write};
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

pub type Point = [f64; 2];

fn dist(a: Point, b: Point) -> f64 {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    (dx * dx + dy * dy).sqrt()
}

/// Cell connectivity; vertex indices reference `Mesh::vertices`.
#[derive(Debug, Clone)]
pub enum Cells {
    Segments(Vec<[usize; 2]>),
    Triangles(Vec<[usize; 3]>),
}

impl Cells {
    pub fn len(&self) -> usize {
        match self {
            Cells::Segments(v) => v.len(),
            Cells::Triangles(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vertex_ids(&self, cell: usize) -> &[usize] {
        match self {
            Cells::Segments(v) => &v[cell],
            Cells::Triangles(v) => &v[cell],
        }
    }
}

/// Lazily assembled canonical matrices shared by norms and projections.
#[derive(Debug, Default)]
pub(crate) struct MatrixCache {
    pub(crate) mass: OnceLock<Arc<SparseMatrix>>,
    pub(crate) stiffness: OnceLock<Arc<SparseMatrix>>,
    pub(crate) h1: OnceLock<Arc<SparseMatrix>>,
}

/// Conforming simplicial partition of an interval or a square, immutable
/// after construction and shared through `Arc`.
#[derive(Debug)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Cells,
    boundary: Vec<bool>,
    free_vertices: Vec<usize>,
    free_index: Vec<Option<usize>>,
    h_max: f64,
    gamma: f64,
    parent: Option<Arc<Mesh>>,
    parent_cell: Vec<usize>,
    pub(crate) cache: MatrixCache,
}

impl Mesh {
    /// Uniform partition of [a, b] into `n_cells` segments.
    pub fn interval(n_cells: usize, a: f64, b: f64) -> Result<Mesh> {
        if n_cells < 2 {
            return Err(Error::Mesh(format!(
                "interval mesh needs at least 2 cells for an interior vertex, got {n_cells}"
            )));
        }
        if !(a < b) {
            return Err(Error::Mesh(format!("empty interval [{a}, {b}]")));
        }
        let h = (b - a) / n_cells as f64;
        let mut vertices = Vec::with_capacity(n_cells + 1);
        for i in 0..=n_cells {
            let x = if i == n_cells { b } else { a + i as f64 * h };
            vertices.push([x, 0.0]);
        }
        let cells = (0..n_cells).map(|i| [i, i + 1]).collect();
        Mesh::from_parts(1, vertices, Cells::Segments(cells), None, Vec::new())
    }

    /// Structured triangulation of [lo, hi]^2: n_per_side^2 squares, each split
    /// along the diagonal from its lower-left to its upper-right corner.
    pub fn square(n_per_side: usize, lo: f64, hi: f64) -> Result<Mesh> {
        if n_per_side < 2 {
            return Err(Error::Mesh(format!(
                "square mesh needs at least 2 cells per side, got {n_per_side}"
            )));
        }
        if !(lo < hi) {
            return Err(Error::Mesh(format!("empty square [{lo}, {hi}]^2")));
        }
        let n = n_per_side;
        let s = (hi - lo) / n as f64;
        let coord = |i: usize| if i == n { hi } else { lo + i as f64 * s };
        // index (i, j) -> i*(n+1)+j is lexicographic in (x, y)
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for i in 0..=n {
            for j in 0..=n {
                vertices.push([coord(i), coord(j)]);
            }
        }
        let idx = |i: usize, j: usize| i * (n + 1) + j;
        let mut cells = Vec::with_capacity(2 * n * n);
        for i in 0..n {
            for j in 0..n {
                let v00 = idx(i, j);
                let v10 = idx(i + 1, j);
                let v01 = idx(i, j + 1);
                let v11 = idx(i + 1, j + 1);
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }
        Mesh::from_parts(2, vertices, Cells::Triangles(cells), None, Vec::new())
    }

    /// `square`, additionally requiring the coordinate axes to be mesh lines
    /// so that cell-constant quadrant coefficients are representable.
    pub fn square_quadrant_aligned(n_per_side: usize, lo: f64, hi: f64) -> Result<Mesh> {
        if !n_per_side.is_multiple_of(2) {
            return Err(Error::Mesh(format!(
                "quadrant alignment needs an even cell count per side, got {n_per_side}"
            )));
        }
        if !(lo < 0.0 && 0.0 < hi) {
            return Err(Error::Mesh(format!(
                "quadrant alignment needs the origin inside ({lo}, {hi})"
            )));
        }
        let s = (hi - lo) / n_per_side as f64;
        let k = -lo / s;
        if (k - k.round()).abs() > 1e-12 {
            return Err(Error::Mesh(
                "quadrant alignment needs 0 on a grid line".into(),
            ));
        }
        Mesh::square(n_per_side, lo, hi)
    }

    /// Builds a mesh from explicit vertices and cells (e.g. a parsed dump).
    /// Triangles must be counterclockwise; connectivity must be manifold.
    pub fn from_raw(dim: usize, vertices: Vec<Point>, cells: Cells) -> Result<Mesh> {
        Mesh::from_parts(dim, vertices, cells, None, Vec::new())
    }

    fn from_parts(
        dim: usize,
        vertices: Vec<Point>,
        cells: Cells,
        parent: Option<Arc<Mesh>>,
        parent_cell: Vec<usize>,
    ) -> Result<Mesh> {
        match (dim, &cells) {
            (1, Cells::Segments(_)) | (2, Cells::Triangles(_)) => {}
            _ => return Err(Error::Mesh(format!("dimension {dim} does not match cell kind"))),
        }
        let nv = vertices.len();
        if cells.is_empty() {
            return Err(Error::Mesh("mesh has no cells".into()));
        }
        for v in &vertices {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(Error::Mesh("non-finite vertex coordinate".into()));
            }
        }

        let mut mesh = Mesh {
            dim,
            vertices,
            cells,
            boundary: Vec::new(),
            free_vertices: Vec::new(),
            free_index: Vec::new(),
            h_max: 0.0,
            gamma: f64::INFINITY,
            parent,
            parent_cell,
            cache: MatrixCache::default(),
        };

        // positive measure and shape constants
        for c in 0..mesh.n_cells() {
            let ids = mesh.cells.vertex_ids(c);
            for &v in ids {
                if v >= nv {
                    return Err(Error::Mesh(format!("cell {c} references vertex {v} >= {nv}")));
                }
            }
            let measure = mesh.cell_measure_signed(c);
            if !(measure > 0.0) {
                return Err(Error::Mesh(format!(
                    "cell {c} has nonpositive measure {measure} (triangles must be counterclockwise)"
                )));
            }
            let d = mesh.cell_diameter(c);
            let rho = mesh.cell_inradius(c);
            mesh.h_max = mesh.h_max.max(d);
            mesh.gamma = mesh.gamma.min(rho / d);
        }
        if !(mesh.gamma > 0.0 && mesh.gamma <= 1.0) {
            return Err(Error::Mesh(format!(
                "shape regularity {} outside (0, 1]",
                mesh.gamma
            )));
        }

        // topological boundary: 1D endpoints of the chain, 2D vertices of
        // edges owned by exactly one triangle
        let mut boundary = vec![false; nv];
        match &mesh.cells {
            Cells::Segments(segs) => {
                let mut count = vec![0usize; nv];
                for s in segs {
                    count[s[0]] += 1;
                    count[s[1]] += 1;
                }
                for (v, &c) in count.iter().enumerate() {
                    match c {
                        1 => boundary[v] = true,
                        2 => {}
                        _ => {
                            return Err(Error::Mesh(format!(
                                "vertex {v} belongs to {c} segments (non-manifold chain)"
                            )))
                        }
                    }
                }
            }
            Cells::Triangles(tris) => {
                use std::collections::HashMap;
                let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
                for t in tris {
                    for k in 0..3 {
                        let a = t[k];
                        let b = t[(k + 1) % 3];
                        let key = (a.min(b), a.max(b));
                        *edge_count.entry(key).or_insert(0) += 1;
                    }
                }
                for (&(a, b), &c) in &edge_count {
                    match c {
                        1 => {
                            boundary[a] = true;
                            boundary[b] = true;
                        }
                        2 => {}
                        _ => {
                            return Err(Error::Mesh(format!(
                                "edge ({a},{b}) shared by {c} triangles (violates conformity)"
                            )))
                        }
                    }
                }
            }
        }
        mesh.boundary = boundary;

        let mut free_index = vec![None; nv];
        let mut free_vertices = Vec::new();
        for v in 0..nv {
            if !mesh.boundary[v] {
                free_index[v] = Some(free_vertices.len());
                free_vertices.push(v);
            }
        }
        if free_vertices.is_empty() {
            return Err(Error::Mesh("mesh has no interior vertices".into()));
        }
        mesh.free_vertices = free_vertices;
        mesh.free_index = free_index;
        Ok(mesh)
    }

    /// Uniform (red) refinement: every segment is bisected, every triangle is
    /// split into four similar children through its edge midpoints. The child
    /// records its parent handle and a cell -> parent-cell map, and its vertex
    /// ordering is re-canonicalized lexicographically.
    pub fn refine_uniform(self: &Arc<Mesh>) -> Arc<Mesh> {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        let (cells, parent_cell) = match &self.cells {
            Cells::Segments(segs) => {
                let mut out = Vec::with_capacity(2 * segs.len());
                let mut par = Vec::with_capacity(2 * segs.len());
                for (c, s) in segs.iter().enumerate() {
                    let [a, b] = *s;
                    let m = vertices.len();
                    vertices.push([
                        (self.vertices[a][0] + self.vertices[b][0]) / 2.0,
                        0.0,
                    ]);
                    out.push([a, m]);
                    out.push([m, b]);
                    par.push(c);
                    par.push(c);
                }
                (Cells::Segments(out), par)
            }
            Cells::Triangles(tris) => {
                use std::collections::HashMap;
                let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
                let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
                    let key = (a.min(b), a.max(b));
                    *midpoint.entry(key).or_insert_with(|| {
                        let m = vertices.len();
                        let pa = vertices[a];
                        let pb = vertices[b];
                        vertices.push([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0]);
                        m
                    })
                };
                let mut out = Vec::with_capacity(4 * tris.len());
                let mut par = Vec::with_capacity(4 * tris.len());
                for (c, t) in tris.iter().enumerate() {
                    let [v0, v1, v2] = *t;
                    let m01 = mid(v0, v1, &mut vertices);
                    let m12 = mid(v1, v2, &mut vertices);
                    let m02 = mid(v0, v2, &mut vertices);
                    out.push([v0, m01, m02]);
                    out.push([m01, v1, m12]);
                    out.push([m02, m12, v2]);
                    out.push([m01, m12, m02]);
                    for _ in 0..4 {
                        par.push(c);
                    }
                }
                (Cells::Triangles(out), par)
            }
        };

        // restore lexicographic vertex order
        let mut order: Vec<usize> = (0..vertices.len()).collect();
        order.sort_by(|&p, &q| {
            let (a, b) = (vertices[p], vertices[q]);
            a[0].partial_cmp(&b[0])
                .unwrap()
                .then(a[1].partial_cmp(&b[1]).unwrap())
        });
        let mut remap = vec![0usize; vertices.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let sorted_vertices: Vec<Point> = order.iter().map(|&old| vertices[old]).collect();
        let cells = match cells {
            Cells::Segments(mut v) => {
                for s in &mut v {
                    for id in s.iter_mut() {
                        *id = remap[*id];
                    }
                }
                Cells::Segments(v)
            }
            Cells::Triangles(mut v) => {
                for t in &mut v {
                    for id in t.iter_mut() {
                        *id = remap[*id];
                    }
                }
                Cells::Triangles(v)
            }
        };
        debug_assert!(nv <= sorted_vertices.len());

        let mesh = Mesh::from_parts(
            self.dim,
            sorted_vertices,
            cells,
            Some(Arc::clone(self)),
            parent_cell,
        )
        .expect("uniform refinement of a valid mesh is valid");
        Arc::new(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Number of interior (free) vertices, i.e. the dof count.
    pub fn n_free(&self) -> usize {
        self.free_vertices.len()
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &Cells {
        &self.cells
    }

    pub fn cell_vertex_ids(&self, cell: usize) -> &[usize] {
        self.cells.vertex_ids(cell)
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_vertices()).filter(|&v| self.boundary[v])
    }

    /// Interior vertices in lexicographic order; position = dof index.
    pub fn free_vertices(&self) -> &[usize] {
        &self.free_vertices
    }

    /// Dof index of a vertex, `None` on the boundary.
    pub fn free_index(&self, v: usize) -> Option<usize> {
        self.free_index[v]
    }

    /// Largest cell diameter.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// min over cells of inradius/diameter (segments use rho = h/2).
    pub fn shape_regularity(&self) -> f64 {
        self.gamma
    }

    pub fn parent(&self) -> Option<&Arc<Mesh>> {
        self.parent.as_ref()
    }

    /// Parent cell of `cell` in the parent mesh (only for refined meshes).
    pub fn parent_cell(&self, cell: usize) -> Option<usize> {
        self.parent_cell.get(cell).copied()
    }

    fn cell_measure_signed(&self, cell: usize) -> f64 {
        match &self.cells {
            Cells::Segments(v) => {
                let [a, b] = v[cell];
                self.vertices[b][0] - self.vertices[a][0]
            }
            Cells::Triangles(v) => {
                let [a, b, c] = v[cell];
                let pa = self.vertices[a];
                let pb = self.vertices[b];
                let pc = self.vertices[c];
                ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])) / 2.0
            }
        }
    }

    /// Length (1D) or area (2D) of a cell.
    pub fn cell_measure(&self, cell: usize) -> f64 {
        self.cell_measure_signed(cell)
    }

    pub fn cell_diameter(&self, cell: usize) -> f64 {
        match &self.cells {
            Cells::Segments(v) => {
                let [a, b] = v[cell];
                (self.vertices[b][0] - self.vertices[a][0]).abs()
            }
            Cells::Triangles(v) => {
                let [a, b, c] = v[cell];
                let pa = self.vertices[a];
                let pb = self.vertices[b];
                let pc = self.vertices[c];
                dist(pa, pb).max(dist(pb, pc)).max(dist(pa, pc))
            }
        }
    }

    /// Inradius: area/semiperimeter for triangles, half-length for segments.
    pub fn cell_inradius(&self, cell: usize) -> f64 {
        match &self.cells {
            Cells::Segments(_) => self.cell_measure_signed(cell).abs() / 2.0,
            Cells::Triangles(v) => {
                let [a, b, c] = v[cell];
                let pa = self.vertices[a];
                let pb = self.vertices[b];
                let pc = self.vertices[c];
                let per = dist(pa, pb) + dist(pb, pc) + dist(pa, pc);
                2.0 * self.cell_measure_signed(cell) / per
            }
        }
    }

    pub fn cell_centroid(&self, cell: usize) -> Point {
        let ids = self.cells.vertex_ids(cell);
        let mut c = [0.0, 0.0];
        for &v in ids {
            c[0] += self.vertices[v][0];
            c[1] += self.vertices[v][1];
        }
        let k = ids.len() as f64;
        [c[0] / k, c[1] / k]
    }

    /// Constant gradients of the barycentric (hat) functions on a cell, one
    /// per local vertex. For segments only the x component is nonzero.
    pub fn cell_gradients(&self, cell: usize) -> [[f64; 2]; 3] {
        match &self.cells {
            Cells::Segments(v) => {
                let [a, b] = v[cell];
                let l = self.vertices[b][0] - self.vertices[a][0];
                [[-1.0 / l, 0.0], [1.0 / l, 0.0], [0.0, 0.0]]
            }
            Cells::Triangles(v) => {
                let [a, b, c] = v[cell];
                let pa = self.vertices[a];
                let pb = self.vertices[b];
                let pc = self.vertices[c];
                let area2 = 2.0 * self.cell_measure_signed(cell);
                let perp = |p: Point, q: Point| [-(q[1] - p[1]), q[0] - p[0]];
                let ga = perp(pb, pc);
                let gb = perp(pc, pa);
                let gc = perp(pa, pb);
                [
                    [ga[0] / area2, ga[1] / area2],
                    [gb[0] / area2, gb[1] / area2],
                    [gc[0] / area2, gc[1] / area2],
                ]
            }
        }
    }

    /// Physical position of a barycentric point in a cell.
    pub fn point_in_cell(&self, cell: usize, bary: &[f64]) -> Point {
        let ids = self.cells.vertex_ids(cell);
        let mut p = [0.0, 0.0];
        for (k, &v) in ids.iter().enumerate() {
            p[0] += bary[k] * self.vertices[v][0];
            p[1] += bary[k] * self.vertices[v][1];
        }
        p
    }

    /// Barycentric coordinates of a physical point with respect to a cell.
    pub fn barycentric(&self, cell: usize, p: Point) -> [f64; 3] {
        match &self.cells {
            Cells::Segments(v) => {
                let [a, b] = v[cell];
                let xa = self.vertices[a][0];
                let xb = self.vertices[b][0];
                let t = (p[0] - xa) / (xb - xa);
                [1.0 - t, t, 0.0]
            }
            Cells::Triangles(v) => {
                let [a, b, c] = v[cell];
                let pa = self.vertices[a];
                let pb = self.vertices[b];
                let pc = self.vertices[c];
                let area2 = 2.0 * self.cell_measure_signed(cell);
                let cross =
                    |o: Point, u: Point, w: Point| (u[0] - o[0]) * (w[1] - o[1]) - (u[1] - o[1]) * (w[0] - o[0]);
                let la = cross(pb, pc, p) / area2;
                let lb = cross(pc, pa, p) / area2;
                [la, lb, 1.0 - la - lb]
            }
        }
    }

    /// Walks the refinement lineage from a cell of `self` up to the matching
    /// cell of `ancestor`. Returns `None` when `ancestor` is not in the chain.
    pub fn ancestor_cell(self: &Arc<Mesh>, cell: usize, ancestor: &Arc<Mesh>) -> Option<usize> {
        if Arc::ptr_eq(self, ancestor) {
            return Some(cell);
        }
        let mut mesh = Arc::clone(self);
        let mut c = cell;
        while let Some(p) = mesh.parent.clone() {
            c = mesh.parent_cell(c)?;
            if Arc::ptr_eq(&p, ancestor) {
                return Some(c);
            }
            mesh = p;
        }
        None
    }

    /// Plain-text dump: header `dim n_vertices n_cells`, one vertex per line
    /// (coordinates at 17 significant digits), one cell per line (0-based).
    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.dim, self.n_vertices(), self.n_cells())?;
        for v in &self.vertices {
            if self.dim == 1 {
                writeln!(w, "{:.16e}", v[0])?;
            } else {
                writeln!(w, "{:.16e} {:.16e}", v[0], v[1])?;
            }
        }
        for c in 0..self.n_cells() {
            let ids = self.cells.vertex_ids(c);
            let line: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Parses the `write_text` format.
    pub fn read_text<R: BufRead>(r: &mut R) -> Result<Mesh> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty mesh dump".into()))??;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header `{header}`"))))
            .collect::<Result<_>>()?;
        if head.len() != 3 {
            return Err(Error::Parse(format!("bad header `{header}`")));
        }
        let (dim, nv, nc) = (head[0], head[1], head[2]);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated vertex block".into()))??;
            let coords: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad vertex `{line}`"))))
                .collect::<Result<_>>()?;
            if coords.len() != dim {
                return Err(Error::Parse(format!("vertex line `{line}` has wrong arity")));
            }
            vertices.push([coords[0], if dim == 2 { coords[1] } else { 0.0 }]);
        }
        let mut seg = Vec::new();
        let mut tri = Vec::new();
        for _ in 0..nc {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated cell block".into()))??;
            let ids: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad cell `{line}`"))))
                .collect::<Result<_>>()?;
            match (dim, ids.len()) {
                (1, 2) => seg.push([ids[0], ids[1]]),
                (2, 3) => tri.push([ids[0], ids[1], ids[2]]),
                _ => return Err(Error::Parse(format!("cell line `{line}` has wrong arity"))),
            }
        }
        let cells = if dim == 1 {
            Cells::Segments(seg)
        } else {
            Cells::Triangles(tri)
        };
        Mesh::from_raw(dim, vertices, cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_counts_and_sizes() {
        let m = Mesh::interval(4, 0.0, 1.0).unwrap();
        assert_eq!(m.n_vertices(), 5);
        assert_eq!(m.n_cells(), 4);
        assert_eq!(m.n_free(), 3);
        assert_eq!(m.h_max(), 0.25);
        assert_eq!(m.shape_regularity(), 0.5);
        assert_eq!(m.free_vertices(), &[1, 2, 3]);
    }

    #[test]
    fn interval_rejects_too_small() {
        assert!(matches!(Mesh::interval(1, 0.0, 1.0), Err(Error::Mesh(_))));
    }

    #[test]
    fn square_2x2_on_symmetric_box() {
        let m = Mesh::square(2, -1.0, 1.0).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_cells(), 8);
        assert_eq!(m.n_free(), 1);
        // the single interior vertex is the origin
        let v = m.free_vertices()[0];
        assert_eq!(m.vertex(v), [0.0, 0.0]);
        assert_eq!(m.h_max(), 2.0f64.sqrt());
    }

    #[test]
    fn square_4x4_counts() {
        let m = Mesh::square(4, -1.0, 1.0).unwrap();
        assert_eq!(m.n_vertices(), 25);
        assert_eq!(m.n_cells(), 32);
        assert_eq!(m.n_free(), 9);
    }

    #[test]
    fn quadrant_alignment_rejects_odd_side() {
        assert!(matches!(
            Mesh::square_quadrant_aligned(3, -1.0, 1.0),
            Err(Error::Mesh(_))
        ));
        assert!(Mesh::square_quadrant_aligned(4, -1.0, 1.0).is_ok());
    }

    #[test]
    fn right_isoceles_shape_constant() {
        // inradius/diameter of a right isoceles triangle is (sqrt(2)-1)/2,
        // independent of the leg length
        let m = Mesh::square(2, 0.0, 1.0).unwrap();
        let expected = (2.0f64.sqrt() - 1.0) / 2.0;
        assert!((m.shape_regularity() - expected).abs() < 1e-14);
    }

    #[test]
    fn measures_sum_to_domain() {
        let m1 = Mesh::interval(7, 0.0, 1.0).unwrap();
        let total1: f64 = (0..m1.n_cells()).map(|c| m1.cell_measure(c)).sum();
        assert!((total1 - 1.0).abs() < 1e-12);

        let m2 = Mesh::square(5, -1.0, 1.0).unwrap();
        let total2: f64 = (0..m2.n_cells()).map(|c| m2.cell_measure(c)).sum();
        assert!((total2 - 4.0).abs() < 1e-12 * 4.0);
    }

    #[test]
    fn boundary_vertices_lie_on_the_box() {
        let m = Mesh::square(4, -1.0, 1.0).unwrap();
        for v in m.boundary_vertices() {
            let p = m.vertex(v);
            let on_box = p[0] == -1.0 || p[0] == 1.0 || p[1] == -1.0 || p[1] == 1.0;
            assert!(on_box, "boundary vertex {p:?} not on the box");
        }
        for &v in m.free_vertices() {
            let p = m.vertex(v);
            assert!(p[0].abs() < 1.0 && p[1].abs() < 1.0);
        }
    }

    #[test]
    fn refine_halves_h_and_keeps_parent_vertices() {
        let m0 = Arc::new(Mesh::square(2, -1.0, 1.0).unwrap());
        let m1 = m0.refine_uniform();
        assert_eq!(m1.n_cells(), 4 * m0.n_cells());
        assert_eq!(m1.h_max(), m0.h_max() / 2.0);
        assert_eq!(m1.shape_regularity(), m0.shape_regularity());
        // child vertex set contains every parent vertex
        for v in m0.vertices() {
            assert!(
                m1.vertices().iter().any(|w| w == v),
                "parent vertex {v:?} missing in child"
            );
        }
        // lineage bookkeeping
        for c in 0..m1.n_cells() {
            assert!(m1.parent_cell(c).unwrap() < m0.n_cells());
        }
        let total: f64 = (0..m1.n_cells()).map(|c| m1.cell_measure(c)).sum();
        assert!((total - 4.0).abs() < 1e-12 * 4.0);
    }

    #[test]
    fn refine_interval_exact_halving() {
        let m0 = Arc::new(Mesh::interval(2, 0.0, 1.0).unwrap());
        let m1 = m0.refine_uniform();
        let m2 = m1.refine_uniform();
        assert_eq!(m1.h_max(), 0.25);
        assert_eq!(m2.h_max(), 0.125);
        assert_eq!(m2.n_cells(), 8);
        // vertex order stays lexicographic
        for w in m2.vertices().windows(2) {
            assert!(w[0][0] < w[1][0]);
        }
    }

    #[test]
    fn vertex_order_is_lexicographic_after_refinement() {
        let m0 = Arc::new(Mesh::square(2, 0.0, 1.0).unwrap());
        let m1 = m0.refine_uniform();
        for w in m1.vertices().windows(2) {
            let le = w[0][0] < w[1][0] || (w[0][0] == w[1][0] && w[0][1] < w[1][1]);
            assert!(le, "vertices {:?} {:?} out of order", w[0], w[1]);
        }
    }

    #[test]
    fn ancestor_cell_resolves_through_two_levels() {
        let m0 = Arc::new(Mesh::square(2, 0.0, 1.0).unwrap());
        let m1 = m0.refine_uniform();
        let m2 = m1.refine_uniform();
        for c in 0..m2.n_cells() {
            let a = m2.ancestor_cell(c, &m0).unwrap();
            assert!(a < m0.n_cells());
            // the centroid of the fine cell must lie in the ancestor cell
            let p = m2.cell_centroid(c);
            let bary = m0.barycentric(a, p);
            assert!(bary.iter().take(3).all(|&l| l > -1e-12));
        }
        assert!(m2.ancestor_cell(0, &Arc::new(Mesh::square(2, 0.0, 1.0).unwrap())).is_none());
    }

    #[test]
    fn from_raw_rejects_clockwise_triangle() {
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let cw = Cells::Triangles(vec![[0, 2, 1], [1, 2, 3]]);
        assert!(matches!(Mesh::from_raw(2, verts, cw), Err(Error::Mesh(_))));
    }

    #[test]
    fn dump_round_trip() {
        let m = Mesh::square(3, 0.0, 1.0).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = Mesh::read_text(&mut buf.as_slice()).unwrap();
        assert_eq!(back.n_vertices(), m.n_vertices());
        assert_eq!(back.n_cells(), m.n_cells());
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.h_max(), m.h_max());
        assert_eq!(back.n_free(), m.n_free());
    }
}
