//! Quadrature rules on reference simplices, stored in barycentric
//! coordinates so one rule serves every cell of a mesh.
//!
//! Weights sum to one: a rule computes the mean of the integrand over the
//! cell, and callers multiply by the cell measure. All rules used for
//! coefficient sampling keep their points strictly inside the cell, so
//! piecewise definitions with jumps along mesh lines are sampled on the
//! correct side.

/// Points (barycentric, third coordinate zero for segments) and weights.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean of `f` over the reference simplex (multiply by the cell measure
    /// to integrate).
    pub fn mean<F: Fn(&[f64; 3]) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    /// Two-point Gauss rule on a segment, exact through degree 3.
    pub fn segment_gauss2() -> QuadratureRule {
        let d = 1.0 / 3.0f64.sqrt();
        let xs = [(1.0 - d) / 2.0, (1.0 + d) / 2.0];
        QuadratureRule {
            points: xs.iter().map(|&x| [1.0 - x, x, 0.0]).collect(),
            weights: vec![0.5, 0.5],
        }
    }

    /// Three-point Gauss rule on a segment, exact through degree 5.
    pub fn segment_gauss3() -> QuadratureRule {
        let d = (3.0f64 / 5.0).sqrt();
        let xs = [0.5, (1.0 - d) / 2.0, (1.0 + d) / 2.0];
        let ws = [8.0 / 18.0, 5.0 / 18.0, 5.0 / 18.0];
        QuadratureRule {
            points: xs.iter().map(|&x| [1.0 - x, x, 0.0]).collect(),
            weights: ws.to_vec(),
        }
    }

    /// Interior three-point rule on a triangle, exact through degree 2.
    /// Uses the (2/3, 1/6, 1/6) permutation points rather than edge
    /// midpoints, which would straddle coefficient jumps on mesh lines.
    pub fn triangle_degree2_interior() -> QuadratureRule {
        let a = 2.0 / 3.0;
        let b = 1.0 / 6.0;
        QuadratureRule {
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![1.0 / 3.0; 3],
        }
    }

    /// Seven-point rule on a triangle, exact through degree 5.
    pub fn triangle_degree5() -> QuadratureRule {
        let s15 = 15.0f64.sqrt();
        let a = (6.0 + s15) / 21.0;
        let b = (6.0 - s15) / 21.0;
        let wa = (155.0 + s15) / 1200.0;
        let wb = (155.0 - s15) / 1200.0;
        let t = 1.0 / 3.0;
        QuadratureRule {
            points: vec![
                [t, t, t],
                [a, a, 1.0 - 2.0 * a],
                [a, 1.0 - 2.0 * a, a],
                [1.0 - 2.0 * a, a, a],
                [b, b, 1.0 - 2.0 * b],
                [b, 1.0 - 2.0 * b, b],
                [1.0 - 2.0 * b, b, b],
            ],
            weights: vec![9.0 / 40.0, wa, wa, wa, wb, wb, wb],
        }
    }

    /// Degree-2 interior rule of the matching dimension.
    pub fn base_for_dim(dim: usize) -> QuadratureRule {
        match dim {
            1 => QuadratureRule::segment_gauss2(),
            _ => QuadratureRule::triangle_degree2_interior(),
        }
    }

    /// Composite degree-5 rule on four congruent subcells: oversampled
    /// enough for the load, projection, and error integrals.
    pub fn fine_for_dim(dim: usize) -> QuadratureRule {
        match dim {
            1 => QuadratureRule::segment_gauss3().subdivided(1, 2),
            _ => QuadratureRule::triangle_degree5().subdivided(2, 1),
        }
    }

    /// Composite rule after `levels` rounds of uniform subdivision of the
    /// reference simplex (bisection for segments, four similar children for
    /// triangles). Points stay strictly interior if they start so.
    pub fn subdivided(&self, dim: usize, levels: usize) -> QuadratureRule {
        let mut rule = self.clone();
        for _ in 0..levels {
            rule = rule.subdivide_once(dim);
        }
        rule
    }

    fn subdivide_once(&self, dim: usize) -> QuadratureRule {
        // children as triples of barycentric vertex coordinates in the parent
        let e0 = [1.0, 0.0, 0.0];
        let e1 = [0.0, 1.0, 0.0];
        let e2 = [0.0, 0.0, 1.0];
        let mid = |p: [f64; 3], q: [f64; 3]| {
            [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]
        };
        let children: Vec<[[f64; 3]; 3]> = match dim {
            1 => {
                let m = mid(e0, e1);
                vec![[e0, m, e2], [m, e1, e2]]
            }
            _ => {
                let m01 = mid(e0, e1);
                let m12 = mid(e1, e2);
                let m02 = mid(e0, e2);
                vec![
                    [e0, m01, m02],
                    [m01, e1, m12],
                    [m02, m12, e2],
                    [m01, m12, m02],
                ]
            }
        };
        let scale = 1.0 / children.len() as f64;
        let mut points = Vec::with_capacity(self.len() * children.len());
        let mut weights = Vec::with_capacity(self.len() * children.len());
        for child in &children {
            for (p, w) in self.points.iter().zip(&self.weights) {
                let mut q = [0.0; 3];
                for k in 0..3 {
                    q[k] = p[0] * child[0][k] + p[1] * child[1][k] + p[2] * child[2][k];
                }
                points.push(q);
                weights.push(w * scale);
            }
        }
        QuadratureRule { points, weights }
    }
}
