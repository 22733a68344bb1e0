//! Sparse CSR matrices, iterative solvers, and a dense LU oracle.
//!
//! The iterative kernels are Jacobi-preconditioned CG for SPD systems and
//! BiCGStab for general ones; BiCGStab falls back to dense LU for n <= 2000
//! when it stalls. The dense LU is also exposed directly as the reference
//! oracle for cross-checking the iterative paths.

use crate::error::{Error, Result};

/// Iteration cap for the iterative solvers, as a multiple of n.
const ITER_CAP_FACTOR: usize = 4;
/// Largest system the dense fallback/oracle accepts.
pub const DENSE_LIMIT: usize = 2000;
/// Partial-pivot magnitude below which LU reports singularity.
const PIVOT_TOL: f64 = 1e-14;
/// Relative residual target used when a caller does not pick its own.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Outcome of an iterative (or fallback) solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_rel: f64,
    pub converged: bool,
}

/// Square sparse matrix in compressed sparse row form.
///
/// Invariants: `row_offsets` has length n+1 and is nondecreasing; column
/// indices are strictly increasing within each row.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "triplet ({i},{j}) out of bounds for n={n}"
                )));
            }
            rows[i].push((j, v));
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            n,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec: dimension mismatch");
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                s += v * x[j];
            }
            y[i] = s;
        }
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            if let Ok(k) = cols.binary_search(&i) {
                d[i] = vals[k];
            }
        }
        d
    }

    /// self + alpha * other, merging sparsity patterns.
    pub fn add_scaled(&self, other: &SparseMatrix, alpha: f64) -> SparseMatrix {
        assert_eq!(self.n, other.n, "add_scaled: dimension mismatch");
        let mut row_offsets = Vec::with_capacity(self.n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..self.n {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let ja = ca.get(p).copied().unwrap_or(usize::MAX);
                let jb = cb.get(q).copied().unwrap_or(usize::MAX);
                if ja < jb {
                    col_indices.push(ja);
                    values.push(va[p]);
                    p += 1;
                } else if jb < ja {
                    col_indices.push(jb);
                    values.push(alpha * vb[q]);
                    q += 1;
                } else {
                    col_indices.push(ja);
                    values.push(va[p] + alpha * vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix {
            n: self.n,
            row_offsets,
            col_indices,
            values,
        }
    }

    fn residual_rel(&self, x: &[f64], b: &[f64], bnorm: f64) -> f64 {
        let ax = self.matvec(x);
        let mut r2 = 0.0;
        for i in 0..self.n {
            let d = b[i] - ax[i];
            r2 += d * d;
        }
        r2.sqrt() / bnorm
    }

    /// Solves A x = b for symmetric positive definite A with Jacobi-preconditioned
    /// conjugate gradients. Convergence: ||Ax - b|| <= tol_rel * ||b||, confirmed
    /// on the recomputed true residual. Errors after 4n iterations.
    pub fn solve_spd(&self, b: &[f64], tol_rel: f64) -> Result<(Vec<f64>, SolveReport)> {
        self.solve_spd_guess(b, tol_rel, None)
    }

    /// `solve_spd` with an optional warm-start guess.
    pub fn solve_spd_guess(
        &self,
        b: &[f64],
        tol_rel: f64,
        x0: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolveReport)> {
        let n = self.n;
        assert_eq!(b.len(), n, "solve_spd: rhs dimension mismatch");
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok((
                vec![0.0; n],
                SolveReport {
                    iterations: 0,
                    residual_rel: 0.0,
                    converged: true,
                },
            ));
        }
        let dinv: Vec<f64> = self
            .diagonal()
            .iter()
            .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
            .collect();

        let mut x = match x0 {
            Some(g) => {
                assert_eq!(g.len(), n);
                g.to_vec()
            }
            None => vec![0.0; n],
        };
        let mut r = b.to_vec();
        if x0.is_some() {
            let ax = self.matvec(&x);
            for i in 0..n {
                r[i] -= ax[i];
            }
        }
        let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(ri, di)| ri * di).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let cap = ITER_CAP_FACTOR * n.max(1);
        let target = tol_rel * bnorm;

        let mut iterations = 0;
        loop {
            if norm2(&r) <= target {
                // confirm against the true residual before accepting
                let rr = self.residual_rel(&x, b, bnorm);
                if rr <= tol_rel {
                    return Ok((
                        x,
                        SolveReport {
                            iterations,
                            residual_rel: rr,
                            converged: true,
                        },
                    ));
                }
                // drift: refresh the recursion and keep iterating
                let ax = self.matvec(&x);
                for i in 0..n {
                    r[i] = b[i] - ax[i];
                }
                for i in 0..n {
                    z[i] = r[i] * dinv[i];
                }
                p.copy_from_slice(&z);
                rz = dot(&r, &z);
            }
            if iterations >= cap {
                let rr = self.residual_rel(&x, b, bnorm);
                return Err(Error::NoConvergence {
                    context: "cg".into(),
                    iterations,
                    residual_rel: rr,
                });
            }
            let ap = self.matvec(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::NoConvergence {
                    context: "cg (matrix not positive definite along search direction)".into(),
                    iterations,
                    residual_rel: self.residual_rel(&x, b, bnorm),
                });
            }
            let alpha = rz / pap;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            for i in 0..n {
                z[i] = r[i] * dinv[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            rz = rz_new;
            iterations += 1;
        }
    }

    /// Solves A x = b for general (possibly nonsymmetric) A with
    /// Jacobi-preconditioned BiCGStab. On breakdown or iteration-cap
    /// exhaustion, falls back to dense LU when n <= 2000; otherwise errors.
    pub fn solve_general(&self, b: &[f64], tol_rel: f64) -> Result<(Vec<f64>, SolveReport)> {
        self.solve_general_guess(b, tol_rel, None)
    }

    /// `solve_general` with an optional warm-start guess.
    pub fn solve_general_guess(
        &self,
        b: &[f64],
        tol_rel: f64,
        x0: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolveReport)> {
        let n = self.n;
        assert_eq!(b.len(), n, "solve_general: rhs dimension mismatch");
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok((
                vec![0.0; n],
                SolveReport {
                    iterations: 0,
                    residual_rel: 0.0,
                    converged: true,
                },
            ));
        }
        let dinv: Vec<f64> = self
            .diagonal()
            .iter()
            .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&dinv).map(|(a, d)| a * d).collect() };

        let mut x = match x0 {
            Some(g) => g.to_vec(),
            None => vec![0.0; n],
        };
        let mut r = b.to_vec();
        if x0.is_some() {
            let ax = self.matvec(&x);
            for i in 0..n {
                r[i] -= ax[i];
            }
        }
        let rhat = r.clone();
        let mut rho = 1.0f64;
        let mut alpha = 1.0f64;
        let mut omega = 1.0f64;
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let cap = ITER_CAP_FACTOR * n.max(1);
        let target = tol_rel * bnorm;
        let breakdown = 1e-300;

        let mut iterations = 0;
        loop {
            if norm2(&r) <= target {
                let rr = self.residual_rel(&x, b, bnorm);
                if rr <= tol_rel {
                    return Ok((
                        x,
                        SolveReport {
                            iterations,
                            residual_rel: rr,
                            converged: true,
                        },
                    ));
                }
            }
            if iterations >= cap {
                return self.dense_fallback(b, tol_rel, iterations, bnorm);
            }
            let rho_new = dot(&rhat, &r);
            if rho_new.abs() < breakdown || omega.abs() < breakdown {
                return self.dense_fallback(b, tol_rel, iterations, bnorm);
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            let phat = precond(&p);
            v = self.matvec(&phat);
            let rv = dot(&rhat, &v);
            if rv.abs() < breakdown {
                return self.dense_fallback(b, tol_rel, iterations, bnorm);
            }
            alpha = rho / rv;
            let mut s = r.clone();
            axpy(-alpha, &v, &mut s);
            if norm2(&s) <= target {
                axpy(alpha, &phat, &mut x);
                let rr = self.residual_rel(&x, b, bnorm);
                if rr <= tol_rel {
                    return Ok((
                        x,
                        SolveReport {
                            iterations: iterations + 1,
                            residual_rel: rr,
                            converged: true,
                        },
                    ));
                }
                r = s;
                iterations += 1;
                continue;
            }
            let shat = precond(&s);
            let t = self.matvec(&shat);
            let tt = dot(&t, &t);
            if tt < breakdown {
                return self.dense_fallback(b, tol_rel, iterations, bnorm);
            }
            omega = dot(&t, &s) / tt;
            axpy(alpha, &phat, &mut x);
            axpy(omega, &shat, &mut x);
            r = s;
            axpy(-omega, &t, &mut r);
            iterations += 1;
        }
    }

    fn dense_fallback(
        &self,
        b: &[f64],
        tol_rel: f64,
        iterations: usize,
        bnorm: f64,
    ) -> Result<(Vec<f64>, SolveReport)> {
        if self.n > DENSE_LIMIT {
            return Err(Error::NoConvergence {
                context: format!("bicgstab (n={} too large for dense fallback)", self.n),
                iterations,
                residual_rel: f64::NAN,
            });
        }
        let dense = DenseMatrix::from_sparse(self);
        let x = solve_dense_oracle(&dense, b)?;
        let rr = self.residual_rel(&x, b, bnorm);
        Ok((
            x,
            SolveReport {
                iterations,
                residual_rel: rr,
                converged: rr <= tol_rel,
            },
        ))
    }
}

/// Dense row-major square matrix, used by the LU oracle and fallback path.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = DenseMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "from_rows: ragged input");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn from_sparse(a: &SparseMatrix) -> Self {
        let n = a.n();
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m.data[i * n + j] = v;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
}

/// Solves A x = b by dense LU with partial pivoting. Reference oracle for the
/// iterative solvers; rejects n > 2000 and reports singularity when the best
/// pivot magnitude drops below 1e-14.
pub fn solve_dense_oracle(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    if n > DENSE_LIMIT {
        return Err(Error::InvalidInput(format!(
            "dense oracle limited to n <= {DENSE_LIMIT}, got {n}"
        )));
    }
    assert_eq!(b.len(), n, "solve_dense_oracle: rhs dimension mismatch");
    let mut lu = a.data.clone();
    let mut x = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut piv = k;
        let mut best = lu[perm[k] * n + k].abs();
        for r in (k + 1)..n {
            let v = lu[perm[r] * n + k].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < PIVOT_TOL {
            return Err(Error::Singular(format!(
                "pivot {best:.3e} below {PIVOT_TOL:.0e} at column {k}"
            )));
        }
        perm.swap(k, piv);
        let pk = perm[k];
        let pivot = lu[pk * n + k];
        for r in (k + 1)..n {
            let pr = perm[r];
            let factor = lu[pr * n + k] / pivot;
            lu[pr * n + k] = factor;
            for c in (k + 1)..n {
                lu[pr * n + c] -= factor * lu[pk * n + c];
            }
        }
    }

    // forward substitution with the permuted rows
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = x[perm[i]];
        for j in 0..i {
            s -= lu[perm[i] * n + j] * y[j];
        }
        y[i] = s;
    }
    // back substitution
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in (i + 1)..n {
            s -= lu[perm[i] * n + j] * x[j];
        }
        x[i] = s / lu[perm[i] * n + i];
    }
    Ok(x)
}
