//! Problem catalog: smooth manufactured solutions, a rough sine-series
//! solution whose space-time norms are exactly summable, and a
//! checkerboard-coefficient benchmark with a weak-form manufactured load.
//!
//! Loads come in four flavours: a pointwise density integrated by
//! quadrature, the weak recipe <f(t), v> = (u'(t), v) + B(t; u(t), v) built
//! from the declared exact solution, a mode-wise sine-series load with
//! closed-form hat integrals, and a fixed coefficient vector. The weak
//! recipe never forms distributional interface terms, so it stays valid for
//! discontinuous diffusion.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::assembly::{assemble_load_fn, Coefficients};
use crate::error::{Error, Result};
use crate::mesh::{Cells, Mesh, Point};
use crate::quadrature::QuadratureRule;

pub type SpaceFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type SpaceGradFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, Point) -> f64 + Send + Sync>;

/// Default mode-decay parameter of the rough series solution.
pub const SPECTRAL_EPS_DEFAULT: f64 = 0.05;
/// Default series truncation used by the catalog entries.
pub const SPECTRAL_N_MAX_DEFAULT: usize = 512;
/// Default checkerboard contrast used by the catalog entry.
pub const CHECKERBOARD_EPS_DEFAULT: f64 = 0.1;
/// A declared series norm is certified when its truncation tail is below
/// this fraction of the declared value.
pub const NORM_CERTIFY_REL: f64 = 1e-10;

/// Space-time norms a solution can declare. `U*` slots weigh the solution
/// itself, `Dt*`/`Dtt*` its first and second time derivatives; the trailing
/// part names the spatial norm inside the L2-in-time integral.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NormSlot {
    UL2L2,
    UL2H1,
    UL2H2,
    DtL2L2,
    DtL2H1,
    DtL2Hm1,
    DttL2Hm1,
}

impl NormSlot {
    pub fn all() -> [NormSlot; 7] {
        [
            NormSlot::UL2L2,
            NormSlot::UL2H1,
            NormSlot::UL2H2,
            NormSlot::DtL2L2,
            NormSlot::DtL2H1,
            NormSlot::DtL2Hm1,
            NormSlot::DttL2Hm1,
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            NormSlot::UL2L2 => "u_L2L2",
            NormSlot::UL2H1 => "u_L2H1",
            NormSlot::UL2H2 => "u_L2H2",
            NormSlot::DtL2L2 => "dt_L2L2",
            NormSlot::DtL2H1 => "dt_L2H1",
            NormSlot::DtL2Hm1 => "dt_L2Hm1",
            NormSlot::DttL2Hm1 => "dtt_L2Hm1",
        }
    }
}

/// A declared norm of a truncated series solution. `value` is the exact
/// norm of the truncated object; `tail_bound` bounds its distance to the
/// untruncated limit (infinite when the full series diverges), and
/// `certified` records whether that distance is below `NORM_CERTIFY_REL`
/// relative to the value.
#[derive(Clone, Copy, Debug)]
pub struct DeclaredNorm {
    pub value: f64,
    pub tail_bound: f64,
    pub certified: bool,
}

/// Rough 1D solution sum_{k<=n_max} A_k sin(k pi x) sin(k^p pi t) with
/// amplitudes A_k = (1+k^2)^(-5/4-eps). Mode orthogonality makes every
/// declared space-time norm an explicit per-mode sum.
#[derive(Clone, Debug)]
pub struct SpectralSolution {
    p: f64,
    eps: f64,
    n_max: usize,
    t_end: f64,
    amps: Vec<f64>,
    omegas: Vec<f64>,
    kappas: Vec<f64>,
}

fn mode_amplitude(eps: f64, k: usize) -> f64 {
    let k2 = 1.0 + (k as f64) * (k as f64);
    k2.powf(-1.25 - eps)
}

impl SpectralSolution {
    /// `p` is the temporal frequency exponent (mode k oscillates at
    /// frequency k^p pi); only p = 2 and p = 3/2 are admitted.
    pub fn new(p: f64, eps: f64, n_max: usize) -> Result<SpectralSolution> {
        if p != 2.0 && p != 1.5 {
            return Err(Error::InvalidInput(format!(
                "frequency exponent must be 2 or 1.5, got {p}"
            )));
        }
        if !(eps > 0.0 && eps <= 0.25) {
            return Err(Error::InvalidInput(format!(
                "decay parameter must lie in (0, 0.25], got {eps}"
            )));
        }
        if n_max == 0 {
            return Err(Error::InvalidInput("series needs at least one mode".into()));
        }
        let amps = (1..=n_max).map(|k| mode_amplitude(eps, k)).collect();
        let omegas = (1..=n_max).map(|k| PI * (k as f64).powf(p)).collect();
        let kappas = (1..=n_max).map(|k| PI * k as f64).collect();
        Ok(SpectralSolution {
            p,
            eps,
            n_max,
            t_end: 1.0,
            amps,
            omegas,
            kappas,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn amps(&self) -> &[f64] {
        &self.amps
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let mut s = 0.0;
        for k in 0..self.n_max {
            s += self.amps[k] * (self.kappas[k] * x).sin() * (self.omegas[k] * t).sin();
        }
        s
    }

    pub fn dt(&self, t: f64, x: f64) -> f64 {
        let mut s = 0.0;
        for k in 0..self.n_max {
            s += self.amps[k]
                * self.omegas[k]
                * (self.kappas[k] * x).sin()
                * (self.omegas[k] * t).cos();
        }
        s
    }

    pub fn dx(&self, t: f64, x: f64) -> f64 {
        let mut s = 0.0;
        for k in 0..self.n_max {
            s += self.amps[k]
                * self.kappas[k]
                * (self.kappas[k] * x).cos()
                * (self.omegas[k] * t).sin();
        }
        s
    }

    /// Pointwise load density f = u' - u_xx of the truncated series.
    pub fn load_density(&self, t: f64, x: f64) -> f64 {
        let mut s = 0.0;
        for k in 0..self.n_max {
            let g = self.omegas[k] * (self.omegas[k] * t).cos()
                + self.kappas[k] * self.kappas[k] * (self.omegas[k] * t).sin();
            s += self.amps[k] * g * (self.kappas[k] * x).sin();
        }
        s
    }

    pub fn declared(&self, slot: NormSlot) -> DeclaredNorm {
        declared_norm(self.p, self.eps, self.n_max, self.t_end, slot)
    }

    /// Partial sum of the mode-wise lower bound for the time-integrated
    /// H^{3 eps} norm of u'. Each mode contributes its amplitude times
    /// frequency, the H^{3 eps} norm of its spatial profile, and a lower
    /// bound for the integral of |cos| over the complete half-periods in
    /// [0, t_end]; the terms decay only like k^(eps - 1/2), so these sums
    /// grow without bound.
    pub fn dt_h3eps_partial_sum(&self, upto: usize) -> f64 {
        let mut s = 0.0;
        for k in 1..=upto {
            let kf = k as f64;
            let amp = mode_amplitude(self.eps, k);
            let omega = PI * kf.powf(self.p);
            let kappa2 = (PI * kf) * (PI * kf);
            let half_periods = (omega * self.t_end / PI).floor();
            let time_lower = 2.0 * half_periods / omega;
            let spatial = ((1.0 + kappa2).powf(3.0 * self.eps) / 2.0).sqrt();
            s += amp * omega * spatial * time_lower;
        }
        s
    }
}

/// Exact per-mode term of the squared series norm in a slot: the spatial
/// factor of sin(k pi x) in the slot's spatial norm times the exact time
/// integral of sin^2 or cos^2 of the mode frequency.
fn mode_term(p: f64, eps: f64, t_end: f64, k: usize, slot: NormSlot) -> f64 {
    let kf = k as f64;
    let a2 = {
        let b = 1.0 + kf * kf;
        b.powf(-2.5 - 2.0 * eps)
    };
    let kappa2 = (PI * kf) * (PI * kf);
    let omega = PI * kf.powf(p);
    let osc = (2.0 * omega * t_end).sin() / (4.0 * omega);
    let s_t = t_end / 2.0 - osc;
    let c_t = t_end / 2.0 + osc;
    let weight = match slot {
        NormSlot::UL2L2 => s_t,
        NormSlot::UL2H1 => (1.0 + kappa2) * s_t,
        NormSlot::UL2H2 => kappa2 * kappa2 * s_t,
        NormSlot::DtL2L2 => omega * omega * c_t,
        NormSlot::DtL2H1 => omega * omega * (1.0 + kappa2) * c_t,
        NormSlot::DtL2Hm1 => omega * omega / (1.0 + kappa2) * c_t,
        NormSlot::DttL2Hm1 => omega.powi(4) / (1.0 + kappa2) * s_t,
    };
    0.5 * a2 * weight
}

/// Decay exponent q and constant c such that the k-th squared-norm term is
/// bounded by c * k^(-q); the tail beyond n_max is then bounded by the
/// integral comparison c * n_max^(1-q) / (q-1) whenever q > 1.
fn tail_shape(p: f64, eps: f64, t_end: f64, slot: NormSlot) -> (f64, f64) {
    let time_cap = t_end / 2.0 + 1.0 / (4.0 * PI);
    let base = 0.5 * time_cap;
    let pi2 = PI * PI;
    match slot {
        NormSlot::UL2L2 => (5.0 + 4.0 * eps, base),
        NormSlot::UL2H1 => (3.0 + 4.0 * eps, base * (1.0 + pi2)),
        NormSlot::UL2H2 => (1.0 + 4.0 * eps, base * pi2 * pi2),
        NormSlot::DtL2L2 => (5.0 + 4.0 * eps - 2.0 * p, base * pi2),
        NormSlot::DtL2H1 => (3.0 + 4.0 * eps - 2.0 * p, base * pi2 * (1.0 + pi2)),
        NormSlot::DtL2Hm1 => (7.0 + 4.0 * eps - 2.0 * p, base),
        NormSlot::DttL2Hm1 => (7.0 + 4.0 * eps - 4.0 * p, base * pi2),
    }
}

/// Exact norm of the truncated series in the given slot, with the analytic
/// tail bound and certification flag. Streams the modes in ascending order,
/// so the result is deterministic and needs no per-mode storage.
pub fn declared_norm(p: f64, eps: f64, n_max: usize, t_end: f64, slot: NormSlot) -> DeclaredNorm {
    let mut sum = 0.0;
    for k in 1..=n_max {
        sum += mode_term(p, eps, t_end, k, slot);
    }
    let value = sum.sqrt();
    let (q, c) = tail_shape(p, eps, t_end, slot);
    let tail_bound = if q > 1.0 {
        (c * (n_max as f64).powf(1.0 - q) / (q - 1.0)).sqrt()
    } else {
        f64::INFINITY
    };
    let certified = tail_bound.is_finite() && value > 0.0 && tail_bound <= NORM_CERTIFY_REL * value;
    DeclaredNorm {
        value,
        tail_bound,
        certified,
    }
}

/// Exact solution of a catalog problem: either a product sigma(t) * U(x)
/// or the truncated rough series.
#[derive(Clone)]
pub enum ExactSolution {
    Separable {
        sigma: TimeFn,
        dsigma: TimeFn,
        space: SpaceFn,
        space_grad: SpaceGradFn,
    },
    Series(Arc<SpectralSolution>),
}

impl ExactSolution {
    pub fn eval(&self, t: f64, x: Point) -> f64 {
        match self {
            ExactSolution::Separable { sigma, space, .. } => sigma(t) * space(x),
            ExactSolution::Series(s) => s.eval(t, x[0]),
        }
    }

    pub fn dt(&self, t: f64, x: Point) -> f64 {
        match self {
            ExactSolution::Separable { dsigma, space, .. } => dsigma(t) * space(x),
            ExactSolution::Series(s) => s.dt(t, x[0]),
        }
    }

    pub fn grad(&self, t: f64, x: Point) -> [f64; 2] {
        match self {
            ExactSolution::Separable {
                sigma, space_grad, ..
            } => {
                let g = space_grad(x);
                let s = sigma(t);
                [s * g[0], s * g[1]]
            }
            ExactSolution::Series(s) => [s.dx(t, x[0]), 0.0],
        }
    }

    pub fn series(&self) -> Option<&Arc<SpectralSolution>> {
        match self {
            ExactSolution::Series(s) => Some(s),
            _ => None,
        }
    }
}

/// How a problem's right-hand side is defined.
#[derive(Clone)]
pub enum Load {
    /// Pointwise density f(t, x), integrated against the basis.
    Pointwise(SpaceTimeFn),
    /// <f(t), v> = (u'(t), v) + B(t; u(t), v) for the declared exact
    /// solution; consistent with it by construction.
    WeakResidual,
    /// Mode-wise load of the truncated sine series (1D only).
    SineSeries,
    /// A fixed coefficient vector on the free vertices.
    Vector(Vec<f64>),
}

/// A parabolic initial-boundary value problem with homogeneous Dirichlet
/// data: coefficients, horizon, load, initial state, and (optionally) the
/// exact solution it was manufactured from.
pub struct Problem {
    pub name: String,
    pub dim: usize,
    pub t_end: f64,
    pub coefficients: Coefficients,
    pub initial: SpaceFn,
    pub load: Load,
    pub exact: Option<ExactSolution>,
    domain: (f64, f64),
    quadrant_aligned: bool,
    base_n: usize,
}

impl Problem {
    /// Mesh for refinement level `level`: the base resolution doubled
    /// `level` times on the problem's own domain.
    pub fn base_mesh(&self, level: usize) -> Result<Arc<Mesh>> {
        let n = self
            .base_n
            .checked_shl(level as u32)
            .ok_or_else(|| Error::InvalidInput(format!("refinement level {level} overflows")))?;
        let (lo, hi) = self.domain;
        let mesh = match (self.dim, self.quadrant_aligned) {
            (1, _) => Mesh::interval(n, lo, hi)?,
            (2, false) => Mesh::square(n, lo, hi)?,
            (2, true) => Mesh::square_quadrant_aligned(n, lo, hi)?,
            _ => return Err(Error::InvalidInput(format!("bad dimension {}", self.dim))),
        };
        Ok(Arc::new(mesh))
    }

    /// Cells per side of the level-0 mesh; doubles with each level.
    pub fn base_resolution(&self) -> usize {
        self.base_n
    }

    pub fn load_assembler(&self, mesh: &Arc<Mesh>) -> Result<LoadAssembler> {
        LoadAssembler::new(self, mesh)
    }
}

/// u = sin(pi x) sin(t) on (0,1) with unit diffusion; weak-recipe load.
pub fn make_smooth_1d() -> Problem {
    Problem {
        name: "smooth1d".into(),
        dim: 1,
        t_end: 1.0,
        coefficients: Coefficients::laplacian(),
        initial: Arc::new(|_| 0.0),
        load: Load::WeakResidual,
        exact: Some(ExactSolution::Separable {
            sigma: Arc::new(f64::sin),
            dsigma: Arc::new(f64::cos),
            space: Arc::new(|x: Point| (PI * x[0]).sin()),
            space_grad: Arc::new(|x: Point| [PI * (PI * x[0]).cos(), 0.0]),
        }),
        domain: (0.0, 1.0),
        quadrant_aligned: false,
        base_n: 4,
    }
}

/// u = sin(pi x1) sin(pi x2) sin(t) on the unit square; weak-recipe load.
pub fn make_smooth_2d() -> Problem {
    Problem {
        name: "smooth2d".into(),
        dim: 2,
        t_end: 1.0,
        coefficients: Coefficients::laplacian(),
        initial: Arc::new(|_| 0.0),
        load: Load::WeakResidual,
        exact: Some(ExactSolution::Separable {
            sigma: Arc::new(f64::sin),
            dsigma: Arc::new(f64::cos),
            space: Arc::new(|x: Point| (PI * x[0]).sin() * (PI * x[1]).sin()),
            space_grad: Arc::new(|x: Point| {
                [
                    PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                    PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
                ]
            }),
        }),
        domain: (0.0, 1.0),
        quadrant_aligned: false,
        base_n: 4,
    }
}

/// 1D heat problem whose exact solution is the truncated rough series with
/// frequency exponent `p` in {2, 3/2} and decay parameter `eps`.
pub fn make_spectral(p: f64, eps: f64, n_max: usize) -> Result<Problem> {
    let sol = Arc::new(SpectralSolution::new(p, eps, n_max)?);
    let name = if p == 2.0 { "spectral-p2" } else { "spectral-p32" };
    Ok(Problem {
        name: name.into(),
        dim: 1,
        t_end: sol.t_end(),
        coefficients: Coefficients::laplacian(),
        initial: Arc::new(|_| 0.0),
        load: Load::SineSeries,
        exact: Some(ExactSolution::Series(sol)),
        domain: (0.0, 1.0),
        quadrant_aligned: false,
        base_n: 16,
    })
}

/// Like `make_spectral`, but rejects truncations whose tail in any of the
/// `required` norms is not certified below `NORM_CERTIFY_REL`.
pub fn make_spectral_certified(
    p: f64,
    eps: f64,
    n_max: usize,
    required: &[NormSlot],
) -> Result<Problem> {
    // Validate the parameters first so the slot check sees admissible ones.
    SpectralSolution::new(p, eps, 1)?;
    for &slot in required {
        let d = declared_norm(p, eps, n_max, 1.0, slot);
        if !d.certified {
            return Err(Error::InvalidInput(format!(
                "norm {} is not tail-certified at n_max = {n_max}: value {:.6e}, tail bound {:.3e}",
                slot.label(),
                d.value,
                d.tail_bound
            )));
        }
    }
    make_spectral(p, eps, n_max)
}

/// Thermal diffusion on (-1,1)^2 with a = 1 where x1*x2 > 0 and a = eps
/// where x1*x2 < 0, horizon T = 1/2, and the smooth manufactured solution
/// u = sin(t) (1-x1^2)(1-x2^2) x1 x2 imposed through the weak-recipe load.
/// eps = 1 degenerates to constant-coefficient heat flow, which is useful
/// as a cross-check.
pub fn make_checkerboard(eps: f64) -> Result<Problem> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "checkerboard contrast must lie in (0, 1], got {eps}"
        )));
    }
    let a: SpaceTimeFn = Arc::new(move |_t, x: Point| if x[0] * x[1] > 0.0 { 1.0 } else { eps });
    Ok(Problem {
        name: "checkerboard".into(),
        dim: 2,
        t_end: 0.5,
        coefficients: Coefficients::new(a, eps, 1.0)?,
        initial: Arc::new(|_| 0.0),
        load: Load::WeakResidual,
        exact: Some(ExactSolution::Separable {
            sigma: Arc::new(f64::sin),
            dsigma: Arc::new(f64::cos),
            space: Arc::new(|x: Point| {
                (x[0] - x[0].powi(3)) * (x[1] - x[1].powi(3))
            }),
            space_grad: Arc::new(|x: Point| {
                [
                    (1.0 - 3.0 * x[0] * x[0]) * (x[1] - x[1].powi(3)),
                    (x[0] - x[0].powi(3)) * (1.0 - 3.0 * x[1] * x[1]),
                ]
            }),
        }),
        domain: (-1.0, 1.0),
        quadrant_aligned: true,
        base_n: 4,
    })
}

/// Catalog lookup with optional overrides for the contrast / decay
/// parameter and the series truncation.
pub fn by_name_configured(name: &str, eps: Option<f64>, n_max: Option<usize>) -> Result<Problem> {
    let n_max = n_max.unwrap_or(SPECTRAL_N_MAX_DEFAULT);
    match name {
        "smooth1d" => Ok(make_smooth_1d()),
        "smooth2d" => Ok(make_smooth_2d()),
        "spectral-p2" => make_spectral(2.0, eps.unwrap_or(SPECTRAL_EPS_DEFAULT), n_max),
        "spectral-p32" => make_spectral(1.5, eps.unwrap_or(SPECTRAL_EPS_DEFAULT), n_max),
        "checkerboard" => make_checkerboard(eps.unwrap_or(CHECKERBOARD_EPS_DEFAULT)),
        other => Err(Error::UnknownProblem(other.into())),
    }
}

pub fn by_name(name: &str) -> Result<Problem> {
    by_name_configured(name, None, None)
}

/// Names accepted by `by_name`, in catalog order.
pub fn catalog_names() -> [&'static str; 5] {
    ["smooth1d", "smooth2d", "spectral-p2", "spectral-p32", "checkerboard"]
}

/// Closed-form integrals of hat basis functions against sin(kappa x) on a
/// 1D mesh, indexed by free vertex.
pub fn hat_sine_integrals(mesh: &Mesh, kappa: f64) -> Result<Vec<f64>> {
    if mesh.dim() != 1 {
        return Err(Error::InvalidInput(
            "hat-sine integrals are defined on 1D meshes".into(),
        ));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!(
            "wavenumber must be positive, got {kappa}"
        )));
    }
    let segments = match mesh.cells() {
        Cells::Segments(s) => s,
        Cells::Triangles(_) => unreachable!("1D meshes hold segments"),
    };
    // Adjacent endpoint coordinates per vertex: (left, right).
    let mut left = vec![f64::NAN; mesh.n_vertices()];
    let mut right = vec![f64::NAN; mesh.n_vertices()];
    for seg in segments {
        let (xa, xb) = (mesh.vertex(seg[0])[0], mesh.vertex(seg[1])[0]);
        let (lo, hi, vlo, vhi) = if xa < xb {
            (xa, xb, seg[0], seg[1])
        } else {
            (xb, xa, seg[1], seg[0])
        };
        right[vlo] = hi;
        left[vhi] = lo;
    }
    let k2 = kappa * kappa;
    let mut out = vec![0.0; mesh.n_free()];
    for (fi, &v) in mesh.free_vertices().iter().enumerate() {
        let xi = mesh.vertex(v)[0];
        let (xl, xr) = (left[v], right[v]);
        if !xl.is_finite() || !xr.is_finite() {
            return Err(Error::Mesh(format!(
                "free vertex {v} lacks two neighbours"
            )));
        }
        out[fi] = ((kappa * xi).sin() - (kappa * xl).sin()) / (k2 * (xi - xl))
            + ((kappa * xi).sin() - (kappa * xr).sin()) / (k2 * (xr - xi));
    }
    Ok(out)
}

enum LoadKind {
    Fixed(Vec<f64>),
    Pointwise {
        mesh: Arc<Mesh>,
        f: SpaceTimeFn,
        rule: QuadratureRule,
    },
    /// sigma'(t) * (U, phi_i) + sigma(t) * B(U, phi_i) with both vectors
    /// precomputed; valid because the coefficients are time-independent.
    SeparableWeak {
        sigma: TimeFn,
        dsigma: TimeFn,
        mass_u: Vec<f64>,
        form_u: Vec<f64>,
    },
    /// F(t) = sum_k A_k (omega_k cos(omega_k t) + kappa_k^2 sin(omega_k t))
    /// * I_k with the hat-sine integral vectors I_k tabulated per mode.
    SeriesTable {
        amps: Vec<f64>,
        omegas: Vec<f64>,
        kappas: Vec<f64>,
        table: Vec<Vec<f64>>,
    },
}

/// Per-mesh load evaluator: precomputes whatever the problem's load flavour
/// allows, then produces the free-vertex load vector at any time.
pub struct LoadAssembler {
    kind: LoadKind,
    n_free: usize,
}

impl LoadAssembler {
    pub fn new(problem: &Problem, mesh: &Arc<Mesh>) -> Result<LoadAssembler> {
        let rule = QuadratureRule::fine_for_dim(mesh.dim());
        LoadAssembler::with_rule(problem, mesh, rule)
    }

    /// Like `new`, but integrating with the caller's quadrature rule where
    /// quadrature is involved at all.
    pub fn with_rule(problem: &Problem, mesh: &Arc<Mesh>, rule: QuadratureRule) -> Result<LoadAssembler> {
        if mesh.dim() != problem.dim {
            return Err(Error::InvalidInput(format!(
                "mesh dimension {} does not match problem dimension {}",
                mesh.dim(),
                problem.dim
            )));
        }
        let n_free = mesh.n_free();
        let kind = match &problem.load {
            Load::Vector(v) => {
                if v.len() != n_free {
                    return Err(Error::InvalidInput(format!(
                        "load vector length {} does not match {} free vertices",
                        v.len(),
                        n_free
                    )));
                }
                LoadKind::Fixed(v.clone())
            }
            Load::Pointwise(f) => LoadKind::Pointwise {
                mesh: Arc::clone(mesh),
                f: Arc::clone(f),
                rule,
            },
            Load::WeakResidual => match &problem.exact {
                None => {
                    return Err(Error::InvalidInput(
                        "weak-recipe load requires an exact solution".into(),
                    ))
                }
                Some(ExactSolution::Series(s)) => series_table(s, mesh)?,
                Some(ExactSolution::Separable {
                    sigma,
                    dsigma,
                    space,
                    space_grad,
                }) => {
                    if problem.coefficients.time_dependent {
                        return Err(Error::InvalidInput(
                            "weak-recipe load needs time-independent coefficients".into(),
                        ));
                    }
                    let mass_u = assemble_load_fn(mesh, &rule, |x| space(x));
                    let form_u = weak_form_vector(
                        mesh,
                        &problem.coefficients,
                        &rule,
                        |x| space(x),
                        |x| space_grad(x),
                    );
                    LoadKind::SeparableWeak {
                        sigma: Arc::clone(sigma),
                        dsigma: Arc::clone(dsigma),
                        mass_u,
                        form_u,
                    }
                }
            },
            Load::SineSeries => match &problem.exact {
                Some(ExactSolution::Series(s)) => series_table(s, mesh)?,
                _ => {
                    return Err(Error::InvalidInput(
                        "sine-series load requires a series exact solution".into(),
                    ))
                }
            },
        };
        Ok(LoadAssembler { kind, n_free })
    }

    pub fn assemble(&self, t: f64) -> Vec<f64> {
        match &self.kind {
            LoadKind::Fixed(v) => v.clone(),
            LoadKind::Pointwise { mesh, f, rule } => {
                assemble_load_fn(mesh, rule, |x| f(t, x))
            }
            LoadKind::SeparableWeak {
                sigma,
                dsigma,
                mass_u,
                form_u,
            } => {
                let (s, ds) = (sigma(t), dsigma(t));
                mass_u
                    .iter()
                    .zip(form_u)
                    .map(|(&m, &a)| ds * m + s * a)
                    .collect()
            }
            LoadKind::SeriesTable {
                amps,
                omegas,
                kappas,
                table,
            } => {
                let mut out = vec![0.0; self.n_free];
                for (k, row) in table.iter().enumerate() {
                    let g = amps[k]
                        * (omegas[k] * (omegas[k] * t).cos()
                            + kappas[k] * kappas[k] * (omegas[k] * t).sin());
                    for (o, &v) in out.iter_mut().zip(row) {
                        *o += g * v;
                    }
                }
                out
            }
        }
    }
}

fn series_table(sol: &Arc<SpectralSolution>, mesh: &Arc<Mesh>) -> Result<LoadKind> {
    let mut table = Vec::with_capacity(sol.n_max());
    for &kappa in sol.kappas() {
        table.push(hat_sine_integrals(mesh, kappa)?);
    }
    Ok(LoadKind::SeriesTable {
        amps: sol.amps().to_vec(),
        omegas: sol.omegas().to_vec(),
        kappas: sol.kappas().to_vec(),
        table,
    })
}

/// B(U, phi_i) = integral of a grad U . grad phi_i + (b . grad U) phi_i +
/// c U phi_i for a fixed spatial field U, sampled at t = 0 (the
/// coefficients must be time-independent for this to be meaningful).
fn weak_form_vector<F, G>(
    mesh: &Arc<Mesh>,
    coeffs: &Coefficients,
    rule: &QuadratureRule,
    space: F,
    space_grad: G,
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
            let a = coeffs.diffusion_at(0.0, x);
            let b = coeffs.convection_at(0.0, x);
            let c = coeffs.reaction_at(0.0, x);
            let gu = space_grad(x);
            let u = space(x);
            let scale = w * measure;
            for k in 0..nloc {
                let Some(fi) = mesh.free_index(ids[k]) else { continue };
                let mut v = a * (gu[0] * grads[k][0] + gu[1] * grads[k][1]);
                if let Some(bv) = b {
                    v += (bv[0] * gu[0] + bv[1] * gu[1]) * p[k];
                }
                if let Some(cv) = c {
                    v += cv * u * p[k];
                }
                out[fi] += scale * v;
            }
        }
    }
    out
}
