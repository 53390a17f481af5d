//! Explicit resolvent kernel `r = r0 + r1` of the Laplacian and numerical
//! checks of the identities that make it the resolvent.
//!
//! Points on the graph are passed as one coordinate per edge function
//! (external edges first, then internal edges), so `kernel_at(x, y)` is the
//! full `(|E|+|I|) x (|E|+|I|)` matrix whose `(j, j')` entry couples `x_j` on
//! edge `j` with `y_j'` on edge `j'`.
//!
//! The kernel is evaluated through `Psi(x) = Phi(x) R_+^{-1}`, whose entries
//! are `e^{ikx}` and `e^{ik(a-x)}` and stay bounded for `Im k >= 0`.

use crate::bcspace::Tolerances;
use crate::linalg::{self, I};
use crate::secular::{SecularError, SecularSystem};
use crate::{CMat, C64};
use gauss_quad::GaussLegendre;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Condition number of `1 - S T` above which `k^2` is treated as a pole.
pub const NEAR_POLE_COND: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResolventError {
    #[error(transparent)]
    Secular(#[from] SecularError),
    #[error("k = {0} is outside the region where the kernel formula applies (need Im k > 0, or k > 0 on a compact graph)")]
    OutsideHalfPlane(C64),
    #[error("resolvent near pole at k = {k}: condition of 1 - S T is {cond:e}")]
    NearPole { k: C64, cond: f64 },
    #[error("kernels live on different graphs or at different k")]
    Mismatch,
    #[error("coordinate vector has length {got}, expected {expected}")]
    Coordinates { got: usize, expected: usize },
    #[error("no adjoint system: {0}")]
    Adjoint(String),
}

#[derive(Debug, Clone)]
pub struct ResolventKernel {
    sys: SecularSystem,
    k: C64,
    /// `[1 - S T]^{-1} S`.
    middle: CMat,
    middle_cond: f64,
}

fn expm1_over(c: C64, a: f64) -> C64 {
    // Integral of e^{c x} over [0, a].
    let z = c * a;
    if z.norm() < 1e-4 {
        C64::from(a) * (C64::from(1.0) + z / 2.0 + z * z / 6.0 + z * z * z / 24.0)
    } else {
        (z.exp() - 1.0) / c
    }
}

impl ResolventKernel {
    pub fn new(sys: &SecularSystem, k: C64, tol: &Tolerances) -> Result<Self, ResolventError> {
        let compact = sys.graph().is_compact();
        let admissible = k.im > 0.0 || (compact && k.im == 0.0 && k.re > 0.0);
        if !admissible {
            return Err(ResolventError::OutsideHalfPlane(k));
        }
        sys.check_overflow(k)?;
        let s = sys.bc().cayley(k, tol).map_err(SecularError::from)?;
        let m = linalg::identity(sys.d()) - &s * sys.t_matrix(k);
        let cond = linalg::cond(&m);
        if !(cond < NEAR_POLE_COND) {
            return Err(ResolventError::NearPole { k, cond });
        }
        let middle = m.lu().solve(&s).ok_or(ResolventError::NearPole { k, cond })?;
        Ok(ResolventKernel {
            sys: sys.clone(),
            k,
            middle,
            middle_cond: cond,
        })
    }

    pub fn k(&self) -> C64 {
        self.k
    }

    pub fn system(&self) -> &SecularSystem {
        &self.sys
    }

    pub fn middle_factor(&self) -> &CMat {
        &self.middle
    }

    pub fn middle_condition(&self) -> f64 {
        self.middle_cond
    }

    fn n_edges(&self) -> usize {
        self.sys.graph().n_edges()
    }

    fn check_coords(&self, x: &[f64]) -> Result<(), ResolventError> {
        let n = self.n_edges();
        if x.len() != n {
            return Err(ResolventError::Coordinates { got: x.len(), expected: n });
        }
        Ok(())
    }

    /// Row of `Psi` (or its `order`-th derivative) for edge `j` at `t`.
    fn psi_row(&self, j: usize, t: f64, order: i32) -> DVector<C64> {
        let g = self.sys.graph();
        let (ne, ni) = (g.n_external(), g.n_internal());
        let k = self.k;
        let mut row = DVector::zeros(self.sys.d());
        if j < ne {
            row[j] = (I * k).powi(order) * (I * k * t).exp();
        } else {
            let i = j - ne;
            let a = g.edge_length(j);
            row[ne + i] = (I * k).powi(order) * (I * k * t).exp();
            row[ne + ni + i] = (-I * k).powi(order) * (I * k * (a - t)).exp();
        }
        row
    }

    fn psi(&self, x: &[f64], order: i32) -> CMat {
        let n = self.n_edges();
        let mut p = CMat::zeros(n, self.sys.d());
        for (j, &t) in x.iter().enumerate() {
            p.set_row(j, &self.psi_row(j, t, order).transpose());
        }
        p
    }

    /// `r1(x, y)`, the part of the kernel that depends on the vertex
    /// conditions.
    pub fn r1(&self, x: &[f64], y: &[f64]) -> Result<CMat, ResolventError> {
        self.check_coords(x)?;
        self.check_coords(y)?;
        let f = I / (2.0 * self.k);
        Ok(self.psi(x, 0) * &self.middle * self.psi(y, 0).transpose() * f)
    }

    /// Free kernel `r0(x, y) = delta_{jj'} (i / 2k) e^{ik|x_j - y_j|}`.
    pub fn r0(&self, x: &[f64], y: &[f64]) -> Result<CMat, ResolventError> {
        self.check_coords(x)?;
        self.check_coords(y)?;
        let n = self.n_edges();
        let f = I / (2.0 * self.k);
        let mut r = CMat::zeros(n, n);
        for j in 0..n {
            r[(j, j)] = f * (I * self.k * (x[j] - y[j]).abs()).exp();
        }
        Ok(r)
    }

    pub fn kernel_at(&self, x: &[f64], y: &[f64]) -> Result<CMat, ResolventError> {
        Ok(self.r0(x, y)? + self.r1(x, y)?)
    }

    /// Gram matrix `G_pq = sum_j int conj(Psi_jp) Psi_jq` over the graph.
    fn gram(&self) -> CMat {
        let g = self.sys.graph();
        let (ne, ni) = (g.n_external(), g.n_internal());
        let k = self.k;
        let kappa = k.im;
        let mut gm = CMat::zeros(self.sys.d(), self.sys.d());
        for e in 0..ne {
            gm[(e, e)] = C64::from(1.0 / (2.0 * kappa));
        }
        for i in 0..ni {
            let a = g.edge_length(ne + i);
            let (p, q) = (ne + i, ne + ni + i);
            let same = expm1_over(C64::from(-2.0 * kappa), a);
            gm[(p, p)] = same;
            gm[(q, q)] = same;
            // conj(e^{ikx}) e^{ik(a-x)} = e^{ika} e^{-2i Re(k) x}
            let cross = (I * k * a).exp() * expm1_over(C64::new(0.0, -2.0 * k.re), a);
            gm[(p, q)] = cross;
            gm[(q, p)] = cross.conj();
        }
        gm
    }

    /// Hilbert-Schmidt norm of the kernel difference `r1 - other.r1`;
    /// the free parts cancel. Requires `Im k > 0` when the graph has
    /// external edges.
    pub fn hs_distance(&self, other: &ResolventKernel) -> Result<f64, ResolventError> {
        if self.sys.graph() != other.sys.graph() || (self.k - other.k).norm() > 0.0 {
            return Err(ResolventError::Mismatch);
        }
        let dw = &self.middle - &other.middle;
        Ok(self.hs_of_middle(&dw))
    }

    /// Hilbert-Schmidt norm of `r1` alone.
    pub fn hs_norm_r1(&self) -> f64 {
        self.hs_of_middle(&self.middle)
    }

    fn hs_of_middle(&self, w: &CMat) -> f64 {
        let g = self.gram();
        let gt = g.transpose();
        let v = (w.adjoint() * &g * w * gt).trace();
        v.re.max(0.0).sqrt() / (2.0 * self.k.norm())
    }

    /// Kernel entry `(ex, ey)` on an `n x n` grid. External edges are cut at
    /// `ext_len`.
    pub fn kernel_grid(&self, ex: usize, ey: usize, n: usize, ext_len: f64) -> Result<Vec<GridSample>, ResolventError> {
        let g = self.sys.graph();
        let ne_tot = self.n_edges();
        if ex >= ne_tot || ey >= ne_tot {
            return Err(ResolventError::Coordinates { got: ex.max(ey), expected: ne_tot });
        }
        let len = |j: usize| if j < g.n_external() { ext_len } else { g.edge_length(j) };
        let (lx, ly) = (len(ex), len(ey));
        let step = |l: f64, m: usize| if n > 1 { l * m as f64 / (n - 1) as f64 } else { 0.0 };
        let mut out = Vec::with_capacity(n * n);
        let mut xv = vec![0.0; ne_tot];
        let mut yv = vec![0.0; ne_tot];
        for a in 0..n {
            for b in 0..n {
                xv[ex] = step(lx, a);
                yv[ey] = step(ly, b);
                let r = self.kernel_at(&xv, &yv)?;
                out.push(GridSample { x: xv[ex], y: yv[ey], value: r[(ex, ey)] });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSample {
    pub x: f64,
    pub y: f64,
    pub value: C64,
}

/// Polynomial bump `amp * (1 - s^2)^3`, `s = (t - center) / half_width`,
/// with two continuous derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub edge: usize,
    pub center: f64,
    pub half_width: f64,
    pub amp: C64,
}

impl Bump {
    pub fn value(&self, t: f64) -> C64 {
        let s = (t - self.center) / self.half_width;
        if s.abs() >= 1.0 {
            C64::from(0.0)
        } else {
            self.amp * (1.0 - s * s).powi(3)
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

/// `psi = R(k) phi` for a sum of bumps, evaluated pointwise.
pub struct AppliedResolvent<'a> {
    res: &'a ResolventKernel,
    bumps: Vec<Bump>,
    /// `sum_b int Psi_row(edge_b, t) phi_b(t) dt`.
    moments: DVector<C64>,
    quad: GaussLegendre,
}

impl<'a> AppliedResolvent<'a> {
    pub fn new(res: &'a ResolventKernel, bumps: Vec<Bump>, nodes: usize) -> Self {
        let quad = GaussLegendre::new(nodes.max(2)).expect("at least two nodes");
        let mut moments = DVector::zeros(res.sys.d());
        for b in &bumps {
            let (lo, hi) = b.support();
            moments += integrate_vec(&quad, lo, hi, |t| res.psi_row(b.edge, t, 0) * b.value(t));
        }
        AppliedResolvent { res, bumps, moments, quad }
    }

    pub fn phi(&self, j: usize, t: f64) -> C64 {
        self.bumps.iter().filter(|b| b.edge == j).map(|b| b.value(t)).sum()
    }

    /// `psi_j(t)` and, for `order = 1`, its derivative.
    fn eval(&self, j: usize, t: f64, order: i32) -> C64 {
        let k = self.res.k;
        let f = I / (2.0 * k);
        let r1 = (self.res.psi_row(j, t, order).transpose() * &self.res.middle * &self.moments)[(0, 0)] * f;
        let mut r0 = C64::from(0.0);
        for b in self.bumps.iter().filter(|b| b.edge == j) {
            let (lo, hi) = b.support();
            // d/dt e^{ik|t - s|} = ik sgn(t - s) e^{ik|t - s|}
            let g = |s: f64, sign: f64| {
                let base = (I * k * (t - s).abs()).exp() * b.value(s);
                if order == 1 { base * I * k * sign } else { base }
            };
            let mid = t.clamp(lo, hi);
            if mid > lo {
                r0 += integrate_scalar(&self.quad, lo, mid, |s| g(s, 1.0));
            }
            if hi > mid {
                r0 += integrate_scalar(&self.quad, mid, hi, |s| g(s, -1.0));
            }
        }
        r0 * f + r1
    }

    pub fn value(&self, j: usize, t: f64) -> C64 {
        self.eval(j, t, 0)
    }

    pub fn derivative(&self, j: usize, t: f64) -> C64 {
        self.eval(j, t, 1)
    }

    /// Boundary vectors `(psi, psi')` in the boundary coordinate order.
    pub fn boundary_values(&self) -> (DVector<C64>, DVector<C64>) {
        let g = self.res.sys.graph();
        let (ne, ni) = (g.n_external(), g.n_internal());
        let d = self.res.sys.d();
        let mut v = DVector::zeros(d);
        let mut dv = DVector::zeros(d);
        for e in 0..ne {
            v[e] = self.value(e, 0.0);
            dv[e] = self.derivative(e, 0.0);
        }
        for i in 0..ni {
            let a = g.edge_length(ne + i);
            v[ne + i] = self.value(ne + i, 0.0);
            dv[ne + i] = self.derivative(ne + i, 0.0);
            v[ne + ni + i] = self.value(ne + i, a);
            dv[ne + ni + i] = -self.derivative(ne + i, a);
        }
        (v, dv)
    }
}

fn integrate_scalar<F: Fn(f64) -> C64>(q: &GaussLegendre, lo: f64, hi: f64, f: F) -> C64 {
    let (h, m) = (0.5 * (hi - lo), 0.5 * (hi + lo));
    q.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| f(m + h * x) * w)
        .sum::<C64>()
        * h
}

fn integrate_vec<F: Fn(f64) -> DVector<C64>>(q: &GaussLegendre, lo: f64, hi: f64, f: F) -> DVector<C64> {
    let (h, m) = (0.5 * (hi - lo), 0.5 * (hi + lo));
    let mut acc: Option<DVector<C64>> = None;
    for &(x, w) in q.as_node_weight_pairs() {
        let v = f(m + h * x) * C64::from(w * h);
        acc = Some(match acc {
            Some(a) => a + v,
            None => v,
        });
    }
    acc.unwrap_or_else(|| DVector::zeros(0))
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub k: C64,
    /// Relative boundary-condition residual of `R(k) phi`.
    pub domain_residual: f64,
    /// Largest relative residual of `(-d^2/dx^2 - k^2) R(k) phi - phi`.
    pub equation_residual: f64,
    /// Largest relative deviation from `r_M(y, x; k)^* = r_{M*}(x, y; -conj k)`.
    pub symmetry_residual: f64,
    pub middle_condition: f64,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.domain_residual.max(self.equation_residual).max(self.symmetry_residual)
    }
}

/// Deterministic points in `(0, 1)` from the golden-ratio sequence.
fn sample_fractions(n: usize, seed: usize) -> Vec<f64> {
    let phi = 0.618_033_988_749_895_f64;
    (0..n)
        .map(|j| {
            let v = ((j + 1 + 7 * seed) as f64 * phi).fract();
            0.05 + 0.9 * v
        })
        .collect()
}

/// Check the three identities characterising the resolvent at `k`: the
/// image of test bumps satisfies the vertex conditions, solves the
/// inhomogeneous equation, and the kernel is related to the adjoint kernel
/// by `r_M(y, x; k)^* = r_{M*}(x, y; -conj k)`.
pub fn verify_resolvent_identity(sys: &SecularSystem, k: C64, tol: &Tolerances) -> Result<IdentityReport, ResolventError> {
    let res = ResolventKernel::new(sys, k, tol)?;
    let g = sys.graph();
    let n = g.n_edges();
    let ne = g.n_external();
    let len = |j: usize| if j < ne { 3.0 } else { g.edge_length(j) };

    // Three bumps per edge, away from the endpoints.
    let bumps: Vec<Bump> = (0..n)
        .flat_map(|j| {
            let l = len(j);
            [0.25, 0.5, 0.75].into_iter().enumerate().map(move |(m, c)| Bump {
                edge: j,
                center: c * l,
                half_width: 0.1 * l,
                amp: C64::new(1.0, 0.3 * (m as f64 + j as f64)),
            })
        })
        .collect();
    let app = AppliedResolvent::new(&res, bumps, 48);

    let (v, dv) = app.boundary_values();
    let (a, b) = (sys.bc().a(), sys.bc().b());
    let lhs = a * &v + b * &dv;
    let scale = linalg::op_norm(&linalg::hstack(a, b)) * (v.norm_squared() + dv.norm_squared()).sqrt();
    let domain_residual = if scale > 0.0 { lhs.norm() / scale } else { lhs.norm() };

    // Second differences with step 1e-4 * length. Outside the supports the
    // plain three-point stencil is used; inside, where `phi` bends sharply,
    // the stencil at h and 2h is Richardson-extrapolated.
    let mut eq = 0.0f64;
    for j in 0..n {
        let l = len(j);
        let h = 1e-4 * l;
        let d2 = |x: f64, h: f64| (app.value(j, x + h) - app.value(j, x) * 2.0 + app.value(j, x - h)) / (h * h);
        for &t in &[0.07, 0.14, 0.22, 0.37, 0.5, 0.61, 0.94] {
            let x = t * l;
            let p0 = app.value(j, x);
            let f = app.phi(j, x);
            let second = if f.norm() == 0.0 {
                d2(x, h)
            } else {
                (d2(x, h) * 4.0 - d2(x, 2.0 * h)) / 3.0
            };
            let r = -second - k * k * p0 - f;
            let s = 1.0f64.max((k * k * p0).norm()).max(f.norm());
            eq = eq.max(r.norm() / s);
        }
    }

    let adj = sys.adjoint(tol).map_err(|e| ResolventError::Adjoint(e.to_string()))?;
    let res_adj = ResolventKernel::new(&adj, -k.conj(), tol)?;
    let mut sym = 0.0f64;
    for seed in 0..5 {
        let fx = sample_fractions(n, seed);
        let fy = sample_fractions(n, seed + 11);
        let x: Vec<f64> = (0..n).map(|j| fx[j] * len(j)).collect();
        let y: Vec<f64> = (0..n).map(|j| fy[j] * len(j)).collect();
        let lhs = res.kernel_at(&y, &x)?.adjoint();
        let rhs = res_adj.kernel_at(&x, &y)?;
        let s = linalg::op_norm(&lhs).max(f64::MIN_POSITIVE);
        sym = sym.max(linalg::op_norm(&(lhs - rhs)) / s);
    }

    Ok(IdentityReport {
        k,
        domain_residual,
        equation_residual: eq,
        symmetry_residual: sym,
        middle_condition: res.middle_cond,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularityProbe {
    pub offset: f64,
    /// Norm of `[1 - S T]^{-1} S` at `k + i offset`.
    pub middle_norm: f64,
    /// Condition number of `1 - S T` at `k + i offset`.
    pub condition: f64,
}

/// Middle factor of the kernel at `k + i 10^{-j}`, `j = 1..=6`, for real
/// `k > 0`. Growth as the offset shrinks marks a candidate spectral
/// singularity; no threshold is applied.
pub fn singularity_profile(sys: &SecularSystem, k: f64, tol: &Tolerances) -> Vec<SingularityProbe> {
    (1..=6)
        .into_par_iter()
        .map(|j| {
            let offset = 10f64.powi(-j);
            let kk = C64::new(k, offset);
            let (middle_norm, condition) = match sys.bc().cayley(kk, tol) {
                Ok(s) => {
                    let m = linalg::identity(sys.d()) - &s * sys.t_matrix(kk);
                    let w = m.clone().lu().solve(&s).map_or(f64::INFINITY, |w| linalg::op_norm(&w));
                    (w, linalg::cond(&m))
                }
                Err(_) => (f64::INFINITY, f64::INFINITY),
            };
            SingularityProbe { offset, middle_norm, condition }
        })
        .collect()
}
