//! The secular matrix `Z(k) = A X(k) + ik B Y(k)` whose determinant
//! vanishes exactly at the eigenvalues `lambda = k^2`, and the matrices
//! entering its factorization `Z = (A + ikB)(1 - S T) R_+`.
//!
//! Columns of `Z` are the coefficients of the exponential ansatz
//! `psi_e = s_e e^{ikx}` on external edges and
//! `psi_i = alpha_i e^{ikx} + beta_i e^{-ikx}` on internal edges, ordered
//! `[s; alpha; beta]`; rows follow the boundary coordinate order.

use crate::bcspace::{BcError, BoundaryConditions, Tolerances};
use crate::graph::MetricGraph;
use crate::linalg::{self, RankTol, I};
use crate::{CMat, C64};
use thiserror::Error;

/// Largest `|Im k| * max(a)` accepted before exponentials are considered
/// unsafe.
pub const OVERFLOW_LIMIT: f64 = 600.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SecularError {
    #[error(transparent)]
    Bc(#[from] BcError),
    #[error("|Im k| * a_max = {0} exceeds the overflow limit {OVERFLOW_LIMIT}")]
    Overflow(f64),
    #[error("middle factor 1 - S T is numerically singular at k = {k} (condition {cond:e})")]
    NearPole { k: C64, cond: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecularSystem {
    graph: MetricGraph,
    bc: BoundaryConditions,
}

fn e(z: C64) -> C64 {
    z.exp()
}

impl SecularSystem {
    pub fn new(graph: MetricGraph, bc: BoundaryConditions) -> Result<Self, BcError> {
        bc.check_graph(&graph)?;
        if !bc.is_square() {
            return Err(BcError::Shape {
                a_rows: bc.a().nrows(),
                a_cols: bc.a().ncols(),
                b_rows: bc.b().nrows(),
                b_cols: bc.b().ncols(),
            });
        }
        Ok(SecularSystem { graph, bc })
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn bc(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn d(&self) -> usize {
        self.graph.d()
    }

    /// The system with adjoint vertex conditions on the same graph.
    pub fn adjoint(&self, tol: &Tolerances) -> Result<SecularSystem, BcError> {
        let adj = self.bc.adjoint(tol);
        let bc = if adj.is_square() {
            adj
        } else {
            return Err(BcError::NotLagrangianDimension {
                dim: adj.dim_m(tol.rank),
                d: self.d(),
            });
        };
        SecularSystem::new(self.graph.clone(), bc)
    }

    pub fn check_overflow(&self, k: C64) -> Result<(), SecularError> {
        let v = k.im.abs() * self.graph.max_length();
        if v >= OVERFLOW_LIMIT {
            return Err(SecularError::Overflow(v));
        }
        Ok(())
    }

    fn ne(&self) -> usize {
        self.graph.n_external()
    }

    fn ni(&self) -> usize {
        self.graph.n_internal()
    }

    fn lengths(&self) -> Vec<f64> {
        self.graph.lengths()
    }

    pub fn x_matrix(&self, k: C64) -> CMat {
        let (ne, ni, d) = (self.ne(), self.ni(), self.d());
        let mut x = CMat::zeros(d, d);
        for j in 0..ne {
            x[(j, j)] = C64::from(1.0);
        }
        for (i, a) in self.lengths().into_iter().enumerate() {
            let (r0, r1) = (ne + i, ne + ni + i);
            let (ca, cb) = (ne + i, ne + ni + i);
            x[(r0, ca)] = C64::from(1.0);
            x[(r0, cb)] = C64::from(1.0);
            x[(r1, ca)] = e(I * k * a);
            x[(r1, cb)] = e(-I * k * a);
        }
        x
    }

    pub fn y_matrix(&self, k: C64) -> CMat {
        let (ne, ni, d) = (self.ne(), self.ni(), self.d());
        let mut y = CMat::zeros(d, d);
        for j in 0..ne {
            y[(j, j)] = C64::from(1.0);
        }
        for (i, a) in self.lengths().into_iter().enumerate() {
            let (r0, r1) = (ne + i, ne + ni + i);
            let (ca, cb) = (ne + i, ne + ni + i);
            y[(r0, ca)] = C64::from(1.0);
            y[(r0, cb)] = C64::from(-1.0);
            y[(r1, ca)] = -e(I * k * a);
            y[(r1, cb)] = e(-I * k * a);
        }
        y
    }

    pub fn z_matrix(&self, k: C64) -> CMat {
        self.bc.a() * self.x_matrix(k) + self.bc.b() * self.y_matrix(k) * (I * k)
    }

    /// `dZ/dk`.
    pub fn z_derivative(&self, k: C64) -> CMat {
        let (ne, ni, d) = (self.ne(), self.ni(), self.d());
        let mut dx = CMat::zeros(d, d);
        let mut dy = CMat::zeros(d, d);
        for (i, a) in self.lengths().into_iter().enumerate() {
            let r1 = ne + ni + i;
            let (ca, cb) = (ne + i, ne + ni + i);
            dx[(r1, ca)] = I * a * e(I * k * a);
            dx[(r1, cb)] = -I * a * e(-I * k * a);
            dy[(r1, ca)] = -I * a * e(I * k * a);
            dy[(r1, cb)] = -I * a * e(-I * k * a);
        }
        let y = self.y_matrix(k);
        self.bc.a() * dx + self.bc.b() * (y * I + dy * (I * k))
    }

    /// Secular matrix in the basis `cos(kx)`, `sin(kx)/k` on internal edges
    /// (`e^{ikx}` on external edges). It equals `Z(k)` times a block matrix
    /// of determinant `prod (-2ik)^{-1}`, so it has the same zeros for
    /// `k != 0` but no spurious zero at `k = 0`; at `k = 0` its internal
    /// columns are those of the zero-mode matrix.
    pub fn zc_matrix(&self, k: C64) -> CMat {
        self.zc_deriv_matrix(k, false)
    }

    pub fn zc_derivative(&self, k: C64) -> CMat {
        self.zc_deriv_matrix(k, true)
    }

    fn zc_deriv_matrix(&self, k: C64, deriv: bool) -> CMat {
        let (ne, ni, d) = (self.ne(), self.ni(), self.d());
        let mut x = CMat::zeros(d, d);
        let mut y = CMat::zeros(d, d);
        for j in 0..ne {
            if deriv {
                y[(j, j)] = I;
            } else {
                x[(j, j)] = C64::from(1.0);
                y[(j, j)] = I * k;
            }
        }
        for (i, a) in self.lengths().into_iter().enumerate() {
            let (r0, r1) = (ne + i, ne + ni + i);
            let (cc, cs) = (ne + i, ne + ni + i);
            let z = k * a;
            let (co, si) = (z.cos(), z.sin());
            if deriv {
                x[(r1, cc)] = -si * a;
                x[(r1, cs)] = sinc_prime(z) * (a * a);
                y[(r1, cc)] = si + z * co;
                y[(r1, cs)] = si * a;
            } else {
                x[(r0, cc)] = C64::from(1.0);
                x[(r1, cc)] = co;
                x[(r1, cs)] = sinc(z) * a;
                y[(r0, cs)] = C64::from(1.0);
                y[(r1, cc)] = k * si;
                y[(r1, cs)] = -co;
            }
        }
        self.bc.a() * x + self.bc.b() * y
    }

    /// `log det` of [`Self::zc_matrix`]. For `|k| >= 1` it is obtained
    /// from the balanced exponential form, which stays well scaled for
    /// large `|Im k|`.
    pub fn log_det_zc(&self, k: C64) -> Option<C64> {
        if k.norm() >= 1.0 {
            let shift = (C64::new(0.0, -2.0) * k).ln() * self.ni() as f64;
            self.log_det_z(k).map(|l| l - shift)
        } else {
            linalg::log_det(&self.zc_matrix(k))
        }
    }

    pub fn dlog_det_zc(&self, k: C64) -> Option<C64> {
        if k.norm() >= 1.0 {
            self.dlog_det_z(k).map(|l| l - C64::from(self.ni() as f64) / k)
        } else {
            let sol = self.zc_matrix(k).lu().solve(&self.zc_derivative(k))?;
            let tr = sol.trace();
            (tr.re.is_finite() && tr.im.is_finite()).then_some(tr)
        }
    }

    pub fn t_matrix(&self, k: C64) -> CMat {
        let (ne, ni, d) = (self.ne(), self.ni(), self.d());
        let mut t = CMat::zeros(d, d);
        for (i, a) in self.lengths().into_iter().enumerate() {
            let (p, q) = (ne + i, ne + ni + i);
            t[(p, q)] = e(I * k * a);
            t[(q, p)] = e(I * k * a);
        }
        t
    }

    /// `R_+ = diag(1, 1, e^{-ika})`.
    pub fn r_plus(&self, k: C64) -> CMat {
        let (ne, ni, d) = (self.ne(), self.ni(), self.d());
        let mut r = CMat::identity(d, d);
        for (i, a) in self.lengths().into_iter().enumerate() {
            r[(ne + ni + i, ne + ni + i)] = e(-I * k * a);
        }
        r
    }

    pub fn r_plus_inv(&self, k: C64) -> CMat {
        let (ne, ni, d) = (self.ne(), self.ni(), self.d());
        let mut r = CMat::identity(d, d);
        for (i, a) in self.lengths().into_iter().enumerate() {
            r[(ne + ni + i, ne + ni + i)] = e(I * k * a);
        }
        r
    }

    /// Column scaling that keeps `Z R^{-1}` bounded in the half-plane of
    /// `k`, and `log det R`.
    pub fn balance(&self, k: C64) -> (Vec<C64>, C64) {
        let (ne, ni, d) = (self.ne(), self.ni(), self.d());
        let mut cols = vec![C64::from(1.0); d];
        let mut log_r = C64::new(0.0, 0.0);
        for (i, a) in self.lengths().into_iter().enumerate() {
            if k.im >= 0.0 {
                cols[ne + ni + i] = e(I * k * a);
                log_r -= I * k * a;
            } else {
                cols[ne + i] = e(-I * k * a);
                log_r += I * k * a;
            }
        }
        (cols, log_r)
    }

    fn scale_columns(m: &mut CMat, cols: &[C64]) {
        for (j, &s) in cols.iter().enumerate() {
            for r in 0..m.nrows() {
                m[(r, j)] *= s;
            }
        }
    }

    /// Size of the columns of the balanced `Z(k)` in the absence of
    /// cancellation, for rank decisions.
    pub fn z_scale(&self, k: C64) -> f64 {
        self.bc.a().norm() + k.norm() * self.bc.b().norm()
    }

    /// Same for [`Self::zero_mode_matrix`].
    pub fn zero_mode_scale(&self) -> f64 {
        self.bc.a().norm() * (1.0 + self.graph().max_length()) + self.bc.b().norm()
    }

    /// `Z(k) R^{-1}` for the balancing `R` of [`Self::balance`].
    pub fn z_balanced(&self, k: C64) -> CMat {
        let mut z = self.z_matrix(k);
        let (cols, _) = self.balance(k);
        Self::scale_columns(&mut z, &cols);
        z
    }

    /// `log det Z(k)`; `None` when `Z(k)` is exactly singular.
    pub fn log_det_z(&self, k: C64) -> Option<C64> {
        let mut z = self.z_matrix(k);
        let (cols, log_r) = self.balance(k);
        Self::scale_columns(&mut z, &cols);
        linalg::log_det(&z).map(|l| l + log_r)
    }

    /// `d/dk log det Z(k) = tr(Z^{-1} Z')`.
    pub fn dlog_det_z(&self, k: C64) -> Option<C64> {
        let (cols, _) = self.balance(k);
        let mut z = self.z_matrix(k);
        let mut dz = self.z_derivative(k);
        Self::scale_columns(&mut z, &cols);
        Self::scale_columns(&mut dz, &cols);
        let sol = z.lu().solve(&dz)?;
        let tr = sol.trace();
        (tr.re.is_finite() && tr.im.is_finite()).then_some(tr)
    }

    /// Kernel of `Z(k)` (coefficient vectors), using column-normalised
    /// balancing for the rank decision.
    pub fn kernel(&self, k: C64, tol: RankTol) -> CMat {
        let zb = self.z_balanced(k);
        let (norms, zn) = normalize_columns(&zb, self.z_scale(k));
        let ker = linalg::nullspace(&zn, tol);
        // Undo the scalings: Z * diag(bal) * diag(1/norm) * v = 0.
        let (cols, _) = self.balance(k);
        let mut out = ker;
        for r in 0..out.nrows() {
            let f = cols[r] / norms[r];
            for c in 0..out.ncols() {
                out[(r, c)] *= f;
            }
        }
        for mut col in out.column_iter_mut() {
            let n = col.norm();
            if n > 0.0 {
                col /= C64::from(n);
            }
        }
        out
    }

    /// Kernel of `Z(k)` restricted to internal-edge coefficients, i.e.
    /// solutions vanishing identically on external edges.
    pub fn internal_kernel(&self, k: C64, tol: RankTol) -> CMat {
        let ne = self.ne();
        let zb = self.z_balanced(k);
        let zi = zb.columns(ne, self.d() - ne).into_owned();
        let (_, zn) = normalize_columns(&zi, self.z_scale(k));
        linalg::nullspace(&zn, tol)
    }

    pub fn geometric_multiplicity(&self, k: C64, tol: RankTol) -> usize {
        let (_, zn) = normalize_columns(&self.z_balanced(k), self.z_scale(k));
        linalg::nullspace(&zn, tol).ncols()
    }

    /// `A X_0 + B Y_0` on the coefficients `(alpha, beta)` of the affine
    /// ansatz `alpha + beta x` on internal edges; external edges carry no
    /// square-integrable solution of `psi'' = 0`.
    pub fn zero_mode_matrix(&self) -> CMat {
        let (ne, ni, d) = (self.ne(), self.ni(), self.d());
        let mut x0 = CMat::zeros(d, 2 * ni);
        let mut y0 = CMat::zeros(d, 2 * ni);
        for (i, a) in self.lengths().into_iter().enumerate() {
            let (r0, r1) = (ne + i, ne + ni + i);
            x0[(r0, i)] = C64::from(1.0);
            x0[(r1, i)] = C64::from(1.0);
            x0[(r1, ni + i)] = C64::from(a);
            y0[(r0, ni + i)] = C64::from(1.0);
            y0[(r1, ni + i)] = C64::from(-1.0);
        }
        self.bc.a() * x0 + self.bc.b() * y0
    }

    pub fn zero_mode_kernel(&self, tol: RankTol) -> CMat {
        let m = self.zero_mode_matrix();
        if m.ncols() == 0 {
            return CMat::zeros(0, 0);
        }
        let (_, zn) = normalize_columns(&m, self.zero_mode_scale());
        linalg::nullspace(&zn, tol)
    }

    /// `Phi(x, k)`: row `j` maps the coefficient vector to `psi_j(x_j)`.
    /// `x` holds one coordinate per edge function.
    pub fn phi(&self, x: &[f64], k: C64) -> CMat {
        self.phi_deriv(x, k, 0)
    }

    /// `order`-th derivative of `Phi` in `x`.
    pub fn phi_deriv(&self, x: &[f64], k: C64, order: i32) -> CMat {
        let (ne, ni, d) = (self.ne(), self.ni(), self.d());
        let mut p = CMat::zeros(ne + ni, d);
        let f = |s: f64, xx: f64| (I * k * s).powi(order) * e(I * k * s * xx);
        for j in 0..ne {
            p[(j, j)] = f(1.0, x[j]);
        }
        for i in 0..ni {
            let xx = x[ne + i];
            p[(ne + i, ne + i)] = f(1.0, xx);
            p[(ne + i, ne + ni + i)] = f(-1.0, xx);
        }
        p
    }

    /// Relative residual of `Z = (A + ikB)(1 - S T) R_+`.
    pub fn factorization_residual(&self, k: C64, tol: &Tolerances) -> Result<f64, SecularError> {
        let s = self.bc.cayley(k, tol)?;
        let d = self.d();
        let plus = self.bc.a() + self.bc.b() * (I * k);
        let rhs = plus * (linalg::identity(d) - s * self.t_matrix(k)) * self.r_plus(k);
        let z = self.z_matrix(k);
        Ok(linalg::op_norm(&(&z - rhs)) / linalg::op_norm(&z).max(f64::MIN_POSITIVE))
    }

    /// Boundary values `(psi, psi')` of the edge functions built from the
    /// coefficient vector `v`, evaluated from `Phi` at the edge ends.
    pub fn boundary_values(&self, v: &nalgebra::DVector<C64>, k: C64) -> (nalgebra::DVector<C64>, nalgebra::DVector<C64>) {
        let (ne, ni, d) = (self.ne(), self.ni(), self.d());
        let zeros = vec![0.0; ne + ni];
        let mut ends = vec![0.0; ne + ni];
        for (i, a) in self.lengths().into_iter().enumerate() {
            ends[ne + i] = a;
        }
        let v0 = self.phi(&zeros, k) * v;
        let d0 = self.phi_deriv(&zeros, k, 1) * v;
        let v1 = self.phi(&ends, k) * v;
        let d1 = self.phi_deriv(&ends, k, 1) * v;
        let mut psi = nalgebra::DVector::zeros(d);
        let mut dpsi = nalgebra::DVector::zeros(d);
        for j in 0..ne {
            psi[j] = v0[j];
            dpsi[j] = d0[j];
        }
        for i in 0..ni {
            psi[ne + i] = v0[ne + i];
            dpsi[ne + i] = d0[ne + i];
            psi[ne + ni + i] = v1[ne + i];
            dpsi[ne + ni + i] = -d1[ne + i];
        }
        (psi, dpsi)
    }
}

fn sinc(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        C64::from(1.0) - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// Derivative of `sin z / z`.
fn sinc_prime(z: C64) -> C64 {
    if z.norm() < 0.1 {
        let z2 = z * z;
        z * (C64::from(-1.0 / 3.0) + z2 * (1.0 / 30.0 - z2 * (1.0 / 840.0 - z2 / 45360.0)))
    } else {
        (z * z.cos() - z.sin()) / (z * z)
    }
}

/// Columns scaled to unit norm. A column at round-off level relative to
/// `scale` (or to the largest column) is set to zero instead: scaling it
/// up would turn noise into a full-rank direction and hide a kernel
/// vector. `scale` is the size the matrix has away from cancellations.
pub(crate) fn normalize_columns(m: &CMat, scale: f64) -> (Vec<f64>, CMat) {
    const NEGLIGIBLE: f64 = 1e-12;
    let mut out = m.clone();
    let n_max = out.column_iter().map(|c| c.norm()).fold(scale, f64::max);
    let mut norms = Vec::with_capacity(m.ncols());
    for mut col in out.column_iter_mut() {
        let n = col.norm();
        if n > NEGLIGIBLE * n_max {
            col /= C64::from(n);
            norms.push(n);
        } else {
            col.fill(C64::from(0.0));
            norms.push(1.0);
        }
    }
    (norms, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bcspace::presets;
    use crate::graph::builders;
    use crate::linalg::c;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn interval_dirichlet(a: f64) -> SecularSystem {
        SecularSystem::new(builders::interval(a).unwrap(), presets::dirichlet(2)).unwrap()
    }

    #[test]
    fn dirichlet_interval_determinant() {
        // det Z = e^{-ika} - e^{ika} = -2i sin(ka).
        let sys = interval_dirichlet(std::f64::consts::PI);
        for k in [c(0.3, 0.2), c(2.5, -0.7), c(1.0, 0.0)] {
            let want = C64::new(0.0, -2.0) * (k * std::f64::consts::PI).sin();
            let got = sys.log_det_z(k).unwrap().exp();
            assert!((got - want).norm() < 1e-12 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn intermediate_determinant_is_sin_k_minus_k() {
        let sys = SecularSystem::new(builders::interval(1.0).unwrap(), presets::intermediate()).unwrap();
        for k in [c(0.3, 0.2), c(7.5, 2.7), c(-3.0, 1.0)] {
            let want = C64::new(0.0, 2.0) * (k - k.sin());
            let got = sys.z_matrix(k).determinant();
            assert!((got - want).norm() < 1e-11 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn empty_spectrum_determinant_vanishes_only_at_zero() {
        let sys = SecularSystem::new(builders::interval(1.0).unwrap(), presets::empty_spectrum()).unwrap();
        for k in [c(0.5, 0.0), c(3.0, 2.0), c(40.0, -10.0)] {
            let got = sys.z_matrix(k).determinant();
            assert!((got - C64::new(0.0, -2.0) * k).norm() < 1e-9 * (1.0 + k.norm()));
        }
    }

    #[test]
    fn factorization_holds() {
        let g = builders::compact_star(3, 1.3).unwrap();
        let sys = SecularSystem::new(g, presets::standard_on(&builders::compact_star(3, 1.3).unwrap())).unwrap();
        for k in [c(0.7, 0.4), c(2.0, 1.0), c(0.0, 2.0)] {
            assert!(sys.factorization_residual(k, &tol()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn dlog_matches_finite_difference() {
        let g = builders::edge_with_tail(1.7).unwrap();
        let bc = presets::by_degree(&g, |n| presets::delta(n, c(0.3, 0.8))).unwrap();
        let sys = SecularSystem::new(g, bc).unwrap();
        let k = c(1.1, 0.6);
        let h = 1e-6;
        let fd = (sys.z_matrix(k + h).determinant() - sys.z_matrix(k - h).determinant())
            / (2.0 * h)
            / sys.z_matrix(k).determinant();
        let an = sys.dlog_det_z(k).unwrap();
        assert!((fd - an).norm() < 1e-6 * an.norm().max(1.0));
    }

    #[test]
    fn regularized_matrix_matches_exponential_form() {
        let g = builders::compact_star(3, 1.3).unwrap();
        let sys = SecularSystem::new(g.clone(), presets::standard_on(&g)).unwrap();
        for k in [c(0.3, 0.2), c(0.05, -0.01), c(2.0, 1.5), c(7.0, -3.0)] {
            let want = sys.z_matrix(k).determinant() / (C64::new(0.0, -2.0) * k).powi(3);
            let got = sys.zc_matrix(k).determinant();
            assert!((got - want).norm() < 1e-9 * want.norm().max(1e-300), "{k}");
            let l = sys.log_det_zc(k).unwrap().exp();
            assert!((l - want).norm() < 1e-9 * want.norm());
        }
    }

    #[test]
    fn regularized_derivative_matches_finite_difference() {
        let g = builders::edge_with_tail(1.7).unwrap();
        let bc = presets::by_degree(&g, |n| presets::delta(n, c(0.3, 0.8))).unwrap();
        let sys = SecularSystem::new(g, bc).unwrap();
        for k in [c(0.4, 0.3), c(1.5, 0.5), c(0.01, 0.02)] {
            let h = 1e-6;
            let f = |z: C64| sys.zc_matrix(z).determinant();
            let fd = (f(k + h) - f(k - h)) / (2.0 * h) / f(k);
            let an = sys.dlog_det_zc(k).unwrap();
            assert!((fd - an).norm() < 1e-5 * an.norm().max(1.0), "{k}: {fd} {an}");
        }
    }

    #[test]
    fn regularized_matrix_at_zero_is_zero_mode_matrix() {
        let g = builders::cube(1.0).unwrap();
        let sys = SecularSystem::new(g.clone(), presets::standard_on(&g)).unwrap();
        let zc = sys.zc_matrix(c(0.0, 0.0));
        let zm = sys.zero_mode_matrix();
        assert!(crate::linalg::max_abs(&(zc - zm)) < 1e-15);
    }

    #[test]
    fn balanced_log_det_agrees_with_plain() {
        let sys = interval_dirichlet(2.0);
        for k in [c(1.0, 5.0), c(1.0, -5.0)] {
            let plain = sys.z_matrix(k).determinant();
            let bal = sys.log_det_z(k).unwrap().exp();
            assert!((plain - bal).norm() < 1e-10 * plain.norm());
        }
    }

    #[test]
    fn adjoint_determinant_symmetry() {
        // conj det Z(k; A, B) and det Z(-conj k; A', B') agree up to a
        // constant factor fixed by the choice of representatives.
        let g = builders::edge_with_tail(1.0).unwrap();
        let l = crate::linalg::from_rows(&[
            &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 0.0)],
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)],
        ]);
        let bc = BoundaryConditions::new(l, CMat::identity(3, 3)).unwrap();
        let sys = SecularSystem::new(g, bc).unwrap();
        let adj = sys.adjoint(&tol()).unwrap();
        let ratio = |k: C64| {
            sys.z_matrix(k).determinant().conj() / adj.z_matrix(-k.conj()).determinant()
        };
        let r0 = ratio(c(0.4, 0.3));
        for k in [c(1.3, 0.1), c(-2.0, 1.5), c(0.2, -0.9)] {
            assert!((ratio(k) - r0).norm() < 1e-10 * r0.norm());
        }
    }

    #[test]
    fn residual_example_has_kernel_at_one() {
        let g = builders::edge_with_tail(1.0).unwrap();
        let l = crate::linalg::from_rows(&[
            &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 0.0)],
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)],
        ]);
        let bc = BoundaryConditions::new(l, CMat::identity(3, 3)).unwrap();
        let sys = SecularSystem::new(g, bc).unwrap();
        assert_eq!(sys.internal_kernel(c(1.0, 0.0), RankTol::default()).ncols(), 1);
    }

    #[test]
    fn standard_circle_zero_mode() {
        let g = builders::circle(1.0).unwrap();
        let sys = SecularSystem::new(g.clone(), presets::standard_on(&g)).unwrap();
        assert_eq!(sys.zero_mode_kernel(RankTol::default()).ncols(), 1);
    }

    #[test]
    fn boundary_values_satisfy_conditions_on_kernel() {
        let sys = interval_dirichlet(std::f64::consts::PI);
        let k = c(3.0, 0.0);
        let ker = sys.kernel(k, RankTol::default());
        assert_eq!(ker.ncols(), 1);
        let v = ker.column(0).into_owned();
        let (psi, dpsi) = sys.boundary_values(&v, k);
        let r = sys.bc().a() * psi + sys.bc().b() * dpsi;
        assert!(r.norm() < 1e-12);
    }
}
