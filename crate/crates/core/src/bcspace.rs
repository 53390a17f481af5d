//! Vertex conditions `A psi + B psi' = 0` and the subspace `M = Ker(A, B)`
//! of `C^d (+) C^d` they define.

use crate::graph::MetricGraph;
use crate::linalg::{self, RankTol, I};
use crate::{CMat, C64};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BcError {
    #[error("A is {a_rows}x{a_cols} and B is {b_rows}x{b_cols}; expected equal square shapes")]
    Shape {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        b_cols: usize,
    },
    #[error("boundary dimension {bc} does not match graph dimension {graph}")]
    GraphMismatch { bc: usize, graph: usize },
    #[error("A + ikB is singular at k = {k} (condition number {cond:e})")]
    CayleyUndefined { k: C64, cond: f64 },
    #[error("k must be non-zero")]
    ZeroK,
    #[error("dim M = {dim} but {d} is required")]
    NotLagrangianDimension { dim: usize, d: usize },
    #[error("AA* + BB* is singular")]
    RankDeficientRows,
    #[error("preset `{0}` needs {1} boundary values")]
    PresetSize(String, usize),
}

/// Numerical tolerances used by the boundary-condition tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rank: RankTol,
    /// Relative tolerance for matrix identities.
    pub rel: f64,
    /// Largest condition number of `A + ikB` accepted by the Cayley map.
    pub cayley_cond_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank: RankTol::default(),
            rel: 1e-9,
            cayley_cond_max: 1e12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    a: CMat,
    b: CMat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Regularity {
    pub regular: bool,
    pub dim_m: usize,
    /// Best-conditioned point `k = i 2^j` where `A + ikB` is invertible.
    pub witness_k: Option<C64>,
    pub witness_cond: f64,
}

/// `M = M(L + P, P_perp)` with `P` an orthogonal projector and
/// `L = P_perp L P_perp`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sectorial {
    pub p: CMat,
    pub l: CMat,
}

impl Sectorial {
    pub fn p_perp(&self) -> CMat {
        linalg::identity(self.p.nrows()) - &self.p
    }

    pub fn to_bc(&self) -> BoundaryConditions {
        BoundaryConditions {
            a: &self.l + &self.p,
            b: self.p_perp(),
        }
    }

    /// Representation of the adjoint: `(L*, P)`.
    pub fn adjoint(&self) -> Sectorial {
        Sectorial {
            p: self.p.clone(),
            l: self.l.adjoint(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryCheck {
    pub holds: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub d: usize,
    pub dim_m: usize,
    pub regular: bool,
    pub witness_k: Option<C64>,
    pub self_adjoint: bool,
    pub m_sectorial: bool,
    /// `S(i)^T = S(i)`, i.e. symmetry under complex conjugation.
    pub t_self_adjoint: Option<bool>,
}

impl BoundaryConditions {
    pub fn new(a: CMat, b: CMat) -> Result<Self, BcError> {
        if a.shape() != b.shape() || a.nrows() != a.ncols() {
            return Err(BcError::Shape {
                a_rows: a.nrows(),
                a_cols: a.ncols(),
                b_rows: b.nrows(),
                b_cols: b.ncols(),
            });
        }
        Ok(BoundaryConditions { a, b })
    }

    /// Conditions given by an arbitrary number of rows. Only needed to
    /// describe subspaces of dimension below `d`, which cannot be written
    /// with `d` rows.
    pub fn from_constraints(a: CMat, b: CMat) -> Result<Self, BcError> {
        if a.shape() != b.shape() {
            return Err(BcError::Shape {
                a_rows: a.nrows(),
                a_cols: a.ncols(),
                b_rows: b.nrows(),
                b_cols: b.ncols(),
            });
        }
        Ok(BoundaryConditions { a, b })
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.a.nrows() == self.a.ncols()
    }

    pub fn check_graph(&self, g: &MetricGraph) -> Result<(), BcError> {
        if self.d() != g.d() {
            return Err(BcError::GraphMismatch {
                bc: self.d(),
                graph: g.d(),
            });
        }
        Ok(())
    }

    fn ab(&self) -> CMat {
        linalg::hstack(&self.a, &self.b)
    }

    pub fn dim_m(&self, tol: RankTol) -> usize {
        2 * self.d() - linalg::rank(&self.ab(), tol)
    }

    pub fn regularity(&self, tol: RankTol) -> Regularity {
        let d = self.d();
        let dim_m = self.dim_m(tol);
        let stacked = linalg::vstack(&self.a, &self.b);
        let regular = dim_m == d && linalg::rank(&stacked, tol) == d;
        let mut witness_k = None;
        let mut witness_cond = f64::INFINITY;
        if regular && self.is_square() {
            for j in -4..=8 {
                let k = I * 2f64.powi(j);
                let cnd = linalg::cond(&(&self.a + &self.b * (I * k)));
                if cnd < witness_cond {
                    witness_cond = cnd;
                    witness_k = Some(k);
                }
            }
        }
        Regularity {
            regular,
            dim_m,
            witness_k,
            witness_cond,
        }
    }

    pub fn is_regular(&self, tol: RankTol) -> bool {
        self.regularity(tol).regular
    }

    fn scale(&self) -> f64 {
        let na = linalg::op_norm(&self.a);
        let nb = linalg::op_norm(&self.b);
        na * na + nb * nb
    }

    pub fn self_adjoint_residual(&self) -> f64 {
        let r = &self.a * self.b.adjoint() - &self.b * self.a.adjoint();
        linalg::op_norm(&r) / self.scale().max(f64::MIN_POSITIVE)
    }

    pub fn is_self_adjoint(&self, tol: &Tolerances) -> bool {
        self.dim_m(tol.rank) == self.d() && self.self_adjoint_residual() <= tol.rel
    }

    /// `S(k) = -(A + ikB)^{-1} (A - ikB)`.
    pub fn cayley(&self, k: C64, tol: &Tolerances) -> Result<CMat, BcError> {
        let plus = &self.a + &self.b * (I * k);
        let minus = &self.a - &self.b * (I * k);
        let cnd = linalg::cond(&plus);
        if !(cnd <= tol.cayley_cond_max) {
            return Err(BcError::CayleyUndefined { k, cond: cnd });
        }
        let lu = plus.lu();
        let s = lu.solve(&minus).ok_or(BcError::CayleyUndefined { k, cond: cnd })?;
        Ok(-s)
    }

    /// `A_S = -(S - 1)/2`, `B_S = (S + 1)/(2ik)`.
    pub fn from_cayley(s: &CMat, k: C64) -> Result<Self, BcError> {
        if k == C64::new(0.0, 0.0) {
            return Err(BcError::ZeroK);
        }
        let id = linalg::identity(s.nrows());
        let a = (s - &id) * C64::from(-0.5);
        let b = (s + &id) / (I * k * 2.0);
        BoundaryConditions::new(a, b)
    }

    /// Orthonormal basis (columns) of `M` inside `C^{2d}`.
    pub fn subspace_basis(&self, tol: RankTol) -> CMat {
        linalg::nullspace(&self.ab(), tol)
    }

    /// Conditions describing the adjoint subspace `M*`.
    ///
    /// For regular conditions this goes through the Cayley transform at
    /// the regularity witness; otherwise `M* = (J M)^perp` with
    /// `J = [[0, 1], [-1, 0]]`.
    pub fn adjoint(&self, tol: &Tolerances) -> BoundaryConditions {
        let reg = self.regularity(tol.rank);
        if let (true, Some(k)) = (reg.regular, reg.witness_k) {
            if let Ok(s) = self.cayley(k, tol) {
                let id = linalg::identity(self.d());
                let sa = s.adjoint();
                let a = (&sa - &id) * C64::from(-0.5);
                let b = (&sa + &id) / (I * k.conj() * -2.0);
                return BoundaryConditions { a, b };
            }
        }
        self.adjoint_general(tol.rank)
    }

    pub fn adjoint_general(&self, tol: RankTol) -> BoundaryConditions {
        let d = self.d();
        let n = self.subspace_basis(tol);
        let m = n.ncols();
        let n1 = n.rows(0, d);
        let n2 = n.rows(d, d);
        let rows = m.max(d);
        let mut a = CMat::zeros(rows, d);
        let mut b = CMat::zeros(rows, d);
        a.view_mut((0, 0), (m, d)).copy_from(&n2.adjoint());
        b.view_mut((0, 0), (m, d)).copy_from(&(-n1.adjoint()));
        BoundaryConditions { a, b }
    }

    /// Orthogonal projector onto `M`, `1 - [A*; B*](AA* + BB*)^{-1}[A B]`.
    pub fn projector_onto_m(&self) -> Result<CMat, BcError> {
        let ab = self.ab();
        let gram = &ab * ab.adjoint();
        let inv = linalg::inverse(&gram).ok_or(BcError::RankDeficientRows)?;
        if linalg::cond(&gram) > 1e14 {
            return Err(BcError::RankDeficientRows);
        }
        Ok(linalg::identity(2 * self.d()) - ab.adjoint() * inv * ab)
    }

    pub fn projector_svd(&self, tol: RankTol) -> CMat {
        linalg::projector(&self.subspace_basis(tol))
    }

    /// Test for m-sectoriality, returning `(P, L)` with
    /// `M(A, B) = M(L + P, P_perp)` when it holds.
    pub fn m_sectorial(&self, tol: &Tolerances) -> Option<Sectorial> {
        let d = self.d();
        if self.dim_m(tol.rank) != d {
            return None;
        }
        let ker_b = linalg::nullspace(&self.b, tol.rank);
        let p = linalg::projector(&ker_b);
        let id = linalg::identity(d);
        let p_perp = &id - &p;
        let ran_b = linalg::range_basis(&self.b, tol.rank);
        let q = &id - linalg::projector(&ran_b);
        let qap = &q * &self.a * &p_perp;
        let scale = linalg::op_norm(&self.a).max(linalg::op_norm(&self.b));
        if linalg::op_norm(&qap) > tol.rel * scale.max(1.0) {
            return None;
        }
        let l = linalg::pinv(&self.b, tol.rank) * &self.a * &p_perp;
        let sect = Sectorial { p, l };
        let dist = projector_distance(self, &sect.to_bc(), tol.rank);
        (dist <= 1e3 * tol.rel).then_some(sect)
    }

    /// `B_eps = B + eps P` with `P` the projector onto `Ker B`.
    pub fn regularize(&self, eps: f64, tol: RankTol) -> BoundaryConditions {
        let p = linalg::projector(&linalg::nullspace(&self.b, tol));
        BoundaryConditions {
            a: self.a.clone(),
            b: &self.b + p * C64::from(eps),
        }
    }

    /// Checks `S(i kappa)* = conj(C^{-1} S(i kappa) C)`, i.e. whether the
    /// Laplacian is self-adjoint with respect to the antilinear map
    /// `psi -> C conj(psi)`.
    pub fn check_antilinear_symmetry(
        &self,
        c: &CMat,
        kappa: f64,
        tol: &Tolerances,
    ) -> Result<SymmetryCheck, BcError> {
        let s = self.cayley(I * kappa, tol)?;
        let ci = linalg::inverse(c).ok_or(BcError::RankDeficientRows)?;
        let rhs = (ci * &s * c).map(|z| z.conj());
        let residual = linalg::op_norm(&(s.adjoint() - rhs)) / linalg::op_norm(&s).max(1.0);
        Ok(SymmetryCheck {
            holds: residual <= tol.rel * 10.0,
            residual,
        })
    }

    pub fn classify(&self, tol: &Tolerances) -> Classification {
        let reg = self.regularity(tol.rank);
        let t_self_adjoint = if reg.regular {
            self.check_antilinear_symmetry(&linalg::identity(self.d()), 1.0, tol)
                .ok()
                .map(|c| c.holds)
        } else {
            None
        };
        Classification {
            d: self.d(),
            dim_m: reg.dim_m,
            regular: reg.regular,
            witness_k: reg.witness_k,
            self_adjoint: reg.dim_m == self.d() && self.self_adjoint_residual() <= tol.rel,
            m_sectorial: self.m_sectorial(tol).is_some(),
            t_self_adjoint,
        }
    }

    /// Place local vertex conditions into a global `d x d` pair. `local`
    /// receives a vertex and its boundary coordinates and returns the local
    /// `(A_v, B_v)` acting on those coordinates in that order.
    pub fn assemble_local<F>(g: &MetricGraph, mut local: F) -> Result<Self, BcError>
    where
        F: FnMut(&str, &[usize]) -> Result<(CMat, CMat), BcError>,
    {
        let d = g.d();
        let mut a = CMat::zeros(d, d);
        let mut b = CMat::zeros(d, d);
        let mut row = 0;
        for v in g.vertices() {
            let ports = g.ports_at(v);
            let (av, bv) = local(v, &ports)?;
            let m = ports.len();
            if av.shape() != (m, m) || bv.shape() != (m, m) {
                return Err(BcError::Shape {
                    a_rows: av.nrows(),
                    a_cols: av.ncols(),
                    b_rows: bv.nrows(),
                    b_cols: bv.ncols(),
                });
            }
            for r in 0..m {
                for (cl, &p) in ports.iter().enumerate() {
                    a[(row + r, p)] = av[(r, cl)];
                    b[(row + r, p)] = bv[(r, cl)];
                }
            }
            row += m;
        }
        BoundaryConditions::new(a, b)
    }
}

/// Operator-norm distance between the orthogonal projectors onto the two
/// subspaces.
pub fn projector_distance(x: &BoundaryConditions, y: &BoundaryConditions, tol: RankTol) -> f64 {
    linalg::op_norm(&(x.projector_svd(tol) - y.projector_svd(tol)))
}

/// Standard families of vertex conditions.
pub mod presets {
    use super::*;
    use crate::linalg::{c, from_real_rows};

    pub fn dirichlet(d: usize) -> BoundaryConditions {
        BoundaryConditions::new(CMat::identity(d, d), CMat::zeros(d, d)).expect("square")
    }

    pub fn neumann(d: usize) -> BoundaryConditions {
        BoundaryConditions::new(CMat::zeros(d, d), CMat::identity(d, d)).expect("square")
    }

    fn continuity_rows(nu: usize) -> CMat {
        let mut a = CMat::zeros(nu, nu);
        for i in 0..nu.saturating_sub(1) {
            a[(i, i)] = c(1.0, 0.0);
            a[(i, i + 1)] = c(-1.0, 0.0);
        }
        a
    }

    /// Continuity plus vanishing sum of derivatives (Kirchhoff).
    pub fn standard(nu: usize) -> BoundaryConditions {
        delta(nu, C64::new(0.0, 0.0))
    }

    /// Continuity plus `sum psi' = gamma psi` at the vertex.
    pub fn delta(nu: usize, gamma: C64) -> BoundaryConditions {
        let mut a = continuity_rows(nu);
        let mut b = CMat::zeros(nu, nu);
        a[(nu - 1, 0)] = -gamma;
        for j in 0..nu {
            b[(nu - 1, j)] = c(1.0, 0.0);
        }
        BoundaryConditions::new(a, b).expect("square")
    }

    pub fn tau(t: f64) -> BoundaryConditions {
        let e = C64::from_polar(1.0, t);
        let a = crate::linalg::from_rows(&[&[c(1.0, 0.0), -e], &[c(0.0, 0.0), c(0.0, 0.0)]]);
        let b = crate::linalg::from_rows(&[&[c(0.0, 0.0), c(0.0, 0.0)], &[c(1.0, 0.0), e.conj()]]);
        BoundaryConditions::new(a, b).expect("square")
    }

    /// `psi(0) = 0`, `psi(a) = psi'(0)` on an interval.
    pub fn intermediate() -> BoundaryConditions {
        BoundaryConditions::new(
            CMat::identity(2, 2),
            from_real_rows(&[&[0.0, 0.0], &[-1.0, 0.0]]),
        )
        .expect("square")
    }

    pub fn sgnsgn() -> BoundaryConditions {
        BoundaryConditions::new(
            from_real_rows(&[&[1.0, -1.0], &[0.0, 0.0]]),
            from_real_rows(&[&[0.0, 0.0], &[1.0, -1.0]]),
        )
        .expect("square")
    }

    /// Continuity at a star vertex and a signed derivative sum, `+1` on the
    /// first `plus` edges and `-1` on the remaining `minus` edges.
    pub fn gsgnsgn(plus: usize, minus: usize) -> BoundaryConditions {
        let nu = plus + minus;
        let a = continuity_rows(nu);
        let mut b = CMat::zeros(nu, nu);
        for j in 0..nu {
            b[(nu - 1, j)] = c(if j < plus { 1.0 } else { -1.0 }, 0.0);
        }
        BoundaryConditions::new(a, b).expect("square")
    }

    /// `psi(0) = 0`, `psi'(0) = 0` on an interval: no eigenvalues at all.
    pub fn empty_spectrum() -> BoundaryConditions {
        BoundaryConditions::new(
            from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]),
            from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]),
        )
        .expect("square")
    }

    pub fn robin(nu: usize, sigma: C64) -> BoundaryConditions {
        BoundaryConditions::new(
            CMat::identity(nu, nu) * sigma,
            CMat::identity(nu, nu),
        )
        .expect("square")
    }

    pub fn by_degree<F>(g: &MetricGraph, f: F) -> Result<BoundaryConditions, BcError>
    where
        F: Fn(usize) -> BoundaryConditions,
    {
        BoundaryConditions::assemble_local(g, |_, ports| {
            let bc = f(ports.len());
            Ok((bc.a().clone(), bc.b().clone()))
        })
    }

    /// Standard conditions at every vertex of `g`.
    pub fn standard_on(g: &MetricGraph) -> BoundaryConditions {
        by_degree(g, standard).expect("local sizes match")
    }
}
