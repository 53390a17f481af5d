//! Similarity transforms between Laplacians on graphs whose internal edges
//! all have the same length.
//!
//! A block-diagonal `G = diag(G_E, G_I, G_I)` acting on boundary values maps
//! the conditions `(A, B)` to `(G^-1 A G, G^-1 B G)`, and the edge-mixing map
//! it induces on functions conjugates the two Laplacians. If the image is
//! self-adjoint, `Theta = (G G^*)^-1` is a metric: `T^* = Theta T Theta^-1`.

use crate::bcspace::{projector_distance, BcError, BoundaryConditions, Tolerances};
use crate::graph::MetricGraph;
use crate::linalg::{self, I};
use crate::secular::SecularSystem;
use crate::spectrum::{self, SolverOptions, SpectrumError};
use crate::{CMat, C64};
use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

/// Eigenvector matrices with a larger condition number count as defective.
pub const DIAGONALIZER_COND_MAX: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error(transparent)]
    Bc(#[from] BcError),
    #[error("internal edges have different lengths")]
    UnequalLengths,
    #[error("block sizes ({e}, {i}) do not match the graph ({ne}, {ni})")]
    BlockShape { e: usize, i: usize, ne: usize, ni: usize },
    #[error("block transform is singular (condition {0:e})")]
    SingularBlock(f64),
    #[error("matrix is not block diagonal with equal internal blocks (deviation {0:e})")]
    NotBlockStructured(f64),
    #[error("conjugated conditions differ from the target (projector distance {0:e})")]
    NotSimilar(f64),
    #[error("irregular boundary conditions: no Cayley transform exists")]
    Irregular,
    #[error("target conditions are not self-adjoint")]
    TargetNotSelfAdjoint,
    #[error("k must be real and positive, got {0}")]
    BadK(f64),
}

/// `G = diag(G_E, G_I, G_I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTransform {
    ge: CMat,
    gi: CMat,
}

impl BlockTransform {
    pub fn new(ge: CMat, gi: CMat) -> Result<Self, SimilarityError> {
        for m in [&ge, &gi] {
            if m.nrows() != m.ncols() {
                return Err(SimilarityError::BlockShape {
                    e: ge.nrows(),
                    i: gi.nrows(),
                    ne: ge.ncols(),
                    ni: gi.ncols(),
                });
            }
            if m.nrows() > 0 {
                let c = linalg::cond(m);
                if !(c < 1e12) {
                    return Err(SimilarityError::SingularBlock(c));
                }
            }
        }
        Ok(BlockTransform { ge, gi })
    }

    pub fn identity(ne: usize, ni: usize) -> Self {
        BlockTransform {
            ge: linalg::identity(ne),
            gi: linalg::identity(ni),
        }
    }

    /// Split a full `d x d` matrix into blocks, checking the structure.
    pub fn from_full(g: &CMat, ne: usize, ni: usize) -> Result<Self, SimilarityError> {
        let d = ne + 2 * ni;
        if g.nrows() != d || g.ncols() != d {
            return Err(SimilarityError::BlockShape { e: g.nrows(), i: g.ncols(), ne, ni });
        }
        let ge = g.view((0, 0), (ne, ne)).into_owned();
        let gi = g.view((ne, ne), (ni, ni)).into_owned();
        let t = BlockTransform::new(ge, gi)?;
        let dev = linalg::max_abs(&(g - t.assemble())) / linalg::max_abs(g).max(f64::MIN_POSITIVE);
        if dev > 1e-10 {
            return Err(SimilarityError::NotBlockStructured(dev));
        }
        Ok(t)
    }

    pub fn external_block(&self) -> &CMat {
        &self.ge
    }

    pub fn internal_block(&self) -> &CMat {
        &self.gi
    }

    pub fn assemble(&self) -> CMat {
        linalg::block_diag(&[&self.ge, &self.gi, &self.gi])
    }

    pub fn inverse(&self) -> BlockTransform {
        let inv = |m: &CMat| {
            if m.nrows() == 0 {
                m.clone()
            } else {
                linalg::inverse(m).expect("checked invertible")
            }
        };
        BlockTransform {
            ge: inv(&self.ge),
            gi: inv(&self.gi),
        }
    }

    /// `(G^-1 A G, G^-1 B G)`.
    pub fn conjugate(&self, bc: &BoundaryConditions) -> Result<BoundaryConditions, SimilarityError> {
        let g = self.assemble();
        let gi = self.inverse().assemble();
        Ok(BoundaryConditions::new(&gi * bc.a() * &g, &gi * bc.b() * &g)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    /// `Theta = (G G^*)^-1`.
    pub theta: CMat,
    /// `Theta^-1 = G G^*`.
    pub theta_inv: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityCertificate {
    pub transform: BlockTransform,
    pub source: BoundaryConditions,
    pub target: BoundaryConditions,
    pub target_self_adjoint: bool,
    /// Projector distance between the conjugated source and the target.
    pub residual: f64,
    /// Real `k` at which the Cayley transform was diagonalised, if any.
    pub k: Option<f64>,
    /// The transform only made `S(k)` unitary at the primary `k`.
    pub single_k: bool,
    pub metric: Option<Metric>,
}

fn check_graph(g: &MetricGraph, t: &BlockTransform) -> Result<(), SimilarityError> {
    if g.n_internal() > 0 && g.equal_length().is_none() {
        return Err(SimilarityError::UnequalLengths);
    }
    let (ne, ni) = (g.n_external(), g.n_internal());
    if t.ge.nrows() != ne || t.gi.nrows() != ni {
        return Err(SimilarityError::BlockShape {
            e: t.ge.nrows(),
            i: t.gi.nrows(),
            ne,
            ni,
        });
    }
    Ok(())
}

fn metric_of(t: &BlockTransform) -> Metric {
    let g = t.assemble();
    let ggs = &g * g.adjoint();
    let theta = linalg::inverse(&ggs).expect("G invertible");
    Metric {
        theta: hermitize(&theta),
        theta_inv: hermitize(&ggs),
    }
}

fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::from(0.5)
}

/// Check that `t` maps `bc` onto `target`, i.e.
/// `M(G^-1 A G, G^-1 B G) = M(A', B')`.
pub fn verify_similarity(
    g: &MetricGraph,
    bc: &BoundaryConditions,
    target: &BoundaryConditions,
    t: &BlockTransform,
    tol: &Tolerances,
) -> Result<SimilarityCertificate, SimilarityError> {
    check_graph(g, t)?;
    bc.check_graph(g)?;
    target.check_graph(g)?;
    let conj = t.conjugate(bc)?;
    let residual = projector_distance(&conj, target, tol.rank);
    if !(residual <= 1e3 * tol.rel) {
        return Err(SimilarityError::NotSimilar(residual));
    }
    let target_self_adjoint = target.is_self_adjoint(tol);
    Ok(SimilarityCertificate {
        transform: t.clone(),
        source: bc.clone(),
        target: target.clone(),
        target_self_adjoint,
        residual,
        k: None,
        single_k: false,
        metric: target_self_adjoint.then(|| metric_of(t)),
    })
}

/// Why no similarity to a self-adjoint Laplacian was produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Obstruction {
    /// Some eigenvalue of `S(k)` is off the unit circle.
    NonUnimodular { max_deviation: f64 },
    /// `S(k)` has no well-conditioned eigenbasis.
    Defective { condition: f64 },
    /// No positive definite invariant form with the required block
    /// structure was found. The search is not exhaustive, so this is
    /// inconclusive.
    BlockStructure { invariant_dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimilaritySearch {
    Found(Box<SimilarityCertificate>),
    NotFound(Obstruction),
}

/// Real orthonormal (Frobenius) basis of block-structured Hermitian
/// matrices `diag(H_E, H_I, H_I)`.
fn hermitian_block_basis(ne: usize, ni: usize) -> Vec<CMat> {
    let d = ne + 2 * ni;
    let mut out = Vec::new();
    let mut push_block = |n: usize, offsets: &[usize]| {
        let w = 1.0 / (offsets.len() as f64).sqrt();
        for j in 0..n {
            for l in j..n {
                let variants: Vec<(C64, C64)> = if j == l {
                    vec![(C64::from(w), C64::from(w))]
                } else {
                    let s = w / 2f64.sqrt();
                    vec![(C64::from(s), C64::from(s)), (I * s, -I * s)]
                };
                for (a, b) in variants {
                    let mut m = CMat::zeros(d, d);
                    for &o in offsets {
                        m[(o + j, o + l)] += a;
                        if j != l {
                            m[(o + l, o + j)] += b;
                        }
                    }
                    out.push(m);
                }
            }
        }
    };
    push_block(ne, &[0]);
    push_block(ni, &[ne, ne + ni]);
    out
}

/// Block-structured Hermitian `H` with `S^* H S = H`, as an orthonormal
/// list.
fn invariant_forms(s: &CMat, ne: usize, ni: usize) -> Vec<CMat> {
    let basis = hermitian_block_basis(ne, ni);
    let d = s.nrows();
    let p = basis.len();
    if p == 0 {
        return Vec::new();
    }
    let mut m = DMatrix::<f64>::zeros(2 * d * d, p.max(1));
    for (c, h) in basis.iter().enumerate() {
        let img = s.adjoint() * h * s - h;
        for (r, z) in img.iter().enumerate() {
            m[(2 * r, c)] = z.re;
            m[(2 * r + 1, c)] = z.im;
        }
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thr = 1e-10 * smax.max(1.0);
    let mut out = Vec::new();
    for (j, &sv) in svd.singular_values.iter().enumerate() {
        if sv <= thr {
            let mut h = CMat::zeros(d, d);
            for (c, b) in basis.iter().enumerate() {
                h += b * C64::from(v_t[(j, c)]);
            }
            out.push(h);
        }
    }
    out
}

fn frob_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn project(forms: &[CMat], h: &CMat) -> CMat {
    let mut out = CMat::zeros(h.nrows(), h.ncols());
    for f in forms {
        out += f * C64::from(frob_inner(f, h));
    }
    out
}

fn positive_definite(h: &CMat) -> bool {
    let scale = linalg::op_norm(h);
    scale > 0.0 && linalg::min_hermitian_eigenvalue(h) > 1e-10 * scale
}

/// Look for `G = diag(G_E, G_I, G_I)` making `G^-1 S(k) G` unitary at real
/// `k > 0`; the image then defines self-adjoint conditions.
///
/// The transform comes from a positive definite invariant form `H`
/// (`S^* H S = H`) of the same block shape: `G = H^{-1/2}` and `Theta = H`.
/// Among the invariant forms the one built from unit left eigenvectors of
/// `S` is preferred; it is projected onto the block-structured forms, and
/// the projection of the identity is the fallback. `H` is normalised to
/// `det H = 1`.
pub fn find_similarity_to_selfadjoint(
    g: &MetricGraph,
    bc: &BoundaryConditions,
    k: f64,
    tol: &Tolerances,
) -> Result<SimilaritySearch, SimilarityError> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(SimilarityError::BadK(k));
    }
    if g.n_internal() > 0 && g.equal_length().is_none() {
        return Err(SimilarityError::UnequalLengths);
    }
    bc.check_graph(g)?;
    if !bc.is_regular(tol.rank) {
        return Err(SimilarityError::Irregular);
    }
    let kc = C64::new(k, 0.0);
    let s = bc.cayley(kc, tol)?;
    let d = s.nrows();
    let (ne, ni) = (g.n_external(), g.n_internal());

    let eig = linalg::eigen(&s, 1e-8, tol.rank);
    let max_dev = eig.values.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    if max_dev > 1e-8 {
        return Ok(SimilaritySearch::NotFound(Obstruction::NonUnimodular { max_deviation: max_dev }));
    }
    let condition = if eig.diagonalizable { linalg::cond(&eig.vectors) } else { f64::INFINITY };
    if !(condition < DIAGONALIZER_COND_MAX) {
        return Ok(SimilaritySearch::NotFound(Obstruction::Defective { condition }));
    }

    let forms = invariant_forms(&s, ne, ni);
    let left = linalg::inverse(&eig.vectors).expect("well conditioned");
    let mut unit_left = left.clone();
    for mut row in unit_left.row_iter_mut() {
        let n = row.norm();
        row /= C64::from(n);
    }
    let h0 = unit_left.adjoint() * &unit_left;
    let candidates = [project(&forms, &h0), project(&forms, &linalg::identity(d))];
    let Some(h) = candidates.into_iter().map(|h| hermitize(&h)).find(positive_definite) else {
        return Ok(SimilaritySearch::NotFound(Obstruction::BlockStructure { invariant_dim: forms.len() }));
    };
    let det = h.determinant().re;
    let h = h * C64::from(det.powf(-1.0 / d as f64));
    let (sqrt_h, inv_sqrt_h) = linalg::hermitian_sqrt(&h).expect("positive definite");
    let t = BlockTransform::from_full(&inv_sqrt_h, ne, ni)?;
    let u = &sqrt_h * &s * &inv_sqrt_h;
    let target = BoundaryConditions::from_cayley(&u, kc)?;
    let mut cert = verify_similarity(g, bc, &target, &t, tol)?;
    if !cert.target_self_adjoint {
        return Err(SimilarityError::TargetNotSelfAdjoint);
    }
    // The image of S at other real k should stay unitary.
    let single_k = [1.7, 2.9].iter().any(|&f| {
        let kk = C64::new(k * f, 0.0);
        match bc.cayley(kk, tol) {
            Ok(s2) => {
                let u2 = &sqrt_h * s2 * &inv_sqrt_h;
                linalg::op_norm(&(u2.adjoint() * &u2 - linalg::identity(d))) > 1e-8
            }
            Err(_) => true,
        }
    });
    cert.k = Some(k);
    cert.single_k = single_k;
    cert.metric = Some(Metric {
        theta: h.clone(),
        theta_inv: hermitize(&linalg::inverse(&h).expect("positive definite")),
    });
    Ok(SimilaritySearch::Found(Box::new(cert)))
}

/// `(Theta, Theta^-1)` for a certificate with self-adjoint target.
pub fn metric_operator(cert: &SimilarityCertificate) -> Result<(CMat, CMat), SimilarityError> {
    if !cert.target_self_adjoint {
        return Err(SimilarityError::TargetNotSelfAdjoint);
    }
    let m = cert.metric.clone().unwrap_or_else(|| metric_of(&cert.transform));
    Ok((m.theta, m.theta_inv))
}

/// Relative residual of `S(k)^* = Theta S(k)^-1 Theta^-1` at real `k`, the
/// boundary form of `T^* = Theta T Theta^-1`.
pub fn quasi_self_adjoint_residual(
    bc: &BoundaryConditions,
    theta: &CMat,
    k: f64,
    tol: &Tolerances,
) -> Result<f64, SimilarityError> {
    let s = bc.cayley(C64::new(k, 0.0), tol)?;
    let si = linalg::inverse(&s).ok_or(SimilarityError::Irregular)?;
    let ti = linalg::inverse(theta).ok_or(SimilarityError::SingularBlock(f64::INFINITY))?;
    let r = s.adjoint() - theta * si * ti;
    Ok(linalg::op_norm(&r) / linalg::op_norm(&s))
}

/// Projector distance between the adjoint conditions and
/// `(Theta A Theta^-1, Theta B Theta^-1)`; zero exactly when `Theta` is a
/// metric at the level of boundary conditions.
pub fn metric_adjoint_distance(bc: &BoundaryConditions, theta: &CMat, tol: &Tolerances) -> Result<f64, SimilarityError> {
    let ti = linalg::inverse(theta).ok_or(SimilarityError::SingularBlock(f64::INFINITY))?;
    let conj = BoundaryConditions::new(theta * bc.a() * &ti, theta * bc.b() * &ti)?;
    Ok(projector_distance(&bc.adjoint(tol), &conj, tol.rank))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndKind {
    Dirichlet,
    Neumann,
    Other,
}

impl EndKind {
    fn of(mu: C64) -> Self {
        if (mu + 1.0).norm() < 1e-9 {
            EndKind::Dirichlet
        } else if (mu - 1.0).norm() < 1e-9 {
            EndKind::Neumann
        } else {
            EndKind::Other
        }
    }
}

/// One decoupled interval `[0, a]` with scalar conditions given by the
/// Cayley eigenvalues at its two ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoupledInterval {
    pub start: C64,
    pub end: C64,
    pub start_kind: EndKind,
    pub end_kind: EndKind,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoupling {
    pub length: f64,
    /// Reference `k` for the scalar conditions.
    pub k_ref: C64,
    pub intervals: Vec<DecoupledInterval>,
    pub transform: BlockTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NotCompact,
    UnequalLengths,
    /// Some vertex has both incoming and outgoing edges.
    NotSourceSinkOriented,
    Irregular,
    /// `S` couples start points with end points.
    EndsCoupled { norm: f64 },
    /// The blocks of `S` at start and end points do not commute, so no
    /// common edge-mixing matrix diagonalises both.
    NonCommuting { norm: f64 },
    Defective { condition: f64 },
    /// The diagonaliser found at the reference `k` fails at another `k`.
    KDependent { deviation: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("decoupling hypotheses violated: {0:?}")]
pub struct DecouplingError(pub Vec<Violation>);

fn off_diagonal(m: &CMat) -> f64 {
    let mut s = 0.0f64;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if r != c {
                s = s.max(m[(r, c)].norm());
            }
        }
    }
    s
}

/// Reduce a compact equal-length graph whose vertices are all sources or
/// sinks to independent intervals.
///
/// With `S = diag(S_-, S_+)` over start and end points, a common
/// diagonaliser `G_I` of `S_-` and `S_+` exists exactly when they commute
/// (and are diagonalisable); the edge-mixing map of `G_I` then splits the
/// Laplacian into intervals whose end conditions are the paired
/// eigenvalues. Identical conditions at every vertex are not required.
pub fn decouple_symmetric_graph(g: &MetricGraph, bc: &BoundaryConditions, tol: &Tolerances) -> Result<Decoupling, DecouplingError> {
    let mut v = Vec::new();
    if !g.is_compact() {
        v.push(Violation::NotCompact);
    }
    let length = g.equal_length();
    if length.is_none() {
        v.push(Violation::UnequalLengths);
    }
    if g.is_compact() && !g.is_source_sink_oriented() {
        v.push(Violation::NotSourceSinkOriented);
    }
    let reg = bc.regularity(tol.rank);
    if !reg.regular || bc.check_graph(g).is_err() {
        v.push(Violation::Irregular);
    }
    if !v.is_empty() {
        return Err(DecouplingError(v));
    }
    let a = length.expect("checked");
    let ni = g.n_internal();
    let k_ref = reg.witness_k.expect("regular");
    let s = bc.cayley(k_ref, tol).map_err(|_| DecouplingError(vec![Violation::Irregular]))?;
    let s_mm = s.view((0, 0), (ni, ni)).into_owned();
    let s_pp = s.view((ni, ni), (ni, ni)).into_owned();
    let coupling = linalg::max_abs(&s.view((0, ni), (ni, ni)).into_owned())
        .max(linalg::max_abs(&s.view((ni, 0), (ni, ni)).into_owned()));
    if coupling > 1e-9 {
        v.push(Violation::EndsCoupled { norm: coupling });
    }
    let comm = linalg::op_norm(&(&s_mm * &s_pp - &s_pp * &s_mm));
    if comm > 1e-9 * (1.0 + linalg::op_norm(&s_mm) * linalg::op_norm(&s_pp)) {
        v.push(Violation::NonCommuting { norm: comm });
    }
    if !v.is_empty() {
        return Err(DecouplingError(v));
    }

    // Diagonalise S_-, then S_+ inside each eigenspace of S_-.
    let em = linalg::eigen(&s_mm, 1e-8, tol.rank);
    if !em.diagonalizable {
        return Err(DecouplingError(vec![Violation::Defective { condition: f64::INFINITY }]));
    }
    let mut cols: Vec<nalgebra::DVector<C64>> = Vec::new();
    let mut pairs: Vec<(C64, C64)> = Vec::new();
    let mut j = 0;
    while j < em.values.len() {
        let mu = em.values[j];
        let mut n = 1;
        while j + n < em.values.len() && em.values[j + n] == mu {
            n += 1;
        }
        let vb = em.vectors.columns(j, n).into_owned();
        let restricted = linalg::pinv(&vb, tol.rank) * &s_pp * &vb;
        let ep = linalg::eigen(&restricted, 1e-8, tol.rank);
        if !ep.diagonalizable {
            return Err(DecouplingError(vec![Violation::Defective { condition: f64::INFINITY }]));
        }
        let w = &vb * &ep.vectors;
        for c in 0..n {
            cols.push(w.column(c).into_owned());
            pairs.push((mu, ep.values[c]));
        }
        j += n;
    }
    let gi = CMat::from_columns(&cols);
    let condition = linalg::cond(&gi);
    if !(condition < DIAGONALIZER_COND_MAX) {
        return Err(DecouplingError(vec![Violation::Defective { condition }]));
    }
    let t = BlockTransform::new(CMat::zeros(0, 0), gi).map_err(|_| DecouplingError(vec![Violation::Defective { condition }]))?;

    // The same transform must diagonalise S at other k.
    let ga = t.assemble();
    let gai = t.inverse().assemble();
    let mut deviation = 0.0f64;
    for f in [0.5, 3.0] {
        if let Ok(s2) = bc.cayley(k_ref * f, tol) {
            let dd = &gai * s2 * &ga;
            deviation = deviation.max(off_diagonal(&dd));
        }
    }
    if deviation > 1e-8 {
        return Err(DecouplingError(vec![Violation::KDependent { deviation }]));
    }

    let mut intervals: Vec<DecoupledInterval> = Vec::new();
    for (m, p) in pairs {
        match intervals.iter_mut().find(|iv| (iv.start - m).norm() < 1e-8 && (iv.end - p).norm() < 1e-8) {
            Some(iv) => iv.multiplicity += 1,
            None => intervals.push(DecoupledInterval {
                start: m,
                end: p,
                start_kind: EndKind::of(m),
                end_kind: EndKind::of(p),
                multiplicity: 1,
            }),
        }
    }
    Ok(Decoupling {
        length: a,
        k_ref,
        intervals,
        transform: t,
    })
}

impl Decoupling {
    /// Conditions on the single interval `[0, a]` for one decoupled piece.
    pub fn interval_conditions(&self, iv: &DecoupledInterval) -> Result<BoundaryConditions, BcError> {
        // Snap recognised ends so exact Neumann zero modes survive.
        let snap = |mu: C64, kind: EndKind| match kind {
            EndKind::Dirichlet => C64::from(-1.0),
            EndKind::Neumann => C64::from(1.0),
            EndKind::Other => mu,
        };
        let s = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            snap(iv.start, iv.start_kind),
            snap(iv.end, iv.end_kind),
        ]));
        BoundaryConditions::from_cayley(&s, self.k_ref)
    }

    /// Eigenvalues `k^2` of all pieces with multiplicities, found by the
    /// contour solver on each interval; zero modes included.
    pub fn spectrum(&self, re_max: f64, im_max: f64, opts: &SolverOptions) -> Result<Vec<(C64, usize)>, SpectrumError> {
        let graph = crate::graph::builders::interval(self.length).expect("positive length");
        let mut out: Vec<(C64, usize)> = Vec::new();
        for iv in &self.intervals {
            let bc = self.interval_conditions(iv)?;
            let sys = SecularSystem::new(graph.clone(), bc)?;
            let rep = spectrum::find_eigenvalues(&sys, re_max, im_max, opts)?;
            for p in rep.points {
                let m = match p.status {
                    spectrum::PointStatus::Eigenvalue => p.winding_multiplicity,
                    spectrum::PointStatus::ZeroMode => p.geometric_multiplicity,
                    _ => 0,
                } * iv.multiplicity;
                if m == 0 {
                    continue;
                }
                match out.iter_mut().find(|(l, _)| (*l - p.lambda).norm() <= 1e-8 * (1.0 + l.norm())) {
                    Some(e) => e.1 += m,
                    None => out.push((p.lambda, m)),
                }
            }
        }
        out.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
        Ok(out)
    }
}
