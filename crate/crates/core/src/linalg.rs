//! Small dense complex linear-algebra helpers shared by the other modules.

use crate::{CMat, C64};
use nalgebra::linalg::SymmetricEigen;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Numerical rank threshold `max(rows, cols) * eps * sigma_max * scale`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RankTol {
    pub scale: f64,
}

impl Default for RankTol {
    fn default() -> Self {
        RankTol { scale: 1e3 }
    }
}

impl RankTol {
    pub fn threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        rows.max(cols) as f64 * f64::EPSILON * sigma_max * self.scale
    }
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    // The SVD iteration does not terminate on NaN input.
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return vec![f64::NAN; m.nrows().min(m.ncols())];
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

pub fn rank(m: &CMat, tol: RankTol) -> usize {
    let sv = singular_values(m);
    let Some(&smax) = sv.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    let thr = tol.threshold(m.nrows(), m.ncols(), smax);
    sv.iter().filter(|&&s| s > thr).count()
}

/// Orthonormal basis of the kernel, one column per kernel direction.
pub fn nullspace(m: &CMat, tol: RankTol) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    // Pad to square so the SVD returns a full right factor.
    let rows = m.nrows().max(n);
    let mut sq = CMat::zeros(rows, n);
    sq.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thr = if smax == 0.0 {
        0.0
    } else {
        tol.threshold(m.nrows(), n, smax)
    };
    let idx: Vec<usize> = (0..n)
        .filter(|&j| smax == 0.0 || svd.singular_values[j] <= thr)
        .collect();
    let mut out = CMat::zeros(n, idx.len());
    for (c, &j) in idx.iter().enumerate() {
        for r in 0..n {
            out[(r, c)] = v_t[(j, r)].conj();
        }
    }
    out
}

/// Orthonormal basis of the column space.
pub fn range_basis(m: &CMat, tol: RankTol) -> CMat {
    if m.is_empty() {
        return CMat::zeros(m.nrows(), 0);
    }
    let r = rank(m, tol);
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    u.columns(0, r).into_owned()
}

pub fn projector(basis: &CMat) -> CMat {
    basis * basis.adjoint()
}

pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn cond(m: &CMat) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&a), Some(&b)) if b > 0.0 => a / b,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

/// Moore-Penrose pseudo-inverse with the crate rank threshold.
pub fn pinv(m: &CMat, tol: RankTol) -> CMat {
    let (r, cdim) = (m.nrows(), m.ncols());
    if m.is_empty() {
        return CMat::zeros(cdim, r);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u");
    let v_t = svd.v_t.as_ref().expect("v_t");
    let smax = svd.singular_values[0];
    let thr = tol.threshold(r, cdim, smax);
    let mut out = CMat::zeros(cdim, r);
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if s > thr && s > 0.0 {
            let vj = v_t.row(j).adjoint();
            let uj = u.column(j).adjoint();
            out += (vj * uj) * C64::from(1.0 / s);
        }
    }
    out
}

/// Principal-branch logarithm of the determinant. `None` when an LU pivot
/// is exactly zero.
pub fn log_det(m: &CMat) -> Option<C64> {
    let n = m.nrows();
    if n == 0 {
        return Some(C64::new(0.0, 0.0));
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        let p = u[(j, j)];
        if p == C64::new(0.0, 0.0) {
            return None;
        }
        acc += p.ln();
    }
    let sign: C64 = lu.p().determinant();
    if sign.re < 0.0 {
        acc += C64::new(0.0, std::f64::consts::PI);
    }
    Some(acc)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn block_diag(blocks: &[&CMat]) -> CMat {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cn: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(r, cn);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.view_mut((i, j), (b.nrows(), b.ncols())).copy_from(*b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}

pub fn hstack(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn vstack(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

pub fn from_rows(rows: &[&[C64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMat::from_fn(n, m, |i, j| C64::from(rows[i][j]))
}

/// Eigen-decomposition of a general complex matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues repeated by algebraic multiplicity, grouped by cluster.
    pub values: Vec<C64>,
    /// Eigenvector columns aligned with `values` when diagonalizable;
    /// otherwise only the available eigenvectors.
    pub vectors: CMat,
    pub diagonalizable: bool,
}

/// Eigenvalues via complex Schur form; eigenvectors as kernels of
/// `m - mu` for each cluster of nearby eigenvalues.
pub fn eigen(m: &CMat, cluster_tol: f64, tol: RankTol) -> EigenDecomposition {
    let n = m.nrows();
    let schur = m.clone().schur();
    let (_, t) = schur.unpack();
    let raw: Vec<C64> = (0..n).map(|j| t[(j, j)]).collect();
    let scale = 1.0 + op_norm(m);
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    for z in raw {
        match clusters
            .iter_mut()
            .find(|cl| (cl[0] - z).norm() <= cluster_tol * scale)
        {
            Some(cl) => cl.push(z),
            None => clusters.push(vec![z]),
        }
    }
    let mut values = Vec::with_capacity(n);
    let mut cols: Vec<nalgebra::DVector<C64>> = Vec::new();
    let mut diagonalizable = true;
    for cl in &clusters {
        let mu = cl.iter().sum::<C64>() / C64::from(cl.len() as f64);
        let shifted = m - CMat::identity(n, n) * mu;
        let mut ker = nullspace(&shifted, tol);
        if ker.ncols() < cl.len() {
            // Loosen to the cluster scale: a cluster of width w leaves
            // singular values of order w.
            let width = cl.iter().map(|z| (z - mu).norm()).fold(0.0, f64::max);
            let sv = singular_values(&shifted);
            let want = cl.len();
            if sv.len() >= want {
                let s = sv[sv.len() - want];
                if s <= (10.0 * width).max(1e-10 * scale) {
                    ker = lowest_right_singular(&shifted, want);
                }
            }
        }
        if ker.ncols() != cl.len() {
            diagonalizable = false;
        }
        for j in 0..ker.ncols().min(cl.len()) {
            cols.push(ker.column(j).into_owned());
        }
        for _ in 0..cl.len() {
            values.push(mu);
        }
    }
    let vectors = if cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    };
    EigenDecomposition {
        values,
        vectors,
        diagonalizable,
    }
}

fn lowest_right_singular(m: &CMat, count: usize) -> CMat {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t");
    CMat::from_fn(n, count, |r, c| v_t[(n - count + c, r)].conj())
}

/// Hermitian square root and inverse square root of a positive definite
/// Hermitian matrix. `None` if not positive definite.
pub fn hermitian_sqrt(h: &CMat) -> Option<(CMat, CMat)> {
    let sym = (h + h.adjoint()) * C64::from(0.5);
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return None;
    }
    let q = &eig.eigenvectors;
    let d = CMat::from_diagonal(&eig.eigenvalues.map(|l| C64::from(l.sqrt())));
    let di = CMat::from_diagonal(&eig.eigenvalues.map(|l| C64::from(1.0 / l.sqrt())));
    Some((q * d * q.adjoint(), q * di * q.adjoint()))
}

/// Smallest eigenvalue of the Hermitian part.
pub fn min_hermitian_eigenvalue(h: &CMat) -> f64 {
    let sym = (h + h.adjoint()) * C64::from(0.5);
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
