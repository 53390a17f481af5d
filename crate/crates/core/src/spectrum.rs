//! Eigenvalues as zeros of `det Z(k)`.
//!
//! Zeros are counted with the argument principle on rectangles, which are
//! subdivided recursively until each zero cluster is isolated and polished
//! by multiplicity-aware Newton steps on `log det Z`. The sum of cluster
//! windings is checked against the winding of the outer boundary.

use crate::bcspace::Tolerances;
use crate::linalg::{self, RankTol};
use crate::secular::SecularSystem;
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("vertex conditions are not regular (dim M = {dim_m}, d = {d})")]
    Irregular { dim_m: usize, d: usize },
    #[error("|Im k| * a_max = {0} exceeds the overflow limit")]
    Overflow(f64),
    #[error("function vanishes exactly on the contour near k = {0}")]
    ZeroOnContour(C64),
    #[error("zero too close to the contour near k = {0}")]
    ZeroNearContour(C64),
    #[error("boundary phase is not a multiple of 2 pi (winding {0})")]
    NonIntegerWinding(f64),
    #[error("function vanishes identically")]
    IdenticallyZero,
    #[error("subdivision did not separate zeros near k = {0}")]
    Unresolved(C64),
    #[error("Weyl check needs at least 10 eigenvalues, found {0}")]
    TooFewEigenvalues(usize),
    #[error("Weyl check needs a compact graph")]
    NotCompact,
    #[error(transparent)]
    Bc(#[from] crate::bcspace::BcError),
}

/// Closed rectangle in the `k`-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Region {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Region {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn center(&self) -> C64 {
        C64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, k: C64) -> bool {
        k.re >= self.re_min && k.re <= self.re_max && k.im >= self.im_min && k.im <= self.im_max
    }

    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re_min, self.im_min),
            C64::new(self.re_max, self.im_min),
            C64::new(self.re_max, self.im_max),
            C64::new(self.re_min, self.im_max),
        ]
    }

    /// Split off a `[-h, h]^2` box around the origin if it is inside.
    pub fn carve_origin(&self, h: f64) -> Vec<Region> {
        let r = *self;
        if !(r.re_min < h && r.re_max > -h && r.im_min < h && r.im_max > -h) {
            return vec![r];
        }
        let mut out = Vec::new();
        if r.re_min < -h {
            out.push(Region::new(r.re_min, -h, r.im_min, r.im_max));
        }
        if r.re_max > h {
            out.push(Region::new(h, r.re_max, r.im_min, r.im_max));
        }
        let (lo, hi) = (r.re_min.max(-h), r.re_max.min(h));
        if r.im_max > h {
            out.push(Region::new(lo, hi, h, r.im_max));
        }
        if r.im_min < -h {
            out.push(Region::new(lo, hi, r.im_min, -h));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Offset of region edges from `k = 0` and from the real axis for
    /// graphs with external edges.
    pub delta: f64,
    /// Zeros closer than `merge_radius (1 + |k|)` are merged.
    pub merge_radius: f64,
    /// Radius (relative to `1 + |k|`) of the circle used for the winding
    /// multiplicity of a polished zero.
    pub cluster_radius: f64,
    /// Largest accepted phase step between neighbouring contour samples.
    pub max_phase_step: f64,
    /// Maximum bisection depth of one contour segment.
    pub max_bisection: usize,
    /// Maximum rectangle subdivision depth.
    pub max_depth: usize,
    pub newton_max_iter: usize,
    /// Relative size below which `|Im k|` counts as real.
    pub real_tol: f64,
    pub rank: RankTol,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            delta: 1e-6,
            merge_radius: 1e-9,
            cluster_radius: 1e-7,
            max_phase_step: PI / 4.0,
            max_bisection: 48,
            max_depth: 60,
            newton_max_iter: 80,
            real_tol: 1e-8,
            rank: RankTol::default(),
        }
    }
}

/// An analytic function accessed through its logarithm.
pub trait LogAnalytic: Sync {
    /// `log f(k)` on any branch; `None` where `f(k) = 0`.
    fn log_f(&self, k: C64) -> Option<C64>;
    /// `f'(k) / f(k)`; `None` where `f(k) = 0`.
    fn dlog_f(&self, k: C64) -> Option<C64>;
    /// Rough bound on `|d arg f / dk|` away from zeros, used to choose the
    /// initial contour sampling.
    fn oscillation(&self) -> f64;
    /// `f(k)` is zero up to rounding. Used to detect `f = 0` identically.
    fn negligible_at(&self, k: C64) -> bool {
        self.log_f(k).is_none_or(|l| l.re < -600.0)
    }
}

impl LogAnalytic for SecularSystem {
    fn log_f(&self, k: C64) -> Option<C64> {
        self.log_det_zc(k)
            .filter(|l| l.re.is_finite() && l.im.is_finite())
    }

    fn dlog_f(&self, k: C64) -> Option<C64> {
        self.dlog_det_zc(k)
    }

    fn oscillation(&self) -> f64 {
        2.0 * self.graph().total_length() + 1.0
    }

    fn negligible_at(&self, k: C64) -> bool {
        let sv = linalg::singular_values(&self.z_balanced(k));
        let hi = sv.iter().cloned().fold(0.0, f64::max);
        let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        !(lo > 1e-13 * hi)
    }
}

fn wrap(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    } else if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

fn eval<F: LogAnalytic + ?Sized>(f: &F, k: C64) -> Result<C64, SpectrumError> {
    f.log_f(k).ok_or(SpectrumError::ZeroOnContour(k))
}

/// Continuous phase change of `f` along the path `p(t)`, `t` in `[0, 1]`,
/// with `dp` the derivative of the path.
///
/// A step is accepted only when the sampled change of `log f` is small and
/// agrees with the trapezoid estimate from `f'/f`. Comparing the modulus as
/// well as the phase catches steps that pass a zero head-on, where the
/// phase rate vanishes at both ends but a full turn is skipped.
fn walk_path<F, P, D>(
    f: &F,
    p: &P,
    dp: &D,
    n0: usize,
    opts: &SolverOptions,
) -> Result<f64, SpectrumError>
where
    F: LogAnalytic + ?Sized,
    P: Fn(f64) -> C64,
    D: Fn(f64) -> C64,
{
    #[derive(Clone, Copy)]
    struct Sample {
        t: f64,
        log: C64,
        rate: C64,
    }
    let sample = |t: f64| -> Result<Sample, SpectrumError> {
        let k = p(t);
        let l = eval(f, k)?;
        let g = f.dlog_f(k).ok_or(SpectrumError::ZeroOnContour(k))? * dp(t);
        Ok(Sample { t, log: l, rate: g })
    };
    let ok = |a: &Sample, b: &Sample, d: f64| {
        let h = b.t - a.t;
        let est = (a.rate + b.rate) * (0.5 * h);
        let seen = C64::new(b.log.re - a.log.re, d);
        d.abs() < opts.max_phase_step
            && (seen - est).norm() < opts.max_phase_step
            && h * a.rate.norm().max(b.rate.norm()) < 2.0 * opts.max_phase_step
    };
    fn refine<S, O>(
        sample: &S,
        ok: &O,
        a: Sample,
        b: Sample,
        depth: usize,
        max_depth: usize,
        at: &dyn Fn(f64) -> C64,
    ) -> Result<f64, SpectrumError>
    where
        S: Fn(f64) -> Result<Sample, SpectrumError>,
        O: Fn(&Sample, &Sample, f64) -> bool,
    {
        let d = wrap(b.log.im - a.log.im);
        if ok(&a, &b, d) {
            return Ok(d);
        }
        let tm = 0.5 * (a.t + b.t);
        if depth >= max_depth {
            return Err(SpectrumError::ZeroNearContour(at(tm)));
        }
        let m = sample(tm)?;
        Ok(refine(sample, ok, a, m, depth + 1, max_depth, at)?
            + refine(sample, ok, m, b, depth + 1, max_depth, at)?)
    }

    let n = n0.max(2);
    let mut total = 0.0;
    let mut prev = sample(0.0)?;
    for j in 1..=n {
        let cur = sample(j as f64 / n as f64)?;
        total += refine(&sample, &ok, prev, cur, 0, opts.max_bisection, p)?;
        prev = cur;
    }
    Ok(total)
}

fn segment_samples<F: LogAnalytic + ?Sized>(f: &F, len: f64) -> usize {
    ((len * f.oscillation() * 2.0).ceil() as usize).max(4)
}

/// Winding number of `f` around the boundary of `r`.
pub fn rectangle_winding<F: LogAnalytic + ?Sized>(
    f: &F,
    r: &Region,
    opts: &SolverOptions,
) -> Result<usize, SpectrumError> {
    let c = r.corners();
    let mut phase = 0.0;
    for j in 0..4 {
        let (a, b) = (c[j], c[(j + 1) % 4]);
        let n = segment_samples(f, (b - a).norm());
        phase += walk_path(f, &|t: f64| a + (b - a) * t, &|_| b - a, n, opts)?;
    }
    to_winding(phase)
}

fn to_winding(phase: f64) -> Result<usize, SpectrumError> {
    let w = phase / (2.0 * PI);
    let r = w.round();
    if (w - r).abs() > 0.05 || r < -0.5 {
        return Err(SpectrumError::NonIntegerWinding(w));
    }
    Ok(r as usize)
}

/// Winding number of `f` around the circle `|k - z| = rho`.
pub fn circle_winding<F: LogAnalytic + ?Sized>(
    f: &F,
    z: C64,
    rho: f64,
    opts: &SolverOptions,
) -> Result<usize, SpectrumError> {
    let p = |t: f64| z + C64::from_polar(rho, 2.0 * PI * t);
    let n = segment_samples(f, 2.0 * PI * rho).max(16);
    let dp = |t: f64| C64::new(0.0, 2.0 * PI) * C64::from_polar(rho, 2.0 * PI * t);
    to_winding(walk_path(f, &p, &dp, n, opts)?)
}

/// Newton iteration `k <- k - m f/f'` for a zero of multiplicity `m`.
pub fn newton<F: LogAnalytic + ?Sized>(
    f: &F,
    k0: C64,
    m: usize,
    opts: &SolverOptions,
) -> Option<C64> {
    let mut k = k0;
    let mut best_step = f64::INFINITY;
    for _ in 0..opts.newton_max_iter {
        let Some(dl) = f.dlog_f(k) else {
            return Some(k);
        };
        let step = C64::from(m as f64) / dl;
        if !(step.re.is_finite() && step.im.is_finite()) {
            return (best_step < 1e-10 * (1.0 + k.norm())).then_some(k);
        }
        let s = step.norm();
        k -= step;
        best_step = best_step.min(s);
        if s <= 1e-15 * (1.0 + k.norm()) {
            return Some(k);
        }
        if best_step < 1e-13 * (1.0 + k.norm()) && s > 10.0 * best_step {
            // Round-off regime: further steps only wander.
            return Some(k + step);
        }
    }
    (best_step < 1e-10 * (1.0 + k.norm())).then_some(k)
}

/// A zero cluster of an analytic function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocatedZero {
    pub k: C64,
    /// Number of zeros (with multiplicity) inside a small circle around `k`.
    pub winding: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSearch {
    pub zeros: Vec<LocatedZero>,
    pub regions: Vec<Region>,
    /// Sum of boundary windings of the searched regions.
    pub boundary_winding: usize,
    /// Half-size of the box removed around `k = 0`, if any.
    pub origin_radius: Option<f64>,
    /// Zeros inside that box (counted, not located).
    pub origin_winding: Option<usize>,
}

impl ZeroSearch {
    pub fn found_winding(&self) -> usize {
        self.zeros.iter().map(|z| z.winding).sum()
    }

    pub fn complete(&self) -> bool {
        self.found_winding() == self.boundary_winding
    }
}

const SPLITS: [f64; 5] = [0.4987, 0.4713, 0.5311, 0.4417, 0.5623];

fn split(r: &Region, s: f64) -> Vec<Region> {
    let (w, h) = (r.width(), r.height());
    let xm = r.re_min + s * w;
    let ym = r.im_min + (1.0 - s) * h;
    if w > 2.0 * h {
        vec![
            Region::new(r.re_min, xm, r.im_min, r.im_max),
            Region::new(xm, r.re_max, r.im_min, r.im_max),
        ]
    } else if h > 2.0 * w {
        vec![
            Region::new(r.re_min, r.re_max, r.im_min, ym),
            Region::new(r.re_min, r.re_max, ym, r.im_max),
        ]
    } else {
        vec![
            Region::new(r.re_min, xm, r.im_min, ym),
            Region::new(xm, r.re_max, r.im_min, ym),
            Region::new(r.re_min, xm, ym, r.im_max),
            Region::new(xm, r.re_max, ym, r.im_max),
        ]
    }
}

fn try_polish<F: LogAnalytic + ?Sized>(
    f: &F,
    r: &Region,
    n: usize,
    opts: &SolverOptions,
) -> Option<LocatedZero> {
    let k = newton(f, r.center(), n, opts)?;
    if !r.contains(k) {
        return None;
    }
    let rho = opts.cluster_radius * (1.0 + k.norm());
    let w = circle_winding(f, k, rho, opts).ok()?;
    (w == n).then_some(LocatedZero { k, winding: n })
}

fn solve_box<F: LogAnalytic + ?Sized>(
    f: &F,
    r: Region,
    n: usize,
    depth: usize,
    opts: &SolverOptions,
) -> Result<Vec<LocatedZero>, SpectrumError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let small = r.diameter() < 1e-3 * (1.0 + r.center().norm());
    if n <= 3 || small {
        if let Some(z) = try_polish(f, &r, n, opts) {
            return Ok(vec![z]);
        }
    }
    if depth >= opts.max_depth || r.diameter() < 1e-12 * (1.0 + r.center().norm()) {
        return Err(SpectrumError::Unresolved(r.center()));
    }
    let mut last_err = None;
    for s in SPLITS {
        let kids = split(&r, s);
        let windings: Result<Vec<usize>, _> = kids
            .par_iter()
            .map(|kr| rectangle_winding(f, kr, opts))
            .collect();
        let windings = match windings {
            Ok(w) => w,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        if windings.iter().sum::<usize>() != n {
            last_err = Some(SpectrumError::NonIntegerWinding(
                windings.iter().sum::<usize>() as f64,
            ));
            continue;
        }
        let parts: Result<Vec<Vec<LocatedZero>>, _> = kids
            .into_par_iter()
            .zip(windings)
            .map(|(kr, w)| solve_box(f, kr, w, depth + 1, opts))
            .collect();
        return Ok(parts?.into_iter().flatten().collect());
    }
    Err(last_err.unwrap_or(SpectrumError::Unresolved(r.center())))
}

fn check_not_identically_zero<F: LogAnalytic + ?Sized>(
    f: &F,
    regions: &[Region],
) -> Result<(), SpectrumError> {
    let mut probes = 0;
    let mut zeros = 0;
    for r in regions {
        for (u, v) in [(0.31, 0.27), (0.73, 0.61), (0.17, 0.89)] {
            let k = C64::new(r.re_min + u * r.width(), r.im_min + v * r.height());
            probes += 1;
            if f.negligible_at(k) {
                zeros += 1;
            }
        }
    }
    if probes > 0 && zeros == probes {
        return Err(SpectrumError::IdenticallyZero);
    }
    Ok(())
}

/// Half-size of the box excluded around `k = 0`: the smallest
/// `h = delta 10^j` such that the windings around circles of radius `h`
/// and `10 h` agree, so no zero lies in between and rounding noise of a
/// multiple zero at the origin does not reach the contour. Returns the
/// radius and the winding around it.
pub fn origin_exclusion<F: LogAnalytic + ?Sized>(f: &F, opts: &SolverOptions) -> (f64, usize) {
    let mut h = opts.delta;
    while h < 0.1 {
        let inner = circle_winding(f, C64::new(0.0, 0.0), h, opts);
        let outer = circle_winding(f, C64::new(0.0, 0.0), 10.0 * h, opts);
        if let (Ok(a), Ok(b)) = (inner, outer) {
            if a == b {
                return (h, a);
            }
        }
        h *= 10.0;
    }
    (h, circle_winding(f, C64::new(0.0, 0.0), h, opts).unwrap_or(0))
}

/// Zeros of `f` inside the given rectangles with their winding
/// multiplicities. Rectangles touching `k = 0` have a small box around
/// the origin removed (see [`origin_exclusion`]).
pub fn locate_zeros<F: LogAnalytic + ?Sized>(
    f: &F,
    regions: &[Region],
    opts: &SolverOptions,
) -> Result<ZeroSearch, SpectrumError> {
    check_not_identically_zero(f, regions)?;
    let near_origin = regions.iter().any(|r| r.carve_origin(opts.delta).len() != 1 || r.contains(C64::new(0.0, 0.0)));
    let (h0, origin_winding) = if near_origin {
        let (h, w) = origin_exclusion(f, opts);
        (h.max(opts.delta), Some(w))
    } else {
        (opts.delta, None)
    };
    let regions: Vec<Region> = regions
        .iter()
        .flat_map(|r| r.carve_origin(h0))
        .collect();
    let windings: Vec<usize> = regions
        .par_iter()
        .map(|r| rectangle_winding(f, r, opts))
        .collect::<Result<_, _>>()?;
    let parts: Vec<Vec<LocatedZero>> = regions
        .par_iter()
        .zip(windings.par_iter())
        .map(|(r, &w)| solve_box(f, *r, w, 0, opts))
        .collect::<Result<_, _>>()?;
    let mut zeros: Vec<LocatedZero> = parts.into_iter().flatten().collect();
    zeros = merge_zeros(zeros, opts.merge_radius);
    Ok(ZeroSearch {
        zeros,
        regions,
        boundary_winding: windings.iter().sum(),
        origin_radius: near_origin.then_some(h0),
        origin_winding,
    })
}

fn merge_zeros(mut zeros: Vec<LocatedZero>, radius: f64) -> Vec<LocatedZero> {
    zeros.sort_by(|a, b| a.k.re.total_cmp(&b.k.re).then(a.k.im.total_cmp(&b.k.im)));
    let mut out: Vec<LocatedZero> = Vec::new();
    for z in zeros {
        if let Some(prev) = out
            .iter_mut()
            .find(|p| (p.k - z.k).norm() <= radius * (1.0 + z.k.norm()))
        {
            prev.winding += z.winding;
        } else {
            out.push(z);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Eigenvalue,
    RealKCandidate,
    SpectralSingularityCandidate,
    ZeroMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EssentialSpectrum {
    Empty,
    HalfLine,
    WholePlane,
    UndefinedIrregular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPoint {
    pub k: C64,
    pub lambda: C64,
    pub winding_multiplicity: usize,
    pub geometric_multiplicity: usize,
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub points: Vec<SpectralPoint>,
    pub essential: EssentialSpectrum,
    pub zero_mode_dim: usize,
    pub regions: Vec<Region>,
    pub boundary_winding: usize,
    pub found_winding: usize,
    /// Boundary winding equals the sum of the cluster windings.
    pub complete: bool,
}

impl SpectrumReport {
    /// Eigenvalues (status `eigenvalue` or `zero_mode`) repeated by their
    /// winding multiplicity (zero modes by kernel dimension).
    pub fn eigenvalues_with_multiplicity(&self) -> Vec<C64> {
        let mut out = Vec::new();
        for p in &self.points {
            let m = match p.status {
                PointStatus::Eigenvalue => p.winding_multiplicity,
                PointStatus::ZeroMode => p.geometric_multiplicity,
                _ => 0,
            };
            out.extend(std::iter::repeat_n(p.lambda, m));
        }
        out
    }
}

pub fn essential_spectrum(sys: &SecularSystem, tol: RankTol) -> EssentialSpectrum {
    let reg = sys.bc().regularity(tol);
    if reg.dim_m != sys.d() {
        EssentialSpectrum::WholePlane
    } else if !reg.regular {
        EssentialSpectrum::UndefinedIrregular
    } else if sys.graph().is_compact() {
        EssentialSpectrum::Empty
    } else {
        EssentialSpectrum::HalfLine
    }
}

/// Search rectangles covering `|Re k| <= re_max`, `|Im k| <= im_max` with
/// one representative `k` per eigenvalue `lambda = k^2`.
///
/// Compact graphs: every `k != 0` zero is an eigenvalue, and `k`, `-k`
/// give the same `lambda`, so the right half-plane plus the positive
/// imaginary axis is searched. Graphs with external edges: the physical
/// sheet is `Im k > 0`; the lower edge sits at `Im k = delta` and real
/// zeros are handled by [`real_axis_scan`].
pub fn default_regions(sys: &SecularSystem, re_max: f64, im_max: f64, opts: &SolverOptions) -> Vec<Region> {
    let dl = opts.delta;
    if sys.graph().is_compact() {
        vec![
            Region::new(dl, re_max, -im_max, im_max),
            Region::new(-dl, dl, dl, im_max),
        ]
    } else {
        vec![Region::new(-re_max, re_max, dl, im_max)]
    }
}

fn is_real(k: C64, opts: &SolverOptions) -> bool {
    k.im.abs() <= opts.real_tol * (1.0 + k.norm())
}

fn status_of(sys: &SecularSystem, k: C64, opts: &SolverOptions) -> PointStatus {
    let g = sys.graph();
    if g.is_compact() || !is_real(k, opts) {
        return PointStatus::Eigenvalue;
    }
    if g.n_internal() == 0 {
        return PointStatus::SpectralSingularityCandidate;
    }
    let kr = C64::new(k.re, 0.0);
    if sys.internal_kernel(kr, opts.rank).ncols() > 0 {
        PointStatus::Eigenvalue
    } else if k.re > 0.0 {
        PointStatus::RealKCandidate
    } else {
        PointStatus::SpectralSingularityCandidate
    }
}

fn point(sys: &SecularSystem, z: &LocatedZero, opts: &SolverOptions) -> SpectralPoint {
    let mut k = z.k;
    if !sys.graph().is_compact() && is_real(k, opts) {
        k.im = 0.0;
    }
    SpectralPoint {
        k,
        lambda: k * k,
        winding_multiplicity: z.winding,
        geometric_multiplicity: sys.geometric_multiplicity(k, opts.rank),
        status: status_of(sys, k, opts),
    }
}

/// Zeros of `det Z` on the real axis `delta <= |k| <= k_max` for graphs
/// with external edges: local minima of the smallest normalised singular
/// value of `Z` are polished by Newton steps and kept when the limit is
/// real.
pub fn real_axis_scan(
    sys: &SecularSystem,
    k_max: f64,
    opts: &SolverOptions,
) -> Result<Vec<LocatedZero>, SpectrumError> {
    let h = (0.5 / sys.oscillation()).min(0.02);
    let n = (k_max / h).ceil() as usize;
    // No per-column normalisation here: a column of the balanced matrix
    // can vanish at a zero of det Z, and rescaling it would hide the zero.
    let sigma = |k: f64| {
        let sv = crate::linalg::singular_values(&sys.z_balanced(C64::new(k, 0.0)));
        match (sv.first(), sv.last()) {
            (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
            _ => 0.0,
        }
    };
    let mut found = Vec::new();
    for sign in [1.0, -1.0] {
        let ks: Vec<f64> = (0..=n)
            .map(|j| sign * (opts.delta + (k_max - opts.delta) * j as f64 / n as f64))
            .collect();
        let g: Vec<f64> = ks.par_iter().map(|&k| sigma(k)).collect();
        let cands: Vec<f64> = (0..ks.len())
            .filter(|&j| {
                let left = if j == 0 { f64::INFINITY } else { g[j - 1] };
                let right = if j + 1 == ks.len() { f64::INFINITY } else { g[j + 1] };
                g[j] < left && g[j] <= right && g[j] < 0.5
            })
            .map(|j| ks[j])
            .collect();
        let polished: Vec<Option<LocatedZero>> = cands
            .par_iter()
            .map(|&k0| {
                let k0 = C64::new(k0, 0.0);
                let m = circle_winding(sys, k0, h, opts).unwrap_or(1).max(1);
                let k = newton(sys, k0, m, opts).or_else(|| newton(sys, k0, 1, opts))?;
                if !is_real(k, opts) || (k - k0).norm() > 2.0 * h || k.re.abs() < opts.delta {
                    return None;
                }
                let rho = opts.cluster_radius * (1.0 + k.norm());
                let w = circle_winding(sys, k, rho, opts).ok()?;
                (w > 0).then_some(LocatedZero { k, winding: w })
            })
            .collect();
        found.extend(polished.into_iter().flatten());
    }
    Ok(merge_zeros(found, opts.merge_radius))
}

/// Eigenvalues of `-Delta(A, B)` with `|Re k| <= re_max`, `|Im k| <= im_max`
/// (see [`default_regions`]), plus the zero mode and, for graphs with
/// external edges, classified real-axis zeros.
pub fn find_eigenvalues(
    sys: &SecularSystem,
    re_max: f64,
    im_max: f64,
    opts: &SolverOptions,
) -> Result<SpectrumReport, SpectrumError> {
    let regions = default_regions(sys, re_max, im_max, opts);
    find_in_regions(sys, &regions, opts)
}

pub fn find_in_regions(
    sys: &SecularSystem,
    regions: &[Region],
    opts: &SolverOptions,
) -> Result<SpectrumReport, SpectrumError> {
    let reg = sys.bc().regularity(opts.rank);
    if !reg.regular {
        return Err(SpectrumError::Irregular {
            dim_m: reg.dim_m,
            d: sys.d(),
        });
    }
    collect_points(sys, regions, opts)
}

/// Point spectrum for conditions that are not regular.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IrregularSpectrum {
    /// `det Z` vanishes identically: every `lambda` off `[0, inf)` is an
    /// eigenvalue.
    WholePlane,
    /// `det Z` is not identically zero and its zeros are the eigenvalues
    /// in the searched region (possibly none).
    Discrete(SpectrumReport),
}

/// Spectral search without the regularity requirement. `det Z(k) = 0` is
/// still the eigenvalue condition; only the resolvent machinery needs
/// regular conditions.
pub fn find_eigenvalues_irregular(
    sys: &SecularSystem,
    re_max: f64,
    im_max: f64,
    opts: &SolverOptions,
) -> Result<IrregularSpectrum, SpectrumError> {
    let regions = default_regions(sys, re_max, im_max, opts);
    match collect_points(sys, &regions, opts) {
        Err(SpectrumError::IdenticallyZero) => Ok(IrregularSpectrum::WholePlane),
        Err(e) => Err(e),
        Ok(mut rep) => {
            if sys.graph().is_compact() {
                rep.essential = EssentialSpectrum::Empty;
            }
            Ok(IrregularSpectrum::Discrete(rep))
        }
    }
}

fn collect_points(
    sys: &SecularSystem,
    regions: &[Region],
    opts: &SolverOptions,
) -> Result<SpectrumReport, SpectrumError> {
    let im_ext = regions
        .iter()
        .map(|r| r.im_min.abs().max(r.im_max.abs()))
        .fold(0.0, f64::max);
    let guard = im_ext * sys.graph().max_length();
    if guard >= crate::secular::OVERFLOW_LIMIT {
        return Err(SpectrumError::Overflow(guard));
    }
    let search = locate_zeros(sys, regions, opts)?;
    let mut points: Vec<SpectralPoint> = search.zeros.iter().map(|z| point(sys, z, opts)).collect();
    if !sys.graph().is_compact() {
        let k_max = regions.iter().map(|r| r.re_max.abs().max(r.re_min.abs())).fold(0.0, f64::max);
        for z in real_axis_scan(sys, k_max, opts)? {
            let p = point(sys, &z, opts);
            // k and -k describe the same embedded eigenvalue.
            if p.status == PointStatus::Eigenvalue && p.k.re < 0.0 {
                continue;
            }
            points.push(p);
        }
    }
    let zero_mode_dim = sys.zero_mode_kernel(opts.rank).ncols();
    if zero_mode_dim > 0 {
        points.push(SpectralPoint {
            k: C64::new(0.0, 0.0),
            lambda: C64::new(0.0, 0.0),
            winding_multiplicity: 0,
            geometric_multiplicity: zero_mode_dim,
            status: PointStatus::ZeroMode,
        });
    }
    points.sort_by(|a, b| {
        a.lambda
            .re
            .total_cmp(&b.lambda.re)
            .then(a.lambda.im.total_cmp(&b.lambda.im))
            .then(a.k.re.total_cmp(&b.k.re))
    });
    Ok(SpectrumReport {
        points,
        essential: essential_spectrum(sys, opts.rank),
        zero_mode_dim,
        regions: search.regions.clone(),
        boundary_winding: search.boundary_winding,
        found_winding: search.found_winding(),
        complete: search.complete(),
    })
}

/// Real points of the residual spectrum: `lambda` with `conj(lambda)` an
/// eigenvalue of the adjoint but `lambda` not an eigenvalue. Empty when
/// the graph has no external or no internal edges. `k_max` bounds the
/// real-axis scan.
pub fn residual_spectrum(
    sys: &SecularSystem,
    k_max: f64,
    tol: &Tolerances,
    opts: &SolverOptions,
) -> Result<Vec<C64>, SpectrumError> {
    let g = sys.graph();
    if g.n_external() == 0 || g.n_internal() == 0 {
        return Ok(Vec::new());
    }
    let adj = sys.adjoint(tol)?;
    let mut out = Vec::new();
    for z in real_axis_scan(&adj, k_max, opts)? {
        if z.k.re <= 0.0 {
            continue;
        }
        let k = C64::new(z.k.re, 0.0);
        let adj_eig = adj.internal_kernel(k, opts.rank).ncols() > 0;
        let own_eig = sys.internal_kernel(k, opts.rank).ncols() > 0;
        if adj_eig && !own_eig {
            out.push(k * k);
        }
    }
    let adj_zero = adj.zero_mode_kernel(opts.rank).ncols();
    let own_zero = sys.zero_mode_kernel(opts.rank).ncols();
    if adj_zero > 0 && own_zero == 0 {
        out.push(C64::new(0.0, 0.0));
    }
    out.sort_by(|a, b| a.re.total_cmp(&b.re));
    Ok(out)
}

/// An eigenfunction built from a kernel vector of `Z(k)` (or of the
/// zero-mode matrix when `k = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenfunction {
    pub k: C64,
    /// Coefficients `[s; alpha; beta]` (or `[alpha; beta]` of the affine
    /// ansatz for the zero mode).
    pub coefficients: nalgebra::DVector<C64>,
    pub kernel_dim: usize,
}

impl Eigenfunction {
    pub fn is_zero_mode(&self) -> bool {
        self.k == C64::new(0.0, 0.0)
    }

    /// `psi_j(x)` on edge function `j`.
    pub fn value(&self, sys: &SecularSystem, j: usize, x: f64) -> C64 {
        self.derivative(sys, j, x, 0)
    }

    pub fn derivative(&self, sys: &SecularSystem, j: usize, x: f64, order: i32) -> C64 {
        let ne = sys.graph().n_external();
        let ni = sys.graph().n_internal();
        if self.is_zero_mode() {
            if j < ne {
                return C64::new(0.0, 0.0);
            }
            let i = j - ne;
            let (al, be) = (self.coefficients[i], self.coefficients[ni + i]);
            return match order {
                0 => al + be * x,
                1 => be,
                _ => C64::new(0.0, 0.0),
            };
        }
        let xs = vec![x; ne + ni];
        let row = sys.phi_deriv(&xs, self.k, order).row(j).into_owned();
        (row * &self.coefficients)[0]
    }

    /// Boundary vectors `(psi, psi')` in boundary-coordinate order.
    pub fn boundary_values(&self, sys: &SecularSystem) -> (nalgebra::DVector<C64>, nalgebra::DVector<C64>) {
        let g = sys.graph();
        let d = g.d();
        let mut psi = nalgebra::DVector::zeros(d);
        let mut dpsi = nalgebra::DVector::zeros(d);
        for p in 0..d {
            let (j, x, sgn) = match g.port(p) {
                crate::graph::Port::External(e) => (e, 0.0, 1.0),
                crate::graph::Port::Start(i) => (g.n_external() + i, 0.0, 1.0),
                crate::graph::Port::End(i) => (g.n_external() + i, g.internal_edges()[i].length, -1.0),
            };
            psi[p] = self.value(sys, j, x);
            dpsi[p] = self.derivative(sys, j, x, 1) * sgn;
        }
        (psi, dpsi)
    }

    /// `|A psi + B psi'|` relative to the size of the boundary data.
    pub fn bc_residual(&self, sys: &SecularSystem) -> f64 {
        let (psi, dpsi) = self.boundary_values(sys);
        let r = sys.bc().a() * &psi + sys.bc().b() * &dpsi;
        let scale = psi.norm() + dpsi.norm();
        r.norm() / scale.max(f64::MIN_POSITIVE)
    }
}

pub fn eigenfunction(sys: &SecularSystem, k: C64, opts: &SolverOptions) -> Option<Eigenfunction> {
    if k == C64::new(0.0, 0.0) {
        let ker = sys.zero_mode_kernel(opts.rank);
        if ker.ncols() == 0 {
            return None;
        }
        // Undo the column normalisation used for the rank decision.
        let m = sys.zero_mode_matrix();
        let (norms, _) = crate::secular::normalize_columns(&m, sys.zero_mode_scale());
        let mut v = ker.column(0).into_owned();
        for (r, n) in norms.iter().enumerate() {
            v[r] /= C64::from(*n);
        }
        return Some(Eigenfunction {
            k,
            coefficients: v,
            kernel_dim: ker.ncols(),
        });
    }
    let ne = sys.graph().n_external();
    let real_noncompact = ne > 0 && is_real(k, opts);
    let ker = if real_noncompact {
        // Only solutions vanishing on the half-lines are square integrable.
        let ik = sys.internal_kernel(k, opts.rank);
        if ik.ncols() == 0 {
            return None;
        }
        let zb = sys.z_balanced(k);
        let zi = zb.columns(ne, sys.d() - ne).into_owned();
        let (norms, _) = crate::secular::normalize_columns(&zi, sys.z_scale(k));
        let mut v = nalgebra::DVector::zeros(sys.d());
        let (cols, _) = sys.balance(k);
        for r in 0..ik.nrows() {
            v[ne + r] = ik[(r, 0)] / norms[r] * cols[ne + r];
        }
        return Some(Eigenfunction {
            k,
            coefficients: v,
            kernel_dim: ik.ncols(),
        });
    } else {
        sys.kernel(k, opts.rank)
    };
    if ker.ncols() == 0 {
        return None;
    }
    Some(Eigenfunction {
        k,
        coefficients: ker.column(0).into_owned(),
        kernel_dim: ker.ncols(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylCheck {
    pub slope: f64,
    pub intercept: f64,
    pub relative_error: f64,
    pub n_used: usize,
}

/// Affine least-squares fit of `sqrt(lambda_j)` against `j pi / L`, where
/// `L` is the total length, over the first `n` non-zero eigenvalues
/// counted with multiplicity. Weyl's law predicts slope 1.
pub fn weyl_count_check(
    sys: &SecularSystem,
    n: usize,
    opts: &SolverOptions,
) -> Result<WeylCheck, SpectrumError> {
    if !sys.graph().is_compact() {
        return Err(SpectrumError::NotCompact);
    }
    let total = sys.graph().total_length();
    let k_max = (n as f64 + 4.0) * PI / total * 1.25 + 1.0 + 0.123;
    let rep = find_eigenvalues(sys, k_max, 2.0, opts)?;
    let mut ks: Vec<f64> = Vec::new();
    for p in &rep.points {
        if p.status == PointStatus::Eigenvalue && is_real(p.k, opts) {
            ks.extend(std::iter::repeat_n(p.k.re, p.winding_multiplicity));
        }
    }
    ks.sort_by(f64::total_cmp);
    if ks.len() < 10 || ks.len() < n.min(10) {
        return Err(SpectrumError::TooFewEigenvalues(ks.len()));
    }
    ks.truncate(n);
    let m = ks.len() as f64;
    let xs: Vec<f64> = (1..=ks.len()).map(|j| j as f64 * PI / total).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / m, ks.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ks).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(WeylCheck {
        slope,
        intercept: my - slope * mx,
        relative_error: (slope - 1.0).abs(),
        n_used: ks.len(),
    })
}
