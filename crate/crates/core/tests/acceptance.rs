//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p qgraph-core --test acceptance -- --nocapture`.
//! Criteria listed in `KNOWN_RED` are printed like the others but do not
//! fail the test: their expected values are wrong and the reason is given
//! in the printed detail.

use nalgebra::DVector;
use qgraph_core::bcspace::{presets, projector_distance, BoundaryConditions, Tolerances};
use qgraph_core::graph::builders;
use qgraph_core::linalg::{self, c, from_real_rows, from_rows, I};
use qgraph_core::resolvent::{self, ResolventKernel};
use qgraph_core::secular::SecularSystem;
use qgraph_core::similarity::{self, BlockTransform, SimilaritySearch};
use qgraph_core::spectrum::{self, IrregularSpectrum, PointStatus, Region, SolverOptions};
use qgraph_core::{CMat, MetricGraph, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

/// Criteria whose stated expectations contradict the mathematics.
const KNOWN_RED: &[u32] = &[4, 7];

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        self.lines.push(format!("    [{}] {what}", if ok { "ok" } else { "FAIL" }));
        self.pass &= ok;
    }
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn tol() -> Tolerances {
    Tolerances::default()
}

fn system(g: MetricGraph, bc: BoundaryConditions) -> SecularSystem {
    SecularSystem::new(g, bc).unwrap()
}

/// Eigenvalues repeated by winding multiplicity, with the matching
/// geometric multiplicity.
fn points(rep: &spectrum::SpectrumReport) -> Vec<(C64, usize, usize)> {
    rep.points
        .iter()
        .filter(|p| p.status == PointStatus::Eigenvalue)
        .map(|p| (p.lambda, p.winding_multiplicity, p.geometric_multiplicity))
        .collect()
}

fn compact_star_bc(g: &MetricGraph) -> BoundaryConditions {
    BoundaryConditions::assemble_local(g, |v, p| {
        let s = if v == "o" { presets::standard(p.len()) } else { presets::dirichlet(1) };
        Ok((s.a().clone(), s.b().clone()))
    })
    .unwrap()
}

/// Multisets of `lambda` compared within `eps`, each side given as
/// `(lambda, multiplicity)`.
fn same_multiset(a: &[(C64, usize)], b: &[(C64, usize)], eps: f64) -> Result<(), String> {
    let expand = |v: &[(C64, usize)]| -> Vec<C64> {
        let mut out: Vec<C64> = v.iter().flat_map(|(l, m)| std::iter::repeat_n(*l, *m)).collect();
        out.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        out
    };
    let (xa, xb) = (expand(a), expand(b));
    if xa.len() != xb.len() {
        return Err(format!("sizes {} vs {}", xa.len(), xb.len()));
    }
    let mut used = vec![false; xb.len()];
    for x in &xa {
        let j = (0..xb.len())
            .filter(|&j| !used[j])
            .min_by(|&i, &j| (xb[i] - x).norm().total_cmp(&(xb[j] - x).norm()))
            .unwrap();
        if (xb[j] - x).norm() > eps * (1.0 + x.norm()) {
            return Err(format!("{x} unmatched (nearest {})", xb[j]));
        }
        used[j] = true;
    }
    Ok(())
}

fn c1_interval() -> Outcome {
    let mut o = Outcome::new();
    let sys = system(builders::interval(PI).unwrap(), presets::dirichlet(2));
    let t0 = Instant::now();
    let rep = spectrum::find_eigenvalues(&sys, 10.5, 1.0, &opts()).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let pts = points(&rep);
    o.check(pts.len() == 10, format!("{} eigenvalues in Re k < 10.5", pts.len()));
    let err = pts
        .iter()
        .enumerate()
        .map(|(j, p)| (p.0 - C64::from(((j + 1) * (j + 1)) as f64)).norm())
        .fold(0.0, f64::max);
    o.check(err < 1e-8, format!("max |lambda - n^2| = {err:.2e}"));
    o.check(pts.iter().all(|p| p.1 == 1 && p.2 == 1), "all simple");
    o.check(dt < 1.0, format!("runtime {dt:.3} s"));
    o
}

/// Roots of `sin k - k` in the square `|Re k|, |Im k| <= r`, found without
/// the graph solver: unit boxes centred on the integer lattice, winding by
/// dense phase sampling, Newton polish.
fn sin_minus_k_roots(r: f64) -> Vec<C64> {
    let f = |k: C64| k.sin() - k;
    let df = |k: C64| k.cos() - 1.0;
    let n = r.round() as i32;
    let mut roots = Vec::new();
    for ix in -n..=n {
        for iy in -n..=n {
            if ix == 0 && iy == 0 {
                continue; // triple root at the origin
            }
            let (x0, y0) = (ix as f64 - 0.5, iy as f64 - 0.5);
            let corners = [c(x0, y0), c(x0 + 1.0, y0), c(x0 + 1.0, y0 + 1.0), c(x0, y0 + 1.0)];
            let mut phase = 0.0;
            let m = 400;
            for s in 0..4 {
                let (a, b) = (corners[s], corners[(s + 1) % 4]);
                let mut prev = f(a).arg();
                for t in 1..=m {
                    let z = a + (b - a) * (t as f64 / m as f64);
                    let cur = f(z).arg();
                    let mut d = cur - prev;
                    while d > PI {
                        d -= 2.0 * PI;
                    }
                    while d < -PI {
                        d += 2.0 * PI;
                    }
                    phase += d;
                    prev = cur;
                }
            }
            let w = (phase / (2.0 * PI)).round() as i32;
            if w <= 0 {
                continue;
            }
            let mut k = c(ix as f64, iy as f64);
            for _ in 0..100 {
                let step = f(k) / df(k);
                k -= step;
                if step.norm() < 1e-15 * (1.0 + k.norm()) {
                    break;
                }
            }
            roots.push(k);
        }
    }
    roots
}

fn c2_intermediate() -> Outcome {
    let mut o = Outcome::new();
    let sys = system(builders::interval(1.0).unwrap(), presets::intermediate());
    let r = 30.0;
    let regions = [Region::new(-r, r, -r, r)];
    let rep = spectrum::find_in_regions(&sys, &regions, &opts()).unwrap();
    let found: Vec<C64> = rep
        .points
        .iter()
        .filter(|p| p.status == PointStatus::Eigenvalue && p.k.norm() <= r)
        .flat_map(|p| std::iter::repeat_n(p.k, p.winding_multiplicity))
        .collect();
    let oracle: Vec<C64> = sin_minus_k_roots(r).into_iter().filter(|k| k.norm() <= r).collect();
    o.check(found.len() == oracle.len(), format!("{} solver roots, {} oracle roots in |k| <= 30", found.len(), oracle.len()));
    let mut worst = 0.0f64;
    for k in &found {
        let d = oracle.iter().map(|z| (z - k).norm()).fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    for z in &oracle {
        let d = found.iter().map(|k| (z - k).norm()).fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    o.check(worst < 1e-8, format!("max root distance {worst:.2e}"));
    let residual = found.iter().map(|k| (k.sin() - k).norm() / k.norm()).fold(0.0, f64::max);
    o.check(residual < 1e-10, format!("max |sin k - k| / |k| = {residual:.2e}"));
    let pairs = found
        .iter()
        .filter(|k| k.im > 1e-8 && found.iter().any(|z| (z - k.conj()).norm() < 1e-8))
        .count();
    o.check(pairs >= 5, format!("{pairs} nonreal conjugate pairs"));
    o.check(rep.zero_mode_dim == 1, format!("zero mode dim {}", rep.zero_mode_dim));
    o
}

fn c3_compact_star() -> Outcome {
    let mut o = Outcome::new();
    let g = builders::compact_star(3, 1.0).unwrap();
    let bc = compact_star_bc(&g);
    let sys = system(g.clone(), bc.clone());
    let rep = spectrum::find_eigenvalues(&sys, 5.0 * PI + 0.5, 1.0, &opts()).unwrap();
    let mut want: Vec<(C64, usize)> = Vec::new();
    for n in 1..=5 {
        let n = n as f64;
        want.push((C64::from(((n - 0.5) * PI).powi(2)), 1));
        want.push((C64::from((n * PI).powi(2)), 2));
    }
    let pts = points(&rep);
    let got: Vec<(C64, usize)> = pts.iter().map(|p| (p.0, p.1)).collect();
    o.check(got.len() == 10, format!("{} distinct eigenvalues", got.len()));
    let mut err = 0.0f64;
    let mut mult_ok = true;
    for (p, w) in pts.iter().zip(&want) {
        err = err.max((p.0 - w.0).norm());
        mult_ok &= p.1 == w.1 && p.2 == w.1;
    }
    o.check(err < 1e-8, format!("max error {err:.2e}"));
    o.check(mult_ok, "winding and geometric multiplicities 2 at n pi, 1 at (n - 1/2) pi");
    match similarity::decouple_symmetric_graph(&g, &bc, &tol()) {
        Ok(d) => {
            let dec = d.spectrum(5.0 * PI + 0.5, 1.0, &opts()).unwrap();
            let res = same_multiset(&dec, &got, 1e-8);
            o.check(res.is_ok(), format!("decoupled intervals reproduce the multiset {res:?}"));
        }
        Err(e) => o.check(false, format!("decoupling refused: {e}")),
    }
    o
}

fn c4_cube() -> Outcome {
    let mut o = Outcome::new();
    let g = builders::cube(1.0).unwrap();
    let bc = presets::standard_on(&g);
    let sys = system(g.clone(), bc.clone());
    let rep = spectrum::find_eigenvalues(&sys, 7.0, 1.0, &opts()).unwrap();
    o.check(rep.zero_mode_dim == 4, format!("zero mode kernel dim {} (expected 4)", rep.zero_mode_dim));
    // 8 Dirichlet and 4 Neumann intervals: k = n pi with multiplicity 12.
    let want: Vec<(C64, usize)> = (1..=2).map(|n| (C64::from((n as f64 * PI).powi(2)), 12)).collect();
    let got: Vec<(C64, usize)> = points(&rep).iter().map(|p| (p.0, p.1)).collect();
    let res = same_multiset(&got, &want, 1e-8);
    let listing: Vec<String> = got.iter().map(|(l, m)| format!("{:.6}x{m}", l.re)).collect();
    o.check(res.is_ok(), format!("nonzero spectrum = 8 D + 4 N: {res:?}; found {}", listing.join(", ")));
    let geo_ok = points(&rep).iter().all(|p| p.1 == p.2);
    o.check(geo_ok, "winding equals geometric multiplicity at every point");
    let third = (1.0f64 / 3.0).acos();
    let has_third = got.iter().any(|(l, _)| (l - C64::from(third * third)).norm() < 1e-8);
    o.lines.push(format!(
        "    note: found eigenvalues at cos k = 1/3 ({has_third}); the zero-mode kernel is the constants; the claimed decoupling needs commuting start/end blocks"
    ));
    if let Err(e) = similarity::decouple_symmetric_graph(&g, &bc, &tol()) {
        o.lines.push(format!("    note: decoupler: {e}"));
    }
    o
}

fn c5_classification() -> Outcome {
    let mut o = Outcome::new();
    let t = tol();
    o.check(!presets::sgnsgn().is_regular(t.rank), "sgnsgn irregular");
    let mut gs_ok = true;
    for (p, m) in [(1, 1), (2, 2), (3, 3), (2, 1), (1, 2), (3, 1), (1, 3), (3, 2)] {
        gs_ok &= presets::gsgnsgn(p, m).is_regular(t.rank) == (p != m);
    }
    o.check(gs_ok, "gsgnsgn irregular iff |E+| = |E-| for sizes up to 3+3");
    let s = presets::gsgnsgn(2, 1).cayley(c(1.0, 0.0), &t).unwrap();
    let want = from_real_rows(&[&[1.0, 2.0, -2.0], &[2.0, 1.0, -2.0], &[2.0, 2.0, -3.0]]);
    let err = [0.5, 1.0, 3.0]
        .iter()
        .map(|&k| linalg::max_abs(&(presets::gsgnsgn(2, 1).cayley(c(k, 0.0), &t).unwrap() - &want)))
        .fold(linalg::max_abs(&(s - &want)), f64::max);
    o.check(err < 1e-12, format!("gsgnsgn(2,1) Cayley matrix error {err:.2e}"));
    let taus = [0.0, 0.3, 1.0, 1.5, 1.57, PI / 2.0];
    let tau_ok = taus.iter().all(|&tau| presets::tau(tau).is_regular(t.rank) == (tau < PI / 2.0));
    o.check(tau_ok, "tau regular iff tau < pi/2 (tau in {0, 0.3, 1, 1.5, 1.57, pi/2})");
    let mut delta_ok = true;
    for (nu, gamma) in [(2, c(1.0, 1.0)), (3, c(-0.5, 2.0)), (4, c(0.0, -1.0))] {
        match presets::delta(nu, gamma).m_sectorial(&t) {
            Some(sec) => {
                let pperp = CMat::from_element(nu, nu, C64::from(1.0 / nu as f64));
                let l = pperp * (-gamma / nu as f64);
                delta_ok &= linalg::max_abs(&(sec.l - l)) < 1e-12;
                delta_ok &= linalg::max_abs(&(sec.p - (linalg::identity(nu) - CMat::from_element(nu, nu, C64::from(1.0 / nu as f64))))) < 1e-12;
            }
            None => delta_ok = false,
        }
    }
    o.check(delta_ok, "complex delta m-sectorial with L = -(gamma/|E|) P_perp");
    let sys = system(builders::interval(1.0).unwrap(), presets::empty_spectrum());
    o.check(!presets::empty_spectrum().is_regular(t.rank), "empty-spectrum preset irregular");
    let region = [Region::new(-50.0, 50.0, -50.0, 50.0)];
    let disc = spectrum::locate_zeros(&sys, &region, &opts());
    match disc {
        Ok(z) => o.check(z.zeros.is_empty() && z.origin_winding.unwrap_or(0) == 0, format!("{} roots in |k| <= 50", z.zeros.len())),
        Err(e) => o.check(false, format!("search failed: {e}")),
    }
    match spectrum::find_eigenvalues_irregular(&sys, 50.0, 50.0, &opts()) {
        Ok(IrregularSpectrum::Discrete(rep)) => o.check(rep.points.is_empty(), "irregular search reports no eigenvalues"),
        other => o.check(false, format!("irregular search: {other:?}")),
    }
    o
}

fn c6_adjoint() -> Outcome {
    let mut o = Outcome::new();
    let t = tol();
    let l = from_rows(&[
        &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 0.0)],
        &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)],
    ]);
    let bc = BoundaryConditions::new(l, linalg::identity(3)).unwrap();
    let g = builders::edge_with_tail(1.0).unwrap();
    let sys = system(g, bc.clone());
    let one = c(1.0, 0.0);
    o.check(sys.internal_kernel(one, t.rank).ncols() == 1, "Z(1) has a kernel supported on the internal edge");
    match spectrum::eigenfunction(&sys, one, &opts()) {
        Some(ef) => {
            let res = ef.bc_residual(&sys);
            o.check(res < 1e-10, format!("eigenfunction BC residual {res:.2e}"));
            let scale = ef.value(&sys, 1, 0.0);
            let mut shape = 0.0f64;
            for x in [0.0, 0.3, 0.7, 1.0] {
                shape = shape.max((ef.value(&sys, 1, x) / scale - (I * x).exp()).norm());
                shape = shape.max((ef.value(&sys, 0, x) / scale).norm());
            }
            o.check(shape < 1e-10, format!("eigenfunction is (0, e^(ix)) up to scale, deviation {shape:.2e}"));
        }
        None => o.check(false, "no eigenfunction at k = 1"),
    }
    let adj = sys.adjoint(&t).unwrap();
    // Z*(1) has a kernel, but it carries an outgoing wave on the half-line.
    o.check(adj.internal_kernel(one, t.rank).ncols() == 0, "1 is not an eigenvalue of the adjoint");
    match spectrum::residual_spectrum(&adj, 3.0, &t, &opts()) {
        Ok(r) => o.check(r.iter().any(|l| (l - one).norm() < 1e-8), format!("residual spectrum of the adjoint: {r:?}")),
        Err(e) => o.check(false, format!("residual spectrum failed: {e}")),
    }
    let want_adj = {
        let mut ls = bc.a().adjoint();
        ls.scale_mut(1.0);
        BoundaryConditions::new(ls, linalg::identity(3)).unwrap()
    };
    let d_adj = projector_distance(&bc.adjoint(&t), &want_adj, t.rank);
    o.check(d_adj < 1e-10, format!("adjoint equals (L*, 1), distance {d_adj:.2e}"));
    let dd = projector_distance(&bc.adjoint(&t).adjoint(&t), &bc, t.rank);
    o.check(dd < 1e-10, format!("double adjoint distance {dd:.2e}"));
    o
}

fn tau_g(t: f64) -> CMat {
    let r = 1.0 / 2f64.sqrt();
    let q = from_real_rows(&[&[r, r], &[r, -r]]);
    let f = I / (2.0 * t.cos()).sqrt();
    let gt = from_rows(&[&[-c(0.0, t).exp() * f, -f], &[-c(0.0, -t).exp() * f, f]]);
    q * gt
}

fn c7_similarity() -> Outcome {
    let mut o = Outcome::new();
    let t = tol();
    let tau = 0.3;
    let g = builders::star(2);
    let bc = presets::tau(tau);
    let cert = match similarity::find_similarity_to_selfadjoint(&g, &bc, 1.0, &t) {
        Ok(SimilaritySearch::Found(c)) => c,
        other => {
            o.check(false, format!("no certificate: {other:?}"));
            return o;
        }
    };
    o.check(cert.target_self_adjoint, format!("certificate found, residual {:.2e}", cert.residual));
    let kirchhoff = projector_distance(&cert.target, &presets::standard(2), t.rank);
    o.check(kirchhoff < 1e-10, format!("target is Kirchhoff, distance {kirchhoff:.2e}"));
    let (theta, _) = similarity::metric_operator(&cert).unwrap();
    let (s, co) = (tau.sin(), tau.cos());
    let stated = from_rows(&[&[c(1.0 / co, 0.0), c(0.0, s / co)], &[c(0.0, -s / co), c(1.0 / co, 0.0)]]);
    let e_stated = linalg::max_abs(&(&theta - &stated));
    let e_inverse = linalg::max_abs(&(&theta - linalg::inverse(&stated).unwrap()));
    o.check(
        e_stated < 1e-10,
        format!("metric equals (1/cos)[[1, i sin], [-i sin, 1]]: deviation {e_stated:.2e} (deviation from its inverse {e_inverse:.2e})"),
    );
    let d_stated = similarity::metric_adjoint_distance(&bc, &stated, &t).unwrap();
    let d_ours = similarity::metric_adjoint_distance(&bc, &theta, &t).unwrap();
    o.lines.push(format!(
        "    note: T* = Theta T Theta^-1 as projector distance: stated matrix {d_stated:.2e}, computed metric {d_ours:.2e}"
    ));
    let sk = bc.cayley(c(1.0, 0.0), &t).unwrap();
    let qsa = linalg::op_norm(&(sk.adjoint() - &theta * &sk * linalg::inverse(&theta).unwrap()));
    o.check(qsa < 1e-10, format!("S* = Theta S Theta^-1 residual {qsa:.2e}"));
    let g_cert = BlockTransform::new(linalg::inverse(&tau_g(tau)).unwrap(), CMat::zeros(0, 0)).unwrap();
    let explicit = similarity::verify_similarity(&g, &bc, &presets::standard(2), &g_cert, &t);
    o.check(explicit.is_ok(), format!("(Q G_tau)^-1 certifies tau -> Kirchhoff: {:?}", explicit.as_ref().map(|c| c.residual)));

    // Spectra of source and Kirchhoff target: on the line (both empty)
    // and on the two-edge loop with the interaction at both vertices.
    let spec = |g: &MetricGraph, bc: &BoundaryConditions| -> Vec<(C64, usize)> {
        let rep = spectrum::find_eigenvalues(&system(g.clone(), bc.clone()), 10.0, 2.0, &opts()).unwrap();
        rep.points
            .iter()
            .map(|p| (p.lambda, if p.status == PointStatus::ZeroMode { p.geometric_multiplicity } else { p.winding_multiplicity }))
            .filter(|p| p.1 > 0)
            .collect()
    };
    let line = same_multiset(&spec(&g, &bc), &spec(&g, &cert.target), 1e-8);
    let lg = builders::two_edge_loop(1.0).unwrap();
    let local = |b: BoundaryConditions| BoundaryConditions::assemble_local(&lg, |_, _| Ok((b.a().clone(), b.b().clone()))).unwrap();
    let src = spec(&lg, &local(presets::tau(tau)));
    let loop_res = same_multiset(&src, &spec(&lg, &local(presets::standard(2))), 1e-8);
    o.check(line.is_ok() && loop_res.is_ok() && !src.is_empty(), format!("eigenvalue multisets agree: line {line:?}, loop {loop_res:?} ({} points)", src.len()));

    let l = from_real_rows(&[&[0.0, 2.0], &[0.5, 0.0]]);
    let dbc = BoundaryConditions::new(l, linalg::identity(2)).unwrap();
    let rep = spectrum::find_eigenvalues(&system(g.clone(), dbc.clone()), 10.0, 5.0, &opts()).unwrap();
    let ev: Vec<C64> = rep.eigenvalues_with_multiplicity();
    let err = ev.iter().map(|l| (l + 1.0).norm()).fold(f64::INFINITY, f64::min);
    o.check(ev.len() == 1 && err < 1e-8, format!("scaled two-edge example: eigenvalues {ev:?}, |lambda + 1| = {err:.2e}"));
    if let Ok(SimilaritySearch::Found(c2)) = similarity::find_similarity_to_selfadjoint(&g, &dbc, 1.0, &t) {
        let th = c2.metric.unwrap().theta;
        let ratio = th[(1, 1)].re / th[(0, 0)].re;
        o.check((ratio - 4.0).abs() < 1e-10, format!("its metric is proportional to diag(4, 16): ratio {ratio:.12}"));
    } else {
        o.check(false, "no certificate for the scaled two-edge example");
    }
    o
}

fn c8_resolvent() -> Outcome {
    let mut o = Outcome::new();
    let t = tol();
    let cases: Vec<(&str, MetricGraph, BoundaryConditions)> = vec![
        ("interval Dirichlet", builders::interval(PI).unwrap(), presets::dirichlet(2)),
        ("tau = 0.4 line", builders::star(2), presets::tau(0.4)),
        ("star standard", builders::star(3), presets::standard(3)),
    ];
    for (name, g, bc) in cases {
        let sys = system(g, bc);
        for k in [c(0.0, 1.0), c(0.0, 2.0), c(1.0, 1.0)] {
            match resolvent::verify_resolvent_identity(&sys, k, &t) {
                Ok(r) => o.check(
                    r.max_residual() < 1e-7,
                    format!(
                        "{name} k = {k}: domain {:.1e}, equation {:.1e}, symmetry {:.1e}",
                        r.domain_residual, r.equation_residual, r.symmetry_residual
                    ),
                ),
                Err(e) => o.check(false, format!("{name} k = {k}: {e}")),
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let graphs = [builders::edge_with_tail(1.3).unwrap(), builders::compact_star(2, 0.7).unwrap(), builders::star(3)];
    let ks = [c(0.0, 1.0), c(0.0, 2.5), c(1.0, 1.0), c(-0.7, 0.4), c(2.0, 0.3)];
    let mut worst = 0.0f64;
    let mut n_bc = 0;
    while n_bc < 20 {
        let g = &graphs[n_bc % graphs.len()];
        let bc = random_bc(&mut rng, g.d());
        if !bc.is_regular(t.rank) {
            continue;
        }
        let sys = system(g.clone(), bc);
        for k in ks {
            if let Ok(r) = sys.factorization_residual(k, &t) {
                worst = worst.max(r);
            } else {
                worst = f64::INFINITY;
            }
        }
        n_bc += 1;
    }
    o.check(worst < 1e-10, format!("Z = (A + ikB)(1 - S T) R_+ on 20 random conditions x 5 k: max residual {worst:.2e}"));
    o
}

fn c9_convergence() -> Outcome {
    let mut o = Outcome::new();
    let t = tol();
    let k = c(0.0, 2.0);
    let g = builders::edge_with_tail(1.0).unwrap();
    let families: Vec<(&str, Box<dyn Fn(f64) -> BoundaryConditions>)> = vec![
        ("regularised Kirchhoff on an edge with tail", {
            let bc = presets::standard_on(&g);
            Box::new(move |eps: f64| if eps == 0.0 { bc.clone() } else { bc.regularize(eps, Tolerances::default().rank) })
        }),
        ("Robin sigma = 0.5 + 0.5i + eps", {
            let g2 = g.clone();
            Box::new(move |eps: f64| presets::by_degree(&g2, |n| presets::robin(n, c(0.5 + eps, 0.5))).unwrap())
        }),
    ];
    for (name, fam) in families {
        let sys0 = system(g.clone(), fam(0.0));
        let r0 = ResolventKernel::new(&sys0, k, &t).unwrap();
        let mut dist = Vec::new();
        for j in 1..=20 {
            let eps = 2f64.powi(-j);
            let sys = system(g.clone(), fam(eps));
            dist.push(ResolventKernel::new(&sys, k, &t).unwrap().hs_distance(&r0).unwrap());
        }
        let monotone = dist.windows(2).all(|w| w[1] < w[0]);
        let last = *dist.last().unwrap();
        o.check(monotone && last < 1e-6, format!("{name}: {:.2e} -> {last:.2e}, monotone {monotone}", dist[0]));
    }
    o
}

fn random_c(rng: &mut ChaCha8Rng) -> C64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_mat(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> CMat {
    CMat::from_fn(r, cols, |_, _| random_c(rng))
}

fn random_bc(rng: &mut ChaCha8Rng, d: usize) -> BoundaryConditions {
    BoundaryConditions::new(random_mat(rng, d, d), random_mat(rng, d, d)).unwrap()
}

fn c10_properties() -> Outcome {
    let mut o = Outcome::new();
    let t = tol();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 100;

    let mut dims_ok = 0;
    for j in 0..n {
        let d = 1 + j % 5;
        let r = 1 + rng.gen_range(0..d);
        let cm = random_mat(&mut rng, d, r) * random_mat(&mut rng, r, d);
        let bc = BoundaryConditions::new(&cm * random_mat(&mut rng, d, d), &cm * random_mat(&mut rng, d, d)).unwrap();
        let adj = bc.adjoint_general(t.rank);
        if bc.dim_m(t.rank) + adj.dim_m(t.rank) == 2 * d && bc.dim_m(t.rank) == 2 * d - r {
            dims_ok += 1;
        }
    }
    o.check(dims_ok == n, format!("dim M + dim M* = 2d on {dims_ok}/{n} conditions of random rank"));

    let mut worst = 0.0f64;
    for j in 0..n {
        let bc = random_bc(&mut rng, 1 + j % 6);
        let k = c(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..2.0));
        let s = bc.cayley(k, &t).unwrap();
        let back = BoundaryConditions::from_cayley(&s, k).unwrap();
        worst = worst.max(projector_distance(&bc, &back, t.rank));
    }
    o.check(worst < 1e-9, format!("Cayley round trip on {n} conditions: max distance {worst:.2e}"));

    let mut worst = 0.0f64;
    let mut all_sa = true;
    for j in 0..n {
        let d = 1 + j % 6;
        let h = random_mat(&mut rng, d, d);
        let h = &h + h.adjoint();
        let cm = random_mat(&mut rng, d, d);
        let bc = if j % 2 == 0 {
            BoundaryConditions::new(&cm * h, cm).unwrap()
        } else {
            // Unitary Cayley matrix, possibly with eigenvalues -1 and 1.
            let q = random_mat(&mut rng, d, d).qr().q();
            let phases: Vec<C64> = (0..d)
                .map(|i| match i % 3 {
                    0 => C64::from(-1.0),
                    1 => C64::from_polar(1.0, rng.gen_range(-PI..PI)),
                    _ => C64::from(1.0),
                })
                .collect();
            let u = &q * CMat::from_diagonal(&DVector::from_vec(phases)) * q.adjoint();
            BoundaryConditions::from_cayley(&u, c(0.7, 0.0)).unwrap()
        };
        all_sa &= bc.is_self_adjoint(&t);
        for k in [0.3, 1.0, 4.0] {
            if let Ok(s) = bc.cayley(c(k, 0.0), &t) {
                worst = worst.max(linalg::op_norm(&(s.adjoint() * &s - linalg::identity(d))));
            }
        }
    }
    o.check(all_sa && worst < 1e-9, format!("self-adjoint => S(k) unitary on {n} conditions: max deviation {worst:.2e}"));

    // Conjugate pairing and completeness under subdivision.
    let graphs = [builders::interval(1.0).unwrap(), builders::edge_with_tail(1.0).unwrap(), builders::star(2)];
    let mut checked = 0;
    let mut skipped = 0;
    let mut pairs = 0;
    let mut pair_fail = Vec::new();
    let mut split_fail = Vec::new();
    while checked < n && skipped < n {
        let g = &graphs[(checked + skipped) % graphs.len()];
        let bc = random_bc(&mut rng, g.d());
        let sys = system(g.clone(), bc);
        let rep = match spectrum::find_eigenvalues(&sys, 6.0, 2.0, &opts()) {
            Ok(r) if r.complete => r,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let adj = sys.adjoint(&t).unwrap();
        for p in rep.points.iter().filter(|p| p.status == PointStatus::Eigenvalue) {
            let l = p.lambda;
            if l.im.abs() < 1e-8 && l.re >= 0.0 {
                continue;
            }
            pairs += 1;
            let m = adj.geometric_multiplicity(-p.k.conj(), t.rank);
            if m != p.geometric_multiplicity {
                pair_fail.push(format!("{l}: {} vs {m}", p.geometric_multiplicity));
            }
        }
        let r = Region::new(0.13, 5.13, 0.11, 2.11);
        let whole = spectrum::rectangle_winding(&sys, &r, &opts());
        let (cx, cy) = (2.63, 1.07);
        let parts = [
            Region::new(r.re_min, cx, r.im_min, cy),
            Region::new(cx, r.re_max, r.im_min, cy),
            Region::new(r.re_min, cx, cy, r.im_max),
            Region::new(cx, r.re_max, cy, r.im_max),
        ];
        let sum: Result<Vec<usize>, _> = parts.iter().map(|q| spectrum::rectangle_winding(&sys, q, &opts())).collect();
        match (whole, sum) {
            (Ok(w), Ok(s)) => {
                if w != s.iter().sum::<usize>() {
                    split_fail.push(format!("{w} vs {s:?}"));
                }
            }
            _ => {
                skipped += 1;
                continue;
            }
        }
        checked += 1;
    }
    o.check(checked == n, format!("{checked} random systems solved ({skipped} skipped: zero near a contour or incomplete)"));
    o.check(pair_fail.is_empty(), format!("conjugate pairing with the adjoint on {pairs} eigenvalues off [0, inf): failures {pair_fail:?}"));
    o.check(split_fail.is_empty(), format!("winding additive under subdivision: failures {split_fail:?}"));
    o
}

fn c11_weyl() -> Outcome {
    let mut o = Outcome::new();
    let g = builders::compact_star(3, 1.0).unwrap();
    let cases = [
        ("interval [0, 2] Dirichlet", system(builders::interval(2.0).unwrap(), presets::dirichlet(2))),
        ("compact star", system(g.clone(), compact_star_bc(&g))),
        ("compact star, standard everywhere", system(g.clone(), presets::standard_on(&g))),
    ];
    for (name, sys) in cases {
        match spectrum::weyl_count_check(&sys, 50, &opts()) {
            Ok(w) => o.check(
                w.relative_error < 0.01 && w.n_used == 50,
                format!("{name}: slope {:.5} (expected 1 in units of pi / total length), relative error {:.2e}", w.slope, w.relative_error),
            ),
            Err(e) => o.check(false, format!("{name}: {e}")),
        }
    }
    o
}

#[test]
fn acceptance() {
    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "interval oracle", c1_interval),
        (2, "intermediate conditions, sin k = k", c2_intermediate),
        (3, "compact star and decoupling", c3_compact_star),
        (4, "cube with standard conditions", c4_cube),
        (5, "classification suite", c5_classification),
        (6, "adjoint and residual spectrum", c6_adjoint),
        (7, "similarity and metric", c7_similarity),
        (8, "resolvent identities and factorisation", c8_resolvent),
        (9, "norm-resolvent convergence", c9_convergence),
        (10, "property suites", c10_properties),
        (11, "Weyl asymptotics", c11_weyl),
    ];
    let mut unexpected = Vec::new();
    for (n, name, f) in criteria {
        let t0 = Instant::now();
        let out = f();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        let known = if !out.pass && KNOWN_RED.contains(&n) { " (known: stated expectation is wrong)" } else { "" };
        println!("criterion {n:>2}: {tag} {name} [{:.2} s]{known}", t0.elapsed().as_secs_f64());
        for l in &out.lines {
            println!("{l}");
        }
        if !out.pass && !KNOWN_RED.contains(&n) {
            unexpected.push(n);
        }
    }
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}
