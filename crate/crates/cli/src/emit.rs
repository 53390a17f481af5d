//! Output files: JSON report, CSV eigenvalue table, plot data.

use crate::run::Report;
use qgraph_core::secular::SecularSystem;
use qgraph_core::spectrum::{self, PointStatus, SolverOptions};
use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

pub const PLOT_GRID: usize = 100;

/// Compact JSON with every float written with 17 significant digits.
/// Object keys come out sorted because `serde_json::Map` is ordered.
struct FixedFloats;

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", fmt_f64(value))
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn to_json_string(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    v.serialize(&mut ser).expect("in-memory write");
    buf.push(b'\n');
    String::from_utf8(buf).expect("utf-8")
}

fn status_str(s: PointStatus) -> &'static str {
    match s {
        PointStatus::Eigenvalue => "eigenvalue",
        PointStatus::RealKCandidate => "real_k_candidate",
        PointStatus::SpectralSingularityCandidate => "spectral_singularity_candidate",
        PointStatus::ZeroMode => "zero_mode",
    }
}

pub fn write_json(report: &Report, dir: &Path) -> io::Result<PathBuf> {
    let path = dir.join("report.json");
    std::fs::write(&path, to_json_string(&report.json))?;
    Ok(path)
}

/// One row per spectral point of the first spectrum task; header only
/// when there is none.
pub fn write_csv(report: &Report, dir: &Path) -> io::Result<PathBuf> {
    let path = dir.join("eigenvalues.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "re_lambda",
        "im_lambda",
        "winding_multiplicity",
        "geometric_multiplicity",
        "status",
        "re_k",
        "im_k",
    ])?;
    if let Some(rep) = report.outcomes.iter().find_map(|o| o.spectrum.as_ref()) {
        for p in &rep.points {
            w.write_record([
                fmt_f64(p.lambda.re),
                fmt_f64(p.lambda.im),
                p.winding_multiplicity.to_string(),
                p.geometric_multiplicity.to_string(),
                status_str(p.status).to_string(),
                fmt_f64(p.k.re),
                fmt_f64(p.k.im),
            ])?;
        }
    }
    w.flush()?;
    Ok(path)
}

/// `log10 |det Z(k)|` on a `PLOT_GRID x PLOT_GRID` grid of cell centres
/// over the bounding box of the default search regions, and the located
/// zeros.
pub fn write_plotdata(
    report: &Report,
    sys: &SecularSystem,
    region: [f64; 2],
    opts: &SolverOptions,
    dir: &Path,
) -> io::Result<Vec<PathBuf>> {
    let regions = spectrum::default_regions(sys, region[0], region[1], opts);
    let re0 = regions.iter().map(|r| r.re_min).fold(f64::INFINITY, f64::min);
    let re1 = regions.iter().map(|r| r.re_max).fold(f64::NEG_INFINITY, f64::max);
    let im0 = regions.iter().map(|r| r.im_min).fold(f64::INFINITY, f64::min);
    let im1 = regions.iter().map(|r| r.im_max).fold(f64::NEG_INFINITY, f64::max);
    let grid = dir.join("plotdata_grid.csv");
    let mut w = csv::Writer::from_path(&grid)?;
    w.write_record(["re_k", "im_k", "log10_abs_det"])?;
    for j in 0..PLOT_GRID {
        let im = im0 + (j as f64 + 0.5) / PLOT_GRID as f64 * (im1 - im0);
        for i in 0..PLOT_GRID {
            let re = re0 + (i as f64 + 0.5) / PLOT_GRID as f64 * (re1 - re0);
            let k = qgraph_core::C64::new(re, im);
            let l = sys.log_det_z(k).map_or(f64::NEG_INFINITY, |l| l.re / std::f64::consts::LN_10);
            w.write_record([fmt_f64(re), fmt_f64(im), fmt_f64(l)])?;
        }
    }
    w.flush()?;
    let zeros = dir.join("plotdata_zeros.csv");
    let mut w = csv::Writer::from_path(&zeros)?;
    w.write_record(["re_k", "im_k", "winding_multiplicity", "status"])?;
    if let Some(rep) = report.outcomes.iter().find_map(|o| o.spectrum.as_ref()) {
        for p in &rep.points {
            w.write_record([
                fmt_f64(p.k.re),
                fmt_f64(p.k.im),
                p.winding_multiplicity.to_string(),
                status_str(p.status).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(vec![grid, zeros])
}
