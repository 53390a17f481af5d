//! Task execution and report assembly.

use crate::problem::{to_cmat, Problem, Task};
use qgraph_core::bcspace::{projector_distance, BoundaryConditions, Tolerances};
use qgraph_core::resolvent::{self, ResolventKernel};
use qgraph_core::secular::SecularSystem;
use qgraph_core::similarity::{self, BlockTransform, SimilarityCertificate, SimilarityError, SimilaritySearch};
use qgraph_core::spectrum::{self, IrregularSpectrum, SolverOptions, SpectrumError, SpectrumReport};
use qgraph_core::{CMat, C64};
use serde_json::{json, Value};

pub const DEFAULT_REGION: [f64; 2] = [20.0, 5.0];
pub const DEFAULT_SIMILARITY_K: f64 = 1.0;

pub const REFUSAL_WHOLE_PLANE: &str = "irregular boundary conditions; point spectrum is C∖[0,∞)";
pub const REFUSAL_WHOLE_PLANE_COMPACT: &str = "irregular boundary conditions; point spectrum is C";

#[derive(Debug, Clone, Copy)]
pub struct Config {
    /// Overrides the per-task region.
    pub region: Option<[f64; 2]>,
    pub tol: Tolerances,
    pub opts: SolverOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Refused,
    Failed,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Refused => "refused",
            Status::Failed => "failed",
        }
    }
}

pub struct TaskOutcome {
    pub task: &'static str,
    pub status: Status,
    pub message: Option<String>,
    pub result: Value,
    /// Spectrum found by a spectrum task, for the CSV and plot outputs.
    pub spectrum: Option<SpectrumReport>,
    pub region: Option<[f64; 2]>,
}

impl TaskOutcome {
    fn ok(task: &'static str, result: Value) -> Self {
        TaskOutcome {
            task,
            status: Status::Ok,
            message: None,
            result,
            spectrum: None,
            region: None,
        }
    }

    fn with(task: &'static str, status: Status, message: impl Into<String>) -> Self {
        TaskOutcome {
            task,
            status,
            message: Some(message.into()),
            result: Value::Null,
            spectrum: None,
            region: None,
        }
    }

    fn to_json(&self) -> Value {
        json!({
            "task": self.task,
            "status": self.status.as_str(),
            "message": self.message,
            "result": self.result,
        })
    }
}

pub struct Report {
    pub json: Value,
    pub outcomes: Vec<TaskOutcome>,
}

pub fn cx(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn mat(m: &CMat) -> Value {
    Value::Array((0..m.nrows()).map(|r| Value::Array((0..m.ncols()).map(|c| cx(m[(r, c)])).collect())).collect())
}

fn bc_json(bc: &BoundaryConditions) -> Value {
    json!({"a": mat(bc.a()), "b": mat(bc.b())})
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serialisable")
}

pub fn classification(p: &Problem, cfg: &Config) -> Value {
    let c = p.bc.classify(&cfg.tol);
    let reg = p.bc.regularity(cfg.tol.rank);
    let mut v = to_value(&c);
    v["witness_condition"] = json!(reg.witness_cond);
    v["self_adjoint_residual"] = json!(p.bc.self_adjoint_residual());
    v["essential"] = to_value(&spectrum::essential_spectrum(
        &SecularSystem::new(p.graph.clone(), p.bc.clone()).expect("checked"),
        cfg.tol.rank,
    ));
    if let Some(s) = p.bc.m_sectorial(&cfg.tol) {
        v["sectorial"] = json!({"p": mat(&s.p), "l": mat(&s.l)});
    }
    v
}

fn region_for(task_region: Option<[f64; 2]>, cfg: &Config) -> [f64; 2] {
    cfg.region.or(task_region).unwrap_or(DEFAULT_REGION)
}

fn spectrum_json(rep: &SpectrumReport) -> Value {
    let mut v = to_value(rep);
    v["eigenvalues"] = Value::Array(rep.eigenvalues_with_multiplicity().into_iter().map(cx).collect());
    v
}

fn spectrum_task(p: &Problem, region: Option<[f64; 2]>, cfg: &Config) -> TaskOutcome {
    let [re, im] = region_for(region, cfg);
    let sys = SecularSystem::new(p.graph.clone(), p.bc.clone()).expect("checked");
    let regular = p.bc.is_regular(cfg.tol.rank);
    let found = if regular {
        spectrum::find_eigenvalues(&sys, re, im, &cfg.opts).map(IrregularSpectrum::Discrete)
    } else {
        spectrum::find_eigenvalues_irregular(&sys, re, im, &cfg.opts)
    };
    let mut out = match found {
        Ok(IrregularSpectrum::WholePlane) => {
            let msg = if p.graph.is_compact() { REFUSAL_WHOLE_PLANE_COMPACT } else { REFUSAL_WHOLE_PLANE };
            TaskOutcome::with("spectrum", Status::Refused, msg)
        }
        Ok(IrregularSpectrum::Discrete(rep)) => {
            let mut v = spectrum_json(&rep);
            if !regular {
                v["note"] = json!("irregular boundary conditions; det Z is not identically zero");
            }
            let residual = if regular {
                spectrum::residual_spectrum(&sys, re, &cfg.tol, &cfg.opts)
            } else {
                Ok(Vec::new())
            };
            match residual {
                Ok(r) => v["residual_candidates"] = Value::Array(r.into_iter().map(cx).collect()),
                Err(e) => v["residual_candidates_error"] = json!(e.to_string()),
            }
            let mut o = TaskOutcome::ok("spectrum", v);
            o.spectrum = Some(rep);
            o
        }
        Err(e @ SpectrumError::Overflow(_)) => TaskOutcome::with("spectrum", Status::Refused, e.to_string()),
        Err(e) => TaskOutcome::with("spectrum", Status::Failed, e.to_string()),
    };
    out.region = Some([re, im]);
    out
}

fn resolvent_task(p: &Problem, ks: &[crate::problem::Entry], probe: Option<f64>, cfg: &Config) -> TaskOutcome {
    if !p.bc.is_regular(cfg.tol.rank) {
        return TaskOutcome::with("resolvent", Status::Refused, "irregular boundary conditions; no resolvent kernel");
    }
    let sys = SecularSystem::new(p.graph.clone(), p.bc.clone()).expect("checked");
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for k in ks.iter().map(|e| e.value()) {
        let kernel = ResolventKernel::new(&sys, k, &cfg.tol);
        let identity = resolvent::verify_resolvent_identity(&sys, k, &cfg.tol);
        match (kernel, identity) {
            (Ok(kernel), Ok(rep)) => {
                let mut v = to_value(&rep);
                v["max_residual"] = json!(rep.max_residual());
                v["factorization_residual"] = match sys.factorization_residual(k, &cfg.tol) {
                    Ok(r) => json!(r),
                    Err(e) => json!(e.to_string()),
                };
                v["hs_norm_r1"] = json!(kernel.hs_norm_r1());
                points.push(v);
            }
            (Err(e), _) | (_, Err(e)) => {
                failures.push(format!("k = {k}: {e}"));
                points.push(json!({"k": cx(k), "error": e.to_string()}));
            }
        }
    }
    let mut v = json!({"points": points});
    if let Some(kr) = probe {
        v["singularity_probe"] = to_value(&resolvent::singularity_profile(&sys, kr, &cfg.tol));
    }
    let mut o = TaskOutcome::ok("resolvent", v);
    if !failures.is_empty() {
        o.status = if failures.len() == ks.len() { Status::Failed } else { Status::Ok };
        o.message = Some(failures.join("; "));
    }
    o
}

fn certificate_json(cert: &SimilarityCertificate, cfg: &Config) -> Value {
    let mut v = json!({
        "transform": {
            "external": mat(cert.transform.external_block()),
            "internal": mat(cert.transform.internal_block()),
        },
        "target": bc_json(&cert.target),
        "target_self_adjoint": cert.target_self_adjoint,
        "residual": cert.residual,
        "k": cert.k,
        "single_k": cert.single_k,
    });
    if let Ok((theta, theta_inv)) = similarity::metric_operator(cert) {
        let k = cert.k.unwrap_or(DEFAULT_SIMILARITY_K);
        v["metric"] = json!({
            "theta": mat(&theta),
            "theta_inv": mat(&theta_inv),
            "quasi_self_adjoint_residual": similarity::quasi_self_adjoint_residual(&cert.source, &theta, k, &cfg.tol).ok(),
            "adjoint_distance": similarity::metric_adjoint_distance(&cert.source, &theta, &cfg.tol).ok(),
        });
    }
    v
}

fn similarity_task(
    p: &Problem,
    k: Option<f64>,
    target: Option<&crate::problem::BcSpec>,
    transform: Option<&crate::problem::TransformSpec>,
    cfg: &Config,
) -> TaskOutcome {
    let refuse = |e: SimilarityError| match e {
        SimilarityError::NotSimilar(_) | SimilarityError::TargetNotSelfAdjoint => {
            TaskOutcome::with("similarity", Status::Failed, e.to_string())
        }
        _ => TaskOutcome::with("similarity", Status::Refused, e.to_string()),
    };
    let mut v = if let (Some(t), Some(tr)) = (target, transform) {
        let target = t.build(&p.graph).expect("checked at parse time");
        let blocks = to_cmat(&tr.external, "external").and_then(|e| Ok((e, to_cmat(&tr.internal, "internal")?)));
        let transform = match blocks {
            Ok((e, i)) => BlockTransform::new(e, i),
            Err(e) => return TaskOutcome::with("similarity", Status::Failed, e.to_string()),
        };
        match transform.and_then(|t| similarity::verify_similarity(&p.graph, &p.bc, &target, &t, &cfg.tol)) {
            Ok(cert) => json!({"mode": "verify", "found": true, "certificate": certificate_json(&cert, cfg)}),
            Err(e) => return refuse(e),
        }
    } else {
        let k = k.unwrap_or(DEFAULT_SIMILARITY_K);
        match similarity::find_similarity_to_selfadjoint(&p.graph, &p.bc, k, &cfg.tol) {
            Ok(SimilaritySearch::Found(cert)) => {
                let mut v = json!({"mode": "search", "found": true, "certificate": certificate_json(&cert, cfg)});
                if let Some(t) = target {
                    let want = t.build(&p.graph).expect("checked at parse time");
                    v["target_distance"] = json!(projector_distance(&cert.target, &want, cfg.tol.rank));
                }
                v
            }
            Ok(SimilaritySearch::NotFound(ob)) => json!({"mode": "search", "found": false, "obstruction": to_value(&ob)}),
            Err(e) => return refuse(e),
        }
    };
    if p.graph.is_compact() {
        v["decoupling"] = match similarity::decouple_symmetric_graph(&p.graph, &p.bc, &cfg.tol) {
            Ok(d) => json!({
                "length": d.length,
                "intervals": to_value(&d.intervals),
                "transform": mat(d.transform.internal_block()),
            }),
            Err(e) => json!({"violations": to_value(&e.0)}),
        };
    }
    TaskOutcome::ok("similarity", v)
}

fn adjoint_task(p: &Problem, region: Option<[f64; 2]>, cfg: &Config) -> TaskOutcome {
    let adj = p.bc.adjoint(&cfg.tol);
    let double = adj.adjoint(&cfg.tol);
    let mut v = json!({
        "adjoint": bc_json(&adj),
        "adjoint_classification": to_value(&adj.classify(&cfg.tol)),
        "double_adjoint_distance": projector_distance(&double, &p.bc, cfg.tol.rank),
        "distance_to_adjoint": projector_distance(&adj, &p.bc, cfg.tol.rank),
    });
    if p.bc.is_regular(cfg.tol.rank) {
        let [re, _] = region_for(region, cfg);
        let sys = SecularSystem::new(p.graph.clone(), p.bc.clone()).expect("checked");
        match spectrum::residual_spectrum(&sys, re, &cfg.tol, &cfg.opts) {
            Ok(r) => v["residual_spectrum"] = Value::Array(r.into_iter().map(cx).collect()),
            Err(e) => return TaskOutcome::with("adjoint", Status::Failed, e.to_string()),
        }
    }
    TaskOutcome::ok("adjoint", v)
}

pub fn run(p: &Problem, cfg: &Config) -> Report {
    let classification = classification(p, cfg);
    let tasks = if p.file.tasks.is_empty() { vec![Task::Classify] } else { p.file.tasks.clone() };
    let outcomes: Vec<TaskOutcome> = tasks
        .iter()
        .map(|t| match t {
            Task::Classify => TaskOutcome::ok("classify", classification.clone()),
            Task::Spectrum { region } => spectrum_task(p, *region, cfg),
            Task::Resolvent { k, probe } => resolvent_task(p, k, *probe, cfg),
            Task::Similarity { k, target, transform } => similarity_task(p, *k, target.as_ref(), transform.as_ref(), cfg),
            Task::Adjoint { region } => adjoint_task(p, *region, cfg),
        })
        .collect();
    let json = json!({
        "tool": {"name": "qgraph", "version": env!("CARGO_PKG_VERSION")},
        "config": {
            "region": cfg.region,
            "tol": to_value(&cfg.tol),
            "solver": to_value(&cfg.opts),
        },
        "problem": {
            "name": p.file.name,
            "graph": to_value(&p.graph.to_spec()),
            "d": p.graph.d(),
            "bc": bc_json(&p.bc),
        },
        "classification": classification,
        "tasks": outcomes.iter().map(TaskOutcome::to_json).collect::<Vec<_>>(),
    });
    Report { json, outcomes }
}

impl Report {
    /// 0 when every task succeeded or was refused with an explanation, 1
    /// when some task failed.
    pub fn exit_code(&self) -> i32 {
        if self.outcomes.iter().any(|o| o.status == Status::Failed) {
            1
        } else {
            0
        }
    }
}
