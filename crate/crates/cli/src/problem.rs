//! Problem files: a graph, vertex conditions and a task list.

use qgraph_core::bcspace::{presets, BcError, BoundaryConditions, Sectorial};
use qgraph_core::graph::{GraphError, GraphSpec};
use qgraph_core::{CMat, MetricGraph, C64};
use serde::Deserialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid problem file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
    #[error("invalid vertex conditions: {0}")]
    Bc(#[from] BcError),
    #[error("{0}")]
    Schema(String),
}

/// A matrix entry: a real number or `[re, im]`.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn value(self) -> C64 {
        match self {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }
}

pub type Matrix = Vec<Vec<Entry>>;

pub fn to_cmat(m: &Matrix, what: &str) -> Result<CMat, InputError> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    if m.iter().any(|r| r.len() != cols) {
        return Err(InputError::Schema(format!("{what}: rows have different lengths")));
    }
    Ok(CMat::from_fn(rows, cols, |r, c| m[r][c].value()))
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    Dirichlet,
    Neumann,
    /// Continuity and Kirchhoff at every vertex.
    Standard,
    Delta { gamma: Entry },
    Tau { tau: f64 },
    Intermediate,
    Sgnsgn,
    Gsgnsgn { plus: usize, minus: usize },
    EmptySpectrum,
    Robin { sigma: Entry },
}

impl Preset {
    /// Conditions on `n` coordinates. Fixed-size presets fail for any
    /// other `n`.
    fn of_size(&self, n: usize) -> Result<BoundaryConditions, InputError> {
        let fixed = |bc: BoundaryConditions, name: &str| {
            if bc.d() == n {
                Ok(bc)
            } else {
                Err(InputError::Bc(BcError::PresetSize(name.into(), n)))
            }
        };
        match self {
            Preset::Dirichlet => Ok(presets::dirichlet(n)),
            Preset::Neumann => Ok(presets::neumann(n)),
            Preset::Standard => Ok(presets::standard(n)),
            Preset::Delta { gamma } => Ok(presets::delta(n, gamma.value())),
            Preset::Robin { sigma } => Ok(presets::robin(n, sigma.value())),
            Preset::Tau { tau } => fixed(presets::tau(*tau), "tau"),
            Preset::Intermediate => fixed(presets::intermediate(), "intermediate"),
            Preset::Sgnsgn => fixed(presets::sgnsgn(), "sgnsgn"),
            Preset::Gsgnsgn { plus, minus } => fixed(presets::gsgnsgn(*plus, *minus), "gsgnsgn"),
            Preset::EmptySpectrum => fixed(presets::empty_spectrum(), "empty_spectrum"),
        }
    }

    /// Vertex-local presets are applied at every vertex; the fixed-size
    /// ones act on the whole boundary space.
    fn is_local(&self) -> bool {
        matches!(
            self,
            Preset::Dirichlet | Preset::Neumann | Preset::Standard | Preset::Delta { .. } | Preset::Robin { .. }
        )
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BcSpec {
    Matrices { a: Matrix, b: Matrix },
    Sectorial { p: Matrix, l: Matrix },
    Preset(Preset),
    /// Per-vertex presets acting on the ports of each vertex in coordinate
    /// order.
    Local {
        #[serde(default)]
        default: Option<Preset>,
        #[serde(default)]
        vertices: BTreeMap<String, Preset>,
    },
}

impl BcSpec {
    pub fn build(&self, g: &MetricGraph) -> Result<BoundaryConditions, InputError> {
        let bc = match self {
            BcSpec::Matrices { a, b } => BoundaryConditions::new(to_cmat(a, "a")?, to_cmat(b, "b")?)?,
            BcSpec::Sectorial { p, l } => Sectorial {
                p: to_cmat(p, "p")?,
                l: to_cmat(l, "l")?,
            }
            .to_bc(),
            BcSpec::Preset(p) if p.is_local() => local(g, |_| Some(p))?,
            BcSpec::Preset(p) => p.of_size(g.d())?,
            BcSpec::Local { default, vertices } => {
                for v in vertices.keys() {
                    if !g.vertices().contains(v) {
                        return Err(InputError::Schema(format!("local conditions for unknown vertex `{v}`")));
                    }
                }
                local(g, |v| vertices.get(v).or(default.as_ref()))?
            }
        };
        bc.check_graph(g)?;
        Ok(bc)
    }
}

fn local<'a, F>(g: &MetricGraph, pick: F) -> Result<BoundaryConditions, InputError>
where
    F: Fn(&str) -> Option<&'a Preset>,
{
    let mut missing = None;
    let mut size_err = None;
    let bc = BoundaryConditions::assemble_local(g, |v, ports| {
        let Some(p) = pick(v) else {
            missing = Some(v.to_string());
            return Err(BcError::PresetSize("none".into(), ports.len()));
        };
        match p.of_size(ports.len()) {
            Ok(bc) => Ok((bc.a().clone(), bc.b().clone())),
            Err(e) => {
                size_err = Some(format!("vertex `{v}`: {e}"));
                Err(BcError::PresetSize(format!("{p:?}"), ports.len()))
            }
        }
    });
    match (bc, missing, size_err) {
        (_, Some(v), _) => Err(InputError::Schema(format!("no conditions given for vertex `{v}`"))),
        (_, _, Some(msg)) => Err(InputError::Schema(msg)),
        (bc, _, _) => Ok(bc?),
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    #[serde(default)]
    pub external: Matrix,
    #[serde(default)]
    pub internal: Matrix,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    Classify,
    Spectrum {
        #[serde(default)]
        region: Option<[f64; 2]>,
    },
    Resolvent {
        /// Spectral parameters `k`; `Im k > 0`, or real `k > 0` on compact
        /// graphs.
        #[serde(default = "default_resolvent_k")]
        k: Vec<Entry>,
        /// Real `k` approached from above to probe for a spectral
        /// singularity.
        #[serde(default)]
        probe: Option<f64>,
    },
    Similarity {
        /// Real `k > 0` used by the search.
        #[serde(default)]
        k: Option<f64>,
        #[serde(default)]
        target: Option<BcSpec>,
        #[serde(default)]
        transform: Option<TransformSpec>,
    },
    Adjoint {
        #[serde(default)]
        region: Option<[f64; 2]>,
    },
}

fn default_resolvent_k() -> Vec<Entry> {
    vec![Entry::Complex([0.0, 1.0])]
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub name: Option<String>,
    pub graph: GraphSpec,
    pub bc: BcSpec,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

/// A parsed problem with its graph and conditions built.
#[derive(Debug, Clone)]
pub struct Problem {
    pub file: ProblemFile,
    pub graph: MetricGraph,
    pub bc: BoundaryConditions,
}

impl Problem {
    pub fn parse(text: &str) -> Result<Problem, InputError> {
        let file: ProblemFile = serde_json::from_str(text)?;
        let graph = MetricGraph::from_spec(&file.graph)?;
        let bc = file.bc.build(&graph)?;
        for t in &file.tasks {
            if let Task::Similarity { target, transform, .. } = t {
                if let Some(t) = target {
                    t.build(&graph)?;
                }
                if transform.is_some() && target.is_none() {
                    return Err(InputError::Schema("similarity: a transform needs a target".into()));
                }
            }
            for r in match t {
                Task::Spectrum { region } | Task::Adjoint { region } => region.iter().collect(),
                _ => Vec::new(),
            } {
                check_region(*r)?;
            }
        }
        Ok(Problem { file, graph, bc })
    }

    pub fn load(path: &str) -> Result<Problem, InputError> {
        let text = std::fs::read_to_string(path).map_err(|source| InputError::Read {
            path: path.to_string(),
            source,
        })?;
        Problem::parse(&text)
    }
}

pub fn check_region(r: [f64; 2]) -> Result<(), InputError> {
    if r.iter().all(|x| x.is_finite() && *x > 0.0) {
        Ok(())
    } else {
        Err(InputError::Schema(format!("region must be two positive numbers, got {r:?}")))
    }
}
