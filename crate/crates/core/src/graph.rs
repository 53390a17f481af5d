//! Metric graphs: vertices, internal edges `[0, a]` and external half-lines
//! `[0, inf)`, and the ordering of boundary values.
//!
//! Boundary coordinates are ordered `[externals at 0; internals at 0;
//! internals at a]`, so `d = |E| + 2|I|`. Edge functions (used for
//! coefficients and kernels) are ordered `[externals; internals]`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalEdge {
    pub from: String,
    pub to: String,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalEdge {
    pub vertex: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("internal edge {edge} has non-positive length {length}")]
    NonPositiveLength { edge: usize, length: f64 },
    #[error("edge references undeclared vertex `{0}`")]
    UnknownVertex(String),
    #[error("vertex `{0}` has no incident edges")]
    DanglingVertex(String),
    #[error("vertex `{0}` declared twice")]
    DuplicateVertex(String),
    #[error("graph has no edges")]
    Empty,
}

/// Raw graph description as found in problem files. `vertices` may be
/// omitted, in which case it is inferred from the edges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    #[serde(default)]
    pub vertices: Vec<String>,
    #[serde(default)]
    pub internal_edges: Vec<InternalEdge>,
    #[serde(default)]
    pub external_edges: Vec<ExternalEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricGraph {
    vertices: Vec<String>,
    internal: Vec<InternalEdge>,
    external: Vec<ExternalEdge>,
}

/// Boundary coordinate kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    External(usize),
    Start(usize),
    End(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub d: usize,
    pub n_external: usize,
    pub n_internal: usize,
    pub n_vertices: usize,
    pub compact: bool,
    /// Common internal edge length, if all internal edges share one.
    pub equal_length: Option<f64>,
    pub total_length: f64,
    /// `|I| - |V|`.
    pub euler_count: i64,
    pub degrees: BTreeMap<String, usize>,
}

impl MetricGraph {
    pub fn new(
        vertices: Vec<String>,
        internal: Vec<InternalEdge>,
        external: Vec<ExternalEdge>,
    ) -> Result<Self, GraphError> {
        let g = MetricGraph {
            vertices,
            internal,
            external,
        };
        g.check()?;
        Ok(g)
    }

    pub fn from_spec(spec: &GraphSpec) -> Result<Self, GraphError> {
        let mut vertices = spec.vertices.clone();
        if vertices.is_empty() {
            let mut push = |v: &String| {
                if !vertices.contains(v) {
                    vertices.push(v.clone());
                }
            };
            for e in &spec.internal_edges {
                push(&e.from);
                push(&e.to);
            }
            for e in &spec.external_edges {
                push(&e.vertex);
            }
        }
        MetricGraph::new(
            vertices,
            spec.internal_edges.clone(),
            spec.external_edges.clone(),
        )
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self.vertices.clone(),
            internal_edges: self.internal.clone(),
            external_edges: self.external.clone(),
        }
    }

    fn check(&self) -> Result<(), GraphError> {
        if self.internal.is_empty() && self.external.is_empty() {
            return Err(GraphError::Empty);
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if self.vertices[..i].contains(v) {
                return Err(GraphError::DuplicateVertex(v.clone()));
            }
        }
        for (i, e) in self.internal.iter().enumerate() {
            if !(e.length > 0.0) || !e.length.is_finite() {
                return Err(GraphError::NonPositiveLength {
                    edge: i,
                    length: e.length,
                });
            }
        }
        let known = |v: &String| self.vertices.contains(v);
        for e in &self.internal {
            for v in [&e.from, &e.to] {
                if !known(v) {
                    return Err(GraphError::UnknownVertex(v.clone()));
                }
            }
        }
        for e in &self.external {
            if !known(&e.vertex) {
                return Err(GraphError::UnknownVertex(e.vertex.clone()));
            }
        }
        for v in &self.vertices {
            if self.degree(v) == 0 {
                return Err(GraphError::DanglingVertex(v.clone()));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<ValidationReport, GraphError> {
        self.check()?;
        let degrees = self
            .vertices
            .iter()
            .map(|v| (v.clone(), self.degree(v)))
            .collect();
        Ok(ValidationReport {
            d: self.d(),
            n_external: self.n_external(),
            n_internal: self.n_internal(),
            n_vertices: self.vertices.len(),
            compact: self.is_compact(),
            equal_length: self.equal_length(),
            total_length: self.total_length(),
            euler_count: self.n_internal() as i64 - self.vertices.len() as i64,
            degrees,
        })
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn internal_edges(&self) -> &[InternalEdge] {
        &self.internal
    }

    pub fn external_edges(&self) -> &[ExternalEdge] {
        &self.external
    }

    pub fn n_external(&self) -> usize {
        self.external.len()
    }

    pub fn n_internal(&self) -> usize {
        self.internal.len()
    }

    /// Number of edge functions, `|E| + |I|`.
    pub fn n_edges(&self) -> usize {
        self.external.len() + self.internal.len()
    }

    pub fn d(&self) -> usize {
        self.external.len() + 2 * self.internal.len()
    }

    pub fn is_compact(&self) -> bool {
        self.external.is_empty()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.internal.iter().map(|e| e.length).collect()
    }

    pub fn max_length(&self) -> f64 {
        self.internal.iter().map(|e| e.length).fold(0.0, f64::max)
    }

    pub fn total_length(&self) -> f64 {
        self.internal.iter().map(|e| e.length).sum()
    }

    /// Length of edge function `j` (infinite for external edges).
    pub fn edge_length(&self, j: usize) -> f64 {
        if j < self.n_external() {
            f64::INFINITY
        } else {
            self.internal[j - self.n_external()].length
        }
    }

    pub fn equal_length(&self) -> Option<f64> {
        let first = self.internal.first()?.length;
        let tol = 1e-12 * first;
        self.internal
            .iter()
            .all(|e| (e.length - first).abs() <= tol)
            .then_some(first)
    }

    /// Degree of `v`; a loop contributes twice.
    pub fn degree(&self, v: &str) -> usize {
        self.ports_at(v).len()
    }

    pub fn port_index(&self, p: Port) -> usize {
        let (ne, ni) = (self.n_external(), self.n_internal());
        match p {
            Port::External(e) => e,
            Port::Start(i) => ne + i,
            Port::End(i) => ne + ni + i,
        }
    }

    pub fn port(&self, index: usize) -> Port {
        let (ne, ni) = (self.n_external(), self.n_internal());
        if index < ne {
            Port::External(index)
        } else if index < ne + ni {
            Port::Start(index - ne)
        } else {
            Port::End(index - ne - ni)
        }
    }

    /// Vertex at which boundary coordinate `index` sits.
    pub fn port_vertex(&self, index: usize) -> &str {
        match self.port(index) {
            Port::External(e) => &self.external[e].vertex,
            Port::Start(i) => &self.internal[i].from,
            Port::End(i) => &self.internal[i].to,
        }
    }

    /// Boundary coordinates at `v`, in increasing order.
    pub fn ports_at(&self, v: &str) -> Vec<usize> {
        (0..self.d()).filter(|&p| self.port_vertex(p) == v).collect()
    }

    /// True if every vertex has only outgoing or only incoming internal
    /// edges (and no external edges).
    pub fn is_source_sink_oriented(&self) -> bool {
        self.is_compact()
            && self.vertices.iter().all(|v| {
                let ports = self.ports_at(v);
                let starts = ports
                    .iter()
                    .filter(|&&p| matches!(self.port(p), Port::Start(_)))
                    .count();
                starts == 0 || starts == ports.len()
            })
    }
}

/// Named graph constructors used throughout tests, presets and examples.
pub mod builders {
    use super::*;

    fn ie(from: &str, to: &str, length: f64) -> InternalEdge {
        InternalEdge {
            from: from.into(),
            to: to.into(),
            length,
        }
    }

    fn ee(v: &str) -> ExternalEdge {
        ExternalEdge { vertex: v.into() }
    }

    pub fn interval(a: f64) -> Result<MetricGraph, GraphError> {
        MetricGraph::new(vec!["0".into(), "1".into()], vec![ie("0", "1", a)], vec![])
    }

    pub fn half_line() -> MetricGraph {
        MetricGraph::new(vec!["o".into()], vec![], vec![ee("o")]).expect("valid")
    }

    /// `n` half-lines joined at one vertex.
    pub fn star(n: usize) -> MetricGraph {
        MetricGraph::new(vec!["o".into()], vec![], (0..n).map(|_| ee("o")).collect())
            .expect("valid")
    }

    /// `n` edges of length `a` leaving a centre `o` towards pendant
    /// vertices `p1..pn`.
    pub fn compact_star(n: usize, a: f64) -> Result<MetricGraph, GraphError> {
        let mut vertices = vec!["o".to_string()];
        let mut edges = Vec::new();
        for j in 1..=n {
            let p = format!("p{j}");
            edges.push(ie("o", &p, a));
            vertices.push(p);
        }
        MetricGraph::new(vertices, edges, vec![])
    }

    /// The cube graph with edges oriented from even to odd vertices, so
    /// each vertex is a pure source or a pure sink.
    pub fn cube(a: f64) -> Result<MetricGraph, GraphError> {
        let name = |v: u32| format!("{:03b}", v);
        let vertices: Vec<String> = (0..8).map(name).collect();
        let mut edges = Vec::new();
        for v in 0u32..8 {
            if v.count_ones() % 2 == 1 {
                continue;
            }
            for bit in 0..3 {
                let w = v ^ (1 << bit);
                edges.push(ie(&name(v), &name(w), a));
            }
        }
        MetricGraph::new(vertices, edges, vec![])
    }

    /// Two parallel edges of length `a` from `u` to `v`.
    pub fn two_edge_loop(a: f64) -> Result<MetricGraph, GraphError> {
        MetricGraph::new(
            vec!["u".into(), "v".into()],
            vec![ie("u", "v", a), ie("u", "v", a)],
            vec![],
        )
    }

    /// An internal edge `p -> o` of length `a` with a half-line at `o`.
    pub fn edge_with_tail(a: f64) -> Result<MetricGraph, GraphError> {
        MetricGraph::new(
            vec!["p".into(), "o".into()],
            vec![ie("p", "o", a)],
            vec![ee("o")],
        )
    }

    /// A circle of length `a` (one vertex, one loop).
    pub fn circle(a: f64) -> Result<MetricGraph, GraphError> {
        MetricGraph::new(vec!["o".into()], vec![ie("o", "o", a)], vec![])
    }
}
