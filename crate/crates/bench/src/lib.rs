//! Criterion benchmarks for `qgraph-core`; see `benches/solver.rs`.
