//! Criterion benchmarks for the solvers and simulators; see `benches/`.
