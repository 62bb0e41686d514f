//! Criterion benchmarks for the stackcomm solvers live in `benches/`.
