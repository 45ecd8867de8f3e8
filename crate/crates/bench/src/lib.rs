//! Criterion benchmarks for optcast live under `benches/`.
