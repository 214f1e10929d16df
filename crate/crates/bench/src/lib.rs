//! Criterion benchmarks for symmin live under `benches/`.
