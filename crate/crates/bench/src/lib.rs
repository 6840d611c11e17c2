//! Criterion benchmarks for the pagesel pipeline; see `benches/`.
