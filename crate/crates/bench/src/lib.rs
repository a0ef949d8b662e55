//! Criterion benchmarks for `rmb-core`; see `benches/`.
