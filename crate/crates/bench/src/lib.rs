//! Criterion benchmarks for `seektime-core`; see `benches/`.
