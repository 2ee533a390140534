//! Criterion benchmarks for the hot paths of `mstrend-core`; see `benches/`.
