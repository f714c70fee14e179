//! Criterion benchmarks for the hot loops of `glsim-core`; see `benches/`.
