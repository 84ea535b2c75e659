//! Criterion benchmarks for the correlator and the synthesizers; see `benches/`.
