//! Benchmarks for the rohard pipeline live in `benches/`.
