//! Benchmark-only crate; see `benches/explorers.rs`.
