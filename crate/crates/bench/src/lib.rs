//! Criterion benchmarks for the hot kernels of `motioncf`; see `benches/`.
