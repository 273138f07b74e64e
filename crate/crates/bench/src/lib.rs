//! Criterion benchmarks for the codec, network and metric kernels; see `benches/`.
