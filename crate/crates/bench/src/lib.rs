//! Criterion benchmarks for the ECC codecs and the end-to-end flow.
