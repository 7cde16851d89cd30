//! Wall-clock benchmarks live in `benches/`; run them with `cargo bench -p helene-bench`.
