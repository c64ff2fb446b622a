//! Criterion benchmarks for swarmgrid; run with `cargo bench -p swarmgrid-bench`.
