//! Test-only package. The acceptance criteria live in `tests/acceptance.rs`
//! and run last in `cargo test --workspace`.
