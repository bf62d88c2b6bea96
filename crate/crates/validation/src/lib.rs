//! Holds the end-to-end acceptance suite in `tests/acceptance.rs`; run it with
//! `cargo test -p sivkit-validation`. It lives in its own package so that a
//! failing criterion does not stop the unit and integration tests of the
//! other crates from running.
