//! Holds the acceptance suite under `tests/acceptance.rs`; there is no library code.
