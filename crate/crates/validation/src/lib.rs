//! Acceptance criteria for the workspace live in `tests/acceptance.rs`;
//! this crate has no library code of its own.
