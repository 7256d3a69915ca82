//! Acceptance criteria for the simulator live in `tests/acceptance.rs`.
