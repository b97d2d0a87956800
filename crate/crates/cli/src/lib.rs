//! Driver layer for the SAV-ZEC CHNS solver: configuration parsing, the
//! simulation runner, refinement studies, and the invariant-check battery.

pub mod check;
pub mod config;
pub mod convergence;
pub mod runner;
