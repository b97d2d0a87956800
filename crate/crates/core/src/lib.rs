//! A 2D solver for the Cahn-Hilliard-Navier-Stokes system on a staggered
//! (marker-and-cell) grid.
//!
//! The time discretization is a linear, fully decoupled BDF2 scheme built on
//! two global auxiliary scalars: `r`, the square root of the shifted
//! double-well energy (the SAV variable), and `q`, a zero-energy-contribution
//! multiplier whose exact value is 1. Nonlinear terms are evaluated on
//! second-order extrapolated "star" profiles, so each step reduces to a
//! handful of constant-coefficient solves plus a 2x2 closure for `(r, q)`,
//! followed by a pressure-correction projection.
//!
//! Module map:
//! - [`grid`]: staggered field containers, ghost-cell conventions, averages.
//! - [`ops`]: difference/averaging operators, inner products, norms.
//! - [`fastsolve`]: direct trigonometric-basis solvers for the three
//!   constant-coefficient systems the scheme needs.
//! - [`scheme`]: the time stepper itself.
//! - [`diagnostics`]: energy functionals, conservation monitors, and the
//!   summation-by-parts identity checker.
//! - [`macf`]: the binary snapshot format shared by all field types.

pub mod diagnostics;
pub mod fastsolve;
pub mod grid;
pub mod macf;
pub mod ops;
pub mod scheme;
