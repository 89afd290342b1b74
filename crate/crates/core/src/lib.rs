//! Numerical laboratory for nonlocal generalized filtration equations
//! ∂_t β(u) ∋ Lu, where L is an integro-differential operator of fractional
//! order α ∈ (0, 2) and β is a monotone graph: the two-phase Stefan problem,
//! porous-medium-type nonlinearities, and smooth monotone diffusions.
//!
//! The crate provides:
//! * [`nonlinearity`]: graphs β, inverses φ, the regularization ladder
//!   (β_ε, φ_ε), and the truncation functional B.
//! * [`kernels`]: jump kernels with ellipticity envelopes, Monte Carlo bound
//!   validation, and shrinking-cylinder rescaling.
//! * [`grid`] and [`operator`]: uniform grids with exterior-zero extension and
//!   the dense symmetric discretization of Lu, its Dirichlet form, and the
//!   fractional seminorm.
//! * [`solver`]: explicit (enthalpy) and implicit (Newton) time stepping with
//!   CFL control, plus an ε-ladder driver.
//! * [`analysis`]: level-set truncation energies, the iteration threshold and
//!   recursion, oscillation decay across shrinking cylinders, isoperimetric
//!   diagnostics, energy-inequality constants, and modulus-of-continuity fits.
//! * [`runio`]: deterministic CSV persistence of runs with exact resume.

pub mod analysis;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod nonlinearity;
pub mod operator;
pub mod quadrature;
pub mod reference;
pub mod runio;
pub mod solver;
pub mod threads;

pub use error::{Error, Result};
