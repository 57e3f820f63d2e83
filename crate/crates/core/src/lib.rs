//! Numerical toolkit for the fractional `L^p` uncertainty functional
//!
//! `J(f) = A^{b/(a+b)} B^{a/(a+b)} / ||f||_p`, where `A` weighs `|f|^b` by
//! `|x|^{ab}` and `B` weighs `|f^|^a` by `|xi|^{ab}`.
//!
//! Everything is discretized on a uniform periodic grid on `[-L, L)^n`, `n` in
//! `{1, 2}`, with the transform `f^(xi) = int f(x) exp(-2 pi i x xi) dx`.
//! The crate provides evaluation, gradient-based search for extremizers,
//! local stability sweeps, fractional Schrodinger evolution and checks of the
//! related Sobolev, Hardy-Littlewood-Sobolev and Hausdorff-Young inequalities.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embedding;
pub mod error;
pub mod extremal;
pub mod fit;
pub mod grid;
pub mod norms;
pub mod quad;
pub mod schrodinger;
pub mod special;
pub mod spectral;
pub mod stability;
pub mod uncertainty;

pub use error::{Error, Result};
pub use grid::{make_grid, DilationParams, Field, FunctionSpec, Grid, Point, Shape};
pub use norms::UncertaintyParams;
pub use spectral::{FreqGrid, MultiplierSpec, SpectralField};
