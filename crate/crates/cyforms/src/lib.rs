//! Spectral exterior calculus and volume-form solvers on flat tori.
//!
//! Layers, bottom up:
//!   - `algebra`: pointwise exterior algebra over R^m, the symplectic pairing
//!     and star, and the quartic three-form invariant machinery on R^6;
//!   - `calculus`: band-limited form fields on even grids, spectral d and its
//!     symplectic adjoint, mode-level inversion of d d^s, off-grid sampling;
//!   - `background`: the flat reference structures (omega, the holomorphic
//!     volume form, densities);
//!   - `monge_ampere`: Newton solver for the prescribed volume equation;
//!   - `moser`: interpolation flow transport and pullbacks;
//!   - `pipeline`: the outer solve producing a certified pair of volume forms.
//!
//! Coordinates are interleaved: axis 2i is x_{i+1}, axis 2i+1 is y_{i+1}, so
//! omega = sum_i e^{2i} wedge e^{2i+1} has the same component layout in every
//! dimension.

pub mod algebra;
pub mod background;
pub mod calculus;
pub mod error;
pub mod monge_ampere;
pub mod moser;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
