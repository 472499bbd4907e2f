//! Band-limited differential forms on even periodic grids: spectral exterior
//! derivative, its symplectic adjoint, mode-level inversion of the composed
//! operator, off-grid sampling, and the on-disk formats.

pub mod fft;
pub mod field;
pub mod grid;
pub mod io;
pub mod modesolve;
pub mod offgrid;
pub mod ops;
