//! Pointwise exterior algebra over R^m (m even) in the interleaved basis,
//! with the symplectic pairing, star, and the three-form invariant on R^6.

pub mod form;
pub mod hitchin;
pub mod multi_index;
pub mod symplectic;
