//! Spectral exterior derivative, the symplectic codifferential, and the
//! pointwise star lifted to whole fields. Output domain always matches the
//! input domain.

use super::field::{Domain, FormField};
use crate::algebra::multi_index::{merge_sign, MultiIndexBasis};
use crate::algebra::symplectic::SymplecticFrame;
use num_complex::Complex64;
use rayon::prelude::*;

/// d: multiplies each mode by i k_a and wedges e^a in front, per axis. Modes
/// at a Nyquist frequency differentiate to zero along that axis.
pub fn exterior_derivative(f: &FormField) -> FormField {
    match f.domain {
        Domain::Spectral => d_spectral(f),
        Domain::Physical => d_spectral(&f.to_spectral()).to_physical(),
    }
}

fn d_spectral(f: &FormField) -> FormField {
    let grid = &f.grid;
    let m = grid.m;
    let k = f.degree;
    assert!(k < m, "derivative of a top-degree form is zero in a larger space");
    let ba = MultiIndexBasis::get(m, k);
    let bt = MultiIndexBasis::get(m, k + 1);
    let mut out = FormField::zeros(grid, k + 1, Domain::Spectral);
    for i in 0..ba.len() {
        for axis in 0..m {
            if let Some((sign, mask)) = merge_sign(1u8 << axis, ba.mask(i)) {
                let t = bt.position(mask).unwrap();
                let fin = f.comp(i);
                let st = grid.strides[axis];
                let s = grid.sizes[axis];
                let kv = grid.derivative_wavenumbers(axis);
                out.comp_mut(t).par_iter_mut().enumerate().for_each(|(idx, v)| {
                    let kw = kv[(idx / st) % s];
                    *v += Complex64::new(0.0, sign * kw) * fin[idx];
                });
            }
        }
    }
    out
}

/// Pointwise star applied to every grid point; constant coefficients, so the
/// same matrix acts in either domain.
pub fn star_pointwise(f: &FormField, frame: &SymplecticFrame) -> FormField {
    let m = f.grid.m;
    assert_eq!(m, frame.m);
    let k = f.degree;
    let s = frame.star_matrix(k);
    let sign = frame.star_sign();
    let nk = f.n_comps();
    let mut out = FormField::zeros(&f.grid, m - k, Domain::Physical);
    out.domain = f.domain;
    for r in 0..nk {
        let row = &s[r * nk..(r + 1) * nk];
        let dst = out.comp_mut(r);
        for (j, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let src = f.comp(j);
            let c = w * sign;
            dst.par_iter_mut().enumerate().for_each(|(idx, v)| *v += src[idx] * c);
        }
    }
    out
}

/// d^s on a k-form: (-1)^{k+1} star d star.
pub fn symplectic_codifferential(f: &FormField, frame: &SymplecticFrame) -> FormField {
    assert!(f.degree >= 1, "the codifferential lowers degree");
    let sign = if (f.degree + 1) % 2 == 0 { 1.0 } else { -1.0 };
    let inner = star_pointwise(f, frame);
    let d_inner = exterior_derivative(&inner);
    star_pointwise(&d_inner, frame).scaled(Complex64::new(sign, 0.0))
}

/// The degree-preserving composition d d^s.
pub fn dd_symp(f: &FormField, frame: &SymplecticFrame) -> FormField {
    exterior_derivative(&symplectic_codifferential(f, frame))
}
