//! Mode-level inversion of d d^s on middle-degree forms. With constant
//! coefficients the operator block-diagonalizes over Fourier modes; each
//! block is a real matrix, inverted in the least-squares sense by SVD so the
//! recovered potential is the minimum-norm one.

use super::field::{Domain, FormField};
use super::ops::dd_symp;
use crate::algebra::multi_index::{merge_sign, MultiIndexBasis};
use crate::algebra::symplectic::SymplecticFrame;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

/// d = i R on k-forms at wavenumber kappa: R[out][in] = sign * kappa_axis.
fn derivative_factor(m: usize, k: usize, kappa: &[f64]) -> DMatrix<f64> {
    let ba = MultiIndexBasis::get(m, k);
    let bt = MultiIndexBasis::get(m, k + 1);
    let mut r = DMatrix::zeros(bt.len(), ba.len());
    for i in 0..ba.len() {
        for axis in 0..m {
            if let Some((sign, mask)) = merge_sign(1u8 << axis, ba.mask(i)) {
                let t = bt.position(mask).unwrap();
                r[(t, i)] += sign * kappa[axis];
            }
        }
    }
    r
}

fn star_factor(frame: &SymplecticFrame, k: usize) -> DMatrix<f64> {
    let nk = MultiIndexBasis::get(frame.m, k).len();
    let s = frame.star_matrix(k);
    DMatrix::from_fn(nk, nk, |r, c| s[r * nk + c] * frame.star_sign())
}

/// The real matrix of d d^s on n-forms at one wavenumber. Writing d = i R,
/// the composition is (-1)^n R_{n-1} S_{n+1} R_n S_n; both stars appear once
/// here and once inside d^s, so the sign hook cancels out of the product.
pub fn dd_symp_mode_matrix(frame: &SymplecticFrame, kappa: &[f64]) -> DMatrix<f64> {
    let m = frame.m;
    let n = m / 2;
    let s_n = star_factor(frame, n);
    let r_n = derivative_factor(m, n, kappa);
    let s_up = star_factor(frame, n + 1);
    let r_down = derivative_factor(m, n - 1, kappa);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    (r_down * (s_up * (r_n * s_n))).scale(sign)
}

/// Minimum-norm psi with d d^s psi as close to eta as the operator image
/// allows, plus the sup-norm of the physical reproduction error.
pub fn project_dd_symp(eta: &FormField, frame: &SymplecticFrame) -> (FormField, f64) {
    assert_eq!(eta.degree, eta.grid.n, "potential solve applies to middle-degree forms");
    let spec = match eta.domain {
        Domain::Physical => eta.to_spectral(),
        Domain::Spectral => eta.clone(),
    };
    let grid = &eta.grid;
    let m = grid.m;
    let nc = eta.n_comps();
    let scale_spec = spec.norm_inf();
    let skip_below = 1e-16 * scale_spec;

    let mut tmp = vec![Complex64::ZERO; grid.len * nc];
    tmp.par_chunks_mut(nc).enumerate().for_each(|(idx, slot)| {
        let mut rhs_max = 0.0f64;
        for c in 0..nc {
            rhs_max = rhs_max.max(spec.comp(c)[idx].norm());
        }
        if rhs_max <= skip_below {
            return;
        }
        let mut kappa = [0.0f64; 8];
        grid.mode_masked(idx, &mut kappa[..m]);
        let mat = dd_symp_mode_matrix(frame, &kappa[..m]);
        let svd = mat.svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        if smax == 0.0 {
            return;
        }
        let eps = smax * 1e-12;
        let re = DVector::from_fn(nc, |c, _| spec.comp(c)[idx].re);
        let im = DVector::from_fn(nc, |c, _| spec.comp(c)[idx].im);
        let xre = svd.solve(&re, eps).expect("svd taken with singular vectors");
        let xim = svd.solve(&im, eps).expect("svd taken with singular vectors");
        for c in 0..nc {
            slot[c] = Complex64::new(xre[c], xim[c]);
        }
    });

    let mut psi = FormField::zeros(grid, eta.degree, Domain::Spectral);
    for c in 0..nc {
        let dst = psi.comp_mut(c);
        dst.par_iter_mut().enumerate().for_each(|(idx, v)| *v = tmp[idx * nc + c]);
    }
    let mut psi = psi.to_physical();
    if psi.max_imag() < 1e-12 * (1.0 + psi.norm_inf()) {
        psi = psi.real_cleaned();
    }
    let residual = dd_symp(&psi, frame).sub(eta).norm_inf();
    (psi, residual)
}

/// Solves d d^s psi = eta for middle-degree eta. Fails with NotCohomologous
/// when eta carries a harmonic (mean) part, and with NotInImage when the
/// best projection misses eta by more than tol * max(1, |eta|).
pub fn solve_ddsymp_potential(
    eta: &FormField,
    frame: &SymplecticFrame,
    tol: f64,
) -> Result<FormField> {
    assert_eq!(eta.domain, Domain::Physical);
    let scale = eta.norm_inf().max(1.0);
    let mut zero_mode = 0.0f64;
    for c in 0..eta.n_comps() {
        zero_mode = zero_mode.max(eta.mean_value(c).norm());
    }
    if zero_mode > tol * scale {
        return Err(Error::NotCohomologous { zero_mode, tol });
    }
    let (psi, residual) = project_dd_symp(eta, frame);
    if residual > tol * scale {
        return Err(Error::NotInImage { residual, tol });
    }
    Ok(psi)
}
