//! Quartic invariant and complex-structure reconstruction for real 3-forms
//! on R^6. A form of negative invariant determines an almost complex
//! structure J and a partner 3-form rho_hat making rho + i rho_hat a
//! decomposable (3,0) volume form; on Re(dz1 dz2 dz3) this reproduces the
//! standard structure and Im(dz1 dz2 dz3) exactly.

use super::form::{interior_product, wedge, AlgebraicForm};
use super::multi_index::MultiIndexBasis;
use crate::error::{Error, Result};

const M: usize = 6;

/// K[mu][nu] carries iota_{e_nu} rho ^ rho back through the contraction
/// isomorphism iota_w vol = sigma, oriented so that Re(dz1 dz2 dz3) maps to
/// the complex structure with J dx = dy (rather than its negative).
pub fn hitchin_k_matrix(rho: &AlgebraicForm) -> [[f64; 6]; 6] {
    assert_eq!((rho.m, rho.degree), (M, 3), "K matrix needs a 3-form on R^6");
    let basis5 = MultiIndexBasis::get(M, 5);
    let mut k = [[0.0; 6]; 6];
    for nu in 0..M {
        let mut e = vec![0.0; M];
        e[nu] = 1.0;
        let sigma = wedge(&interior_product(&e, rho), rho).unwrap();
        for mu in 0..M {
            let cmask = !(1u8 << mu) & 0x3f;
            let pos = basis5.position(cmask).unwrap();
            let parity = if mu % 2 == 0 { 1.0 } else { -1.0 };
            k[mu][nu] = -parity * sigma.scalars[pos].re;
        }
    }
    k
}

/// tr(K^2)/6: negative exactly on forms of complex type, quartic under
/// scaling, and multiplied by det(g)^2 under linear pullback.
pub fn hitchin_lambda(rho: &AlgebraicForm) -> f64 {
    let k = hitchin_k_matrix(rho);
    let mut tr = 0.0;
    for a in 0..M {
        for b in 0..M {
            tr += k[a][b] * k[b][a];
        }
    }
    tr / 6.0
}

/// For a 3-form of negative invariant, the normalized J = K / sqrt(-lambda)
/// and the conjugate form rho_hat(u, v, w) = -rho(Ju, v, w) antisymmetrized.
pub fn reconstruct_complex_structure(
    rho: &AlgebraicForm,
) -> Result<([[f64; 6]; 6], AlgebraicForm)> {
    let k = hitchin_k_matrix(rho);
    let mut tr = 0.0;
    for a in 0..M {
        for b in 0..M {
            tr += k[a][b] * k[b][a];
        }
    }
    let lambda = tr / 6.0;
    if lambda >= 0.0 {
        return Err(Error::NotComplexType { lambda });
    }
    let s = (-lambda).sqrt();
    let mut j = [[0.0; 6]; 6];
    for a in 0..M {
        for b in 0..M {
            j[a][b] = k[a][b] / s;
        }
    }

    // contract each slot with J and average; for honest complex type the
    // three slot contractions agree, the average only symmetrizes roundoff
    let mut tau = Vec::with_capacity(M);
    for x in 0..M {
        let col: Vec<f64> = (0..M).map(|r| j[r][x]).collect();
        tau.push(interior_product(&col, rho));
    }
    let basis3 = MultiIndexBasis::get(M, 3);
    let basis2 = MultiIndexBasis::get(M, 2);
    let mut rho_hat = AlgebraicForm::zero(M, 3);
    for i in 0..basis3.len() {
        let ax = basis3.axes(i);
        let (a, b, c) = (ax[0], ax[1], ax[2]);
        let at = |t: &AlgebraicForm, p: usize, q: usize| {
            t.scalars[basis2.position((1u8 << p) | (1u8 << q)).unwrap()].re
        };
        let v = at(&tau[a], b, c) - at(&tau[b], a, c) + at(&tau[c], a, b);
        rho_hat.scalars[i] = num_complex::Complex64::new(-v / 3.0, 0.0);
    }
    Ok((j, rho_hat))
}
