//! The standard symplectic pairing and star on R^m. The bivector dual to
//! omega is its honest matrix inverse, which fixes pairing(dx_i, dy_i) = -1;
//! with that choice the star built from alpha ^ *beta = P(alpha, beta) vol is
//! an involution in every degree and acts on primitive n-forms by -1 (n = 2)
//! and +1 (n = 3).

use super::form::{wedge, AlgebraicForm};
use super::multi_index::{merge_sign, MultiIndexBasis};
use crate::error::{Error, Result};
use num_complex::Complex64;

pub struct SymplecticFrame {
    pub m: usize,
    /// omega = sum_i e^{2i} ^ e^{2i+1}
    pub omega: AlgebraicForm,
    /// matrix inverse of the coefficient matrix of omega, row-major
    pub omega_inverse: Vec<f64>,
    /// omega^n / n!, coefficient exactly one on e^{0..m-1}
    pub volume: AlgebraicForm,
    w: Vec<f64>,
    /// bilinear pairing matrices per degree, real, row-major n_k x n_k
    pairings: Vec<Vec<f64>>,
    /// star matrices per input degree, row-major n_{m-k} x n_k
    stars: Vec<Vec<f64>>,
    star_sign: f64,
}

impl SymplecticFrame {
    pub fn standard(m: usize) -> Self {
        assert!(m >= 2 && m % 2 == 0 && m <= 8, "unsupported frame dimension {m}");
        let n = m / 2;
        let mut omega = AlgebraicForm::zero(m, 2);
        for i in 0..n {
            omega = omega.add(&AlgebraicForm::from_axes(m, &[2 * i, 2 * i + 1], Complex64::ONE));
        }
        let mut w = vec![0.0; m * m];
        for i in 0..n {
            w[(2 * i) * m + 2 * i + 1] = 1.0;
            w[(2 * i + 1) * m + 2 * i] = -1.0;
        }
        // w squares to -identity, so the inverse is just -w
        let omega_inverse: Vec<f64> = w.iter().map(|v| -v).collect();

        let mut volume = AlgebraicForm::scalar(m, Complex64::ONE);
        for _ in 0..n {
            volume = wedge(&volume, &omega).unwrap();
        }
        let fact: f64 = (1..=n).product::<usize>() as f64;
        volume = volume.scaled(Complex64::new(1.0 / fact, 0.0));

        let mut pairings = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let basis = MultiIndexBasis::get(m, k);
            let nk = basis.len();
            let mut p = vec![0.0; nk * nk];
            for i in 0..nk {
                for j in 0..nk {
                    p[i * nk + j] = pairing_det(&omega_inverse, m, basis.axes(i), basis.axes(j));
                }
            }
            pairings.push(p);
        }

        let mut stars = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let basis = MultiIndexBasis::get(m, k);
            let dual = MultiIndexBasis::get(m, m - k);
            let nk = basis.len();
            let mut s = vec![0.0; nk * nk];
            for i in 0..nk {
                let mask = basis.mask(i);
                let cmask = basis.complement(mask);
                let (sign, _) = merge_sign(mask, cmask).unwrap();
                let row = dual.position(cmask).unwrap();
                for j in 0..nk {
                    s[row * nk + j] = sign * pairings[k][i * nk + j];
                }
            }
            stars.push(s);
        }

        SymplecticFrame { m, omega, omega_inverse, volume, w, pairings, stars, star_sign: 1.0 }
    }

    pub fn omega_coeff_matrix(&self) -> &[f64] {
        &self.w
    }

    /// Bilinear degree-k pairing, no conjugation.
    pub fn omega_pairing(&self, a: &AlgebraicForm, b: &AlgebraicForm) -> Result<Complex64> {
        if a.m != self.m || b.m != self.m || a.degree != b.degree {
            return Err(Error::Degree(format!(
                "pairing needs matching degree on dimension {}, got ({}, {}) and ({}, {})",
                self.m, a.m, a.degree, b.m, b.degree
            )));
        }
        let nk = a.scalars.len();
        let p = &self.pairings[a.degree];
        let mut acc = Complex64::ZERO;
        for i in 0..nk {
            if a.scalars[i] == Complex64::ZERO {
                continue;
            }
            let mut row = Complex64::ZERO;
            for j in 0..nk {
                row += b.scalars[j] * p[i * nk + j];
            }
            acc += a.scalars[i] * row;
        }
        Ok(acc)
    }

    /// The star determined by alpha ^ *beta = P(alpha, beta) vol.
    pub fn star(&self, a: &AlgebraicForm) -> AlgebraicForm {
        assert_eq!(a.m, self.m);
        let k = a.degree;
        let nk = a.scalars.len();
        let s = &self.stars[k];
        let mut out = AlgebraicForm::zero(self.m, self.m - k);
        for r in 0..nk {
            let mut acc = Complex64::ZERO;
            for j in 0..nk {
                let sv = s[r * nk + j];
                if sv != 0.0 {
                    acc += a.scalars[j] * sv;
                }
            }
            out.scalars[r] = acc * self.star_sign;
        }
        out
    }

    /// Sup norm of omega^{n-k+1} ^ eta, zero exactly when eta is primitive.
    pub fn primitivity_residual(&self, eta: &AlgebraicForm) -> f64 {
        let n = self.m / 2;
        assert!(eta.degree <= n, "primitivity applies below the middle degree");
        let mut acc = eta.clone();
        for _ in 0..(n - eta.degree + 1) {
            acc = wedge(&self.omega, &acc).unwrap();
        }
        acc.norm_inf()
    }

    /// Testing hook: negates the star while keeping everything else intact,
    /// so sign-sensitive invariants must trip.
    pub fn with_flipped_star(mut self) -> Self {
        self.star_sign = -self.star_sign;
        self
    }

    /// Raw star matrix for input degree k (row index in the output basis),
    /// without the sign hook applied.
    pub fn star_matrix(&self, k: usize) -> &[f64] {
        &self.stars[k]
    }

    pub fn star_sign(&self) -> f64 {
        self.star_sign
    }
}

/// det over the dual-pairing entries Pi[i_a][j_b] for increasing index sets.
fn pairing_det(pi: &[f64], m: usize, rows: &[usize], cols: &[usize]) -> f64 {
    super::form::minor_det(pi, m, rows, cols)
}

/// Nondegeneracy margin of a two-form: |coefficient of w^n on the volume
/// frame| over the n-th power of the coefficient 2-norm. Scale invariant,
/// one on the standard omega for m = 4, zero exactly at degeneracy.
pub fn stability_margin_2form(w: &AlgebraicForm) -> f64 {
    assert_eq!(w.degree, 2);
    let n = w.m / 2;
    let l2 = w.norm_l2();
    if l2 == 0.0 {
        return 0.0;
    }
    let mut top = w.clone();
    for _ in 1..n {
        top = wedge(&top, w).unwrap();
    }
    top.scalars[0].norm() / l2.powi(n as i32)
}
