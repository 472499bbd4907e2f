//! A single alternating form at a point: complex coefficients over the
//! increasing multi-index basis of `MultiIndexBasis::get(m, degree)`.

use super::multi_index::{merge_sign, MultiIndexBasis};
use crate::error::{Error, Result};
use num_complex::Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraicForm {
    pub m: usize,
    pub degree: usize,
    pub scalars: Vec<Complex64>,
}

impl AlgebraicForm {
    pub fn zero(m: usize, degree: usize) -> Self {
        let n = MultiIndexBasis::get(m, degree).len();
        AlgebraicForm { m, degree, scalars: vec![Complex64::ZERO; n] }
    }

    pub fn scalar(m: usize, value: Complex64) -> Self {
        AlgebraicForm { m, degree: 0, scalars: vec![value] }
    }

    pub fn one_form(m: usize, axis: usize) -> Self {
        let mut f = Self::zero(m, 1);
        f.scalars[axis] = Complex64::ONE;
        f
    }

    /// dx_{i+1}, the 1-form along axis 2i.
    pub fn dx(m: usize, i: usize) -> Self {
        Self::one_form(m, 2 * i)
    }

    /// dy_{i+1}, the 1-form along axis 2i + 1.
    pub fn dy(m: usize, i: usize) -> Self {
        Self::one_form(m, 2 * i + 1)
    }

    /// coeff * e^{axes}, axes in any order; repeated axes give zero.
    pub fn from_axes(m: usize, axes: &[usize], coeff: Complex64) -> Self {
        let k = axes.len();
        let mut f = Self::zero(m, k);
        let mut sorted = axes.to_vec();
        let mut sign = 1.0;
        // insertion sort, tracking parity
        for i in 1..sorted.len() {
            let mut j = i;
            while j > 0 && sorted[j - 1] > sorted[j] {
                sorted.swap(j - 1, j);
                sign = -sign;
                j -= 1;
            }
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return f;
        }
        let mask = sorted.iter().fold(0u8, |acc, &a| acc | (1 << a));
        let pos = MultiIndexBasis::get(m, k).position(mask).expect("axes out of range");
        f.scalars[pos] = coeff * sign;
        f
    }

    pub fn basis_element(m: usize, degree: usize, i: usize) -> Self {
        let mut f = Self::zero(m, degree);
        f.scalars[i] = Complex64::ONE;
        f
    }

    pub fn basis(&self) -> &'static MultiIndexBasis {
        MultiIndexBasis::get(self.m, self.degree)
    }

    pub fn add(&self, other: &AlgebraicForm) -> AlgebraicForm {
        debug_assert_eq!((self.m, self.degree), (other.m, other.degree));
        let scalars = self.scalars.iter().zip(&other.scalars).map(|(a, b)| a + b).collect();
        AlgebraicForm { m: self.m, degree: self.degree, scalars }
    }

    pub fn sub(&self, other: &AlgebraicForm) -> AlgebraicForm {
        debug_assert_eq!((self.m, self.degree), (other.m, other.degree));
        let scalars = self.scalars.iter().zip(&other.scalars).map(|(a, b)| a - b).collect();
        AlgebraicForm { m: self.m, degree: self.degree, scalars }
    }

    pub fn scaled(&self, c: Complex64) -> AlgebraicForm {
        let scalars = self.scalars.iter().map(|a| a * c).collect();
        AlgebraicForm { m: self.m, degree: self.degree, scalars }
    }

    pub fn conj(&self) -> AlgebraicForm {
        let scalars = self.scalars.iter().map(|a| a.conj()).collect();
        AlgebraicForm { m: self.m, degree: self.degree, scalars }
    }

    pub fn real_part(&self) -> AlgebraicForm {
        let scalars = self.scalars.iter().map(|a| Complex64::new(a.re, 0.0)).collect();
        AlgebraicForm { m: self.m, degree: self.degree, scalars }
    }

    pub fn imag_part(&self) -> AlgebraicForm {
        let scalars = self.scalars.iter().map(|a| Complex64::new(a.im, 0.0)).collect();
        AlgebraicForm { m: self.m, degree: self.degree, scalars }
    }

    pub fn norm_inf(&self) -> f64 {
        self.scalars.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn norm_l2(&self) -> f64 {
        self.scalars.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Exterior product. Fails when the degrees add past the dimension.
pub fn wedge(a: &AlgebraicForm, b: &AlgebraicForm) -> Result<AlgebraicForm> {
    if a.m != b.m {
        return Err(Error::Degree(format!("wedge across dimensions {} and {}", a.m, b.m)));
    }
    let k = a.degree + b.degree;
    if k > a.m {
        return Err(Error::Degree(format!(
            "wedge of degrees {} and {} exceeds dimension {}",
            a.degree, b.degree, a.m
        )));
    }
    let ba = a.basis();
    let bb = b.basis();
    let bt = MultiIndexBasis::get(a.m, k);
    let mut out = AlgebraicForm::zero(a.m, k);
    for i in 0..ba.len() {
        let ca = a.scalars[i];
        if ca == Complex64::ZERO {
            continue;
        }
        for j in 0..bb.len() {
            let cb = b.scalars[j];
            if cb == Complex64::ZERO {
                continue;
            }
            if let Some((sign, mask)) = merge_sign(ba.mask(i), bb.mask(j)) {
                let pos = bt.position(mask).unwrap();
                out.scalars[pos] += ca * cb * sign;
            }
        }
    }
    Ok(out)
}

/// Contraction of the first slot with the vector v (components in the
/// interleaved frame). Degree drops by one; degree 0 maps to 0.
pub fn interior_product(v: &[f64], a: &AlgebraicForm) -> AlgebraicForm {
    assert_eq!(v.len(), a.m);
    if a.degree == 0 {
        return AlgebraicForm::zero(a.m, 0);
    }
    let ba = a.basis();
    let bt = MultiIndexBasis::get(a.m, a.degree - 1);
    let mut out = AlgebraicForm::zero(a.m, a.degree - 1);
    for i in 0..ba.len() {
        let c = a.scalars[i];
        if c == Complex64::ZERO {
            continue;
        }
        let axes = ba.axes(i);
        for (p, &axis) in axes.iter().enumerate() {
            let vc = v[axis];
            if vc == 0.0 {
                continue;
            }
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            let mask = ba.mask(i) & !(1u8 << axis);
            let pos = bt.position(mask).unwrap();
            out.scalars[pos] += c * (vc * sign);
        }
    }
    out
}

/// Pullback by the linear map g (row-major m x m): (g.a)(v_1, .., v_k)
/// = a(g v_1, .., g v_k), so coefficients contract against k x k minors.
pub fn matrix_pullback(a: &AlgebraicForm, g: &[f64]) -> AlgebraicForm {
    let m = a.m;
    assert_eq!(g.len(), m * m);
    let k = a.degree;
    let basis = a.basis();
    let mut out = AlgebraicForm::zero(m, k);
    for (t, slot) in out.scalars.iter_mut().enumerate() {
        let cols = basis.axes(t);
        let mut acc = Complex64::ZERO;
        for i in 0..basis.len() {
            let c = a.scalars[i];
            if c == Complex64::ZERO {
                continue;
            }
            let rows = basis.axes(i);
            acc += c * minor_det(g, m, rows, cols);
        }
        *slot = acc;
    }
    out
}

/// det of the submatrix g[rows, cols], k <= 8.
pub fn minor_det(g: &[f64], m: usize, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    debug_assert_eq!(k, cols.len());
    match k {
        0 => 1.0,
        1 => g[rows[0] * m + cols[0]],
        2 => {
            g[rows[0] * m + cols[0]] * g[rows[1] * m + cols[1]]
                - g[rows[0] * m + cols[1]] * g[rows[1] * m + cols[0]]
        }
        3 => {
            let e = |r: usize, c: usize| g[rows[r] * m + cols[c]];
            e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
                - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
        }
        _ => {
            // partial-pivot LU on a scratch copy
            let mut a = vec![0.0; k * k];
            for r in 0..k {
                for c in 0..k {
                    a[r * k + c] = g[rows[r] * m + cols[c]];
                }
            }
            let mut det = 1.0;
            for col in 0..k {
                let piv = (col..k)
                    .max_by(|&i, &j| {
                        a[i * k + col].abs().partial_cmp(&a[j * k + col].abs()).unwrap()
                    })
                    .unwrap();
                if a[piv * k + col] == 0.0 {
                    return 0.0;
                }
                if piv != col {
                    for q in 0..k {
                        a.swap(col * k + q, piv * k + q);
                    }
                    det = -det;
                }
                det *= a[col * k + col];
                for r in col + 1..k {
                    let f = a[r * k + col] / a[col * k + col];
                    for q in col..k {
                        a[r * k + q] -= f * a[col * k + q];
                    }
                }
            }
            det
        }
    }
}
