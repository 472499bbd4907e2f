//! A differential form sampled on a grid: one complex scalar field per
//! increasing multi-index component, stored component-major. Fields carry a
//! domain tag; values live either at grid points or as unitary spectral
//! coefficients.

use super::fft::transform_component;
use super::grid::TorusGrid;
use crate::algebra::form::AlgebraicForm;
use crate::algebra::multi_index::{merge_sign, MultiIndexBasis};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::TAU;
use std::sync::Arc;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Domain {
    Physical,
    Spectral,
}

#[derive(Clone)]
pub struct FormField {
    pub grid: Arc<TorusGrid>,
    pub degree: usize,
    pub domain: Domain,
    pub data: Vec<Complex64>,
}

impl std::fmt::Debug for FormField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FormField")
            .field("sizes", &self.grid.sizes)
            .field("degree", &self.degree)
            .field("domain", &self.domain)
            .field("norm_inf", &self.norm_inf())
            .finish()
    }
}

impl FormField {
    pub fn zeros(grid: &Arc<TorusGrid>, degree: usize, domain: Domain) -> Self {
        let n_comps = MultiIndexBasis::get(grid.m, degree).len();
        FormField {
            grid: grid.clone(),
            degree,
            domain,
            data: vec![Complex64::ZERO; n_comps * grid.len],
        }
    }

    pub fn n_comps(&self) -> usize {
        MultiIndexBasis::get(self.grid.m, self.degree).len()
    }

    pub fn basis(&self) -> &'static MultiIndexBasis {
        MultiIndexBasis::get(self.grid.m, self.degree)
    }

    pub fn data_len(&self) -> usize {
        self.data.len()
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.grid.len..(c + 1) * self.grid.len]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.grid.len;
        &mut self.data[c * len..(c + 1) * len]
    }

    /// Real scalar field from a pointwise closure of the coordinates.
    pub fn from_scalar_fn(grid: &Arc<TorusGrid>, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let mut out = Self::zeros(grid, 0, Domain::Physical);
        let m = grid.m;
        let g = grid.clone();
        out.data.par_iter_mut().enumerate().for_each(|(idx, v)| {
            let mut x = [0.0f64; 8];
            g.coords(idx, &mut x[..m]);
            *v = Complex64::new(f(&x[..m]), 0.0);
        });
        out
    }

    /// Spatially constant field with the given pointwise value.
    pub fn constant(grid: &Arc<TorusGrid>, value: &AlgebraicForm) -> Self {
        assert_eq!(value.m, grid.m);
        let mut out = Self::zeros(grid, value.degree, Domain::Physical);
        for (c, &s) in value.scalars.iter().enumerate() {
            out.comp_mut(c).fill(s);
        }
        out
    }

    /// Real field with independent uniform coefficients on every non-Nyquist
    /// mode whose wavenumbers all lie within [-kmax, kmax], scaled so the sup
    /// norm is `amp`.
    pub fn random_band_limited(
        grid: &Arc<TorusGrid>,
        degree: usize,
        kmax: usize,
        amp: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut spec = Self::zeros(grid, degree, Domain::Spectral);
        let m = grid.m;
        let n_comps = spec.n_comps();
        for c in 0..n_comps {
            let comp = spec.comp_mut(c);
            for idx in 0..grid.len {
                let mut ok = true;
                let mut partner = 0usize;
                for a in 0..m {
                    let j = grid.axis_index(idx, a);
                    let s = grid.sizes[a];
                    let k = if j <= s / 2 { j as isize } else { j as isize - s as isize };
                    if k.unsigned_abs() > kmax || j == s / 2 {
                        ok = false;
                        break;
                    }
                    partner += ((s - j) % s) * grid.strides[a];
                }
                if !ok || partner < idx {
                    continue;
                }
                let re = rng.gen_range(-1.0..1.0);
                let im = if partner == idx { 0.0 } else { rng.gen_range(-1.0..1.0) };
                comp[idx] = Complex64::new(re, im);
                comp[partner] = Complex64::new(re, -im);
            }
        }
        let mut phys = spec.to_physical().real_cleaned();
        let norm = phys.norm_inf();
        if norm > 0.0 {
            let s = Complex64::new(amp / norm, 0.0);
            phys.data.iter_mut().for_each(|v| *v *= s);
        }
        phys
    }

    pub fn value_at(&self, idx: usize) -> AlgebraicForm {
        let scalars = (0..self.n_comps()).map(|c| self.comp(c)[idx]).collect();
        AlgebraicForm { m: self.grid.m, degree: self.degree, scalars }
    }

    pub fn set_value_at(&mut self, idx: usize, value: &AlgebraicForm) {
        debug_assert_eq!((value.m, value.degree), (self.grid.m, self.degree));
        for (c, &s) in value.scalars.iter().enumerate() {
            self.comp_mut(c)[idx] = s;
        }
    }

    pub fn add(&self, other: &FormField) -> FormField {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &FormField) -> FormField {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &FormField, f: impl Fn(Complex64, Complex64) -> Complex64 + Sync) -> FormField {
        assert_eq!(self.degree, other.degree);
        assert_eq!(self.domain, other.domain);
        assert!(Arc::ptr_eq(&self.grid, &other.grid) || self.grid.sizes == other.grid.sizes);
        let mut out = self.clone();
        out.data
            .par_iter_mut()
            .zip(other.data.par_iter())
            .for_each(|(a, b)| *a = f(*a, *b));
        out
    }

    pub fn scaled(&self, c: Complex64) -> FormField {
        let mut out = self.clone();
        out.data.par_iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn to_spectral(&self) -> FormField {
        assert_eq!(self.domain, Domain::Physical, "field already spectral");
        let mut out = self.clone();
        out.domain = Domain::Spectral;
        for c in 0..self.n_comps() {
            transform_component(&self.grid, out.comp_mut(c), false);
        }
        out
    }

    pub fn to_physical(&self) -> FormField {
        assert_eq!(self.domain, Domain::Spectral, "field already physical");
        let mut out = self.clone();
        out.domain = Domain::Physical;
        for c in 0..self.n_comps() {
            transform_component(&self.grid, out.comp_mut(c), true);
        }
        out
    }

    /// Zeroes every mode touching a Nyquist plane. The masked derivative
    /// operators and the dealiased solvers act only inside this band, so
    /// anything they feed back or recover must be projected into it first.
    pub fn band_projected(&self) -> FormField {
        assert_eq!(self.domain, Domain::Physical);
        let mut spec = self.to_spectral();
        let grid = spec.grid.clone();
        for c in 0..spec.n_comps() {
            spec.comp_mut(c).par_iter_mut().enumerate().for_each(|(i, v)| {
                if grid.touches_nyquist(i) {
                    *v = Complex64::ZERO;
                }
            });
        }
        spec.to_physical()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data
            .par_iter()
            .map(|c| c.norm())
            .reduce(|| 0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.data
            .par_iter()
            .map(|c| c.im.abs())
            .reduce(|| 0.0, f64::max)
    }

    /// Drops imaginary parts; callers assert `max_imag` is roundoff first.
    pub fn real_cleaned(mut self) -> Self {
        self.data.par_iter_mut().for_each(|v| v.im = 0.0);
        self
    }

    /// Pointwise complex conjugate; only meaningful on physical-space values.
    pub fn conjugated(&self) -> FormField {
        assert_eq!(self.domain, Domain::Physical);
        let mut out = self.clone();
        out.data.par_iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn mean_value(&self, c: usize) -> Complex64 {
        assert_eq!(self.domain, Domain::Physical);
        let sum: Complex64 = self.comp(c).iter().sum();
        sum / self.grid.len as f64
    }

    /// Integral of a top-degree form over the torus: mean coefficient times
    /// the volume (2pi)^m of the fundamental domain.
    pub fn integrate_top(&self) -> f64 {
        assert_eq!(self.degree, self.grid.m, "integration needs a top-degree form");
        self.mean_value(0).re * TAU.powi(self.grid.m as i32)
    }

    /// Spectral embedding onto a finer grid of the same shape. Unmatched
    /// Nyquist coefficients are split evenly between +s/2 and -s/2, which
    /// keeps real fields real. Returned in physical space.
    pub fn prolonged(&self, fine: &Arc<TorusGrid>) -> FormField {
        assert_eq!(fine.m, self.grid.m);
        let m = self.grid.m;
        for a in 0..m {
            assert!(fine.sizes[a] >= self.grid.sizes[a], "target grid is coarser");
        }
        let spec = match self.domain {
            Domain::Physical => self.to_spectral(),
            Domain::Spectral => self.clone(),
        };
        let mut spread: Vec<Vec<Vec<(usize, f64)>>> = Vec::with_capacity(m);
        for a in 0..m {
            let s = self.grid.sizes[a];
            let big = fine.sizes[a];
            let mut per_axis = Vec::with_capacity(s);
            for j in 0..s {
                per_axis.push(if j < s / 2 {
                    vec![(j, 1.0)]
                } else if j > s / 2 || big == s {
                    vec![(j + big - s, 1.0)]
                } else {
                    vec![(s / 2, 0.5), (big - s / 2, 0.5)]
                });
            }
            spread.push(per_axis);
        }
        let scale = (fine.len as f64 / self.grid.len as f64).sqrt();
        let mut out = FormField::zeros(fine, self.degree, Domain::Spectral);
        for c in 0..self.n_comps() {
            let dst = out.comp_mut(c);
            for (idx, &coeff) in spec.comp(c).iter().enumerate() {
                if coeff == Complex64::ZERO {
                    continue;
                }
                let mut targets: Vec<(usize, f64)> = vec![(0, scale)];
                for a in 0..m {
                    let j = self.grid.axis_index(idx, a);
                    let choices = &spread[a][j];
                    if choices.len() == 1 {
                        for t in targets.iter_mut() {
                            t.0 += choices[0].0 * fine.strides[a];
                            t.1 *= choices[0].1;
                        }
                    } else {
                        let mut next = Vec::with_capacity(targets.len() * 2);
                        for &(off, w) in &targets {
                            for &(fj, fw) in choices {
                                next.push((off + fj * fine.strides[a], w * fw));
                            }
                        }
                        targets = next;
                    }
                }
                for (off, w) in targets {
                    dst[off] += coeff * w;
                }
            }
        }
        out.to_physical()
    }

    /// Pointwise exterior product over the whole grid.
    pub fn wedge(&self, other: &FormField) -> Result<FormField> {
        assert_eq!(self.domain, Domain::Physical);
        assert_eq!(other.domain, Domain::Physical);
        let m = self.grid.m;
        let k = self.degree + other.degree;
        if k > m {
            return Err(Error::Degree(format!(
                "wedge of degrees {} and {} exceeds dimension {m}",
                self.degree, other.degree
            )));
        }
        let ba = MultiIndexBasis::get(m, self.degree);
        let bb = MultiIndexBasis::get(m, other.degree);
        let bt = MultiIndexBasis::get(m, k);
        let mut out = FormField::zeros(&self.grid, k, Domain::Physical);
        for i in 0..ba.len() {
            for j in 0..bb.len() {
                if let Some((sign, mask)) = merge_sign(ba.mask(i), bb.mask(j)) {
                    let t = bt.position(mask).unwrap();
                    let ai = self.comp(i);
                    let bj = other.comp(j);
                    out.comp_mut(t)
                        .par_iter_mut()
                        .enumerate()
                        .for_each(|(idx, v)| *v += ai[idx] * bj[idx] * sign);
                }
            }
        }
        Ok(out)
    }
}
