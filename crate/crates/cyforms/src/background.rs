//! Flat Kähler reference data on the torus: the standard symplectic form,
//! complex structure and holomorphic volume form as constant fields, the
//! i del delbar operator and its explicit primitive, density normalization
//! against a chosen reference volume, and pointwise positivity of real
//! (1,1)-forms.
//!
//! Complex coordinates are z_j = x_j + i y_j, so on a Fourier mode the
//! holomorphic derivative d/dz_j acts by (i k_{2j} + k_{2j+1})/2.

use crate::algebra::form::{wedge, AlgebraicForm};
use crate::algebra::multi_index::{merge_sign, MultiIndexBasis};
use crate::algebra::symplectic::SymplecticFrame;
use crate::calculus::fft::transform_component;
use crate::calculus::field::{Domain, FormField};
use crate::calculus::grid::TorusGrid;
use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

pub struct KahlerTorus {
    pub n: usize,
    pub grid: Arc<TorusGrid>,
    pub frame: SymplecticFrame,
    /// Complex structure on tangent vectors, row-major m x m.
    pub j0: Vec<f64>,
    pub omega: FormField,
    pub omega0: FormField,
    /// Omega0 wedge conj(Omega0) = cn_ratio * vol, computed from the
    /// constant coefficients rather than assumed.
    pub cn_ratio: Complex64,
}

pub fn standard_background(n: usize, sizes: &[usize]) -> Result<KahlerTorus> {
    if n != 2 && n != 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    if sizes.len() != 2 * n {
        return Err(Error::Validation(format!(
            "complex dimension {n} needs {} axes, got {}",
            2 * n,
            sizes.len()
        )));
    }
    let grid = TorusGrid::new(sizes)?;
    Ok(build(n, grid))
}

/// The two-torus used to calibrate the Newton plumbing: there the volume
/// equation is linear, so the solver can be checked against a Poisson solve.
/// Not part of the supported surface.
#[doc(hidden)]
pub fn calibration_background(sizes: &[usize]) -> Result<KahlerTorus> {
    if sizes.len() != 2 {
        return Err(Error::Validation("calibration background lives on T^2".into()));
    }
    for &s in sizes {
        if s < 4 || s % 2 != 0 {
            return Err(Error::Validation(format!("grid size {s} must be even and at least 4")));
        }
    }
    let grid = TorusGrid::new_unvalidated(sizes);
    Ok(build(1, grid))
}

fn build(n: usize, grid: Arc<TorusGrid>) -> KahlerTorus {
    let m = 2 * n;
    let frame = SymplecticFrame::standard(m);
    let mut omega0_alg = AlgebraicForm::scalar(m, Complex64::ONE);
    for j in 0..n {
        let dz = AlgebraicForm::dx(m, j).add(&AlgebraicForm::dy(m, j).scaled(Complex64::i()));
        omega0_alg = wedge(&omega0_alg, &dz).unwrap();
    }
    let top = wedge(&omega0_alg, &omega0_alg.conj()).unwrap();
    let cn_ratio = top.scalars[0] / frame.volume.scalars[0];
    let mut j0 = vec![0.0; m * m];
    for i in 0..n {
        j0[(2 * i + 1) * m + 2 * i] = 1.0;
        j0[(2 * i) * m + (2 * i + 1)] = -1.0;
    }
    let omega = FormField::constant(&grid, &frame.omega);
    let omega0 = FormField::constant(&grid, &omega0_alg);
    KahlerTorus { n, grid, frame, j0, omega, omega0, cn_ratio }
}

/// Multiplier of d/dz_j on a mode: (i k_{2j} + k_{2j+1}) / 2.
fn dz_mult(kappa: &[f64], j: usize) -> Complex64 {
    Complex64::new(kappa[2 * j + 1], kappa[2 * j]) * 0.5
}

/// Multiplier of d/dzbar_j on a mode: (i k_{2j} - k_{2j+1}) / 2.
fn dzbar_mult(kappa: &[f64], j: usize) -> Complex64 {
    Complex64::new(-kappa[2 * j + 1], kappa[2 * j]) * 0.5
}

// ----------------------------------------------------------- i del delbar

/// The (1,1)-form i del delbar phi as a real 2-form field.
pub fn i_del_delbar(phi: &FormField, bg: &KahlerTorus) -> FormField {
    assert_eq!(phi.degree, 0, "potential must be a scalar field");
    assert_eq!(phi.grid.sizes, bg.grid.sizes);
    let spec = match phi.domain {
        Domain::Physical => phi.to_spectral(),
        Domain::Spectral => phi.clone(),
    };
    let grid = &phi.grid;
    let m = grid.m;
    let n = m / 2;
    let basis = MultiIndexBasis::get(m, 2);
    // expansion of i H_jk dz^j wedge dzbar^k over the real basis:
    // dz^j dzbar^k = dx_j dx_k - i dx_j dy_k + i dy_j dx_k + dy_j dy_k
    let mut contributions: Vec<Vec<(usize, usize, Complex64)>> = vec![Vec::new(); basis.len()];
    for j in 0..n {
        for k in 0..n {
            let pairs = [
                (2 * j, 2 * k, Complex64::ONE),
                (2 * j, 2 * k + 1, -Complex64::i()),
                (2 * j + 1, 2 * k, Complex64::i()),
                (2 * j + 1, 2 * k + 1, Complex64::ONE),
            ];
            for (a, b, w) in pairs {
                if let Some((sign, mask)) = merge_sign(1u8 << a, 1u8 << b) {
                    let pos = basis.position(mask).unwrap();
                    contributions[pos].push((j, k, w * sign * Complex64::i()));
                }
            }
        }
    }
    let mut out = FormField::zeros(grid, 2, Domain::Spectral);
    let src = spec.comp(0);
    for (c, terms) in contributions.iter().enumerate() {
        if terms.is_empty() {
            continue;
        }
        out.comp_mut(c)
            .par_iter_mut()
            .enumerate()
            .for_each(|(idx, slot)| {
                let mut kappa = [0.0f64; 8];
                grid.mode_masked(idx, &mut kappa[..m]);
                let mut acc = Complex64::ZERO;
                for &(j, k, w) in terms {
                    acc += w * dz_mult(&kappa[..m], j) * dzbar_mult(&kappa[..m], k);
                }
                *slot = acc * src[idx];
            });
    }
    out.to_physical().real_cleaned()
}

/// The gauge-fixed real primitive of i del delbar: with psi_j = d phi/dz_j,
/// alpha = sum_j Im(psi_j) dx_j + Re(psi_j) dy_j, and d alpha = i del delbar phi.
pub fn primitive_potential(phi: &FormField, bg: &KahlerTorus) -> FormField {
    assert_eq!(phi.degree, 0, "potential must be a scalar field");
    assert_eq!(phi.grid.sizes, bg.grid.sizes);
    let spec = match phi.domain {
        Domain::Physical => phi.to_spectral(),
        Domain::Spectral => phi.clone(),
    };
    let grid = &phi.grid;
    let m = grid.m;
    let mut out = FormField::zeros(grid, 1, Domain::Physical);
    let src = spec.comp(0);
    for j in 0..m / 2 {
        let mut psi: Vec<Complex64> = (0..grid.len)
            .into_par_iter()
            .map(|idx| {
                let mut kappa = [0.0f64; 8];
                grid.mode_masked(idx, &mut kappa[..m]);
                dz_mult(&kappa[..m], j) * src[idx]
            })
            .collect();
        transform_component(grid, &mut psi, true);
        for (idx, v) in psi.iter().enumerate() {
            out.comp_mut(2 * j)[idx] = Complex64::new(v.im, 0.0);
        }
        for (idx, v) in psi.iter().enumerate() {
            out.comp_mut(2 * j + 1)[idx] = Complex64::new(v.re, 0.0);
        }
    }
    out
}

// ----------------------------------------------------------------- density

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityReference {
    /// Normalize against omega^n.
    OmegaPower,
    /// Normalize against Omega0 wedge conj(Omega0).
    OmegaOmegaBar,
}

pub struct DensityFunction {
    /// Degree-0 real field with mean(e^F) = 1 against the reference volume.
    pub f: FormField,
    /// Recomputed after normalization; 1 up to roundoff.
    pub reference_ratio: f64,
}

/// Subtracts the log-mean of e^f taken against the chosen reference volume,
/// so that the exponential density integrates to the reference total volume.
pub fn normalize_density(
    f_raw: &FormField,
    bg: &KahlerTorus,
    reference: DensityReference,
) -> DensityFunction {
    assert_eq!(f_raw.degree, 0);
    let f_phys = match f_raw.domain {
        Domain::Physical => f_raw.clone(),
        Domain::Spectral => f_raw.to_physical(),
    };
    let ref_coeff = match reference {
        DensityReference::OmegaPower => {
            let mut acc = AlgebraicForm::scalar(bg.grid.m, Complex64::ONE);
            for _ in 0..bg.n {
                acc = wedge(&acc, &bg.frame.omega).unwrap();
            }
            acc.scalars[0]
        }
        DensityReference::OmegaOmegaBar => bg.cn_ratio * bg.frame.volume.scalars[0],
    };
    let mean_exp_of = |g: &FormField| -> f64 {
        let num: Complex64 = g
            .comp(0)
            .par_iter()
            .map(|v| v.re.exp() * ref_coeff)
            .reduce(|| Complex64::ZERO, |a, b| a + b)
            / Complex64::new(g.grid.len as f64, 0.0);
        let ratio = num / ref_coeff;
        debug_assert!(ratio.im.abs() < 1e-12 * (1.0 + ratio.re.abs()));
        ratio.re
    };
    let mean = mean_exp_of(&f_phys);
    let shift = mean.ln();
    let mut f = f_phys;
    for v in f.comp_mut(0) {
        *v = Complex64::new(v.re - shift, 0.0);
    }
    let reference_ratio = mean_exp_of(&f);
    DensityFunction { f, reference_ratio }
}

// -------------------------------------------------------------- positivity

/// Hermitian coefficient matrix of a real 2-form at one grid point:
/// h_jk = -2i w(dz_j-direction, dzbar_k-direction). For w = omega this is the
/// identity; for w = omega + i del delbar phi it is I + 2 (complex Hessian).
pub struct HermitianExtractor {
    // per (j,k): list of (component, real sign, complex weight)
    terms: Vec<Vec<(usize, f64, Complex64)>>,
}

impl HermitianExtractor {
    pub fn new(m: usize) -> Self {
        let n = m / 2;
        let basis = MultiIndexBasis::get(m, 2);
        let mut terms = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                // w(u, v) for u = (e_{2j} - i e_{2j+1})/2, v = (e_{2k} + i e_{2k+1})/2
                let pairs = [
                    (2 * j, 2 * k, Complex64::ONE),
                    (2 * j, 2 * k + 1, Complex64::i()),
                    (2 * j + 1, 2 * k, -Complex64::i()),
                    (2 * j + 1, 2 * k + 1, Complex64::ONE),
                ];
                let mut list = Vec::new();
                for (a, b, weight) in pairs {
                    if a == b {
                        continue;
                    }
                    let (lo, hi, sgn) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
                    let mask = (1u8 << lo) | (1u8 << hi);
                    let pos = basis.position(mask).unwrap();
                    // -2i * (1/4) = -i/2 folded into the weight
                    list.push((pos, sgn, weight * Complex64::new(0.0, -0.5)));
                }
                terms.push(list);
            }
        }
        HermitianExtractor { terms }
    }

    /// Fills h (n*n, row-major) from the components of w at grid index idx.
    pub fn extract(&self, w: &FormField, idx: usize, h: &mut [Complex64]) {
        for (jk, list) in self.terms.iter().enumerate() {
            let mut acc = Complex64::ZERO;
            for &(c, sgn, weight) in list {
                acc += weight * (w.comp(c)[idx] * sgn);
            }
            h[jk] = acc;
        }
    }
}

/// Smallest eigenvalue of a hermitian n x n matrix (row-major), n <= 3,
/// by closed form. Cheap enough for per-grid-point use.
pub fn hermitian_min_eig(h: &[Complex64], n: usize) -> f64 {
    match n {
        1 => h[0].re,
        2 => {
            let q = 0.5 * (h[0].re + h[3].re);
            let d = 0.5 * (h[0].re - h[3].re);
            q - (d * d + h[1].norm_sqr()).sqrt()
        }
        3 => {
            let q = (h[0].re + h[4].re + h[8].re) / 3.0;
            let p1 = h[1].norm_sqr() + h[2].norm_sqr() + h[5].norm_sqr();
            let d0 = h[0].re - q;
            let d1 = h[4].re - q;
            let d2 = h[8].re - q;
            let p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
            if p2 < 1e-300 {
                return q;
            }
            let p = (p2 / 6.0).sqrt();
            let b = |r: usize, c: usize| -> Complex64 {
                let v = h[r * 3 + c];
                if r == c {
                    Complex64::new((v.re - q) / p, 0.0)
                } else {
                    v / p
                }
            };
            // det of the shifted, scaled matrix; real for hermitian input
            let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
                - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
                + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
            let r = (det.re / 2.0).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
        }
        _ => panic!("hermitian_min_eig supports n <= 3"),
    }
}

/// Minimum over grid points of the smallest eigenvalue of the hermitian
/// coefficient matrix of a real 2-form. Positive iff the form is a Kähler
/// candidate.
pub fn positivity_margin(w: &FormField, bg: &KahlerTorus) -> f64 {
    assert_eq!(w.degree, 2);
    let wp = match w.domain {
        Domain::Physical => w.clone(),
        Domain::Spectral => w.to_physical(),
    };
    let n = bg.n;
    let extractor = HermitianExtractor::new(bg.grid.m);
    (0..bg.grid.len)
        .into_par_iter()
        .map(|idx| {
            let mut h = [Complex64::ZERO; 9];
            extractor.extract(&wp, idx, &mut h[..n * n]);
            hermitian_min_eig(&h[..n * n], n)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

// ----------------------------------------------------------------- hessian

/// The complex Hessian d^2 phi / dz_j dzbar_k at every grid point,
/// stored point-major (n*n entries per point, row j, column k).
pub struct HessianField {
    pub n: usize,
    pub len: usize,
    data: Vec<Complex64>,
}

impl HessianField {
    pub fn entry(&self, idx: usize, j: usize, k: usize) -> Complex64 {
        self.data[idx * self.n * self.n + j * self.n + k]
    }

    pub fn at(&self, idx: usize) -> &[Complex64] {
        &self.data[idx * self.n * self.n..(idx + 1) * self.n * self.n]
    }
}

pub fn complex_hessian(phi: &FormField) -> HessianField {
    assert_eq!(phi.degree, 0);
    let spec = match phi.domain {
        Domain::Physical => phi.to_spectral(),
        Domain::Spectral => phi.clone(),
    };
    let grid = &phi.grid;
    let m = grid.m;
    let n = m / 2;
    let src = spec.comp(0);
    let mut data = vec![Complex64::ZERO; grid.len * n * n];
    for j in 0..n {
        for k in 0..n {
            let mut tmp: Vec<Complex64> = (0..grid.len)
                .into_par_iter()
                .map(|idx| {
                    let mut kappa = [0.0f64; 8];
                    grid.mode_masked(idx, &mut kappa[..m]);
                    dz_mult(&kappa[..m], j) * dzbar_mult(&kappa[..m], k) * src[idx]
                })
                .collect();
            transform_component(grid, &mut tmp, true);
            let slot = j * n + k;
            data.par_chunks_mut(n * n)
                .zip(tmp.par_iter())
                .for_each(|(chunk, v)| chunk[slot] = *v);
        }
    }
    HessianField { n, len: grid.len, data }
}
