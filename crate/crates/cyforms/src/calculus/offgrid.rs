//! Evaluation of grid fields at arbitrary points. Two interchangeable
//! models: exact summation over a sparse set of Fourier modes (fast when the
//! spectrum is concentrated, exact everywhere), and order-p local polynomial
//! interpolation on a 2x zero-padded upsample (general fallback). Both serve
//! values and derivative jets through one trait.

use super::field::{Domain, FormField};
use super::grid::TorusGrid;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;

pub trait FieldSampler: Sync {
    fn dim(&self) -> usize;
    fn n_comps(&self) -> usize;
    /// All components at x; `out` has n_comps entries.
    fn eval(&self, x: &[f64], out: &mut [f64]);
    /// Value, gradient (layout [axis * C + c]) and optionally the second
    /// derivatives (layout [(a * m + b) * C + c]).
    fn eval_jet(&self, x: &[f64], val: &mut [f64], d1: &mut [f64], d2: Option<&mut [f64]>);
}

// ---------------------------------------------------------------- sparse

/// Exact trigonometric summation over the modes holding almost all of the
/// field's energy. Mode wavenumbers follow the differentiation masks, so
/// off-grid values differentiate consistently with the grid operators.
pub struct SparseModeSampler {
    m: usize,
    nc: usize,
    kvecs: Vec<f64>,     // S x m
    amps: Vec<Complex64>, // S x C, mode-major
}

impl SparseModeSampler {
    pub fn from_field(f: &FormField, rel_threshold: f64) -> Self {
        let spec = match f.domain {
            Domain::Physical => f.to_spectral(),
            Domain::Spectral => f.clone(),
        };
        let grid = &f.grid;
        let m = grid.m;
        let nc = f.n_comps();
        let gmax = spec.norm_inf().max(1e-300);
        let cut = rel_threshold * gmax;
        let scale = 1.0 / (grid.len as f64).sqrt();
        let mut kvecs = Vec::new();
        let mut amps = Vec::new();
        let mut kappa = [0.0f64; 8];
        for idx in 0..grid.len {
            let keep = (0..nc).any(|c| spec.comp(c)[idx].norm() > cut);
            if !keep {
                continue;
            }
            grid.mode_masked(idx, &mut kappa[..m]);
            kvecs.extend_from_slice(&kappa[..m]);
            for c in 0..nc {
                amps.push(spec.comp(c)[idx] * scale);
            }
        }
        SparseModeSampler { m, nc, kvecs, amps }
    }

    pub fn mode_count(&self) -> usize {
        self.kvecs.len() / self.m
    }
}

impl FieldSampler for SparseModeSampler {
    fn dim(&self) -> usize {
        self.m
    }

    fn n_comps(&self) -> usize {
        self.nc
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let (m, nc) = (self.m, self.nc);
        for s in 0..self.mode_count() {
            let k = &self.kvecs[s * m..(s + 1) * m];
            let theta: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
            let e = Complex64::from_polar(1.0, theta);
            for c in 0..nc {
                out[c] += (self.amps[s * nc + c] * e).re;
            }
        }
    }

    fn eval_jet(&self, x: &[f64], val: &mut [f64], d1: &mut [f64], mut d2: Option<&mut [f64]>) {
        val.fill(0.0);
        d1.fill(0.0);
        if let Some(d2) = d2.as_deref_mut() {
            d2.fill(0.0);
        }
        let (m, nc) = (self.m, self.nc);
        for s in 0..self.mode_count() {
            let k = &self.kvecs[s * m..(s + 1) * m];
            let theta: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
            let e = Complex64::from_polar(1.0, theta);
            for c in 0..nc {
                let w = self.amps[s * nc + c] * e;
                val[c] += w.re;
                for a in 0..m {
                    // d/dx_a picks up i k_a
                    d1[a * nc + c] -= k[a] * w.im;
                }
                if let Some(d2) = d2.as_deref_mut() {
                    for a in 0..m {
                        for b in a..m {
                            let v = -k[a] * k[b] * w.re;
                            d2[(a * m + b) * nc + c] += v;
                            if b != a {
                                d2[(b * m + a) * nc + c] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

// ------------------------------------------------------------ interpolant

/// Order-p Lagrange interpolation on the 2x spectrally upsampled grid. The
/// unmatched Nyquist coefficient is split evenly between +s/2 and -s/2 when
/// padding, which keeps real fields real.
pub struct UpsampledSampler {
    m: usize,
    nc: usize,
    order: usize,
    sizes: Vec<usize>,
    strides: Vec<usize>,
    inv_h: Vec<f64>,
    data: Vec<f64>, // comp-major real values on the fine grid
}

impl UpsampledSampler {
    /// Default interpolation orders: 8 points per axis on T^4, 6 on T^6.
    pub fn new(f: &FormField) -> Self {
        let p = if f.grid.m >= 6 { 6 } else { 8 };
        Self::with_order(f, p)
    }

    pub fn with_order(f: &FormField, order: usize) -> Self {
        assert!(order >= 5, "interpolation order below the supported floor");
        let spec = match f.domain {
            Domain::Physical => f.to_spectral(),
            Domain::Spectral => f.clone(),
        };
        let grid = &f.grid;
        let m = grid.m;
        let nc = f.n_comps();
        let fine_sizes: Vec<usize> = grid.sizes.iter().map(|s| 2 * s).collect();
        let fine = TorusGrid::new_unvalidated(&fine_sizes);
        // per-axis spread of a coarse mode index into the fine spectrum
        let mut spread: Vec<Vec<Vec<(usize, f64)>>> = Vec::with_capacity(m);
        for a in 0..m {
            let s = grid.sizes[a];
            let mut per_axis = Vec::with_capacity(s);
            for j in 0..s {
                per_axis.push(if j < s / 2 {
                    vec![(j, 1.0)]
                } else if j > s / 2 {
                    vec![(j + s, 1.0)]
                } else {
                    vec![(s / 2, 0.5), (2 * s - s / 2, 0.5)]
                });
            }
            spread.push(per_axis);
        }
        let scale = (fine.len as f64 / grid.len as f64).sqrt();
        let mut data = vec![0.0f64; nc * fine.len];
        let mut fine_comp = vec![Complex64::ZERO; fine.len];
        for c in 0..nc {
            fine_comp.fill(Complex64::ZERO);
            let src = spec.comp(c);
            for (idx, &coeff) in src.iter().enumerate() {
                if coeff == Complex64::ZERO {
                    continue;
                }
                // tensor spread across axes, usually a single target
                let mut targets: Vec<(usize, f64)> = vec![(0, scale)];
                for a in 0..m {
                    let j = grid.axis_index(idx, a);
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
                    fine_comp[off] += coeff * w;
                }
            }
            super::fft::transform_component(&fine, &mut fine_comp, true);
            for (i, v) in fine_comp.iter().enumerate() {
                data[c * fine.len + i] = v.re;
            }
        }
        let inv_h = fine_sizes.iter().map(|&s| s as f64 / TAU).collect();
        UpsampledSampler {
            m,
            nc,
            order,
            sizes: fine_sizes,
            strides: fine.strides.clone(),
            inv_h,
            data,
        }
    }

    /// Per-axis node offsets (pre-multiplied by strides) and weight triples.
    fn stencil(&self, x: &[f64], want_d2: bool, nodes: &mut [[usize; 8]], w: &mut [[[f64; 8]; 3]]) {
        let p = self.order;
        for a in 0..self.m {
            let size = self.sizes[a] as isize;
            let mut t = x[a] * self.inv_h[a];
            t = t.rem_euclid(self.sizes[a] as f64);
            let i0 = t.floor() as isize - (p as isize / 2 - 1);
            let s_loc = t - i0 as f64;
            for q in 0..p {
                let j = (i0 + q as isize).rem_euclid(size) as usize;
                nodes[a][q] = j * self.strides[a];
            }
            lagrange_weights(p, s_loc, &mut w[a], want_d2);
            // chain rule: stencil coordinates are x * inv_h
            for q in 0..p {
                w[a][1][q] *= self.inv_h[a];
                w[a][2][q] *= self.inv_h[a] * self.inv_h[a];
            }
        }
    }

    fn contract(&self, base: usize, axis: usize, off: usize, nodes: &[[usize; 8]], sel: &[usize], w: &[[[f64; 8]; 3]]) -> f64 {
        let p = self.order;
        if axis == self.m {
            return self.data[base + off];
        }
        let wa = &w[axis][sel[axis]];
        let mut acc = 0.0;
        for q in 0..p {
            acc += wa[q] * self.contract(base, axis + 1, off + nodes[axis][q], nodes, sel, w);
        }
        acc
    }
}

fn lagrange_weights(p: usize, s: f64, w: &mut [[f64; 8]; 3], want_d2: bool) {
    for q in 0..p {
        let mut denom = 1.0;
        for l in 0..p {
            if l != q {
                denom *= q as f64 - l as f64;
            }
        }
        let mut num0 = 1.0;
        for l in 0..p {
            if l != q {
                num0 *= s - l as f64;
            }
        }
        let mut num1 = 0.0;
        for r in 0..p {
            if r == q {
                continue;
            }
            let mut prod = 1.0;
            for l in 0..p {
                if l != q && l != r {
                    prod *= s - l as f64;
                }
            }
            num1 += prod;
        }
        let mut num2 = 0.0;
        if want_d2 {
            for r1 in 0..p {
                if r1 == q {
                    continue;
                }
                for r2 in 0..p {
                    if r2 == q || r2 == r1 {
                        continue;
                    }
                    let mut prod = 1.0;
                    for l in 0..p {
                        if l != q && l != r1 && l != r2 {
                            prod *= s - l as f64;
                        }
                    }
                    num2 += prod;
                }
            }
        }
        w[0][q] = num0 / denom;
        w[1][q] = num1 / denom;
        w[2][q] = num2 / denom;
    }
}

impl FieldSampler for UpsampledSampler {
    fn dim(&self) -> usize {
        self.m
    }

    fn n_comps(&self) -> usize {
        self.nc
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let mut nodes = [[0usize; 8]; 8];
        let mut w = [[[0.0f64; 8]; 3]; 8];
        self.stencil(x, false, &mut nodes[..self.m], &mut w[..self.m]);
        let sel = [0usize; 8];
        let fine_len = self.data.len() / self.nc;
        for c in 0..self.nc {
            out[c] = self.contract(c * fine_len, 0, 0, &nodes[..self.m], &sel[..self.m], &w[..self.m]);
        }
    }

    fn eval_jet(&self, x: &[f64], val: &mut [f64], d1: &mut [f64], mut d2: Option<&mut [f64]>) {
        let m = self.m;
        let mut nodes = [[0usize; 8]; 8];
        let mut w = [[[0.0f64; 8]; 3]; 8];
        self.stencil(x, d2.is_some(), &mut nodes[..m], &mut w[..m]);
        let fine_len = self.data.len() / self.nc;
        let mut sel = [0usize; 8];
        for c in 0..self.nc {
            let base = c * fine_len;
            sel[..m].fill(0);
            val[c] = self.contract(base, 0, 0, &nodes[..m], &sel[..m], &w[..m]);
            for a in 0..m {
                sel[..m].fill(0);
                sel[a] = 1;
                d1[a * self.nc + c] = self.contract(base, 0, 0, &nodes[..m], &sel[..m], &w[..m]);
            }
            if let Some(d2) = d2.as_deref_mut() {
                for a in 0..m {
                    for b in a..m {
                        sel[..m].fill(0);
                        if a == b {
                            sel[a] = 2;
                        } else {
                            sel[a] = 1;
                            sel[b] = 1;
                        }
                        let v = self.contract(base, 0, 0, &nodes[..m], &sel[..m], &w[..m]);
                        d2[(a * m + b) * self.nc + c] = v;
                        d2[(b * m + a) * self.nc + c] = v;
                    }
                }
            }
        }
    }
}

/// Values of every component at a flat list of points (layout [p * m + a]),
/// through the upsampled interpolant; output layout [p * C + c].
pub fn evaluate_offgrid(f: &FormField, points: &[f64]) -> Vec<f64> {
    let m = f.grid.m;
    assert_eq!(points.len() % m, 0);
    let np = points.len() / m;
    let sampler = UpsampledSampler::new(f);
    let nc = sampler.n_comps();
    let mut out = vec![0.0f64; np * nc];
    out.par_chunks_mut(nc).enumerate().for_each(|(p, chunk)| {
        sampler.eval(&points[p * m..(p + 1) * m], chunk);
    });
    out
}

/// Chooses the sampling model for a field: exact sparse summation when the
/// spectrum is concentrated on at most `max_modes` modes, the upsampled
/// interpolant otherwise.
pub fn adaptive_sampler(f: &FormField, max_modes: usize) -> Box<dyn FieldSampler + Send> {
    let sparse = SparseModeSampler::from_field(f, 1e-14);
    if sparse.mode_count() <= max_modes {
        Box::new(sparse)
    } else {
        Box::new(UpsampledSampler::new(f))
    }
}
