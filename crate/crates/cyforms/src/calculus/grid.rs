//! Even periodic grids on [0, 2pi)^m with row-major layout. Wavenumbers per
//! axis run over [-size/2 + 1, size/2] in FFT order; the unmatched +size/2
//! mode is zeroed in every differentiation mask so derivatives of real
//! fields stay real.

use crate::error::{Error, Result};
use std::f64::consts::TAU;
use std::sync::Arc;

pub struct TorusGrid {
    /// ambient dimension, 2n
    pub m: usize,
    /// complex dimension
    pub n: usize,
    pub sizes: Vec<usize>,
    /// total point count
    pub len: usize,
    /// row-major strides: last axis is contiguous
    pub strides: Vec<usize>,
    raw_waves: Vec<Vec<f64>>,
    masked_waves: Vec<Vec<f64>>,
}

impl TorusGrid {
    /// Grid for the supported complex dimensions (n = 2 or 3), sizes even and
    /// at least 8 per axis.
    pub fn new(sizes: &[usize]) -> Result<Arc<TorusGrid>> {
        let m = sizes.len();
        if m != 4 && m != 6 {
            return Err(Error::UnsupportedDimension(m));
        }
        for &s in sizes {
            if s % 2 != 0 {
                return Err(Error::Validation(format!("grid size {s} is odd")));
            }
            if s < 8 {
                return Err(Error::Validation(format!("grid size {s} is below the minimum of 8")));
            }
        }
        Ok(Self::build(sizes))
    }

    /// Calibration constructor without the dimension and coarseness checks;
    /// sizes must still be even (>= 4) for the Nyquist handling to make sense.
    #[doc(hidden)]
    pub fn new_unvalidated(sizes: &[usize]) -> Arc<TorusGrid> {
        assert!(!sizes.is_empty() && sizes.len() % 2 == 0);
        for &s in sizes {
            assert!(s >= 4 && s % 2 == 0, "grid sizes must be even and at least 4");
        }
        Self::build(sizes)
    }

    fn build(sizes: &[usize]) -> Arc<TorusGrid> {
        let m = sizes.len();
        let len: usize = sizes.iter().product();
        let mut strides = vec![1usize; m];
        for a in (0..m - 1).rev() {
            strides[a] = strides[a + 1] * sizes[a + 1];
        }
        let mut raw_waves = Vec::with_capacity(m);
        let mut masked_waves = Vec::with_capacity(m);
        for &s in sizes {
            let mut raw = Vec::with_capacity(s);
            let mut masked = Vec::with_capacity(s);
            for j in 0..s {
                let k = if j <= s / 2 { j as f64 } else { j as f64 - s as f64 };
                raw.push(k);
                masked.push(if j == s / 2 { 0.0 } else { k });
            }
            raw_waves.push(raw);
            masked_waves.push(masked);
        }
        Arc::new(TorusGrid { m, n: m / 2, sizes: sizes.to_vec(), len, strides, raw_waves, masked_waves })
    }

    pub fn wavenumber(&self, axis: usize, j: usize) -> f64 {
        self.raw_waves[axis][j]
    }

    pub fn derivative_wavenumber(&self, axis: usize, j: usize) -> f64 {
        self.masked_waves[axis][j]
    }

    pub fn derivative_wavenumbers(&self, axis: usize) -> &[f64] {
        &self.masked_waves[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        TAU / self.sizes[axis] as f64
    }

    pub fn flat_index(&self, indices: &[usize]) -> usize {
        indices.iter().zip(&self.strides).map(|(j, st)| j * st).sum()
    }

    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.sizes[axis]
    }

    pub fn coords(&self, idx: usize, out: &mut [f64]) {
        for a in 0..self.m {
            out[a] = TAU * self.axis_index(idx, a) as f64 / self.sizes[a] as f64;
        }
    }

    /// Differentiation-mask wavenumber vector of a flat mode index.
    pub fn mode_masked(&self, idx: usize, out: &mut [f64]) {
        for a in 0..self.m {
            out[a] = self.masked_waves[a][self.axis_index(idx, a)];
        }
    }

    pub fn mode_raw(&self, idx: usize, out: &mut [f64]) {
        for a in 0..self.m {
            out[a] = self.raw_waves[a][self.axis_index(idx, a)];
        }
    }

    /// True when any axis of the mode sits at its Nyquist frequency.
    pub fn touches_nyquist(&self, idx: usize) -> bool {
        (0..self.m).any(|a| self.axis_index(idx, a) == self.sizes[a] / 2)
    }
}
