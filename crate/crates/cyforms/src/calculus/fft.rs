//! In-place multi-dimensional FFT with unitary normalization: forward and
//! inverse both scale by 1/sqrt(N), so the transform preserves the 2-norm
//! and the two directions are exact inverses of each other.

use super::grid::TorusGrid;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let mut map = PLANS.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap();
    map.entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// One scalar component over the grid, transformed along every axis.
pub fn transform_component(grid: &TorusGrid, data: &mut [Complex64], inverse: bool) {
    assert_eq!(data.len(), grid.len);
    for axis in 0..grid.m {
        transform_axis(grid, data, axis, inverse);
    }
    let scale = 1.0 / (grid.len as f64).sqrt();
    data.iter_mut().for_each(|v| *v *= scale);
}

fn transform_axis(grid: &TorusGrid, data: &mut [Complex64], axis: usize, inverse: bool) {
    let s = grid.sizes[axis];
    let st = grid.strides[axis];
    let fft = plan(s, inverse);
    let block = s * st;
    data.par_chunks_mut(block).for_each(|chunk| {
        let mut line = vec![Complex64::ZERO; s];
        let mut scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
        for lo in 0..st {
            for j in 0..s {
                line[j] = chunk[lo + j * st];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for j in 0..s {
                chunk[lo + j * st] = line[j];
            }
        }
    });
}
