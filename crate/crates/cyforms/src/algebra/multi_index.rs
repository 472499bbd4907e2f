//! Strictly increasing multi-indices as u8 bitmasks, one shared registry per
//! (dimension, degree) so component layouts agree everywhere.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// All increasing k-subsets of {0, .., m-1} in lexicographic order.
/// Component i of a degree-k form is the coefficient of e^{axes(i)}.
pub struct MultiIndexBasis {
    pub m: usize,
    pub k: usize,
    masks: Vec<u8>,
    axes_flat: Vec<usize>,
    position_of_mask: [usize; 256],
}

impl MultiIndexBasis {
    /// Shared basis for (m, k); m <= 8, k <= m.
    pub fn get(m: usize, k: usize) -> &'static MultiIndexBasis {
        static REGISTRY: OnceLock<Mutex<HashMap<(usize, usize), &'static MultiIndexBasis>>> =
            OnceLock::new();
        let mut map = REGISTRY.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap();
        *map.entry((m, k)).or_insert_with(|| Box::leak(Box::new(Self::build(m, k))))
    }

    fn build(m: usize, k: usize) -> MultiIndexBasis {
        assert!(m <= 8 && k <= m, "unsupported basis ({m}, {k})");
        let mut masks = Vec::new();
        let mut axes_flat = Vec::new();
        let mut cur: Vec<usize> = Vec::new();
        fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, masks: &mut Vec<u8>, flat: &mut Vec<usize>) {
            if cur.len() == k {
                masks.push(cur.iter().fold(0u8, |acc, &a| acc | (1 << a)));
                flat.extend_from_slice(cur);
                return;
            }
            for a in start..m {
                cur.push(a);
                rec(a + 1, m, k, cur, masks, flat);
                cur.pop();
            }
        }
        rec(0, m, k, &mut cur, &mut masks, &mut axes_flat);
        let mut position_of_mask = [usize::MAX; 256];
        for (i, &mask) in masks.iter().enumerate() {
            position_of_mask[mask as usize] = i;
        }
        MultiIndexBasis { m, k, masks, axes_flat, position_of_mask }
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn mask(&self, i: usize) -> u8 {
        self.masks[i]
    }

    pub fn axes(&self, i: usize) -> &[usize] {
        &self.axes_flat[i * self.k..(i + 1) * self.k]
    }

    pub fn position(&self, mask: u8) -> Option<usize> {
        let p = self.position_of_mask[mask as usize];
        (p != usize::MAX).then_some(p)
    }

    /// Complement index within {0, .., m-1}.
    pub fn complement(&self, mask: u8) -> u8 {
        !mask & ((1u16 << self.m) - 1) as u8
    }
}

/// Sign and union of concatenating two increasing index sets, None when they
/// overlap. The sign counts the transpositions that interleave b into a.
pub fn merge_sign(a: u8, b: u8) -> Option<(f64, u8)> {
    if a & b != 0 {
        return None;
    }
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        // bits of a strictly above j must hop over this factor
        inversions += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
    Some((sign, a | b))
}
