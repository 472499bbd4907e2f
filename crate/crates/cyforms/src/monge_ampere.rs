//! Damped Newton solver for the prescribed-volume equation
//! det(I + 2 H(phi)) = e^G on the flat torus, H the complex Hessian. The
//! linearization tr(adj(M) 2 H(dphi)) is inverted per Newton step by a
//! Richardson iteration preconditioned with the constant-coefficient
//! Laplacian, which is the exact linearization at phi = 0.

use crate::background::{complex_hessian, hermitian_min_eig, DensityFunction, KahlerTorus};
use crate::calculus::fft::transform_component;
use crate::calculus::field::{Domain, FormField};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MASolveConfig {
    /// Sup-norm target for the band-projected residual, relative to the sup
    /// of the density. The Nyquist tail of det is outside the reach of a
    /// masked update and is left to the caller's own checks.
    pub tol_residual: f64,
    pub max_newton: usize,
    /// Backtracking factor for the line search.
    pub damping: f64,
    pub min_step: f64,
    /// Smallest admissible eigenvalue of I + 2H along the iteration.
    pub positivity_floor: f64,
    /// Inner linear-solve refinement target.
    pub refine_tol: f64,
    pub max_refine: usize,
}

impl Default for MASolveConfig {
    fn default() -> Self {
        MASolveConfig {
            tol_residual: 1e-10,
            max_newton: 30,
            damping: 0.5,
            min_step: 1.0 / 64.0,
            positivity_floor: 0.05,
            refine_tol: 1e-12,
            max_refine: 200,
        }
    }
}

impl MASolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::Validation(why));
        if !(self.tol_residual >= 1e-13) {
            return bad(format!("tol_residual {} below 1e-13", self.tol_residual));
        }
        if self.max_newton == 0 || self.max_refine == 0 {
            return bad("iteration budgets must be positive".into());
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad(format!("damping {} must lie in (0, 1)", self.damping));
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return bad(format!("min_step {} must lie in (0, 1]", self.min_step));
        }
        if !(self.positivity_floor > 0.0) {
            return bad(format!("positivity_floor {} must be positive", self.positivity_floor));
        }
        if !(self.refine_tol > 0.0) {
            return bad(format!("refine_tol {} must be positive", self.refine_tol));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MASolveReport {
    /// Number of residual evaluations (= accepted Newton states).
    pub iterations: usize,
    /// Band-projected sup norm at exit; `ma_residual` gives the full-grid one.
    pub final_residual: f64,
    pub positivity_margin: f64,
    pub mean_phi: f64,
    pub history: Vec<f64>,
}

// --------------------------------------------------------- pointwise forms

/// det of a hermitian n x n matrix, n <= 3.
fn det_hermitian(mm: &[Complex64], n: usize) -> f64 {
    match n {
        1 => mm[0].re,
        2 => mm[0].re * mm[3].re - mm[1].norm_sqr(),
        3 => {
            let d = mm[0] * (mm[4] * mm[8] - mm[5] * mm[7])
                - mm[1] * (mm[3] * mm[8] - mm[5] * mm[6])
                + mm[2] * (mm[3] * mm[7] - mm[4] * mm[6]);
            d.re
        }
        _ => panic!("det_hermitian supports n <= 3"),
    }
}

/// tr(adj(M) A) for hermitian M, A; the derivative of det at M along A.
fn adjugate_trace(mm: &[Complex64], aa: &[Complex64], n: usize) -> f64 {
    match n {
        1 => aa[0].re,
        2 => {
            (mm[3] * aa[0] + mm[0] * aa[3] - mm[1] * aa[2] - mm[2] * aa[1]).re
        }
        3 => {
            let mut t = Complex64::ZERO;
            // adj(M)_{jk} = cofactor(k, j)
            for j in 0..3 {
                for k in 0..3 {
                    let (r0, r1) = match k {
                        0 => (1, 2),
                        1 => (0, 2),
                        _ => (0, 1),
                    };
                    let (c0, c1) = match j {
                        0 => (1, 2),
                        1 => (0, 2),
                        _ => (0, 1),
                    };
                    let minor = mm[r0 * 3 + c0] * mm[r1 * 3 + c1] - mm[r0 * 3 + c1] * mm[r1 * 3 + c0];
                    let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
                    t += minor * sign * aa[k * 3 + j];
                }
            }
            t.re
        }
        _ => panic!("adjugate_trace supports n <= 3"),
    }
}

/// I + 2H at every point, point-major n*n.
fn m_matrix(phi: &FormField, n: usize) -> Vec<Complex64> {
    let h = complex_hessian(phi);
    let nn = n * n;
    let mut mm = vec![Complex64::ZERO; h.len * nn];
    mm.par_chunks_mut(nn).enumerate().for_each(|(idx, chunk)| {
        let src = h.at(idx);
        for e in 0..nn {
            chunk[e] = src[e] * 2.0;
        }
        for j in 0..n {
            chunk[j * n + j] += 1.0;
        }
    });
    mm
}

fn grid_min_eig(mm: &[Complex64], n: usize) -> f64 {
    mm.par_chunks(n * n)
        .map(|c| hermitian_min_eig(c, n))
        .reduce(|| f64::INFINITY, f64::min)
}

/// Pointwise exp with the Nyquist modes removed, so the density lives in the
/// same band-limited space as every differentiated field.
pub fn dealiased_exp(g: &FormField) -> FormField {
    assert_eq!(g.degree, 0);
    let grid = g.grid.clone();
    let mut e = FormField::zeros(&grid, 0, Domain::Physical);
    e.comp_mut(0)
        .par_iter_mut()
        .zip(g.comp(0).par_iter())
        .for_each(|(dst, src)| *dst = Complex64::new(src.re.exp(), 0.0));
    let mut spec = e.to_spectral();
    let nyq: Vec<bool> = (0..grid.len).map(|i| grid.touches_nyquist(i)).collect();
    spec.comp_mut(0)
        .par_iter_mut()
        .zip(nyq.par_iter())
        .for_each(|(v, &kill)| {
            if kill {
                *v = Complex64::ZERO;
            }
        });
    spec.to_physical().real_cleaned()
}

/// Sup-norm and field of det(I + 2H(phi)) - e^G.
pub fn ma_residual(phi: &FormField, g: &DensityFunction, bg: &KahlerTorus) -> (f64, FormField) {
    assert_eq!(phi.grid.sizes, bg.grid.sizes);
    let eg = dealiased_exp(&g.f);
    let mm = m_matrix(phi, bg.n);
    let field = residual_field(&mm, &eg, bg.n);
    (field.norm_inf(), field)
}

fn residual_field(mm: &[Complex64], eg: &FormField, n: usize) -> FormField {
    let mut out = FormField::zeros(&eg.grid, 0, Domain::Physical);
    out.comp_mut(0)
        .par_iter_mut()
        .enumerate()
        .for_each(|(idx, v)| {
            let det = det_hermitian(&mm[idx * n * n..(idx + 1) * n * n], n);
            *v = Complex64::new(det - eg.comp(0)[idx].re, 0.0);
        });
    out
}

// ------------------------------------------------------------ inner solver

/// Solves tr(adj(M) 2 H(dphi)) = rhs for mean-zero dphi by Laplacian-
/// preconditioned Richardson iteration; the preconditioner inverts the
/// phi = 0 linearization -|k|^2/2 exactly, modes in its kernel are dropped.
fn solve_newton_step(
    mm: &[Complex64],
    rhs: &FormField,
    bg: &KahlerTorus,
    cfg: &MASolveConfig,
) -> FormField {
    let grid = &rhs.grid;
    let m = grid.m;
    let n = bg.n;
    let scale = rhs.norm_inf().max(1e-300);
    let lap: Vec<f64> = (0..grid.len)
        .into_par_iter()
        .map(|idx| {
            let mut kappa = [0.0f64; 8];
            grid.mode_masked(idx, &mut kappa[..m]);
            -kappa[..m].iter().map(|k| k * k).sum::<f64>() / 2.0
        })
        .collect();

    let apply_lin = |dphi: &FormField| -> FormField {
        let dh = complex_hessian(dphi);
        let mut out = FormField::zeros(grid, 0, Domain::Physical);
        out.comp_mut(0)
            .par_iter_mut()
            .enumerate()
            .for_each(|(idx, v)| {
                let a = dh.at(idx);
                let mut two_a = [Complex64::ZERO; 9];
                for e in 0..n * n {
                    two_a[e] = a[e] * 2.0;
                }
                *v = Complex64::new(
                    adjugate_trace(&mm[idx * n * n..(idx + 1) * n * n], &two_a[..n * n], n),
                    0.0,
                );
            });
        out
    };

    // dphi stays spectral: the Hessian of the correction reads it directly,
    // and the kernel mode is never populated
    let mut dphi = FormField::zeros(grid, 0, Domain::Spectral);
    let mut r = rhs.clone();
    for _ in 0..cfg.max_refine {
        let mut rh: Vec<Complex64> = r.comp(0).to_vec();
        transform_component(grid, &mut rh, false);
        dphi.comp_mut(0)
            .par_iter_mut()
            .enumerate()
            .for_each(|(idx, v)| {
                if lap[idx] != 0.0 {
                    *v += rh[idx] / lap[idx];
                }
            });
        let lx = apply_lin(&dphi);
        r = rhs.sub(&lx);
        let mean_r = r.mean_value(0);
        let rn = r
            .comp(0)
            .par_iter()
            .map(|v| (v - mean_r).norm())
            .reduce(|| 0.0, f64::max);
        if rn < cfg.refine_tol * scale {
            break;
        }
    }
    // the refinement couples into Nyquist bins through the matrix products;
    // projecting the step keeps the iterate band-limited by construction
    let mut out = dphi.to_physical().band_projected().real_cleaned();
    let mean = out.mean_value(0);
    for v in out.comp_mut(0) {
        *v -= mean;
    }
    out
}

// -------------------------------------------------------------- the solver

pub fn solve_monge_ampere(
    g: &DensityFunction,
    bg: &KahlerTorus,
    cfg: &MASolveConfig,
) -> Result<(FormField, MASolveReport)> {
    cfg.validate()?;
    assert_eq!(g.f.grid.sizes, bg.grid.sizes);
    let grid = &bg.grid;
    let n = bg.n;
    let eg = dealiased_exp(&g.f);
    let scale = eg.norm_inf().max(1.0);

    let mut phi = FormField::zeros(grid, 0, Domain::Physical);
    let mut history: Vec<f64> = Vec::new();
    loop {
        let mm = m_matrix(&phi, n);
        // products of band modes put content on the Nyquist planes, where a
        // masked update cannot act; convergence is judged on the part of the
        // residual the step can actually remove
        let res = residual_field(&mm, &eg, n).band_projected();
        let rn = res.norm_inf();
        history.push(rn);
        if rn <= cfg.tol_residual * scale {
            let report = MASolveReport {
                iterations: history.len(),
                final_residual: rn,
                positivity_margin: grid_min_eig(&mm, n),
                mean_phi: phi.mean_value(0).re,
                history,
            };
            return Ok((phi, report));
        }
        if history.len() > cfg.max_newton {
            return Err(Error::MaxIterations { iterations: history.len(), history });
        }

        let rhs = res.scaled(Complex64::new(-1.0, 0.0));
        let dphi = solve_newton_step(&mm, &rhs, bg, cfg);

        let mut step = 1.0;
        let mut accepted = false;
        let mut saw_admissible_margin = false;
        let mut last_margin = f64::INFINITY;
        while step >= cfg.min_step {
            let trial = phi.add(&dphi.scaled(Complex64::new(step, 0.0)));
            let mmt = m_matrix(&trial, n);
            last_margin = grid_min_eig(&mmt, n);
            if last_margin >= cfg.positivity_floor {
                saw_admissible_margin = true;
                let trial_rn = residual_field(&mmt, &eg, n).band_projected().norm_inf();
                if trial_rn < rn {
                    let mut next = trial;
                    let mean = next.mean_value(0);
                    for v in next.comp_mut(0) {
                        *v -= mean;
                    }
                    phi = next;
                    accepted = true;
                    break;
                }
            }
            step *= cfg.damping;
        }
        if !accepted {
            if !saw_admissible_margin {
                return Err(Error::PositivityLost {
                    margin: last_margin,
                    floor: cfg.positivity_floor,
                });
            }
            // no descent direction left at the smallest step: stalled
            return Err(Error::MaxIterations { iterations: history.len(), history });
        }
    }
}
