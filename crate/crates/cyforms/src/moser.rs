//! Transport along the straight-line family omega + t d(alpha): pointwise
//! velocity solves, fixed-step RK4 isotopy integration carrying Jacobians
//! through the variational equation, pullbacks, and binary flow dumps.

use crate::algebra::multi_index::MultiIndexBasis;
use crate::background::{positivity_margin, KahlerTorus};
use crate::calculus::field::{Domain, FormField};
use crate::calculus::grid::TorusGrid;
use crate::calculus::offgrid::{adaptive_sampler, FieldSampler};
use crate::calculus::ops::exterior_derivative;
use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

/// Largest spectrum for which off-grid evaluation sums modes exactly instead
/// of falling back to polynomial interpolation on an upsampled grid.
const SPARSE_CAP: usize = 4096;
/// Pivot floor for the pointwise 2n x 2n solves; the coefficient matrices
/// are O(1) by construction, so anything below this is a degenerate form.
const PIVOT_FLOOR: f64 = 1e-10;
/// A flow whose Jacobian determinant falls below this has left the regime
/// where the transport argument applies.
const DET_FLOOR: f64 = 1e-6;

// ------------------------------------------------------------------ path

/// Straight-line family omega_t = omega + t d(alpha), t in [0, 1]. The
/// constructor checks the endpoint stays positive; every interior member
/// then is, because the pointwise minimum eigenvalue is concave along the
/// segment. d(alpha) has no constant mode, so all members share periods.
pub struct MoserPath {
    /// Real primitive 1-form driving the family.
    pub alpha: FormField,
    d_alpha: FormField,
    end_margin: f64,
}

impl MoserPath {
    pub fn new(alpha: FormField, bg: &KahlerTorus) -> Result<Self> {
        if alpha.degree != 1 || alpha.grid.sizes != bg.grid.sizes {
            return Err(Error::Validation(format!(
                "path primitive must be a 1-form on the {:?} grid, got degree {} on {:?}",
                bg.grid.sizes, alpha.degree, alpha.grid.sizes
            )));
        }
        let alpha = match alpha.domain {
            Domain::Physical => alpha,
            Domain::Spectral => alpha.to_physical(),
        };
        let scale = alpha.norm_inf().max(1.0);
        if alpha.max_imag() > 1e-10 * scale {
            return Err(Error::Validation(format!(
                "path primitive must be real, largest imaginary part {:.3e}",
                alpha.max_imag()
            )));
        }
        let alpha = alpha.real_cleaned();
        let d_alpha = exterior_derivative(&alpha).real_cleaned();
        for c in 0..d_alpha.n_comps() {
            let mean = d_alpha.mean_value(c).norm();
            if mean > 1e-12 * scale {
                return Err(Error::Validation(format!(
                    "family displacement carries a constant mode of size {mean:.3e}"
                )));
            }
        }
        let end_margin = positivity_margin(&bg.omega.add(&d_alpha), bg);
        if end_margin <= 0.0 {
            return Err(Error::PositivityLost { margin: end_margin, floor: 0.0 });
        }
        Ok(MoserPath { alpha, d_alpha, end_margin })
    }

    pub fn d_alpha(&self) -> &FormField {
        &self.d_alpha
    }

    /// Family member omega + t d(alpha).
    pub fn omega_t(&self, t: f64, bg: &KahlerTorus) -> FormField {
        bg.omega.add(&self.d_alpha.scaled(Complex64::new(t, 0.0)))
    }

    /// Positivity margin of the t = 1 endpoint; a lower bound for the whole
    /// family after mixing with the margin 1 of the start.
    pub fn end_margin(&self) -> f64 {
        self.end_margin
    }
}

// ------------------------------------------------- small dense linear algebra

fn lu_factor(a: &mut [f64], piv: &mut [usize], m: usize) -> bool {
    for col in 0..m {
        let mut best = col;
        let mut bv = a[col * m + col].abs();
        for r in col + 1..m {
            let v = a[r * m + col].abs();
            if v > bv {
                best = r;
                bv = v;
            }
        }
        if !(bv > PIVOT_FLOOR) {
            return false;
        }
        piv[col] = best;
        if best != col {
            for c in 0..m {
                a.swap(col * m + c, best * m + c);
            }
        }
        let inv = 1.0 / a[col * m + col];
        for r in col + 1..m {
            let f = a[r * m + col] * inv;
            a[r * m + col] = f;
            for c in col + 1..m {
                a[r * m + c] -= f * a[col * m + c];
            }
        }
    }
    true
}

fn lu_solve(a: &[f64], piv: &[usize], b: &mut [f64], m: usize) {
    // all interchanges first: the stored multipliers are the post-swap
    // finals, so they act on the fully permuted right-hand side
    for col in 0..m {
        if piv[col] != col {
            b.swap(col, piv[col]);
        }
    }
    for col in 0..m {
        for r in col + 1..m {
            b[r] -= a[r * m + col] * b[col];
        }
    }
    for r in (0..m).rev() {
        for c in r + 1..m {
            b[r] -= a[r * m + c] * b[c];
        }
        b[r] /= a[r * m + r];
    }
}

fn det_small(a: &[f64], m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mut w = [0.0f64; 64];
    w[..m * m].copy_from_slice(&a[..m * m]);
    let mut det = 1.0;
    for col in 0..m {
        let mut best = col;
        let mut bv = w[col * m + col].abs();
        for r in col + 1..m {
            let v = w[r * m + col].abs();
            if v > bv {
                best = r;
                bv = v;
            }
        }
        if bv == 0.0 {
            return 0.0;
        }
        if best != col {
            for c in 0..m {
                w.swap(col * m + c, best * m + c);
            }
            det = -det;
        }
        let p = w[col * m + col];
        det *= p;
        for r in col + 1..m {
            let f = w[r * m + col] / p;
            for c in col + 1..m {
                w[r * m + c] -= f * w[col * m + c];
            }
        }
    }
    det
}

// --------------------------------------------------------------- velocity

/// Grid-sampled solution X of the pointwise contraction equation against the
/// family member at time t: X fed back into omega_t reproduces -alpha.
pub fn moser_vector_field(t: f64, path: &MoserPath, bg: &KahlerTorus) -> Result<FormField> {
    let grid = &bg.grid;
    let m = grid.m;
    let basis2 = MultiIndexBasis::get(m, 2);
    let w0 = bg.frame.omega_coeff_matrix();
    let pairs: Vec<(usize, usize)> = (0..basis2.len())
        .map(|i| {
            let ax = basis2.axes(i);
            (ax[0], ax[1])
        })
        .collect();
    let vals: Result<Vec<[f64; 8]>> = (0..grid.len)
        .into_par_iter()
        .map(|idx| {
            let mut wt = [0.0f64; 64];
            wt[..m * m].copy_from_slice(&w0[..m * m]);
            for (i, &(a, b)) in pairs.iter().enumerate() {
                let v = t * path.d_alpha.comp(i)[idx].re;
                wt[a * m + b] += v;
                wt[b * m + a] -= v;
            }
            // the contraction pairs X into the first slot, so the system
            // matrix is the transpose
            let mut aa = [0.0f64; 64];
            for r in 0..m {
                for c in 0..m {
                    aa[r * m + c] = wt[c * m + r];
                }
            }
            let mut piv = [0usize; 8];
            if !lu_factor(&mut aa[..m * m], &mut piv[..m], m) {
                return Err(Error::SingularOmega);
            }
            let mut x = [0.0f64; 8];
            for nu in 0..m {
                x[nu] = -path.alpha.comp(nu)[idx].re;
            }
            lu_solve(&aa[..m * m], &piv[..m], &mut x[..m], m);
            Ok(x)
        })
        .collect();
    let vals = vals?;
    let mut out = FormField::zeros(grid, 1, Domain::Physical);
    for c in 0..m {
        let comp = out.comp_mut(c);
        for (idx, v) in vals.iter().enumerate() {
            comp[idx] = Complex64::new(v[c], 0.0);
        }
    }
    Ok(out)
}

/// Off-grid velocity through a sampler of alpha: values give the right-hand
/// side, first derivatives the family displacement, second derivatives the
/// spatial gradient of the velocity for the variational equation.
struct Velocity<'a> {
    m: usize,
    w0: &'a [f64],
    sampler: Box<dyn FieldSampler + Send>,
}

impl Velocity<'_> {
    /// X at (t, x) into vx; when dvx is given, also dX^b/dx_s at dvx[b*m+s].
    fn eval(&self, t: f64, x: &[f64], vx: &mut [f64], dvx: Option<&mut [f64]>) -> Result<()> {
        let m = self.m;
        let mut val = [0.0f64; 8];
        let mut d1 = [0.0f64; 64];
        let mut d2 = [0.0f64; 512];
        let want_d2 = dvx.is_some();
        self.sampler.eval_jet(
            x,
            &mut val[..m],
            &mut d1[..m * m],
            if want_d2 { Some(&mut d2[..m * m * m]) } else { None },
        );
        let mut aa = [0.0f64; 64];
        for mu in 0..m {
            for nu in 0..m {
                let da = d1[mu * m + nu] - d1[nu * m + mu];
                aa[nu * m + mu] = self.w0[mu * m + nu] + t * da;
            }
        }
        let mut piv = [0usize; 8];
        if !lu_factor(&mut aa[..m * m], &mut piv[..m], m) {
            return Err(Error::SingularOmega);
        }
        for nu in 0..m {
            vx[nu] = -val[nu];
        }
        lu_solve(&aa[..m * m], &piv[..m], vx, m);
        if let Some(dvx) = dvx {
            for s in 0..m {
                let mut rhs = [0.0f64; 8];
                for nu in 0..m {
                    let mut acc = -d1[s * m + nu];
                    for mu in 0..m {
                        let dda = d2[(s * m + mu) * m + nu] - d2[(s * m + nu) * m + mu];
                        acc -= t * vx[mu] * dda;
                    }
                    rhs[nu] = acc;
                }
                lu_solve(&aa[..m * m], &piv[..m], &mut rhs[..m], m);
                for b in 0..m {
                    dvx[b * m + s] = rhs[b];
                }
            }
        }
        Ok(())
    }
}

// -------------------------------------------------------------------- flow

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowDirection {
    Forward,
    Inverse,
}

/// Time-one map of the transport isotopy, sampled at the grid points, with
/// the Jacobian of the map carried alongside each trajectory.
pub struct FlowMap {
    pub direction: FlowDirection,
    pub grid: Arc<TorusGrid>,
    /// Mapped points, layout [idx * m + axis], wrapped into [0, 2pi).
    pub positions: Vec<f64>,
    /// Row-major Jacobians d(map)^b / dx^a at [idx * m * m + b * m + a].
    pub jacobians: Vec<f64>,
    pub ode_steps: usize,
}

fn rk4_point(
    vel: &Velocity,
    direction: FlowDirection,
    steps: usize,
    x: &mut [f64],
    jac: &mut [f64],
) -> Result<()> {
    let m = vel.m;
    let h = 1.0 / steps as f64;
    let sgn = match direction {
        FlowDirection::Forward => 1.0,
        FlowDirection::Inverse => -1.0,
    };
    let mut kx = [[0.0f64; 8]; 4];
    let mut kj = [[0.0f64; 64]; 4];
    let mut xs = [0.0f64; 8];
    let mut js = [0.0f64; 64];
    let mut vx = [0.0f64; 8];
    let mut dv = [0.0f64; 64];
    let nodes: [(f64, Option<usize>); 4] = [(0.0, None), (0.5, Some(0)), (0.5, Some(1)), (1.0, Some(2))];
    for i in 0..steps {
        let t0 = i as f64 * h;
        for (s, &(c, prev)) in nodes.iter().enumerate() {
            match prev {
                Some(p) => {
                    for a in 0..m {
                        xs[a] = x[a] + h * c * kx[p][a];
                    }
                    for a in 0..m * m {
                        js[a] = jac[a] + h * c * kj[p][a];
                    }
                }
                None => {
                    xs[..m].copy_from_slice(x);
                    js[..m * m].copy_from_slice(jac);
                }
            }
            let tau = t0 + c * h;
            let t_eff = match direction {
                FlowDirection::Forward => tau,
                FlowDirection::Inverse => 1.0 - tau,
            };
            vel.eval(t_eff, &xs[..m], &mut vx[..m], Some(&mut dv[..m * m]))?;
            for a in 0..m {
                kx[s][a] = sgn * vx[a];
            }
            for b in 0..m {
                for a in 0..m {
                    let mut acc = 0.0;
                    for q in 0..m {
                        acc += dv[b * m + q] * js[q * m + a];
                    }
                    kj[s][b * m + a] = sgn * acc;
                }
            }
        }
        for a in 0..m {
            x[a] += h / 6.0 * (kx[0][a] + 2.0 * kx[1][a] + 2.0 * kx[2][a] + kx[3][a]);
        }
        for a in 0..m * m {
            jac[a] += h / 6.0 * (kj[0][a] + 2.0 * kj[1][a] + 2.0 * kj[2][a] + kj[3][a]);
        }
    }
    for a in 0..m {
        x[a] = x[a].rem_euclid(TAU);
    }
    Ok(())
}

/// RK4 integration of the transport isotopy from explicit starting points
/// (layout [p * m + axis]). The forward direction runs the family time from
/// 0 to 1; the inverse direction runs it backwards with the velocity negated,
/// which produces the inverse map of the forward flow.
pub fn integrate_flow_from(
    path: &MoserPath,
    bg: &KahlerTorus,
    steps: usize,
    direction: FlowDirection,
    starts: &[f64],
) -> Result<FlowMap> {
    let m = bg.grid.m;
    if steps < 16 {
        return Err(Error::Validation(format!(
            "flow integration needs at least 16 steps, got {steps}"
        )));
    }
    if starts.is_empty() || starts.len() % m != 0 {
        return Err(Error::Validation(format!(
            "starting points must come in groups of {m} coordinates"
        )));
    }
    let npts = starts.len() / m;
    let vel = Velocity {
        m,
        w0: bg.frame.omega_coeff_matrix(),
        sampler: adaptive_sampler(&path.alpha, SPARSE_CAP),
    };
    let stride = m + m * m;
    let mut state = vec![0.0f64; npts * stride];
    state
        .par_chunks_mut(stride)
        .enumerate()
        .try_for_each(|(p, chunk)| {
            let (x, jac) = chunk.split_at_mut(m);
            x.copy_from_slice(&starts[p * m..(p + 1) * m]);
            for a in 0..m {
                jac[a * m + a] = 1.0;
            }
            rk4_point(&vel, direction, steps, x, jac)
        })?;
    let mut positions = vec![0.0f64; npts * m];
    let mut jacobians = vec![0.0f64; npts * m * m];
    for p in 0..npts {
        let chunk = &state[p * stride..(p + 1) * stride];
        positions[p * m..(p + 1) * m].copy_from_slice(&chunk[..m]);
        jacobians[p * m * m..(p + 1) * m * m].copy_from_slice(&chunk[m..]);
        let det = det_small(&chunk[m..], m);
        if !(det > DET_FLOOR) {
            return Err(Error::JacobianDegenerate { det });
        }
    }
    Ok(FlowMap {
        direction,
        grid: bg.grid.clone(),
        positions,
        jacobians,
        ode_steps: steps,
    })
}

/// Transport isotopy started from every grid point.
pub fn integrate_flow(
    path: &MoserPath,
    bg: &KahlerTorus,
    steps: usize,
    direction: FlowDirection,
) -> Result<FlowMap> {
    let grid = &bg.grid;
    let m = grid.m;
    let mut starts = vec![0.0f64; grid.len * m];
    for idx in 0..grid.len {
        grid.coords(idx, &mut starts[idx * m..(idx + 1) * m]);
    }
    integrate_flow_from(path, bg, steps, direction, &starts)
}

// ---------------------------------------------------------------- pullback

/// Pullback through the flow map: coefficients are resampled at the mapped
/// points (exact for constant or sparse-spectrum fields) and contracted with
/// the k-fold minors of the Jacobian.
pub fn pullback_form(f: &FormField, flow: &FlowMap) -> FormField {
    let m = flow.grid.m;
    assert_eq!(f.grid.m, m, "pullback needs matching dimension");
    let k = f.degree;
    let npts = flow.positions.len() / m;
    assert_eq!(npts, flow.grid.len, "pullback expects a grid-indexed flow");
    let f_phys = match f.domain {
        Domain::Physical => f.clone(),
        Domain::Spectral => f.to_physical(),
    };
    let nc = f_phys.n_comps();
    let re_s = adaptive_sampler(&f_phys.clone().real_cleaned(), SPARSE_CAP);
    let im_s = if f_phys.max_imag() > 0.0 {
        Some(adaptive_sampler(
            &f_phys.scaled(Complex64::new(0.0, -1.0)).real_cleaned(),
            SPARSE_CAP,
        ))
    } else {
        None
    };
    let basis = MultiIndexBasis::get(m, k);
    let axes: Vec<&[usize]> = (0..nc).map(|i| basis.axes(i)).collect();
    let vals: Vec<Complex64> = (0..npts)
        .into_par_iter()
        .flat_map_iter(|p| {
            let y = &flow.positions[p * m..(p + 1) * m];
            let jac = &flow.jacobians[p * m * m..(p + 1) * m * m];
            let mut fre = [0.0f64; 70];
            let mut fim = [0.0f64; 70];
            re_s.eval(y, &mut fre[..nc]);
            if let Some(im_s) = &im_s {
                im_s.eval(y, &mut fim[..nc]);
            }
            let mut row = Vec::with_capacity(nc);
            let mut sub = [0.0f64; 36];
            for ia in 0..nc {
                let mut acc = Complex64::ZERO;
                for ib in 0..nc {
                    let fv = Complex64::new(fre[ib], fim[ib]);
                    if fv == Complex64::ZERO {
                        continue;
                    }
                    for (r, &br) in axes[ib].iter().enumerate() {
                        for (c, &ac) in axes[ia].iter().enumerate() {
                            sub[r * k + c] = jac[br * m + ac];
                        }
                    }
                    acc += fv * det_small(&sub[..k * k], k);
                }
                row.push(acc);
            }
            row
        })
        .collect();
    let mut out = FormField::zeros(&flow.grid, k, Domain::Physical);
    for c in 0..nc {
        let comp = out.comp_mut(c);
        for idx in 0..npts {
            comp[idx] = vals[idx * nc + c];
        }
    }
    out
}

/// Sup-norm defect of the transport conclusion, relative to the base form:
/// a forward flow should pull the endpoint family member back to omega, an
/// inverse flow should push omega onto the endpoint.
pub fn symplectomorphism_residual(flow: &FlowMap, path: &MoserPath, bg: &KahlerTorus) -> f64 {
    let target = path.omega_t(1.0, bg);
    let (pulled, reference) = match flow.direction {
        FlowDirection::Forward => (pullback_form(&target, flow), &bg.omega),
        FlowDirection::Inverse => (pullback_form(&bg.omega, flow), &target),
    };
    pulled.sub(reference).norm_inf() / bg.omega.norm_inf()
}

// ------------------------------------------------------------------- dump

const CYFL_MAGIC: &[u8; 4] = b"CYFL";
const CYFL_VERSION: u32 = 1;

/// Binary flow dump: magic, version, direction, step count, axis count and
/// sizes, then per grid point its mapped position followed by its row-major
/// Jacobian, all little-endian.
pub fn write_cyfl(p: &Path, flow: &FlowMap) -> Result<()> {
    let m = flow.grid.m;
    let mut w = std::io::BufWriter::new(File::create(p)?);
    w.write_all(CYFL_MAGIC)?;
    w.write_all(&CYFL_VERSION.to_le_bytes())?;
    let dir = match flow.direction {
        FlowDirection::Forward => 0u32,
        FlowDirection::Inverse => 1u32,
    };
    w.write_all(&dir.to_le_bytes())?;
    w.write_all(&(flow.ode_steps as u32).to_le_bytes())?;
    w.write_all(&(m as u32).to_le_bytes())?;
    for &s in &flow.grid.sizes {
        w.write_all(&(s as u32).to_le_bytes())?;
    }
    for idx in 0..flow.grid.len {
        for &v in &flow.positions[idx * m..(idx + 1) * m] {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in &flow.jacobians[idx * m * m..(idx + 1) * m * m] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Parse("flow dump truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_cyfl(p: &Path) -> Result<FlowMap> {
    let mut bytes = Vec::new();
    File::open(p)?.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4)? != CYFL_MAGIC {
        return Err(Error::Parse("not a flow dump: bad magic".into()));
    }
    let version = cur.u32()?;
    if version != CYFL_VERSION {
        return Err(Error::Parse(format!("unsupported flow dump version {version}")));
    }
    let direction = match cur.u32()? {
        0 => FlowDirection::Forward,
        1 => FlowDirection::Inverse,
        other => return Err(Error::Parse(format!("bad flow direction code {other}"))),
    };
    let ode_steps = cur.u32()? as usize;
    let m = cur.u32()? as usize;
    if m < 2 || m > 8 || m % 2 != 0 {
        return Err(Error::Parse(format!("bad axis count {m}")));
    }
    let mut sizes = Vec::with_capacity(m);
    for _ in 0..m {
        let s = cur.u32()? as usize;
        if s < 2 || s % 2 != 0 {
            return Err(Error::Parse(format!("bad grid size {s}")));
        }
        sizes.push(s);
    }
    let grid = TorusGrid::new_unvalidated(&sizes);
    let mut positions = vec![0.0f64; grid.len * m];
    let mut jacobians = vec![0.0f64; grid.len * m * m];
    for idx in 0..grid.len {
        for a in 0..m {
            positions[idx * m + a] = cur.f64()?;
        }
        for a in 0..m * m {
            jacobians[idx * m * m + a] = cur.f64()?;
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Parse("trailing bytes after flow dump".into()));
    }
    Ok(FlowMap { direction, grid, positions, jacobians, ode_steps })
}
