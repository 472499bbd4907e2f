//! Field dumps. The binary CYFF layout is: magic "CYFF", version, complex
//! dimension, form degree, grid sizes per axis (all u32 little-endian), then
//! the samples as little-endian (re, im) f64 pairs, component-major and
//! row-major within a component. CSV export is one row per grid point.

use super::field::{Domain, FormField};
use super::grid::TorusGrid;
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::io::Write as _;
use std::path::Path;

const MAGIC: &[u8; 4] = b"CYFF";
const VERSION: u32 = 1;

pub fn write_cyff(path: &Path, f: &FormField) -> Result<()> {
    if f.domain != Domain::Physical {
        return Err(Error::Validation(
            "CYFF stores physical-space samples; transform before writing".into(),
        ));
    }
    let grid = &f.grid;
    let mut buf = Vec::with_capacity(16 + 4 * grid.m + 16 * f.data_len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&((grid.m / 2) as u32).to_le_bytes());
    buf.extend_from_slice(&(f.degree as u32).to_le_bytes());
    for &s in &grid.sizes {
        buf.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for c in 0..f.n_comps() {
        for v in f.comp(c) {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Parse("CYFF payload shorter than its header claims".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_cyff(path: &Path) -> Result<FormField> {
    let bytes = std::fs::read(path)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Parse("not a CYFF file (bad magic)".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported CYFF version {version}")));
    }
    let n = cur.u32()? as usize;
    if n == 0 || n > 4 {
        return Err(Error::Parse(format!("complex dimension {n} out of range")));
    }
    let m = 2 * n;
    let degree = cur.u32()? as usize;
    if degree > m {
        return Err(Error::Parse(format!("degree {degree} exceeds {m} axes")));
    }
    let mut sizes = Vec::with_capacity(m);
    for _ in 0..m {
        let s = cur.u32()? as usize;
        if s < 2 || s % 2 != 0 {
            return Err(Error::Parse(format!("grid size {s} must be even and at least 2")));
        }
        sizes.push(s);
    }
    let grid = TorusGrid::new_unvalidated(&sizes);
    let mut field = FormField::zeros(&grid, degree, Domain::Physical);
    for c in 0..field.n_comps() {
        for idx in 0..grid.len {
            let re = cur.f64()?;
            let im = cur.f64()?;
            field.comp_mut(c)[idx] = Complex64::new(re, im);
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Parse("trailing bytes after CYFF payload".into()));
    }
    Ok(field)
}

/// One row per grid point: flattened coordinates, then each component as a
/// _re/_im column pair. Component labels list 1-based axis numbers.
pub fn write_csv(path: &Path, f: &FormField) -> Result<()> {
    if f.domain != Domain::Physical {
        return Err(Error::Validation(
            "CSV export needs physical-space samples".into(),
        ));
    }
    let grid = &f.grid;
    let basis = f.basis();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header = Vec::with_capacity(grid.m + 2 * f.n_comps());
    for i in 0..grid.m / 2 {
        header.push(format!("x{}", i + 1));
        header.push(format!("y{}", i + 1));
    }
    for i in 0..f.n_comps() {
        let label = if f.degree == 0 {
            "c".to_string()
        } else {
            let digits: String = basis.axes(i).iter().map(|a| (a + 1).to_string()).collect();
            format!("c{digits}")
        };
        header.push(format!("{label}_re"));
        header.push(format!("{label}_im"));
    }
    writeln!(out, "{}", header.join(","))?;
    let mut coords = vec![0.0f64; grid.m];
    let mut row = String::new();
    for idx in 0..grid.len {
        grid.coords(idx, &mut coords);
        row.clear();
        for (a, x) in coords.iter().enumerate() {
            if a > 0 {
                row.push(',');
            }
            row.push_str(&format!("{x}"));
        }
        for c in 0..f.n_comps() {
            let v = f.comp(c)[idx];
            row.push_str(&format!(",{},{}", v.re, v.im));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}
