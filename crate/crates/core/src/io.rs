//! Binary containers for fields, control trajectories and Gramian blocks,
//! plus CSV views. All numbers are little-endian; complex values are
//! `(re, im)` pairs of `f64`, transverse frequency outermost.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::control::Axis;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::gramian::GramianBlock;
use crate::grid::{Dim, TorusGrid, Window};

pub const FIELD_MAGIC: &[u8; 4] = b"KPIF";
pub const TRAJECTORY_MAGIC: &[u8; 4] = b"KPIT";
pub const GRAMIAN_MAGIC: &[u8; 4] = b"KPIG";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_i64(w: &mut impl Write, v: i64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_c64(w: &mut impl Write, v: Complex64) -> Result<()> {
    put_f64(w, v.re)?;
    put_f64(w, v.im)
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated container: {e}")))?;
    Ok(buf)
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(take(r)?))
}

fn get_i64(r: &mut impl Read) -> Result<i64> {
    Ok(i64::from_le_bytes(take(r)?))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(take(r)?))
}

fn get_c64(r: &mut impl Read) -> Result<Complex64> {
    Ok(Complex64::new(get_f64(r)?, get_f64(r)?))
}

fn expect_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let found: [u8; 4] = take(r)?;
    if &found != magic {
        return Err(Error::Format(format!(
            "expected a {} container, found magic {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&found)
        )));
    }
    let version = get_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    Ok(())
}

/// Window written when none is requested: every non-Nyquist frequency.
fn storage_window(grid: &TorusGrid) -> Window {
    Window::new(grid.kmax(), grid.lmax())
}

fn write_grid(w: &mut impl Write, grid: &TorusGrid, window: Window) -> Result<()> {
    put_u32(w, grid.dim().as_u32())?;
    put_u32(w, grid.nx() as u32)?;
    put_u32(w, grid.ny() as u32)?;
    put_u32(w, window.kmax as u32)?;
    put_u32(w, window.lmax as u32)
}

fn read_grid(r: &mut impl Read) -> Result<(TorusGrid, Window)> {
    let dim = get_u32(r)?;
    let (nx, ny) = (get_u32(r)? as usize, get_u32(r)? as usize);
    let window = Window::new(get_u32(r)? as i64, get_u32(r)? as i64);
    let grid = match dim {
        1 if ny == 1 => TorusGrid::one_d(nx),
        2 => TorusGrid::two_d(nx, ny),
        _ => return Err(Error::Format(format!("bad grid header: dim {dim}, ny {ny}"))),
    }
    .map_err(|e| Error::Format(format!("bad grid header: {e}")))?;
    if window.kmax > grid.kmax() || window.lmax > grid.lmax() {
        return Err(Error::Format("stored window exceeds the stored grid".into()));
    }
    Ok((grid, window))
}

fn write_payload(w: &mut impl Write, field: &SpectralField, window: Window) -> Result<()> {
    for l in -window.lmax..=window.lmax {
        for k in -window.kmax..=window.kmax {
            put_c64(w, field.get(k, l))?;
        }
    }
    Ok(())
}

fn read_payload(r: &mut impl Read, grid: TorusGrid, window: Window) -> Result<SpectralField> {
    let mut field = SpectralField::zeros(grid);
    for l in -window.lmax..=window.lmax {
        for k in -window.kmax..=window.kmax {
            field.set(k, l, get_c64(r)?)?;
        }
    }
    Ok(field)
}

fn check_window(field: &SpectralField, window: Window) -> Result<()> {
    let grid = field.grid();
    if window.kmax > grid.kmax() || window.lmax > grid.lmax() || window.kmax < 0 || window.lmax < 0 {
        return Err(Error::Truncation("export window exceeds the field grid".into()));
    }
    Ok(())
}

/// Writes the coefficients inside `window` (default: all but Nyquist).
pub fn write_field(w: &mut impl Write, field: &SpectralField, window: Option<Window>) -> Result<()> {
    let window = window.unwrap_or_else(|| storage_window(field.grid()));
    check_window(field, window)?;
    w.write_all(FIELD_MAGIC)?;
    put_u32(w, FORMAT_VERSION)?;
    write_grid(w, field.grid(), window)?;
    write_payload(w, field, window)
}

pub fn read_field(r: &mut impl Read) -> Result<SpectralField> {
    expect_header(r, FIELD_MAGIC)?;
    let (grid, window) = read_grid(r)?;
    read_payload(r, grid, window)
}

pub fn field_to_bytes(field: &SpectralField) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_field(&mut out, field, None)?;
    Ok(out)
}

pub fn field_from_bytes(bytes: &[u8]) -> Result<SpectralField> {
    let mut cursor = bytes;
    let field = read_field(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after field", cursor.len())));
    }
    Ok(field)
}

/// `k,l,re,im` rows for every coefficient inside `window`.
pub fn field_csv(field: &SpectralField, window: Option<Window>) -> Result<String> {
    let window = window.unwrap_or_else(|| storage_window(field.grid()));
    check_window(field, window)?;
    let mut s = String::from("k,l,re,im\n");
    for l in -window.lmax..=window.lmax {
        for k in -window.kmax..=window.kmax {
            let c = field.get(k, l);
            s.push_str(&format!("{k},{l},{},{}\n", c.re, c.im));
        }
    }
    Ok(s)
}

/// Fields sampled at time nodes, sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    pub horizon: f64,
    pub times: Vec<f64>,
    pub fields: Vec<SpectralField>,
}

pub fn write_trajectory(w: &mut impl Write, snaps: &Snapshots, window: Option<Window>) -> Result<()> {
    let first = snaps.fields.first().ok_or_else(|| Error::param("trajectory has no samples"))?;
    if snaps.times.len() != snaps.fields.len() {
        return Err(Error::param("trajectory times and fields differ in length"));
    }
    let grid = *first.grid();
    let window = window.unwrap_or_else(|| storage_window(&grid));
    check_window(first, window)?;
    w.write_all(TRAJECTORY_MAGIC)?;
    put_u32(w, FORMAT_VERSION)?;
    write_grid(w, &grid, window)?;
    put_u32(w, snaps.fields.len() as u32)?;
    put_f64(w, snaps.horizon)?;
    for (t, f) in snaps.times.iter().zip(&snaps.fields) {
        if *f.grid() != grid {
            return Err(Error::dim("trajectory samples live on different grids"));
        }
        put_f64(w, *t)?;
        write_payload(w, f, window)?;
    }
    Ok(())
}

pub fn read_trajectory(r: &mut impl Read) -> Result<Snapshots> {
    expect_header(r, TRAJECTORY_MAGIC)?;
    let (grid, window) = read_grid(r)?;
    let count = get_u32(r)? as usize;
    let horizon = get_f64(r)?;
    let mut times = Vec::with_capacity(count);
    let mut fields = Vec::with_capacity(count);
    for _ in 0..count {
        times.push(get_f64(r)?);
        fields.push(read_payload(r, grid, window)?);
    }
    Ok(Snapshots { horizon, times, fields })
}

/// Plain description of a stored Gramian block.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredBlock {
    pub axis: Axis,
    pub fixed: i64,
    pub horizon: f64,
    pub freqs: Vec<i64>,
    /// Row-major entries.
    pub entries: Vec<Complex64>,
}

impl From<&GramianBlock> for StoredBlock {
    fn from(b: &GramianBlock) -> Self {
        let n = b.dim();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(b.matrix[(i, j)]);
            }
        }
        Self { axis: b.axis, fixed: b.fixed, horizon: b.horizon, freqs: b.freqs.clone(), entries }
    }
}

pub fn write_gramian(w: &mut impl Write, blocks: &[StoredBlock]) -> Result<()> {
    w.write_all(GRAMIAN_MAGIC)?;
    put_u32(w, FORMAT_VERSION)?;
    put_u32(w, blocks.len() as u32)?;
    for b in blocks {
        let n = b.freqs.len();
        if b.entries.len() != n * n {
            return Err(Error::dim("stored block is not square in its frequencies"));
        }
        put_u32(w, if b.axis == Axis::Vertical { 0 } else { 1 })?;
        put_i64(w, b.fixed)?;
        put_f64(w, b.horizon)?;
        put_u32(w, n as u32)?;
        for &f in &b.freqs {
            put_i64(w, f)?;
        }
        for &c in &b.entries {
            put_c64(w, c)?;
        }
    }
    Ok(())
}

pub fn read_gramian(r: &mut impl Read) -> Result<Vec<StoredBlock>> {
    expect_header(r, GRAMIAN_MAGIC)?;
    let count = get_u32(r)? as usize;
    let mut blocks = Vec::with_capacity(count);
    for _ in 0..count {
        let axis = match get_u32(r)? {
            0 => Axis::Vertical,
            1 => Axis::Horizontal,
            a => return Err(Error::Format(format!("unknown axis tag {a}"))),
        };
        let fixed = get_i64(r)?;
        let horizon = get_f64(r)?;
        let n = get_u32(r)? as usize;
        let freqs = (0..n).map(|_| get_i64(r)).collect::<Result<Vec<_>>>()?;
        let entries = (0..n * n).map(|_| get_c64(r)).collect::<Result<Vec<_>>>()?;
        blocks.push(StoredBlock { axis, fixed, horizon, freqs, entries });
    }
    Ok(blocks)
}

/// `fixed,index,eigenvalue` rows, eigenvalues ascending within a block.
pub fn eigenvalue_csv(blocks: &[GramianBlock]) -> String {
    let mut s = String::from("fixed,index,eigenvalue\n");
    for b in blocks {
        for (i, ev) in b.eigenvalues().iter().enumerate() {
            s.push_str(&format!("{},{i},{ev}\n", b.fixed));
        }
    }
    s
}

/// Shape summary of a grid, used in reports.
pub fn describe_grid(grid: &TorusGrid) -> String {
    match grid.dim() {
        Dim::One => format!("1d nx={}", grid.nx()),
        Dim::Two => format!("2d nx={} ny={}", grid.nx(), grid.ny()),
    }
}
