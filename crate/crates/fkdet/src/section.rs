//! Finite sections `g_F = p_F . g . i_F` of group-ring operators as dense
//! matrices, with incremental growth along a Folner schedule, an exact
//! integer assembly for the Smith-normal-form path, and a binary dump format
//! for external validation.
//!
//! Left sections act on columns `(l^2(F))^{d x 1}`:
//! `M[(i,t),(j,s)] = (f_ij)_{t s^-1}`, times `alpha(t s^-1, s)` when the
//! group is twisted. Right sections act on rows `(l^2(F))^{1 x d'}`:
//! `M[(k,t),(i,s)] = (f_ik)_{s^-1 t}`, times `alpha(s, s^-1 t)`.
//! Flat indices are block-major: `(block, t) -> block * |F| + position(t)`.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_bigint::BigInt;
use num_complex::Complex64;
use thiserror::Error;

use crate::groupring::{Domain, RingMatrix};
use crate::groups::{FolnerSet, GroupError};

/// Sections stay dense; Cholesky and eigensolvers dominate the cost at the
/// sizes this cap allows.
pub const MAX_SECTION_ROWS: usize = 16384;

#[derive(Debug, Error)]
pub enum SectionError {
    #[error("element and Folner set live over different groups")]
    GroupMismatch,
    #[error("grow target must contain the previous Folner set")]
    NotNested,
    #[error("grow target must match the previous section's shape and side")]
    GrowMismatch,
    #[error("section would have {0} rows; the dense cap is {MAX_SECTION_ROWS}")]
    TooLarge(usize),
    #[error("exact assembly requires integer coefficients and no twist")]
    ExactDomainRequired,
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad section file: {0}")]
    BadFile(String),
}

/// Which regular representation the section compresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Dense payload; real whenever the input is untwisted with real
/// coefficients, complex otherwise.
#[derive(Debug, Clone)]
pub enum SectionData {
    Real(Array2<f64>),
    Complex(Array2<Complex64>),
}

/// A compressed operator `g_F` with its index bookkeeping.
#[derive(Debug, Clone)]
pub struct FiniteSection {
    data: SectionData,
    row_blocks: usize,
    col_blocks: usize,
    set: FolnerSet,
    side: Side,
    hermitian_by_construction: bool,
}

impl FiniteSection {
    pub fn data(&self) -> &SectionData {
        &self.data
    }

    pub fn set(&self) -> &FolnerSet {
        &self.set
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn rows(&self) -> usize {
        self.row_blocks * self.set.len()
    }

    pub fn cols(&self) -> usize {
        self.col_blocks * self.set.len()
    }

    pub fn row_blocks(&self) -> usize {
        self.row_blocks
    }

    pub fn col_blocks(&self) -> usize {
        self.col_blocks
    }

    pub fn is_square(&self) -> bool {
        self.row_blocks == self.col_blocks
    }

    /// Star-symmetric input on a side whose entry rule transports star to the
    /// conjugate transpose; callers may skip the numerical Hermitian check.
    pub fn hermitian_by_construction(&self) -> bool {
        self.hermitian_by_construction
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.data, SectionData::Complex(_))
    }

    /// Entry as a complex number regardless of storage.
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        match &self.data {
            SectionData::Real(m) => Complex64::new(m[[row, col]], 0.0),
            SectionData::Complex(m) => m[[row, col]],
        }
    }

    /// Largest absolute deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                let d = (self.at(r, c) - self.at(c, r).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Gershgorin bound `max_r sum_c |M[r,c]|` on the spectral norm of a
    /// Hermitian section; used for the numerical-kernel threshold.
    pub fn norm_bound(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.rows() {
            let mut row = 0.0;
            for c in 0..self.cols() {
                row += self.at(r, c).norm();
            }
            worst = worst.max(row);
        }
        worst
    }

    /// Write `magic(8) rows(u64) cols(u64) dtype(u64)` then row-major
    /// little-endian payload; dtype 0 = f64, 1 = interleaved complex f64.
    pub fn dump_binary(&self, path: &Path) -> Result<(), SectionError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(b"FKSECT01")?;
        w.write_all(&(self.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.cols() as u64).to_le_bytes())?;
        let dtype: u64 = if self.is_complex() { 1 } else { 0 };
        w.write_all(&dtype.to_le_bytes())?;
        match &self.data {
            SectionData::Real(m) => {
                for v in m.iter() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            SectionData::Complex(m) => {
                for v in m.iter() {
                    w.write_all(&v.re.to_le_bytes())?;
                    w.write_all(&v.im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }
}

/// Raw reader for the binary dump format (validation tooling).
pub fn read_binary_dump(path: &Path) -> Result<(usize, usize, u64, Vec<f64>), SectionError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header = [0u8; 32];
    r.read_exact(&mut header)?;
    if &header[0..8] != b"FKSECT01" {
        return Err(SectionError::BadFile("bad magic".into()));
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    let dtype = u64::from_le_bytes(header[24..32].try_into().unwrap());
    let scalars = rows * cols * if dtype == 1 { 2 } else { 1 };
    let mut payload = Vec::with_capacity(scalars);
    let mut buf = [0u8; 8];
    for _ in 0..scalars {
        r.read_exact(&mut buf)?;
        payload.push(f64::from_le_bytes(buf));
    }
    Ok((rows, cols, dtype, payload))
}

#[derive(Debug)]
struct Shape {
    row_blocks: usize,
    col_blocks: usize,
}

fn shape_for(f: &RingMatrix, side: Side) -> Shape {
    match side {
        Side::Left => Shape { row_blocks: f.rows(), col_blocks: f.cols() },
        Side::Right => Shape { row_blocks: f.cols(), col_blocks: f.rows() },
    }
}

fn checks(f: &RingMatrix, set: &FolnerSet, side: Side) -> Result<Shape, SectionError> {
    if f.group() != set.group() {
        return Err(SectionError::GroupMismatch);
    }
    let shape = shape_for(f, side);
    let rows = shape.row_blocks * set.len();
    let cols = shape.col_blocks * set.len();
    if rows.max(cols) > MAX_SECTION_ROWS {
        return Err(SectionError::TooLarge(rows.max(cols)));
    }
    Ok(shape)
}

fn hermitian_hint(f: &RingMatrix, side: Side) -> bool {
    // the left entry rule transports star to the conjugate transpose for any
    // twist; the right rule is only relied on untwisted
    f.is_star_symmetric() && (side == Side::Left || f.group().cocycle().is_none())
}

/// Support-driven fill shared by assemble and grow. `skip_old` prunes pairs
/// already present in a copied block.
fn fill(
    f: &RingMatrix,
    set: &FolnerSet,
    side: Side,
    data: &mut SectionData,
    skip_old: Option<&FolnerSet>,
) -> Result<(), SectionError> {
    let group = f.group().clone();
    let alpha = group.cocycle();
    let nf = set.len();
    let (outer, inner) = (f.rows(), f.cols());
    for fi in 0..outer {
        for fj in 0..inner {
            let entry = f.entry(fi, fj);
            if entry.is_zero() {
                continue;
            }
            // block coordinates of this ring entry in the section
            let (bi, bj) = match side {
                Side::Left => (fi, fj),
                Side::Right => (fj, fi),
            };
            for (u, c) in entry.support() {
                for (s_idx, s) in set.iter().enumerate() {
                    let t = match side {
                        Side::Left => group.mul(u, s)?,
                        Side::Right => group.mul(s, u)?,
                    };
                    let Some(t_idx) = set.index_of(&t) else { continue };
                    if let Some(old) = skip_old {
                        if old.contains(s) && old.contains(&t) {
                            continue;
                        }
                    }
                    let row = bi * nf + t_idx;
                    let col = bj * nf + s_idx;
                    match data {
                        SectionData::Real(m) => {
                            m[[row, col]] = c.to_f64();
                        }
                        SectionData::Complex(m) => {
                            let mut v = c.to_c64();
                            if let Some(alpha) = &alpha {
                                let phase = match side {
                                    Side::Left => alpha.eval(u, s),
                                    Side::Right => alpha.eval(s, u),
                                };
                                v *= phase;
                            }
                            m[[row, col]] = v;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Assemble the dense section of `f` over `F`.
pub fn assemble(f: &RingMatrix, set: &FolnerSet, side: Side) -> Result<FiniteSection, SectionError> {
    let shape = checks(f, set, side)?;
    let rows = shape.row_blocks * set.len();
    let cols = shape.col_blocks * set.len();
    let complex = f.domain() == Domain::Complex || f.group().cocycle().is_some();
    let mut data = if complex {
        SectionData::Complex(Array2::zeros((rows, cols)))
    } else {
        SectionData::Real(Array2::zeros((rows, cols)))
    };
    fill(f, set, side, &mut data, None)?;
    Ok(FiniteSection {
        data,
        row_blocks: shape.row_blocks,
        col_blocks: shape.col_blocks,
        set: set.clone(),
        side,
        hermitian_by_construction: hermitian_hint(f, side),
    })
}

/// Extend a section to a larger Folner set, copying the shared block
/// verbatim; bitwise-identical to a fresh assemble over the larger set.
pub fn grow(
    f: &RingMatrix,
    prev: &FiniteSection,
    set: &FolnerSet,
) -> Result<FiniteSection, SectionError> {
    let shape = checks(f, set, prev.side)?;
    if shape.row_blocks != prev.row_blocks || shape.col_blocks != prev.col_blocks {
        return Err(SectionError::GrowMismatch);
    }
    if !prev.set.is_subset_of(set) {
        return Err(SectionError::NotNested);
    }
    let rows = shape.row_blocks * set.len();
    let cols = shape.col_blocks * set.len();
    let old_n = prev.set.len();
    let new_n = set.len();
    // old position -> new position, total by the subset check
    let relocate: Vec<usize> = prev
        .set
        .iter()
        .map(|e| set.index_of(e).expect("subset"))
        .collect();
    let mut data = match (&prev.data, f.domain() == Domain::Complex || f.group().cocycle().is_some())
    {
        (SectionData::Real(_), false) => SectionData::Real(Array2::zeros((rows, cols))),
        (SectionData::Complex(_), true) => SectionData::Complex(Array2::zeros((rows, cols))),
        _ => return Err(SectionError::GrowMismatch),
    };
    for bi in 0..shape.row_blocks {
        for bj in 0..shape.col_blocks {
            for t_old in 0..old_n {
                let new_row = bi * new_n + relocate[t_old];
                let old_row = bi * old_n + t_old;
                for s_old in 0..old_n {
                    let new_col = bj * new_n + relocate[s_old];
                    let old_col = bj * old_n + s_old;
                    match (&mut data, &prev.data) {
                        (SectionData::Real(dst), SectionData::Real(src)) => {
                            dst[[new_row, new_col]] = src[[old_row, old_col]];
                        }
                        (SectionData::Complex(dst), SectionData::Complex(src)) => {
                            dst[[new_row, new_col]] = src[[old_row, old_col]];
                        }
                        _ => unreachable!("payload kinds checked above"),
                    }
                }
            }
        }
    }
    fill(f, set, prev.side, &mut data, Some(&prev.set))?;
    Ok(FiniteSection {
        data,
        row_blocks: shape.row_blocks,
        col_blocks: shape.col_blocks,
        set: set.clone(),
        side: prev.side,
        hermitian_by_construction: prev.hermitian_by_construction,
    })
}

/// Dense integer matrix for the exact determinant path.
#[derive(Debug, Clone, PartialEq)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<BigInt>, // row-major
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![BigInt::from(0); rows * cols] }
    }

    pub fn at(&self, r: usize, c: usize) -> &BigInt {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: BigInt) {
        self.data[r * self.cols + c] = v;
    }
}

/// Exact integer section (left side), for Smith-normal-form determinants.
pub fn assemble_exact_int(f: &RingMatrix, set: &FolnerSet) -> Result<IntMatrix, SectionError> {
    if f.domain() != Domain::Integer || f.group().cocycle().is_some() {
        return Err(SectionError::ExactDomainRequired);
    }
    let shape = checks(f, set, Side::Left)?;
    let group = f.group().clone();
    let nf = set.len();
    let mut out = IntMatrix::zeros(shape.row_blocks * nf, shape.col_blocks * nf);
    for fi in 0..f.rows() {
        for fj in 0..f.cols() {
            for (u, c) in f.entry(fi, fj).support() {
                let v = c.as_bigint().expect("integer domain").clone();
                for (s_idx, s) in set.iter().enumerate() {
                    let t = group.mul(u, s)?;
                    if let Some(t_idx) = set.index_of(&t) {
                        out.set(fi * nf + t_idx, fj * nf + s_idx, v.clone());
                    }
                }
            }
        }
    }
    Ok(out)
}
