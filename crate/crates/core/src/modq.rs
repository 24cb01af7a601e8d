//! Exact modular linear algebra over Z_q and GF(2).
//!
//! Entries are always stored as residues `0..q`. The signed representative range
//! `{-floor(q/2), ..., floor((q-1)/2)}` is only produced by [`CanonicalLift`].
//! GF(2) elimination packs rows into `u64` words so the solver path scales to
//! widths in the hundreds.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_modulus(q: u32) -> Result<()> {
    if !(2..=(1 << 16)).contains(&q) {
        return Err(Error::Modulus(format!("modulus {q} outside [2, 2^16]")));
    }
    Ok(())
}

fn reduce(v: i64, q: u32) -> u32 {
    v.rem_euclid(q as i64) as u32
}

/// Vector over Z_q with entries in `[0, q)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModVector {
    modulus: u32,
    entries: Vec<u32>,
}

impl ModVector {
    pub fn new(modulus: u32, entries: Vec<u32>) -> Result<Self> {
        check_modulus(modulus)?;
        if let Some(&bad) = entries.iter().find(|&&e| e >= modulus) {
            return Err(Error::EntryOutOfRange {
                value: bad as i64,
                modulus,
            });
        }
        Ok(Self { modulus, entries })
    }

    /// Reduces arbitrary integers into `[0, q)`.
    pub fn from_i64(modulus: u32, values: &[i64]) -> Result<Self> {
        check_modulus(modulus)?;
        Ok(Self {
            modulus,
            entries: values.iter().map(|&v| reduce(v, modulus)).collect(),
        })
    }

    pub fn zeros(modulus: u32, len: usize) -> Result<Self> {
        check_modulus(modulus)?;
        Ok(Self {
            modulus,
            entries: vec![0; len],
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<u32> {
        self.entries
    }

    pub fn lift(&self) -> CanonicalLift {
        CanonicalLift::of(self)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::Modulus(format!(
                "{} vs {}",
                self.modulus, other.modulus
            )));
        }
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "vector lengths {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let q = self.modulus as u64;
        Ok(Self {
            modulus: self.modulus,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| ((a as u64 + b as u64) % q) as u32)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let q = self.modulus as u64;
        Ok(Self {
            modulus: self.modulus,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| ((a as u64 + q - b as u64) % q) as u32)
                .collect(),
        })
    }

    pub fn neg(&self) -> Self {
        let q = self.modulus;
        Self {
            modulus: q,
            entries: self.entries.iter().map(|&a| (q - a) % q).collect(),
        }
    }

    pub fn dot(&self, other: &Self) -> Result<u32> {
        self.check_same(other)?;
        let q = self.modulus as u64;
        Ok((self
            .entries
            .iter()
            .zip(&other.entries)
            .fold(0u64, |acc, (&a, &b)| (acc + a as u64 * b as u64) % q)) as u32)
    }

    /// Reduces modulo a divisor `d` of the current modulus.
    pub fn reduce_mod(&self, d: u32) -> Result<Self> {
        check_modulus(d)?;
        if !self.modulus.is_multiple_of(d) {
            return Err(Error::Modulus(format!(
                "{d} does not divide {}",
                self.modulus
            )));
        }
        Ok(Self {
            modulus: d,
            entries: self.entries.iter().map(|&e| e % d).collect(),
        })
    }

    /// Concatenation `(self || other)`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.modulus != other.modulus {
            return Err(Error::Modulus("concat of different moduli".into()));
        }
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        Ok(Self {
            modulus: self.modulus,
            entries,
        })
    }

    /// Lexicographic comparison on residues, coordinate 0 most significant.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        self.entries.cmp(&other.entries)
    }
}

/// Signed representatives in `{-floor(q/2), ..., floor((q-1)/2)}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalLift(pub Vec<i64>);

impl CanonicalLift {
    pub fn of(v: &ModVector) -> Self {
        Self(
            v.entries
                .iter()
                .map(|&e| lift_residue(e, v.modulus))
                .collect(),
        )
    }

    pub fn linf_norm(&self) -> u64 {
        self.0.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn to_mod(&self, q: u32) -> Result<ModVector> {
        ModVector::from_i64(q, &self.0)
    }
}

/// Canonical signed representative of a residue.
pub fn lift_residue(e: u32, q: u32) -> i64 {
    let e = e as i64;
    let q = q as i64;
    // range {-floor(q/2), ..., floor((q-1)/2)}
    if e > (q - 1) / 2 {
        e - q
    } else {
        e
    }
}

/// Row-major matrix over Z_q with entries in `[0, q)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModMatrix {
    rows: usize,
    cols: usize,
    modulus: u32,
    entries: Vec<u32>,
}

impl ModMatrix {
    pub fn new(rows: usize, cols: usize, modulus: u32, entries: Vec<u32>) -> Result<Self> {
        check_modulus(modulus)?;
        if rows * cols != entries.len() {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(&bad) = entries.iter().find(|&&e| e >= modulus) {
            return Err(Error::EntryOutOfRange {
                value: bad as i64,
                modulus,
            });
        }
        Ok(Self {
            rows,
            cols,
            modulus,
            entries,
        })
    }

    /// Builds from nested rows of integers, reducing each entry mod q.
    pub fn from_rows_i64(modulus: u32, rows: &[Vec<i64>]) -> Result<Self> {
        check_modulus(modulus)?;
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let entries = rows
            .iter()
            .flat_map(|r| r.iter().map(|&v| reduce(v, modulus)))
            .collect();
        Ok(Self {
            rows: rows.len(),
            cols,
            modulus,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize, modulus: u32) -> Result<Self> {
        Self::new(rows, cols, modulus, vec![0; rows * cols])
    }

    pub fn identity(size: usize, modulus: u32) -> Result<Self> {
        let mut m = Self::zeros(size, size, modulus)?;
        for i in 0..size {
            m.entries[i * size + i] = 1;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.entries[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// Reduces modulo a divisor `d` of the current modulus.
    pub fn reduce_mod(&self, d: u32) -> Result<Self> {
        check_modulus(d)?;
        if !self.modulus.is_multiple_of(d) {
            return Err(Error::Modulus(format!(
                "{d} does not divide {}",
                self.modulus
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            modulus: d,
            entries: self.entries.iter().map(|&e| e % d).collect(),
        })
    }

    /// Computes `A^T s` (length `cols`).
    pub fn transpose_mul(&self, s: &ModVector) -> Result<ModVector> {
        if s.modulus != self.modulus || s.len() != self.rows {
            return Err(Error::Dimension(format!(
                "A^T s with A {}x{} and s of length {}",
                self.rows,
                self.cols,
                s.len()
            )));
        }
        let q = self.modulus as u64;
        let mut out = vec![0u64; self.cols];
        for (r, &sr) in s.entries.iter().enumerate() {
            if sr == 0 {
                continue;
            }
            for (c, o) in out.iter_mut().enumerate() {
                *o = (*o + self.get(r, c) as u64 * sr as u64) % q;
            }
        }
        Ok(ModVector {
            modulus: self.modulus,
            entries: out.into_iter().map(|v| v as u32).collect(),
        })
    }

    /// Vertical stack `[self; other]`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols || self.modulus != other.modulus {
            return Err(Error::Dimension("vstack shape/modulus mismatch".into()));
        }
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            modulus: self.modulus,
            entries,
        })
    }

    /// Horizontal concatenation of blocks with equal row counts.
    pub fn hconcat(blocks: &[ModMatrix]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::Dimension("no blocks".into()))?;
        let rows = first.rows;
        let q = first.modulus;
        if blocks.iter().any(|b| b.rows != rows || b.modulus != q) {
            return Err(Error::Dimension("hconcat shape/modulus mismatch".into()));
        }
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for b in blocks {
                entries.extend_from_slice(b.row(r));
            }
        }
        Ok(Self {
            rows,
            cols,
            modulus: q,
            entries,
        })
    }

    /// Matrix product over Z_q.
    pub fn mat_mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows || self.modulus != other.modulus {
            return Err(Error::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let q = self.modulus as u64;
        let mut entries = vec![0u32; self.rows * other.cols];
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = 0u64;
                for k in 0..self.cols {
                    acc = (acc + self.get(r, k) as u64 * other.get(k, c) as u64) % q;
                }
                entries[r * other.cols + c] = acc as u32;
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            modulus: self.modulus,
            entries,
        })
    }
}

/// `A x mod q`.
pub fn mat_vec_mul(a: &ModMatrix, x: &ModVector) -> Result<ModVector> {
    if a.modulus != x.modulus {
        return Err(Error::Modulus(format!("{} vs {}", a.modulus, x.modulus)));
    }
    if a.cols != x.len() {
        return Err(Error::Dimension(format!(
            "A has {} columns, x has length {}",
            a.cols,
            x.len()
        )));
    }
    let q = a.modulus as u64;
    let entries = (0..a.rows)
        .map(|r| {
            a.row(r)
                .iter()
                .zip(&x.entries)
                .fold(0u64, |acc, (&aij, &xj)| (acc + aij as u64 * xj as u64) % q) as u32
        })
        .collect();
    Ok(ModVector {
        modulus: a.modulus,
        entries,
    })
}

/// Column-contiguous blocks of `width` columns, left to right.
pub fn block_split(a: &ModMatrix, width: usize) -> Result<Vec<ModMatrix>> {
    if width == 0 || !a.cols.is_multiple_of(width) {
        return Err(Error::Dimension(format!(
            "block width {width} does not divide {} columns",
            a.cols
        )));
    }
    let count = a.cols / width;
    Ok((0..count)
        .map(|b| {
            let mut entries = Vec::with_capacity(a.rows * width);
            for r in 0..a.rows {
                entries.extend_from_slice(&a.row(r)[b * width..(b + 1) * width]);
            }
            ModMatrix {
                rows: a.rows,
                cols: width,
                modulus: a.modulus,
                entries,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// GF(2)
// ---------------------------------------------------------------------------

/// Packed GF(2) row.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BitRow(Vec<u64>);

impl BitRow {
    fn zeros(bits: usize) -> Self {
        Self(vec![0; bits.div_ceil(64).max(1)])
    }

    fn from_residues(vals: &[u32]) -> Self {
        let mut row = Self::zeros(vals.len());
        for (i, &v) in vals.iter().enumerate() {
            if v & 1 == 1 {
                row.set(i);
            }
        }
        row
    }

    fn get(&self, i: usize) -> bool {
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn xor_assign(&mut self, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }

    fn lowest_set(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
    }
}

/// Incremental echelon basis used for rank tracking.
#[derive(Debug, Clone)]
struct Gf2Basis {
    rows: Vec<(usize, BitRow)>,
}

impl Gf2Basis {
    fn new() -> Self {
        Self { rows: Vec::new() }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    fn reduce(&self, v: &BitRow) -> BitRow {
        let mut v = v.clone();
        for (pivot, row) in &self.rows {
            if v.get(*pivot) {
                v.xor_assign(row);
            }
        }
        v
    }

    /// Inserts `v`; returns true iff the rank increased.
    fn insert(&mut self, v: &BitRow) -> bool {
        let r = self.reduce(v);
        match r.lowest_set() {
            None => false,
            Some(p) => {
                // keep existing rows reduced at the new pivot
                for (_, row) in self.rows.iter_mut() {
                    if row.get(p) {
                        row.xor_assign(&r);
                    }
                }
                self.rows.push((p, r));
                true
            }
        }
    }
}

fn require_gf2(m: &ModMatrix) -> Result<()> {
    if m.modulus != 2 {
        return Err(Error::Modulus(format!(
            "GF(2) operation on modulus {}",
            m.modulus
        )));
    }
    Ok(())
}

/// Rank over GF(2).
pub fn rank_gf2(m: &ModMatrix) -> Result<usize> {
    require_gf2(m)?;
    let mut basis = Gf2Basis::new();
    for r in 0..m.rows {
        basis.insert(&BitRow::from_residues(m.row(r)));
    }
    Ok(basis.rank())
}

/// Solution set of an affine GF(2) system `M x = t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineSolution {
    pub particular: ModVector,
    /// Basis of `{x : M x = 0}`, one vector per free column in ascending column order.
    pub kernel_basis: Vec<ModVector>,
}

impl AffineSolution {
    /// All `2^k` solutions, in the order of the binary counter over kernel coefficients.
    pub fn enumerate(&self) -> Vec<ModVector> {
        let k = self.kernel_basis.len();
        (0u64..(1u64 << k))
            .map(|mask| {
                let mut x = self.particular.clone();
                for (i, kv) in self.kernel_basis.iter().enumerate() {
                    if (mask >> i) & 1 == 1 {
                        x = x.add(kv).expect("same shape");
                    }
                }
                x
            })
            .collect()
    }
}

/// Solves `M x = t` over GF(2). Returns `Ok(None)` when `t` is outside the image.
pub fn solve_affine_gf2(m: &ModMatrix, t: &ModVector) -> Result<Option<AffineSolution>> {
    require_gf2(m)?;
    if t.modulus != 2 {
        return Err(Error::Modulus("right-hand side must be mod 2".into()));
    }
    if m.rows != t.len() {
        return Err(Error::Dimension(format!(
            "M has {} rows, t has length {}",
            m.rows,
            t.len()
        )));
    }
    let n = m.cols;
    // augmented rows, bit n is the right-hand side
    let mut rows: Vec<BitRow> = (0..m.rows)
        .map(|r| {
            let mut row = BitRow::zeros(n + 1);
            for c in 0..n {
                if m.get(r, c) == 1 {
                    row.set(c);
                }
            }
            if t.entries[r] == 1 {
                row.set(n);
            }
            row
        })
        .collect();

    let mut pivots: Vec<usize> = Vec::new();
    let mut next = 0;
    for col in 0..n {
        let Some(found) = (next..rows.len()).find(|&r| rows[r].get(col)) else {
            continue;
        };
        rows.swap(next, found);
        let pivot_row = rows[next].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != next && row.get(col) {
                row.xor_assign(&pivot_row);
            }
        }
        pivots.push(col);
        next += 1;
        if next == rows.len() {
            break;
        }
    }
    // inconsistent row: 0 = 1
    if rows[next..].iter().any(|r| r.get(n)) {
        return Ok(None);
    }

    let mut particular = vec![0u32; n];
    for (i, &p) in pivots.iter().enumerate() {
        particular[p] = rows[i].get(n) as u32;
    }
    let mut is_pivot = vec![false; n];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let kernel_basis = (0..n)
        .filter(|&c| !is_pivot[c])
        .map(|free| {
            let mut v = vec![0u32; n];
            v[free] = 1;
            for (i, &p) in pivots.iter().enumerate() {
                if rows[i].get(free) {
                    v[p] = 1;
                }
            }
            ModVector {
                modulus: 2,
                entries: v,
            }
        })
        .collect();
    Ok(Some(AffineSolution {
        particular: ModVector {
            modulus: 2,
            entries: particular,
        },
        kernel_basis,
    }))
}

fn unit_row(cols: usize, i: usize) -> BitRow {
    let mut r = BitRow::zeros(cols);
    r.set(i);
    r
}

fn p1_loop(a: &ModMatrix, target_rank: usize) -> Result<Vec<usize>> {
    require_gf2(a)?;
    let mut basis = Gf2Basis::new();
    for r in 0..a.rows {
        basis.insert(&BitRow::from_residues(a.row(r)));
    }
    if basis.rank() != a.rows {
        return Err(Error::NotFullRank {
            rank: basis.rank(),
            rows: a.rows,
        });
    }
    if target_rank > a.cols {
        return Err(Error::Dimension(format!(
            "target rank {target_rank} exceeds {} columns",
            a.cols
        )));
    }
    let mut accepted = Vec::new();
    let mut i = 0;
    while basis.rank() < target_rank {
        if basis.insert(&unit_row(a.cols, i)) {
            accepted.push(i);
        }
        i += 1;
    }
    Ok(accepted)
}

fn unit_rows_matrix(cols: usize, idx: &[usize]) -> ModMatrix {
    let mut entries = vec![0u32; idx.len() * cols];
    for (r, &i) in idx.iter().enumerate() {
        entries[r * cols + i] = 1;
    }
    ModMatrix {
        rows: idx.len(),
        cols,
        modulus: 2,
        entries,
    }
}

/// Appends unit rows `e_0, e_1, ...` in index order, keeping those that raise the
/// rank, until the rank reaches `target_rank`. The first rows are `a` itself.
pub fn extend_full_rank_p1(a: &ModMatrix, target_rank: usize) -> Result<ModMatrix> {
    let accepted = p1_loop(a, target_rank)?;
    a.vstack(&unit_rows_matrix(a.cols, &accepted))
}

/// Returns the unit rows `B` such that `[a; B]` is square-invertible over GF(2).
pub fn extend_to_invertible_p2(a: &ModMatrix) -> Result<ModMatrix> {
    let accepted = p1_loop(a, a.cols)?;
    Ok(unit_rows_matrix(a.cols, &accepted))
}

// ---------------------------------------------------------------------------
// Prime-field elimination (small dense entries)
// ---------------------------------------------------------------------------

pub fn is_prime(q: u32) -> bool {
    q >= 2 && (2..).take_while(|d| d * d <= q).all(|d| !q.is_multiple_of(d))
}

fn inv_mod_prime(a: u64, p: u64) -> u64 {
    // Fermat
    let mut result = 1u64;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            result = result * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    result
}

/// Solution coset of `M x = t` over a prime field F_p (particular solution plus a
/// kernel basis, free columns ascending). `Ok(None)` when inconsistent.
pub fn solve_affine_mod_prime(m: &ModMatrix, t: &ModVector) -> Result<Option<(ModVector, Vec<ModVector>)>> {
    let p = m.modulus;
    if !is_prime(p) {
        return Err(Error::Modulus(format!("{p} is not prime")));
    }
    if t.modulus != p || t.len() != m.rows {
        return Err(Error::Dimension("right-hand side shape/modulus".into()));
    }
    let pp = p as u64;
    let n = m.cols;
    let mut rows: Vec<Vec<u64>> = (0..m.rows)
        .map(|r| {
            let mut v: Vec<u64> = m.row(r).iter().map(|&e| e as u64).collect();
            v.push(t.entries[r] as u64);
            v
        })
        .collect();
    let mut pivots = Vec::new();
    let mut next = 0;
    for col in 0..n {
        if next == rows.len() {
            break;
        }
        let Some(found) = (next..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(next, found);
        let inv = inv_mod_prime(rows[next][col], pp);
        for v in rows[next].iter_mut() {
            *v = *v * inv % pp;
        }
        let pivot_row = rows[next].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != next && row[col] != 0 {
                let f = row[col];
                for (x, &pv) in row.iter_mut().zip(&pivot_row) {
                    *x = (*x + pp - f * pv % pp) % pp;
                }
            }
        }
        pivots.push(col);
        next += 1;
    }
    if rows[next..].iter().any(|r| r[n] != 0) {
        return Ok(None);
    }
    let mut particular = vec![0u32; n];
    for (i, &c) in pivots.iter().enumerate() {
        particular[c] = rows[i][n] as u32;
    }
    let mut is_pivot = vec![false; n];
    for &c in &pivots {
        is_pivot[c] = true;
    }
    let kernel = (0..n)
        .filter(|&c| !is_pivot[c])
        .map(|free| {
            let mut v = vec![0u32; n];
            v[free] = 1;
            for (i, &c) in pivots.iter().enumerate() {
                v[c] = ((pp - rows[i][free]) % pp) as u32;
            }
            ModVector {
                modulus: p,
                entries: v,
            }
        })
        .collect();
    Ok(Some((
        ModVector {
            modulus: p,
            entries: particular,
        },
        kernel,
    )))
}

// ---------------------------------------------------------------------------
// Instance files
// ---------------------------------------------------------------------------

/// On-disk ISIS instance: `{"q", "n", "m", "A": [[...]], "y"?: [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub q: u32,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<i64>>,
}

/// Validated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub a: ModMatrix,
    pub y: Option<ModVector>,
}

impl Instance {
    pub fn q(&self) -> u32 {
        self.a.modulus()
    }

    pub fn from_file(file: &InstanceFile) -> Result<Self> {
        check_modulus(file.q)?;
        if file.a.len() != file.n {
            return Err(Error::Malformed(format!(
                "A has {} rows but n = {}",
                file.a.len(),
                file.n
            )));
        }
        let mut entries = Vec::with_capacity(file.n * file.m);
        for (r, row) in file.a.iter().enumerate() {
            if row.len() != file.m {
                return Err(Error::Malformed(format!(
                    "row {r} of A has {} entries but m = {}",
                    row.len(),
                    file.m
                )));
            }
            for &v in row {
                if v < 0 || v >= file.q as i64 {
                    return Err(Error::EntryOutOfRange {
                        value: v,
                        modulus: file.q,
                    });
                }
                entries.push(v as u32);
            }
        }
        let a = ModMatrix::new(file.n, file.m, file.q, entries)?;
        let y = match &file.y {
            None => None,
            Some(v) => {
                if v.len() != file.n {
                    return Err(Error::Malformed(format!(
                        "y has length {} but n = {}",
                        v.len(),
                        file.n
                    )));
                }
                if let Some(&bad) = v.iter().find(|&&e| e < 0 || e >= file.q as i64) {
                    return Err(Error::EntryOutOfRange {
                        value: bad,
                        modulus: file.q,
                    });
                }
                Some(ModVector::from_i64(file.q, v)?)
            }
        };
        Ok(Self { a, y })
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            q: self.a.modulus(),
            n: self.a.rows(),
            m: self.a.cols(),
            a: self
                .a
                .to_rows()
                .into_iter()
                .map(|r| r.into_iter().map(i64::from).collect())
                .collect(),
            y: self
                .y
                .as_ref()
                .map(|y| y.entries().iter().map(|&e| e as i64).collect()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("instance serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(rows: &[Vec<i64>]) -> ModMatrix {
        ModMatrix::from_rows_i64(2, rows).unwrap()
    }

    fn v(q: u32, e: &[u32]) -> ModVector {
        ModVector::new(q, e.to_vec()).unwrap()
    }

    #[test]
    fn mat_vec_examples() {
        let a = m2(&[vec![1, 0, 1]]);
        assert_eq!(mat_vec_mul(&a, &v(2, &[1, 1, 0])).unwrap(), v(2, &[1]));
        let id = ModMatrix::identity(3, 4).unwrap();
        let x = v(4, &[3, 1, 2]);
        assert_eq!(mat_vec_mul(&id, &x).unwrap(), x);
        let z = ModMatrix::zeros(2, 3, 4).unwrap();
        assert_eq!(mat_vec_mul(&z, &x).unwrap(), v(4, &[0, 0]));
    }

    #[test]
    fn mat_vec_rejects_mismatch() {
        let a = m2(&[vec![1, 0, 1]]);
        assert!(matches!(
            mat_vec_mul(&a, &v(2, &[1, 1])),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            mat_vec_mul(&a, &v(3, &[1, 1, 1])),
            Err(Error::Modulus(_))
        ));
    }

    #[test]
    fn entries_out_of_range_rejected() {
        assert!(matches!(
            ModVector::new(4, vec![0, 4]),
            Err(Error::EntryOutOfRange { value: 4, modulus: 4 })
        ));
        assert!(ModMatrix::new(1, 2, 3, vec![1]).is_err());
    }

    #[test]
    fn canonical_lift_ranges() {
        let x = v(4, &[0, 1, 2, 3]);
        assert_eq!(x.lift().0, vec![0, 1, -2, -1]);
        let y = v(5, &[0, 1, 2, 3, 4]);
        assert_eq!(y.lift().0, vec![0, 1, 2, -2, -1]);
        assert_eq!(y.lift().to_mod(5).unwrap(), y);
        assert_eq!(x.lift().linf_norm(), 2);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_gf2(&m2(&[vec![1, 0, 1], vec![0, 1, 1]])).unwrap(), 2);
        assert_eq!(rank_gf2(&ModMatrix::zeros(2, 3, 2).unwrap()).unwrap(), 0);
        assert_eq!(rank_gf2(&m2(&[vec![1, 0, 1], vec![1, 0, 1]])).unwrap(), 1);
        assert!(rank_gf2(&ModMatrix::zeros(1, 1, 3).unwrap()).is_err());
    }

    #[test]
    fn solve_affine_examples() {
        let m = m2(&[vec![1, 0, 1]]);
        let sol = solve_affine_gf2(&m, &v(2, &[1])).unwrap().unwrap();
        assert_eq!(sol.particular, v(2, &[1, 0, 0]));
        assert_eq!(sol.kernel_basis, vec![v(2, &[0, 1, 0]), v(2, &[1, 0, 1])]);
        // the affine set has exactly the 4 solutions found by enumeration of Z_2^3
        let mut got: Vec<Vec<u32>> = sol.enumerate().into_iter().map(|x| x.into_entries()).collect();
        got.sort();
        let mut want = Vec::new();
        for mask in 0..8u32 {
            let x = vec![(mask >> 2) & 1, (mask >> 1) & 1, mask & 1];
            if (x[0] + x[2]) % 2 == 1 {
                want.push(x);
            }
        }
        assert_eq!(got, want);

        let full = m2(&[vec![1, 1], vec![0, 1]]);
        let s = solve_affine_gf2(&full, &v(2, &[0, 1])).unwrap().unwrap();
        assert!(s.kernel_basis.is_empty());
        assert_eq!(mat_vec_mul(&full, &s.particular).unwrap(), v(2, &[0, 1]));

        let zero = m2(&[vec![0, 0, 0]]);
        assert_eq!(solve_affine_gf2(&zero, &v(2, &[1])).unwrap(), None);
        assert!(solve_affine_gf2(&zero, &v(2, &[1, 0])).is_err());
    }

    #[test]
    fn p1_examples() {
        let a = m2(&[vec![1, 0, 1]]);
        assert_eq!(
            extend_full_rank_p1(&a, 2).unwrap(),
            m2(&[vec![1, 0, 1], vec![1, 0, 0]])
        );
        assert_eq!(extend_full_rank_p1(&a, 1).unwrap(), a);
        let b = m2(&[vec![1, 0, 0]]);
        assert_eq!(
            extend_full_rank_p1(&b, 2).unwrap(),
            m2(&[vec![1, 0, 0], vec![0, 1, 0]])
        );
        let rank = rank_gf2(&extend_full_rank_p1(&a, 2).unwrap()).unwrap();
        assert_eq!(rank, 2);
        assert!(matches!(
            extend_full_rank_p1(&m2(&[vec![0, 0, 0]]), 2),
            Err(Error::NotFullRank { rank: 0, rows: 1 })
        ));
    }

    #[test]
    fn p2_examples() {
        let a = m2(&[vec![1, 0, 1]]);
        assert_eq!(
            extend_to_invertible_p2(&a).unwrap(),
            m2(&[vec![1, 0, 0], vec![0, 1, 0]])
        );
        // all unit rows e_0, e_1 already present: B is e_2, e_3, e_4
        let a2 = m2(&[vec![1, 0, 0, 0, 0], vec![0, 1, 0, 0, 0]]);
        assert_eq!(
            extend_to_invertible_p2(&a2).unwrap(),
            m2(&[
                vec![0, 0, 1, 0, 0],
                vec![0, 0, 0, 1, 0],
                vec![0, 0, 0, 0, 1]
            ])
        );
        assert!(extend_to_invertible_p2(&m2(&[vec![1, 1, 0], vec![1, 1, 0]])).is_err());
    }

    #[test]
    fn block_split_examples() {
        let a = ModMatrix::from_rows_i64(4, &[(0..9).collect()]).unwrap();
        let blocks = block_split(&a, 3).unwrap();
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[1].row(0), &[3, 0, 1]);
        assert_eq!(ModMatrix::hconcat(&blocks).unwrap(), a);
        assert_eq!(block_split(&a, 9).unwrap(), vec![a.clone()]);
        assert!(block_split(&a, 2).is_err());
    }

    #[test]
    fn prime_solver_matches_gf2() {
        let m = m2(&[vec![1, 0, 1]]);
        let (p, k) = solve_affine_mod_prime(&m, &v(2, &[1])).unwrap().unwrap();
        assert_eq!(p, v(2, &[1, 0, 0]));
        assert_eq!(k.len(), 2);
        let m3 = ModMatrix::from_rows_i64(3, &[vec![1, 2, 0], vec![0, 1, 1]]).unwrap();
        let t = v(3, &[2, 1]);
        let (p, k) = solve_affine_mod_prime(&m3, &t).unwrap().unwrap();
        assert_eq!(mat_vec_mul(&m3, &p).unwrap(), t);
        for kv in k {
            assert_eq!(mat_vec_mul(&m3, &kv).unwrap(), v(3, &[0, 0]));
        }
    }

    #[test]
    fn instance_roundtrip_and_validation() {
        let text = r#"{"q":4,"n":1,"m":3,"A":[[1,2,3]],"y":[2]}"#;
        let inst = Instance::from_json(text).unwrap();
        assert_eq!(inst.a.row(0), &[1, 2, 3]);
        assert_eq!(Instance::from_json(&inst.to_json()).unwrap(), inst);
        let bad = r#"{"q":4,"n":1,"m":3,"A":[[1,2,4]]}"#;
        assert!(matches!(
            Instance::from_json(bad),
            Err(Error::EntryOutOfRange { value: 4, .. })
        ));
        let neg = r#"{"q":4,"n":1,"m":3,"A":[[1,-1,0]]}"#;
        assert!(Instance::from_json(neg).is_err());
        let ragged = r#"{"q":4,"n":1,"m":3,"A":[[1,1]]}"#;
        assert!(matches!(Instance::from_json(ragged), Err(Error::Malformed(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use std::collections::BTreeSet;

        fn gf2_matrix(max_r: usize, max_c: usize) -> impl Strategy<Value = ModMatrix> {
            (1..=max_r, 1..=max_c).prop_flat_map(|(r, c)| {
                proptest::collection::vec(0u32..2, r * c)
                    .prop_map(move |e| ModMatrix::new(r, c, 2, e).unwrap())
            })
        }

        fn all_vectors(len: usize) -> Vec<ModVector> {
            (0u32..(1 << len))
                .map(|mask| {
                    ModVector::new(2, (0..len).map(|i| (mask >> (len - 1 - i)) & 1).collect()).unwrap()
                })
                .collect()
        }

        proptest! {
            #[test]
            fn rank_matches_row_space_size(m in gf2_matrix(4, 6)) {
                // |row space| = 2^rank
                let mut span = BTreeSet::new();
                for mask in 0u32..(1 << m.rows()) {
                    let mut acc = vec![0u32; m.cols()];
                    for r in 0..m.rows() {
                        if (mask >> r) & 1 == 1 {
                            for (a, &e) in acc.iter_mut().zip(m.row(r)) {
                                *a ^= e;
                            }
                        }
                    }
                    span.insert(acc);
                }
                let rank = rank_gf2(&m).unwrap();
                prop_assert_eq!(1usize << rank, span.len());
            }

            #[test]
            fn affine_solution_matches_enumeration(
                m in gf2_matrix(5, 8),
                seed in any::<u64>(),
            ) {
                let t_entries: Vec<u32> = (0..m.rows()).map(|i| ((seed >> i) & 1) as u32).collect();
                let t = ModVector::new(2, t_entries).unwrap();
                let want: BTreeSet<Vec<u32>> = all_vectors(m.cols())
                    .into_iter()
                    .filter(|x| mat_vec_mul(&m, x).unwrap() == t)
                    .map(|x| x.into_entries())
                    .collect();
                match solve_affine_gf2(&m, &t).unwrap() {
                    None => prop_assert!(want.is_empty()),
                    Some(sol) => {
                        let got: BTreeSet<Vec<u32>> =
                            sol.enumerate().into_iter().map(|x| x.into_entries()).collect();
                        prop_assert_eq!(got.len(), 1 << sol.kernel_basis.len());
                        prop_assert_eq!(got, want);
                    }
                }
            }

            #[test]
            fn p1_reaches_target(m in gf2_matrix(3, 6), extra in 0usize..4) {
                prop_assume!(rank_gf2(&m).unwrap() == m.rows());
                let target = (m.rows() + extra).min(m.cols());
                let ext = extend_full_rank_p1(&m, target).unwrap();
                prop_assert_eq!(ext.rows(), target);
                prop_assert_eq!(rank_gf2(&ext).unwrap(), target);
                let b = extend_to_invertible_p2(&m).unwrap();
                prop_assert_eq!(rank_gf2(&m.vstack(&b).unwrap()).unwrap(), m.cols());
            }
        }
    }
}
