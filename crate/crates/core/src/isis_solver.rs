//! Recursive ISIS solver for `q = 2^l`, `T = Z_2^m`, `m = (2n+1)^l`, with exact
//! randomness recovery and brute-force audit helpers.
//!
//! Tape layout per level: shares `y_1 .. y_{m'-1}` (n bits each, coordinate 0
//! first), then pads `u_1 .. u_{m'}` in block order, then the tape of the reduced
//! instance. At the last level the `n+1` bits of `u` are read coordinate 0 first.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::Serialize;

use crate::caps::{check, dense_cap, pow_u128};
use crate::error::{Error, Result};
use crate::modq::{
    block_split, extend_full_rank_p1, extend_to_invertible_p2, mat_vec_mul, rank_gf2,
    solve_affine_gf2, ModMatrix, ModVector,
};
use crate::rng::fork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SolverParams {
    pub n: usize,
    pub l: u32,
}

impl SolverParams {
    pub fn new(n: usize, l: u32) -> Result<Self> {
        if n == 0 || l == 0 || l > 16 {
            return Err(Error::OutOfRange(format!("n = {n}, l = {l}")));
        }
        let p = Self { n, l };
        check("solver width m", pow_u128(2 * n as u64 + 1, l as usize), 1 << 30)?;
        Ok(p)
    }

    pub fn q(&self) -> u32 {
        1 << self.l
    }

    pub fn m(&self) -> usize {
        (2 * self.n + 1).pow(self.l)
    }

    pub fn tape_length(&self) -> usize {
        self.m() - self.n * self.l as usize
    }

    fn check_instance(&self, a: &ModMatrix, y: &ModVector) -> Result<()> {
        if a.modulus() != self.q() || y.modulus() != self.q() {
            return Err(Error::Modulus(format!(
                "solver expects modulus {}, got A mod {} and y mod {}",
                self.q(),
                a.modulus(),
                y.modulus()
            )));
        }
        if a.rows() != self.n || a.cols() != self.m() || y.len() != self.n {
            return Err(Error::Dimension(format!(
                "solver expects A {}x{} and y of length {}",
                self.n,
                self.m(),
                self.n
            )));
        }
        Ok(())
    }
}

/// `m - n l`.
pub fn tape_length(params: &SolverParams) -> usize {
    params.tape_length()
}

/// Randomness tape with a read cursor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SolverTape {
    bits: Vec<u8>,
    cursor: usize,
}

impl SolverTape {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Malformed("tape bits must be 0 or 1".into()));
        }
        Ok(Self { bits, cursor: 0 })
    }

    /// Tape number `index` of the given length, bit 0 being the most significant.
    pub fn from_index(index: u64, len: usize) -> Self {
        let bits = (0..len)
            .map(|i| ((index >> (len - 1 - i)) & 1) as u8)
            .collect();
        Self { bits, cursor: 0 }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self {
            bits: (0..len).map(|_| rng.random::<bool>() as u8).collect(),
            cursor: 0,
        }
    }

    /// Hex with the first bit as the most significant bit of the first digit;
    /// the final digit is zero-padded.
    pub fn to_hex(&self) -> String {
        self.bits
            .chunks(4)
            .map(|c| {
                let mut v = 0u8;
                for i in 0..4 {
                    v = (v << 1) | c.get(i).copied().unwrap_or(0);
                }
                char::from_digit(v as u32, 16).expect("nibble")
            })
            .collect()
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self> {
        let hex = hex.trim();
        if hex.len() != len.div_ceil(4) {
            return Err(Error::TapeLength {
                got: hex.len() * 4,
                expected: len,
            });
        }
        let mut bits = Vec::with_capacity(hex.len() * 4);
        for ch in hex.chars() {
            let v = ch
                .to_digit(16)
                .ok_or_else(|| Error::Malformed(format!("bad hex digit {ch:?}")))?;
            for i in (0..4).rev() {
                bits.push(((v >> i) & 1) as u8);
            }
        }
        if bits[len..].iter().any(|&b| b != 0) {
            return Err(Error::Malformed("nonzero padding bits".into()));
        }
        bits.truncate(len);
        Ok(Self { bits, cursor: 0 })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Tape as a binary number (first bit most significant); only for lengths ≤ 64.
    pub fn index(&self) -> u64 {
        self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    fn take(&mut self, k: usize) -> Result<Vec<u32>> {
        if self.cursor + k > self.bits.len() {
            return Err(Error::Invariant("tape exhausted".into()));
        }
        let out = self.bits[self.cursor..self.cursor + k]
            .iter()
            .map(|&b| b as u32)
            .collect();
        self.cursor += k;
        Ok(out)
    }

    fn rewound(&self) -> Self {
        Self {
            bits: self.bits.clone(),
            cursor: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverOutput {
    Solution(ModVector),
    /// Abort carries the full input tape.
    Abort(SolverTape),
}

impl SolverOutput {
    pub fn is_abort(&self) -> bool {
        matches!(self, SolverOutput::Abort(_))
    }

    pub fn solution(&self) -> Option<&ModVector> {
        match self {
            SolverOutput::Solution(x) => Some(x),
            SolverOutput::Abort(_) => None,
        }
    }
}

/// Per-level record of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelTrace {
    pub modulus: u32,
    pub shares: Vec<Vec<u32>>,
    pub pads: Vec<Vec<u32>>,
    pub block_solutions: Vec<(Vec<u32>, Vec<u32>)>,
    /// Offsets `z_i` as residues mod the level modulus (integer entries -1, 0, 1).
    pub offsets: Vec<Vec<u32>>,
    pub x: Vec<u32>,
    pub reduced_a: Option<Vec<Vec<u32>>>,
    pub reduced_y: Option<Vec<u32>>,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SolverTrace {
    pub levels: Vec<LevelTrace>,
    pub consumed_bits: usize,
}

/// A randomized ISIS solver whose tape is recomputable from its output.
pub trait RecoverableSolver: Send + Sync {
    fn params(&self) -> SolverParams;

    fn tape_length(&self) -> usize {
        self.params().tape_length()
    }

    fn solve(&self, a: &ModMatrix, y: &ModVector, tape: &SolverTape) -> Result<SolverOutput>;

    fn recover(&self, a: &ModMatrix, y: &ModVector, x: &ModVector) -> Result<SolverTape>;
}

#[derive(Debug, Clone, Copy)]
pub struct RecursiveSolver {
    pub params: SolverParams,
}

impl RecursiveSolver {
    pub fn new(params: SolverParams) -> Self {
        Self { params }
    }

    pub fn solve_traced(
        &self,
        a: &ModMatrix,
        y: &ModVector,
        tape: &SolverTape,
    ) -> Result<(SolverOutput, SolverTrace)> {
        self.params.check_instance(a, y)?;
        let expected = self.params.tape_length();
        if tape.len() != expected {
            return Err(Error::TapeLength {
                got: tape.len(),
                expected,
            });
        }
        let mut cursor = tape.rewound();
        let mut trace = SolverTrace::default();
        let out = solve_level(a, y, self.params.n, self.params.l, &mut cursor, &mut trace)?;
        trace.consumed_bits = cursor.cursor;
        match out {
            None => Ok((SolverOutput::Abort(tape.rewound()), trace)),
            Some(x) => {
                if cursor.cursor != expected {
                    return Err(Error::Invariant(format!(
                        "consumed {} of {expected} tape bits",
                        cursor.cursor
                    )));
                }
                if x.entries().iter().any(|&e| e > 1) || mat_vec_mul(a, &x)? != *y {
                    return Err(Error::Invariant("solver produced an invalid solution".into()));
                }
                Ok((SolverOutput::Solution(x), trace))
            }
        }
    }
}

impl RecoverableSolver for RecursiveSolver {
    fn params(&self) -> SolverParams {
        self.params
    }

    fn solve(&self, a: &ModMatrix, y: &ModVector, tape: &SolverTape) -> Result<SolverOutput> {
        self.solve_traced(a, y, tape).map(|(o, _)| o)
    }

    fn recover(&self, a: &ModMatrix, y: &ModVector, x: &ModVector) -> Result<SolverTape> {
        recover(&self.params, a, y, x)
    }
}

/// Test stub that aborts on every input.
#[derive(Debug, Clone, Copy)]
pub struct AlwaysAbortSolver {
    pub params: SolverParams,
}

impl RecoverableSolver for AlwaysAbortSolver {
    fn params(&self) -> SolverParams {
        self.params
    }

    fn solve(&self, a: &ModMatrix, y: &ModVector, tape: &SolverTape) -> Result<SolverOutput> {
        self.params.check_instance(a, y)?;
        if tape.len() != self.params.tape_length() {
            return Err(Error::TapeLength {
                got: tape.len(),
                expected: self.params.tape_length(),
            });
        }
        Ok(SolverOutput::Abort(tape.rewound()))
    }

    fn recover(&self, _a: &ModMatrix, _y: &ModVector, _x: &ModVector) -> Result<SolverTape> {
        Err(Error::NotReachable)
    }
}

/// Blocks extended to rank `2n` (or `[A; B]` at the last level); `None` when some
/// block is rank deficient.
enum LevelPlan {
    Base { stacked: ModMatrix },
    Split { extended: Vec<ModMatrix> },
}

fn plan_level(a: &ModMatrix, n: usize, l: u32) -> Result<Option<LevelPlan>> {
    let a2 = a.reduce_mod(2)?;
    if l == 1 {
        if rank_gf2(&a2)? < n {
            return Ok(None);
        }
        let b = extend_to_invertible_p2(&a2)?;
        return Ok(Some(LevelPlan::Base {
            stacked: a2.vstack(&b)?,
        }));
    }
    let blocks = block_split(&a2, 2 * n + 1)?;
    let mut extended = Vec::with_capacity(blocks.len());
    for b in &blocks {
        if rank_gf2(b)? < n {
            return Ok(None);
        }
        extended.push(extend_full_rank_p1(b, 2 * n)?);
    }
    Ok(Some(LevelPlan::Split { extended }))
}

/// Whether every top-level mod-2 block of `A` has full row rank, i.e. the
/// solver cannot abort at the first level.
pub fn top_level_full_rank(a: &ModMatrix, n: usize, l: u32) -> Result<bool> {
    Ok(plan_level(a, n, l)?.is_some())
}

/// The two solutions of `Ã x = t` in lexicographic order and their integer offset.
fn block_pair(ext: &ModMatrix, t: &[u32], q: u32) -> Result<(Vec<u32>, Vec<u32>, Vec<u32>)> {
    let tv = ModVector::new(2, t.to_vec())?;
    let sol = solve_affine_gf2(ext, &tv)?
        .ok_or_else(|| Error::Invariant("extended block system inconsistent".into()))?;
    if sol.kernel_basis.len() != 1 {
        return Err(Error::Invariant(format!(
            "extended block has kernel of dimension {}",
            sol.kernel_basis.len()
        )));
    }
    let s1 = sol.particular.clone().into_entries();
    let s2 = sol.particular.add(&sol.kernel_basis[0])?.into_entries();
    let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
    let z: Vec<u32> = lo
        .iter()
        .zip(&hi)
        .map(|(&a, &b)| ((b as i64 - a as i64).rem_euclid(q as i64)) as u32)
        .collect();
    if z.iter().all(|&v| v == 0) {
        return Err(Error::Invariant("zero block offset".into()));
    }
    Ok((lo, hi, z))
}

/// `A' = (A Z)/2 mod q/2` and `y' = (y - A x)/2 mod q/2`, with `Z` block diagonal.
fn reduce_instance(
    a: &ModMatrix,
    y: &ModVector,
    x: &ModVector,
    offsets: &[Vec<u32>],
    n: usize,
) -> Result<(ModMatrix, ModVector)> {
    let q = a.modulus();
    let w = 2 * n + 1;
    let half = q / 2;
    let mut entries = Vec::with_capacity(n * offsets.len());
    for r in 0..n {
        for (i, z) in offsets.iter().enumerate() {
            let v = (0..w).fold(0u64, |acc, k| {
                (acc + a.get(r, i * w + k) as u64 * z[k] as u64) % q as u64
            }) as u32;
            if !v.is_multiple_of(2) {
                return Err(Error::Invariant("A Z is not even".into()));
            }
            entries.push((v / 2) % half);
        }
    }
    let a_red = ModMatrix::new(n, offsets.len(), half, entries)?;
    let diff = y.sub(&mat_vec_mul(a, x)?)?;
    if diff.entries().iter().any(|&v| v % 2 != 0) {
        return Err(Error::Invariant("y - A x is not even".into()));
    }
    let y_red = ModVector::new(half, diff.entries().iter().map(|&v| (v / 2) % half).collect())?;
    Ok((a_red, y_red))
}

fn solve_level(
    a: &ModMatrix,
    y: &ModVector,
    n: usize,
    l: u32,
    tape: &mut SolverTape,
    trace: &mut SolverTrace,
) -> Result<Option<ModVector>> {
    let q = a.modulus();
    let mut lt = LevelTrace {
        modulus: q,
        shares: vec![],
        pads: vec![],
        block_solutions: vec![],
        offsets: vec![],
        x: vec![],
        reduced_a: None,
        reduced_y: None,
        aborted: false,
    };
    let Some(plan) = plan_level(a, n, l)? else {
        lt.aborted = true;
        trace.levels.push(lt);
        return Ok(None);
    };
    match plan {
        LevelPlan::Base { stacked } => {
            let u = tape.take(n + 1)?;
            let mut t = y.reduce_mod(2)?.into_entries();
            t.extend_from_slice(&u);
            let sol = solve_affine_gf2(&stacked, &ModVector::new(2, t)?)?
                .ok_or_else(|| Error::Invariant("invertible system inconsistent".into()))?;
            let x = ModVector::new(q, sol.particular.into_entries())?;
            lt.pads.push(u);
            lt.x = x.entries().to_vec();
            trace.levels.push(lt);
            Ok(Some(x))
        }
        LevelPlan::Split { extended } => {
            let mp = extended.len();
            let y2 = y.reduce_mod(2)?.into_entries();
            let mut shares = Vec::with_capacity(mp);
            let mut last = y2.clone();
            for _ in 0..mp - 1 {
                let s = tape.take(n)?;
                for (l, &b) in last.iter_mut().zip(&s) {
                    *l ^= b;
                }
                shares.push(s);
            }
            shares.push(last);
            let pads: Vec<Vec<u32>> = (0..mp).map(|_| tape.take(n)).collect::<Result<_>>()?;

            let mut x_entries = Vec::with_capacity(a.cols());
            let mut offsets = Vec::with_capacity(mp);
            for (i, ext) in extended.iter().enumerate() {
                let mut t = shares[i].clone();
                t.extend_from_slice(&pads[i]);
                let (lo, hi, z) = block_pair(ext, &t, q)?;
                x_entries.extend_from_slice(&lo);
                lt.block_solutions.push((lo, hi));
                offsets.push(z);
            }
            let x = ModVector::new(q, x_entries)?;
            let (a_red, y_red) = reduce_instance(a, y, &x, &offsets, n)?;
            lt.shares = shares;
            lt.pads = pads;
            lt.offsets = offsets.clone();
            lt.x = x.entries().to_vec();
            lt.reduced_a = Some(a_red.to_rows());
            lt.reduced_y = Some(y_red.entries().to_vec());
            trace.levels.push(lt);

            let Some(xp) = solve_level(&a_red, &y_red, n, l - 1, tape, trace)? else {
                return Ok(None);
            };
            let w = 2 * n + 1;
            let mut xf = x.into_entries();
            for (i, z) in offsets.iter().enumerate() {
                if xp.entries()[i] == 1 {
                    for k in 0..w {
                        xf[i * w + k] = (xf[i * w + k] + z[k]) % q;
                    }
                }
            }
            Ok(Some(ModVector::new(q, xf)?))
        }
    }
}

/// Reconstructs the unique tape producing `x` on `(a, y)`.
pub fn recover(params: &SolverParams, a: &ModMatrix, y: &ModVector, x: &ModVector) -> Result<SolverTape> {
    params.check_instance(a, y)?;
    if x.modulus() != params.q() || x.len() != params.m() {
        return Err(Error::InvalidSolution("shape or modulus".into()));
    }
    if x.entries().iter().any(|&e| e > 1) {
        return Err(Error::InvalidSolution("not binary".into()));
    }
    if mat_vec_mul(a, x)? != *y {
        return Err(Error::InvalidSolution("A x != y".into()));
    }
    let mut bits = Vec::with_capacity(params.tape_length());
    recover_level(a, y, x, params.n, params.l, &mut bits)?;
    if bits.len() != params.tape_length() {
        return Err(Error::Invariant("recovered tape has wrong length".into()));
    }
    SolverTape::new(bits)
}

fn recover_level(
    a: &ModMatrix,
    y: &ModVector,
    xf: &ModVector,
    n: usize,
    l: u32,
    bits: &mut Vec<u8>,
) -> Result<()> {
    let q = a.modulus();
    let plan = plan_level(a, n, l)?.ok_or(Error::NotReachable)?;
    let x2 = xf.reduce_mod(2)?;
    match plan {
        LevelPlan::Base { stacked } => {
            let t = mat_vec_mul(&stacked, &x2)?;
            bits.extend(t.entries()[n..].iter().map(|&b| b as u8));
            Ok(())
        }
        LevelPlan::Split { extended } => {
            let w = 2 * n + 1;
            let mut shares = Vec::new();
            let mut pads = Vec::new();
            let mut x_entries = Vec::with_capacity(a.cols());
            let mut offsets = Vec::new();
            let mut xp = Vec::with_capacity(extended.len());
            for (i, ext) in extended.iter().enumerate() {
                let block = ModVector::new(2, x2.entries()[i * w..(i + 1) * w].to_vec())?;
                let t = mat_vec_mul(ext, &block)?.into_entries();
                let (lo, hi, z) = block_pair(ext, &t, q)?;
                let actual = &xf.entries()[i * w..(i + 1) * w];
                xp.push(if actual == lo.as_slice() {
                    0
                } else if actual == hi.as_slice() {
                    1
                } else {
                    return Err(Error::Invariant("block matches neither solution".into()));
                });
                shares.push(t[..n].to_vec());
                pads.push(t[n..].to_vec());
                x_entries.extend_from_slice(&lo);
                offsets.push(z);
            }
            for s in &shares[..shares.len() - 1] {
                bits.extend(s.iter().map(|&b| b as u8));
            }
            for p in &pads {
                bits.extend(p.iter().map(|&b| b as u8));
            }
            let x = ModVector::new(q, x_entries)?;
            let (a_red, y_red) = reduce_instance(a, y, &x, &offsets, n)?;
            let xp = ModVector::new(q / 2, xp)?;
            recover_level(&a_red, &y_red, &xp, n, l - 1, bits)
        }
    }
}

/// `{x in {0,1}^m : A x = y mod q}`, sorted lexicographically.
pub fn enumerate_solutions(a: &ModMatrix, y: &ModVector) -> Result<Vec<ModVector>> {
    let q = a.modulus();
    let (n, m) = (a.rows(), a.cols());
    if y.len() != n || y.modulus() != q {
        return Err(Error::Dimension("y does not match A".into()));
    }
    let col = |k: usize| -> Vec<u32> { (0..n).map(|r| a.get(r, k)).collect() };
    let add = |acc: &mut [u32], c: &[u32]| {
        for (x, &v) in acc.iter_mut().zip(c) {
            *x = (*x + v) % q;
        }
    };
    // syndromes of all binary vectors on the columns [lo, hi), indexed by mask with
    // the first column as the most significant bit
    let half_table = |lo: usize, hi: usize| -> Result<Vec<Vec<u32>>> {
        let size = check("binary half-space", pow_u128(2, hi - lo), dense_cap())?;
        let mut table = vec![vec![0u32; n]];
        table.reserve(size);
        for k in lo..hi {
            let c = col(k);
            table = table
                .into_iter()
                .flat_map(|s| {
                    let mut t = s.clone();
                    add(&mut t, &c);
                    [s, t]
                })
                .collect();
        }
        Ok(table)
    };
    let to_vec = |mask: u64, len: usize| -> Vec<u32> {
        (0..len).map(|i| ((mask >> (len - 1 - i)) & 1) as u32).collect()
    };
    let target = y.entries();
    let mut out = Vec::new();
    if m <= 20 {
        for (mask, s) in half_table(0, m)?.iter().enumerate() {
            if s == target {
                out.push(ModVector::new(q, to_vec(mask as u64, m))?);
            }
        }
        return Ok(out);
    }
    let h = m / 2;
    let left = half_table(0, h)?;
    let right = half_table(h, m)?;
    let mut by_syndrome: HashMap<&[u32], Vec<usize>> = HashMap::new();
    for (mask, s) in right.iter().enumerate() {
        by_syndrome.entry(s.as_slice()).or_default().push(mask);
    }
    for (lmask, s) in left.iter().enumerate() {
        let need: Vec<u32> = target
            .iter()
            .zip(s)
            .map(|(&t, &v)| (t + q - v) % q)
            .collect();
        if let Some(rs) = by_syndrome.get(need.as_slice()) {
            for &rmask in rs {
                if out.len() >= dense_cap() {
                    return Err(Error::CapExceeded {
                        what: "solution list".into(),
                        needed: out.len() as u128 + 1,
                        cap: dense_cap(),
                    });
                }
                let mut v = to_vec(lmask as u64, h);
                v.extend(to_vec(rmask as u64, m - h));
                out.push(ModVector::new(q, v)?);
            }
        }
    }
    Ok(out)
}

/// Output distribution of the solver over all tapes for one `y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityAudit {
    pub y: Vec<u32>,
    pub num_tapes: u64,
    pub num_solutions: usize,
    pub abort_mass: f64,
    /// Total-variation distance between the output law and uniform on solutions.
    pub epsilon: f64,
    /// Classical fidelity `sum sqrt(p u)`.
    pub fidelity: f64,
    pub coverage: f64,
    pub fuchs_van_de_graaf: bool,
    /// Tape counts per produced solution, in lexicographic order of the solution.
    #[serde(skip)]
    pub counts: BTreeMap<Vec<u32>, u64>,
}

/// Runs every tape, compares the output law with uniform on the solution set.
pub fn uniformity_audit(
    solver: &dyn RecoverableSolver,
    a: &ModMatrix,
    y: &ModVector,
) -> Result<UniformityAudit> {
    let len = solver.tape_length();
    let num_tapes = check("tape space", pow_u128(2, len), dense_cap())? as u64;
    let solutions = enumerate_solutions(a, y)?;
    let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    let mut aborts = 0u64;
    for t in 0..num_tapes {
        match solver.solve(a, y, &SolverTape::from_index(t, len))? {
            SolverOutput::Abort(_) => aborts += 1,
            SolverOutput::Solution(x) => *counts.entry(x.into_entries()).or_default() += 1,
        }
    }
    let total = num_tapes as f64;
    let abort_mass = aborts as f64 / total;
    if solutions.is_empty() {
        return Ok(UniformityAudit {
            y: y.entries().to_vec(),
            num_tapes,
            num_solutions: 0,
            abort_mass,
            epsilon: 1.0,
            fidelity: 0.0,
            coverage: 0.0,
            fuchs_van_de_graaf: true,
            counts,
        });
    }
    let u = 1.0 / solutions.len() as f64;
    let mut tv = abort_mass;
    let mut fidelity = 0.0;
    let mut hit = 0usize;
    for s in &solutions {
        let p = counts.get(s.entries()).copied().unwrap_or(0) as f64 / total;
        tv += (p - u).abs();
        fidelity += (p * u).sqrt();
        hit += (p > 0.0) as usize;
    }
    // any produced x outside the solution list would be an invalid output
    let outside: u64 = counts
        .iter()
        .filter(|(x, _)| solutions.binary_search_by(|s| s.entries().cmp(x)).is_err())
        .map(|(_, &c)| c)
        .sum();
    if outside > 0 {
        return Err(Error::Invariant("solver produced a non-solution".into()));
    }
    let epsilon = tv / 2.0;
    Ok(UniformityAudit {
        y: y.entries().to_vec(),
        num_tapes,
        num_solutions: solutions.len(),
        abort_mass,
        epsilon,
        fidelity,
        coverage: hit as f64 / solutions.len() as f64,
        fuchs_van_de_graaf: fidelity >= 1.0 - epsilon - 1e-12,
        counts,
    })
}

/// Monte-Carlo abort rate with a Wilson 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbortEstimate {
    pub trials: u64,
    pub aborts: u64,
    pub rate: f64,
    pub ci95: (f64, f64),
    /// Rate predicted from independent uniform GF(2) blocks at every level.
    pub predicted: f64,
}

/// Wilson score interval at `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Probability that a uniform `n x (2n+1)` GF(2) matrix has rank below `n`.
pub fn block_deficiency_probability(n: usize) -> f64 {
    let w = 2 * n as i32 + 1;
    1.0 - (0..n as i32)
        .map(|i| 1.0 - 2f64.powi(i - w))
        .product::<f64>()
}

/// Same probability by enumerating every `n x (2n+1)` GF(2) matrix.
pub fn block_deficiency_exhaustive(n: usize) -> Result<f64> {
    let w = 2 * n + 1;
    let total = check("GF(2) block space", pow_u128(2, n * w), dense_cap())? as u64;
    let mut deficient = 0u64;
    for bits in 0..total {
        let entries = (0..n * w).map(|k| ((bits >> k) & 1) as u32).collect();
        if rank_gf2(&ModMatrix::new(n, w, 2, entries)?)? < n {
            deficient += 1;
        }
    }
    Ok(deficient as f64 / total as f64)
}

/// Abort probability when every level's blocks are independent and uniform:
/// `1 - (1 - b)^{sum_k (2n+1)^k}` over `k = 0..l`.
pub fn predicted_abort_probability(params: &SolverParams) -> f64 {
    let b = block_deficiency_probability(params.n);
    let blocks: u32 = (0..params.l).map(|k| (2 * params.n as u32 + 1).pow(k)).sum();
    1.0 - (1.0 - b).powi(blocks as i32)
}

pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, q: u32, rng: &mut R) -> Result<ModMatrix> {
    ModMatrix::new(rows, cols, q, (0..rows * cols).map(|_| rng.random_range(0..q)).collect())
}

pub fn random_vector<R: Rng + ?Sized>(len: usize, q: u32, rng: &mut R) -> Result<ModVector> {
    ModVector::new(q, (0..len).map(|_| rng.random_range(0..q)).collect())
}

/// Samples uniform `A`, `y`, and tape per trial and counts aborts.
pub fn abort_probability(params: &SolverParams, trials: u64, seed: u64) -> Result<AbortEstimate> {
    if trials == 0 {
        return Err(Error::OutOfRange("trials must be at least 1".into()));
    }
    let solver = RecursiveSolver::new(*params);
    let mut rng = fork(seed, "abort-rate");
    let mut aborts = 0;
    for _ in 0..trials {
        let a = random_matrix(params.n, params.m(), params.q(), &mut rng)?;
        let y = random_vector(params.n, params.q(), &mut rng)?;
        let tape = SolverTape::random(params.tape_length(), &mut rng);
        if solver.solve(&a, &y, &tape)?.is_abort() {
            aborts += 1;
        }
    }
    Ok(AbortEstimate {
        trials,
        aborts,
        rate: aborts as f64 / trials as f64,
        ci95: wilson_interval(aborts, trials, 1.96),
        predicted: predicted_abort_probability(params),
    })
}
