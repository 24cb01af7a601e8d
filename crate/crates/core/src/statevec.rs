//! Dense complex state vectors over mixed-radix register layouts.
//!
//! Index order: registers in declaration order, digits inside a register most
//! significant first. A register may carry one extra "bottom" value (the abort
//! symbol), stored as register value `prod(radices)`; QFTs and shifts fix it.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::Rng;

use crate::amplitude::{dft_axis, twiddles, Direction, C64};
use crate::caps::{check, pow_u128, state_cap};
use crate::error::{Error, Result};

const ZERO: C64 = Complex64::new(0.0, 0.0);

pub const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub radices: Vec<u32>,
    pub bottom: bool,
}

impl Register {
    /// `count` digits of radix `q` (a `Z_q^count` register).
    pub fn zq(name: &str, q: u32, count: usize) -> Self {
        Self {
            name: name.to_string(),
            radices: vec![q; count],
            bottom: false,
        }
    }

    pub fn with_bottom(mut self) -> Self {
        self.bottom = true;
        self
    }

    /// Number of non-bottom values.
    pub fn regular_dim(&self) -> usize {
        self.radices.iter().map(|&r| r as usize).product()
    }

    pub fn dim(&self) -> usize {
        self.regular_dim() + self.bottom as usize
    }

    pub fn bottom_value(&self) -> Option<usize> {
        self.bottom.then(|| self.regular_dim())
    }

    /// Digits of a register value; `None` for the bottom slot.
    pub fn digits(&self, mut value: usize) -> Option<Vec<u32>> {
        if value >= self.regular_dim() {
            return None;
        }
        let mut out = vec![0u32; self.radices.len()];
        for (d, &r) in out.iter_mut().zip(&self.radices).rev() {
            *d = (value % r as usize) as u32;
            value /= r as usize;
        }
        Some(out)
    }

    pub fn value(&self, digits: &[u32]) -> usize {
        digits
            .iter()
            .zip(&self.radices)
            .fold(0usize, |acc, (&d, &r)| acc * r as usize + d as usize)
    }

    fn uniform_radix(&self) -> Result<u32> {
        let q = *self
            .radices
            .first()
            .ok_or_else(|| Error::Dimension(format!("register {} has no digits", self.name)))?;
        if self.radices.iter().any(|&r| r != q) {
            return Err(Error::Dimension(format!(
                "register {} mixes radices",
                self.name
            )));
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterLayout {
    registers: Vec<Register>,
}

impl RegisterLayout {
    pub fn new(registers: Vec<Register>) -> Result<Self> {
        let total = registers
            .iter()
            .fold(1u128, |acc, r| acc.saturating_mul(r.dim() as u128));
        check("state vector", total, state_cap())?;
        Ok(Self { registers })
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn register(&self, id: usize) -> Result<&Register> {
        self.registers.get(id).ok_or(Error::RegisterNotFound(id))
    }

    pub fn dim(&self) -> usize {
        self.registers.iter().map(|r| r.dim()).product()
    }

    /// Product of the dimensions of the registers after `id`.
    pub fn stride(&self, id: usize) -> usize {
        self.registers[id + 1..].iter().map(|r| r.dim()).product()
    }

    pub fn encode(&self, values: &[usize]) -> usize {
        values
            .iter()
            .zip(&self.registers)
            .fold(0usize, |acc, (&v, r)| acc * r.dim() + v)
    }

    pub fn decode_into(&self, mut index: usize, out: &mut [usize]) {
        for (o, r) in out.iter_mut().zip(&self.registers).rev() {
            *o = index % r.dim();
            index /= r.dim();
        }
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.registers.len()];
        self.decode_into(index, &mut out);
        out
    }

    fn without(&self, id: usize) -> Self {
        let mut registers = self.registers.clone();
        registers.remove(id);
        Self { registers }
    }

    /// Header line used by state dumps: registers separated by `|`, radices by
    /// `,`, a trailing `,*` marks a bottom slot.
    pub fn header(&self) -> String {
        self.registers
            .iter()
            .map(|r| {
                let mut s: Vec<String> = r.radices.iter().map(|x| x.to_string()).collect();
                if r.bottom {
                    s.push("*".into());
                }
                s.join(",")
            })
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn parse_header(line: &str) -> Result<Self> {
        let mut regs = Vec::new();
        for (i, part) in line.trim().split('|').enumerate() {
            let mut radices = Vec::new();
            let mut bottom = false;
            for tok in part.split(',') {
                if tok == "*" {
                    bottom = true;
                } else {
                    radices.push(
                        tok.parse::<u32>()
                            .map_err(|e| Error::Malformed(format!("layout header: {e}")))?,
                    );
                }
            }
            regs.push(Register {
                name: format!("r{i}"),
                radices,
                bottom,
            });
        }
        Self::new(regs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: RegisterLayout,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zero(layout: RegisterLayout) -> Self {
        let mut amps = vec![ZERO; layout.dim()];
        amps[0] = C64::new(1.0, 0.0);
        Self { layout, amps }
    }

    /// Basis state with the given register values.
    pub fn basis(layout: RegisterLayout, values: &[usize]) -> Result<Self> {
        if values.len() != layout.registers.len()
            || values.iter().zip(&layout.registers).any(|(&v, r)| v >= r.dim())
        {
            return Err(Error::Dimension("basis values do not fit layout".into()));
        }
        let mut amps = vec![ZERO; layout.dim()];
        amps[layout.encode(values)] = C64::new(1.0, 0.0);
        Ok(Self { layout, amps })
    }

    /// Wraps raw amplitudes without normalization checks.
    pub fn from_amplitudes(layout: RegisterLayout, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != layout.dim() {
            return Err(Error::Dimension(format!(
                "layout dimension {} but {} amplitudes",
                layout.dim(),
                amps.len()
            )));
        }
        Ok(Self { layout, amps })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: C64) {
        for a in self.amps.iter_mut() {
            *a *= factor;
        }
    }

    pub fn add_scaled(&mut self, other: &Self, factor: C64) -> Result<()> {
        self.same_layout(other)?;
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += b * factor;
        }
        Ok(())
    }

    fn same_layout(&self, other: &Self) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::Dimension("layout mismatch".into()));
        }
        Ok(())
    }

    /// `sum conj(u_i) v_i`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.same_layout(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .fold(ZERO, |acc, (a, b)| acc + a.conj() * b))
    }

    /// 2-norm of the difference.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.same_layout(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Tensor product `self ⊗ other`, registers concatenated.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut regs = self.layout.registers.clone();
        regs.extend(other.layout.registers.iter().cloned());
        let layout = RegisterLayout::new(regs)?;
        let mut amps = Vec::with_capacity(layout.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(Self { layout, amps })
    }

    /// Applies the per-digit DFT to a register (bottom slot untouched).
    pub fn qft_register(&mut self, id: usize, dir: Direction) -> Result<()> {
        let reg = self.layout.register(id)?.clone();
        let q = reg.uniform_radix()?;
        let w = twiddles(q, dir);
        let k = reg.radices.len();
        let inner = self.layout.stride(id);
        let rdim = reg.dim();
        let regular = reg.regular_dim();
        let outer = self.amps.len() / (rdim * inner);
        let qs = q as usize;
        for o in 0..outer {
            let region = &mut self.amps[o * rdim * inner..o * rdim * inner + regular * inner];
            for j in 0..k {
                let before = qs.pow(j as u32);
                let after = qs.pow((k - 1 - j) as u32) * inner;
                dft_axis(region, before, qs, after, q, &w);
            }
        }
        Ok(())
    }

    /// Applies a map on register values of one register. `f` must be a bijection
    /// on `0..dim`.
    pub fn permute_register<F: Fn(usize) -> usize>(&mut self, id: usize, f: F) -> Result<()> {
        let rdim = self.layout.register(id)?.dim();
        let perm: Vec<usize> = (0..rdim).map(&f).collect();
        let mut seen = vec![false; rdim];
        for &p in &perm {
            if p >= rdim || std::mem::replace(&mut seen[p], true) {
                return Err(Error::NotBijective);
            }
        }
        let inner = self.layout.stride(id);
        let outer = self.amps.len() / (rdim * inner);
        let mut out = vec![ZERO; self.amps.len()];
        for o in 0..outer {
            for (v, &pv) in perm.iter().enumerate() {
                let src = (o * rdim + v) * inner;
                let dst = (o * rdim + pv) * inner;
                out[dst..dst + inner].copy_from_slice(&self.amps[src..src + inner]);
            }
        }
        self.amps = out;
        Ok(())
    }

    /// `|x> -> |x + z>` digit-wise on one register; bottom fixed.
    pub fn shift_register(&mut self, id: usize, z: &[u32]) -> Result<()> {
        let reg = self.layout.register(id)?.clone();
        if z.len() != reg.radices.len() {
            return Err(Error::Dimension(format!(
                "shift of length {} on a {}-digit register",
                z.len(),
                reg.radices.len()
            )));
        }
        self.permute_register(id, |v| match reg.digits(v) {
            None => v,
            Some(d) => {
                let shifted: Vec<u32> = d
                    .iter()
                    .zip(z)
                    .zip(&reg.radices)
                    .map(|((&a, &b), &r)| (a + b % r) % r)
                    .collect();
                reg.value(&shifted)
            }
        })
    }

    /// Applies a basis-state map on the tuple of register values. The closure
    /// rewrites the values in place and must define a bijection.
    pub fn apply_basis_map<F: Fn(&mut [usize])>(&mut self, f: F) -> Result<()> {
        let n = self.amps.len();
        let nregs = self.layout.registers.len();
        let mut out = vec![ZERO; n];
        let mut seen = vec![false; n];
        let mut vals = vec![0usize; nregs];
        for i in 0..n {
            self.layout.decode_into(i, &mut vals);
            f(&mut vals);
            if vals
                .iter()
                .zip(&self.layout.registers)
                .any(|(&v, r)| v >= r.dim())
            {
                return Err(Error::NotBijective);
            }
            let j = self.layout.encode(&vals);
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::NotBijective);
            }
            out[j] = self.amps[i];
        }
        self.amps = out;
        Ok(())
    }

    /// On each value `c` of `ctrl`, applies a unitary on `target` that sends the
    /// unit vector `vectors[c]` to the reference state `|0...0>` with overlap 1.
    /// `None` entries (and control values beyond the list) act as identity.
    pub fn controlled_map_to_reference(
        &mut self,
        ctrl: usize,
        target: usize,
        vectors: &[Option<Vec<C64>>],
        dir: Direction,
    ) -> Result<()> {
        let tdim = self.layout.register(target)?.dim();
        let cdim = self.layout.register(ctrl)?.dim();
        if ctrl == target {
            return Err(Error::Dimension("control equals target".into()));
        }
        let maps: Vec<Option<Reflection>> = vectors
            .iter()
            .take(cdim)
            .map(|v| v.as_ref().map(|v| Reflection::new(v, tdim)).transpose())
            .collect::<Result<_>>()?;

        let nregs = self.layout.registers.len();
        let tstride = self.layout.stride(target);
        let mut vals = vec![0usize; nregs];
        let mut fiber = vec![ZERO; tdim];
        for i in 0..self.amps.len() {
            self.layout.decode_into(i, &mut vals);
            if vals[target] != 0 {
                continue;
            }
            let Some(Some(map)) = maps.get(vals[ctrl]) else {
                continue;
            };
            for (t, f) in fiber.iter_mut().enumerate() {
                *f = self.amps[i + t * tstride];
            }
            map.apply(&mut fiber, dir);
            for (t, f) in fiber.iter().enumerate() {
                self.amps[i + t * tstride] = *f;
            }
        }
        Ok(())
    }

    /// Outcome distribution of one register, indexed by register value.
    pub fn measure_exact(&self, id: usize) -> Result<Vec<f64>> {
        let rdim = self.layout.register(id)?.dim();
        let inner = self.layout.stride(id);
        let mut probs = vec![0.0; rdim];
        for (i, a) in self.amps.iter().enumerate() {
            probs[(i / inner) % rdim] += a.norm_sqr();
        }
        Ok(probs)
    }

    /// Unnormalized branch `(<value| ⊗ I) state` with the register removed.
    pub fn branch(&self, id: usize, value: usize) -> Result<Self> {
        let rdim = self.layout.register(id)?.dim();
        if value >= rdim {
            return Err(Error::OutOfRange(format!("register value {value}")));
        }
        let inner = self.layout.stride(id);
        let outer = self.amps.len() / (rdim * inner);
        let mut amps = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let start = (o * rdim + value) * inner;
            amps.extend_from_slice(&self.amps[start..start + inner]);
        }
        Ok(Self {
            layout: self.layout.without(id),
            amps,
        })
    }

    /// Post-selects `value` on a register, removing it; returns the outcome
    /// probability and the renormalized remainder.
    pub fn postselect(&self, id: usize, value: usize) -> Result<(f64, Self)> {
        let mut b = self.branch(id, value)?;
        let p = b.norm().powi(2);
        if p <= 1e-300 {
            return Err(Error::ZeroProbability(p));
        }
        b.scale(C64::new(1.0 / p.sqrt(), 0.0));
        Ok((p, b))
    }

    /// Conditions on `value` keeping the register in place.
    pub fn condition(&self, id: usize, value: usize) -> Result<(f64, Self)> {
        let rdim = self.layout.register(id)?.dim();
        let inner = self.layout.stride(id);
        let mut out = self.clone();
        for (i, a) in out.amps.iter_mut().enumerate() {
            if (i / inner) % rdim != value {
                *a = ZERO;
            }
        }
        let p = out.norm().powi(2);
        if p <= 1e-300 {
            return Err(Error::ZeroProbability(p));
        }
        out.scale(C64::new(1.0 / p.sqrt(), 0.0));
        Ok((p, out))
    }

    /// Draws one outcome and collapses (register kept).
    pub fn sample<R: Rng + ?Sized>(&self, id: usize, rng: &mut R) -> Result<(usize, f64, Self)> {
        let probs = self.measure_exact(id)?;
        let total: f64 = probs.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut outcome = probs.len() - 1;
        for (v, &p) in probs.iter().enumerate() {
            if u < p {
                outcome = v;
                break;
            }
            u -= p;
        }
        // never land on a zero-probability value through rounding
        while probs[outcome] == 0.0 && outcome > 0 {
            outcome -= 1;
        }
        let (p, s) = self.condition(id, outcome)?;
        Ok((outcome, p, s))
    }

    /// Header line followed by little-endian `(re, im)` f64 pairs.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.layout.header())?;
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::Malformed(e.to_string()))?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Malformed("missing header line".into()))?;
        let header =
            std::str::from_utf8(&bytes[..nl]).map_err(|e| Error::Malformed(e.to_string()))?;
        let layout = RegisterLayout::parse_header(header)?;
        let body = &bytes[nl + 1..];
        if body.len() != layout.dim() * 16 {
            return Err(Error::Malformed(format!(
                "expected {} bytes of amplitudes, got {}",
                layout.dim() * 16,
                body.len()
            )));
        }
        let amps = body
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                )
            })
            .collect();
        Self::from_amplitudes(layout, amps)
    }
}

/// `U = H e^{-i theta}` with `H` the Householder reflection exchanging
/// `e^{-i theta} v` and `|0>`.
#[derive(Debug, Clone)]
struct Reflection {
    phase: C64,
    w: Vec<C64>,
    w_norm_sqr: f64,
}

impl Reflection {
    fn new(v: &[C64], dim: usize) -> Result<Self> {
        if v.len() != dim {
            return Err(Error::Dimension(format!(
                "reference map vector of length {} on a register of dimension {dim}",
                v.len()
            )));
        }
        let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit(n));
        }
        let theta = if v[0].norm() > 0.0 { v[0].arg() } else { 0.0 };
        let phase = C64::from_polar(1.0, -theta);
        let mut w: Vec<C64> = v.iter().map(|a| a * phase).collect();
        w[0] -= C64::new(1.0, 0.0);
        let w_norm_sqr = w.iter().map(|a| a.norm_sqr()).sum();
        Ok(Self {
            phase,
            w,
            w_norm_sqr,
        })
    }

    fn householder(&self, x: &mut [C64]) {
        if self.w_norm_sqr < 1e-30 {
            return;
        }
        let proj = self
            .w
            .iter()
            .zip(x.iter())
            .fold(ZERO, |acc, (w, a)| acc + w.conj() * a);
        let f = proj * (2.0 / self.w_norm_sqr);
        for (a, w) in x.iter_mut().zip(&self.w) {
            *a -= w * f;
        }
    }

    fn apply(&self, x: &mut [C64], dir: Direction) {
        let phase = match dir {
            Direction::Forward => self.phase,
            Direction::Inverse => self.phase.conj(),
        };
        for a in x.iter_mut() {
            *a *= phase;
        }
        self.householder(x);
    }
}

/// Dimension `q^count` of a Z_q register, checked against the state cap.
pub fn zq_dim(q: u32, count: usize) -> Result<usize> {
    check("register", pow_u128(q as u64, count), state_cap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_state(layout: RegisterLayout, rng: &mut ChaCha8Rng) -> StateVector {
        let n = layout.dim();
        let mut amps: Vec<C64> = (0..n)
            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in amps.iter_mut() {
            *a /= norm;
        }
        StateVector::from_amplitudes(layout, amps).unwrap()
    }

    fn layout(regs: Vec<Register>) -> RegisterLayout {
        RegisterLayout::new(regs).unwrap()
    }

    /// Full DFT on one register written out from the definition over all digits.
    fn naive_register_dft(s: &StateVector, id: usize) -> Vec<C64> {
        let lay = s.layout();
        let reg = lay.register(id).unwrap();
        let q = reg.radices[0];
        let k = reg.radices.len();
        let scale = (q as f64).powf(-(k as f64) / 2.0);
        let mut out = vec![ZERO; s.amplitudes().len()];
        for (i, o) in out.iter_mut().enumerate() {
            let vals = lay.decode(i);
            let Some(x) = reg.digits(vals[id]) else {
                *o = s.amplitudes()[i];
                continue;
            };
            for y in 0..reg.regular_dim() {
                let yd = reg.digits(y).unwrap();
                let dot: u32 = x.iter().zip(&yd).map(|(a, b)| a * b).sum::<u32>() % q;
                let mut src = vals.clone();
                src[id] = y;
                *o += C64::from_polar(1.0, 2.0 * PI * dot as f64 / q as f64)
                    * s.amplitudes()[lay.encode(&src)]
                    * scale;
            }
        }
        out
    }

    #[test]
    fn qft_examples() {
        let mut s = StateVector::zero(layout(vec![Register::zq("a", 2, 1)]));
        s.qft_register(0, Direction::Forward).unwrap();
        let h = 0.5f64.sqrt();
        assert!((s.amplitudes()[0] - c(h, 0.0)).norm() < 1e-12);
        assert!((s.amplitudes()[1] - c(h, 0.0)).norm() < 1e-12);

        let mut s = StateVector::basis(layout(vec![Register::zq("a", 4, 1)]), &[1]).unwrap();
        s.qft_register(0, Direction::Forward).unwrap();
        let want = [c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), c(0.0, -0.5)];
        for (a, b) in s.amplitudes().iter().zip(want) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn qft_matches_naive_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lay = layout(vec![
            Register::zq("a", 3, 1),
            Register::zq("b", 3, 2).with_bottom(),
            Register::zq("c", 2, 2),
        ]);
        let s = random_state(lay, &mut rng);
        for id in 0..3 {
            let mut t = s.clone();
            t.qft_register(id, Direction::Forward).unwrap();
            let naive = naive_register_dft(&s, id);
            let diff = t
                .amplitudes()
                .iter()
                .zip(&naive)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12);
            assert!((t.norm() - 1.0).abs() < 1e-10);
            t.qft_register(id, Direction::Inverse).unwrap();
            assert!(t.distance(&s).unwrap() < 1e-10);
        }
    }

    #[test]
    fn shift_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lay = layout(vec![Register::zq("a", 3, 2).with_bottom(), Register::zq("b", 2, 1)]);
        let s = random_state(lay.clone(), &mut rng);
        let mut t = s.clone();
        t.shift_register(0, &[0, 0]).unwrap();
        assert_eq!(t, s);
        t.shift_register(0, &[1, 2]).unwrap();
        assert!(t.distance(&s).unwrap() > 1e-3);
        t.shift_register(0, &[2, 1]).unwrap();
        assert!(t.distance(&s).unwrap() < 1e-12);
        let mut b = StateVector::basis(lay, &[9, 0]).unwrap();
        b.shift_register(0, &[1, 1]).unwrap();
        assert_eq!(b.amplitudes()[18], c(1.0, 0.0));
        assert!(t.shift_register(0, &[1]).is_err());
    }

    #[test]
    fn reference_map_examples() {
        let lay = layout(vec![Register::zq("c", 2, 1), Register::zq("t", 2, 1)]);
        let h = 0.5f64.sqrt();
        // v = |0>: identity on that branch
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_state(lay.clone(), &mut rng);
        let mut t = s.clone();
        t.controlled_map_to_reference(0, 1, &[Some(vec![c(1.0, 0.0), ZERO]), None], Direction::Forward)
            .unwrap();
        assert!(t.distance(&s).unwrap() < 1e-12);

        // plus state goes to |0>
        let plus = vec![c(h, 0.0), c(h, 0.0)];
        let mut p = StateVector::from_amplitudes(lay.clone(), vec![c(h, 0.0), c(h, 0.0), ZERO, ZERO]).unwrap();
        p.controlled_map_to_reference(0, 1, &[Some(plus.clone()), None], Direction::Forward)
            .unwrap();
        assert!((p.amplitudes()[0] - c(1.0, 0.0)).norm() < 1e-10);

        // phase convention: overlap with the reference is real positive
        let v = vec![c(0.0, 0.6), c(0.8, 0.0)];
        let mut q = StateVector::from_amplitudes(lay.clone(), vec![v[0], v[1], ZERO, ZERO]).unwrap();
        q.controlled_map_to_reference(0, 1, &[Some(v.clone())], Direction::Forward)
            .unwrap();
        assert!((q.amplitudes()[0] - c(1.0, 0.0)).norm() < 1e-10);
        q.controlled_map_to_reference(0, 1, &[Some(v)], Direction::Inverse)
            .unwrap();
        assert!((q.amplitudes()[0] - c(0.0, 0.6)).norm() < 1e-10);

        assert!(matches!(
            p.controlled_map_to_reference(0, 1, &[Some(vec![c(1.0, 0.0), c(1.0, 0.0)])], Direction::Forward),
            Err(Error::NotUnit(_))
        ));
    }

    #[test]
    fn reference_map_preserves_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let lay = layout(vec![Register::zq("c", 2, 1), Register::zq("t", 3, 2)]);
        let tlay = layout(vec![Register::zq("t", 3, 2)]);
        for _ in 0..10 {
            let v = random_state(tlay.clone(), &mut rng);
            let mut w = random_state(tlay.clone(), &mut rng);
            // Gram-Schmidt
            let ov = v.inner(&w).unwrap();
            w.add_scaled(&v, -ov).unwrap();
            let n = w.norm();
            w.scale(c(1.0 / n, 0.0));
            let map = vec![Some(v.amplitudes().to_vec()), Some(w.amplitudes().to_vec())];
            let zero_c = StateVector::basis(layout(vec![Register::zq("c", 2, 1)]), &[1]).unwrap();
            let mut a = zero_c.tensor(&v).unwrap();
            let mut b = zero_c.tensor(&w).unwrap();
            assert_eq!(a.layout(), &lay);
            a.controlled_map_to_reference(0, 1, &map, Direction::Forward).unwrap();
            b.controlled_map_to_reference(0, 1, &map, Direction::Forward).unwrap();
            assert!(a.inner(&b).unwrap().norm() < 1e-10);
            assert!((b.amplitudes()[9] - c(1.0, 0.0)).norm() < 1e-10);
            assert!((a.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn measurement_examples() {
        let a = StateVector::basis(layout(vec![Register::zq("a", 3, 1)]), &[2]).unwrap();
        let b = StateVector::basis(layout(vec![Register::zq("b", 4, 1)]), &[3]).unwrap();
        let ab = a.tensor(&b).unwrap();
        let probs = ab.measure_exact(1).unwrap();
        assert_eq!(probs, vec![0.0, 0.0, 0.0, 1.0]);

        let mut u = StateVector::zero(layout(vec![Register::zq("a", 2, 1)]));
        u.qft_register(0, Direction::Forward).unwrap();
        let p = u.measure_exact(0).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);

        let (pp, rest) = ab.postselect(1, 3).unwrap();
        assert!((pp - 1.0).abs() < 1e-12);
        assert_eq!(rest, a);
        assert!(matches!(ab.postselect(1, 0), Err(Error::ZeroProbability(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (o, p, s) = u.sample(0, &mut rng).unwrap();
        assert!(o < 2 && (p - 0.5).abs() < 1e-12 && (s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn basis_map_and_bijection_check() {
        let lay = layout(vec![Register::zq("x", 2, 1), Register::zq("z", 3, 1)]);
        let mut s = StateVector::basis(lay, &[1, 1]).unwrap();
        s.apply_basis_map(|v| v[1] = (v[1] + 2 * v[0]) % 3).unwrap();
        assert_eq!(s.layout().decode(s.amplitudes().iter().position(|a| a.norm() > 0.5).unwrap()), vec![1, 0]);
        assert_eq!(s.apply_basis_map(|v| v[1] = 0), Err(Error::NotBijective));
    }

    #[test]
    fn dump_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lay = layout(vec![Register::zq("a", 3, 2), Register::zq("b", 2, 1).with_bottom()]);
        let s = random_state(lay, &mut rng);
        let mut buf = Vec::new();
        s.write_dump(&mut buf).unwrap();
        assert!(buf.starts_with(b"3,3|2,*\n"));
        let back = StateVector::read_dump(&buf[..]).unwrap();
        assert_eq!(back.amplitudes(), s.amplitudes());
    }

    #[test]
    fn state_cap_enforced() {
        assert!(matches!(
            RegisterLayout::new(vec![Register::zq("a", 2, 30)]),
            Err(Error::CapExceeded { .. })
        ));
    }
}
