//! The state families `|psi_s>`, `|W_y>`, the weights `w_y`, and the PGM quantities.
//!
//! Everything lives on the sample register `Z_q^m` (flat index, coordinate 0 most
//! significant) and the syndrome space `Z_q^n` (same convention). The shifted dual
//! lattice is `{x : A x = y mod q}`.

use num_complex::Complex64;

use crate::amplitude::{index_point, point_index, twiddles, AmplitudeTable, Direction, C64};
use crate::caps::{check, dense_cap, dense_points, pow_u128};
use crate::error::{Error, Result};
use crate::modq::{is_prime, mat_vec_mul, solve_affine_mod_prime, ModMatrix, ModVector};
use crate::statevec::{Register, RegisterLayout, StateVector};

const ZERO: C64 = Complex64::new(0.0, 0.0);

/// Digit-wise `a + b` on flat indices of `Z_q^n`.
pub fn add_idx(q: u32, n: usize, a: usize, b: usize) -> usize {
    combine_idx(q, n, a, b, |x, y| (x + y) % q as usize)
}

/// Digit-wise `a - b` on flat indices of `Z_q^n`.
pub fn sub_idx(q: u32, n: usize, a: usize, b: usize) -> usize {
    combine_idx(q, n, a, b, |x, y| (x + q as usize - y) % q as usize)
}

fn combine_idx(q: u32, n: usize, mut a: usize, mut b: usize, f: impl Fn(usize, usize) -> usize) -> usize {
    let qs = q as usize;
    let mut out = 0;
    let mut place = 1;
    for _ in 0..n {
        out += f(a % qs, b % qs) * place;
        a /= qs;
        b /= qs;
        place *= qs;
    }
    out
}

/// `a . b mod q` on flat indices of `Z_q^n`.
pub fn dot_idx(q: u32, n: usize, mut a: usize, mut b: usize) -> usize {
    let qs = q as usize;
    let mut acc = 0;
    for _ in 0..n {
        acc = (acc + (a % qs) * (b % qs)) % qs;
        a /= qs;
        b /= qs;
    }
    acc
}

/// `Lambda_y^perp(A) cap Z_q^m` with its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct DualFiber {
    pub y: ModVector,
    /// Sorted lexicographically (coordinate 0 most significant).
    pub elements: Vec<ModVector>,
    pub weight: f64,
}

/// Enumerates the fiber of `y`: coset enumeration for prime `q`, a full scan otherwise.
pub fn enumerate_fiber(a: &ModMatrix, y: &ModVector, fhat: &AmplitudeTable) -> Result<DualFiber> {
    let q = a.modulus();
    let (n, m) = (a.rows(), a.cols());
    if y.modulus() != q || y.len() != n || fhat.q() != q || fhat.m() != m {
        return Err(Error::Dimension("fiber inputs disagree in shape".into()));
    }
    let mut elements = Vec::new();
    if is_prime(q) {
        if let Some((p, kernel)) = solve_affine_mod_prime(a, y)? {
            let count = check("fiber coset", pow_u128(q as u64, kernel.len()), dense_cap())?;
            for c in 0..count {
                let coeffs = index_point(q, kernel.len(), c);
                let mut x = p.clone();
                for (k, &cf) in kernel.iter().zip(&coeffs) {
                    for _ in 0..cf {
                        x = x.add(k)?;
                    }
                }
                elements.push(x);
            }
        }
    } else {
        let points = dense_points(q, m)?;
        for i in 0..points {
            let x = ModVector::new(q, index_point(q, m, i))?;
            if mat_vec_mul(a, &x)? == *y {
                elements.push(x);
            }
        }
    }
    elements.sort_by(|u, v| u.lex_cmp(v));
    let q2n = (q as f64).powi(2 * n as i32);
    let weight = q2n
        * elements
            .iter()
            .map(|x| fhat.value_at(x.entries()).norm_sqr())
            .sum::<f64>();
    Ok(DualFiber {
        y: y.clone(),
        elements,
        weight,
    })
}

/// Residuals of the Fourier-duality identities on one instance.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct IdentityReport {
    /// `max_s || QFT psi_s - sum_y omega^{y.s} sum_{Lambda_y} fhat(x)|x> ||`.
    pub psi_fourier: f64,
    /// `max_y || QFT W_y(definition) - (q^n / sqrt w_y) sum_{Lambda_y} fhat(x)|x> ||`.
    pub w_fourier: f64,
    /// `max_y || W_y(from psi) - W_y(Fourier construction) ||`.
    pub psi_to_w: f64,
    /// `max_s || psi_s - q^{-n} sum_y omega^{y.s} sqrt(w_y) W_y ||`.
    pub w_to_psi: f64,
    /// `max_y | w_y(definition norm) - q^{2n} sum |fhat|^2 |`.
    pub weight_formula: f64,
    /// `| E_y w_y - q^n |`.
    pub mean_weight: f64,
    /// `max_{y != y'} |<W_y|W_y'>|`.
    pub orthogonality: f64,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.psi_fourier,
            self.w_fourier,
            self.psi_to_w,
            self.w_to_psi,
            self.weight_formula,
            self.mean_weight,
            self.orthogonality,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Precomputed syndromes, dual amplitudes, and weights for one `(A, f)`.
#[derive(Debug, Clone)]
pub struct LatticeContext {
    a: ModMatrix,
    f: AmplitudeTable,
    f_dense: Vec<C64>,
    fhat: Vec<C64>,
    syndromes: Vec<usize>,
    fibers: Vec<Vec<usize>>,
    weights: Vec<f64>,
    omega: Vec<C64>,
}

impl LatticeContext {
    pub fn new(a: ModMatrix, f: AmplitudeTable) -> Result<Self> {
        let q = a.modulus();
        let (n, m) = (a.rows(), a.cols());
        if f.q() != q || f.m() != m {
            return Err(Error::Dimension(format!(
                "family over Z_{}^{} but A is {n}x{m} mod {q}",
                f.q(),
                f.m()
            )));
        }
        let points = dense_points(q, m)?;
        let ny = check("syndrome space", pow_u128(q as u64, n), dense_cap())?;
        let f_dense = f.to_dense_vec()?;
        let fhat = f.dual().to_dense_vec()?;

        // column multiples d * a_k encoded as Z_q^n indices
        let col_mult: Vec<Vec<usize>> = (0..m)
            .map(|k| {
                (0..q)
                    .map(|d| {
                        let col: Vec<u32> = (0..n)
                            .map(|r| ((a.get(r, k) as u64 * d as u64) % q as u64) as u32)
                            .collect();
                        point_index(q, &col)
                    })
                    .collect()
            })
            .collect();
        let mut syndromes = vec![0usize];
        for cm in &col_mult {
            let mut next = Vec::with_capacity(syndromes.len() * q as usize);
            for &s in &syndromes {
                for &c in cm {
                    next.push(add_idx(q, n, s, c));
                }
            }
            syndromes = next;
        }
        debug_assert_eq!(syndromes.len(), points);

        let mut fibers = vec![Vec::new(); ny];
        for (x, &y) in syndromes.iter().enumerate() {
            fibers[y].push(x);
        }
        let q2n = (q as f64).powi(2 * n as i32);
        let weights = fibers
            .iter()
            .map(|xs| q2n * xs.iter().map(|&x| fhat[x].norm_sqr()).sum::<f64>())
            .collect();
        Ok(Self {
            a,
            f,
            f_dense,
            fhat,
            syndromes,
            fibers,
            weights,
            omega: twiddles(q, Direction::Forward),
        })
    }

    pub fn q(&self) -> u32 {
        self.a.modulus()
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.a.cols()
    }

    pub fn matrix(&self) -> &ModMatrix {
        &self.a
    }

    pub fn family(&self) -> &AmplitudeTable {
        &self.f
    }

    pub fn fhat(&self) -> &[C64] {
        &self.fhat
    }

    /// Number of syndromes `q^n`.
    pub fn num_syndromes(&self) -> usize {
        self.weights.len()
    }

    pub fn num_points(&self) -> usize {
        self.syndromes.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, y: usize) -> f64 {
        self.weights[y]
    }

    /// Flat syndrome index of `A x` for a flat sample index `x`.
    pub fn syndrome_of(&self, x: usize) -> usize {
        self.syndromes[x]
    }

    /// Flat sample indices of `Lambda_y^perp`, ascending.
    pub fn fiber(&self, y: usize) -> &[usize] {
        &self.fibers[y]
    }

    /// `omega^{k}` for any integer exponent already reduced mod q.
    pub fn omega(&self, k: usize) -> C64 {
        self.omega[k % self.q() as usize]
    }

    /// `omega^{y.s}`.
    pub fn character(&self, y: usize, s: usize) -> C64 {
        self.omega(dot_idx(self.q(), self.n(), y, s))
    }

    pub fn sample_register(&self) -> Register {
        Register::zq("sample", self.q(), self.m())
    }

    pub fn answer_register(&self) -> Register {
        Register::zq("answer", self.q(), self.n())
    }

    pub fn sample_layout(&self) -> Result<RegisterLayout> {
        RegisterLayout::new(vec![self.sample_register()])
    }

    pub fn syndrome_vector(&self, y: usize) -> ModVector {
        ModVector::new(self.q(), index_point(self.q(), self.n(), y)).expect("in range")
    }

    /// `A^T s` as a flat sample-space shift.
    pub fn at_s(&self, s: usize) -> Result<Vec<u32>> {
        Ok(self
            .a
            .transpose_mul(&self.syndrome_vector(s))?
            .into_entries())
    }

    /// `|psi_s> = sum_e f(e) |A^T s + e>`.
    pub fn build_psi(&self, s: usize) -> Result<StateVector> {
        let mut st = StateVector::from_amplitudes(self.sample_layout()?, self.f_dense.clone())?;
        st.shift_register(0, &self.at_s(s)?)?;
        Ok(st)
    }

    /// Fourier-domain `|W_y>` hat: `(q^n / sqrt w_y) sum_{Lambda_y} fhat(x)|x>`.
    pub fn build_w_hat(&self, y: usize) -> Result<StateVector> {
        let w = self.weights[y];
        if w <= 0.0 {
            return Err(Error::EmptyFiber(index_point(self.q(), self.n(), y)));
        }
        let scale = (self.q() as f64).powi(self.n() as i32) / w.sqrt();
        let mut amps = vec![ZERO; self.num_points()];
        for &x in &self.fibers[y] {
            amps[x] = self.fhat[x] * scale;
        }
        StateVector::from_amplitudes(self.sample_layout()?, amps)
    }

    /// `|W_y>` built in the Fourier domain, then inverse-transformed.
    pub fn build_w(&self, y: usize) -> Result<(StateVector, f64)> {
        let mut st = self.build_w_hat(y)?;
        st.qft_register(0, Direction::Inverse)?;
        Ok((st, self.weights[y]))
    }

    /// `|W_y>` straight from its definition `sum_s omega^{-y.s} |psi_s>`,
    /// normalized by its own norm. Returns the state and that squared norm.
    pub fn build_w_direct(&self, y: usize, psis: &[StateVector]) -> Result<Option<(StateVector, f64)>> {
        let mut acc = StateVector::from_amplitudes(self.sample_layout()?, vec![ZERO; self.num_points()])?;
        for (s, psi) in psis.iter().enumerate() {
            acc.add_scaled(psi, self.character(y, s).conj())?;
        }
        let w = acc.norm().powi(2);
        if w < 1e-18 {
            return Ok(None);
        }
        acc.scale(C64::new(1.0 / w.sqrt(), 0.0));
        Ok(Some((acc, w)))
    }

    /// Adds `A x` into `answer` for the value `x` of `sample`, conjugated by the
    /// QFT on `sample`. The inverse direction subtracts.
    pub fn append_syndrome_in(
        &self,
        state: &mut StateVector,
        sample: usize,
        answer: usize,
        dir: Direction,
    ) -> Result<()> {
        let (q, n) = (self.q(), self.n());
        let sreg = state.layout().register(sample)?;
        let areg = state.layout().register(answer)?;
        if sreg.bottom || areg.bottom || sreg.dim() != self.num_points() || areg.dim() != self.num_syndromes() {
            return Err(Error::Dimension("append_syndrome register shapes".into()));
        }
        state.qft_register(sample, Direction::Forward)?;
        state.apply_basis_map(|v| {
            let syn = self.syndromes[v[sample]];
            v[answer] = match dir {
                Direction::Forward => add_idx(q, n, v[answer], syn),
                Direction::Inverse => sub_idx(q, n, v[answer], syn),
            };
        })?;
        state.qft_register(sample, Direction::Inverse)?;
        Ok(())
    }

    /// `state ⊗ |0>` followed by the syndrome-appending unitary.
    pub fn append_syndrome(&self, state: &StateVector) -> Result<StateVector> {
        let zero = StateVector::zero(RegisterLayout::new(vec![self.answer_register()])?);
        let mut out = state.tensor(&zero)?;
        let answer = out.layout().registers().len() - 1;
        if answer != 1 {
            return Err(Error::Dimension("input must be a single sample register".into()));
        }
        self.append_syndrome_in(&mut out, 0, 1, Direction::Forward)?;
        Ok(out)
    }

    /// `E_y sqrt(w_y / q^n)`.
    pub fn mean_sqrt_weight(&self) -> f64 {
        let qn = self.num_syndromes() as f64;
        self.weights.iter().map(|&w| (w / qn).sqrt()).sum::<f64>() / qn
    }

    /// `p_max = (E_y sqrt(w_y / q^n))^2`.
    pub fn pmax_formula(&self) -> f64 {
        self.mean_sqrt_weight().powi(2)
    }

    /// `E_s |<Y_s|psi_s>|^2` with `Y_s = q^{-n/2} sum_y omega^{y.s} W_y`, all states explicit.
    pub fn pgm_success_direct(&self) -> Result<f64> {
        let ny = self.num_syndromes();
        let ws: Vec<Option<StateVector>> = (0..ny)
            .map(|y| {
                if self.weights[y] > 0.0 {
                    self.build_w(y).map(|(w, _)| Some(w))
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_>>()?;
        let scale = 1.0 / (ny as f64).sqrt();
        let mut total = 0.0;
        for s in 0..ny {
            let psi = self.build_psi(s)?;
            let mut ys = StateVector::from_amplitudes(self.sample_layout()?, vec![ZERO; self.num_points()])?;
            for (y, w) in ws.iter().enumerate() {
                if let Some(w) = w {
                    ys.add_scaled(w, self.character(y, s) * scale)?;
                }
            }
            total += ys.inner(&psi)?.norm_sqr();
        }
        Ok(total / ny as f64)
    }

    /// Numerical residuals of every Fourier-duality identity.
    pub fn check_identities(&self) -> Result<IdentityReport> {
        let ny = self.num_syndromes();
        let qn = ny as f64;
        let mut rep = IdentityReport::default();
        let psis: Vec<StateVector> = (0..ny).map(|s| self.build_psi(s)).collect::<Result<_>>()?;

        for (s, psi) in psis.iter().enumerate() {
            let mut lhs = psi.clone();
            lhs.qft_register(0, Direction::Forward)?;
            let rhs_amps = (0..self.num_points())
                .map(|x| self.character(self.syndromes[x], s) * self.fhat[x])
                .collect();
            let rhs = StateVector::from_amplitudes(self.sample_layout()?, rhs_amps)?;
            rep.psi_fourier = rep.psi_fourier.max(lhs.distance(&rhs)?);
        }

        let mut ws: Vec<Option<StateVector>> = Vec::with_capacity(ny);
        for y in 0..ny {
            let direct = self.build_w_direct(y, &psis)?;
            let w = self.weights[y];
            match (&direct, w > 1e-12) {
                (Some((wd, wn)), true) => {
                    rep.weight_formula = rep.weight_formula.max((wn - w).abs());
                    let mut hat = wd.clone();
                    hat.qft_register(0, Direction::Forward)?;
                    rep.w_fourier = rep.w_fourier.max(hat.distance(&self.build_w_hat(y)?)?);
                    let (wb, _) = self.build_w(y)?;
                    rep.psi_to_w = rep.psi_to_w.max(wd.distance(&wb)?);
                    ws.push(Some(wb));
                }
                (None, false) => ws.push(None),
                (Some((_, wn)), false) => {
                    rep.weight_formula = rep.weight_formula.max(*wn);
                    ws.push(None);
                }
                (None, true) => {
                    rep.weight_formula = rep.weight_formula.max(w);
                    ws.push(None);
                }
            }
        }

        for (s, psi) in psis.iter().enumerate() {
            let mut rec = StateVector::from_amplitudes(self.sample_layout()?, vec![ZERO; self.num_points()])?;
            for (y, w) in ws.iter().enumerate() {
                if let Some(w) = w {
                    let c = self.character(y, s) * (self.weights[y].sqrt() / qn);
                    rec.add_scaled(w, c)?;
                }
            }
            rep.w_to_psi = rep.w_to_psi.max(rec.distance(psi)?);
        }

        for y in 0..ny {
            for y2 in (y + 1)..ny {
                if let (Some(a), Some(b)) = (&ws[y], &ws[y2]) {
                    rep.orthogonality = rep.orthogonality.max(a.inner(b)?.norm());
                }
            }
        }

        let mean_w = self.weights.iter().sum::<f64>() / qn;
        rep.mean_weight = (mean_w - qn).abs();
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::{indicator_fourier_family, TargetSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mat(q: u32, rows: &[Vec<i64>]) -> ModMatrix {
        ModMatrix::from_rows_i64(q, rows).unwrap()
    }

    /// Amplitude family whose dual is uniform over all of Z_q^m.
    fn fhat_uniform(q: u32, m: usize) -> AmplitudeTable {
        AmplitudeTable::delta(q, m).unwrap()
    }

    #[test]
    fn fiber_examples() {
        let a = mat(2, &[vec![1, 0, 1]]);
        let fhat = AmplitudeTable::uniform(2, 3).unwrap();
        let y = ModVector::new(2, vec![1]).unwrap();
        let fib = enumerate_fiber(&a, &y, &fhat).unwrap();
        let got: Vec<Vec<u32>> = fib.elements.iter().map(|e| e.entries().to_vec()).collect();
        assert_eq!(got, vec![vec![0, 0, 1], vec![0, 1, 1], vec![1, 0, 0], vec![1, 1, 0]]);
        assert!((fib.weight - 2.0).abs() < 1e-12);

        let zero = mat(4, &[vec![2, 2]]);
        let fhat4 = AmplitudeTable::uniform(4, 2).unwrap();
        let odd = ModVector::new(4, vec![1]).unwrap();
        let fib = enumerate_fiber(&zero, &odd, &fhat4).unwrap();
        assert!(fib.elements.is_empty());
        assert_eq!(fib.weight, 0.0);

        // coset path (prime q) agrees with the context's scan
        let a3 = mat(3, &[vec![1, 2, 0], vec![0, 1, 1]]);
        let ctx = LatticeContext::new(a3.clone(), AmplitudeTable::uniform(3, 3).unwrap()).unwrap();
        for y in 0..9 {
            let fib = enumerate_fiber(&a3, &ctx.syndrome_vector(y), ctx.family().dual()).unwrap();
            let idx: Vec<usize> = fib.elements.iter().map(|e| point_index(3, e.entries())).collect();
            assert_eq!(idx, ctx.fiber(y));
            assert!((fib.weight - ctx.weight(y)).abs() < 1e-9);
        }
    }

    #[test]
    fn context_weights_match_formula() {
        let a = mat(2, &[vec![1, 0, 1]]);
        let ctx = LatticeContext::new(a, fhat_uniform(2, 3)).unwrap();
        assert!(ctx.weights().iter().all(|&w| (w - 2.0).abs() < 1e-12));
        assert!((ctx.pmax_formula() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psi_examples() {
        let a = mat(3, &[vec![1, 2]]);
        let delta = AmplitudeTable::delta(3, 2).unwrap();
        let ctx = LatticeContext::new(a, delta).unwrap();
        let psi = ctx.build_psi(1).unwrap();
        // A^T (1) = (1, 2) -> index 5
        assert!((psi.amplitudes()[5] - C64::new(1.0, 0.0)).norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = AmplitudeTable::random_dense(3, 2, &mut rng).unwrap();
        let ctx = LatticeContext::new(mat(3, &[vec![1, 2]]), f.clone()).unwrap();
        assert_eq!(ctx.build_psi(0).unwrap().amplitudes(), f.to_dense_vec().unwrap().as_slice());
    }

    #[test]
    fn w_examples() {
        let t = TargetSet::Binary;
        let f = indicator_fourier_family(&t, 4, 2).unwrap();
        let a = mat(4, &[vec![1, 3]]);
        let ctx = LatticeContext::new(a, f).unwrap();
        for y in 0..4 {
            if ctx.weight(y) == 0.0 {
                assert!(matches!(ctx.build_w(y), Err(Error::EmptyFiber(_))));
                continue;
            }
            let hat = ctx.build_w_hat(y).unwrap();
            let support: Vec<usize> = ctx
                .fiber(y)
                .iter()
                .copied()
                .filter(|&x| t.contains(4, &index_point(4, 2, x)))
                .collect();
            let amp = 1.0 / (support.len() as f64).sqrt();
            for (x, a) in hat.amplitudes().iter().enumerate() {
                let want = if support.contains(&x) { amp } else { 0.0 };
                assert!((a - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }

        let uni = AmplitudeTable::uniform(3, 2).unwrap();
        let ctx = LatticeContext::new(mat(3, &[vec![1, 1]]), uni).unwrap();
        let (w0, _) = ctx.build_w(0).unwrap();
        let a = 1.0 / 3.0;
        assert!(w0.amplitudes().iter().all(|v| (v - C64::new(a, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn identities_hold_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (q, n, m) in [(2u32, 1usize, 3usize), (3, 1, 2), (4, 1, 2), (2, 2, 4), (3, 2, 3)] {
            let entries: Vec<u32> = (0..n * m).map(|_| rand::Rng::random_range(&mut rng, 0..q)).collect();
            let a = ModMatrix::new(n, m, q, entries).unwrap();
            let f = AmplitudeTable::random_dense(q, m, &mut rng).unwrap();
            let ctx = LatticeContext::new(a, f).unwrap();
            let rep = ctx.check_identities().unwrap();
            assert!(rep.max_residual() < 1e-9, "{q} {n} {m}: {rep:?}");
            let direct = ctx.pgm_success_direct().unwrap();
            assert!((direct - ctx.pmax_formula()).abs() < 1e-9);
        }
    }

    #[test]
    fn append_syndrome_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = AmplitudeTable::random_dense(3, 3, &mut rng).unwrap();
        let ctx = LatticeContext::new(mat(3, &[vec![1, 2, 1]]), f).unwrap();
        for y in 0..3 {
            let (w, _) = ctx.build_w(y).unwrap();
            let out = ctx.append_syndrome(&w).unwrap();
            let probs = out.measure_exact(1).unwrap();
            assert!((probs[y] - 1.0).abs() < 1e-9);
            let (_, rest) = out.postselect(1, y).unwrap();
            assert!(rest.distance(&w).unwrap() < 1e-9);
        }
        for s in 0..3 {
            let out = ctx.append_syndrome(&ctx.build_psi(s).unwrap()).unwrap();
            for y in 0..3 {
                let (w, wy) = ctx.build_w(y).unwrap();
                let branch = out.branch(1, y).unwrap();
                let mut want = w.clone();
                want.scale(ctx.character(y, s) * (wy.sqrt() / 3.0));
                assert!(branch.distance(&want).unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn pmax_examples() {
        let a = mat(2, &[vec![1, 0, 1]]);
        let ctx = LatticeContext::new(a.clone(), fhat_uniform(2, 3)).unwrap();
        assert!((ctx.pgm_success_direct().unwrap() - 1.0).abs() < 1e-9);

        let ctx = LatticeContext::new(a, AmplitudeTable::uniform(2, 3).unwrap()).unwrap();
        assert!((ctx.pmax_formula() - 0.5).abs() < 1e-12);
        assert!((ctx.pgm_success_direct().unwrap() - 0.5).abs() < 1e-9);

        // rank 1 < n = 2 over Z_3
        let deficient = mat(3, &[vec![1, 1, 0], vec![2, 2, 0]]);
        let ctx = LatticeContext::new(deficient, fhat_uniform(3, 3)).unwrap();
        assert!((ctx.pmax_formula() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn shift_maps_psi_s_to_psi_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = AmplitudeTable::random_dense(3, 2, &mut rng).unwrap();
        let ctx = LatticeContext::new(mat(3, &[vec![1, 2]]), f).unwrap();
        for s in 0..3 {
            for t in 0..3 {
                let mut psi = ctx.build_psi(s).unwrap();
                let diff = sub_idx(3, 1, t, s);
                psi.shift_register(0, &ctx.at_s(diff).unwrap()).unwrap();
                assert!(psi.distance(&ctx.build_psi(t).unwrap()).unwrap() < 1e-10);
            }
        }
    }
}
