use rand::Rng;
use serde::Serialize;

use crate::amplitude::{Direction, C64};
use crate::error::{Error, Result};
use crate::lattice_states::{add_idx, sub_idx, LatticeContext};
use crate::statevec::{Register, RegisterLayout, StateVector};

/// Register positions an oracle acts on inside a larger layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wiring {
    pub sample: usize,
    pub answer: usize,
    pub work: Vec<usize>,
}

/// Unitary `U` with `U |psi_s>|0> = sum_s' gamma_{s,s'} |s'> ...` on
/// sample (`Z_q^m`) ⊗ answer (`Z_q^n`) ⊗ work registers.
pub trait SlweOracle: Send + Sync {
    fn name(&self) -> String;

    /// Extra registers, all starting in `|0>`.
    fn work_registers(&self) -> Vec<Register>;

    fn apply(&self, state: &mut StateVector, wiring: &Wiring, dir: Direction) -> Result<()>;
}

/// Layout `[sample, answer, work...]` for a standalone oracle call.
pub fn oracle_layout(ctx: &LatticeContext, oracle: &dyn SlweOracle) -> Result<(RegisterLayout, Wiring)> {
    let mut regs = vec![ctx.sample_register(), ctx.answer_register()];
    let work = oracle.work_registers();
    let wiring = Wiring {
        sample: 0,
        answer: 1,
        work: (2..2 + work.len()).collect(),
    };
    regs.extend(work);
    Ok((RegisterLayout::new(regs)?, wiring))
}

/// Pretty good measurement realized as a unitary: append the syndrome, map each
/// `W_y` to the reference state, inverse QFT on the answer register.
pub struct PgmOracle<'a> {
    ctx: &'a LatticeContext,
    ws: Vec<Option<Vec<C64>>>,
}

impl<'a> PgmOracle<'a> {
    pub fn new(ctx: &'a LatticeContext) -> Result<Self> {
        let ws = (0..ctx.num_syndromes())
            .map(|y| {
                if ctx.weight(y) > 0.0 {
                    ctx.build_w(y).map(|(w, _)| Some(w.into_amplitudes()))
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { ctx, ws })
    }
}

impl SlweOracle for PgmOracle<'_> {
    fn name(&self) -> String {
        "pgm".into()
    }

    fn work_registers(&self) -> Vec<Register> {
        vec![]
    }

    fn apply(&self, state: &mut StateVector, w: &Wiring, dir: Direction) -> Result<()> {
        match dir {
            Direction::Forward => {
                self.ctx
                    .append_syndrome_in(state, w.sample, w.answer, Direction::Forward)?;
                state.controlled_map_to_reference(w.answer, w.sample, &self.ws, Direction::Forward)?;
                state.qft_register(w.answer, Direction::Inverse)
            }
            Direction::Inverse => {
                state.qft_register(w.answer, Direction::Forward)?;
                state.controlled_map_to_reference(w.answer, w.sample, &self.ws, Direction::Inverse)?;
                self.ctx
                    .append_syndrome_in(state, w.sample, w.answer, Direction::Inverse)
            }
        }
    }
}

/// Ignores the sample and adds a fixed guess to the answer register; correct
/// exactly on `s = guess`.
pub struct ConstantAnswerOracle {
    q: u32,
    n: usize,
    guess: usize,
}

impl ConstantAnswerOracle {
    pub fn new(ctx: &LatticeContext, guess: usize) -> Result<Self> {
        if guess >= ctx.num_syndromes() {
            return Err(Error::OutOfRange(format!("guess {guess}")));
        }
        Ok(Self {
            q: ctx.q(),
            n: ctx.n(),
            guess,
        })
    }
}

impl SlweOracle for ConstantAnswerOracle {
    fn name(&self) -> String {
        format!("constant({})", self.guess)
    }

    fn work_registers(&self) -> Vec<Register> {
        vec![]
    }

    fn apply(&self, state: &mut StateVector, w: &Wiring, dir: Direction) -> Result<()> {
        let (q, n, g) = (self.q, self.n, self.guess);
        state.permute_register(w.answer, |v| match dir {
            Direction::Forward => add_idx(q, n, v, g),
            Direction::Inverse => sub_idx(q, n, v, g),
        })
    }
}

/// Coherent shift-averaging wrapper: superpose `t`, shift the sample by `A^T t`,
/// run the inner oracle, subtract `t` from the answer.
pub struct SymmetrizedOracle<'a> {
    ctx: &'a LatticeContext,
    inner: Box<dyn SlweOracle + 'a>,
    shifts: Vec<usize>,
}

pub fn symmetrize<'a>(inner: Box<dyn SlweOracle + 'a>, ctx: &'a LatticeContext) -> Result<SymmetrizedOracle<'a>> {
    let shifts = (0..ctx.num_syndromes())
        .map(|t| {
            ctx.at_s(t)
                .map(|d| crate::amplitude::point_index(ctx.q(), &d))
        })
        .collect::<Result<_>>()?;
    Ok(SymmetrizedOracle { ctx, inner, shifts })
}

impl SlweOracle for SymmetrizedOracle<'_> {
    fn name(&self) -> String {
        format!("symmetrized({})", self.inner.name())
    }

    fn work_registers(&self) -> Vec<Register> {
        let mut regs = self.inner.work_registers();
        regs.push(Register::zq("shift", self.ctx.q(), self.ctx.n()));
        regs
    }

    fn apply(&self, state: &mut StateVector, w: &Wiring, dir: Direction) -> Result<()> {
        let (&t, inner_work) = w
            .work
            .split_last()
            .ok_or_else(|| Error::Dimension("symmetrized oracle needs a work register".into()))?;
        let inner = Wiring {
            sample: w.sample,
            answer: w.answer,
            work: inner_work.to_vec(),
        };
        let (q, n, m) = (self.ctx.q(), self.ctx.n(), self.ctx.m());
        let (s, a) = (w.sample, w.answer);
        match dir {
            Direction::Forward => {
                state.qft_register(t, Direction::Forward)?;
                state.apply_basis_map(|v| v[s] = add_idx(q, m, v[s], self.shifts[v[t]]))?;
                self.inner.apply(state, &inner, Direction::Forward)?;
                state.apply_basis_map(|v| v[a] = sub_idx(q, n, v[a], v[t]))
            }
            Direction::Inverse => {
                state.apply_basis_map(|v| v[a] = add_idx(q, n, v[a], v[t]))?;
                self.inner.apply(state, &inner, Direction::Inverse)?;
                state.apply_basis_map(|v| v[s] = sub_idx(q, m, v[s], self.shifts[v[t]]))?;
                state.qft_register(t, Direction::Inverse)
            }
        }
    }
}

/// Diagonal magnitudes `|gamma_{s,s}|` and mean success `p = E_s |gamma_{s,s}|^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleProfile {
    pub diagonal: Vec<f64>,
    pub p: f64,
    /// `max_s |gamma_ss| - min_s |gamma_ss|`.
    pub spread: f64,
}

impl OracleProfile {
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.spread <= tol
    }
}

pub fn profile(oracle: &dyn SlweOracle, ctx: &LatticeContext) -> Result<OracleProfile> {
    let (layout, wiring) = oracle_layout(ctx, oracle)?;
    let rest = layout.dim() / ctx.num_points();
    let mut diagonal = Vec::with_capacity(ctx.num_syndromes());
    for s in 0..ctx.num_syndromes() {
        let psi = ctx.build_psi(s)?;
        let mut amps = vec![C64::new(0.0, 0.0); layout.dim()];
        for (x, a) in psi.amplitudes().iter().enumerate() {
            amps[x * rest] = *a;
        }
        let mut st = StateVector::from_amplitudes(layout.clone(), amps)?;
        oracle.apply(&mut st, &wiring, Direction::Forward)?;
        diagonal.push(st.measure_exact(wiring.answer)?[s].sqrt());
    }
    let p = diagonal.iter().map(|g| g * g).sum::<f64>() / diagonal.len() as f64;
    let max = diagonal.iter().cloned().fold(f64::MIN, f64::max);
    let min = diagonal.iter().cloned().fold(f64::MAX, f64::min);
    Ok(OracleProfile {
        diagonal,
        p,
        spread: max - min,
    })
}

/// `max(| ||U v|| - 1 |, || U^dag U v - v ||)` over random unit vectors `v`.
pub fn unitarity_residual<R: Rng + ?Sized>(
    oracle: &dyn SlweOracle,
    ctx: &LatticeContext,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    let (layout, wiring) = oracle_layout(ctx, oracle)?;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let mut amps: Vec<C64> = (0..layout.dim())
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in amps.iter_mut() {
            *a /= norm;
        }
        let v = StateVector::from_amplitudes(layout.clone(), amps)?;
        let mut u = v.clone();
        oracle.apply(&mut u, &wiring, Direction::Forward)?;
        worst = worst.max((u.norm() - 1.0).abs());
        oracle.apply(&mut u, &wiring, Direction::Inverse)?;
        worst = worst.max(u.distance(&v)?);
    }
    Ok(worst)
}
