use serde::Serialize;

use super::{reverse_bound, Check, ReductionReport};
use crate::amplitude::{point_index, Direction, C64};
use crate::caps::{check, dense_cap, pow_u128};
use crate::error::{Error, Result};
use crate::isis_solver::{uniformity_audit, RecoverableSolver, SolverOutput, SolverTape, UniformityAudit};
use crate::lattice_states::LatticeContext;
use crate::statevec::{Register, RegisterLayout, StateVector};

/// A family `W'_y` of approximations to the lattice states, one per syndrome.
#[derive(Debug, Clone)]
pub struct IclweOracle {
    pub name: String,
    pub register: Register,
    pub family: Vec<StateVector>,
    /// `<W'_y | W_y>`, zero where `w_y = 0`.
    pub overlaps: Vec<C64>,
    /// `gamma_y = |<W'_y | W_y>|`.
    pub fidelities: Vec<f64>,
}

impl IclweOracle {
    /// Family over `register`, which is the sample register optionally
    /// extended by a bottom slot orthogonal to every `W_y`.
    pub fn from_family(ctx: &LatticeContext, name: &str, register: Register, family: Vec<StateVector>) -> Result<Self> {
        if family.len() != ctx.num_syndromes() {
            return Err(Error::Dimension(format!(
                "{} states for {} syndromes",
                family.len(),
                ctx.num_syndromes()
            )));
        }
        if register.regular_dim() != ctx.num_points() {
            return Err(Error::Dimension("family register does not match Z_q^m".into()));
        }
        let mut overlaps = Vec::with_capacity(family.len());
        for (y, w) in family.iter().enumerate() {
            if w.layout().dim() != register.dim() {
                return Err(Error::Dimension(format!("W'_{y} has dimension {}", w.layout().dim())));
            }
            if (w.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::NotNormalized(w.norm().powi(2)));
            }
            if ctx.weight(y) > 0.0 {
                let (exact, _) = ctx.build_w(y)?;
                let o = w.amplitudes()[..ctx.num_points()]
                    .iter()
                    .zip(exact.amplitudes())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                overlaps.push(o);
            } else {
                overlaps.push(C64::new(0.0, 0.0));
            }
        }
        Ok(Self {
            name: name.to_string(),
            register,
            fidelities: overlaps.iter().map(|o| o.norm()).collect(),
            family,
            overlaps,
        })
    }

    /// `W'_y = W_y`; syndromes with `w_y = 0` get `|0>` and fidelity 0.
    pub fn perfect(ctx: &LatticeContext) -> Result<Self> {
        let layout = ctx.sample_layout()?;
        let family = (0..ctx.num_syndromes())
            .map(|y| {
                if ctx.weight(y) > 0.0 {
                    ctx.build_w(y).map(|(w, _)| w)
                } else {
                    StateVector::basis(layout.clone(), &[0])
                }
            })
            .collect::<Result<_>>()?;
        Self::from_family(ctx, "perfect", ctx.sample_register(), family)
    }

    /// `E_y gamma_y`.
    pub fn mean_fidelity(&self) -> f64 {
        self.fidelities.iter().sum::<f64>() / self.fidelities.len() as f64
    }

    fn phase_aligned(&self) -> bool {
        self.overlaps.iter().all(|o| o.re >= -1e-12 && o.im.abs() <= 1e-9)
    }
}

/// Solver-derived family together with the classical audit of each syndrome.
#[derive(Debug, Clone)]
pub struct SolverOracle {
    pub oracle: IclweOracle,
    pub audits: Vec<UniformityAudit>,
}

/// Builds `W'_y` as the inverse QFT of `2^{-l/2} sum_r |A(y; r)>`, with all
/// aborting tapes collapsed into the bottom slot. Refuses to build unless every
/// non-aborting tape is recomputed exactly from its output.
pub fn iclwe_oracle_from_solver(ctx: &LatticeContext, solver: &dyn RecoverableSolver) -> Result<SolverOracle> {
    let params = solver.params();
    if params.q() != ctx.q() || params.n != ctx.n() || params.m() != ctx.m() {
        return Err(Error::Dimension(format!(
            "solver for n={}, l={} does not match the lattice instance",
            params.n, params.l
        )));
    }
    let len = solver.tape_length();
    let num_tapes = check("tape space", pow_u128(2, len), dense_cap())? as u64;
    let a = ctx.matrix();
    let q = ctx.q();
    let register = ctx.sample_register().with_bottom();
    let layout = RegisterLayout::new(vec![register.clone()])?;
    let bottom = register.bottom_value().expect("bottom slot");

    let mut family = Vec::with_capacity(ctx.num_syndromes());
    let mut audits = Vec::with_capacity(ctx.num_syndromes());
    for y in 0..ctx.num_syndromes() {
        let yv = ctx.syndrome_vector(y);
        let mut counts = vec![0u64; register.dim()];
        for t in 0..num_tapes {
            let tape = SolverTape::from_index(t, len);
            match solver.solve(a, &yv, &tape)? {
                SolverOutput::Abort(_) => counts[bottom] += 1,
                SolverOutput::Solution(x) => {
                    let back = solver.recover(a, &yv, &x);
                    if !matches!(&back, Ok(r) if r.bits() == tape.bits()) {
                        return Err(Error::RecoveryFailed(format!(
                            "tape {} for y = {:?} is not recomputed from its output",
                            tape.to_hex(),
                            yv.entries()
                        )));
                    }
                    counts[point_index(q, x.entries())] += 1;
                }
            }
        }
        let amps = counts
            .iter()
            .map(|&c| C64::new((c as f64 / num_tapes as f64).sqrt(), 0.0))
            .collect();
        let mut st = StateVector::from_amplitudes(layout.clone(), amps)?;
        st.qft_register(0, Direction::Inverse)?;
        family.push(st);
        audits.push(uniformity_audit(solver, a, &yv)?);
    }
    let oracle = IclweOracle::from_family(ctx, "solver", register, family)?;
    Ok(SolverOracle { oracle, audits })
}

/// Outcome of measuring `|psi'_s>` in the basis `{B_s'}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReverseOutcome {
    pub s: usize,
    pub amplitude: (f64, f64),
    pub success: f64,
    /// `|<B_s'|psi'_s>|^2` for every `s'`.
    pub distribution: Vec<f64>,
    /// Mass outside the span of the `B_s'`.
    pub residual: f64,
}

/// Appends the syndrome to `|psi_s>` and projects onto
/// `B_s' = q^{-n/2} sum_y omega^{s'.y} |W'_y>|y>`.
pub fn reverse_slwe(ctx: &LatticeContext, oracle: &IclweOracle, s: usize) -> Result<ReverseOutcome> {
    let qn = ctx.num_syndromes();
    if s >= qn {
        return Err(Error::OutOfRange(format!("secret index {s}")));
    }
    let psi = ctx.append_syndrome(&ctx.build_psi(s)?)?;
    let overlaps: Vec<C64> = (0..qn)
        .map(|y| {
            let b = psi.branch(1, y)?;
            Ok(oracle.family[y].amplitudes()[..ctx.num_points()]
                .iter()
                .zip(b.amplitudes())
                .map(|(w, v)| w.conj() * v)
                .sum())
        })
        .collect::<Result<_>>()?;
    let norm = 1.0 / (qn as f64).sqrt();
    let amp_of = |sp: usize| -> C64 {
        overlaps
            .iter()
            .enumerate()
            .map(|(y, o)| ctx.character(y, sp).conj() * o)
            .sum::<C64>()
            * norm
    };
    let distribution: Vec<f64> = (0..qn).map(|sp| amp_of(sp).norm_sqr()).collect();
    let amp = amp_of(s);
    Ok(ReverseOutcome {
        s,
        amplitude: (amp.re, amp.im),
        success: amp.norm_sqr(),
        residual: (1.0 - distribution.iter().sum::<f64>()).max(0.0),
        distribution,
    })
}

/// Runs the reverse measurement for every `s` and checks it against the
/// fidelity bound and the PGM optimum.
pub fn reverse_report(ctx: &LatticeContext, oracle: &IclweOracle) -> Result<ReductionReport> {
    let mut rep = ReductionReport::new("reverse", ctx.matrix());
    for s in 0..ctx.num_syndromes() {
        rep.per_s_success.push(reverse_slwe(ctx, oracle, s)?.success);
    }
    let mean = rep.per_s_success.iter().sum::<f64>() / rep.per_s_success.len() as f64;
    let qn = ctx.num_syndromes() as f64;
    let eps = (1.0 - ctx.mean_sqrt_weight()).max(0.0);
    let gamma = oracle.mean_fidelity();
    let eps_prime = (1.0 - gamma).max(0.0);
    let bound = reverse_bound(eps, eps_prime)?;
    let p_max = ctx.pmax_formula();
    rep.checks.push(Check::ge("success_bound", mean, bound.value, 1e-7));
    rep.checks.push(Check::le("pgm_optimality", mean, p_max, 1e-9));
    if oracle.phase_aligned() {
        let predicted = (ctx
            .weights()
            .iter()
            .zip(&oracle.fidelities)
            .map(|(w, g)| (w / qn).sqrt() * g)
            .sum::<f64>()
            / qn)
            .powi(2);
        rep.checks.push(Check::eq("predicted_success", mean, predicted, 1e-8));
    }
    rep.epsilon = Some(eps);
    rep.epsilon_prime = Some(eps_prime);
    rep.gamma = Some(gamma);
    rep.p_max = Some(p_max);
    rep.mean_success = Some(mean);
    rep.bound = Some(bound.value);
    rep.bound_raw = Some(bound.inner);
    rep.margin = Some(mean - bound.value);
    Ok(rep)
}

/// Quantum fidelity of the solver family against the classical fidelity of
/// its output law, per syndrome.
pub fn theorem3_report(ctx: &LatticeContext, so: &SolverOracle) -> ReductionReport {
    let mut rep = ReductionReport::new("solver-oracle", ctx.matrix());
    let ny = so.audits.len() as f64;
    let mut worst_gap = 0.0f64;
    let mut worst_fvdg = f64::INFINITY;
    for (g, au) in so.oracle.fidelities.iter().zip(&so.audits) {
        worst_gap = worst_gap.max((g - au.fidelity).abs());
        worst_fvdg = worst_fvdg.min(g - (1.0 - au.epsilon));
    }
    let eps = so.audits.iter().map(|a| a.epsilon).sum::<f64>() / ny;
    let gamma = so.oracle.mean_fidelity();
    rep.checks.push(Check::eq("fidelity_matches_classical", worst_gap, 0.0, 1e-9));
    rep.checks.push(Check::ge("per_syndrome_fidelity_bound", worst_fvdg, 0.0, 1e-12));
    rep.checks.push(Check::ge("mean_fidelity_bound", gamma, 1.0 - eps, 1e-12));
    rep.solver_epsilon = Some(eps);
    rep.gamma = Some(gamma);
    rep.per_y_success = so.oracle.fidelities.clone();
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::{indicator_fourier_family, AmplitudeTable, TargetSet};
    use crate::isis_solver::{AlwaysAbortSolver, RecursiveSolver, SolverParams};
    use crate::modq::ModMatrix;
    use crate::rng::fork;

    fn ctx(q: u32, rows: &[Vec<i64>], f: AmplitudeTable) -> LatticeContext {
        LatticeContext::new(ModMatrix::from_rows_i64(q, rows).unwrap(), f).unwrap()
    }

    #[test]
    fn perfect_oracle_reaches_pgm_optimum() {
        let mut rng = fork(8, "rev");
        for (q, rows) in [(2u32, vec![vec![1i64, 1, 0]]), (3, vec![vec![1, 2]]), (2, vec![vec![1, 0, 1], vec![0, 1, 1]])] {
            let m = rows[0].len();
            let c = ctx(q, &rows, AmplitudeTable::random_dense(q, m, &mut rng).unwrap());
            let o = IclweOracle::perfect(&c).unwrap();
            let rep = reverse_report(&c, &o).unwrap();
            assert!(rep.all_passed(), "{:?}", rep.checks);
            assert!((rep.mean_success.unwrap() - c.pmax_formula()).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_delta_family_always_succeeds() {
        let c = ctx(2, &[vec![1, 0, 1]], AmplitudeTable::delta(2, 3).unwrap());
        let o = IclweOracle::perfect(&c).unwrap();
        for s in 0..2 {
            let out = reverse_slwe(&c, &o, s).unwrap();
            assert!((out.success - 1.0).abs() < 1e-9);
            assert!(out.residual < 1e-9);
        }
    }

    #[test]
    fn solver_oracle_on_binary_family() {
        let params = SolverParams::new(1, 2).unwrap();
        let mut rng = fork(9, "solver-oracle");
        let a = crate::reductions::sample_solvable_matrix(&params, &mut rng).unwrap();
        let f = indicator_fourier_family(&TargetSet::Binary, 4, 9).unwrap();
        let c = LatticeContext::new(a, f).unwrap();
        let so = iclwe_oracle_from_solver(&c, &RecursiveSolver::new(params)).unwrap();
        let t3 = theorem3_report(&c, &so);
        assert!(t3.all_passed(), "{:?}", t3.checks);
        let rep = reverse_report(&c, &so.oracle).unwrap();
        assert!(rep.all_passed(), "{:?}", rep.checks);
    }

    #[test]
    fn stub_solver_gives_chance_success() {
        let params = SolverParams::new(1, 1).unwrap();
        let c = ctx(2, &[vec![1, 1, 0]], indicator_fourier_family(&TargetSet::Binary, 2, 3).unwrap());
        let so = iclwe_oracle_from_solver(&c, &AlwaysAbortSolver { params }).unwrap();
        assert!(so.oracle.fidelities.iter().all(|&g| g == 0.0));
        let rep = reverse_report(&c, &so.oracle).unwrap();
        assert!(rep.mean_success.unwrap() <= 0.5 + 1e-9);
        assert_eq!(rep.bound, Some(0.0));
    }

    struct Liar(RecursiveSolver);

    impl RecoverableSolver for Liar {
        fn params(&self) -> SolverParams {
            self.0.params
        }
        fn solve(&self, a: &crate::modq::ModMatrix, y: &crate::modq::ModVector, t: &SolverTape) -> Result<SolverOutput> {
            self.0.solve(a, y, t)
        }
        fn recover(&self, _: &crate::modq::ModMatrix, _: &crate::modq::ModVector, _: &crate::modq::ModVector) -> Result<SolverTape> {
            Ok(SolverTape::from_index(0, self.0.params.tape_length()))
        }
    }

    #[test]
    fn broken_recovery_is_refused() {
        let params = SolverParams::new(1, 1).unwrap();
        let c = ctx(2, &[vec![1, 1, 0]], indicator_fourier_family(&TargetSet::Binary, 2, 3).unwrap());
        let err = iclwe_oracle_from_solver(&c, &Liar(RecursiveSolver::new(params))).unwrap_err();
        assert_eq!(err.code(), "E_PRECHECK");
    }
}
