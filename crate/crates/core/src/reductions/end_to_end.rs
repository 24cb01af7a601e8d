use rand::Rng;
use serde::{Deserialize, Serialize};

use super::reverse::{iclwe_oracle_from_solver, reverse_report, theorem3_report};
use super::{Check, ReductionReport};
use crate::amplitude::{indicator_fourier_family, TargetSet};
use crate::error::{Error, Result};
use crate::isis_solver::{
    random_matrix, top_level_full_rank, AlwaysAbortSolver, RecoverableSolver, RecursiveSolver, SolverParams,
};
use crate::lattice_states::LatticeContext;
use crate::modq::ModMatrix;
use crate::rng::fork;

const MAX_MATRIX_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndToEndSolver {
    Recursive,
    AlwaysAbort,
}

/// Uniform `A` over `Z_q^{n x m}` conditioned on full-rank top-level blocks mod 2.
pub fn sample_solvable_matrix<R: Rng + ?Sized>(params: &SolverParams, rng: &mut R) -> Result<ModMatrix> {
    for _ in 0..MAX_MATRIX_DRAWS {
        let a = random_matrix(params.n, params.m(), params.q(), rng)?;
        if top_level_full_rank(&a, params.n, params.l)? {
            return Ok(a);
        }
    }
    Err(Error::Invariant("no solvable matrix drawn".into()))
}

/// Samples an instance, builds the solver-derived family for `f-hat = 1` on
/// `{0,1}^m`, and runs the reverse measurement with it.
pub fn end_to_end(params: SolverParams, seed: u64, which: EndToEndSolver) -> Result<ReductionReport> {
    let mut rng = fork(seed, "end-to-end/matrix");
    let a = sample_solvable_matrix(&params, &mut rng)?;
    let (q, m) = (params.q(), params.m());
    let f = indicator_fourier_family(&TargetSet::Binary, q, m)?;
    let ctx = LatticeContext::new(a, f)?;
    let solver: Box<dyn RecoverableSolver> = match which {
        EndToEndSolver::Recursive => Box::new(RecursiveSolver::new(params)),
        EndToEndSolver::AlwaysAbort => Box::new(AlwaysAbortSolver { params }),
    };
    let so = iclwe_oracle_from_solver(&ctx, solver.as_ref())?;
    let t3 = theorem3_report(&ctx, &so);
    let mut rep = reverse_report(&ctx, &so.oracle)?;
    rep.kind = "end-to-end".into();
    rep.seed = Some(seed);
    rep.solver_epsilon = t3.solver_epsilon;
    rep.per_y_success = t3.per_y_success;
    rep.checks.extend(t3.checks);
    if which == EndToEndSolver::AlwaysAbort {
        let chance = 1.0 / ctx.num_syndromes() as f64;
        rep.checks
            .push(Check::le("chance_level", rep.mean_success.unwrap_or(0.0), chance, 1e-9));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_towers_pass_all_checks() {
        for (n, l) in [(1, 1), (2, 1), (1, 2)] {
            let params = SolverParams::new(n, l).unwrap();
            let rep = end_to_end(params, 11, EndToEndSolver::Recursive).unwrap();
            assert!(rep.all_passed(), "n={n} l={l}: {:?}", rep.checks);
            assert!(rep.mean_success.unwrap() > 0.0);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let params = SolverParams::new(1, 1).unwrap();
        let a = end_to_end(params, 3, EndToEndSolver::Recursive).unwrap();
        let b = end_to_end(params, 3, EndToEndSolver::Recursive).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stub_is_at_chance() {
        let params = SolverParams::new(1, 1).unwrap();
        let rep = end_to_end(params, 4, EndToEndSolver::AlwaysAbort).unwrap();
        assert!(rep.all_passed(), "{:?}", rep.checks);
        assert_eq!(rep.gamma, Some(0.0));
    }
}
