use rand::Rng;
use serde::Serialize;

use super::oracle::{oracle_layout, profile, SlweOracle};
use super::{forward_bound, Check, ReductionReport};
use crate::amplitude::{index_point, mass_on, Direction, TargetSet, C64};
use crate::error::{Error, Result};
use crate::lattice_states::{sub_idx, LatticeContext};
use crate::statevec::{RegisterLayout, StateVector};

/// Result of the forward algorithm for one target syndrome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardOutcome {
    pub y: usize,
    /// Probability of reading `0` in the difference register.
    pub postselect_probability: f64,
    /// Probability that the final sample lies in `Λ⊥_y ∩ T`.
    pub success: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled_in_target: Option<bool>,
}

/// Runs the forward algorithm on syndrome `y`. With `rng`, the post-selection
/// is repeated until it succeeds (at most `ceil(20 / p)` attempts) and a final
/// sample is drawn; without it only exact probabilities are reported.
pub fn forward_isis<R: Rng + ?Sized>(
    ctx: &LatticeContext,
    target: &TargetSet,
    oracle: &dyn SlweOracle,
    y: usize,
    rng: Option<&mut R>,
) -> Result<ForwardOutcome> {
    let (q, n, m) = (ctx.q(), ctx.n(), ctx.m());
    target.validate(q, m)?;
    if y >= ctx.num_syndromes() {
        return Err(Error::OutOfRange(format!("syndrome index {y}")));
    }
    let (base, wiring) = oracle_layout(ctx, oracle)?;
    let mut regs = base.registers().to_vec();
    regs.push(ctx.answer_register());
    let layout = RegisterLayout::new(regs)?;
    let third = layout.registers().len() - 1;
    let stride = layout.stride(0);

    let qn = ctx.num_syndromes();
    let norm = 1.0 / (qn as f64).sqrt();
    let mut amps = vec![C64::new(0.0, 0.0); layout.dim()];
    for s in 0..qn {
        let phase = ctx.character(y, s).conj() * norm;
        let psi = ctx.build_psi(s)?;
        for (x, a) in psi.amplitudes().iter().enumerate() {
            amps[x * stride + s] = a * phase;
        }
    }
    let mut st = StateVector::from_amplitudes(layout, amps)?;
    oracle.apply(&mut st, &wiring, Direction::Forward)?;
    let ans = wiring.answer;
    st.apply_basis_map(|v| v[third] = sub_idx(q, n, v[third], v[ans]))?;
    let (prob, mut st) = st.postselect(third, 0)?;

    let mut attempts = None;
    let mut rng = rng;
    if let Some(r) = rng.as_deref_mut() {
        let cap = (20.0 / prob).ceil() as u64;
        let mut k = 0u64;
        loop {
            k += 1;
            if r.random::<f64>() < prob {
                break;
            }
            if k >= cap {
                return Err(Error::ZeroProbability(prob));
            }
        }
        attempts = Some(k);
    }

    oracle.apply(&mut st, &wiring, Direction::Inverse)?;
    st.qft_register(wiring.sample, Direction::Forward)?;
    let probs = st.measure_exact(wiring.sample)?;
    let in_target = |x: usize| target.contains(q, &index_point(q, m, x));
    let success = ctx
        .fiber(y)
        .iter()
        .filter(|&&x| in_target(x))
        .map(|&x| probs[x])
        .sum();

    let (sampled, sampled_in_target) = match rng {
        Some(r) => {
            let (x, _, _) = st.sample(wiring.sample, r)?;
            let ok = ctx.syndrome_of(x) == y && in_target(x);
            (Some(index_point(q, m, x)), Some(ok))
        }
        None => (None, None),
    };
    Ok(ForwardOutcome {
        y,
        postselect_probability: prob,
        success,
        attempts,
        sampled,
        sampled_in_target,
    })
}

/// Runs the forward algorithm on every syndrome and checks the success bound.
pub fn forward_report(ctx: &LatticeContext, target: &TargetSet, oracle: &dyn SlweOracle) -> Result<ReductionReport> {
    let prof = profile(oracle, ctx)?;
    let eta = (1.0 - mass_on(ctx.family().dual(), target)?).max(0.0);
    let mut rep = ReductionReport::new("forward", ctx.matrix());
    let mut worst_post = 0.0f64;
    for y in 0..ctx.num_syndromes() {
        let out = forward_isis::<rand_chacha::ChaCha8Rng>(ctx, target, oracle, y, None)?;
        worst_post = worst_post.max((out.postselect_probability - prof.p).abs());
        rep.per_y_success.push(out.success);
    }
    let mean = rep.per_y_success.iter().sum::<f64>() / rep.per_y_success.len() as f64;
    let bound = forward_bound(prof.p, eta)?;
    rep.checks.push(Check::eq("postselect_equals_p", worst_post, 0.0, 1e-9));
    rep.checks
        .push(Check::le("oracle_symmetric", prof.spread, 0.0, 1e-9));
    if prof.is_symmetric(1e-9) {
        rep.checks.push(Check::ge("success_bound", mean, bound, 1e-7));
    }
    if (prof.p - 1.0).abs() < 1e-12 {
        rep.checks.push(Check::eq("perfect_oracle_success", mean, 1.0 - eta, 1e-8));
    }
    rep.p = Some(prof.p);
    rep.eta = Some(eta);
    rep.mean_success = Some(mean);
    rep.bound = Some(bound);
    rep.margin = Some(mean - bound);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::{indicator_fourier_family, AmplitudeTable};
    use crate::modq::ModMatrix;
    use crate::reductions::oracle::{symmetrize, ConstantAnswerOracle, PgmOracle};
    use crate::rng::fork;

    fn ctx(q: u32, rows: &[Vec<i64>], f: AmplitudeTable) -> LatticeContext {
        LatticeContext::new(ModMatrix::from_rows_i64(q, rows).unwrap(), f).unwrap()
    }

    #[test]
    fn perfect_oracle_on_indicator_family() {
        // over Z_2, T = Z_2^3 makes f a delta and every psi_s a basis state
        let t = TargetSet::Binary;
        let f = indicator_fourier_family(&t, 2, 3).unwrap();
        let c = ctx(2, &[vec![1, 0, 1]], f);
        let o = PgmOracle::new(&c).unwrap();
        let rep = forward_report(&c, &t, &o).unwrap();
        assert!((rep.p.unwrap() - 1.0).abs() < 1e-9);
        assert!(rep.all_passed(), "{:?}", rep.checks);
        // p'_y = q^n |Λ⊥_y ∩ T| / |T|
        for (y, p) in rep.per_y_success.iter().enumerate() {
            let expect = 2.0 * c.fiber(y).len() as f64 / 8.0;
            assert!((p - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn pgm_on_random_families_respects_bound() {
        let mut rng = fork(5, "fwd");
        for (q, rows) in [(2u32, vec![vec![1i64, 1, 0]]), (3, vec![vec![1, 2]]), (2, vec![vec![1, 0, 1], vec![0, 1, 1]])] {
            let m = rows[0].len();
            let f = AmplitudeTable::random_dense(q, m, &mut rng).unwrap();
            let c = ctx(q, &rows, f);
            let o = PgmOracle::new(&c).unwrap();
            for t in [TargetSet::Binary, TargetSet::Linf { bound: 0 }] {
                let rep = forward_report(&c, &t, &o).unwrap();
                assert!(rep.all_passed(), "{:?}", rep.checks);
            }
        }
    }

    #[test]
    fn symmetrized_biased_oracle() {
        let mut rng = fork(6, "fwd-biased");
        let f = AmplitudeTable::random_dense(2, 3, &mut rng).unwrap();
        let c = ctx(2, &[vec![1, 0, 1]], f);
        let raw = ConstantAnswerOracle::new(&c, 0).unwrap();
        let raw_rep = forward_report(&c, &TargetSet::Binary, &raw).unwrap();
        assert!(raw_rep.checks.iter().any(|k| k.name == "oracle_symmetric" && !k.passed));
        let sym = symmetrize(Box::new(raw), &c).unwrap();
        let rep = forward_report(&c, &TargetSet::Binary, &sym).unwrap();
        assert!((rep.p.unwrap() - 0.5).abs() < 1e-9);
        assert!(rep.all_passed(), "{:?}", rep.checks);
    }

    #[test]
    fn sampled_mode_returns_consistent_sample() {
        let f = indicator_fourier_family(&TargetSet::Binary, 2, 3).unwrap();
        let c = ctx(2, &[vec![1, 1, 1]], f);
        let o = PgmOracle::new(&c).unwrap();
        let mut rng = fork(7, "sample");
        let out = forward_isis(&c, &TargetSet::Binary, &o, 1, Some(&mut rng)).unwrap();
        assert_eq!(out.attempts, Some(1));
        assert_eq!(out.sampled_in_target, Some(true));
    }
}
