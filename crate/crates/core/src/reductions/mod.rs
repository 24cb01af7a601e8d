//! Reduction pipelines: S|LWE> oracles and their symmetrization, the forward
//! ISIS algorithm, the reverse measurement in the `B_s` basis, and the
//! solver-derived IC|LWE> oracle.

mod end_to_end;
mod forward;
mod oracle;
mod reverse;

pub use end_to_end::{end_to_end, sample_solvable_matrix, EndToEndSolver};
pub use forward::{forward_isis, forward_report, ForwardOutcome};
pub use oracle::{
    oracle_layout, profile, symmetrize, unitarity_residual, ConstantAnswerOracle, OracleProfile,
    PgmOracle, SlweOracle, SymmetrizedOracle, Wiring,
};
pub use reverse::{
    iclwe_oracle_from_solver, reverse_report, reverse_slwe, theorem3_report, IclweOracle,
    ReverseOutcome, SolverOracle,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::modq::{Instance, ModMatrix};
use crate::rng::sha256_hex;

/// One asserted relation between a measured value and a bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub relation: &'static str,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// `measured >= bound - tolerance`.
    pub fn ge(name: impl Into<String>, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            relation: ">=",
            measured,
            bound,
            tolerance,
            passed: measured >= bound - tolerance,
        }
    }

    /// `measured <= bound + tolerance`.
    pub fn le(name: impl Into<String>, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            relation: "<=",
            measured,
            bound,
            tolerance,
            passed: measured <= bound + tolerance,
        }
    }

    /// `|measured - bound| <= tolerance`.
    pub fn eq(name: impl Into<String>, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            relation: "==",
            measured,
            bound,
            tolerance,
            passed: (measured - bound).abs() <= tolerance,
        }
    }
}

/// Measured probabilities, fidelities, and bounds of one pipeline run.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ReductionReport {
    pub kind: String,
    pub q: u32,
    pub n: usize,
    pub m: usize,
    pub instance_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Total-variation distance of the solver output from uniform, averaged over `y`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_y_success: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_s_success: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_success: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    pub checks: Vec<Check>,
}

impl ReductionReport {
    pub fn new(kind: &str, a: &ModMatrix) -> Self {
        Self {
            kind: kind.to_string(),
            q: a.modulus(),
            n: a.rows(),
            m: a.cols(),
            instance_digest: instance_digest(a),
            ..Default::default()
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// SHA-256 of the canonical instance JSON (A only).
pub fn instance_digest(a: &ModMatrix) -> String {
    let inst = Instance {
        a: a.clone(),
        y: None,
    };
    sha256_hex(inst.to_json().as_bytes())
}

fn unit_interval(name: &str, x: f64) -> Result<f64> {
    if !(-1e-9..=1.0 + 1e-9).contains(&x) || x.is_nan() {
        return Err(Error::OutOfRange(format!("{name} = {x} outside [0, 1]")));
    }
    Ok(x.clamp(0.0, 1.0))
}

/// `p (1 - eta) - 2 sqrt(p (1 - p) eta)`, reported as-is (possibly negative).
pub fn forward_bound(p: f64, eta: f64) -> Result<f64> {
    let p = unit_interval("p", p)?;
    let eta = unit_interval("eta", eta)?;
    Ok(p * (1.0 - eta) - 2.0 * (p * (1.0 - p) * eta).sqrt())
}

/// Value of `(1 - eps - eps' - 2 sqrt(eps eps'))^2`, clamped at zero when the
/// inner term is negative; the inner term is returned alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReverseBound {
    pub value: f64,
    pub inner: f64,
}

pub fn reverse_bound(eps: f64, eps_prime: f64) -> Result<ReverseBound> {
    let e = unit_interval("epsilon", eps)?;
    let e2 = unit_interval("epsilon'", eps_prime)?;
    let inner = 1.0 - e - e2 - 2.0 * (e * e2).sqrt();
    Ok(ReverseBound {
        value: if inner > 0.0 { inner * inner } else { 0.0 },
        inner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_bound_examples() {
        assert_eq!(forward_bound(1.0, 0.0).unwrap(), 1.0);
        assert!((forward_bound(1.0, 0.3).unwrap() - 0.7).abs() < 1e-15);
        let v = forward_bound(0.5, 0.1).unwrap();
        assert!((v - (0.45 - 2.0 * 0.025f64.sqrt())).abs() < 1e-15);
        assert!((v - 0.133772).abs() < 1e-6);
        assert!(forward_bound(1.5, 0.0).is_err());
    }

    #[test]
    fn reverse_bound_examples() {
        assert_eq!(reverse_bound(0.0, 0.0).unwrap().value, 1.0);
        assert!((reverse_bound(0.2, 0.0).unwrap().value - 0.64).abs() < 1e-15);
        let inner: f64 = 1.0 - 0.01 - 0.04 - 2.0 * (0.01f64 * 0.04).sqrt();
        assert!((reverse_bound(0.01, 0.04).unwrap().value - inner * inner).abs() < 1e-12);
        assert!((inner * inner - 0.8281).abs() < 1e-12);
        let neg = reverse_bound(0.6, 0.5).unwrap();
        assert_eq!(neg.value, 0.0);
        assert!(neg.inner < 0.0);
        assert!(reverse_bound(-0.5, 0.0).is_err());
    }
}
