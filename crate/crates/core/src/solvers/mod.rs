//! Threshold policies for the TDMA offloading problem.
//!
//! Every optimal policy here has the same shape: a user offloads
//! everything when its (effective) priority beats the time-sharing price
//! `λ`, only its minimum offload when it loses, and at most one user per
//! active constraint sits strictly in between. The solvers search for the
//! prices and then build the allocation in closed form.
//!
//! * [`solve_p2`]: unbounded cloud, one price `λ`.
//! * [`solve_p1`]: bounded cloud, prices `(λ, μ)` by nested search.
//! * [`solve_suboptimal`]: greedy capacity fill by priority, then `λ`.
//! * [`solve_baseline`]: equal slot shares, per-user optimal bits.

mod baseline;
mod p1;
mod p2;
mod suboptimal;

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Allocation, ConstraintResiduals, EnergyBreakdown, Scenario};
use crate::oracle;
use crate::scalarfn::{self, RadioConstants};

pub use crate::model::DualPoint;
pub use baseline::solve_baseline;
pub use p1::solve_p1;
pub use p2::solve_p2;
pub use suboptimal::solve_suboptimal;

/// Hard cap on iterations of any single bisection level.
pub const MAX_BISECTION_ITERS: usize = 200;
/// Allocations in reports are audited against this relative tolerance.
pub const SOLVER_TOL: f64 = 1e-9;
/// Certified optimal reports must have a KKT residual below this.
pub const KKT_CERT_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "P2-optimal")]
    P2Optimal,
    #[serde(rename = "P1-optimal")]
    P1Optimal,
    #[serde(rename = "suboptimal")]
    Suboptimal,
    #[serde(rename = "baseline")]
    Baseline,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] =
        [PolicyKind::P2Optimal, PolicyKind::P1Optimal, PolicyKind::Suboptimal, PolicyKind::Baseline];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::P2Optimal => "P2-optimal",
            PolicyKind::P1Optimal => "P1-optimal",
            PolicyKind::Suboptimal => "suboptimal",
            PolicyKind::Baseline => "baseline",
        }
    }

    pub fn is_optimal(&self) -> bool {
        matches!(self, PolicyKind::P2Optimal | PolicyKind::P1Optimal)
    }

    pub fn solve(&self, s: &Scenario) -> Result<SolveReport> {
        match self {
            PolicyKind::P2Optimal => solve_p2(s),
            PolicyKind::P1Optimal => solve_p1(s),
            PolicyKind::Suboptimal => solve_suboptimal(s),
            PolicyKind::Baseline => solve_baseline(s),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p2-optimal" | "p2" => Ok(PolicyKind::P2Optimal),
            "p1-optimal" | "p1" | "optimal" => Ok(PolicyKind::P1Optimal),
            "suboptimal" | "sub" => Ok(PolicyKind::Suboptimal),
            "baseline" | "equal" => Ok(PolicyKind::Baseline),
            other => Err(Error::Parse(format!("unknown policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Iterations of the capacity-price search (zero when it is not needed).
    pub outer_iterations: usize,
    /// Total iterations spent on the time-sharing price.
    pub inner_iterations: usize,
    /// User with interior `ℓ` that closes the slot.
    pub marginal_user: Option<usize>,
    /// Second interior user that closes the cloud capacity, if any.
    pub capacity_marginal_user: Option<usize>,
    /// Normalized KKT residual; only reported for the optimal policies.
    pub kkt_residual: Option<f64>,
    pub constraint_residuals: ConstraintResiduals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub allocation: Allocation,
    pub dual: DualPoint,
    pub energy: EnergyBreakdown,
    pub policy_kind: PolicyKind,
    pub diagnostics: Diagnostics,
}

impl SolveReport {
    pub fn objective(&self) -> f64 {
        self.energy.weighted_total
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Intermediate solver output before accounting.
#[derive(Debug, Clone)]
pub(crate) struct Draft {
    pub alloc: Allocation,
    pub dual: DualPoint,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub marginal_user: Option<usize>,
    pub capacity_marginal_user: Option<usize>,
}

/// Evaluates, audits and (for optimal kinds) certifies a draft.
///
/// `audit` is the scenario whose constraints the allocation must satisfy;
/// P2 is audited against the relaxed scenario.
pub(crate) fn finish(audit: &Scenario, draft: Draft, kind: PolicyKind) -> Result<SolveReport> {
    let energy = model::evaluate(audit, &draft.alloc)?;
    let violations = model::check_constraints(audit, &draft.alloc, SOLVER_TOL);
    if let Some(v) = violations.first() {
        return Err(Error::Numeric(format!(
            "{kind} produced an allocation violating {:?} (user {:?}) by {:e}",
            v.constraint, v.user, v.magnitude
        )));
    }
    let kkt_residual = if kind.is_optimal() {
        let r = oracle::kkt_residual(audit, &draft.alloc, &draft.dual).max;
        if r > KKT_CERT_TOL {
            return Err(Error::Numeric(format!("{kind} KKT residual {r:e} exceeds {KKT_CERT_TOL:e}")));
        }
        Some(r)
    } else {
        None
    };
    Ok(SolveReport {
        energy,
        policy_kind: kind,
        diagnostics: Diagnostics {
            outer_iterations: draft.outer_iterations,
            inner_iterations: draft.inner_iterations,
            marginal_user: draft.marginal_user,
            capacity_marginal_user: draft.capacity_marginal_user,
            kkt_residual,
            constraint_residuals: model::constraint_residuals(audit, &draft.alloc),
        },
        allocation: draft.alloc,
        dual: draft.dual,
    })
}

/// Slot time per offloaded bit at price `λ`:
/// `ln2 / (B [W₀((λh²/β − N₀)/(N₀ e)) + 1])`.
///
/// Finite for every `λ > 0` and strictly decreasing in `λ`.
pub fn time_per_bit(lambda: f64, beta: f64, h2: f64, rc: &RadioConstants) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::domain("time_per_bit", lambda));
    }
    if !(beta > 0.0 && h2 > 0.0) {
        return Err(Error::domain("time_per_bit", beta.min(h2)));
    }
    Ok(seconds_per_bit(lambda, beta, h2, rc))
}

// `+∞` at λ = 0.
pub(crate) fn seconds_per_bit(lambda: f64, beta: f64, h2: f64, rc: &RadioConstants) -> f64 {
    let q = lambda * h2 / (beta * rc.noise);
    let u = scalarfn::w0_plus_one(q).unwrap_or(0.0);
    LN_2 / (rc.bandwidth * u)
}

/// Per-user priorities at capacity price `mu`.
///
/// A weighted user sees the price as `μ/β` per cycle, so the effective
/// local energy is `P − μ/β`; with unit weights this is `P − μ`.
pub fn priorities_at(s: &Scenario, mu: f64) -> Result<Vec<f64>> {
    let rc = s.radio();
    s.users
        .iter()
        .map(|u| scalarfn::effective_priority(u.beta, u.cycles_per_bit, u.energy_per_cycle, u.h2, mu / u.beta, rc))
        .collect()
}

/// Offloading decision of one user at a fixed price pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Minimum,
    Complete,
    /// Priority equals the price; any `ℓ ∈ [m⁺, R]` is consistent.
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyPoint {
    /// Bits per user; marginal users are reported at `m⁺`.
    pub ell: Vec<f64>,
    pub t: Vec<f64>,
    pub decisions: Vec<Decision>,
}

/// The threshold policy at prices `(λ, μ)`.
///
/// Users whose priority lies within `tie_tol` (relative) of `λ` are flagged
/// [`Decision::Marginal`].
pub fn policy_at(lambda: f64, mu: f64, s: &Scenario, tie_tol: f64) -> Result<PolicyPoint> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::domain("policy_at", lambda));
    }
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::domain("policy_at", mu));
    }
    let rc = s.radio();
    let phi = priorities_at(s, mu)?;
    let m = s.min_offloads();
    let k = s.len();
    let mut out = PolicyPoint { ell: Vec::with_capacity(k), t: Vec::with_capacity(k), decisions: Vec::with_capacity(k) };
    for (i, u) in s.users.iter().enumerate() {
        let band = tie_tol * lambda.max(phi[i]);
        let decision = if (phi[i] - lambda).abs() <= band && phi[i] > 0.0 {
            Decision::Marginal
        } else if phi[i] > lambda {
            Decision::Complete
        } else {
            Decision::Minimum
        };
        let ell = if decision == Decision::Complete { u.data_bits } else { m[i] };
        let t = if ell > 0.0 { time_per_bit(lambda, u.beta, u.h2, rc)? * ell } else { 0.0 };
        out.ell.push(ell);
        out.t.push(t);
        out.decisions.push(decision);
    }
    Ok(out)
}

/// Slot time used by fixed bit counts at price `λ`.
pub(crate) fn slot_usage(s: &Scenario, ell: &[f64], lambda: f64) -> f64 {
    let rc = s.radio();
    s.users
        .iter()
        .zip(ell)
        .filter(|(_, &l)| l > 0.0)
        .map(|(u, &l)| l * seconds_per_bit(lambda, u.beta, u.h2, rc))
        .sum()
}

pub(crate) fn times_at(s: &Scenario, ell: &[f64], lambda: f64) -> Vec<f64> {
    let rc = s.radio();
    s.users
        .iter()
        .zip(ell)
        .map(|(u, &l)| if l > 0.0 { l * seconds_per_bit(lambda, u.beta, u.h2, rc) } else { 0.0 })
        .collect()
}

/// Natural price scale `min_k β_k N₀ / h_k²`, where the per-bit time is `ln2/B`.
pub(crate) fn price_scale(s: &Scenario) -> f64 {
    s.users
        .iter()
        .map(|u| u.beta * s.radio().noise / u.h2)
        .fold(f64::INFINITY, f64::min)
}

/// Bisects `λ ∈ (lo, hi)` for `slot_usage(λ) = T` with fixed bits.
///
/// `usage(lo) > T ≥ usage(hi)` is assumed; `hi = ∞` triggers doubling from
/// `max(lo, scale)`. Returns `(λ, iterations)` with `usage(λ) ≤ T`.
pub(crate) fn bisect_price(s: &Scenario, ell: &[f64], lo: f64, hi: f64) -> Result<(f64, usize)> {
    let slot = s.system.slot;
    let usage = |lam: f64| slot_usage(s, ell, lam);
    let mut iters = 0;
    let (mut lo, mut hi) = (lo, hi);
    if hi.is_infinite() {
        hi = lo.max(price_scale(s));
        while usage(hi) > slot {
            lo = hi;
            hi *= 2.0;
            iters += 1;
            if iters > 4 * MAX_BISECTION_ITERS || !hi.is_finite() {
                return Err(Error::IterationLimit { what: "time-sharing price bracket", iterations: iters });
            }
        }
    }
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        iters += 1;
        let used = usage(mid);
        if used > slot {
            lo = mid;
        } else {
            hi = mid;
            if used == slot {
                break;
            }
        }
    }
    Ok((hi, iters))
}

/// `λ` that closes the slot for fixed bits, or 0 when nothing is sent.
pub(crate) fn price_for_bits(s: &Scenario, ell: &[f64]) -> Result<(f64, usize)> {
    if ell.iter().all(|&l| l <= 0.0) {
        return Ok((0.0, 0));
    }
    bisect_price(s, ell, 0.0, f64::INFINITY)
}

/// Upper bound on the capacity price, generalized to weights:
/// `max_k β_k (P_k − N₀ ln2 / (B C_k h_k²))`. Every priority vanishes there.
pub fn mu_max(s: &Scenario) -> f64 {
    let rc = s.radio();
    s.users
        .iter()
        .map(|u| u.beta * (u.energy_per_cycle - rc.min_marginal_power() / (u.cycles_per_bit * u.h2)))
        .fold(f64::NEG_INFINITY, f64::max)
}
