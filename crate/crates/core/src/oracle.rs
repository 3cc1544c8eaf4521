//! Brute-force verifier for small scenarios and a KKT residual checker.
//!
//! Nothing in here calls the closed-form machinery in [`crate::solvers`]:
//! the oracle only evaluates `f`, `f'` and `g` and does its own searches,
//! so agreement with the solvers is evidence rather than tautology.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Allocation, CloudCapacity, DualPoint, Scenario};
use crate::scalarfn::{self, RadioConstants};

const MAX_USERS: usize = 6;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Rounds of grid search, each shrinking the box around the incumbent.
    pub grid_refinements: usize,
    /// Points per dimension in each grid round.
    pub grid_points: usize,
    /// Box shrink factor between rounds.
    pub shrink: f64,
    /// Maximum sweeps of coordinate and pairwise-exchange line searches.
    pub coordinate_passes: usize,
    /// Relative objective improvement below which a sweep counts as converged.
    pub tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { grid_refinements: 3, grid_points: 11, shrink: 0.2, coordinate_passes: 40, tol: 1e-12 }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<()> {
        if self.grid_refinements == 0 || self.grid_points < 2 || self.coordinate_passes == 0 {
            return Err(Error::InvalidInput("oracle counts must be positive (grid_points ≥ 2)".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) || !(self.tol > 0.0) {
            return Err(Error::InvalidInput("oracle shrink must be in (0,1) and tol positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub allocation: Allocation,
    pub objective: f64,
    /// Number of value-function evaluations.
    pub evaluations: usize,
    /// False if the last coordinate sweep still improved by more than `tol`.
    pub converged: bool,
}

/// Rate at which an active user with weight-to-gain ratio `a = β/h²`
/// transmits under slot price `lambda`: the root of `a g(r) + λ = 0`.
fn rate_at_price(lambda: f64, a: f64, rc: &RadioConstants) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let target = -lambda / a;
    // g is concave and decreasing, so Newton from a point with g(r) ≤ target
    // approaches the root monotonically from the right.
    let mut r = rc.bandwidth;
    while scalarfn::g(r, rc).unwrap_or(f64::NEG_INFINITY) > target {
        r *= 2.0;
        if !r.is_finite() {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let gr = scalarfn::g(r, rc).unwrap_or(f64::NEG_INFINITY);
        let slope = -r * scalarfn::f_prime(r, rc).unwrap_or(f64::INFINITY) * std::f64::consts::LN_2 / rc.bandwidth;
        if slope >= 0.0 || !slope.is_finite() {
            break;
        }
        let step = (gr - target) / slope;
        let next = r - step;
        let next = if next <= 0.0 { 0.5 * r } else { next };
        if (r - next).abs() <= 1e-15 * r {
            r = next;
            break;
        }
        r = next;
    }
    r
}

/// Minimum-energy times for fixed bits: golden-section on the slot price.
fn optimal_times(s: &Scenario, ell: &[f64]) -> Vec<f64> {
    let rc = s.radio();
    let slot = s.system.slot;
    let active: Vec<usize> = (0..s.len()).filter(|&k| ell[k] > 0.0).collect();
    let mut t = vec![0.0; s.len()];
    if active.is_empty() {
        return t;
    }
    let weight = |k: usize| s.users[k].beta / s.users[k].h2;

    // dual value of the time-sharing constraint
    let dual = |lambda: f64| -> f64 {
        let mut v = -lambda * slot;
        for &k in &active {
            let r = rate_at_price(lambda, weight(k), rc);
            let tk = ell[k] / r;
            v += weight(k) * tk * scalarfn::f(r, rc).unwrap_or(f64::INFINITY) + lambda * tk;
        }
        v
    };
    let usage = |lambda: f64| -> f64 {
        active.iter().map(|&k| ell[k] / rate_at_price(lambda, weight(k), rc)).sum()
    };

    let mut hi = active.iter().map(|&k| rc.noise / s.users[k].h2 * s.users[k].beta).fold(f64::INFINITY, f64::min);
    while usage(hi) > slot {
        hi *= 2.0;
    }
    let (mut a, mut b) = (0.0, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (dual(x1), dual(x2));
    for _ in 0..120 {
        if b - a <= 1e-13 * b {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = dual(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = dual(x1);
        }
    }
    let lambda = 0.5 * (a + b);
    let mut total = 0.0;
    for &k in &active {
        t[k] = ell[k] / rate_at_price(lambda, weight(k), rc);
        total += t[k];
    }
    // use the whole slot: offload energy only falls as t grows
    let scale = slot / total;
    for &k in &active {
        t[k] *= scale;
    }
    t
}

struct Problem<'a> {
    s: &'a Scenario,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cap: f64,
}

impl Problem<'_> {
    fn fits(&self, ell: &[f64]) -> bool {
        if self.cap.is_infinite() {
            return true;
        }
        // slack for rounding in cycle-preserving exchanges along the boundary
        let used: f64 = ell.iter().zip(&self.s.users).map(|(l, u)| l * u.cycles_per_bit).sum();
        used <= self.cap * (1.0 + 1e-12)
    }

    fn value(&self, ell: &[f64]) -> f64 {
        let t = optimal_times(self.s, ell);
        let a = Allocation { ell: ell.to_vec(), t };
        model::objective(self.s, &a).unwrap_or(f64::INFINITY)
    }
}

fn golden_min(mut a: f64, mut b: f64, mut f: impl FnMut(f64) -> f64, evals: &mut usize) -> (f64, f64) {
    let (fa, fb) = (f(a), f(b));
    *evals += 2;
    let (mut best_x, mut best_f) = if fa <= fb { (a, fa) } else { (b, fb) };
    if b - a <= 0.0 {
        return (best_x, best_f);
    }
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    *evals += 2;
    for _ in 0..100 {
        if b - a <= 1e-12 * b.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        *evals += 1;
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v < best_f {
            best_x = x;
            best_f = v;
        }
    }
    (best_x, best_f)
}

/// Direct numerical minimization of the offloading problem for `K ≤ 6`.
///
/// Nested grid refinement over the offloaded bits, followed by sweeps of
/// golden-section line searches along each coordinate and along
/// cycle-preserving exchanges between pairs of users. For each candidate
/// `ℓ` the slot is split optimally by a golden-section search on its price.
pub fn oracle_minimize(s: &Scenario, cfg: &OracleConfig) -> Result<OracleResult> {
    cfg.validate()?;
    s.validate()?;
    if s.len() > MAX_USERS {
        return Err(Error::InvalidInput(format!("oracle supports at most {MAX_USERS} users, got {}", s.len())));
    }
    model::check_feasible(s).into_result()?;
    let k = s.len();
    let prob = Problem {
        s,
        lo: s.min_offloads(),
        hi: s.users.iter().map(|u| u.data_bits).collect(),
        cap: match s.system.cloud {
            CloudCapacity::Finite(f) => f,
            CloudCapacity::Infinite => f64::INFINITY,
        },
    };

    let mut best = prob.lo.clone();
    let mut best_val = prob.value(&best);
    let mut evals = 1;

    let mut box_lo = prob.lo.clone();
    let mut box_hi = prob.hi.clone();
    let n = cfg.grid_points;
    for _ in 0..cfg.grid_refinements {
        let total = n.pow(k as u32);
        let scored: Vec<(usize, f64)> = (0..total)
            .into_par_iter()
            .filter_map(|idx| {
                let mut rem = idx;
                let mut ell = vec![0.0; k];
                for d in 0..k {
                    let step = rem % n;
                    rem /= n;
                    ell[d] = box_lo[d] + (box_hi[d] - box_lo[d]) * step as f64 / (n - 1) as f64;
                }
                prob.fits(&ell).then(|| (idx, prob.value(&ell)))
            })
            .collect();
        evals += scored.len();
        if let Some(&(idx, v)) = scored.iter().min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))) {
            if v < best_val {
                best_val = v;
                let mut rem = idx;
                for d in 0..k {
                    let step = rem % n;
                    rem /= n;
                    best[d] = box_lo[d] + (box_hi[d] - box_lo[d]) * step as f64 / (n - 1) as f64;
                }
            }
        }
        for d in 0..k {
            let half = 0.5 * cfg.shrink * (box_hi[d] - box_lo[d]);
            box_lo[d] = (best[d] - half).max(prob.lo[d]);
            box_hi[d] = (best[d] + half).min(prob.hi[d]);
        }
    }

    let mut converged = false;
    for _ in 0..cfg.coordinate_passes {
        let start = best_val;
        for d in 0..k {
            let others: f64 = (0..k).filter(|&j| j != d).map(|j| best[j] * s.users[j].cycles_per_bit).sum();
            let upper = prob.hi[d].min((prob.cap - others) / s.users[d].cycles_per_bit).max(prob.lo[d]);
            let mut probe = best.clone();
            let (x, v) = golden_min(prob.lo[d], upper, |x| {
                probe[d] = x;
                prob.value(&probe)
            }, &mut evals);
            if v < best_val {
                best[d] = x;
                best_val = v;
            }
        }
        for i in 0..k {
            for j in (i + 1)..k {
                let (ci, cj) = (s.users[i].cycles_per_bit, s.users[j].cycles_per_bit);
                // move δ cycles from j to i
                let up = ((prob.hi[i] - best[i]) * ci).min((best[j] - prob.lo[j]) * cj);
                let down = ((best[i] - prob.lo[i]) * ci).min((prob.hi[j] - best[j]) * cj);
                if up + down <= 0.0 {
                    continue;
                }
                let mut probe = best.clone();
                let (bi, bj) = (best[i], best[j]);
                let (x, v) = golden_min(-down, up, |delta| {
                    probe[i] = (bi + delta / ci).clamp(prob.lo[i], prob.hi[i]);
                    probe[j] = (bj - delta / cj).clamp(prob.lo[j], prob.hi[j]);
                    if prob.fits(&probe) { prob.value(&probe) } else { f64::INFINITY }
                }, &mut evals);
                if v < best_val {
                    best[i] = (bi + x / ci).clamp(prob.lo[i], prob.hi[i]);
                    best[j] = (bj - x / cj).clamp(prob.lo[j], prob.hi[j]);
                    best_val = v;
                }
            }
        }
        if start - best_val <= cfg.tol * best_val.abs() {
            converged = true;
            break;
        }
    }

    let t = optimal_times(s, &best);
    let allocation = Allocation { ell: best, t };
    let objective = model::objective(s, &allocation)?;
    Ok(OracleResult { allocation, objective, evaluations: evals, converged })
}

/// Normalized violations of the optimality conditions at `(ℓ, t; λ, μ)`.
///
/// Each stationarity term is divided by the magnitude of the terms it
/// balances, so every entry is dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktReport {
    /// Worst sign/zero condition on `∂L/∂ℓ_k`.
    pub stationarity_bits: f64,
    /// Worst condition on `∂L/∂t_k`.
    pub stationarity_time: f64,
    /// `|Σt − T| / T` when `λ > 0`.
    pub slackness_time: f64,
    /// `|ΣCℓ − F| / F` when `μ > 0`.
    pub slackness_capacity: f64,
    /// Negative parts of the prices, if any.
    pub dual_sign: f64,
    pub max: f64,
}

/// Checks the optimality conditions of the offloading problem.
///
/// With the Lagrangian `Σ β[t f(ℓ/t)/h² + (R−ℓ)CP] + λ(Σt − T) + μ(ΣCℓ − F)`:
///
/// * `∂L/∂ℓ = β f'(r)/h² − βCP + μC` must be `≥ 0` at `ℓ = m⁺`, `≤ 0` at
///   `ℓ = R` and `= 0` in between, with `r = ℓ/t`;
/// * `∂L/∂t = β g(r)/h² + λ` must vanish whenever `t > 0`.
///
/// An idle user (`t = 0`) is judged at the rate it would use if it sent a
/// bit at price `λ`, i.e. the root of `β g(r)/h² + λ = 0`.
pub fn kkt_residual(s: &Scenario, a: &Allocation, d: &DualPoint) -> KktReport {
    let rc = s.radio();
    let mut rep = KktReport { dual_sign: (-d.lambda).max(0.0) + (-d.mu).max(0.0), ..Default::default() };
    let m = s.min_offloads();
    for (k, u) in s.users.iter().enumerate() {
        let (ell, t) = (a.ell[k], a.t[k]);
        let rate = if t > 0.0 { ell / t } else { rate_at_price(d.lambda, u.beta / u.h2, rc) };
        let marginal_tx = u.beta * scalarfn::f_prime(rate.max(0.0), rc).unwrap_or(f64::INFINITY) / u.h2;
        let local = u.beta * u.local_energy_per_bit();
        let price = d.mu * u.cycles_per_bit;
        let grad = marginal_tx - local + price;
        let scale = marginal_tx + local + price;
        if m[k] < u.data_bits {
            let slack = 1e-12 * u.data_bits;
            let viol = if ell <= m[k] + slack {
                (-grad).max(0.0)
            } else if ell >= u.data_bits - slack {
                grad.max(0.0)
            } else {
                grad.abs()
            };
            rep.stationarity_bits = rep.stationarity_bits.max(viol / scale);
        }
        if t > 0.0 {
            let gv = u.beta * scalarfn::g(rate, rc).unwrap_or(f64::NEG_INFINITY) / u.h2;
            let viol = (gv + d.lambda).abs() / (gv.abs() + d.lambda.abs()).max(f64::MIN_POSITIVE);
            rep.stationarity_time = rep.stationarity_time.max(viol);
        }
    }
    if d.lambda > 0.0 {
        rep.slackness_time = (a.total_time() - s.system.slot).abs() / s.system.slot;
    }
    if let CloudCapacity::Finite(f) = s.system.cloud {
        if d.mu > 0.0 {
            rep.slackness_capacity = (a.cloud_cycles(s) - f).abs() / f;
        }
    }
    rep.max = rep
        .stationarity_bits
        .max(rep.stationarity_time)
        .max(rep.slackness_time)
        .max(rep.slackness_capacity)
        .max(rep.dual_sign);
    rep
}
