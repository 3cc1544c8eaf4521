use std::cmp::Ordering;

use crate::error::Result;
use crate::model::{Allocation, DualPoint, Scenario};

use super::{bisect_price, finish, priorities_at, seconds_per_bit, slot_usage, times_at, Draft, PolicyKind, SolveReport};

/// Optimal time sharing for fixed priorities.
#[derive(Debug, Clone)]
pub(crate) struct TimeShare {
    pub lambda: f64,
    pub ell: Vec<f64>,
    pub t: Vec<f64>,
    pub marginal: Option<usize>,
    pub iterations: usize,
}

impl TimeShare {
    pub fn cloud_cycles(&self, s: &Scenario) -> f64 {
        self.ell.iter().zip(&s.users).map(|(l, u)| l * u.cycles_per_bit).sum()
    }
}

/// Solves the unbounded-cloud problem for given priorities `phi`.
///
/// The slot usage `Σ_k ℓ_k(λ) τ_k(λ)` is continuous and decreasing between
/// consecutive distinct priorities and drops at each of them. Walking the
/// breakpoints from the top locates the root either inside a segment
/// (bisected, no interior user) or on a drop, where the tied users are
/// filled in a fixed order and one of them takes the remainder.
pub(crate) fn share_time(s: &Scenario, m: &[f64], phi: &[f64]) -> Result<TimeShare> {
    let k = s.len();
    let slot = s.system.slot;

    if phi.iter().all(|&p| p <= 0.0) && m.iter().all(|&x| x <= 0.0) {
        return Ok(TimeShare { lambda: 0.0, ell: vec![0.0; k], t: vec![0.0; k], marginal: None, iterations: 0 });
    }

    let mut levels: Vec<f64> = phi.iter().copied().filter(|&p| p > 0.0).collect();
    levels.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    levels.dedup();

    let bits = |cut: &dyn Fn(f64) -> bool| -> Vec<f64> {
        s.users
            .iter()
            .enumerate()
            .map(|(i, u)| if cut(phi[i]) { u.data_bits } else { m[i] })
            .collect()
    };

    let mut iterations = 0;
    let mut upper = f64::INFINITY;
    for &level in &levels {
        iterations += 1;
        let above = bits(&|p| p > level);
        if slot_usage(s, &above, level) >= slot {
            return segment(s, above, level, upper, iterations);
        }
        let with_ties = bits(&|p| p >= level);
        if slot_usage(s, &with_ties, level) >= slot {
            return Ok(fill_ties(s, m, phi, above, level, iterations));
        }
        upper = level;
    }
    let above = bits(&|p| p > 0.0);
    segment(s, above, 0.0, upper, iterations)
}

fn segment(s: &Scenario, ell: Vec<f64>, lo: f64, hi: f64, iterations: usize) -> Result<TimeShare> {
    let (lambda, n) = bisect_price(s, &ell, lo, hi)?;
    let t = times_at(s, &ell, lambda);
    Ok(TimeShare { lambda, ell, t, marginal: None, iterations: iterations + n })
}

/// Price fixed at a tied priority; the tied users absorb the slack in the
/// order "all but the lowest index ascending, then the lowest index".
fn fill_ties(s: &Scenario, m: &[f64], phi: &[f64], mut ell: Vec<f64>, level: f64, iterations: usize) -> TimeShare {
    let rc = s.radio();
    let mut remaining = s.system.slot - slot_usage(s, &ell, level);
    let tied: Vec<usize> = (0..s.len()).filter(|&i| phi[i] == level).collect();
    let order = tied.iter().skip(1).chain(tied.first()).copied();
    let mut marginal = None;
    for i in order {
        let u = &s.users[i];
        let tau = seconds_per_bit(level, u.beta, u.h2, rc);
        let room = (u.data_bits - m[i]) * tau;
        if marginal.is_some() || remaining <= 0.0 {
            ell[i] = m[i];
        } else if room <= remaining {
            ell[i] = u.data_bits;
            remaining -= room;
        } else {
            ell[i] = (m[i] + remaining / tau).clamp(m[i], u.data_bits);
            remaining = 0.0;
            marginal = Some(i);
        }
    }
    let t = times_at(s, &ell, level);
    TimeShare { lambda: level, ell, t, marginal, iterations }
}

/// Time-sharing solve at capacity price `mu`.
pub(crate) fn share_time_at(s: &Scenario, m: &[f64], mu: f64) -> Result<TimeShare> {
    let phi = priorities_at(s, mu)?;
    share_time(s, m, &phi)
}

/// Optimal policy with an unbounded cloud.
///
/// Any finite cloud capacity in `s` is ignored; the report is audited
/// against the relaxed scenario.
pub fn solve_p2(s: &Scenario) -> Result<SolveReport> {
    s.validate()?;
    let relaxed = s.relaxed();
    let m = relaxed.min_offloads();
    let share = share_time_at(&relaxed, &m, 0.0)?;
    let draft = Draft {
        alloc: Allocation { ell: share.ell, t: share.t },
        dual: DualPoint { lambda: share.lambda, mu: 0.0 },
        outer_iterations: 0,
        inner_iterations: share.iterations,
        marginal_user: share.marginal,
        capacity_marginal_user: None,
    };
    finish(&relaxed, draft, PolicyKind::P2Optimal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CloudCapacity, SystemParams, UserParams};
    use crate::scalarfn::RadioConstants;

    fn scenario(users: Vec<UserParams>) -> Scenario {
        let sys = SystemParams { slot: 0.1, radio: RadioConstants::new(1e7, 1e-9).unwrap(), cloud: CloudCapacity::Infinite };
        Scenario::new(sys, users).unwrap()
    }

    fn user(c: f64, p: f64, h2: f64, r: f64, fk: f64) -> UserParams {
        UserParams { beta: 1.0, cycles_per_bit: c, energy_per_cycle: p, h2, data_bits: r, cpu_speed: fk }
    }

    #[test]
    fn forced_single_user_uses_whole_slot() {
        // υ ≈ 0.72 ≤ 1, m⁺ = 4e5 − 1e9·0.1/1000 = 3e5
        let s = scenario(vec![user(1000.0, 5e-14, 1e-6, 4e5, 1e9)]);
        let r = solve_p2(&s).unwrap();
        assert_eq!(r.allocation.ell[0], 3e5);
        assert!((r.allocation.t[0] - 0.1).abs() <= 1e-12);
        assert!(r.dual.lambda > 0.0);
    }

    #[test]
    fn case_one_is_all_local() {
        let users = vec![user(1000.0, 5e-14, 1e-6, 1e4, 1e9), user(600.0, 3e-14, 2e-6, 5e4, 1e9)];
        let s = scenario(users.clone());
        let r = solve_p2(&s).unwrap();
        assert!(r.allocation.ell.iter().all(|&l| l == 0.0));
        assert!(r.allocation.t.iter().all(|&t| t == 0.0));
        assert_eq!(r.dual.lambda, 0.0);
        let local: f64 = users.iter().map(|u| u.data_bits * u.cycles_per_bit * u.energy_per_cycle).sum();
        assert!((r.objective() - local).abs() <= 1e-15 * local);
        assert_eq!(r.diagnostics.kkt_residual, Some(0.0));
    }

    #[test]
    fn identical_users_tie_break_is_deterministic() {
        // Identical voluntary offloaders that cannot all finish: the slot is
        // closed on their common priority with at most one interior user.
        let u = user(1500.0, 2e-10, 1e-6, 4e5, 1e9);
        let s = scenario(vec![u, u, u]);
        let m = s.min_offloads()[0];
        let r = solve_p2(&s).unwrap();
        let ell = &r.allocation.ell;
        let interior: Vec<usize> = (0..3).filter(|&i| ell[i] != u.data_bits && ell[i] != m).collect();
        assert!(interior.len() <= 1, "{ell:?}");
        assert_eq!(r.diagnostics.marginal_user, interior.first().copied());
        assert!((r.allocation.total_time() - 0.1).abs() < 1e-12);
        assert_eq!(solve_p2(&s).unwrap().allocation, r.allocation);
    }
}
