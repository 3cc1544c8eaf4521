use crate::error::Result;
use crate::model::{self, Allocation, CloudCapacity, DualPoint, Scenario};
use crate::scalarfn;

use super::{finish, Draft, PolicyKind, SolveReport, MAX_BISECTION_ITERS};

/// Equal-share reference policy.
///
/// Users that gain from offloading (`υ > 1`) or must offload (`m⁺ > 0`)
/// split the slot evenly. Each then sends the bits that minimize its own
/// energy for that share, `clamp(t f'⁻¹(C P h²), m⁺, R)`. If the cloud
/// overflows, a common price `μ` on cycles is raised (bisection) until it
/// fits.
pub fn solve_baseline(s: &Scenario) -> Result<SolveReport> {
    s.validate()?;
    model::check_feasible(s).into_result()?;
    let rc = *s.radio();
    let m = s.min_offloads();

    let active: Vec<bool> = s
        .users
        .iter()
        .zip(&m)
        .map(|(u, &mk)| Ok(mk > 0.0 || scalarfn::upsilon(u.cycles_per_bit, u.energy_per_cycle, u.h2, &rc)? > 1.0))
        .collect::<Result<_>>()?;
    let n_active = active.iter().filter(|&&a| a).count();
    if n_active == 0 {
        let draft = blank(s.len(), 0.0, 0);
        return finish(s, draft, PolicyKind::Baseline);
    }
    let share = s.system.slot / n_active as f64;
    let t: Vec<f64> = active.iter().map(|&a| if a { share } else { 0.0 }).collect();

    let bits_at = |mu: f64| -> Vec<f64> {
        s.users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                if !active[i] {
                    return m[i];
                }
                let marginal = u.cycles_per_bit * (u.energy_per_cycle - mu / u.beta) * u.h2;
                let rate = if marginal > rc.min_marginal_power() {
                    scalarfn::f_prime_inv(marginal, &rc).unwrap_or(0.0)
                } else {
                    0.0
                };
                (t[i] * rate).clamp(m[i], u.data_bits)
            })
            .collect()
    };
    let cycles = |ell: &[f64]| -> f64 { s.users.iter().zip(ell).map(|(u, l)| u.cycles_per_bit * l).sum() };

    let mut ell = bits_at(0.0);
    let mut mu = 0.0;
    let mut iterations = 0;
    if let CloudCapacity::Finite(cap) = s.system.cloud {
        if cycles(&ell) > cap {
            // every rate is zero once μ/β reaches P
            let mut hi = s
                .users
                .iter()
                .map(|u| u.beta * u.energy_per_cycle)
                .fold(0.0, f64::max);
            let mut lo = 0.0;
            let mut hi_bits = bits_at(hi);
            for _ in 0..MAX_BISECTION_ITERS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                iterations += 1;
                let b = bits_at(mid);
                if cycles(&b) > cap {
                    lo = mid;
                } else {
                    hi = mid;
                    hi_bits = b;
                }
            }
            mu = hi;
            ell = hi_bits;
        }
    }

    let draft = Draft {
        alloc: Allocation { ell, t },
        dual: DualPoint { lambda: 0.0, mu },
        outer_iterations: iterations,
        inner_iterations: 0,
        marginal_user: None,
        capacity_marginal_user: None,
    };
    finish(s, draft, PolicyKind::Baseline)
}

fn blank(k: usize, mu: f64, iterations: usize) -> Draft {
    Draft {
        alloc: Allocation::zeros(k),
        dual: DualPoint { lambda: 0.0, mu },
        outer_iterations: iterations,
        inner_iterations: 0,
        marginal_user: None,
        capacity_marginal_user: None,
    }
}
