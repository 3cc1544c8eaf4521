use std::cmp::Ordering;

use crate::error::Result;
use crate::model::{self, Allocation, CloudCapacity, DualPoint, Scenario};

use super::p2::share_time_at;
use super::{finish, price_for_bits, priorities_at, times_at, Draft, PolicyKind, SolveReport};

/// Low-complexity policy for a bounded cloud.
///
/// 1. Keep the unbounded optimum if it fits into the cloud.
/// 2. Otherwise start every user at `m⁺` and raise users to `R` in
///    descending order of their plain priority, splitting the last one so
///    the cloud is exactly full.
/// 3. Close the slot with a single price `λ` for those fixed bits.
pub fn solve_suboptimal(s: &Scenario) -> Result<SolveReport> {
    s.validate()?;
    model::check_feasible(s).into_result()?;
    let m = s.min_offloads();

    let unbounded = share_time_at(s, &m, 0.0)?;
    let cap = match s.system.cloud {
        CloudCapacity::Finite(f) if unbounded.cloud_cycles(s) > f => f,
        _ => {
            let draft = Draft {
                dual: DualPoint { lambda: unbounded.lambda, mu: 0.0 },
                outer_iterations: 0,
                inner_iterations: unbounded.iterations,
                marginal_user: unbounded.marginal,
                capacity_marginal_user: None,
                alloc: Allocation { ell: unbounded.ell, t: unbounded.t },
            };
            return finish(s, draft, PolicyKind::Suboptimal);
        }
    };

    let (ell, split) = greedy_fill(s, &m, cap)?;
    let (lambda, iters) = price_for_bits(s, &ell)?;
    let draft = Draft {
        alloc: Allocation { t: times_at(s, &ell, lambda), ell },
        dual: DualPoint { lambda, mu: 0.0 },
        outer_iterations: 0,
        inner_iterations: unbounded.iterations + iters,
        marginal_user: None,
        capacity_marginal_user: split,
    };
    finish(s, draft, PolicyKind::Suboptimal)
}

/// Raises users from `m⁺` to `R` by descending priority until `Σ C ℓ = cap`.
/// Ties go to the lower index. Returns the bits and the split user.
pub(crate) fn greedy_fill(s: &Scenario, m: &[f64], cap: f64) -> Result<(Vec<f64>, Option<usize>)> {
    let phi = priorities_at(s, 0.0)?;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| phi[b].partial_cmp(&phi[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));

    let mut ell = m.to_vec();
    let mut used: f64 = s.users.iter().zip(m).map(|(u, x)| u.cycles_per_bit * x).sum();
    let mut split = None;
    for i in order {
        let u = &s.users[i];
        let need = u.cycles_per_bit * (u.data_bits - m[i]);
        let room = cap - used;
        if need <= room {
            ell[i] = u.data_bits;
            used += need;
        } else {
            if room > 0.0 {
                ell[i] = (m[i] + room / u.cycles_per_bit).min(u.data_bits);
                split = Some(i);
            }
            break;
        }
    }
    Ok((ell, split))
}
