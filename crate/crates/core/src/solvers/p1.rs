use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::{self, Allocation, CloudCapacity, DualPoint, Scenario};
use crate::oracle;
use crate::scalarfn;

use super::p2::{share_time_at, TimeShare};
use super::{bisect_price, finish, mu_max, priorities_at, seconds_per_bit, times_at, Draft, PolicyKind, SolveReport};
use super::{KKT_CERT_TOL, MAX_BISECTION_ITERS};

/// Optimal policy with a bounded cloud.
///
/// If the unbounded optimum fits into the cloud it is returned with `μ = 0`.
/// Otherwise the capacity price `μ` is bisected on `[0, μ_max]`, each probe
/// solving the time-sharing problem exactly. The offloaded cycles are
/// nonincreasing in `μ`; once the bracket is tight the users whose status
/// differs across it are the candidates for interior allocations, and the
/// final point is built in closed form around them and certified by its
/// KKT residual.
pub fn solve_p1(s: &Scenario) -> Result<SolveReport> {
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
            return finish(s, draft, PolicyKind::P1Optimal);
        }
    };

    let mu_top = mu_max(s);
    let mut inner_iterations = unbounded.iterations;
    let mut lo = (0.0, unbounded);
    let top = share_time_at(s, &m, mu_top)?;
    inner_iterations += top.iterations;
    let mut hi = (mu_top, top);
    let mut outer = 0;

    while outer < MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo.0 + hi.0);
        if mid <= lo.0 || mid >= hi.0 || hi.0 - lo.0 <= 1e-15 * hi.0 {
            break;
        }
        outer += 1;
        let share = share_time_at(s, &m, mid)?;
        inner_iterations += share.iterations;
        let cycles = share.cloud_cycles(s);
        if cycles > cap {
            lo = (mid, share);
        } else {
            let exact = cycles == cap;
            hi = (mid, share);
            if exact {
                let (mu, share) = hi;
                let draft = Draft {
                    dual: DualPoint { lambda: share.lambda, mu },
                    outer_iterations: outer,
                    inner_iterations,
                    marginal_user: share.marginal,
                    capacity_marginal_user: None,
                    alloc: Allocation { ell: share.ell, t: share.t },
                };
                return finish(s, draft, PolicyKind::P1Optimal);
            }
        }
    }

    let best = construct(s, &m, cap, (lo.0, &lo.1), (hi.0, &hi.1), mu_top)?;
    let draft = Draft {
        alloc: best.alloc,
        dual: best.dual,
        outer_iterations: outer,
        inner_iterations: inner_iterations + best.iterations,
        marginal_user: best.time_marginal,
        capacity_marginal_user: best.cap_marginal,
    };
    finish(s, draft, PolicyKind::P1Optimal)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Min,
    Full,
    Interior,
}

fn status(ell: f64, m: f64, r: f64) -> Status {
    if ell == m {
        Status::Min
    } else if ell == r {
        Status::Full
    } else {
        Status::Interior
    }
}

struct Candidate {
    alloc: Allocation,
    dual: DualPoint,
    time_marginal: Option<usize>,
    cap_marginal: Option<usize>,
    residual: f64,
    iterations: usize,
}

fn construct(
    s: &Scenario,
    m: &[f64],
    cap: f64,
    lo: (f64, &TimeShare),
    hi: (f64, &TimeShare),
    mu_top: f64,
) -> Result<Candidate> {
    let k = s.len();
    let status_of = |share: &TimeShare| -> Vec<Status> {
        (0..k).map(|i| status(share.ell[i], m[i], s.users[i].data_bits)).collect()
    };
    let st_lo = status_of(lo.1);
    let st_hi = status_of(hi.1);
    let movers: Vec<usize> = (0..k)
        .filter(|&i| st_lo[i] != st_hi[i] || st_lo[i] == Status::Interior || st_hi[i] == Status::Interior)
        .collect();
    if movers.is_empty() {
        return Err(Error::Numeric("capacity search bracket shows no moving user".into()));
    }

    let mut best: Option<Candidate> = None;
    let mut consider = |c: Option<Candidate>| {
        if let Some(c) = c {
            if best.as_ref().is_none_or(|b| c.residual < b.residual) {
                best = Some(c);
            }
        }
    };
    for base in [&st_hi, &st_lo] {
        for &j in &movers {
            consider(single(s, m, cap, base, j, mu_top));
        }
        if movers.len() <= 8 {
            for (a, &j) in movers.iter().enumerate() {
                for &i in &movers[a + 1..] {
                    consider(pair(s, m, cap, base, i, j, (lo.0, hi.0)));
                }
            }
        }
    }
    match best {
        Some(c) if c.residual <= KKT_CERT_TOL => Ok(c),
        Some(c) => Err(Error::Numeric(format!(
            "capacity-marginal construction left KKT residual {:e}",
            c.residual
        ))),
        None => Err(Error::Numeric("no consistent capacity-marginal construction".into())),
    }
}

/// Bits for everybody but `skip`, from a status vector. `None` if a
/// non-skipped user is interior.
fn base_bits(s: &Scenario, m: &[f64], base: &[Status], skip: &[usize]) -> Option<Vec<f64>> {
    let mut ell = Vec::with_capacity(s.len());
    for (i, u) in s.users.iter().enumerate() {
        ell.push(match base[i] {
            _ if skip.contains(&i) => m[i],
            Status::Min => m[i],
            Status::Full => u.data_bits,
            Status::Interior => return None,
        });
    }
    Some(ell)
}

fn within(x: f64, lo: f64, hi: f64) -> Option<f64> {
    let slack = 1e-12 * hi.abs().max(1.0);
    if x >= lo - slack && x <= hi + slack {
        Some(x.clamp(lo, hi))
    } else {
        None
    }
}

/// Capacity price at which user `j` has priority `lambda`.
fn price_matching(s: &Scenario, j: usize, lambda: f64) -> Option<f64> {
    let u = &s.users[j];
    let rc = s.radio();
    let ups = scalarfn::upsilon_for_priority(lambda, u.beta, u.h2, rc).ok()?;
    let p_eff = ups * rc.noise * LN_2 / (rc.bandwidth * u.cycles_per_bit * u.h2);
    Some(u.beta * (u.energy_per_cycle - p_eff))
}

fn certify(s: &Scenario, ell: Vec<f64>, lambda: f64, mu: f64, time_marginal: Option<usize>, cap_marginal: Option<usize>, iterations: usize) -> Candidate {
    let alloc = Allocation { t: times_at(s, &ell, lambda), ell };
    let dual = DualPoint { lambda, mu };
    let residual = oracle::kkt_residual(s, &alloc, &dual).max;
    let bad = !model::check_constraints(s, &alloc, super::SOLVER_TOL).is_empty();
    Candidate { alloc, dual, time_marginal, cap_marginal, residual: if bad { f64::INFINITY } else { residual }, iterations }
}

/// One interior user `j` closes both constraints: its bits fill the cloud,
/// `λ` closes the slot, and `μ` is where `j`'s priority equals `λ`.
fn single(s: &Scenario, m: &[f64], cap: f64, base: &[Status], j: usize, mu_top: f64) -> Option<Candidate> {
    let mut ell = base_bits(s, m, base, &[j])?;
    let uj = &s.users[j];
    let others: f64 = s.users.iter().zip(&ell).enumerate().filter(|(i, _)| *i != j).map(|(_, (u, l))| u.cycles_per_bit * l).sum();
    ell[j] = within((cap - others) / uj.cycles_per_bit, m[j], uj.data_bits)?;
    let (lambda, iters) = bisect_price(s, &ell, 0.0, f64::INFINITY).ok()?;
    if !(lambda > 0.0) {
        return None;
    }
    let mu = within(price_matching(s, j, lambda)?, 0.0, mu_top)?;
    Some(certify(s, ell, lambda, mu, Some(j), Some(j), iters))
}

/// Two tied users `i`, `j` at the crossing of their priority curves share
/// the slot and the cloud through a 2×2 linear system.
fn pair(s: &Scenario, m: &[f64], cap: f64, base: &[Status], i: usize, j: usize, bracket: (f64, f64)) -> Option<Candidate> {
    let mut ell = base_bits(s, m, base, &[i, j])?;
    let gap = |mu: f64| -> Option<f64> {
        let phi = priorities_at(s, mu).ok()?;
        Some(phi[i] - phi[j])
    };
    let (mut a, mut b) = bracket;
    let (ga, gb) = (gap(a)?, gap(b)?);
    let mut iters = 0;
    if ga != 0.0 && gb != 0.0 && ga.signum() != gb.signum() {
        for _ in 0..MAX_BISECTION_ITERS {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            iters += 1;
            let g = gap(mid)?;
            if g == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if g.signum() == ga.signum() {
                a = mid;
            } else {
                b = mid;
            }
        }
    }
    let mu = 0.5 * (a + b);
    let phi = priorities_at(s, mu).ok()?;
    let lambda = 0.5 * (phi[i] + phi[j]);
    if !(lambda > 0.0) {
        return None;
    }
    let rc = s.radio();
    let (ui, uj) = (&s.users[i], &s.users[j]);
    let (ti, tj) = (seconds_per_bit(lambda, ui.beta, ui.h2, rc), seconds_per_bit(lambda, uj.beta, uj.h2, rc));
    let mut rest_t = 0.0;
    let mut rest_c = 0.0;
    for (k, u) in s.users.iter().enumerate() {
        if k != i && k != j && ell[k] > 0.0 {
            rest_t += ell[k] * seconds_per_bit(lambda, u.beta, u.h2, rc);
            rest_c += ell[k] * u.cycles_per_bit;
        }
    }
    let (rt, rc_) = (s.system.slot - rest_t, cap - rest_c);
    let det = ti * uj.cycles_per_bit - tj * ui.cycles_per_bit;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let li = (rt * uj.cycles_per_bit - tj * rc_) / det;
    let lj = (ti * rc_ - rt * ui.cycles_per_bit) / det;
    ell[i] = within(li, m[i], ui.data_bits)?;
    ell[j] = within(lj, m[j], uj.data_bits)?;
    Some(certify(s, ell, lambda, mu, Some(j), Some(i), iters))
}
