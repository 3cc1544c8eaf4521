use meco_core::model::{self, Allocation, CloudCapacity, DualPoint, Scenario, SystemParams, UserParams};
use meco_core::oracle::{self, kkt_residual, OracleConfig};
use meco_core::scalarfn::{self, RadioConstants};
use meco_core::scenario::{self, desk_spec, GenSpec};
use meco_core::solvers::{self, policy_at, Decision, PolicyKind};
use meco_core::Error;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn draw(users: usize, cloud: CloudCapacity, seed: u64) -> Scenario {
    scenario::generate(&GenSpec { users, cloud, seed, ..desk_spec() }).unwrap()
}

fn with_cloud(s: &Scenario, f: f64) -> Scenario {
    let mut s = s.clone();
    s.system.cloud = CloudCapacity::Finite(f);
    s
}

#[test]
fn p2_matches_oracle_two_users_seed_7() {
    let s = draw(2, CloudCapacity::Infinite, 7);
    let r = solvers::solve_p2(&s).unwrap();
    let o = oracle::oracle_minimize(&s, &OracleConfig::default()).unwrap();
    assert!(rel(r.objective(), o.objective) <= 1e-6, "{} vs {}", r.objective(), o.objective);
    assert!(o.objective >= r.objective() * (1.0 - 1e-12));
}

#[test]
fn p1_matches_oracle_with_half_capacity() {
    // first seeds whose halved P2 load is still feasible
    let mut tested = 0;
    for seed in 0..40 {
        let s = draw(3, CloudCapacity::Infinite, seed);
        let used = solvers::solve_p2(&s).unwrap().allocation.cloud_cycles(&s);
        let sf = with_cloud(&s, 0.5 * used);
        if !model::check_feasible(&sf).feasible {
            continue;
        }
        let r = solvers::solve_p1(&sf).unwrap();
        let o = oracle::oracle_minimize(&sf, &OracleConfig::default()).unwrap();
        assert!(rel(r.objective(), o.objective) <= 1e-5, "seed {seed}");
        assert!(rel(r.allocation.cloud_cycles(&sf), 0.5 * used) <= 1e-6, "seed {seed}");
        tested += 1;
        if tested == 5 {
            break;
        }
    }
    assert!(tested >= 3, "too few feasible draws: {tested}");
}

#[test]
fn p2_kkt_on_fifty_scenarios() {
    for seed in 0..50 {
        let s = draw(10, CloudCapacity::Infinite, seed);
        let r = solvers::solve_p2(&s).unwrap();
        let rep = kkt_residual(&s, &r.allocation, &r.dual);
        assert!(rep.max <= 1e-6, "seed {seed}: {rep:?}");
        assert!(model::check_constraints(&s, &r.allocation, 1e-6).is_empty());
    }
}

#[test]
fn p1_with_loose_cloud_equals_p2() {
    for seed in 0..10 {
        let s = draw(8, CloudCapacity::Finite(1e12), seed);
        let a = solvers::solve_p1(&s).unwrap();
        let b = solvers::solve_p2(&s).unwrap();
        assert_eq!(a.allocation, b.allocation);
        assert_eq!(a.dual.mu, 0.0);
    }
}

#[test]
fn ordering_holds_under_binding_cloud() {
    for seed in 0..30 {
        let s = draw(12, CloudCapacity::Infinite, seed);
        let p2 = solvers::solve_p2(&s).unwrap();
        let req = model::check_feasible(&s).required_cycles;
        let sf = with_cloud(&s, 0.5 * (req + p2.allocation.cloud_cycles(&s)));
        let p1 = solvers::solve_p1(&sf).unwrap();
        let sub = solvers::solve_suboptimal(&sf).unwrap();
        assert!(p2.objective() <= p1.objective() * (1.0 + 1e-12), "seed {seed}");
        assert!(p1.objective() <= sub.objective() * (1.0 + 1e-9), "seed {seed}");
        assert!(model::check_constraints(&sf, &sub.allocation, 1e-9).is_empty());
        let base = solvers::solve_baseline(&sf).unwrap();
        assert!(model::check_constraints(&sf, &base.allocation, 1e-9).is_empty());
        assert!(p1.objective() <= base.objective() * (1.0 + 1e-9), "seed {seed}");
    }
}

#[test]
fn optimal_energy_nonincreasing_in_capacity_and_slot() {
    for seed in 0..10 {
        let s = draw(20, CloudCapacity::Infinite, seed);
        let req = model::check_feasible(&s).required_cycles;
        let top = solvers::solve_p2(&s).unwrap().allocation.cloud_cycles(&s);
        let mut last = f64::INFINITY;
        for i in 0..=8 {
            let f = req + (top - req) * i as f64 / 8.0 + 1.0;
            let e = solvers::solve_p1(&with_cloud(&s, f)).unwrap().objective();
            assert!(e <= last * (1.0 + 1e-12), "seed {seed} F={f}");
            last = e;
        }
        let mut last = f64::INFINITY;
        for t in [0.08, 0.1, 0.15, 0.2, 0.3] {
            let spec = GenSpec { users: 20, slot: t, seed, ..desk_spec() };
            let e = solvers::solve_p1(&scenario::generate(&spec).unwrap()).unwrap().objective();
            assert!(e <= last * (1.0 + 1e-12), "seed {seed} T={t}");
            last = e;
        }
    }
}

#[test]
fn infeasible_scenarios_are_rejected_by_capacity_bound_policies() {
    let s = draw(30, CloudCapacity::Finite(1e6), 3);
    for p in [PolicyKind::P1Optimal, PolicyKind::Suboptimal, PolicyKind::Baseline] {
        assert!(matches!(p.solve(&s), Err(Error::Infeasible { .. })), "{p}");
    }
    // P2 ignores the cloud bound
    assert!(solvers::solve_p2(&s).is_ok());
}

#[test]
fn policy_at_reproduces_p2_at_its_price() {
    for seed in 0..20 {
        let s = draw(15, CloudCapacity::Infinite, seed);
        let r = solvers::solve_p2(&s).unwrap();
        if r.dual.lambda == 0.0 {
            continue;
        }
        let pt = policy_at(r.dual.lambda, 0.0, &s, 1e-12).unwrap();
        for k in 0..s.len() {
            match pt.decisions[k] {
                Decision::Marginal => assert_eq!(r.diagnostics.marginal_user, Some(k)),
                _ => assert_eq!(pt.ell[k], r.allocation.ell[k], "seed {seed} user {k}"),
            }
        }
    }
}

#[test]
fn kkt_flags_a_suboptimal_point() {
    let s = draw(6, CloudCapacity::Infinite, 11);
    let r = solvers::solve_p2(&s).unwrap();
    let mut bent = r.allocation.clone();
    let k = (0..s.len()).find(|&k| bent.t[k] > 0.0).unwrap();
    bent.t[k] *= 0.9;
    let rep = kkt_residual(&s, &bent, &r.dual);
    assert!(rep.stationarity_time > 1e-3, "{rep:?}");
    let wrong = kkt_residual(&s, &r.allocation, &DualPoint { lambda: r.dual.lambda * 2.0, mu: 0.0 });
    assert!(wrong.max > 1e-3);
}

#[test]
fn uniform_channel_priority_follows_local_energy() {
    // equal gains and weights: priority order is the C·P order
    let rc = RadioConstants::new(1e7, 1e-9).unwrap();
    let mut last = -1.0;
    for cp in [2e-7, 4e-7, 8e-7, 1.6e-6] {
        let phi = scalarfn::priority(1.0, 1000.0, cp / 1000.0, 1e-6, &rc).unwrap();
        assert!(phi > last);
        last = phi;
    }
}

#[test]
fn forced_single_user_closed_form() {
    let sys = SystemParams { slot: 0.1, radio: RadioConstants::new(1e7, 1e-9).unwrap(), cloud: CloudCapacity::Infinite };
    let u = UserParams { beta: 1.0, cycles_per_bit: 1000.0, energy_per_cycle: 5e-14, h2: 1e-6, data_bits: 4e5, cpu_speed: 1e9 };
    let s = Scenario::new(sys, vec![u]).unwrap();
    let exact = Allocation { ell: vec![3e5], t: vec![0.1] };
    for p in PolicyKind::ALL {
        let r = p.solve(&s).unwrap();
        assert_eq!(r.allocation.ell, exact.ell, "{p}");
        assert!(rel(r.allocation.t[0], 0.1) < 1e-12, "{p}");
    }
    let o = oracle::oracle_minimize(&s, &OracleConfig::default()).unwrap();
    assert!(rel(o.objective, model::objective(&s, &exact).unwrap()) <= 1e-4);
}
