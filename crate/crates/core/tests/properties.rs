use proptest::prelude::*;

use meco_core::model::{self, Allocation, CloudCapacity, Scenario, SystemParams, UserParams};
use meco_core::oracle::kkt_residual;
use meco_core::scalarfn::{self, RadioConstants};
use meco_core::solvers::{self, PolicyKind};

fn rc() -> RadioConstants {
    RadioConstants::new(1e7, 1e-9).unwrap()
}

prop_compose! {
    fn user()(beta in 0.5f64..2.0, c in 500.0f64..1500.0, p in 0.0f64..2e-10,
              h2 in 1e-8f64..5e-6, r in 1e4f64..1e5, fk in 1e8f64..1e9) -> UserParams {
        UserParams { beta, cycles_per_bit: c, energy_per_cycle: p, h2, data_bits: r, cpu_speed: fk }
    }
}

prop_compose! {
    fn scenario(max_users: usize)(users in prop::collection::vec(user(), 1..=max_users), slot in 0.05f64..0.3) -> Scenario {
        let sys = SystemParams { slot, radio: rc(), cloud: CloudCapacity::Infinite };
        Scenario::new(sys, users).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn inverse_pairs(x in 0.0f64..2e8) {
        let rc = rc();
        let back = scalarfn::f_prime_inv(scalarfn::f_prime(x, &rc).unwrap(), &rc).unwrap();
        prop_assert!((back - x).abs() <= 1e-9 * x.max(1e3));
        if x > 1e3 {
            let g = scalarfn::g(x, &rc).unwrap();
            let back = scalarfn::g_inv(g, &rc).unwrap();
            prop_assert!((back - x).abs() <= 1e-9 * x);
        }
    }

    #[test]
    fn lambert_identity(z in -0.36787944117144f64..1e10) {
        let w = scalarfn::lambert_w0(z).unwrap();
        prop_assert!(w >= -1.0);
        prop_assert!((w * w.exp() - z).abs() <= 1e-12 * z.abs().max(1e-2));
    }

    #[test]
    fn effective_priority_drops_with_mu(u in user(), mu in 0.0f64..2e-10) {
        let rc = rc();
        let plain = scalarfn::priority(u.beta, u.cycles_per_bit, u.energy_per_cycle, u.h2, &rc).unwrap();
        let eff = scalarfn::effective_priority(u.beta, u.cycles_per_bit, u.energy_per_cycle, u.h2, mu, &rc).unwrap();
        prop_assert!(eff <= plain);
        prop_assert!(eff >= 0.0);
    }

    // The objective is jointly convex in (ℓ, t).
    #[test]
    fn objective_is_convex(s in scenario(4), a in prop::collection::vec(0.0f64..1.0, 8), b in prop::collection::vec(0.0f64..1.0, 8)) {
        let k = s.len();
        let pick = |v: &[f64]| -> Allocation {
            let m = s.min_offloads();
            let ell: Vec<f64> = (0..k).map(|i| m[i] + v[i] * (s.users[i].data_bits - m[i])).collect();
            let w: f64 = v[4..4 + k].iter().map(|x| x + 0.01).sum();
            let t = (0..k).map(|i| s.system.slot * (v[4 + i] + 0.01) / w).collect();
            Allocation { ell, t }
        };
        let (x, y) = (pick(&a), pick(&b));
        let mid = Allocation {
            ell: x.ell.iter().zip(&y.ell).map(|(p, q)| 0.5 * (p + q)).collect(),
            t: x.t.iter().zip(&y.t).map(|(p, q)| 0.5 * (p + q)).collect(),
        };
        let (fx, fy, fm) = (model::objective(&s, &x).unwrap(), model::objective(&s, &y).unwrap(), model::objective(&s, &mid).unwrap());
        if fx.is_finite() && fy.is_finite() {
            prop_assert!(fm <= 0.5 * (fx + fy) * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn p2_is_certified_and_threshold_shaped(s in scenario(12)) {
        let r = solvers::solve_p2(&s).unwrap();
        prop_assert!(kkt_residual(&s, &r.allocation, &r.dual).max <= 1e-6);
        prop_assert!(model::check_constraints(&s, &r.allocation, 1e-9).is_empty());
        let m = s.min_offloads();
        let interior = (0..s.len())
            .filter(|&k| r.allocation.ell[k] != m[k] && r.allocation.ell[k] != s.users[k].data_bits)
            .count();
        prop_assert!(interior <= 1);
    }

    #[test]
    fn p1_is_certified_under_a_binding_cloud(s in scenario(10), frac in 0.05f64..0.95) {
        let p2 = solvers::solve_p2(&s).unwrap();
        let req = model::check_feasible(&s).required_cycles;
        let top = p2.allocation.cloud_cycles(&s);
        prop_assume!(top > req * (1.0 + 1e-6));
        let mut sf = s.clone();
        sf.system.cloud = CloudCapacity::Finite(req + frac * (top - req));
        let r = solvers::solve_p1(&sf).unwrap();
        prop_assert!(kkt_residual(&sf, &r.allocation, &r.dual).max <= 1e-6);
        prop_assert!(model::check_constraints(&sf, &r.allocation, 1e-9).is_empty());
        prop_assert!(r.objective() >= p2.objective() * (1.0 - 1e-12));
        for p in [PolicyKind::Suboptimal, PolicyKind::Baseline] {
            let other = p.solve(&sf).unwrap();
            prop_assert!(r.objective() <= other.objective() * (1.0 + 1e-9), "{}", p);
            prop_assert!(model::check_constraints(&sf, &other.allocation, 1e-9).is_empty());
        }
    }

    #[test]
    fn scenario_json_round_trip(s in scenario(5)) {
        prop_assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
    }
}
