use meco_core::model::CloudCapacity;
use meco_core::scenario::{self, default_spec, GenSpec, Stream};

// Kolmogorov–Smirnov critical value at α = 0.01 for large n.
fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

fn ks_stat(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

fn many_users(n: usize, seed: u64) -> Vec<meco_core::UserParams> {
    scenario::generate(&GenSpec { users: n, seed, cloud: CloudCapacity::Infinite, ..default_spec() }).unwrap().users
}

#[test]
fn identical_seed_identical_scenario() {
    let spec = GenSpec { seed: 123, ..default_spec() };
    let a = scenario::generate(&spec).unwrap();
    let b = scenario::generate(&spec).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn gain_mean_matches_path_loss() {
    let mut rng = Stream::new(1);
    let n = 100_000;
    let mean = (0..n).map(|_| rng.exponential(1e-6)).sum::<f64>() / n as f64;
    // standard error is 1e-6/√n ≈ 3.2e-9; 2% is far outside it
    assert!((mean / 1e-6 - 1.0).abs() < 0.02, "{mean}");
}

#[test]
fn marginals_pass_ks() {
    let n = 10_000;
    let users = many_users(n, 2024);
    let crit = ks_critical(n);
    let d = default_spec();

    let h = ks_stat(users.iter().map(|u| u.h2).collect(), |x| 1.0 - (-x / d.avg_path_gain).exp());
    assert!(h < crit, "h2: {h}");
    let uniform = |(lo, hi): (f64, f64)| move |x: f64| ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    let p = ks_stat(users.iter().map(|u| u.energy_per_cycle).collect(), uniform(d.energy_range));
    assert!(p < crit, "P: {p}");
    let r = ks_stat(users.iter().map(|u| u.data_bits).collect(), uniform(d.data_range));
    assert!(r < crit, "R: {r}");
    let c = ks_stat(users.iter().map(|u| u.cycles_per_bit).collect(), uniform(d.cycles_range));
    assert!(c < crit, "C: {c}");
}

#[test]
fn cpu_choices_are_uniform() {
    let n = 10_000;
    let users = many_users(n, 77);
    let d = default_spec();
    let mut counts = vec![0usize; d.cpu_choices.len()];
    for u in &users {
        let i = d.cpu_choices.iter().position(|&f| f == u.cpu_speed).expect("speed from the set");
        counts[i] += 1;
    }
    let expect = n as f64 / counts.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    // χ² with 9 degrees of freedom, α = 0.01
    assert!(chi2 < 21.666, "{chi2}: {counts:?}");
}

#[test]
fn users_are_independent_streams() {
    // adding users does not change the earlier ones
    let small = scenario::generate(&GenSpec { users: 5, seed: 9, ..default_spec() }).unwrap();
    let large = scenario::generate(&GenSpec { users: 50, seed: 9, ..default_spec() }).unwrap();
    assert_eq!(small.users[..], large.users[..5]);
    assert_ne!(scenario::split(9, 0), scenario::split(9, 1));
    assert_ne!(scenario::split(9, 0), scenario::split(10, 0));
}
