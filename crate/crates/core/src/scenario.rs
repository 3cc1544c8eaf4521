//! Seeded random scenarios.
//!
//! The generator is SplitMix64 (`state += 0x9E3779B97F4A7C15`, output is
//! the finalizer of the new state). It is part of the file-format
//! contract: any language that reimplements the steps below reproduces
//! the same scenario from the same [`GenSpec`].
//!
//! * User `k` draws from its own stream seeded with `split(seed, k)`.
//! * Per user, in order: `h²`, `F_k`, `P_k`, `R_k`, `C_k`.
//! * A uniform `u ∈ [0,1)` is `(next >> 11) · 2⁻⁵³`.
//! * `h² = −g̅ ln(1 − u)`, a uniform range is `lo + u (hi − lo)`, and a
//!   choice from a set picks index `⌊u n⌋`.
//! * `split(seed, i)` is the first output of a stream seeded with
//!   `x ^ i`, where `x` is the first output of a stream seeded with `seed`.

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CloudCapacity, Scenario, SystemParams, UserParams};
use crate::scalarfn::RadioConstants;

/// Bits in one kilobyte of task data (1024 bytes).
pub const BITS_PER_KB: f64 = 8192.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "T")]
    pub slot: f64,
    #[serde(rename = "B")]
    pub bandwidth: f64,
    #[serde(rename = "N0")]
    pub noise: f64,
    /// Mean of the exponential power gain `h²`.
    pub avg_path_gain: f64,
    #[serde(rename = "Fk_choices")]
    pub cpu_choices: Vec<f64>,
    #[serde(rename = "P_range")]
    pub energy_range: (f64, f64),
    /// In bits.
    #[serde(rename = "R_range")]
    pub data_range: (f64, f64),
    #[serde(rename = "C_range")]
    pub cycles_range: (f64, f64),
    #[serde(rename = "cloud_F")]
    pub cloud: CloudCapacity,
    pub seed: u64,
}

/// The reference simulation setting: 30 unit-weight users, 100 ms slot,
/// 10 MHz, `N₀ = 10⁻⁹` W, mean gain `10⁻⁶`, `F_k ∈ {0.1,…,1.0}` GHz,
/// `P ~ U(0, 2·10⁻¹⁰)` J/cycle, `R ~ U[100, 500]` KB,
/// `C ~ U[500, 1500]` cycles/bit and `F = 6·10⁹` cycles per slot.
pub fn default_spec() -> GenSpec {
    GenSpec {
        users: 30,
        slot: 0.1,
        bandwidth: 10e6,
        noise: 1e-9,
        avg_path_gain: 1e-6,
        cpu_choices: (1..=10).map(|i| i as f64 * 1e8).collect(),
        energy_range: (0.0, 20e-11),
        data_range: (100.0 * BITS_PER_KB, 500.0 * BITS_PER_KB),
        cycles_range: (500.0, 1500.0),
        cloud: CloudCapacity::Finite(6e9),
        seed: 0,
    }
}

/// [`default_spec`] with task sizes of `[2, 10]` KB instead of `[100, 500]` KB.
///
/// At the reference sizes the minimum offloads alone need about `7·10¹⁰`
/// cycles, more than ten times the default cloud, so almost every draw is
/// infeasible. Dividing the sizes by 50 keeps the minimum offloads below
/// `10⁹` cycles (worst of 5000 draws: `8·10⁸`), so a capacity sweep from
/// `10⁹` is feasible for every trial. Sweeps and tests use this variant.
pub fn desk_spec() -> GenSpec {
    GenSpec { data_range: (2.0 * BITS_PER_KB, 10.0 * BITS_PER_KB), ..default_spec() }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("gen spec: {what}")));
        if self.users == 0 {
            return bad("K must be positive");
        }
        for (name, v) in [("T", self.slot), ("B", self.bandwidth), ("N0", self.noise), ("avg_path_gain", self.avg_path_gain)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive and finite"));
            }
        }
        if self.cpu_choices.is_empty() || self.cpu_choices.iter().any(|&f| !(f.is_finite() && f > 0.0)) {
            return bad("Fk_choices must be a nonempty set of positive speeds");
        }
        for (name, (lo, hi), min) in [
            ("P_range", self.energy_range, 0.0),
            ("R_range", self.data_range, f64::MIN_POSITIVE),
            ("C_range", self.cycles_range, f64::MIN_POSITIVE),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo >= min && lo <= hi) {
                return bad(&format!("{name} must satisfy {min} ≤ lo ≤ hi"));
            }
        }
        if let CloudCapacity::Finite(f) = self.cloud {
            if !(f.is_finite() && f > 0.0) {
                return bad("cloud_F must be positive or \"inf\"");
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GenSpec = serde_json::from_str(text)?;
        spec.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gen spec serializes")
    }
}

/// Derives an independent seed for child `index` of `seed`.
pub fn split(seed: u64, index: u64) -> u64 {
    let x = SplitMix64::seed_from_u64(seed).next_u64();
    SplitMix64::seed_from_u64(x ^ index).next_u64()
}

/// Uniform draws on `[0, 1)` from one SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct Stream(SplitMix64);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream(SplitMix64::seed_from_u64(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, (lo, hi): (f64, f64)) -> f64 {
        lo + self.uniform() * (hi - lo)
    }

    pub fn exponential(&mut self, mean: f64) -> f64 {
        -mean * (-self.uniform()).ln_1p()
    }

    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        let i = ((self.uniform() * items.len() as f64) as usize).min(items.len() - 1);
        &items[i]
    }
}

/// Draws a scenario from `spec`. Identical specs give identical scenarios.
pub fn generate(spec: &GenSpec) -> Result<Scenario> {
    spec.validate()?;
    let system = SystemParams {
        slot: spec.slot,
        radio: RadioConstants::new(spec.bandwidth, spec.noise)?,
        cloud: spec.cloud,
    };
    let users = (0..spec.users)
        .map(|k| {
            let mut rng = Stream::new(split(spec.seed, k as u64));
            let h2 = rng.exponential(spec.avg_path_gain);
            let cpu_speed = *rng.choose(&spec.cpu_choices);
            let energy_per_cycle = rng.range(spec.energy_range);
            let data_bits = rng.range(spec.data_range);
            let cycles_per_bit = rng.range(spec.cycles_range);
            UserParams { beta: 1.0, cycles_per_bit, energy_per_cycle, h2, data_bits, cpu_speed }
        })
        .collect();
    Scenario::new(system, users)
}
