//! Scenario and allocation types, energy accounting, minimum offload and
//! feasibility.
//!
//! The JSON interchange format is
//!
//! ```json
//! {"system": {"T": 0.1, "B": 1e7, "N0": 1e-9, "F": 6e9},
//!  "users": [{"beta": 1, "C": 1000, "P": 1e-10, "h2": 1e-6, "R": 4e5, "Fk": 1e9}]}
//! ```
//!
//! with `"F": "inf"` for an unbounded cloud.

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalarfn::{self, RadioConstants};

/// Cloud CPU cycles available per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CloudCapacity {
    Finite(f64),
    Infinite,
}

impl CloudCapacity {
    pub fn is_infinite(&self) -> bool {
        matches!(self, CloudCapacity::Infinite)
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            CloudCapacity::Finite(f) => f,
            CloudCapacity::Infinite => f64::INFINITY,
        }
    }

    /// Maps `+∞` to [`CloudCapacity::Infinite`].
    pub fn from_f64(f: f64) -> Self {
        if f == f64::INFINITY {
            CloudCapacity::Infinite
        } else {
            CloudCapacity::Finite(f)
        }
    }
}

impl Serialize for CloudCapacity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            CloudCapacity::Finite(f) => s.serialize_f64(f),
            CloudCapacity::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for CloudCapacity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct CapVisitor;

        impl Visitor<'_> for CapVisitor {
            type Value = CloudCapacity;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number of cycles or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<CloudCapacity, E> {
                Ok(CloudCapacity::from_f64(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<CloudCapacity, E> {
                Ok(CloudCapacity::Finite(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<CloudCapacity, E> {
                Ok(CloudCapacity::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<CloudCapacity, E> {
                match v {
                    "inf" | "INFINITE" | "infinite" => Ok(CloudCapacity::Infinite),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        d.deserialize_any(CapVisitor)
    }
}

/// Constants shared by every user in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Slot duration `T` in seconds.
    #[serde(rename = "T")]
    pub slot: f64,
    #[serde(flatten)]
    pub radio: RadioConstants,
    /// Cloud capacity `F` in cycles per slot.
    #[serde(rename = "F")]
    pub cloud: CloudCapacity,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.slot.is_finite() && self.slot > 0.0) {
            return Err(Error::InvalidInput(format!("slot duration must be positive, got {}", self.slot)));
        }
        self.radio.validate()?;
        if let CloudCapacity::Finite(f) = self.cloud {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::InvalidInput(format!("cloud capacity must be positive, got {f}")));
            }
        }
        Ok(())
    }
}

/// Per-mobile parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserParams {
    /// Fairness weight `β`.
    pub beta: f64,
    /// CPU cycles per input bit `C`.
    #[serde(rename = "C")]
    pub cycles_per_bit: f64,
    /// Local energy per CPU cycle `P` in J.
    #[serde(rename = "P")]
    pub energy_per_cycle: f64,
    /// Channel power gain `h²`.
    pub h2: f64,
    /// Input data size `R` in bits.
    #[serde(rename = "R")]
    pub data_bits: f64,
    /// Local CPU speed `F_k` in cycles/s.
    #[serde(rename = "Fk")]
    pub cpu_speed: f64,
}

impl UserParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta", self.beta),
            ("C", self.cycles_per_bit),
            ("h2", self.h2),
            ("R", self.data_bits),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("P", self.energy_per_cycle), ("Fk", self.cpu_speed)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be nonnegative and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Local energy per bit `C·P`.
    pub fn local_energy_per_bit(&self) -> f64 {
        self.cycles_per_bit * self.energy_per_cycle
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub system: SystemParams,
    pub users: Vec<UserParams>,
}

impl Scenario {
    pub fn new(system: SystemParams, users: Vec<UserParams>) -> Result<Self> {
        let s = Scenario { system, users };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.users.is_empty() {
            return Err(Error::InvalidInput("scenario needs at least one user".into()));
        }
        for (k, u) in self.users.iter().enumerate() {
            u.validate().map_err(|e| Error::InvalidInput(format!("user {k}: {e}")))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn radio(&self) -> &RadioConstants {
        &self.system.radio
    }

    /// Parses and validates a scenario document.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Per-user minimum offload `m_k⁺`.
    pub fn min_offloads(&self) -> Vec<f64> {
        self.users.iter().map(|u| min_offload(u, &self.system)).collect()
    }

    /// Same scenario with the cloud constraint removed.
    pub fn relaxed(&self) -> Scenario {
        let mut s = self.clone();
        s.system.cloud = CloudCapacity::Infinite;
        s
    }
}

/// Offloaded bits and TDMA time per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Offloaded bits `ℓ_k`.
    pub ell: Vec<f64>,
    /// Slot time `t_k` in seconds.
    pub t: Vec<f64>,
}

impl Allocation {
    pub fn zeros(k: usize) -> Self {
        Allocation { ell: vec![0.0; k], t: vec![0.0; k] }
    }

    pub fn len(&self) -> usize {
        self.ell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ell.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        self.t.iter().sum()
    }

    pub fn total_bits(&self) -> f64 {
        self.ell.iter().sum()
    }

    /// `Σ C_k ℓ_k`.
    pub fn cloud_cycles(&self, s: &Scenario) -> f64 {
        self.ell.iter().zip(&s.users).map(|(l, u)| u.cycles_per_bit * l).sum()
    }
}

/// Prices of the time-sharing (`λ`, J) and cloud-capacity (`μ`, J/cycle) constraints.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DualPoint {
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `E_loc,k = (R_k − ℓ_k) C_k P_k`.
    pub local: Vec<f64>,
    /// `E_off,k = t_k f(ℓ_k/t_k) / h_k²`.
    pub offload: Vec<f64>,
    /// Transmit power `p_k` in W.
    pub tx_power: Vec<f64>,
    /// Offloading rate `r_k = ℓ_k / t_k` in bit/s (0 when idle).
    pub rate: Vec<f64>,
    /// `Σ β_k (E_loc,k + E_off,k)`.
    pub weighted_total: f64,
}

/// `m_k⁺ = max(R_k − F_k T / C_k, 0)`.
pub fn min_offload(u: &UserParams, sys: &SystemParams) -> f64 {
    (u.data_bits - u.cpu_speed * sys.slot / u.cycles_per_bit).max(0.0)
}

/// Outcome of the cloud-capacity feasibility test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// `Σ C_k m_k⁺`.
    pub required_cycles: f64,
    pub capacity: CloudCapacity,
    pub feasible: bool,
}

impl Feasibility {
    pub fn into_result(self) -> Result<()> {
        if self.feasible {
            Ok(())
        } else {
            Err(Error::Infeasible { required: self.required_cycles, capacity: self.capacity.as_f64() })
        }
    }
}

/// Feasible iff the minimum offloads fit into the cloud: `Σ C_k m_k⁺ ≤ F`.
pub fn check_feasible(s: &Scenario) -> Feasibility {
    let required: f64 = s
        .users
        .iter()
        .map(|u| u.cycles_per_bit * min_offload(u, &s.system))
        .sum();
    let feasible = match s.system.cloud {
        CloudCapacity::Infinite => true,
        CloudCapacity::Finite(f) => required <= f,
    };
    Feasibility { required_cycles: required, capacity: s.system.cloud, feasible }
}

/// Energy of an allocation. Bits offloaded in zero time are rejected.
pub fn evaluate(s: &Scenario, a: &Allocation) -> Result<EnergyBreakdown> {
    if a.ell.len() != s.len() || a.t.len() != s.len() {
        return Err(Error::InvalidInput(format!(
            "allocation has {}/{} entries for {} users",
            a.ell.len(),
            a.t.len(),
            s.len()
        )));
    }
    let rc = s.radio();
    let k = s.len();
    let mut out = EnergyBreakdown {
        local: Vec::with_capacity(k),
        offload: Vec::with_capacity(k),
        tx_power: Vec::with_capacity(k),
        rate: Vec::with_capacity(k),
        weighted_total: 0.0,
    };
    for (i, u) in s.users.iter().enumerate() {
        let (ell, t) = (a.ell[i], a.t[i]);
        if !(ell.is_finite() && t.is_finite()) || t < 0.0 {
            return Err(Error::Violation(format!("user {i}: bad entry ell={ell}, t={t}")));
        }
        if ell > 0.0 && t == 0.0 {
            return Err(Error::Violation(format!("user {i} offloads {ell} bits in zero time")));
        }
        let local = (u.data_bits - ell) * u.local_energy_per_bit();
        let (rate, power) = if ell > 0.0 && t > 0.0 {
            let r = ell / t;
            (r, scalarfn::f(r, rc)? / u.h2)
        } else {
            (0.0, 0.0)
        };
        let off = power * t;
        out.weighted_total += u.beta * (local + off);
        out.local.push(local);
        out.offload.push(off);
        out.tx_power.push(power);
        out.rate.push(rate);
    }
    Ok(out)
}

/// Weighted objective only.
pub fn objective(s: &Scenario, a: &Allocation) -> Result<f64> {
    evaluate(s, a).map(|e| e.weighted_total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `Σ t_k ≤ T`
    TimeSharing,
    /// `Σ C_k ℓ_k ≤ F`
    CloudCapacity,
    /// `ℓ_k ≥ m_k⁺`
    MinOffload,
    /// `ℓ_k ≤ R_k`
    MaxOffload,
    /// `t_k ≥ 0`
    NonnegativeTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintKind,
    pub user: Option<usize>,
    /// Absolute amount by which the constraint is exceeded.
    pub magnitude: f64,
}

/// Lists every constraint of the offloading problem the allocation breaks.
///
/// A constraint `lhs ≤ rhs` counts as violated when
/// `lhs − rhs > tol · max(1, |rhs|)`.
pub fn check_constraints(s: &Scenario, a: &Allocation, tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |constraint, user, lhs: f64, rhs: f64| {
        let excess = lhs - rhs;
        if excess > tol * rhs.abs().max(1.0) || excess.is_nan() {
            out.push(Violation { constraint, user, magnitude: excess });
        }
    };
    push(ConstraintKind::TimeSharing, None, a.total_time(), s.system.slot);
    if let CloudCapacity::Finite(f) = s.system.cloud {
        push(ConstraintKind::CloudCapacity, None, a.cloud_cycles(s), f);
    }
    for (k, u) in s.users.iter().enumerate() {
        let ell = a.ell.get(k).copied().unwrap_or(f64::NAN);
        let t = a.t.get(k).copied().unwrap_or(f64::NAN);
        let m = min_offload(u, &s.system);
        push(ConstraintKind::MinOffload, Some(k), m, ell);
        push(ConstraintKind::MaxOffload, Some(k), ell, u.data_bits);
        push(ConstraintKind::NonnegativeTime, Some(k), -t, 0.0);
    }
    out
}

/// Scaled residuals of the coupling constraints, as reported by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    /// `(Σ t_k − T) / T`; zero when the slot is fully used.
    pub time: f64,
    /// `(Σ C_k ℓ_k − F) / F`, absent for an unbounded cloud.
    pub capacity: Option<f64>,
    /// Largest bound violation on `ℓ_k` or `t_k`, scaled by `max(1, |bound|)`.
    pub bounds: f64,
}

pub fn constraint_residuals(s: &Scenario, a: &Allocation) -> ConstraintResiduals {
    let time = (a.total_time() - s.system.slot) / s.system.slot;
    let capacity = match s.system.cloud {
        CloudCapacity::Finite(f) => Some((a.cloud_cycles(s) - f) / f),
        CloudCapacity::Infinite => None,
    };
    let mut bounds: f64 = 0.0;
    for (k, u) in s.users.iter().enumerate() {
        let m = min_offload(u, &s.system);
        bounds = bounds
            .max((m - a.ell[k]) / m.max(1.0))
            .max((a.ell[k] - u.data_bits) / u.data_bits.max(1.0))
            .max(-a.t[k]);
    }
    ConstraintResiduals { time, capacity, bounds }
}
