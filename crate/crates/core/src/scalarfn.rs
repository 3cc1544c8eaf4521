//! Scalar kernel: the transmit-power function `f`, its derivative and
//! inverses, the Lambert W₀ function and the offloading priority functions.
//!
//! Units throughout: rates in bit/s, powers in W, energies in J, channel
//! gains as dimensionless power gains `h²`.
//!
//! Two identities carry most of the numerics here. With
//! `I(u) = ∫₀ᵘ s·eˢ ds = (u − 1)·eᵘ + 1`:
//!
//! * `g(x) = f(x) − x·f'(x) = −N₀ · I(x·ln2 / B)`
//! * `1 + W₀((q − 1)/e)` is the nonnegative root `u` of `I(u) = q`.
//!
//! Evaluating through `I` keeps full relative precision near the W₀ branch
//! point, where the textbook forms cancel catastrophically.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_E: f64 = 1.0 / E;
/// Inputs this far below −1/e are treated as rounding noise and clamped.
const BRANCH_CLAMP: f64 = 1e-12;
const HALLEY_STEP_TOL: f64 = 1e-14;
const HALLEY_MAX_ITER: usize = 50;

/// Bandwidth and noise power of the shared TDMA uplink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConstants {
    /// Bandwidth `B` in Hz.
    #[serde(rename = "B")]
    pub bandwidth: f64,
    /// Noise power `N₀` in W.
    #[serde(rename = "N0")]
    pub noise: f64,
}

impl RadioConstants {
    pub fn new(bandwidth: f64, noise: f64) -> Result<Self> {
        let rc = RadioConstants { bandwidth, noise };
        rc.validate()?;
        Ok(rc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bandwidth must be positive and finite, got {}",
                self.bandwidth
            )));
        }
        if !(self.noise.is_finite() && self.noise > 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise power must be positive and finite, got {}",
                self.noise
            )));
        }
        Ok(())
    }

    /// `f'(0) = N₀ ln2 / B`, the smallest marginal power cost of rate.
    pub fn min_marginal_power(&self) -> f64 {
        self.noise * LN_2 / self.bandwidth
    }
}

fn check_rate(function: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(function, x))
    }
}

/// Power needed to sustain rate `x`: `N₀ (2^{x/B} − 1)`.
pub fn f(x: f64, rc: &RadioConstants) -> Result<f64> {
    check_rate("f", x)?;
    Ok(rc.noise * (x * LN_2 / rc.bandwidth).exp_m1())
}

/// `f'(x) = N₀ ln2 / B · 2^{x/B}`.
pub fn f_prime(x: f64, rc: &RadioConstants) -> Result<f64> {
    check_rate("f_prime", x)?;
    Ok(rc.min_marginal_power() * (x * LN_2 / rc.bandwidth).exp())
}

/// Inverse of [`f_prime`]: `B log₂(B y / (N₀ ln2))`.
///
/// Values a relative `1e-12` below `f'(0)` are clamped to rate zero.
pub fn f_prime_inv(y: f64, rc: &RadioConstants) -> Result<f64> {
    let floor = rc.min_marginal_power();
    if !y.is_finite() || y < floor * (1.0 - BRANCH_CLAMP) {
        return Err(Error::domain("f_prime_inv", y));
    }
    let ratio = (y / floor).max(1.0);
    Ok(rc.bandwidth * ratio.log2())
}

/// `g(x) = f(x) − x f'(x)`; zero at the origin, negative and decreasing after.
pub fn g(x: f64, rc: &RadioConstants) -> Result<f64> {
    check_rate("g", x)?;
    Ok(-rc.noise * xexp_integral(x * LN_2 / rc.bandwidth))
}

/// Inverse of [`g`] on `y ≤ 0`: `B [W₀((y + N₀)/(−N₀ e)) + 1] / ln2`.
pub fn g_inv(y: f64, rc: &RadioConstants) -> Result<f64> {
    if !y.is_finite() || y > 0.0 {
        return Err(Error::domain("g_inv", y));
    }
    Ok(rc.bandwidth / LN_2 * w0_plus_one(-y / rc.noise)?)
}

/// `I(u) = ∫₀ᵘ s eˢ ds = (u − 1) eᵘ + 1`, accurate near zero.
pub fn xexp_integral(u: f64) -> f64 {
    if u.abs() < 0.5 {
        // Σ_{n≥2} (n−1) uⁿ / n!
        let mut term = u; // uⁿ/n! at n = 1
        let mut sum = 0.0;
        for n in 2..40 {
            term *= u / n as f64;
            let add = (n - 1) as f64 * term;
            sum += add;
            if add.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        (u - 1.0) * u.exp() + 1.0
    }
}

/// Principal branch of the Lambert W function, `w e^w = z`, `w ≥ −1`.
pub fn lambert_w0(z: f64) -> Result<f64> {
    if z.is_nan() || z == f64::NEG_INFINITY {
        return Err(Error::domain("lambert_w0", z));
    }
    if z == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if z < -INV_E - BRANCH_CLAMP {
        return Err(Error::domain("lambert_w0", z));
    }
    if z <= -INV_E {
        return Ok(-1.0);
    }
    if z == 0.0 {
        return Ok(0.0);
    }

    let mut w = if z < -0.3 {
        // branch-point series in p = sqrt(2(ez + 1))
        let p = (2.0 * (E * z + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        z.ln_1p()
    };

    for _ in 0..HALLEY_MAX_ITER {
        let ew = w.exp();
        let resid = w * ew - z;
        let wp1 = w + 1.0;
        if wp1 <= f64::EPSILON {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * resid / (2.0 * wp1);
        let step = resid / denom;
        w -= step;
        if step.abs() <= HALLEY_STEP_TOL {
            break;
        }
    }
    Ok(w.max(-1.0))
}

/// `1 + W₀((q − 1)/e)` for `q ≥ 0`, i.e. the root `u ≥ 0` of `I(u) = q`.
///
/// This is the form in which W₀ enters the optimal time allocation and the
/// priority inverse; it keeps relative precision when `q → 0`.
pub fn w0_plus_one(q: f64) -> Result<f64> {
    if q.is_nan() || q < 0.0 {
        return Err(Error::domain("w0_plus_one", q));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let mut u = if q < 0.5 {
        let p = (2.0 * q).sqrt();
        p - p * p / 3.0 + 11.0 / 72.0 * p.powi(3) - 43.0 / 540.0 * p.powi(4)
    } else {
        1.0 + lambert_w0((q - 1.0) * INV_E)?
    };
    // I(u) overflows past u ≈ 709; the direct W₀ value is already exact there.
    if u > 700.0 {
        return Ok(u);
    }
    for _ in 0..HALLEY_MAX_ITER {
        let eu = u.exp();
        let resid = xexp_integral(u) - q;
        let d1 = u * eu;
        if d1 <= 0.0 {
            break;
        }
        let d2 = (1.0 + u) * eu;
        let step = resid / (d1 - resid * d2 / (2.0 * d1));
        let next = u - step;
        u = if next > 0.0 { next } else { 0.5 * u };
        if step.abs() <= 1e-15 * u {
            break;
        }
    }
    Ok(u)
}

fn check_user_radio(function: &'static str, cycles_per_bit: f64, energy_per_cycle: f64, gain: f64) -> Result<()> {
    if !(cycles_per_bit.is_finite() && cycles_per_bit > 0.0) {
        return Err(Error::domain(function, cycles_per_bit));
    }
    if !(gain.is_finite() && gain > 0.0) {
        return Err(Error::domain(function, gain));
    }
    if !energy_per_cycle.is_finite() {
        return Err(Error::domain(function, energy_per_cycle));
    }
    Ok(())
}

/// `υ = B C P h² / (N₀ ln2)`: local energy per bit relative to the cheapest
/// marginal transmit energy per bit.
pub fn upsilon(cycles_per_bit: f64, energy_per_cycle: f64, gain: f64, rc: &RadioConstants) -> Result<f64> {
    check_user_radio("upsilon", cycles_per_bit, energy_per_cycle, gain)?;
    if energy_per_cycle < 0.0 {
        return Err(Error::domain("upsilon", energy_per_cycle));
    }
    Ok(rc.bandwidth * cycles_per_bit * energy_per_cycle * gain / (rc.noise * LN_2))
}

/// Offloading priority `φ = β N₀ / h² · (υ ln υ − υ + 1)` for `υ ≥ 1`, else 0.
pub fn priority(beta: f64, cycles_per_bit: f64, energy_per_cycle: f64, gain: f64, rc: &RadioConstants) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::domain("priority", beta));
    }
    let ups = upsilon(cycles_per_bit, energy_per_cycle, gain, rc)?;
    Ok(priority_from_upsilon(beta, gain, ups, rc))
}

// υ ln υ − υ + 1 = I(ln υ)
fn priority_from_upsilon(beta: f64, gain: f64, ups: f64, rc: &RadioConstants) -> f64 {
    if ups <= 1.0 {
        0.0
    } else {
        beta * rc.noise / gain * xexp_integral(ups.ln())
    }
}

/// Priority under a capacity price `mu`: `P` is replaced by `max(P − μ, 0)`.
pub fn effective_priority(
    beta: f64,
    cycles_per_bit: f64,
    energy_per_cycle: f64,
    gain: f64,
    mu: f64,
    rc: &RadioConstants,
) -> Result<f64> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::domain("effective_priority", mu));
    }
    priority(beta, cycles_per_bit, (energy_per_cycle - mu).max(0.0), gain, rc)
}

/// Inverse of the priority in `υ`: the `υ ≥ 1` at which a user with weight
/// `beta` and gain `gain` has priority `phi`.
pub fn upsilon_for_priority(phi: f64, beta: f64, gain: f64, rc: &RadioConstants) -> Result<f64> {
    if !(phi.is_finite() && phi >= 0.0) {
        return Err(Error::domain("upsilon_for_priority", phi));
    }
    Ok(w0_plus_one(phi * gain / (beta * rc.noise))?.exp())
}
