//! Energy-optimal resource allocation for multiuser mobile-edge
//! computation offloading over TDMA.
//!
//! `K` users share one slot of length `T`. User `k` must process `R_k`
//! bits within the slot; it computes `R_k − ℓ_k` of them locally at
//! `C_k P_k` joules per bit and uploads `ℓ_k` bits in a fraction `t_k` of
//! the slot, spending `t_k f(ℓ_k/t_k)/h_k²` with
//! `f(x) = N₀(2^{x/B} − 1)`. The edge cloud can process at most `F`
//! cycles per slot. The solvers minimize `Σ β_k E_k`.
//!
//! ```
//! use meco_core::{scenario, solvers};
//!
//! let s = scenario::generate(&scenario::GenSpec { seed: 7, users: 5, ..scenario::desk_spec() }).unwrap();
//! let r = solvers::solve_p1(&s).unwrap();
//! assert!(r.diagnostics.kkt_residual.unwrap() < 1e-6);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod model;
pub mod oracle;
pub mod scalarfn;
pub mod scenario;
pub mod solvers;

pub use error::{Error, Result};
pub use model::{Allocation, CloudCapacity, DualPoint, Scenario, SystemParams, UserParams};
pub use solvers::{PolicyKind, SolveReport};
