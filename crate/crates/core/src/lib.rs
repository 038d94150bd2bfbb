//! Error exponents for discriminating correlated quantum states.
//!
//! Two families of `n`-site states `ρ_n`, `σ_n` are compared through
//! `ψ(s) = lim (1/n) log Tr ρ_n^s σ_n^{1−s}`. From `ψ` follow the Chernoff
//! exponent, the Hoeffding tradeoff and the Stein exponent; the
//! [`discrimination`] module evaluates the tests that achieve them.
//!
//! ```
//! use quantum_exponents::exponents::{chernoff_exponent, psi_limit, unit_grid};
//! use quantum_exponents::state::{DensityOperator, StateFamily};
//!
//! let rho = StateFamily::Iid(DensityOperator::diagonal(&[0.5, 0.5]).unwrap());
//! let sigma = StateFamily::Iid(DensityOperator::diagonal(&[0.9, 0.1]).unwrap());
//! let profile = psi_limit(&rho, &sigma, &unit_grid(257)).unwrap();
//! assert!(chernoff_exponent(&profile) > 0.0);
//! ```

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Matrix code reads better with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod classical;
pub mod discrimination;
pub mod error;
pub mod exponents;
pub mod factorization;
pub mod numeric;
pub mod operator;
pub mod random;
pub mod state;

pub use error::{Error, Result};
