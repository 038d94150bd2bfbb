//! The guide's code listings, compiled and run as doctests so the book cannot
//! drift from the library. mdbook cannot test listings that use external
//! crates, so each chapter is included here as a module's documentation.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/states.md")]
pub mod states {}
#[doc = include_str!("../../../book/src/moments.md")]
pub mod moments {}
#[doc = include_str!("../../../book/src/tests.md")]
pub mod tests {}
#[doc = include_str!("../../../book/src/exponents.md")]
pub mod exponents {}
#[doc = include_str!("../../../book/src/transfer.md")]
pub mod transfer {}
#[doc = include_str!("../../../book/src/factorization.md")]
pub mod factorization {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
