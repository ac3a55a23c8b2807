//! Sparse LU factorization with structure-aware irregular 2D blocking.

pub mod block;
pub mod blocking;
pub mod cli;
pub mod csc;
pub mod error;
pub mod factorize;
pub mod features;
pub mod generate;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod symbolic;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/matrices.md")]
    mod matrices {}
    #[doc = include_str!("../../../book/src/curve.md")]
    mod curve {}
    #[doc = include_str!("../../../book/src/blocking.md")]
    mod blocking {}
    #[doc = include_str!("../../../book/src/tasks.md")]
    mod tasks {}
    #[doc = include_str!("../../../book/src/factorize.md")]
    mod factorize {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
