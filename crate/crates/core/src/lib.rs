//! Grid ripup-and-reroute detailed router whose per-iteration violation
//! cost weights can come from an offline-trained policy.
//!
//! The pipeline: [`grid`] designs are routed by [`router::run_flow`] under a
//! [`router::WeightPolicy`]; [`datagen`] records perturbed and Sobol-sampled
//! runs as transitions over [`features`] and [`reward`]; [`cql`] trains an
//! actor offline; [`infer`] packages it and feeds weights back into the
//! router; [`bench`] compares it with the baseline schedule.

pub mod bench;
pub mod config;
pub mod cql;
pub mod datagen;
pub mod error;
pub mod features;
pub mod grid;
pub mod infer;
pub mod nn;
pub mod reward;
pub mod router;
pub mod sobol;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/router.md")]
    mod router {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/datagen.md")]
    mod datagen {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/bench.md")]
    mod bench {}
}
