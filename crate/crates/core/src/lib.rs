//! Spectra of weighted composition operators with hyperbolic automorphic symbols.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod mobius;
mod quad;
pub mod series;
pub mod spaces;
pub mod spectra;
pub mod report;
pub mod selftest;
pub mod symbolparse;
pub mod universality;
pub mod wco;

pub use error::{Error, Result};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/series.md")]
    pub mod series {}
    #[doc = include_str!("../../../book/src/symbols.md")]
    pub mod symbols {}
    #[doc = include_str!("../../../book/src/maps.md")]
    pub mod maps {}
    #[doc = include_str!("../../../book/src/spaces.md")]
    pub mod spaces {}
    #[doc = include_str!("../../../book/src/operators.md")]
    pub mod operators {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    pub mod spectra {}
    #[doc = include_str!("../../../book/src/universality.md")]
    pub mod universality {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
