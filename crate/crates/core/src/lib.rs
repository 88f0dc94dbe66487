//! Primal and dual solvers for p-Laplacian energies on planar domains with
//! cracks, with tools to study how solutions behave when the crack moves.

pub mod capacity;
pub mod dual;
pub mod error;
pub mod gamma;
pub mod geometry;
pub mod mesh;
pub mod integrand;
pub mod primal;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};

// The guide's code blocks run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/domains.md")]
    mod domains {}
    #[doc = include_str!("../../../book/src/densities.md")]
    mod densities {}
    #[doc = include_str!("../../../book/src/primal.md")]
    mod primal {}
    #[doc = include_str!("../../../book/src/dual.md")]
    mod dual {}
    #[doc = include_str!("../../../book/src/sequences.md")]
    mod sequences {}
    #[doc = include_str!("../../../book/src/capacity.md")]
    mod capacity {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
