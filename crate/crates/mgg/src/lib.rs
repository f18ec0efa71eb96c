//! Mixed generalized gamma (mGG) completely random measures and the sparse
//! random graphs they induce.
//!
//! The crate covers the closed-form Laplace calculus of the measure
//! ([`crm`]), exact samplers ([`samplers`]), graph generation and statistics
//! ([`graph`]), MCMC posterior inference ([`inference`]), convergence
//! diagnostics and posterior predictive checks ([`diagnostics`]), and the file
//! formats used by the command-line tool ([`io`]).

pub mod crm;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod inference;
pub mod io;
pub mod quad;
pub mod rng;
pub mod samplers;
pub mod special;

pub use crm::{MggParams, SparsityConstants};
pub use error::{Error, Result};


