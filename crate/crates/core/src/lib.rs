//! Structure-preserving lattice discretization of the one-dimensional linear
//! Fokker–Planck equation `∂_t f = ∂_v(∂_v f + v f)`.
//!
//! The lattice has step `ε = 1/N` and sites `jε` with `|j| ≤ 2N²`. Densities are
//! evolved by Wild sums of a positivity-preserving two-point operator, compared
//! in Fourier-based metrics against closed-form solutions, and relaxed toward a
//! binomial equilibrium. Higher-order central-difference stencils and their
//! diffusions live in [`stencils`].

pub mod equilibrium;
pub mod error;
pub mod evolution;
pub mod lattice;
pub mod report;
pub mod spectral;
pub mod stencils;

pub use error::{Error, Result};
pub use evolution::{evolve, generator, trajectory, WildConfig};
pub use lattice::{
    char_fn, convolve, entropy, moment, InitialData, LatticeDensity, LatticeMeasure,
    SignedLatticeFunction,
};
pub use report::{Cell, ReportTable};
pub use spectral::{fourier_distance, CharFnEvaluator, MetricResult, SymbolKind, XiGrid};
