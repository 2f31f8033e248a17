//! Semiclassical resonance theory for the partially open tribaker map.
//!
//! The map acts on the unit torus; the strip `1/3 < q < 2/3` is an opening
//! that keeps only a fraction `R` of the intensity (amplitude factor `sqrt(R)`
//! on the quantum side). The crate provides:
//!
//! - the classical map, trajectory intensities, and the finite-time
//!   partial-repeller measures ([`classical`]),
//! - periodic-orbit enumeration via ternary symbolic dynamics, orbit actions,
//!   weights, and the covering-based selection rule ([`orbits`]),
//! - the quantized map `U`, its partially open version `Ũ = P U P`, and dense
//!   left/right eigensolves ([`quantum`]),
//! - torus coherent states and right/left scar functions built on periodic
//!   orbits by cosine-windowed propagation ([`scars`]),
//! - the scar-basis generalized eigenproblem, exact-vs-semiclassical
//!   eigenvalue matching, and minimal-basis searches ([`semiclassical`]),
//! - coherent-state phase-space images of spectral projectors and the overlap
//!   between exact and semiclassical distributions ([`husimi`]),
//! - deterministic CSV / PGM / raw-binary serialization ([`io`]).
//!
//! All stochastic routines take explicit 64-bit seeds and are bit-reproducible
//! independent of thread count.

pub mod classical;
pub mod husimi;
pub mod io;
pub mod orbits;
pub mod quantum;
pub mod scars;
pub mod semiclassical;

use thiserror::Error;

/// Unified error type for fallible operations across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} unusable (propagators need a positive multiple of 3)")]
    BadDimension(usize),
    #[error("eigensolver failed on {n}x{n} matrix (content hash {hash:#018x})")]
    Eigensolver { n: usize, hash: u64 },
    #[error("reflectivity {0} outside [0, 1]")]
    BadReflectivity(f64),
    #[error("period {0} outside supported range 1..={1}")]
    BadPeriod(usize, usize),
    #[error("symbol sequence is not a canonical aperiodic necklace: {0:?}")]
    NonCanonicalSymbols(Vec<u8>),
    #[error("symbol {symbol} inconsistent with position q={q}")]
    SymbolMismatch { symbol: u8, q: f64 },
    #[error("empty selection or invalid target size {0}")]
    BadSelection(usize),
    #[error("excitation number {0} outside 0..{1}")]
    BadExcitation(usize, usize),
    #[error("propagation window must cover at least one step, got {0}")]
    BadWindow(usize),
    #[error("all overlap-matrix singular values below tolerance")]
    EmptySpectrum,
    #[error("degenerate projector: |<L|R>| = {0:.3e} below 1e-12")]
    DegenerateProjector(f64),
    #[error("phase-space images have different grids: {0} vs {1}")]
    GridMismatch(usize, usize),
    #[error("operands have mismatched dimensions: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("lattice side {0} must be even and coprime to 3")]
    BadLattice(usize),
    #[error("zero-norm phase-space image")]
    ZeroNormImage,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
