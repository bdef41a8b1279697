//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sigma0 = {sigma0} is not resolvable on this grid (requires sigma0 >= 2*dx = {min_sigma})")]
    UnresolvableSigma { sigma0: f64, min_sigma: f64 },

    #[error("carrier k0 = {k0} is at or beyond the Nyquist wavenumber {nyquist}; the mode would alias")]
    Aliasing { k0: f64, nyquist: f64 },

    #[error("field length {got} does not match grid size {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("state has zero norm; cannot {operation}")]
    DegenerateState { operation: &'static str },

    #[error("phase unwrap ambiguous between grid indices {prev} and {index}: residual jump {jump:.6} rad is within {margin:.0e} rad of pi")]
    UnwrapFailure {
        prev: usize,
        index: usize,
        jump: f64,
        margin: f64,
    },

    #[error("need at least {required} snapshots, got {got}")]
    InsufficientSnapshots { required: usize, got: usize },

    #[error("snapshot times are not uniformly spaced: max deviation {max_dev:.3e} exceeds {tol:.0e}")]
    NonuniformSpacing { max_dev: f64, tol: f64 },

    #[error("amplitude node detected near x = {x:.4}; direct Madelung integration requires a node-free state")]
    NodePresent { x: f64 },

    #[error("direct Madelung step unstable: max|S| grew from {before:.3e} to {after:.3e} in one step")]
    Instability { before: f64, after: f64 },

    #[error("trajectory reached the grid margin at t = {t:.4}, x = {x:.4}")]
    TrajectoryEscape { t: f64, x: f64 },

    #[error("two-packet preparation invalid: {reason}")]
    Preparation { reason: String },

    #[error("no fringe pattern found: {reason}")]
    NoFringe { reason: String },
}
