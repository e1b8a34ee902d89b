//! Phase-profile design for wideband liquid-crystal reconfigurable surfaces
//! that maximizes the worst-case secrecy rate over user and eavesdropper
//! regions.
//!
//! The crate covers scenario ingestion, near-field channel synthesis, the
//! frequency response of liquid-crystal cells, secrecy-rate evaluation, the
//! semidefinite and the scalable log-sum-exp optimizers, benchmark
//! variants, evaluation studies and CSV/manifest output.

pub mod benchmarks;
pub mod channel;
pub mod evaluation;
pub mod io;
pub mod lc_phase;
pub mod scalable;
pub mod scenario;
pub mod sdp;
pub mod secrecy;

/// Dense complex linear algebra shared with the conic backend.
pub mod linalg {
    pub use riswb_conic::linalg::*;
}

/// A point in meters.
pub type Point = nalgebra::Vector3<f64>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("degenerate image: reflector plane contains both link endpoints")]
    DegenerateImage,
    #[error("dispersion model invalid for bandwidth: phase scaling {factor} at {freq_hz} Hz")]
    Dispersion { freq_hz: f64, factor: f64 },
    #[error("Taylor reference degenerate: entry modulus {0:e}")]
    TaylorReference(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("profile length {got} != scenario N {expected}")]
    ProfileLength { got: usize, expected: usize },
    #[error("unknown benchmark {0}")]
    UnknownBenchmark(u8),
    #[error("solver failed (outer {outer}, inner {inner}): {source}")]
    Solver {
        outer: usize,
        inner: usize,
        #[source]
        source: riswb_conic::SolverError,
    },
}
