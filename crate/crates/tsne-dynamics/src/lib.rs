//! # tsne-dynamics
//!
//! Two-stage exact t-SNE (early exaggeration, then embedding) together with
//! the linear surrogates that describe its dynamics on clustered data:
//! Laplacian power iterations, the associated gradient flow, and null-space
//! limits. A diagnostics layer measures how closely a real run tracks each
//! prediction (surrogate deviation, intercluster repulsion, expansion,
//! eigengap conditions, early-stopping budgets).
//!
//! Everything is dense, sequential, and deterministic: identical inputs,
//! parameters, and seeds produce bit-identical trajectories and artifacts.
//!
//! ## Layout
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`spectral`] | Dense symmetric matrices, degree/Laplacian operators, Jacobi eigensolver, connected components |
//! | [`affinity`] | P matrix with perplexity-calibrated bandwidths, Q matrix, exaggerated gradient kernel S |
//! | [`engine`] | The two-stage optimizer, initialization, trajectory capture |
//! | [`theory`] | Tuning schedule, power-iteration surrogate, gradient flow, limit centers, repulsive forces |
//! | [`datagen`] | Gaussian mixture and noisy nested-sphere generators, IDX/CSV ingestion |
//! | [`diagnostics`] | Diameters, deviations, separation ratios, force residuals, eigengap report |
//! | [`experiment`] | End-to-end runs: data -> affinities -> engine -> report + SVG |
//!
//! ## Quick start
//!
//! ```
//! use tsne_dynamics::datagen::{gmm_means, gmm_sample, CovarianceSpec};
//! use tsne_dynamics::affinity::{calibrate_bandwidths, conditional_affinities, symmetrize};
//! use tsne_dynamics::engine::{run, InitMode};
//! use tsne_dynamics::theory::theory_tuning;
//!
//! let means = gmm_means(3, 20, 12.0, 7).unwrap();
//! let data = gmm_sample(60, &means, &CovarianceSpec::Identity(1.0), &[0.3, 0.3, 0.4], 7).unwrap();
//! let tau = calibrate_bandwidths(&data.data, 10.0).unwrap();
//! let p = symmetrize(&conditional_affinities(&data.data, &tau).unwrap());
//! let mut params = theory_tuning(60, 0.5, 10.0);
//! params.k1 = 50;
//! params.seed = 7;
//! let log = run(&p, &params, InitMode::Random).unwrap();
//! assert_eq!(log.scalars.len(), params.k0 + params.k1 + 1);
//! ```
//!
//! Runnable demos live in `examples/`; `cargo run --release -- run --help`
//! drives the same pipeline from the command line.

pub mod affinity;
pub mod datagen;
pub mod diagnostics;
pub mod engine;
pub mod experiment;
pub mod plot;
pub mod rng;
pub mod spectral;
pub mod theory;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),

    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),

    #[error("dimension too small: n = {0}, need n >= {1}")]
    TooSmall(usize, usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigensolver did not converge after {0} sweeps")]
    EigenNonConvergence(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bandwidth calibration did not converge for row {row} (target perplexity {target})")]
    CalibrationNonConvergence { row: usize, target: f64 },

    #[error("degenerate kernel row {0}: off-diagonal sums are not finite or underflow to zero")]
    DegenerateKernelRow(usize),

    #[error("coordinates diverged at iteration {k}: |{value}| exceeds the guard")]
    Diverged { k: usize, value: f64 },

    #[error("covariance is not positive semidefinite (eigenvalue {0})")]
    NotPsd(f64),

    #[error("unsupported IDX magic 0x{0:08x}")]
    IdxMagic(u32),

    #[error("truncated IDX payload: expected {expected} bytes, found {found}")]
    IdxTruncated { expected: usize, found: usize },

    #[error("IDX dimensions overflow: {0}")]
    IdxOverflow(String),

    #[error("CSV line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
