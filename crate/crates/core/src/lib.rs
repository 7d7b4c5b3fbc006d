//! Regularization paths for sparse inverse covariance estimation.
//!
//! The penalized maximum-likelihood problem
//! `max log det X - Tr(ΣX) - ρ‖X‖₁` is solved through its dual, a
//! log-determinant problem over the box `|U - Σ| ≤ ρ`, by following the
//! central path of a log-barrier formulation as `ρ` moves from the sparse
//! end (`ρ_max = max_i Σ_ii`) toward zero. Each path point is produced by
//! a warm start (scaling, or a tangent predictor solved by conjugate
//! gradients) followed by a block coordinate-descent corrector whose
//! coordinate steps are closed form.
//!
//! Modules, bottom-up:
//!
//! * [`symmat`]: dense symmetric PD kernels.
//! * [`barrier`]: the instance, central-path quantities, starting points.
//! * [`corrector`]: the block coordinate-descent barrier solver.
//! * [`predictor`]: tangent directions by matrix-free conjugate gradients.
//! * [`path`]: the regularization path and online re-solve drivers.
//! * [`reference`]: slow trusted oracles for verification.
//!
//! ```
//! use covpath::path::{run_path, Mode, PathConfig};
//! use covpath::SymMatrix;
//!
//! let sigma = SymMatrix::from_rows(&[
//!     vec![2.0, 0.6, 0.3],
//!     vec![0.6, 1.5, 0.4],
//!     vec![0.3, 0.4, 1.2],
//! ])?;
//! let mut cfg = PathConfig::for_sigma(&sigma);
//! cfg.mode = Mode::Predictor;
//! let path = run_path(&sigma, &cfg)?;
//! assert!(path.is_complete());
//! assert_eq!(path.points[0].cardinality, 3);
//! # Ok::<(), covpath::Error>(())
//! ```

pub mod barrier;
pub mod corrector;
pub mod error;
pub mod path;
pub mod predictor;
pub mod reference;
pub mod symmat;

pub use barrier::Problem;
pub use error::{Error, Result};
pub use symmat::{PdFactor, SymMatrix};
