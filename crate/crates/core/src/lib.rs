//! Multi-static near-field microwave imaging by back-projection in the
//! spatial domain.
//!
//! The crate synthesizes scalar first-order Born scattering data for
//! point-scatterer scenes and reconstructs complex image volumes with either
//! the phase-only back-projection kernel or the magnitude-corrected near-field
//! focusing operators `F0`, `F1` and `F2`. Every closed-form operator is
//! paired with two independent numerical oracles in [`focusing::oracle`].
//!
//! Module map:
//!
//! * [`geometry`]: wave numbers, the `k_z` branch, array layouts
//! * [`focusing`]: focusing operators and their oracles
//! * [`forward`]: Born forward model, noise, dataset merging
//! * [`reconstruct`]: the back-projection engine
//! * [`metrics`]: projections, difference images, entropy, artifact level
//! * [`scenario`]: declarative scenarios and the end-to-end pipeline
//! * [`io`]: CSV, binary and PNG file formats
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod error;
pub mod focusing;
pub mod forward;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod quadrature;
pub mod reconstruct;
pub mod scenario;

pub use error::{Error, Result};
pub use focusing::{Displacement, FocusingOperatorKind};
pub use forward::{MeasurementSet, Pairing, PointScatterer, Scene};
pub use geometry::{ArrayLayout, Position3, WaveNumber};
pub use metrics::{Image2D, ProjectionAxis};
pub use reconstruct::{Engine, ImageGrid, ImageVolume};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
