//! Codebook design for hybrid beamforming with uniform planar arrays.
//!
//! Beam `(1,1)` is built by orthogonal matching pursuit toward a Kronecker
//! target synthesized from equal-gain combinations of steering vectors; the
//! other beams follow by phase-shifting its analog matrix.

pub mod beamformer;
pub mod codebook;
pub mod error;
pub mod ideal;
pub mod io;
pub mod omp;
pub mod pattern;
pub mod sim;
pub mod upa;
pub mod verify;

pub use beamformer::Beamformer;
pub use codebook::{
    baseline_allones, baseline_kp_dft, design_codebook, Codebook, CodebookKind, DesignOptions,
    Sweep,
};
pub use error::{Error, Result};
pub use ideal::{CodebookConfig, IdealPattern};
pub use upa::{AngleOfDeparture, Axis, CMatrix, CVector, Direction, UpaConfig};
