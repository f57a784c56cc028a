//! Dense complex linear algebra and the tolerance policy shared by every
//! other module.

pub mod decomp;
mod matrix;
mod spectrum;
mod tolerance;

pub use matrix::{c64, pairing, ComplexMatrix, CVector, C64, MAX_DIM};
pub use spectrum::{
    cluster, cluster_at_scale, distinct_nonzero_count, eigenvalues, outer, rank, spectra_equal, spectral_distance,
    spectrum, spectrum_detail, Spectrum, SpectrumDetail,
};
pub use tolerance::ToleranceConfig;
