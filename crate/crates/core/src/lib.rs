//! Spectral bands of a square-lattice quantum graph in a homogeneous magnetic
//! field, with the circulant (preferred-orientation) vertex coupling
//! `(U − I)Ψ + i(U + I)DΨ = 0`.
//!
//! For a rational flux `p/q` per plaquette the Floquet-Bloch fiber over the
//! `q`-vertex unit-flux cell is an `8q × 8q` secular system. Its determinant
//! is affine in `Θ_q = cos qθ2 + cos θ1`, which reduces band membership to a
//! real scalar band function evaluated from two determinants.
//!
//! Modules, bottom-up:
//!
//! * [`model`]: flux ratios, quasimomenta, the coupling matrix.
//! * [`linalg`]: complex LU with overflow-safe log-determinants.
//! * [`fiber`]: cell layout and secular-matrix assembly.
//! * [`bands`]: band function, scanning, edge refinement.
//! * [`analysis`]: spectral measure, narrow bands, asymptotic profile.

pub mod analysis;
pub mod bands;
pub mod error;
pub mod fiber;
pub mod linalg;
pub mod model;

pub use analysis::{
    asymptotic_band_profile, narrow_band_stats, probability_sigma, star_graph_negative_eigenvalues,
    thouless_reference, AsymptoticProfile, MeasureReport, NarrowBandReport, CATALAN,
};
pub use bands::{
    band_function, refine_edge, scan_bands, Band, BandEngine, BandFunctionSample, BandSet, ScanConfig,
};
pub use error::{Error, Result};
pub use fiber::{assemble, build_layout, CellLayout, FiberMatrix, Regime, SpectralParameter};
pub use linalg::{log_det, CMatrix, LogDet};
pub use model::{coprime_fluxes, coupling_matrix, make_flux, theta_q, FluxRatio, Quasimomentum, ThetaQ};
