//! Alternating differential forms on N-dimensional grids.
//!
//! The periodic box `[-L, L)^N` stands in for the whole space and the lower
//! half of the box for the half-space model domain. Operators are exact in
//! the sense of spectral differentiation: identities such as `dd = 0`,
//! `dδ + δd = Δ` or `RT + TR = r²` hold to round-off.

pub mod algebra;
pub mod container;
pub mod decomp;
pub mod error;
pub mod fft;
pub mod form;
pub mod grid;
pub mod halfspace;
pub mod manufactured;
pub mod media;
pub mod multi_index;
pub mod probe;
pub mod sobolev;
pub mod spectral;

pub use algebra::{
    apply_r, apply_t, hodge_star, split_tangential_normal, wedge, Coordinates,
};
pub use error::{Error, Result};
pub use form::{l2_inner, FormField, ScalarField};
pub use grid::{GridSpec, Region};
pub use multi_index::{Basis, MultiIndex};
pub use num_complex::Complex64;
pub use spectral::{
    coderivative_delta, exterior_d, fourier, fourier_inverse, gaffney_identity_check, laplacian,
    spectral_sobolev_norm, GaffneyReport, SpectralField,
};
pub use container::{read_form, read_media, write_form, write_media, MediaFile, MediaSource};
pub use decomp::{hodge_decompose, potential_for_exact, solve_coderivative, weighted_decompose, HodgeSplit};
pub use halfspace::{
    diff_quotient, mirror_sd, mirror_sdelta, normal_derivative_reconstruct, shift, stokes_pairing_residual, trace_normal,
    trace_tangential, BoundaryForm, HalfGridField,
};
pub use manufactured::{Expr, ManufacturedForm};
pub use media::{make_transformation, CatalogMedium, DecayClass, MediaKind, MediaSpec, Transformation};
pub use probe::{
    bridge_check, estimate_probe_interior, estimate_probe_weighted, halfspace_probe, run_identity_suite, EstimateConfig,
    MediaChoice, ProbeReport,
};
pub use sobolev::{graph_norm, weighted_sobolev_norm, GraphKind, NormSpec, Scale};
