//! Tunable biorthogonal wavelet filter banks built by lifting.
//!
//! The high-pass filter is grown from the Haar pair by lifting steps with
//! tunable coefficients; the resulting bank is used for periodic one-level
//! 1D/2D decompositions with exact reconstruction, frequency-response
//! analysis, and a small trainable wavelet pooling unit.

pub mod dwt2d;
pub mod error;
pub mod filterbank;
pub mod formats;
pub mod lifting;
pub mod reference;
pub mod spectral;
pub mod training;
pub mod unit;

pub use dwt2d::{dwt2, idwt2, Dwt2Plan, Image, Provenance, Subbands};
pub use error::{Error, Result};
pub use filterbank::{analyze_1d, build_matrices, synthesize_1d, AnalysisMatrices};
pub use lifting::{
    build_filters, closed_form_filters, filter_jacobian, haar_base, solve_params, FilterPair,
    InitMode, LiftingParams, ParamFit,
};
pub use spectral::{freqz, FrequencyResponse};
pub use unit::{unit_backward, unit_forward, UnitCache, UnitGradients, WaveletUnitParams};
