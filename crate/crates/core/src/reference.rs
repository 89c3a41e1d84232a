//! Published reference taps for the Bior1.3 and Bior1.5 high-pass filters.
//!
//! The `*_PRINTED` arrays are the four-decimal values as published, whose
//! central Haar taps read `0.7071`. The fitting targets rescale those taps so
//! the central pair equals `1/sqrt(2)` exactly: the published lifting
//! coefficients (`880/7071`, `405/2357`, `-166/7071`) are exactly the ratios
//! of the printed outer taps to the printed `0.7071`.

#![allow(clippy::approx_constant)]

use std::f64::consts::FRAC_1_SQRT_2;

/// Printed central tap magnitude.
pub const PRINTED_UNIT: f64 = 0.7071;

pub const HAAR_H0_PRINTED: [f64; 2] = [0.7071, 0.7071];

pub const BIOR13_H1_PRINTED: [f64; 6] = [-0.0880, -0.0880, 0.7071, -0.7071, 0.0880, 0.0880];

pub const BIOR15_H1_PRINTED: [f64; 10] = [
    0.0166, 0.0166, -0.1215, -0.1215, 0.7071, -0.7071, 0.1215, 0.1215, -0.0166, -0.0166,
];

/// Published one-step coefficient.
pub const BIOR13_A: [f64; 1] = [880.0 / 7071.0];

/// Published two-step coefficients.
pub const BIOR15_A: [f64; 2] = [405.0 / 2357.0, -166.0 / 7071.0];

fn rescale(printed: &[f64]) -> Vec<f64> {
    printed
        .iter()
        .map(|t| t / PRINTED_UNIT * FRAC_1_SQRT_2)
        .collect()
}

/// Bior1.3 high-pass target for a one-step fit.
pub fn bior13_h1() -> Vec<f64> {
    rescale(&BIOR13_H1_PRINTED)
}

/// Bior1.5 high-pass target for a two-step fit.
pub fn bior15_h1() -> Vec<f64> {
    rescale(&BIOR15_H1_PRINTED)
}
