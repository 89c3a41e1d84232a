//! Frequency response of FIR tap vectors on `[0, pi]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    H0,
    H1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterId {
    pub steps: usize,
    pub params: Vec<f64>,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub omega: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Unwrapped phase in radians.
    pub phase: Vec<f64>,
    pub filter_id: Option<FilterId>,
}

impl FrequencyResponse {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn with_id(mut self, id: FilterId) -> Self {
        self.filter_id = Some(id);
        self
    }
}

/// `H(e^{jw}) = sum_n taps[n] e^{-jwn}`.
pub fn response_at(taps: &[f64], omega: f64) -> Complex64 {
    // Horner in e^{-jw}, highest power first.
    let zinv = Complex64::from_polar(1.0, -omega);
    taps.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &t| acc * zinv + t)
}

/// Removes `2 pi` jumps between consecutive samples.
pub fn unwrap_phase(phase: &mut [f64]) {
    let mut offset = 0.0;
    for i in 1..phase.len() {
        let raw = phase[i] + offset;
        let delta = raw - phase[i - 1];
        if delta > PI {
            offset -= 2.0 * PI * ((delta + PI) / (2.0 * PI)).floor();
        } else if delta < -PI {
            offset += 2.0 * PI * ((-delta + PI) / (2.0 * PI)).floor();
        }
        phase[i] += offset;
    }
}

/// Samples the response at `samples` evenly spaced points from 0 to pi inclusive.
pub fn freqz(taps: &[f64], samples: usize) -> Result<FrequencyResponse> {
    if taps.is_empty() {
        return Err(Error::Config("tap vector is empty".into()));
    }
    if samples < 2 {
        return Err(Error::Config(format!(
            "need at least 2 frequency samples, got {samples}"
        )));
    }
    let step = PI / (samples - 1) as f64;
    let omega: Vec<f64> = (0..samples)
        .map(|i| {
            if i + 1 == samples {
                PI
            } else {
                i as f64 * step
            }
        })
        .collect();
    let values: Vec<Complex64> = omega.iter().map(|&w| response_at(taps, w)).collect();
    let magnitude = values.iter().map(|v| v.norm()).collect();
    let mut phase: Vec<f64> = values.iter().map(|v| v.arg()).collect();
    unwrap_phase(&mut phase);
    Ok(FrequencyResponse {
        omega,
        magnitude,
        phase,
        filter_id: None,
    })
}
