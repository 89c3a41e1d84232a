//! Lifting construction of tunable biorthogonal filter pairs.
//!
//! Starting from the Haar pair, each lifting step `k` keeps the low-pass
//! branch and updates the high-pass branch as
//!
//! ```text
//! H1_k(z) = P_k(z^2) H0(z) + z^-2 H1_{k-1}(z),   P_k(z^2) = -a_k + a_k z^-4k
//! ```
//!
//! Taps are stored causally (coefficient of `z^0` first). Because every
//! step is affine in its own `a_k` and leaves `H0` untouched, the final
//! high-pass is affine in the whole parameter vector; [`closed_form_filters`],
//! [`filter_jacobian`] and [`solve_params`] all rely on that.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reference;

/// Default `a_3` used by the three-step initialization.
pub const DEFAULT_A3_INIT: f64 = 1e-3;

/// The tunable lifting coefficients `a_1..a_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LiftingParams {
    a: Vec<f64>,
}

impl LiftingParams {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = a.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteParam {
                index: index + 1,
                value,
            });
        }
        Ok(Self { a })
    }

    /// `steps` identity lifting steps (all `a_k = 0`).
    pub fn zeros(steps: usize) -> Self {
        Self {
            a: vec![0.0; steps],
        }
    }

    pub fn steps(&self) -> usize {
        self.a.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.a
    }
}

impl TryFrom<Vec<f64>> for LiftingParams {
    type Error = Error;

    fn try_from(a: Vec<f64>) -> Result<Self> {
        Self::new(a)
    }
}

impl From<LiftingParams> for Vec<f64> {
    fn from(p: LiftingParams) -> Self {
        p.a
    }
}

/// Analysis low-pass / high-pass taps produced by the lifting ladder.
///
/// `base_delay` is the `z^-2N` delay the high-pass branch accumulated
/// relative to the untouched two-tap low-pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPair {
    h0: Vec<f64>,
    h1: Vec<f64>,
    base_delay: usize,
    params: LiftingParams,
}

impl FilterPair {
    pub fn h0(&self) -> &[f64] {
        &self.h0
    }

    pub fn h1(&self) -> &[f64] {
        &self.h1
    }

    pub fn base_delay(&self) -> usize {
        self.base_delay
    }

    /// Lifting coefficients this pair was built from.
    pub fn params(&self) -> &LiftingParams {
        &self.params
    }

    pub fn steps(&self) -> usize {
        self.params.steps()
    }
}

/// Haar / Bior1.1 starting pair.
pub fn haar_base() -> FilterPair {
    FilterPair {
        h0: vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2],
        h1: vec![FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
        base_delay: 0,
        params: LiftingParams::zeros(0),
    }
}

/// Length of the high-pass filter after `steps` lifting steps on the Haar base.
pub fn high_pass_len(steps: usize) -> usize {
    2 + 4 * steps
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn delay(taps: &[f64], by: usize) -> Vec<f64> {
    let mut out = vec![0.0; by];
    out.extend_from_slice(taps);
    out
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &v) in a.iter().enumerate() {
        out[i] += v;
    }
    for (i, &v) in b.iter().enumerate() {
        out[i] += v;
    }
    out
}

/// `P_k(z^2) = -a + a z^{-4k}` as a tap vector.
fn lifting_step_poly(a: f64, k: usize) -> Vec<f64> {
    let mut p = vec![0.0; 4 * k + 1];
    p[0] = -a;
    p[4 * k] = a;
    p
}

/// Runs the lifting recursion step by step.
pub fn build_filters(params: &LiftingParams) -> FilterPair {
    let base = haar_base();
    let h0 = base.h0;
    let mut h1 = base.h1;
    for (idx, &a) in params.as_slice().iter().enumerate() {
        let k = idx + 1;
        let lifted = convolve(&lifting_step_poly(a, k), &h0);
        h1 = add(&lifted, &delay(&h1, 2));
    }
    FilterPair {
        h0,
        h1,
        base_delay: 2 * params.steps(),
        params: params.clone(),
    }
}

/// Tap vector of `(z^{-4k} - 1) z^{-2(N-k)} H0(z)`, the coefficient of `a_k`.
fn lifting_direction(steps: usize, k: usize) -> Vec<f64> {
    let len = high_pass_len(steps);
    let mut col = vec![0.0; len];
    let lo = 2 * (steps - k);
    let hi = lo + 4 * k;
    col[lo] = -FRAC_1_SQRT_2;
    col[lo + 1] = -FRAC_1_SQRT_2;
    col[hi] += FRAC_1_SQRT_2;
    col[hi + 1] += FRAC_1_SQRT_2;
    col
}

/// `z^{-2N} H1^0(z)`: the high-pass at `a = 0`.
fn delayed_haar_high(steps: usize) -> Vec<f64> {
    let mut taps = vec![0.0; high_pass_len(steps)];
    taps[2 * steps] = FRAC_1_SQRT_2;
    taps[2 * steps + 1] = -FRAC_1_SQRT_2;
    taps
}

/// Evaluates the affine expansion of the high-pass directly:
/// `h1 = z^{-2N} H1^0 + sum_k a_k (z^{-4k} - 1) z^{-2(N-k)} H0^0`.
pub fn closed_form_filters(params: &LiftingParams) -> FilterPair {
    let n = params.steps();
    let mut h1 = delayed_haar_high(n);
    for (idx, &a) in params.as_slice().iter().enumerate() {
        for (t, d) in h1.iter_mut().zip(lifting_direction(n, idx + 1)) {
            *t += a * d;
        }
    }
    FilterPair {
        h0: haar_base().h0,
        h1,
        base_delay: 2 * n,
        params: params.clone(),
    }
}

/// `d h1 / d a` as a `(2 + 4N) x N` matrix. Constant in `a`.
pub fn filter_jacobian(params: &LiftingParams) -> DMatrix<f64> {
    jacobian_for_steps(params.steps())
}

pub(crate) fn jacobian_for_steps(steps: usize) -> DMatrix<f64> {
    let len = high_pass_len(steps);
    let mut jac = DMatrix::zeros(len, steps);
    for k in 1..=steps {
        for (row, v) in lifting_direction(steps, k).into_iter().enumerate() {
            jac[(row, k - 1)] = v;
        }
    }
    jac
}

/// Least-squares parameter fit and its residual norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamFit {
    pub params: LiftingParams,
    /// Euclidean norm of `build_filters(params).h1 - target`.
    pub residual: f64,
}

/// Fits `a` so that the lifted high-pass best matches `target_h1`.
///
/// Uses a QR factorization of the (constant) Jacobian; no normal equations.
pub fn solve_params(target_h1: &[f64], steps: usize) -> Result<ParamFit> {
    let len = high_pass_len(steps);
    if target_h1.len() != len {
        return Err(Error::LengthMismatch {
            expected: len,
            actual: target_h1.len(),
        });
    }
    if let Some((i, &v)) = target_h1.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteParam { index: i, value: v });
    }
    let offset = DVector::from_vec(delayed_haar_high(steps));
    let target = DVector::from_column_slice(target_h1);
    let rhs = &target - &offset;

    let a = if steps == 0 {
        Vec::new()
    } else {
        let jac = jacobian_for_steps(steps);
        let qr = jac.clone().qr();
        let r = qr.r();
        let scale = r.diagonal().amax();
        let rank = r
            .diagonal()
            .iter()
            .filter(|d| d.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE))
            .count();
        if rank < steps {
            return Err(Error::RankDeficient { rank, steps });
        }
        let qt_rhs = qr.q().transpose() * &rhs;
        let sol = r
            .solve_upper_triangular(&qt_rhs)
            .ok_or(Error::RankDeficient { rank, steps })?;
        sol.iter().copied().collect()
    };

    let params = LiftingParams::new(a)?;
    let fitted = closed_form_filters(&params);
    let residual = fitted
        .h1
        .iter()
        .zip(target_h1)
        .map(|(f, t)| (f - t) * (f - t))
        .sum::<f64>()
        .sqrt();
    Ok(ParamFit { params, residual })
}

/// Starting point for the lifting coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitMode {
    /// All `a_k = 0`: a delayed Haar pair for any step count.
    #[serde(rename = "haar")]
    Haar,
    /// One step fitted to the Bior1.3 high-pass.
    #[serde(rename = "bior1.3")]
    Bior13,
    /// Two steps fitted to the Bior1.5 high-pass.
    #[serde(rename = "bior1.5")]
    Bior15,
    /// Bior1.5 coefficients followed by a small third coefficient.
    #[serde(rename = "near-zero-a3")]
    NearZeroA3,
}

impl InitMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "haar" => Some(Self::Haar),
            "bior1.3" => Some(Self::Bior13),
            "bior1.5" => Some(Self::Bior15),
            "near-zero-a3" => Some(Self::NearZeroA3),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Haar => "haar",
            Self::Bior13 => "bior1.3",
            Self::Bior15 => "bior1.5",
            Self::NearZeroA3 => "near-zero-a3",
        }
    }

    /// Step count the mode is defined for; `None` means any.
    pub fn required_steps(self) -> Option<usize> {
        match self {
            Self::Haar => None,
            Self::Bior13 => Some(1),
            Self::Bior15 => Some(2),
            Self::NearZeroA3 => Some(3),
        }
    }

    /// Initial parameters for `steps` lifting steps.
    pub fn params(self, steps: usize, a3: f64) -> Result<LiftingParams> {
        if let Some(required) = self.required_steps() {
            if required != steps {
                return Err(Error::Config(format!(
                    "init mode {} needs {} lifting steps, got {}",
                    self.name(),
                    required,
                    steps
                )));
            }
        }
        match self {
            Self::Haar => Ok(LiftingParams::zeros(steps)),
            Self::Bior13 => Ok(solve_params(&reference::bior13_h1(), 1)?.params),
            Self::Bior15 => Ok(solve_params(&reference::bior15_h1(), 2)?.params),
            Self::NearZeroA3 => {
                let mut a = solve_params(&reference::bior15_h1(), 2)?.params.into_vec();
                a.push(a3);
                LiftingParams::new(a)
            }
        }
    }
}
