//! One-level two-channel analysis and synthesis with periodic boundaries.
//!
//! Analysis is the matrix form `low = L x`, `high = H x` where `L` (and `H`)
//! is a circulant filtering matrix with every other row kept. Row `i` of `L`
//! holds `h0[j]` at column `(2i + j) mod M`; row `i` of `H` holds `h1[j]` at
//! column `(2i + j - alignment) mod M`, with `alignment = 2N` so the Haar
//! core of the lifted high-pass lines up with the low-pass taps.
//!
//! Synthesis runs the lifting ladder backwards instead of inverting `[L; H]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lifting::{FilterPair, LiftingParams};

use std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone)]
pub struct AnalysisMatrices {
    low: DMatrix<f64>,
    high: DMatrix<f64>,
    len: usize,
    alignment: usize,
    params: LiftingParams,
    h1_len: usize,
}

impl AnalysisMatrices {
    pub fn low(&self) -> &DMatrix<f64> {
        &self.low
    }

    pub fn high(&self) -> &DMatrix<f64> {
        &self.high
    }

    /// Signal length `M`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn alignment(&self) -> usize {
        self.alignment
    }

    pub fn params(&self) -> &LiftingParams {
        &self.params
    }

    /// `[L; H]`, the full `M x M` analysis map.
    pub fn stacked(&self) -> DMatrix<f64> {
        let half = self.len / 2;
        let mut s = DMatrix::zeros(self.len, self.len);
        s.view_mut((0, 0), (half, self.len)).copy_from(&self.low);
        s.view_mut((half, 0), (half, self.len))
            .copy_from(&self.high);
        s
    }

    /// 2-norm condition number of the stacked analysis map.
    pub fn condition_number(&self) -> f64 {
        let sv = self.stacked().singular_values();
        sv.max() / sv.min()
    }

    fn high_column(&self, row: usize, tap: usize) -> usize {
        (2 * row + tap + self.len - self.alignment % self.len) % self.len
    }

    /// Pulls a gradient with respect to the entries of `H` back onto the
    /// high-pass taps (each tap appears once per row).
    pub fn high_tap_gradient(&self, grad_h: &DMatrix<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.h1_len];
        for (tap, g) in out.iter_mut().enumerate() {
            *g = (0..self.len / 2)
                .map(|row| grad_h[(row, self.high_column(row, tap))])
                .sum();
        }
        out
    }
}

/// Builds the decimated circulant analysis matrices for length-`len` signals.
pub fn build_matrices(fp: &FilterPair, len: usize) -> Result<AnalysisMatrices> {
    if !len.is_multiple_of(2) {
        return Err(Error::OddLength(len));
    }
    let support = fp.h1().len().max(fp.h0().len());
    if len < support {
        return Err(Error::TooShort { len, support });
    }
    build_matrices_wrapped(fp, len)
}

/// Like [`build_matrices`] but accepts signals shorter than the filter:
/// taps that land on the same column after wrapping are summed. Exact
/// reconstruction still holds for any even length.
pub fn build_matrices_wrapped(fp: &FilterPair, len: usize) -> Result<AnalysisMatrices> {
    if !len.is_multiple_of(2) || len == 0 {
        return Err(Error::OddLength(len));
    }
    let half = len / 2;
    let mut low = DMatrix::zeros(half, len);
    let mut high = DMatrix::zeros(half, len);
    let alignment = fp.base_delay();
    for row in 0..half {
        for (j, &t) in fp.h0().iter().enumerate() {
            low[(row, (2 * row + j) % len)] += t;
        }
    }
    let mut am = AnalysisMatrices {
        low,
        high: DMatrix::zeros(0, 0),
        len,
        alignment,
        params: fp.params().clone(),
        h1_len: fp.h1().len(),
    };
    for row in 0..half {
        for (j, &t) in fp.h1().iter().enumerate() {
            high[(row, am.high_column(row, j))] += t;
        }
    }
    am.high = high;
    Ok(am)
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// `(L x, H x)`.
pub fn analyze_1d(x: &[f64], am: &AnalysisMatrices) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(am.len, x.len())?;
    let xv = DVector::from_column_slice(x);
    let low = &am.low * &xv;
    let high = &am.high * &xv;
    Ok((low.as_slice().to_vec(), high.as_slice().to_vec()))
}

/// Inverse of [`analyze_1d`] by undoing the lifting steps.
///
/// With `alignment = 2N` the analysis reduces to the polyphase ladder
/// `high[i] = d[i] + sum_k a_k (low[i+k] - low[i-k])` on top of the Haar
/// butterfly `low = c(x_even + x_odd)`, `d = c(x_even - x_odd)`.
pub fn synthesize_1d(low: &[f64], high: &[f64], am: &AnalysisMatrices) -> Result<Vec<f64>> {
    let half = am.len / 2;
    check_len(half, low.len())?;
    check_len(half, high.len())?;
    let mut detail = high.to_vec();
    for (idx, &a) in am.params.as_slice().iter().enumerate().rev() {
        let k = (idx + 1) % half;
        for (i, d) in detail.iter_mut().enumerate() {
            *d -= a * (low[(i + k) % half] - low[(i + half - k) % half]);
        }
    }
    let mut x = vec![0.0; am.len];
    for i in 0..half {
        x[2 * i] = FRAC_1_SQRT_2 * (low[i] + detail[i]);
        x[2 * i + 1] = FRAC_1_SQRT_2 * (low[i] - detail[i]);
    }
    Ok(x)
}

/// Adjoint of the analysis map: `L^T dlow + H^T dhigh`.
pub fn analyze_1d_adjoint(dlow: &[f64], dhigh: &[f64], am: &AnalysisMatrices) -> Result<Vec<f64>> {
    let half = am.len / 2;
    check_len(half, dlow.len())?;
    check_len(half, dhigh.len())?;
    let out = am.low.tr_mul(&DVector::from_column_slice(dlow))
        + am.high.tr_mul(&DVector::from_column_slice(dhigh));
    Ok(out.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::{build_filters, haar_base};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const C: f64 = FRAC_1_SQRT_2;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn random_pair(rng: &mut ChaCha8Rng, steps: usize) -> FilterPair {
        build_filters(&LiftingParams::new(random_vec(rng, steps)).unwrap())
    }

    /// Circular correlation at every sample, then keep the even ones.
    fn filter_then_decimate(x: &[f64], taps: &[f64], shift: usize) -> Vec<f64> {
        let m = x.len() as isize;
        let full: Vec<f64> = (0..m)
            .map(|n| {
                taps.iter()
                    .enumerate()
                    .map(|(j, t)| t * x[(n + j as isize - shift as isize).rem_euclid(m) as usize])
                    .sum()
            })
            .collect();
        full.into_iter().step_by(2).collect()
    }

    #[test]
    fn haar_matrices() {
        let am = build_matrices(&haar_base(), 4).unwrap();
        let expected = DMatrix::from_row_slice(2, 4, &[C, C, 0.0, 0.0, 0.0, 0.0, C, C]);
        assert_eq!(am.low(), &expected);
        let (lo, hi) = analyze_1d(&[1.0; 4], &am).unwrap();
        for v in lo {
            assert!((v - 2f64.sqrt()).abs() < 1e-15);
        }
        assert_eq!(hi, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(matches!(
            build_matrices(&haar_base(), 7),
            Err(Error::OddLength(7))
        ));
        let fp = build_filters(&LiftingParams::zeros(2));
        assert!(matches!(
            build_matrices(&fp, 8),
            Err(Error::TooShort {
                len: 8,
                support: 10
            })
        ));
        let am = build_matrices(&fp, 10).unwrap();
        assert!(analyze_1d(&[0.0; 8], &am).is_err());
        assert!(synthesize_1d(&[0.0; 5], &[0.0; 4], &am).is_err());
    }

    #[test]
    fn impulse_response_places_taps_at_even_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fp = random_pair(&mut rng, 2);
        let am = build_matrices(&fp, 16).unwrap();
        let mut x = vec![0.0; 16];
        x[0] = 1.0;
        let (_, hi) = analyze_1d(&x, &am).unwrap();
        // high[i] picks the tap j with 2i + j - 4 = 0 (mod 16)
        for (i, &v) in hi.iter().enumerate() {
            let j = (4 + 16 - 2 * i) % 16;
            let expected = fp.h1().get(j).copied().unwrap_or(0.0);
            assert_eq!(v, expected, "row {i}");
        }
    }

    #[test]
    fn analysis_of_placed_low_pass() {
        let am = build_matrices(&haar_base(), 8).unwrap();
        let mut x = vec![0.0; 8];
        x[0] = C;
        x[1] = C;
        let (lo, hi) = analyze_1d(&x, &am).unwrap();
        assert!((lo[0] - 1.0).abs() < 1e-15);
        assert_eq!(&lo[1..], &[0.0, 0.0, 0.0]);
        assert_eq!(hi, vec![0.0; 4]);
    }

    #[test]
    fn analysis_matches_convolution_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for steps in 0..=3 {
            let fp = random_pair(&mut rng, steps);
            let am = build_matrices(&fp, 32).unwrap();
            let x = random_vec(&mut rng, 32);
            let (lo, hi) = analyze_1d(&x, &am).unwrap();
            let lo_ref = filter_then_decimate(&x, fp.h0(), 0);
            let hi_ref = filter_then_decimate(&x, fp.h1(), fp.base_delay());
            for (a, b) in lo.iter().zip(&lo_ref).chain(hi.iter().zip(&hi_ref)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn perfect_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &m in &[8usize, 16, 64] {
            for steps in 0..=3 {
                if m < 2 + 4 * steps {
                    continue;
                }
                for _ in 0..50 {
                    let am = build_matrices(&random_pair(&mut rng, steps), m).unwrap();
                    let x = random_vec(&mut rng, m);
                    let (lo, hi) = analyze_1d(&x, &am).unwrap();
                    let y = synthesize_1d(&lo, &hi, &am).unwrap();
                    let err = x
                        .iter()
                        .zip(&y)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    assert!(err < 1e-10, "M={m} N={steps}: {err}");
                }
            }
        }
    }

    #[test]
    fn synthesis_agrees_with_matrix_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let am = build_matrices(&random_pair(&mut rng, 2), 16).unwrap();
        let inv = am.stacked().try_inverse().expect("analysis map invertible");
        let lo = random_vec(&mut rng, 8);
        let hi = random_vec(&mut rng, 8);
        let mut stacked = lo.clone();
        stacked.extend_from_slice(&hi);
        let via_inverse = inv * DVector::from_vec(stacked);
        let via_lifting = synthesize_1d(&lo, &hi, &am).unwrap();
        for (a, b) in via_inverse.iter().zip(&via_lifting) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn synthesis_trivial_cases() {
        let am = build_matrices(&haar_base(), 2).unwrap();
        let x = synthesize_1d(&[2f64.sqrt()], &[0.0], &am).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);

        let fp = build_filters(&LiftingParams::new(vec![0.3, -0.2]).unwrap());
        let am = build_matrices(&fp, 16).unwrap();
        assert_eq!(
            synthesize_1d(&[0.0; 8], &[0.0; 8], &am).unwrap(),
            vec![0.0; 16]
        );
    }

    #[test]
    fn wrapped_short_signals_still_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for &m in &[2usize, 4, 6, 8] {
            for steps in 1..=3 {
                let am = build_matrices_wrapped(&random_pair(&mut rng, steps), m).unwrap();
                let x = random_vec(&mut rng, m);
                let (lo, hi) = analyze_1d(&x, &am).unwrap();
                let y = synthesize_1d(&lo, &hi, &am).unwrap();
                assert!(
                    x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12),
                    "M={m} N={steps}"
                );
            }
        }
    }

    #[test]
    fn condition_number_is_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for &m in &[8usize, 16, 64] {
            for steps in 0..=3 {
                if m < 2 + 4 * steps {
                    continue;
                }
                let am = build_matrices(&random_pair(&mut rng, steps), m).unwrap();
                let k = am.condition_number();
                assert!(k.is_finite() && k >= 1.0, "M={m} N={steps}: {k}");
            }
        }
    }

    #[test]
    fn lifted_bank_is_not_orthogonal() {
        // Reconstruction is exact but energy is not preserved.
        let fp = build_filters(&LiftingParams::new(vec![0.4]).unwrap());
        let am = build_matrices(&fp, 16).unwrap();
        let mut x = vec![0.0; 16];
        x[6] = 1.0;
        x[7] = 1.0;
        let (lo, hi) = analyze_1d(&x, &am).unwrap();
        let e_in: f64 = x.iter().map(|v| v * v).sum();
        let e_out: f64 = lo.iter().chain(&hi).map(|v| v * v).sum();
        assert!((e_in - e_out).abs() > 1e-3);
        let y = synthesize_1d(&lo, &hi, &am).unwrap();
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn adjoint_is_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let am = build_matrices(&random_pair(&mut rng, 1), 12).unwrap();
        let x = random_vec(&mut rng, 12);
        let dl = random_vec(&mut rng, 6);
        let dh = random_vec(&mut rng, 6);
        let (lo, hi) = analyze_1d(&x, &am).unwrap();
        let lhs: f64 = lo
            .iter()
            .zip(&dl)
            .chain(hi.iter().zip(&dh))
            .map(|(a, b)| a * b)
            .sum();
        let adj = analyze_1d_adjoint(&dl, &dh, &am).unwrap();
        let rhs: f64 = x.iter().zip(&adj).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
